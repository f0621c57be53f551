//! Command-line front end. Exit codes: 0 success, 1 internal error, 2 usage
//! or input error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::audit::audit;
use crate::error::{Error, Result};
use crate::eval::{evaluate, write_fact_csv, EvalOptions};
use crate::gibbs::{parse_query, write_trace_csv, Scorer};
use crate::ground::{gibbs_sample, ground_template, SampleOptions};
use crate::rdn::moralize_to_rdn;
use crate::store::{load_dir, Database, GroundAtom, Schema, Value};
use crate::template::{
    default_candidates, estimate_parameters_timed, hill_climb, BnStructure, LearnOptions, Prv, TemplateBn,
};

#[derive(Debug, Parser, Serialize)]
#[command(name = "rdnbayes", version, about = "Template Bayesian networks and their dependency networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Estimate CPTs for a given structure, or hill-climb one first.
    Learn(LearnArgs),
    /// Moralize a model into its dependency network.
    Transform(TransformArgs),
    /// Gibbs distribution of one ground atom, with the per-family trace.
    Score(ScoreArgs),
    /// Subgraph cross-validation: CLL and AUC-PR.
    Evaluate(EvaluateArgs),
    /// Look for edges whose Gibbs conditionals admit no joint distribution.
    AuditConsistency(AuditArgs),
    /// Ordered Gibbs sampling over the ground dependency network.
    Sample(SampleArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub schema: PathBuf,
    /// Directory with one CSV per functor.
    #[arg(long)]
    pub data_dir: PathBuf,
}

impl DataArgs {
    fn load(&self) -> Result<Database> {
        load_dir(&self.schema, &self.data_dir)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LearnArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Structure (or model) JSON; without it the structure is learned.
    #[arg(long)]
    pub structure: Option<PathBuf>,
    /// Candidate nodes for structure learning, separated by `;`.
    #[arg(long)]
    pub candidates: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub pseudocount: f64,
    #[arg(long, default_value_t = 3)]
    pub max_parents: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Ground atom, e.g. `g(sam)`.
    #[arg(long)]
    pub target: String,
    /// Template node to score at; by default the best match.
    #[arg(long)]
    pub node: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub pseudocount: f64,
    /// Functors to score, separated by `,`.
    #[arg(long)]
    pub predicates: Option<String>,
    /// Score with the model's CPTs instead of re-estimating per fold.
    #[arg(long)]
    pub fixed: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct AuditArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Populations come from here.
    #[arg(long)]
    pub schema: PathBuf,
    /// Clamped atoms, `atom=value` separated by `;`.
    #[arg(long)]
    pub evidence: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Defaults to a tenth of the iterations.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let out = match &cli.command {
        Command::Learn(a) => Some(a.out.as_path()),
        Command::Transform(a) => a.out.as_deref(),
        Command::Score(a) => a.out.as_deref(),
        Command::Evaluate(a) => a.out.as_deref(),
        Command::AuditConsistency(a) => a.out.as_deref(),
        Command::Sample(a) => a.out.as_deref(),
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = serde_json::to_string_pretty(&cli.command).expect("config serializes");
        write(dir, "run_config.json", &config)?;
    }
    match &cli.command {
        Command::Learn(a) => learn(a),
        Command::Transform(a) => transform(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => eval_cmd(a),
        Command::AuditConsistency(a) => audit_cmd(a),
        Command::Sample(a) => sample(a),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
}

fn create(dir: &Path, name: &str) -> Result<std::fs::File> {
    let p = dir.join(name);
    std::fs::File::create(&p).map_err(|e| Error::io(&p, e))
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn learn(a: &LearnArgs) -> Result<()> {
    let db = a.data.load()?;
    let structure = match &a.structure {
        Some(p) => BnStructure::load(p)?,
        None => {
            let candidates = match &a.candidates {
                Some(text) => text
                    .split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(Prv::parse)
                    .collect::<Result<Vec<_>>>()?,
                None => default_candidates(db.schema()),
            };
            let opts = LearnOptions {
                max_parents: a.max_parents,
                seed: a.seed,
                pseudocount: a.pseudocount,
                ..LearnOptions::default()
            };
            hill_climb(&db, &candidates, &opts)?
        }
    };
    let (bn, secs) = estimate_parameters_timed(&structure, &db, a.pseudocount)?;
    let mut timing = serde_json::Map::new();
    for (i, s) in secs.iter().enumerate() {
        let node = structure.node(i).to_string();
        eprintln!("{node}: {s:.3} s");
        timing.insert(node, json!(s));
    }
    bn.save(&a.out.join("model.json"))?;
    write(&a.out, "timing.json", &pretty(&timing))?;
    emit(&a.out.join("model.json").display().to_string());
    Ok(())
}

fn transform(a: &TransformArgs) -> Result<()> {
    let bn = TemplateBn::load(&a.model)?;
    let mut rdn = moralize_to_rdn(&bn);
    rdn.set_source_model(Some(a.model.display().to_string()));
    match &a.out {
        Some(dir) => write(dir, "rdn.json", &rdn.to_json()),
        None => {
            emit(&rdn.to_json());
            Ok(())
        }
    }
}

fn score(a: &ScoreArgs) -> Result<()> {
    let bn = TemplateBn::load(&a.model)?;
    let db = a.data.load()?;
    let schema = db.schema();
    let query = parse_query(&bn, schema, &a.target, a.node.as_deref())?;
    let scorer = Scorer::new(&bn, schema)?;
    let resolved = scorer.resolve(schema, &query)?;
    let range = &bn.structure().decl(resolved.node).range;
    let probs = scorer.probability(&db, &query)?;
    let traces = (0..range.len())
        .map(|t| scorer.trace(&db, &query, t as Value))
        .collect::<Result<Vec<_>>>()?;
    let dist: serde_json::Map<String, serde_json::Value> =
        range.iter().zip(&probs).map(|(v, p)| (v.clone(), json!(p))).collect();
    let scores: serde_json::Map<String, serde_json::Value> =
        traces.iter().map(|t| (t.value.clone(), json!(t.score))).collect();
    let report = json!({
        "target": a.target,
        "node": bn.structure().node(resolved.node).to_string(),
        "probabilities": dist,
        "scores": scores,
    });
    emit(&pretty(&report));
    if let Some(dir) = &a.out {
        write(dir, "distribution.json", &pretty(&report))?;
        write_trace_csv(create(dir, "trace.csv")?, &traces)?;
    }
    Ok(())
}

fn eval_cmd(a: &EvaluateArgs) -> Result<()> {
    let bn = TemplateBn::load(&a.model)?;
    let db = a.data.load()?;
    let opts = EvalOptions {
        folds: a.folds,
        seed: a.seed,
        pseudocount: a.pseudocount,
        predicates: a
            .predicates
            .as_ref()
            .map(|p| p.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()),
        reestimate: !a.fixed,
    };
    let (report, rows) = evaluate(&bn, &db, &opts)?;
    emit(&pretty(&report));
    if let Some(dir) = &a.out {
        write(dir, "report.json", &pretty(&report))?;
        write_fact_csv(create(dir, "facts.csv")?, &rows)?;
    }
    Ok(())
}

fn audit_cmd(a: &AuditArgs) -> Result<()> {
    let bn = TemplateBn::load(&a.model)?;
    let report = audit(&bn)?;
    emit(&pretty(&report));
    if let Some(dir) = &a.out {
        write(dir, "audit.json", &pretty(&report))?;
    }
    Ok(())
}

fn parse_evidence(schema: &Schema, text: &str) -> Result<Vec<(GroundAtom, Value)>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (atom, value) = item
                .rsplit_once('=')
                .ok_or_else(|| Error::Parse(format!("evidence item {item:?} lacks '='")))?;
            let atom = schema.parse_atom(atom.trim())?;
            let v = schema.functor(atom.functor).decl.value_index(value.trim())?;
            Ok((atom, v))
        })
        .collect()
}

fn sample(a: &SampleArgs) -> Result<()> {
    let bn = TemplateBn::load(&a.model)?;
    let schema = std::sync::Arc::new(Schema::load(&a.schema)?);
    bn.structure().check_schema(&schema)?;
    let evidence = match &a.evidence {
        Some(t) => parse_evidence(&schema, t)?,
        None => Vec::new(),
    };
    let rdn = moralize_to_rdn(&bn);
    let graph = ground_template(&rdn, &schema)?;
    let opts = SampleOptions {
        iterations: a.iterations,
        burn_in: a.burn_in,
        seed: a.seed,
        ..SampleOptions::default()
    };
    let res = gibbs_sample(&graph, &bn, &schema, &evidence, &opts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["atom", "value", "frequency"])
        .map_err(|e| Error::Internal(e.to_string()))?;
    for (atom, freqs) in res.free.iter().zip(&res.marginals) {
        let decl = &schema.functor(atom.functor).decl;
        for (v, f) in freqs.iter().enumerate() {
            w.write_record([schema.display_atom(atom), decl.range[v].clone(), f.to_string()])
                .map_err(|e| Error::Internal(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    let text = String::from_utf8(bytes).expect("csv is utf-8");
    match &a.out {
        Some(dir) => write(dir, "marginals.csv", &text),
        None => {
            emit(text.trim_end());
            Ok(())
        }
    }
}
