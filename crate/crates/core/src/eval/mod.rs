//! Cross-validated evaluation and synthetic data.

mod metrics;
mod split;
mod synthetic;

pub use metrics::{auc_pr, conditional_log_likelihood, pr_points, score_facts, FactScore, MeanStderr, PROB_FLOOR};
pub use split::{restrict, subgraph_split, Fold, FoldSpec};
pub use synthetic::{generate_synthetic, MAX_GROUND_ATOMS};

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::{Database, FunctorId};
use crate::template::{estimate_parameters, TemplateBn};

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub folds: usize,
    pub seed: u64,
    pub pseudocount: f64,
    /// Functor names to score; defaults to the model's attribute functors.
    pub predicates: Option<Vec<String>>,
    /// Re-estimate the CPTs on each training side. Off: score with the
    /// given CPTs.
    pub reestimate: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            folds: 5,
            seed: 0,
            pseudocount: 1.0,
            predicates: None,
            reestimate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredicateMetrics {
    pub predicate: String,
    pub cll: MeanStderr,
    /// `None` when no fold had a positive label.
    pub auc_pr: Option<MeanStderr>,
    pub facts: usize,
    pub zero_probability_facts: usize,
    /// Mean scoring time per fold.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    /// Macro-average over predicates.
    pub cll: f64,
    pub auc_pr: Option<f64>,
    pub facts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub cll: MeanStderr,
    pub auc_pr: Option<MeanStderr>,
    pub per_predicate: Vec<PredicateMetrics>,
    pub folds: Vec<FoldMetrics>,
    pub fold_count: usize,
    pub seed: u64,
    pub zero_probability_facts: usize,
}

/// One line of the per-fact output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactRow {
    pub fold: usize,
    pub atom: String,
    pub truth: String,
    pub probability: f64,
}

pub fn default_predicates(bn: &TemplateBn) -> Vec<String> {
    let mut out: Vec<String> = bn
        .structure()
        .functors()
        .iter()
        .filter(|d| !d.is_relationship())
        .map(|d| d.name.clone())
        .collect();
    out.sort();
    out
}

/// Subgraph cross-validation of `bn` on `db`.
pub fn evaluate(bn: &TemplateBn, db: &Database, opts: &EvalOptions) -> Result<(MetricReport, Vec<FactRow>)> {
    bn.structure().check_schema(db.schema())?;
    let predicates = opts.predicates.clone().unwrap_or_else(|| default_predicates(bn));
    if predicates.is_empty() {
        return Err(Error::InvalidArgument("no predicates to evaluate".into()));
    }
    let fids: Vec<FunctorId> = predicates
        .iter()
        .map(|p| {
            if !bn.structure().functors().iter().any(|d| &d.name == p) {
                return Err(Error::UnknownFunctor(p.clone()));
            }
            db.schema().functor_id(p)
        })
        .collect::<Result<_>>()?;
    let (_, folds) = subgraph_split(db, opts.folds, opts.seed)?;

    // [predicate][fold]
    let np = predicates.len();
    let mut cll = vec![Vec::new(); np];
    let mut auc = vec![Vec::new(); np];
    let mut facts = vec![0usize; np];
    let mut zeros = vec![0usize; np];
    let mut secs = vec![0.0; np];
    let mut fold_metrics = Vec::new();
    let mut rows = Vec::new();
    for fold in &folds {
        let model = if opts.reestimate {
            estimate_parameters(bn.structure(), &fold.train, opts.pseudocount)?
        } else {
            bn.clone()
        };
        let schema = fold.test.schema();
        let (mut fold_cll, mut fold_auc, mut fold_facts) = (Vec::new(), Vec::new(), 0);
        for (k, &f) in fids.iter().enumerate() {
            let start = Instant::now();
            let scored = score_facts(&model, &fold.test, f)?;
            secs[k] += start.elapsed().as_secs_f64();
            if scored.is_empty() {
                continue;
            }
            let info = schema.functor(f);
            let c = conditional_log_likelihood(&scored);
            cll[k].push(c);
            fold_cll.push(c);
            let pts = pr_points(
                &scored,
                info.range_len(),
                info.is_relationship().then(|| info.true_value()),
            );
            if let Ok(a) = auc_pr(&pts) {
                auc[k].push(a);
                fold_auc.push(a);
            }
            facts[k] += scored.len();
            fold_facts += scored.len();
            zeros[k] += scored.iter().filter(|s| s.is_zero()).count();
            for s in &scored {
                rows.push(FactRow {
                    fold: fold.index,
                    atom: schema.display_atom(&s.atom),
                    truth: info.decl.range[s.truth as usize].clone(),
                    probability: s.truth_probability(),
                });
            }
        }
        if !fold_cll.is_empty() {
            fold_metrics.push(FoldMetrics {
                fold: fold.index,
                cll: mean(&fold_cll),
                auc_pr: (!fold_auc.is_empty()).then(|| mean(&fold_auc)),
                facts: fold_facts,
            });
        }
    }
    let per_predicate = (0..np)
        .map(|k| PredicateMetrics {
            predicate: predicates[k].clone(),
            cll: MeanStderr::of(&cll[k]),
            auc_pr: (!auc[k].is_empty()).then(|| MeanStderr::of(&auc[k])),
            facts: facts[k],
            zero_probability_facts: zeros[k],
            seconds: secs[k] / folds.len() as f64,
        })
        .collect();
    let fold_cll: Vec<f64> = fold_metrics.iter().map(|m| m.cll).collect();
    let fold_auc: Vec<f64> = fold_metrics.iter().filter_map(|m| m.auc_pr).collect();
    Ok((
        MetricReport {
            cll: MeanStderr::of(&fold_cll),
            auc_pr: (!fold_auc.is_empty()).then(|| MeanStderr::of(&fold_auc)),
            per_predicate,
            folds: fold_metrics,
            fold_count: opts.folds,
            seed: opts.seed,
            zero_probability_facts: zeros.iter().sum(),
        },
        rows,
    ))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Writes per-fact rows as CSV.
pub fn write_fact_csv<W: std::io::Write>(out: W, rows: &[FactRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Internal(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(())
}
