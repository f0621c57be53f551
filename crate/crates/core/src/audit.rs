//! Consistency audit of the dependency network a template BN defines.
//!
//! A BN edge `T1 -> T2` whose endpoints use different variable sets and
//! share no child is suitable: a database can be built in which `T2`'s
//! family has a different number of relevant groundings when seen from
//! `T1*` than when seen from `T2*`. If the CPT of `T2` also makes `T1` and
//! `T2` dependent, the four Gibbs conditionals linking the two targets
//! cannot come from one joint distribution. The gap is measured as the log
//! ratio between the two ways of chaining the conditionals from
//! `(T, T)` to `(F, F)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{GibbsQuery, Resolved, Scorer};
use crate::store::count::{count_table, Filter};
use crate::store::{
    compile, for_each_tuple, ConstId, Database, DatabaseBuilder, GroundAtom, Grounding, Pinned,
    Population, Schema, Value,
};
use crate::template::{BnStructure, Prv, TemplateBn, Term};

/// Residuals above this are inconsistent.
pub const INCONSISTENT_TOL: f64 = 1e-6;
/// Residuals below this are consistent at the witness.
pub const CONSISTENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuitableEdge {
    pub parent: usize,
    pub child: usize,
    pub parent_prv: String,
    pub child_prv: String,
    pub shared_vars: Vec<String>,
}

/// Edges whose endpoints have different variable sets and no common child.
pub fn find_suitable_edges(bn: &BnStructure) -> Vec<SuitableEdge> {
    let mut out = Vec::new();
    for (p, c) in bn.edges() {
        let (vp, vc) = (bn.var_set(p), bn.var_set(c));
        if vp == vc {
            continue;
        }
        let cp: BTreeSet<usize> = bn.children(p).iter().copied().collect();
        if bn.children(c).iter().any(|x| cp.contains(x)) {
            continue;
        }
        out.push(SuitableEdge {
            parent: p,
            child: c,
            parent_prv: bn.node(p).to_string(),
            child_prv: bn.node(c).to_string(),
            shared_vars: vp.intersection(&vc).map(|s| s.to_string()).collect(),
        });
    }
    out
}

/// Range index playing the part of "true" and "false" for a binary node:
/// `T` and `F` for relationships, the first and second value otherwise.
fn roles(bn: &BnStructure, i: usize) -> (Value, Value) {
    let d = bn.decl(i);
    if d.is_relationship() {
        let t = d.value_index("T").expect("relationship has T");
        (t, 1 - t)
    } else {
        (0, 1)
    }
}

fn is_binary(bn: &BnStructure, i: usize) -> bool {
    bn.range_len(i) == 2
}

/// Parents of the edge's child other than the edge's parent, ascending.
pub fn other_parents(bn: &BnStructure, edge: &SuitableEdge) -> Vec<usize> {
    bn.parents(edge.child)
        .iter()
        .copied()
        .filter(|&q| q != edge.parent)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nonredundancy {
    pub nonredundant: bool,
    /// A denominator CP was zero; the ratios are not finite.
    pub degenerate: bool,
    /// `CP(T2=F | T1=F, pa) / CP(T2=T | T1=F, pa)`.
    pub ratio_f: f64,
    /// `CP(T2=F | T1=T, pa) / CP(T2=T | T1=T, pa)`.
    pub ratio_t: f64,
}

/// Whether `T1` and `T2` are dependent in `T2`'s CPT under the setting `pa`
/// of the other parents.
pub fn check_nonredundancy(bn: &TemplateBn, edge: &SuitableEdge, pa: &[Value]) -> Result<Nonredundancy> {
    let s = bn.structure();
    if !is_binary(s, edge.parent) || !is_binary(s, edge.child) {
        return Err(Error::InvalidArgument(format!(
            "edge {} -> {} is not between binary nodes",
            edge.parent_prv, edge.child_prv
        )));
    }
    let others = other_parents(s, edge);
    if pa.len() != others.len() {
        return Err(Error::InvalidArgument(format!(
            "parent setting has {} values, expected {}",
            pa.len(),
            others.len()
        )));
    }
    let (t1, f1) = roles(s, edge.parent);
    let (t2, f2) = roles(s, edge.child);
    let cpt = bn.cpt(edge.child);
    let ratio = |x: Value| {
        let vals: Vec<Value> = s
            .parents(edge.child)
            .iter()
            .map(|&q| {
                if q == edge.parent {
                    x
                } else {
                    pa[others.iter().position(|&o| o == q).unwrap()]
                }
            })
            .collect();
        let r = cpt.row_index(&vals);
        (cpt.prob(r, f2 as usize), cpt.prob(r, t2 as usize))
    };
    let (nf_f, nt_f) = ratio(f1);
    let (nf_t, nt_t) = ratio(t1);
    if nt_f == 0.0 || nt_t == 0.0 {
        return Ok(Nonredundancy {
            nonredundant: true,
            degenerate: true,
            ratio_f: nf_f / nt_f,
            ratio_t: nf_t / nt_t,
        });
    }
    let (ratio_f, ratio_t) = (nf_f / nt_f, nf_t / nt_t);
    Ok(Nonredundancy {
        nonredundant: (ratio_f - ratio_t).abs() > 1e-12,
        degenerate: false,
        ratio_f,
        ratio_t,
    })
}

/// The first setting of the other parents, in row order, under which the
/// edge is nonredundant with finite ratios. Settings with a false
/// relationship parent are skipped since they have no relevant groundings.
pub fn find_nonredundant_setting(bn: &TemplateBn, edge: &SuitableEdge) -> Result<Option<Vec<Value>>> {
    let s = bn.structure();
    let others = other_parents(s, edge);
    let dims: Vec<usize> = others.iter().map(|&q| s.range_len(q)).collect();
    let mut found = None;
    let mut err = None;
    for_each_tuple(&dims, |t| {
        if found.is_some() || err.is_some() {
            return;
        }
        let pa: Vec<Value> = t.iter().map(|&v| v as Value).collect();
        let has_false_rel = others
            .iter()
            .zip(&pa)
            .any(|(&q, &v)| s.is_relationship(q) && v != roles(s, q).0);
        if has_false_rel {
            return;
        }
        match check_nonredundancy(bn, edge, &pa) {
            Ok(r) if r.nonredundant && !r.degenerate => found = Some(pa),
            Ok(_) => {}
            Err(e) => err = Some(e),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(found),
    }
}

/// How far to extend a witness beyond the common grounding.
#[derive(Debug, Clone, Default)]
pub struct WitnessOptions {
    /// Extra groundings of the extended variable. 0 gives equal counts.
    pub extra: usize,
    /// Variable to extend; by default one that occurs in the child but not
    /// the parent, else one in the parent but not the child.
    pub variable: Option<String>,
}

/// A small database in which the edge's child family has the requested
/// relevant counts, together with the two targets.
#[derive(Debug, Clone)]
pub struct ConsistencyWitness {
    pub edge: SuitableEdge,
    pub db: Database,
    pub t1: GroundAtom,
    pub t2: GroundAtom,
    pub gamma: Grounding,
    pub pa_setting: Vec<Value>,
    /// Relevant groundings of the child family seen from `T1*`.
    pub n1: u64,
    /// Relevant groundings of the child family seen from `T2*`.
    pub n2: u64,
    /// Relevant groundings consistent with both targets.
    pub n_common: u64,
}

impl ConsistencyWitness {
    pub fn schema(&self) -> &Arc<Schema> {
        self.db.schema_arc()
    }

    /// Parent setting as `(prv, value)` text pairs under the common
    /// grounding.
    pub fn pa_names(&self, bn: &BnStructure) -> Vec<(String, String)> {
        other_parents(bn, &self.edge)
            .iter()
            .zip(&self.pa_setting)
            .map(|(&q, &v)| (bn.node(q).substitute(&self.gamma).to_string(), bn.decl(q).range[v as usize].clone()))
            .collect()
    }
}

/// Builds a witness with one extra grounding of the extended variable.
pub fn construct_witness(bn: &TemplateBn, edge: &SuitableEdge, pa: &[Value]) -> Result<ConsistencyWitness> {
    construct_witness_with(
        bn,
        edge,
        pa,
        &WitnessOptions {
            extra: 1,
            variable: None,
        },
    )
}

pub fn construct_witness_with(
    bn: &TemplateBn,
    edge: &SuitableEdge,
    pa: &[Value],
    opts: &WitnessOptions,
) -> Result<ConsistencyWitness> {
    let s = bn.structure();
    let others = other_parents(s, edge);
    if pa.len() != others.len() {
        return Err(Error::InvalidArgument("parent setting does not cover the other parents".into()));
    }
    let (vp, vc) = (s.var_set(edge.parent), s.var_set(edge.child));
    let family: Vec<usize> = std::iter::once(edge.child).chain(s.parents(edge.child).iter().copied()).collect();
    let mut fam_vars: Vec<String> = Vec::new();
    for &i in &family {
        for v in s.node(i).vars() {
            if !fam_vars.iter().any(|w| w == v) {
                fam_vars.push(v.to_string());
            }
        }
    }
    let extend = match &opts.variable {
        Some(v) if fam_vars.contains(v) => Some(v.clone()),
        Some(v) => return Err(Error::UnknownVariable(v.clone())),
        None => vc
            .difference(&vp)
            .next()
            .or_else(|| vp.difference(&vc).next())
            .map(|v| v.to_string()),
    };
    if opts.extra > 0 && extend.is_none() {
        return Err(Error::Internal(format!(
            "{} and {} use the same variables; relevant counts cannot differ",
            edge.parent_prv, edge.child_prv
        )));
    }

    // One constant per family variable, plus extras for the extended one.
    let name_of = |v: &str, k: usize| format!("{}{}", v.to_lowercase(), k);
    let mut pop_consts: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for d in s.functors() {
        for p in &d.args {
            pop_consts.entry(p.clone()).or_default();
        }
    }
    for v in &fam_vars {
        let pop = s.var_population(v).expect("typed variable").to_string();
        let count = if extend.as_deref() == Some(v) { 1 + opts.extra } else { 1 };
        for k in 1..=count {
            pop_consts.get_mut(&pop).unwrap().push(name_of(v, k));
        }
    }
    for (pop, consts) in pop_consts.iter_mut() {
        if consts.is_empty() {
            consts.push(format!("{}0", pop.to_lowercase()));
        }
    }
    let pops = pop_consts
        .iter()
        .map(|(p, c)| Population::new(p, c.iter().cloned()))
        .collect::<Result<Vec<_>>>()?;
    let schema = Arc::new(Schema::new(pops, s.functors().to_vec())?);

    let mut gammas: Vec<Grounding> = Vec::new();
    let common: Grounding = fam_vars.iter().map(|v| (v.clone(), name_of(v, 1))).collect();
    gammas.push(common.clone());
    if let Some(x) = &extend {
        for k in 2..=1 + opts.extra {
            let mut g = common.clone();
            g.insert(x.clone(), name_of(x, k));
            gammas.push(g);
        }
    }
    let gamma: Grounding = common
        .iter()
        .filter(|(v, _)| vp.contains(v.as_str()) || vc.contains(v.as_str()))
        .map(|(v, c)| (v.clone(), c.clone()))
        .collect();
    let t1 = ground(&schema, s.node(edge.parent), &gamma)?;
    let t2 = ground(&schema, s.node(edge.child), &gamma)?;
    let mut assign: HashMap<GroundAtom, Value> = HashMap::new();
    for g in &gammas[1..] {
        // Relationship endpoints must hold at the extra groundings too.
        for end in [edge.parent, edge.child] {
            if s.is_relationship(end) {
                let atom = ground(&schema, s.node(end), g)?;
                if atom != t1 && atom != t2 {
                    assign.insert(atom, roles(s, end).0);
                }
            }
        }
    }
    for g in &gammas {
        for (&q, &v) in others.iter().zip(pa) {
            let atom = ground(&schema, s.node(q), g)?;
            if let Some(&old) = assign.get(&atom) {
                if old != v {
                    return Err(Error::Internal(format!(
                        "parent setting assigns {} two values",
                        schema.display_atom(&atom)
                    )));
                }
            }
            assign.insert(atom, v);
        }
    }
    let db = build_db(&schema, &assign)?;

    // Counted with both targets at their T role.
    let p1 = Pinned::new(&db, &t1, roles(s, edge.parent).0);
    let pinned = Pinned::new(&p1, &t2, roles(s, edge.child).0);
    let count = |vars: &BTreeSet<&str>, target_node: usize| -> Result<u64> {
        let compiled = compile(&schema, family.iter().map(|&i| s.node(i)))?;
        let filters: Vec<Filter> = family
            .iter()
            .zip(&compiled.pattern.slots)
            .map(|(&i, slot)| {
                let info = schema.functor(slot.functor);
                if info.is_relationship() && i != target_node {
                    Filter::Is(info.true_value())
                } else {
                    Filter::Free
                }
            })
            .collect();
        let mut bound = vec![None; compiled.var_names.len()];
        for v in vars {
            let k = compiled.var_index(v).unwrap();
            let pop = schema.population(compiled.pattern.var_pops[k]);
            bound[k] = Some(pop.id(&gamma[*v])?);
        }
        Ok(count_table(&pinned, &compiled.pattern, &filters, &bound).total())
    };
    let both: BTreeSet<&str> = vp.union(&vc).copied().collect();
    let n1 = count(&vp, edge.parent)?;
    let n2 = count(&vc, edge.child)?;
    let n_common = count(&both, edge.child)?;
    if n1 == 0 || n2 == 0 {
        return Err(Error::Internal(format!(
            "witness for {} -> {} has no relevant groundings",
            edge.parent_prv, edge.child_prv
        )));
    }
    if opts.extra > 0 && n1 == n2 {
        return Err(Error::Internal(format!(
            "witness for {} -> {} failed to separate the relevant counts",
            edge.parent_prv, edge.child_prv
        )));
    }
    Ok(ConsistencyWitness {
        edge: edge.clone(),
        db,
        t1,
        t2,
        gamma,
        pa_setting: pa.to_vec(),
        n1,
        n2,
        n_common,
    })
}

fn ground(schema: &Schema, prv: &Prv, g: &Grounding) -> Result<GroundAtom> {
    let f = schema.functor_id(&prv.functor)?;
    let info = schema.functor(f);
    let args = prv
        .args
        .iter()
        .zip(&info.arg_pops)
        .map(|(a, &p)| {
            let name = match a {
                Term::Var(v) => g.get(v).ok_or_else(|| Error::UnknownVariable(v.clone()))?,
                Term::Const { name } => name,
            };
            schema.population(p).id(name)
        })
        .collect::<Result<Vec<ConstId>>>()?;
    Ok(GroundAtom::new(f, args))
}

/// Defaults everywhere (first value, relationships false) except `assign`.
fn build_db(schema: &Arc<Schema>, assign: &HashMap<GroundAtom, Value>) -> Result<Database> {
    let mut b = DatabaseBuilder::new(schema.clone())?;
    for (f, info) in schema.functors().iter().enumerate() {
        if info.is_relationship() {
            continue;
        }
        let dims: Vec<usize> = info.arg_pops.iter().map(|&p| schema.population(p).len()).collect();
        let mut err = None;
        for_each_tuple(&dims, |t| {
            let atom = GroundAtom::new(f, t.to_vec());
            let v = assign.get(&atom).copied().unwrap_or(0);
            if let Err(e) = b.set_ids(f, t, v) {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    let mut rels: Vec<(&GroundAtom, &Value)> = assign
        .iter()
        .filter(|(a, _)| schema.functor(a.functor).is_relationship())
        .collect();
    rels.sort();
    for (a, &v) in rels {
        b.set_ids(a.functor, &a.args, v)?;
    }
    b.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowdResidual {
    /// Chain `(T,T) -> (T,F) -> (F,F)`: changes `T2` first.
    pub lhs: f64,
    /// Chain `(T,T) -> (F,T) -> (F,F)`: changes `T1` first.
    pub rhs: f64,
    /// `|ln lhs - ln rhs|`.
    pub residual: f64,
    /// `|N/N2 - N/N1| * |ln ratio_F - ln ratio_T|` from the CPT, when both
    /// endpoints are attributes.
    pub closed_form: Option<f64>,
}

/// Evaluates the four Gibbs conditionals between the witness targets.
pub fn lowd_residual(bn: &TemplateBn, w: &ConsistencyWitness) -> Result<LowdResidual> {
    let s = bn.structure();
    let (p, c) = (w.edge.parent, w.edge.child);
    if !is_binary(s, p) || !is_binary(s, c) {
        return Err(Error::InvalidArgument("Lowd residual needs binary endpoints".into()));
    }
    let schema = w.schema();
    let scorer = Scorer::new(bn, schema)?;
    let (t1, f1) = roles(s, p);
    let (t2, f2) = roles(s, c);
    let r2 = Resolved {
        node: c,
        gamma: gamma_ids(&scorer, c, &w.t2)?,
    };
    let r1 = Resolved {
        node: p,
        gamma: gamma_ids(&scorer, p, &w.t1)?,
    };
    // ln p(T2=F | T1=y) - ln p(T2=T | T1=y)
    let lr2 = |y: Value| -> Result<f64> {
        let src = Pinned::new(&w.db, &w.t1, y);
        Ok(scorer.log_score_resolved(&src, &r2, &w.t2, f2)? - scorer.log_score_resolved(&src, &r2, &w.t2, t2)?)
    };
    // ln p(T1=F | T2=x) - ln p(T1=T | T2=x)
    let lr1 = |x: Value| -> Result<f64> {
        let src = Pinned::new(&w.db, &w.t2, x);
        Ok(scorer.log_score_resolved(&src, &r1, &w.t1, f1)? - scorer.log_score_resolved(&src, &r1, &w.t1, t1)?)
    };
    let ln_lhs = lr2(t1)? + lr1(f2)?;
    let ln_rhs = lr1(t2)? + lr2(f1)?;
    let closed_form = if !s.is_relationship(p) && !s.is_relationship(c) {
        let nr = check_nonredundancy(bn, &w.edge, &w.pa_setting)?;
        let n = w.n_common as f64;
        Some(((n / w.n2 as f64 - n / w.n1 as f64) * (nr.ratio_f.ln() - nr.ratio_t.ln())).abs())
    } else {
        None
    };
    Ok(LowdResidual {
        lhs: ln_lhs.exp(),
        rhs: ln_rhs.exp(),
        residual: (ln_lhs - ln_rhs).abs(),
        closed_form,
    })
}

fn gamma_ids(scorer: &Scorer, node: usize, atom: &GroundAtom) -> Result<Vec<(String, ConstId)>> {
    scorer
        .unify(node, atom)
        .ok_or_else(|| Error::Internal("witness target does not ground its node".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeVerdict {
    Inconsistent,
    ConsistentAtWitness,
    /// Residual between the two tolerances.
    Inconclusive,
    /// No nonredundant parent setting.
    Redundant,
    /// Endpoints are not binary.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeAudit {
    pub edge: SuitableEdge,
    pub pa: Vec<(String, String)>,
    pub n1: Option<u64>,
    pub n2: Option<u64>,
    pub n_common: Option<u64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub closed_form: Option<f64>,
    pub verdict: EdgeVerdict,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Some witness violates Lowd's equation.
    Inconsistent,
    /// No suitable edge: nothing for the construction to work with.
    ConsistentByConstruction,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub verdict: Verdict,
    pub edges: Vec<EdgeAudit>,
}

/// Audits every suitable edge of `bn`.
pub fn audit(bn: &TemplateBn) -> Result<AuditReport> {
    let s = bn.structure();
    let edges = find_suitable_edges(s);
    let audits = edges
        .par_iter()
        .map(|e| audit_edge(bn, e))
        .collect::<Result<Vec<_>>>()?;
    let verdict = if audits.is_empty() {
        Verdict::ConsistentByConstruction
    } else if audits.iter().any(|a| a.verdict == EdgeVerdict::Inconsistent) {
        Verdict::Inconsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(AuditReport { verdict, edges: audits })
}

fn audit_edge(bn: &TemplateBn, edge: &SuitableEdge) -> Result<EdgeAudit> {
    let s = bn.structure();
    let mut out = EdgeAudit {
        edge: edge.clone(),
        pa: Vec::new(),
        n1: None,
        n2: None,
        n_common: None,
        lhs: None,
        rhs: None,
        residual: None,
        closed_form: None,
        verdict: EdgeVerdict::Skipped,
        note: None,
    };
    if !is_binary(s, edge.parent) || !is_binary(s, edge.child) {
        out.note = Some("endpoints are not binary".into());
        return Ok(out);
    }
    let Some(pa) = find_nonredundant_setting(bn, edge)? else {
        out.verdict = EdgeVerdict::Redundant;
        out.note = Some("no parent setting makes the endpoints dependent".into());
        return Ok(out);
    };
    let w = construct_witness(bn, edge, &pa)?;
    let r = lowd_residual(bn, &w)?;
    out.pa = w.pa_names(s);
    out.n1 = Some(w.n1);
    out.n2 = Some(w.n2);
    out.n_common = Some(w.n_common);
    out.lhs = Some(r.lhs);
    out.rhs = Some(r.rhs);
    out.residual = Some(r.residual);
    out.closed_form = r.closed_form;
    out.verdict = if r.residual > INCONSISTENT_TOL {
        EdgeVerdict::Inconsistent
    } else if r.residual < CONSISTENT_TOL {
        EdgeVerdict::ConsistentAtWitness
    } else {
        EdgeVerdict::Inconclusive
    };
    Ok(out)
}

/// Convenience for tests and the CLI: the query for a witness target.
pub fn witness_query(w: &ConsistencyWitness, parent_side: bool) -> GibbsQuery {
    if parent_side {
        GibbsQuery::at_node(w.t1.clone(), w.edge.parent)
    } else {
        GibbsQuery::at_node(w.t2.clone(), w.edge.child)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn friends() -> TemplateBn {
        let p = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/friends/model.json");
        TemplateBn::load(&p).unwrap()
    }

    #[test]
    fn friends_gender_edge_is_suitable() {
        let bn = friends();
        let e = find_suitable_edges(bn.structure());
        assert!(e.iter().any(|e| e.parent_prv == "g(B)" && e.child_prv == "g(A)"));
        assert!(!e.iter().any(|e| e.child_prv == "CD(A)"));
    }

    #[test]
    fn friends_witness_and_residual() {
        let bn = friends();
        let e = find_suitable_edges(bn.structure())
            .into_iter()
            .find(|e| e.parent_prv == "g(B)")
            .unwrap();
        let nr = check_nonredundancy(&bn, &e, &[0]).unwrap();
        assert!(nr.nonredundant);
        assert!((nr.ratio_t - 0.45 / 0.55).abs() < 1e-15);
        assert!((nr.ratio_f - 0.63 / 0.37).abs() < 1e-15);

        let w = construct_witness(&bn, &e, &[0]).unwrap();
        assert_eq!((w.n1, w.n2, w.n_common), (2, 1, 1));
        let r = lowd_residual(&bn, &w).unwrap();
        let want = 0.5 * ((0.45f64 / 0.55).ln() - (0.63f64 / 0.37).ln()).abs();
        assert!((r.residual - want).abs() < 1e-9, "{r:?}");
        assert!((r.residual - r.closed_form.unwrap()).abs() < 1e-9);

        let sym = construct_witness_with(&bn, &e, &[0], &WitnessOptions::default()).unwrap();
        assert_eq!(sym.n1, sym.n2);
        assert!(lowd_residual(&bn, &sym).unwrap().residual < 1e-9);

        let other = construct_witness_with(
            &bn,
            &e,
            &[0],
            &WitnessOptions {
                extra: 1,
                variable: Some("B".into()),
            },
        )
        .unwrap();
        assert_eq!((other.n1, other.n2), (1, 2));
    }

    #[test]
    fn audit_verdicts() {
        let report = audit(&friends()).unwrap();
        assert_eq!(report.verdict, Verdict::Inconsistent);
    }
}
