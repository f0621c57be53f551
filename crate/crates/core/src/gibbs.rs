//! Gibbs conditional probabilities of a ground target computed from a
//! template BN by the log-linear proportion rule.
//!
//! For a target atom `T*` grounding node `T` under `γ`, and a candidate
//! value `t`, the score sums over the families of `T` and of each child of
//! `T`: every family configuration contributes `ln CP(u | pa)` times its
//! share of the family's relevant groundings. Groundings are counted with
//! the variables the family shares with `T` bound by `γ`. A configuration
//! that sets a relationship other than the target to false is not relevant.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::count::{count_table, CountTable, Filter};
use crate::store::{compile, unravel, AtomSource, Compiled, ConstId, FunctorId, GroundAtom, Grounding, Pinned, Schema, Value};
use crate::template::{Prv, TemplateBn};

/// A target atom, optionally pinned to a specific template node. Without a
/// node, the atom is matched against every node it unifies with and the
/// one with most parents, then most children, then lowest index is used.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsQuery {
    pub target: GroundAtom,
    pub node: Option<usize>,
}

impl GibbsQuery {
    pub fn new(target: GroundAtom) -> Self {
        GibbsQuery { target, node: None }
    }

    pub fn at_node(target: GroundAtom, node: usize) -> Self {
        GibbsQuery {
            target,
            node: Some(node),
        }
    }
}

/// One family configuration of a score trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyScoreRow {
    /// Template child node of the family, e.g. `g(A)`.
    pub family: String,
    /// Child under `γ`, e.g. `g(sam)`.
    pub child: String,
    pub child_value: String,
    /// Parents under `γ` with their values.
    pub parents: Vec<(String, String)>,
    pub cp: f64,
    pub weight: f64,
    pub count: u64,
    pub relevant_count: u64,
    pub proportion: f64,
    pub contribution: f64,
}

impl FamilyScoreRow {
    pub fn parent_state(&self) -> String {
        self.parents
            .iter()
            .map(|(p, v)| format!("{p}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTrace {
    pub value: String,
    pub rows: Vec<FamilyScoreRow>,
    pub score: f64,
}

struct Family {
    compiled: Compiled,
    /// Template node of each slot.
    slot_nodes: Vec<usize>,
    rel_slot: Vec<bool>,
}

/// A template BN compiled against one schema.
pub struct Scorer<'m> {
    bn: &'m TemplateBn,
    families: Vec<Family>,
    by_functor: HashMap<FunctorId, Vec<usize>>,
    node_functor: Vec<FunctorId>,
    pattern_args: Vec<Vec<(Option<String>, Option<ConstId>)>>,
}

/// A resolved query: node plus `γ`.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub node: usize,
    pub gamma: Vec<(String, ConstId)>,
}

impl<'m> Scorer<'m> {
    pub fn new(bn: &'m TemplateBn, schema: &Schema) -> Result<Self> {
        let s = bn.structure();
        s.check_schema(schema)?;
        let mut families = Vec::with_capacity(s.len());
        let mut by_functor: HashMap<FunctorId, Vec<usize>> = HashMap::new();
        let mut pattern_args = Vec::with_capacity(s.len());
        let mut node_functor = Vec::with_capacity(s.len());
        for i in 0..s.len() {
            let slot_nodes: Vec<usize> = std::iter::once(i).chain(s.parents(i).iter().copied()).collect();
            let compiled = compile(schema, slot_nodes.iter().map(|&j| s.node(j)))?;
            let rel_slot = slot_nodes.iter().map(|&j| s.is_relationship(j)).collect();
            families.push(Family {
                compiled,
                slot_nodes,
                rel_slot,
            });
            let f = schema.functor_id(&s.node(i).functor)?;
            by_functor.entry(f).or_default().push(i);
            node_functor.push(f);
            let info = schema.functor(f);
            pattern_args.push(
                s.node(i)
                    .args
                    .iter()
                    .zip(&info.arg_pops)
                    .map(|(a, &p)| match a.as_var() {
                        Some(v) => Ok((Some(v.to_string()), None)),
                        None => {
                            let crate::template::Term::Const { name } = a else { unreachable!() };
                            Ok((None, Some(schema.population(p).id(name)?)))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        for nodes in by_functor.values_mut() {
            nodes.sort_by_key(|&i| {
                (
                    std::cmp::Reverse(s.parents(i).len()),
                    std::cmp::Reverse(s.children(i).len()),
                    i,
                )
            });
        }
        Ok(Scorer {
            bn,
            families,
            by_functor,
            node_functor,
            pattern_args,
        })
    }

    pub fn bn(&self) -> &TemplateBn {
        self.bn
    }

    /// `γ` for `atom` as a grounding of `node`, if it unifies.
    pub fn unify(&self, node: usize, atom: &GroundAtom) -> Option<Vec<(String, ConstId)>> {
        let pat = &self.pattern_args[node];
        if self.node_functor[node] != atom.functor || pat.len() != atom.args.len() {
            return None;
        }
        let mut gamma: Vec<(String, ConstId)> = Vec::new();
        for ((var, c), &a) in pat.iter().zip(&atom.args) {
            match (var, c) {
                (Some(v), _) => match gamma.iter().find(|(w, _)| w == v) {
                    Some(&(_, b)) if b != a => return None,
                    Some(_) => {}
                    None => gamma.push((v.clone(), a)),
                },
                (None, Some(c)) if *c != a => return None,
                _ => {}
            }
        }
        Some(gamma)
    }

    /// Template nodes that `atom` grounds, in order of preference.
    pub fn candidate_nodes(&self, atom: &GroundAtom) -> Vec<usize> {
        self.by_functor
            .get(&atom.functor)
            .map(|ns| ns.iter().copied().filter(|&n| self.unify(n, atom).is_some()).collect())
            .unwrap_or_default()
    }

    pub fn resolve(&self, schema: &Schema, query: &GibbsQuery) -> Result<Resolved> {
        let node = match query.node {
            Some(n) => n,
            None => *self
                .candidate_nodes(&query.target)
                .first()
                .ok_or_else(|| Error::UnknownNode(schema.display_atom(&query.target)))?,
        };
        let s = self.bn.structure();
        if node >= s.len() {
            return Err(Error::UnknownNode(format!("#{node}")));
        }
        let gamma = self.unify(node, &query.target).ok_or_else(|| {
            Error::Type(format!(
                "{} is not a grounding of {}",
                schema.display_atom(&query.target),
                s.node(node)
            ))
        })?;
        Ok(Resolved { node, gamma })
    }

    /// Families scored for a target at `node`: its own, then each child's.
    pub fn score_families(&self, node: usize) -> Vec<usize> {
        std::iter::once(node)
            .chain(self.bn.structure().children(node).iter().copied())
            .collect()
    }

    fn bound(&self, fam: &Family, gamma: &[(String, ConstId)]) -> Vec<Option<ConstId>> {
        let mut b = vec![None; fam.compiled.var_names.len()];
        for (v, c) in gamma {
            if let Some(i) = fam.compiled.var_index(v) {
                b[i] = Some(*c);
            }
        }
        b
    }

    /// Counts for family `u` with the target pinned to `t`. With `relevant`
    /// set, relationship slots other than the target are fixed to true.
    fn family_table<S: AtomSource + ?Sized>(
        &self,
        src: &S,
        r: &Resolved,
        target: &GroundAtom,
        t: Value,
        u: usize,
        relevant: bool,
    ) -> CountTable {
        let fam = &self.families[u];
        let schema = src.schema();
        let filters: Vec<Filter> = (0..fam.slot_nodes.len())
            .map(|k| {
                if relevant && fam.rel_slot[k] && fam.slot_nodes[k] != r.node {
                    Filter::Is(schema.functor(fam.compiled.pattern.slots[k].functor).true_value())
                } else {
                    Filter::Free
                }
            })
            .collect();
        let pinned = Pinned::new(src, target, t);
        count_table(&pinned, &fam.compiled.pattern, &filters, &self.bound(fam, &r.gamma))
    }

    /// Full slot values for a table offset; fixed slots take their filter
    /// value.
    fn slot_values(&self, schema: &Schema, u: usize, table: &CountTable, off: usize) -> Vec<Value> {
        let fam = &self.families[u];
        let free_vals = unravel(off, &table.dims);
        let mut vals: Vec<Value> = fam
            .compiled
            .pattern
            .slots
            .iter()
            .map(|s| {
                let info = schema.functor(s.functor);
                if info.is_relationship() {
                    info.true_value()
                } else {
                    0
                }
            })
            .collect();
        for (k, &slot) in table.free.iter().enumerate() {
            vals[slot] = free_vals[k] as Value;
        }
        vals
    }

    /// Unnormalized log score of `t` for the query target.
    pub fn log_score<S: AtomSource + ?Sized>(&self, src: &S, query: &GibbsQuery, t: Value) -> Result<f64> {
        let schema = src.schema();
        let r = self.resolve(schema, query)?;
        self.log_score_resolved(src, &r, &query.target, t)
    }

    pub(crate) fn log_score_resolved<S: AtomSource + ?Sized>(
        &self,
        src: &S,
        r: &Resolved,
        target: &GroundAtom,
        t: Value,
    ) -> Result<f64> {
        let schema = src.schema();
        let mut score = 0.0;
        for u in self.score_families(r.node) {
            let table = self.family_table(src, r, target, t, u, true);
            let total = table.total();
            if total == 0 {
                continue;
            }
            let cpt = self.bn.cpt(u);
            let mut acc = 0.0;
            for (off, &n) in table.counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let vals = self.slot_values(schema, u, &table, off);
                let cp = cpt.prob(cpt.row_index(&vals[1..]), vals[0] as usize);
                if cp == 0.0 {
                    return Err(Error::ZeroProbabilityFeature(self.describe(schema, u, r, &vals)));
                }
                acc += n as f64 * cp.ln();
            }
            score += acc / total as f64;
        }
        Ok(score)
    }

    fn describe(&self, schema: &Schema, u: usize, r: &Resolved, vals: &[Value]) -> String {
        let s = self.bn.structure();
        let g = self.gamma_names(schema, r);
        let fam = &self.families[u];
        let parts: Vec<String> = fam
            .slot_nodes
            .iter()
            .zip(vals)
            .map(|(&n, &v)| format!("{}={}", s.node(n).substitute(&g), s.decl(n).range[v as usize]))
            .collect();
        parts.join(", ")
    }

    pub fn gamma_names(&self, schema: &Schema, r: &Resolved) -> Grounding {
        let s = self.bn.structure();
        r.gamma
            .iter()
            .map(|(v, c)| {
                let pop = s.var_population(v).expect("variable has a population");
                let pid = schema.population_id(pop).expect("population exists");
                (v.clone(), schema.population(pid).constant(*c).to_string())
            })
            .collect()
    }

    /// Score of `t` with one row per family configuration.
    pub fn trace<S: AtomSource + ?Sized>(&self, src: &S, query: &GibbsQuery, t: Value) -> Result<ScoreTrace> {
        let schema = src.schema();
        let r = self.resolve(schema, query)?;
        let s = self.bn.structure();
        let g = self.gamma_names(schema, &r);
        let mut rows = Vec::new();
        let mut score = 0.0;
        for u in self.score_families(r.node) {
            let fam = &self.families[u];
            let full = self.family_table(src, &r, &query.target, t, u, false);
            let rel = self.family_table(src, &r, &query.target, t, u, true);
            let total = rel.total();
            let cpt = self.bn.cpt(u);
            let mut fam_score = 0.0;
            for (off, &n) in full.counts.iter().enumerate() {
                let vals = self.slot_values(schema, u, &full, off);
                let relevant = (0..vals.len())
                    .filter(|&k| fam.rel_slot[k] && fam.slot_nodes[k] != r.node)
                    .all(|k| vals[k] == schema.functor(fam.compiled.pattern.slots[k].functor).true_value());
                let nr = if relevant {
                    let key: Vec<Value> = rel.free.iter().map(|&k| vals[k]).collect();
                    rel.get(&key)
                } else {
                    0
                };
                let cp = cpt.prob(cpt.row_index(&vals[1..]), vals[0] as usize);
                let p = if total == 0 { 0.0 } else { nr as f64 / total as f64 };
                let w = cp.ln();
                let contribution = if p == 0.0 {
                    0.0
                } else if cp == 0.0 {
                    return Err(Error::ZeroProbabilityFeature(self.describe(schema, u, &r, &vals)));
                } else {
                    w * p
                };
                if nr > 0 {
                    fam_score += nr as f64 * w;
                }
                let name = |k: usize| {
                    let node = fam.slot_nodes[k];
                    (
                        s.node(node).substitute(&g).to_string(),
                        s.decl(node).range[vals[k] as usize].clone(),
                    )
                };
                let (child, child_value) = name(0);
                rows.push(FamilyScoreRow {
                    family: s.node(u).to_string(),
                    child,
                    child_value,
                    parents: (1..vals.len()).map(name).collect(),
                    cp,
                    weight: w,
                    count: n,
                    relevant_count: nr,
                    proportion: p,
                    contribution,
                });
            }
            if total > 0 {
                score += fam_score / total as f64;
            }
        }
        Ok(ScoreTrace {
            value: s.decl(r.node).range[t as usize].clone(),
            rows,
            score,
        })
    }

    /// Softmax of the log scores over the target's range. A value whose
    /// score instantiates a zero-probability feature gets probability 0.
    pub fn probability<S: AtomSource + ?Sized>(&self, src: &S, query: &GibbsQuery) -> Result<Vec<f64>> {
        let schema = src.schema();
        let r = self.resolve(schema, query)?;
        self.probability_resolved(src, &r, &query.target)
    }

    pub(crate) fn probability_resolved<S: AtomSource + ?Sized>(
        &self,
        src: &S,
        r: &Resolved,
        target: &GroundAtom,
    ) -> Result<Vec<f64>> {
        let k = self.bn.structure().range_len(r.node);
        let mut scores = Vec::with_capacity(k);
        let mut last_zero = None;
        for t in 0..k {
            match self.log_score_resolved(src, r, target, t as Value) {
                Ok(s) => scores.push(s),
                Err(Error::ZeroProbabilityFeature(m)) => {
                    scores.push(f64::NEG_INFINITY);
                    last_zero = Some(m);
                }
                Err(e) => return Err(e),
            }
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroProbabilityFeature(last_zero.unwrap_or_default()));
        }
        let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    /// Distribution of a ground atom given its ground parents: the CPT of
    /// its own family combined over all of the family's groundings by the
    /// geometric mean. With a single grounding this is the CPT row.
    pub fn ground_conditional<S: AtomSource + ?Sized>(&self, src: &S, r: &Resolved, target: &GroundAtom) -> Result<Vec<f64>> {
        let schema = src.schema();
        let k = self.bn.structure().range_len(r.node);
        let cpt = self.bn.cpt(r.node);
        let mut scores = vec![0.0; k];
        for (u, score) in scores.iter_mut().enumerate() {
            let table = self.family_table(src, r, target, u as Value, r.node, false);
            let total = table.total();
            if total == 0 {
                continue;
            }
            let mut acc = 0.0;
            for (off, &n) in table.counts.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                let vals = self.slot_values(schema, r.node, &table, off);
                let cp = cpt.prob(cpt.row_index(&vals[1..]), vals[0] as usize);
                acc += n as f64 * cp.ln();
            }
            *score = acc / total as f64;
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroProbabilityFeature(schema.display_atom(target)));
        }
        let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        Ok(exps.into_iter().map(|e| e / z).collect())
    }

    /// Relevant count of one configuration of family `u`, given as values
    /// for `[child, parents...]`, with the target set to `t`.
    pub fn relevant_family_count<S: AtomSource + ?Sized>(
        &self,
        src: &S,
        query: &GibbsQuery,
        t: Value,
        u: usize,
        config: &[Value],
    ) -> Result<u64> {
        let schema = src.schema();
        let r = self.resolve(schema, query)?;
        if !self.score_families(r.node).contains(&u) {
            return Err(Error::InvalidArgument(format!(
                "{} is not a family of the target",
                self.bn.structure().node(u)
            )));
        }
        let fam = &self.families[u];
        if config.len() != fam.slot_nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "configuration has {} values, family has {} nodes",
                config.len(),
                fam.slot_nodes.len()
            )));
        }
        for (k, &v) in config.iter().enumerate() {
            let slot = &fam.compiled.pattern.slots[k];
            let info = schema.functor(slot.functor);
            if v as usize >= info.range_len() {
                return Err(Error::InvalidArgument(format!("value {v} out of range for {}", info.name())));
            }
            if fam.rel_slot[k] && fam.slot_nodes[k] != r.node && v != info.true_value() {
                return Ok(0);
            }
        }
        let table = self.family_table(src, &r, &query.target, t, u, true);
        let key: Vec<Value> = table.free.iter().map(|&k| config[k]).collect();
        Ok(table.get(&key))
    }

    /// Relevant groundings of family `u`, each as the CP of its realized
    /// configuration. Used to check the geometric-mean reading of a score.
    pub fn relevant_grounding_cps<S: AtomSource + ?Sized>(
        &self,
        src: &S,
        query: &GibbsQuery,
        t: Value,
        u: usize,
    ) -> Result<Vec<f64>> {
        let schema = src.schema();
        let r = self.resolve(schema, query)?;
        let fam = &self.families[u];
        let bound = self.bound(fam, &r.gamma);
        let pinned = Pinned::new(src, &query.target, t);
        let cpt = self.bn.cpt(u);
        let pat = &fam.compiled.pattern;
        let mut out = Vec::new();
        let mut b = bound.clone();
        let free: Vec<usize> = (0..b.len()).filter(|&v| b[v].is_none()).collect();
        let dims: Vec<usize> = free
            .iter()
            .map(|&v| schema.population(pat.var_pops[v]).len())
            .collect();
        crate::store::for_each_tuple(&dims, |tuple| {
            for (k, &v) in free.iter().enumerate() {
                b[v] = Some(tuple[k]);
            }
            let vals: Vec<Value> = pat
                .slots
                .iter()
                .map(|s| {
                    let args: Vec<ConstId> = s
                        .args
                        .iter()
                        .map(|a| match *a {
                            crate::store::count::Arg::Var(v) => b[v].unwrap(),
                            crate::store::count::Arg::Const(c) => c,
                        })
                        .collect();
                    pinned.value(s.functor, &args)
                })
                .collect();
            let relevant = (0..vals.len())
                .filter(|&k| fam.rel_slot[k] && fam.slot_nodes[k] != r.node)
                .all(|k| vals[k] == schema.functor(pat.slots[k].functor).true_value());
            if relevant {
                out.push(cpt.prob(cpt.row_index(&vals[1..]), vals[0] as usize));
            }
        });
        Ok(out)
    }
}

/// Proportions of a family's relevant counts; all zero if they sum to 0.
pub fn family_proportion(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect()
}

/// Unnormalized log score of value `t`.
pub fn gibbs_log_score<S: AtomSource + ?Sized>(bn: &TemplateBn, src: &S, query: &GibbsQuery, t: Value) -> Result<f64> {
    Scorer::new(bn, src.schema())?.log_score(src, query, t)
}

/// Distribution over the target's range.
pub fn gibbs_probability<S: AtomSource + ?Sized>(bn: &TemplateBn, src: &S, query: &GibbsQuery) -> Result<Vec<f64>> {
    Scorer::new(bn, src.schema())?.probability(src, query)
}

/// Parses a target given as text, e.g. `g(sam)`, optionally pinned to a
/// template node given as text, e.g. `g(A)`.
pub fn parse_query(bn: &TemplateBn, schema: &Schema, atom: &str, node: Option<&str>) -> Result<GibbsQuery> {
    let target = schema.parse_atom(atom)?;
    let node = node
        .map(|n| bn.structure().node_id(&Prv::parse(n)?))
        .transpose()?;
    Ok(GibbsQuery { target, node })
}

/// Writes a trace as CSV rows with a leading target value column.
pub fn write_trace_csv<W: std::io::Write>(out: W, traces: &[ScoreTrace]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Internal(format!("writing trace: {e}"));
    w.write_record([
        "target_value",
        "family",
        "child_value",
        "parent_state",
        "cp",
        "w",
        "p_r",
        "w_times_p_r",
        "n",
        "n_r",
    ])
    .map_err(io)?;
    for tr in traces {
        for r in &tr.rows {
            w.write_record([
                tr.value.clone(),
                r.family.clone(),
                format!("{}={}", r.child, r.child_value),
                r.parent_state(),
                r.cp.to_string(),
                r.weight.to_string(),
                r.proportion.to_string(),
                r.contribution.to_string(),
                r.count.to_string(),
                r.relevant_count.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(())
}
