//! Instantiating templates over concrete populations, ordered Gibbs
//! sampling on the result, and an exact joint for small acyclic cases.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gibbs::{Resolved, Scorer};
use crate::rdn::RdnTemplate;
use crate::store::{for_each_tuple, AtomSource, ConstId, Database, Evidence, GroundAtom, Schema, Value};
use crate::template::{BnStructure, Prv, Term, TemplateBn};

/// A template graph that can be instantiated.
pub trait TemplateGraph {
    fn template_nodes(&self) -> &[Prv];
    /// `(parent, child)` pairs of node indices.
    fn template_edges(&self) -> Vec<(usize, usize)>;
}

impl TemplateGraph for BnStructure {
    fn template_nodes(&self) -> &[Prv] {
        self.nodes()
    }

    fn template_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
    }
}

impl TemplateGraph for TemplateBn {
    fn template_nodes(&self) -> &[Prv] {
        self.structure().nodes()
    }

    fn template_edges(&self) -> Vec<(usize, usize)> {
        self.structure().edges()
    }
}

impl TemplateGraph for RdnTemplate {
    fn template_nodes(&self) -> &[Prv] {
        self.nodes()
    }

    fn template_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
    }
}

/// The inference graph: ground atoms and instantiated template edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundGraph {
    nodes: Vec<GroundAtom>,
    index: HashMap<GroundAtom, usize>,
    /// Template nodes each ground node instantiates.
    origin: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl GroundGraph {
    pub fn nodes(&self) -> &[GroundAtom] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, atom: &GroundAtom) -> Option<usize> {
        self.index.get(atom).copied()
    }

    pub fn origin(&self, i: usize) -> &[usize] {
        &self.origin[i]
    }

    /// Sorted `(parent, child)` pairs of node indices.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, from: &GroundAtom, to: &GroundAtom) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) => self.edges.binary_search(&(a, b)).is_ok(),
            _ => false,
        }
    }

    /// Kahn order over node indices, lowest first. `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut children = vec![Vec::new(); n];
        let mut indeg = vec![0usize; n];
        for &(p, c) in &self.edges {
            children[p].push(c);
            indeg[c] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }
}

/// Typed variable list and an instantiation function for a set of PRVs.
struct Binder {
    vars: Vec<String>,
    dims: Vec<usize>,
}

impl Binder {
    fn new(schema: &Schema, prvs: &[&Prv]) -> Result<Self> {
        let mut vars: Vec<String> = Vec::new();
        let mut dims = Vec::new();
        for prv in prvs {
            let f = schema.functor_id(&prv.functor)?;
            let info = schema.functor(f);
            if info.arg_pops.len() != prv.args.len() {
                return Err(Error::Type(format!("{prv}: wrong number of arguments")));
            }
            for (a, &p) in prv.args.iter().zip(&info.arg_pops) {
                if let Some(v) = a.as_var() {
                    if !vars.iter().any(|w| w == v) {
                        let pop = schema.population(p);
                        if pop.is_empty() {
                            return Err(Error::EmptyPopulation(pop.name().to_string()));
                        }
                        vars.push(v.to_string());
                        dims.push(pop.len());
                    }
                }
            }
        }
        Ok(Binder { vars, dims })
    }

    fn atom(&self, schema: &Schema, prv: &Prv, tuple: &[ConstId]) -> Result<GroundAtom> {
        let f = schema.functor_id(&prv.functor)?;
        let info = schema.functor(f);
        let args = prv
            .args
            .iter()
            .zip(&info.arg_pops)
            .map(|(a, &p)| match a {
                Term::Var(v) => Ok(tuple[self.vars.iter().position(|w| w == v).unwrap()]),
                Term::Const { name } => schema.population(p).id(name),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundAtom::new(f, args))
    }
}

/// All ground atoms of `prv` over the schema's populations, in
/// lexicographic order of its variables' constants.
pub fn groundings(schema: &Schema, prv: &Prv) -> Result<Vec<GroundAtom>> {
    let b = Binder::new(schema, &[prv])?;
    let mut out = Vec::new();
    let mut err = None;
    for_each_tuple(&b.dims, |t| match b.atom(schema, prv, t) {
        Ok(a) => out.push(a),
        Err(e) => err = Some(e),
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Instantiates every node and edge of `template` over the populations of
/// `schema`. Nodes are sorted by functor then arguments; edges whose two
/// ends ground to the same atom are dropped.
pub fn ground_template<G: TemplateGraph + ?Sized>(template: &G, schema: &Schema) -> Result<GroundGraph> {
    let tnodes = template.template_nodes();
    let mut origin_map: BTreeMap<GroundAtom, Vec<usize>> = BTreeMap::new();
    for (i, prv) in tnodes.iter().enumerate() {
        for a in groundings(schema, prv)? {
            let o = origin_map.entry(a).or_default();
            if !o.contains(&i) {
                o.push(i);
            }
        }
    }
    let nodes: Vec<GroundAtom> = origin_map.keys().cloned().collect();
    let origin: Vec<Vec<usize>> = origin_map.into_values().collect();
    let index: HashMap<GroundAtom, usize> = nodes.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    let mut edges = BTreeSet::new();
    for (p, c) in template.template_edges() {
        let (pp, cp) = (&tnodes[p], &tnodes[c]);
        let b = Binder::new(schema, &[pp, cp])?;
        let mut err = None;
        for_each_tuple(&b.dims, |t| {
            let pair = b.atom(schema, pp, t).and_then(|x| Ok((x, b.atom(schema, cp, t)?)));
            match pair {
                Ok((x, y)) if x != y => {
                    edges.insert((index[&x], index[&y]));
                }
                Ok(_) => {}
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(GroundGraph {
        nodes,
        index,
        origin,
        edges: edges.into_iter().collect(),
    })
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub iterations: usize,
    /// Defaults to a tenth of `iterations`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// Scan order over the free atoms; defaults to graph order.
    pub order: Option<Vec<GroundAtom>>,
    /// Keep a tally of joint states when there are at most this many free
    /// atoms.
    pub joint_limit: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            iterations: 1000,
            burn_in: None,
            seed: 0,
            order: None,
            joint_limit: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    /// Free atoms in scan order.
    pub free: Vec<GroundAtom>,
    /// Per free atom, value frequencies over kept sweeps.
    pub marginals: Vec<Vec<f64>>,
    /// Joint state counts, keyed by values in scan order.
    pub joint: Option<BTreeMap<Vec<Value>, u64>>,
    pub kept: usize,
}

impl SampleResult {
    pub fn joint_frequency(&self, state: &[Value]) -> Option<f64> {
        self.joint
            .as_ref()
            .map(|j| j.get(state).copied().unwrap_or(0) as f64 / self.kept as f64)
    }
}

/// Ordered Gibbs sampling. Every free atom is resampled in turn from its
/// Gibbs conditional given all other atoms. Atoms outside the graph keep
/// their default value (first range value, relationships false).
pub fn gibbs_sample(
    graph: &GroundGraph,
    bn: &TemplateBn,
    schema: &Arc<Schema>,
    evidence: &[(GroundAtom, Value)],
    opts: &SampleOptions,
) -> Result<SampleResult> {
    let burn_in = opts.burn_in.unwrap_or(opts.iterations / 10);
    if opts.iterations <= burn_in {
        return Err(Error::InvalidArgument(format!(
            "iterations ({}) must exceed burn-in ({burn_in})",
            opts.iterations
        )));
    }
    let scorer = Scorer::new(bn, schema)?;
    let base = Database::with_defaults(schema.clone())?;
    let mut state = Evidence::new(&base);
    let mut clamped = BTreeSet::new();
    for (a, v) in evidence {
        if graph.index_of(a).is_none() {
            return Err(Error::InvalidArgument(format!(
                "evidence atom {} is not in the graph",
                schema.display_atom(a)
            )));
        }
        if *v as usize >= schema.functor(a.functor).range_len() {
            return Err(Error::InvalidArgument(format!("value out of range for {}", schema.display_atom(a))));
        }
        state.set(a, *v);
        clamped.insert(a.clone());
    }
    let free: Vec<GroundAtom> = match &opts.order {
        Some(order) => {
            let want: BTreeSet<&GroundAtom> = graph.nodes().iter().filter(|a| !clamped.contains(*a)).collect();
            let got: BTreeSet<&GroundAtom> = order.iter().collect();
            if want != got || order.len() != got.len() {
                return Err(Error::InvalidArgument("scan order must list every free atom once".into()));
            }
            order.clone()
        }
        None => graph.nodes().iter().filter(|a| !clamped.contains(*a)).cloned().collect(),
    };
    if free.is_empty() {
        return Err(Error::InvalidArgument("no free atoms to sample".into()));
    }
    let resolved: Vec<Resolved> = free
        .iter()
        .map(|a| scorer.resolve(schema, &crate::gibbs::GibbsQuery::new(a.clone())))
        .collect::<Result<_>>()?;
    let ranges: Vec<usize> = free.iter().map(|a| schema.functor(a.functor).range_len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current: Vec<Value> = Vec::with_capacity(free.len());
    for (a, &k) in free.iter().zip(&ranges) {
        let v = rng.gen_range(0..k) as Value;
        state.set(a, v);
        current.push(v);
    }
    let mut tallies: Vec<Vec<u64>> = ranges.iter().map(|&k| vec![0; k]).collect();
    let mut joint = (free.len() <= opts.joint_limit).then(BTreeMap::new);
    for sweep in 0..opts.iterations {
        for i in 0..free.len() {
            let probs = scorer
                .probability_resolved(&state, &resolved[i], &free[i])
                .map_err(|e| match e {
                    Error::ZeroProbabilityFeature(_) => Error::Deadlock(schema.display_atom(&free[i])),
                    other => other,
                })?;
            let v = draw(&mut rng, &probs);
            if v != current[i] {
                state.set(&free[i], v);
                current[i] = v;
            }
        }
        if sweep >= burn_in {
            for (t, &v) in tallies.iter_mut().zip(&current) {
                t[v as usize] += 1;
            }
            if let Some(j) = joint.as_mut() {
                *j.entry(current.clone()).or_insert(0) += 1;
            }
        }
    }
    let kept = opts.iterations - burn_in;
    Ok(SampleResult {
        free,
        marginals: tallies
            .into_iter()
            .map(|t| t.into_iter().map(|c| c as f64 / kept as f64).collect())
            .collect(),
        joint,
        kept,
    })
}

pub(crate) fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> Value {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (v, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc {
            return v as Value;
        }
    }
    // Rounding left a sliver above the last cumulative value.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as Value
}

/// A full joint distribution over a few ground atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub atoms: Vec<GroundAtom>,
    pub dims: Vec<usize>,
    /// Row-major over `dims`, last atom fastest.
    pub probs: Vec<f64>,
}

impl JointTable {
    pub fn index(&self, values: &[Value]) -> usize {
        values
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&v, &d)| acc * d + v as usize)
    }

    pub fn prob(&self, values: &[Value]) -> f64 {
        self.probs[self.index(values)]
    }

    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dims[i]];
        for (off, &p) in self.probs.iter().enumerate() {
            let vals = crate::store::unravel(off, &self.dims);
            m[vals[i] as usize] += p;
        }
        m
    }

    /// Distribution of atom `i` given the other atoms' values in `state`.
    pub fn conditional(&self, i: usize, state: &[Value]) -> Vec<f64> {
        let mut s = state.to_vec();
        let mut out: Vec<f64> = (0..self.dims[i])
            .map(|v| {
                s[i] = v as Value;
                self.prob(&s)
            })
            .collect();
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|p| *p /= z);
        out
    }
}

/// Joint states allowed in [`exact_joint_oracle`].
pub const MAX_JOINT_STATES: usize = 1 << 20;

/// Exact joint of an acyclic ground BN by the product of each atom's
/// ground conditional. Atoms outside the graph keep their defaults.
pub fn exact_joint_oracle(graph: &GroundGraph, bn: &TemplateBn, schema: &Arc<Schema>) -> Result<JointTable> {
    let dims: Vec<usize> = graph
        .nodes()
        .iter()
        .map(|a| schema.functor(a.functor).range_len())
        .collect();
    let states = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&s| s <= MAX_JOINT_STATES))
        .ok_or_else(|| Error::TooLarge(format!("joint over {} atoms exceeds {MAX_JOINT_STATES} states", dims.len())))?;
    if graph.topological_order().is_none() {
        let (p, _) = graph.edges()[0];
        return Err(Error::GroundCycle(schema.display_atom(&graph.nodes()[p])));
    }
    let scorer = Scorer::new(bn, schema)?;
    let resolved: Vec<Resolved> = graph
        .nodes()
        .iter()
        .map(|a| scorer.resolve(schema, &crate::gibbs::GibbsQuery::new(a.clone())))
        .collect::<Result<_>>()?;
    let base = Database::with_defaults(schema.clone())?;
    let mut probs = vec![0.0; states];
    for (off, slot) in probs.iter_mut().enumerate() {
        let vals = crate::store::unravel(off, &dims);
        let mut ev = Evidence::new(&base);
        for (a, &v) in graph.nodes().iter().zip(&vals) {
            ev.set(a, v as Value);
        }
        let mut p = 1.0;
        for (i, a) in graph.nodes().iter().enumerate() {
            let cond = scorer.ground_conditional(&ev, &resolved[i], a)?;
            p *= cond[vals[i] as usize];
            if p == 0.0 {
                break;
            }
        }
        *slot = p;
    }
    Ok(JointTable {
        atoms: graph.nodes().to_vec(),
        dims,
        probs,
    })
}

/// Reads a ground atom's value from any source, by name.
pub fn value_name(src: &dyn AtomSource, atom: &GroundAtom) -> String {
    let info = src.schema().functor(atom.functor);
    info.decl.range[src.atom_value(atom) as usize].clone()
}
