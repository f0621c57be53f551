use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{AtomSource, Schema};
use crate::template::estimate::{estimate_parameters, family_counts};
use crate::template::{BnStructure, Prv, TemplateBn, Term};

const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LearnOptions {
    pub max_parents: usize,
    pub seed: u64,
    pub pseudocount: f64,
    /// Forbid attribute parents for relationship nodes.
    pub relationship_parents_only: bool,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            max_parents: 3,
            seed: 0,
            pseudocount: 1.0,
            relationship_parents_only: true,
        }
    }
}

/// Penalized log-likelihood of one family.
///
/// Frequencies are taken over all family groundings and scaled to the
/// number of groundings of the child, so a parent that introduces a new
/// variable does not inflate the likelihood by the size of its population.
/// The penalty is `ln(N_child) / 2` per free parameter.
pub fn family_score<S: AtomSource + ?Sized>(db: &S, child: &Prv, parents: &[&Prv]) -> Result<f64> {
    let fc = family_counts(db, child, parents)?;
    let total = fc.total();
    let n_child = grounding_count(db.schema(), child)?;
    let params = ((fc.child_dim - 1) * fc.rows()) as f64;
    let penalty = (n_child.max(1) as f64).ln() / 2.0 * params;
    if total == 0 {
        return Ok(-penalty);
    }
    let mut ll = 0.0;
    for r in 0..fc.rows() {
        let nr = fc.row_total(r);
        for u in 0..fc.child_dim {
            let n = fc.get(u, r);
            if n > 0 {
                ll += n as f64 * (n as f64 / nr as f64).ln();
            }
        }
    }
    Ok(ll * n_child as f64 / total as f64 - penalty)
}

fn grounding_count(schema: &Schema, prv: &Prv) -> Result<u64> {
    let f = schema.functor_id(&prv.functor)?;
    let info = schema.functor(f);
    let mut seen: Vec<&str> = Vec::new();
    let mut n = 1u64;
    for (a, &p) in prv.args.iter().zip(&info.arg_pops) {
        if let Some(v) = a.as_var() {
            if !seen.contains(&v) {
                seen.push(v);
                n *= schema.population(p).len() as u64;
            }
        }
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Add(usize, usize),
    Remove(usize, usize),
    Reverse(usize, usize),
}

struct Climber<'a, S: AtomSource + ?Sized> {
    db: &'a S,
    nodes: &'a [Prv],
    rel: Vec<bool>,
    opts: &'a LearnOptions,
    parents: Vec<Vec<usize>>,
    cache: HashMap<(usize, Vec<usize>), f64>,
}

impl<S: AtomSource + ?Sized> Climber<'_, S> {
    fn score(&mut self, child: usize, parents: &[usize]) -> Result<f64> {
        let mut key = parents.to_vec();
        key.sort_unstable();
        if let Some(&s) = self.cache.get(&(child, key.clone())) {
            return Ok(s);
        }
        let ps: Vec<&Prv> = key.iter().map(|&p| &self.nodes[p]).collect();
        let s = family_score(self.db, &self.nodes[child], &ps)?;
        self.cache.insert((child, key), s);
        Ok(s)
    }

    fn allowed(&self, parent: usize, child: usize) -> bool {
        !(self.opts.relationship_parents_only && self.rel[child] && !self.rel[parent])
    }

    /// True if `to` is reachable from `from` along parent to child edges,
    /// ignoring the edge `skip`.
    fn reaches(&self, from: usize, to: usize, skip: Option<(usize, usize)>) -> bool {
        let n = self.nodes.len();
        let mut children = vec![Vec::new(); n];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                if skip != Some((p, c)) {
                    children[p].push(c);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            if x == to {
                return true;
            }
            if !std::mem::replace(&mut seen[x], true) {
                stack.extend(&children[x]);
            }
        }
        false
    }

    fn with(&self, child: usize, add: &[usize], remove: Option<usize>) -> Vec<usize> {
        let mut ps: Vec<usize> = self.parents[child]
            .iter()
            .copied()
            .filter(|&p| Some(p) != remove)
            .collect();
        ps.extend_from_slice(add);
        ps
    }

    fn delta(&mut self, mv: Move) -> Result<Option<f64>> {
        let max = self.opts.max_parents;
        Ok(match mv {
            Move::Add(p, c) => {
                if self.parents[c].len() >= max || !self.allowed(p, c) || self.reaches(c, p, None) {
                    return Ok(None);
                }
                let old = self.score(c, &self.parents[c].clone())?;
                Some(self.score(c, &self.with(c, &[p], None))? - old)
            }
            Move::Remove(p, c) => {
                let old = self.score(c, &self.parents[c].clone())?;
                Some(self.score(c, &self.with(c, &[], Some(p)))? - old)
            }
            Move::Reverse(p, c) => {
                if self.parents[p].len() >= max || !self.allowed(c, p) || self.reaches(p, c, Some((p, c))) {
                    return Ok(None);
                }
                let old = self.score(c, &self.parents[c].clone())? + self.score(p, &self.parents[p].clone())?;
                let new = self.score(c, &self.with(c, &[], Some(p)))? + self.score(p, &self.with(p, &[c], None))?;
                Some(new - old)
            }
        })
    }

    fn apply(&mut self, mv: Move) {
        match mv {
            Move::Add(p, c) => self.parents[c].push(p),
            Move::Remove(p, c) => self.parents[c].retain(|&x| x != p),
            Move::Reverse(p, c) => {
                self.parents[c].retain(|&x| x != p);
                self.parents[p].push(c);
            }
        }
    }

    fn moves(&self) -> Vec<Move> {
        let n = self.nodes.len();
        let mut out = Vec::new();
        for c in 0..n {
            for p in 0..n {
                if p == c {
                    continue;
                }
                if self.parents[c].contains(&p) {
                    out.push(Move::Remove(p, c));
                    out.push(Move::Reverse(p, c));
                } else if !self.parents[p].contains(&c) {
                    out.push(Move::Add(p, c));
                }
            }
        }
        out
    }

    /// Adds two parents to one child at once. Used when no single move
    /// improves, since a relationship and the attribute it links to are
    /// often only informative together.
    fn best_pair(&mut self) -> Result<Option<(usize, [usize; 2], f64)>> {
        let n = self.nodes.len();
        let mut best: Option<(usize, [usize; 2], f64)> = None;
        for c in 0..n {
            if self.parents[c].len() + 2 > self.opts.max_parents {
                continue;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if p == c || q == c || self.parents[c].contains(&p) || self.parents[c].contains(&q) {
                        continue;
                    }
                    if !self.allowed(p, c) || !self.allowed(q, c) || self.reaches(c, p, None) || self.reaches(c, q, None) {
                        continue;
                    }
                    let old = self.score(c, &self.parents[c].clone())?;
                    let d = self.score(c, &self.with(c, &[p, q], None))? - old;
                    if d > MIN_GAIN && best.is_none_or(|b| d > b.2) {
                        best = Some((c, [p, q], d));
                    }
                }
            }
        }
        Ok(best)
    }
}

/// Greedy hill-climbing over add, remove and reverse moves, scored by
/// [`family_score`]. Moves are tried in a seeded random order and ties go
/// to the first one seen, so the result is deterministic per seed.
pub fn hill_climb<S: AtomSource + ?Sized>(db: &S, candidates: &[Prv], opts: &LearnOptions) -> Result<BnStructure> {
    let schema = db.schema();
    let probe = BnStructure::from_schema(schema, candidates.to_vec(), &[])?;
    let rel: Vec<bool> = (0..probe.len()).map(|i| probe.is_relationship(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut climber = Climber {
        db,
        nodes: candidates,
        rel,
        opts,
        parents: vec![Vec::new(); candidates.len()],
        cache: HashMap::new(),
    };
    loop {
        let mut moves = climber.moves();
        moves.shuffle(&mut rng);
        let mut best: Option<(Move, f64)> = None;
        for mv in moves {
            if let Some(d) = climber.delta(mv)? {
                if d > MIN_GAIN && best.is_none_or(|b| d > b.1) {
                    best = Some((mv, d));
                }
            }
        }
        if let Some((mv, _)) = best {
            climber.apply(mv);
            continue;
        }
        match climber.best_pair()? {
            Some((c, [p, q], _)) => {
                climber.apply(Move::Add(p, c));
                climber.apply(Move::Add(q, c));
            }
            None => break,
        }
    }
    let edges: Vec<(usize, usize)> = climber
        .parents
        .iter()
        .enumerate()
        .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
        .collect();
    BnStructure::from_schema(schema, candidates.to_vec(), &edges)
}

/// One candidate node per functor, with variables named after their
/// population (`Person`, `Person2`, ...). Unary attributes are repeated for
/// every variable a relationship introduces over their population.
pub fn default_candidates(schema: &Schema) -> Vec<Prv> {
    let var = |pop: &str, k: usize| {
        let mut base: String = pop
            .split(|c: char| !c.is_ascii_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| {
                let mut cs = w.chars();
                let first = cs.next().unwrap().to_ascii_uppercase();
                std::iter::once(first).chain(cs).collect::<String>()
            })
            .collect();
        if !base.starts_with(|c: char| c.is_ascii_uppercase()) {
            base.insert(0, 'V');
        }
        if k > 0 {
            base.push_str(&(k + 1).to_string());
        }
        base
    };
    let mut width: HashMap<&str, usize> = HashMap::new();
    let mut out = Vec::new();
    for f in schema.functors() {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let args = f
            .decl
            .args
            .iter()
            .map(|p| {
                let k = seen.entry(p).or_default();
                *k += 1;
                Term::Var(var(p, *k - 1))
            })
            .collect();
        for (p, k) in seen {
            let w = width.entry(p).or_default();
            *w = (*w).max(k);
        }
        out.push(Prv::new(&f.decl.name, args));
    }
    for f in schema.functors() {
        if f.is_relationship() || f.decl.args.len() != 1 {
            continue;
        }
        let p = f.decl.args[0].as_str();
        for k in 1..width.get(p).copied().unwrap_or(1) {
            out.push(Prv::new(&f.decl.name, vec![Term::Var(var(p, k))]));
        }
    }
    out
}

/// Learns a structure with [`hill_climb`] and estimates its parameters.
pub fn learn_structure<S: AtomSource + ?Sized>(db: &S, candidates: &[Prv], opts: &LearnOptions) -> Result<TemplateBn> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate nodes".into()));
    }
    let s = hill_climb(db, candidates, opts)?;
    estimate_parameters(&s, db, opts.pseudocount)
}
