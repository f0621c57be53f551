//! Independent oracles for the integration tests. Everything here works on
//! plain strings and hash maps, and only touches the library to build its
//! inputs.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rdnbayes::store::{Database, DatabaseBuilder, FunctorDecl, Population, Schema};
use rdnbayes::template::{BnStructure, TemplateBn};

pub type Atom = (String, Vec<String>);

/// A relational database as a map from atoms to value names. Relationship
/// atoms that are absent are false.
#[derive(Debug, Clone)]
pub struct World {
    pub pops: Vec<(String, Vec<String>)>,
    pub functors: Vec<FunctorDecl>,
    pub values: HashMap<Atom, String>,
}

impl World {
    pub fn decl(&self, f: &str) -> &FunctorDecl {
        self.functors.iter().find(|d| d.name == f).unwrap()
    }

    pub fn constants(&self, pop: &str) -> &[String] {
        &self.pops.iter().find(|(p, _)| p == pop).unwrap().1
    }

    pub fn value(&self, f: &str, args: &[String]) -> String {
        match self.values.get(&(f.to_string(), args.to_vec())) {
            Some(v) => v.clone(),
            None if self.decl(f).is_relationship() => "F".into(),
            None => panic!("attribute {f}{args:?} has no value"),
        }
    }

    pub fn schema(&self) -> Arc<Schema> {
        let pops = self
            .pops
            .iter()
            .map(|(p, cs)| Population::new(p, cs.iter().cloned()).unwrap())
            .collect();
        Arc::new(Schema::new(pops, self.functors.clone()).unwrap())
    }

    pub fn database(&self) -> Database {
        let mut b = DatabaseBuilder::new(self.schema()).unwrap();
        let mut atoms: Vec<_> = self.values.iter().collect();
        atoms.sort();
        for ((f, args), v) in atoms {
            if self.decl(f).is_relationship() && v == "F" {
                continue;
            }
            let a: Vec<&str> = args.iter().map(String::as_str).collect();
            b.set(f, &a, v).unwrap();
        }
        b.finish().unwrap()
    }

    /// Every tuple of constants for the given populations.
    pub fn tuples(&self, pops: &[String]) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new()];
        for p in pops {
            let mut next = Vec::new();
            for t in &out {
                for c in self.constants(p) {
                    let mut t2 = t.clone();
                    t2.push(c.clone());
                    next.push(t2);
                }
            }
            out = next;
        }
        out
    }

    /// Fills every atom at random; relationships hold with probability `p_rel`.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng, p_rel: f64) {
        self.values.clear();
        for d in self.functors.clone() {
            for t in self.tuples(&d.args) {
                let v = if d.is_relationship() {
                    if rng.gen_bool(p_rel) { "T" } else { "F" }.to_string()
                } else {
                    d.range[rng.gen_range(0..d.range.len())].clone()
                };
                self.values.insert((d.name.clone(), t), v);
            }
        }
    }
}

pub fn is_var(t: &str) -> bool {
    t.starts_with(|c: char| c.is_ascii_uppercase())
}

/// `"F(A,b)"` to `("F", ["A", "b"])`.
pub fn split_prv(text: &str) -> (String, Vec<String>) {
    let open = text.find('(').unwrap();
    let inner = &text[open + 1..text.len() - 1];
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|s| s.trim().to_string()).collect()
    };
    (text[..open].to_string(), args)
}

/// A template BN held as plain data, with CPT rows ordered by parent values
/// with the last parent varying fastest.
#[derive(Debug, Clone)]
pub struct OracleBn {
    pub nodes: Vec<(String, Vec<String>)>,
    pub parents: Vec<Vec<usize>>,
    pub cpts: Vec<Vec<Vec<f64>>>,
}

impl OracleBn {
    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&c| self.parents[c].contains(&i)).collect()
    }

    pub fn node_text(&self, i: usize) -> String {
        format!("{}({})", self.nodes[i].0, self.nodes[i].1.join(","))
    }

    pub fn to_library(&self, world: &World) -> TemplateBn {
        let texts: Vec<String> = (0..self.nodes.len()).map(|i| self.node_text(i)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let edges: Vec<(&str, &str)> = (0..self.nodes.len())
            .flat_map(|c| self.parents[c].iter().map(move |&p| (p, c)))
            .map(|(p, c)| (refs[p], refs[c]))
            .collect();
        let used: Vec<FunctorDecl> = world
            .functors
            .iter()
            .filter(|d| self.nodes.iter().any(|(f, _)| *f == d.name))
            .cloned()
            .collect();
        let schema = Schema::new(
            world
                .pops
                .iter()
                .map(|(p, cs)| Population::new(p, cs.iter().cloned()).unwrap())
                .collect(),
            used,
        )
        .unwrap();
        let s = BnStructure::from_text(&schema, &refs, &edges).unwrap();
        // The library orders parents ascending by node index, as we do.
        TemplateBn::with_rows(s, self.cpts.clone()).unwrap()
    }

    /// CP of `child_value` given parent value indices.
    pub fn cp(&self, world: &World, i: usize, child_value: &str, parent_values: &[String]) -> f64 {
        let mut row = 0;
        for (&p, v) in self.parents[i].iter().zip(parent_values) {
            let d = world.decl(&self.nodes[p].0);
            row = row * d.range.len() + d.range.iter().position(|r| r == v).unwrap();
        }
        let d = world.decl(&self.nodes[i].0);
        self.cpts[i][row][d.range.iter().position(|r| r == child_value).unwrap()]
    }

    fn var_pop(&self, world: &World, var: &str) -> String {
        for (f, args) in &self.nodes {
            for (k, a) in args.iter().enumerate() {
                if a == var {
                    return world.decl(f).args[k].clone();
                }
            }
        }
        panic!("unknown variable {var}")
    }
}

fn ground(args: &[String], binding: &BTreeMap<String, String>) -> Vec<String> {
    args.iter()
        .map(|a| if is_var(a) { binding[a].clone() } else { a.clone() })
        .collect()
}

/// Log CPs of family `u` over its relevant groundings, for the target atom
/// at node `node` set to `t`. Relationship slots other than the target
/// node's must be true.
pub fn family_log_cps(world: &World, bn: &OracleBn, node: usize, target: &Atom, t: &str, u: usize) -> Vec<f64> {
    let mut gamma = BTreeMap::new();
    for (a, c) in bn.nodes[node].1.iter().zip(&target.1) {
        if is_var(a) {
            gamma.insert(a.clone(), c.clone());
        }
    }
    let slots: Vec<usize> = std::iter::once(u).chain(bn.parents[u].iter().copied()).collect();
    let mut vars: Vec<String> = Vec::new();
    for &s in &slots {
        for a in &bn.nodes[s].1 {
            if is_var(a) && !vars.contains(a) && !gamma.contains_key(a) {
                vars.push(a.clone());
            }
        }
    }
    let pops: Vec<String> = vars.iter().map(|v| bn.var_pop(world, v)).collect();
    let mut out = Vec::new();
    for tuple in world.tuples(&pops) {
        let mut b = gamma.clone();
        for (v, c) in vars.iter().zip(&tuple) {
            b.insert(v.clone(), c.clone());
        }
        let mut vals = Vec::new();
        let mut relevant = true;
        for &s in &slots {
            let (f, args) = &bn.nodes[s];
            let g = ground(args, &b);
            let v = if *f == target.0 && g == target.1 {
                t.to_string()
            } else {
                world.value(f, &g)
            };
            if s != node && world.decl(f).is_relationship() && v != "T" {
                relevant = false;
            }
            vals.push(v);
        }
        if relevant {
            out.push(bn.cp(world, u, &vals[0], &vals[1..]).ln());
        }
    }
    out
}

/// Gibbs log score: for the target's family and each child's family, the
/// mean log CP over relevant groundings; families with none are skipped.
pub fn oracle_log_score(world: &World, bn: &OracleBn, node: usize, target: &Atom, t: &str) -> f64 {
    let mut score = 0.0;
    for u in std::iter::once(node).chain(bn.children(node)) {
        let cps = family_log_cps(world, bn, node, target, t, u);
        if !cps.is_empty() {
            score += cps.iter().sum::<f64>() / cps.len() as f64;
        }
    }
    score
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub fn oracle_probability(world: &World, bn: &OracleBn, node: usize, target: &Atom) -> Vec<f64> {
    let range = world.decl(&target.0).range.clone();
    let scores: Vec<f64> = range.iter().map(|t| oracle_log_score(world, bn, node, target, t)).collect();
    softmax(&scores)
}

/// Area under the PR curve by scanning every distinct threshold against
/// every point.
pub fn auc_by_thresholds(points: &[(f64, bool)]) -> f64 {
    let pos = points.iter().filter(|p| p.1).count() as f64;
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    ts.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ts.dedup();
    let (mut area, mut prev_r) = (0.0, 0.0);
    for t in ts {
        let tp = points.iter().filter(|p| p.0 >= t && p.1).count() as f64;
        let all = points.iter().filter(|p| p.0 >= t).count() as f64;
        let r = tp / pos;
        area += (r - prev_r) * (tp / all);
        prev_r = r;
    }
    area
}

/// Brute-force number of variable assignments satisfying every literal.
pub fn brute_count(world: &World, literals: &[(String, Vec<String>, String)], fixed: &BTreeMap<String, String>) -> u64 {
    let mut vars: Vec<(String, String)> = Vec::new();
    for (f, args, _) in literals {
        for (k, a) in args.iter().enumerate() {
            if is_var(a) && !fixed.contains_key(a) && !vars.iter().any(|(v, _)| v == a) {
                vars.push((a.clone(), world.decl(f).args[k].clone()));
            }
        }
    }
    let pops: Vec<String> = vars.iter().map(|(_, p)| p.clone()).collect();
    let mut n = 0;
    for tuple in world.tuples(&pops) {
        let mut b = fixed.clone();
        for ((v, _), c) in vars.iter().zip(&tuple) {
            b.insert(v.clone(), c.clone());
        }
        if literals.iter().all(|(f, args, val)| world.value(f, &ground(args, &b)) == *val) {
            n += 1;
        }
    }
    n
}
