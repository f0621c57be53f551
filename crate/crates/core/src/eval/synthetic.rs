//! Forward sampling of a database from a template BN.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::{GibbsQuery, Resolved, Scorer};
use crate::ground::{draw, groundings};
use crate::store::{unravel, AtomSource, ConstId, Database, DatabaseBuilder, Evidence, FunctorId, GroundAtom, Schema, Value};
use crate::template::{Term, TemplateBn};

/// Ground atoms allowed on the atom-by-atom path.
pub const MAX_GROUND_ATOMS: u64 = 1 << 22;

const CHUNK: usize = 1 << 14;

/// Samples every ground atom of `schema` from `bn`, parents before
/// children. Each atom is drawn from the node the scorer would resolve it
/// to, combining that node's family groundings by the geometric mean.
/// Atoms that ground no node keep the default (first value, or false).
///
/// When functors depend on each other acyclically the database is built one
/// functor at a time; otherwise the ground dependency graph is sorted and
/// a cycle is an error.
pub fn generate_synthetic(bn: &TemplateBn, schema: Arc<Schema>, seed: u64) -> Result<Database> {
    let s = bn.structure();
    s.check_schema(&schema)?;
    let nf = schema.functors().len();
    let node_f: Vec<FunctorId> = s
        .nodes()
        .iter()
        .map(|p| schema.functor_id(&p.functor))
        .collect::<Result<_>>()?;
    let mut deps = vec![Vec::new(); nf];
    let mut self_dep = false;
    for (p, c) in s.edges() {
        if node_f[p] == node_f[c] {
            self_dep = true;
        }
        deps[node_f[c]].push(node_f[p]);
    }
    let scorer = Scorer::new(bn, &schema)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match (self_dep, functor_order(&deps)) {
        (false, Some(order)) => by_functor(bn, &scorer, &schema, &node_f, &order, &mut rng),
        _ => by_atom(&scorer, &schema, &mut rng),
    }
}

fn functor_order(deps: &[Vec<FunctorId>]) -> Option<Vec<FunctorId>> {
    let n = deps.len();
    let mut indeg = vec![0; n];
    let mut out: Vec<Vec<FunctorId>> = vec![Vec::new(); n];
    for (c, ps) in deps.iter().enumerate() {
        for &p in ps {
            indeg[c] += 1;
            out[p].push(c);
        }
    }
    let mut heap: BinaryHeap<Reverse<FunctorId>> = (0..n).filter(|&f| indeg[f] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(f)) = heap.pop() {
        order.push(f);
        for &c in &out[f] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    (order.len() == n).then_some(order)
}

fn dims_of(schema: &Schema, f: FunctorId) -> Vec<usize> {
    schema
        .functor(f)
        .arg_pops
        .iter()
        .map(|&p| schema.population(p).len())
        .collect()
}

fn by_functor(
    bn: &TemplateBn,
    scorer: &Scorer,
    schema: &Arc<Schema>,
    node_f: &[FunctorId],
    order: &[FunctorId],
    rng: &mut ChaCha8Rng,
) -> Result<Database> {
    let s = bn.structure();
    let mut db = Database::with_defaults(schema.clone())?;
    for &f in order {
        let info = schema.functor(f);
        let dims = dims_of(schema, f);
        let space: usize = dims.iter().product();
        let nodes: Vec<usize> = (0..s.len()).filter(|&i| node_f[i] == f).collect();
        // A single parentless node over distinct variables: one CPT row for
        // every atom.
        let iid_row = match nodes.as_slice() {
            [n] if s.parents(*n).is_empty() && distinct_vars(&s.node(*n).args) => Some(bn.cpt(*n).row(0).to_vec()),
            _ => None,
        };
        if info.is_relationship() {
            let t = info.true_value() as usize;
            let mut flat: Vec<ConstId> = Vec::new();
            let mut len = 0;
            if let Some(row) = iid_row {
                for off in geometric_hits(rng, space, row[t]) {
                    flat.extend(unravel(off, &dims));
                    len += 1;
                }
            } else {
                for (off, v) in sample_atoms(scorer, &db, f, &dims, space, rng)? {
                    if v as usize == t {
                        flat.extend(unravel(off, &dims));
                        len += 1;
                    }
                }
            }
            db.replace_relationship(f, len, flat);
        } else {
            let values: Vec<Value> = match iid_row {
                Some(row) => (0..space).map(|_| draw(rng, &row)).collect(),
                None => sample_atoms(scorer, &db, f, &dims, space, rng)?
                    .into_iter()
                    .map(|(_, v)| v)
                    .collect(),
            };
            db.replace_attribute(f, values);
        }
    }
    Ok(db)
}

fn distinct_vars(args: &[Term]) -> bool {
    let mut seen = Vec::new();
    for a in args {
        match a.as_var() {
            Some(v) if !seen.contains(&v) => seen.push(v),
            _ => return false,
        }
    }
    true
}

/// Offsets in `0..space` where a Bernoulli(p) trial succeeds, found by
/// geometric skips.
fn geometric_hits(rng: &mut ChaCha8Rng, space: usize, p: f64) -> Vec<usize> {
    let mut out = Vec::new();
    if p <= 0.0 {
        return out;
    }
    if p >= 1.0 {
        return (0..space).collect();
    }
    let denom = (1.0 - p).ln();
    let mut pos = 0usize;
    loop {
        let u: f64 = 1.0 - rng.gen::<f64>();
        let skip = (u.ln() / denom).floor();
        if skip >= (space - pos) as f64 {
            return out;
        }
        pos += skip as usize;
        out.push(pos);
        pos += 1;
        if pos >= space {
            return out;
        }
    }
}

/// Draws every grounding of `f` in offset order. Conditionals are computed
/// in parallel per chunk; draws stay sequential on `rng`.
fn sample_atoms(
    scorer: &Scorer,
    db: &Database,
    f: FunctorId,
    dims: &[usize],
    space: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, Value)>> {
    let schema = db.schema();
    let mut out = Vec::with_capacity(space);
    let mut start = 0;
    while start < space {
        let end = (start + CHUNK).min(space);
        let dists = (start..end)
            .into_par_iter()
            .map(|off| {
                let atom = GroundAtom::new(f, unravel(off, dims));
                conditional(scorer, schema, db, &atom)
            })
            .collect::<Result<Vec<_>>>()?;
        for (k, d) in dists.into_iter().enumerate() {
            let v = match d {
                Some(p) => draw(rng, &p),
                None => default_value(schema, f),
            };
            out.push((start + k, v));
        }
        start = end;
    }
    Ok(out)
}

fn default_value(schema: &Schema, f: FunctorId) -> Value {
    let info = schema.functor(f);
    if info.is_relationship() {
        info.false_value()
    } else {
        0
    }
}

fn resolve(scorer: &Scorer, schema: &Schema, atom: &GroundAtom) -> Option<Resolved> {
    scorer.resolve(schema, &GibbsQuery::new(atom.clone())).ok()
}

fn conditional<S: AtomSource + ?Sized>(
    scorer: &Scorer,
    schema: &Schema,
    src: &S,
    atom: &GroundAtom,
) -> Result<Option<Vec<f64>>> {
    match resolve(scorer, schema, atom) {
        Some(r) => scorer.ground_conditional(src, &r, atom).map(Some),
        None => Ok(None),
    }
}

fn by_atom(scorer: &Scorer, schema: &Arc<Schema>, rng: &mut ChaCha8Rng) -> Result<Database> {
    let total: u64 = (0..schema.functors().len()).map(|f| schema.grounding_space(f)).sum();
    if total > MAX_GROUND_ATOMS {
        return Err(Error::TooLarge(format!(
            "{total} ground atoms exceed {MAX_GROUND_ATOMS} for atom-by-atom sampling"
        )));
    }
    let mut atoms = Vec::new();
    for f in 0..schema.functors().len() {
        let dims = dims_of(schema, f);
        let space: usize = dims.iter().product();
        atoms.extend((0..space).map(|off| GroundAtom::new(f, unravel(off, &dims))));
    }
    let index: HashMap<&GroundAtom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let structure = scorer.bn().structure();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); atoms.len()];
    let mut indeg = vec![0usize; atoms.len()];
    let mut resolved = Vec::with_capacity(atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        let r = resolve(scorer, schema, a);
        if let Some(r) = &r {
            let gamma = scorer.gamma_names(schema, r);
            let mut ps: Vec<usize> = Vec::new();
            for &q in structure.parents(r.node) {
                for g in groundings(schema, &structure.node(q).substitute(&gamma))? {
                    let j = index[&g];
                    if j != i && !ps.contains(&j) {
                        ps.push(j);
                    }
                }
            }
            indeg[i] = ps.len();
            for j in ps {
                children[j].push(i);
            }
        }
        resolved.push(r);
    }
    let mut heap: BinaryHeap<Reverse<usize>> = (0..atoms.len()).filter(|&i| indeg[i] == 0).map(Reverse).collect();
    let base = Database::with_defaults(schema.clone())?;
    let mut ev = Evidence::new(&base);
    let mut values = vec![0 as Value; atoms.len()];
    let mut done = 0;
    while let Some(Reverse(i)) = heap.pop() {
        let a = &atoms[i];
        values[i] = match &resolved[i] {
            Some(r) => draw(rng, &scorer.ground_conditional(&ev, r, a)?),
            None => default_value(schema, a.functor),
        };
        ev.set(a, values[i]);
        done += 1;
        for &c in &children[i] {
            indeg[c] -= 1;
            if indeg[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    if done < atoms.len() {
        let stuck = (0..atoms.len()).find(|&i| indeg[i] > 0).unwrap();
        return Err(Error::GroundCycle(schema.display_atom(&atoms[stuck])));
    }
    let mut b = DatabaseBuilder::new(schema.clone())?;
    for (a, &v) in atoms.iter().zip(&values) {
        let info = schema.functor(a.functor);
        if !info.is_relationship() || v == info.true_value() {
            b.set_ids(a.functor, &a.args, v)?;
        }
    }
    b.finish()
}
