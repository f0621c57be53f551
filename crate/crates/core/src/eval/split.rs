//! Entity-based cross-validation folds.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::{for_each_tuple, AtomSource, ConstId, Database, DatabaseBuilder, Population};

/// Fold id of every constant, per population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSpec {
    pub fold_count: usize,
    /// Population name to fold id by constant id.
    pub assignment: BTreeMap<String, Vec<usize>>,
    pub seed: u64,
}

impl FoldSpec {
    /// Shuffles each population with one seeded generator and deals the
    /// constants round-robin.
    pub fn new(db: &Database, fold_count: usize, seed: u64) -> Result<Self> {
        if fold_count < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {fold_count}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut assignment = BTreeMap::new();
        for pop in db.schema().populations() {
            if pop.len() < fold_count {
                return Err(Error::InvalidArgument(format!(
                    "population {} has {} constants, fewer than {fold_count} folds",
                    pop.name(),
                    pop.len()
                )));
            }
            let mut order: Vec<usize> = (0..pop.len()).collect();
            order.shuffle(&mut rng);
            let mut fold = vec![0; pop.len()];
            for (pos, &c) in order.iter().enumerate() {
                fold[c] = pos % fold_count;
            }
            assignment.insert(pop.name().to_string(), fold);
        }
        Ok(FoldSpec {
            fold_count,
            assignment,
            seed,
        })
    }

    pub fn fold_of(&self, population: &str, c: ConstId) -> usize {
        self.assignment[population][c as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Fold {
    pub index: usize,
    pub train: Database,
    pub test: Database,
}

/// One (train, test) pair per fold. The test side holds the fold's
/// entities; the train side holds the rest. Each side keeps its entities'
/// attribute atoms and only the relationship tuples lying entirely inside
/// it.
pub fn subgraph_split(db: &Database, fold_count: usize, seed: u64) -> Result<(FoldSpec, Vec<Fold>)> {
    let spec = FoldSpec::new(db, fold_count, seed)?;
    let folds = (0..fold_count)
        .map(|f| {
            let test_mask = masks(db, &spec, |x| x == f);
            let train_mask = masks(db, &spec, |x| x != f);
            Ok(Fold {
                index: f,
                train: restrict(db, &train_mask)?,
                test: restrict(db, &test_mask)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, folds))
}

fn masks(db: &Database, spec: &FoldSpec, keep: impl Fn(usize) -> bool) -> Vec<Vec<bool>> {
    db.schema()
        .populations()
        .iter()
        .map(|p| spec.assignment[p.name()].iter().map(|&f| keep(f)).collect())
        .collect()
}

/// The sub-database induced by the kept constants of each population.
/// Constants keep their names and relative order.
pub fn restrict(db: &Database, keep: &[Vec<bool>]) -> Result<Database> {
    let schema = db.schema();
    let mut new_id: Vec<Vec<Option<ConstId>>> = Vec::new();
    let mut old_id: Vec<Vec<ConstId>> = Vec::new();
    let mut pops = Vec::new();
    for (p, pop) in schema.populations().iter().enumerate() {
        let mut fwd = vec![None; pop.len()];
        let mut back = Vec::new();
        for c in 0..pop.len() {
            if keep[p][c] {
                fwd[c] = Some(back.len() as ConstId);
                back.push(c as ConstId);
            }
        }
        pops.push(Population::new(
            pop.name(),
            back.iter().map(|&c| pop.constant(c).to_string()),
        )?);
        new_id.push(fwd);
        old_id.push(back);
    }
    let sub = Arc::new(schema.with_populations(pops)?);
    let mut b = DatabaseBuilder::new(sub.clone())?;
    for (f, info) in schema.functors().iter().enumerate() {
        if info.is_relationship() {
            'tuple: for t in db.true_tuples(f) {
                let mut args = Vec::with_capacity(t.len());
                for (&c, &p) in t.iter().zip(&info.arg_pops) {
                    match new_id[p][c as usize] {
                        Some(n) => args.push(n),
                        None => continue 'tuple,
                    }
                }
                b.set_ids(f, &args, info.true_value())?;
            }
        } else {
            let dims: Vec<usize> = info.arg_pops.iter().map(|&p| old_id[p].len()).collect();
            let mut err = None;
            let mut old = vec![0; dims.len()];
            for_each_tuple(&dims, |t| {
                for (k, (&c, &p)) in t.iter().zip(&info.arg_pops).enumerate() {
                    old[k] = old_id[p][c as usize];
                }
                if let Err(e) = b.set_ids(f, t, db.attr_value(f, &old)) {
                    err.get_or_insert(e);
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
    }
    b.finish()
}
