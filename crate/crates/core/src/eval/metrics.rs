//! Conditional log-likelihood and precision-recall area.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gibbs::{GibbsQuery, Scorer};
use crate::store::{for_each_tuple, AtomSource, FunctorId, GroundAtom, Value};
use crate::template::TemplateBn;

/// Probabilities below this are clamped before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanStderr {
    /// Sample standard error; zero for fewer than two values.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return MeanStderr {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return MeanStderr { mean, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MeanStderr {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

/// Area under the precision-recall curve, step-wise: scores are visited in
/// decreasing order with ties forming one threshold, and each threshold
/// adds `(R_i - R_{i-1}) * P_i`.
pub fn auc_pr(scored: &[(f64, bool)]) -> Result<f64> {
    if scored.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let positives = scored.iter().filter(|(_, y)| *y).count();
    if positives == 0 {
        return Err(Error::InvalidArgument("no positive labels".into()));
    }
    let mut v = scored.to_vec();
    v.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut area, mut prev_r) = (0.0, 0.0);
    let mut i = 0;
    while i < v.len() {
        let s = v[i].0;
        while i < v.len() && v[i].0 == s {
            if v[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let r = tp as f64 / positives as f64;
        let p = tp as f64 / (tp + fp) as f64;
        area += (r - prev_r) * p;
        prev_r = r;
    }
    Ok(area)
}

/// One scored test fact.
#[derive(Debug, Clone, PartialEq)]
pub struct FactScore {
    pub atom: GroundAtom,
    pub truth: Value,
    /// Gibbs distribution over the atom's range, or `None` when every
    /// value hits a zero-probability feature.
    pub probs: Option<Vec<f64>>,
}

impl FactScore {
    pub fn truth_probability(&self) -> f64 {
        self.probs.as_ref().map_or(0.0, |p| p[self.truth as usize])
    }

    pub fn log_likelihood(&self) -> f64 {
        self.truth_probability().max(PROB_FLOOR).ln()
    }

    pub fn is_zero(&self) -> bool {
        self.truth_probability() < PROB_FLOOR
    }
}

/// Scores every ground atom of `functor` in `db`, with the rest of `db` as
/// evidence.
pub fn score_facts<S: AtomSource + ?Sized>(bn: &TemplateBn, db: &S, functor: FunctorId) -> Result<Vec<FactScore>> {
    let schema = db.schema();
    let scorer = Scorer::new(bn, schema)?;
    let info = schema.functor(functor);
    let dims: Vec<usize> = info.arg_pops.iter().map(|&p| schema.population(p).len()).collect();
    let mut atoms = Vec::new();
    for_each_tuple(&dims, |t| atoms.push(GroundAtom::new(functor, t.to_vec())));
    atoms
        .into_par_iter()
        .map(|atom| {
            let truth = db.atom_value(&atom);
            let q = GibbsQuery::new(atom.clone());
            let probs = match scorer.probability(db, &q) {
                Ok(p) => Some(p),
                Err(Error::ZeroProbabilityFeature(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(FactScore { atom, truth, probs })
        })
        .collect()
}

/// Mean log Gibbs probability of the true value over the given facts.
pub fn conditional_log_likelihood(facts: &[FactScore]) -> f64 {
    facts.iter().map(FactScore::log_likelihood).sum::<f64>() / facts.len() as f64
}

/// `(score, label)` pairs for AUC-PR. Relationships use `T` as the positive
/// class; attributes pool one-vs-rest over all `range_len` values. Facts
/// without a distribution score 0.
pub fn pr_points(facts: &[FactScore], range_len: usize, relationship_true: Option<Value>) -> Vec<(f64, bool)> {
    let mut out = Vec::new();
    for f in facts {
        let p = |v: usize| f.probs.as_ref().map_or(0.0, |p| p[v]);
        match relationship_true {
            Some(t) => out.push((p(t as usize), f.truth == t)),
            None => out.extend((0..range_len).map(|v| (p(v), f.truth as usize == v))),
        }
    }
    out
}
