//! Parametrized random variables and template Bayesian networks.

mod bn;
mod estimate;
mod learn;
mod prv;

pub use bn::{BnStructure, Cpt, TemplateBn};
pub use estimate::{estimate_node, estimate_parameters, estimate_parameters_timed, family_counts, FamilyCounts};
pub use learn::{default_candidates, family_score, hill_climb, learn_structure, LearnOptions};
pub use prv::{Prv, Term};
