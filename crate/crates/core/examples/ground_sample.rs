//! Grounds a small template and compares ordered Gibbs marginals with the
//! exact joint.

use std::sync::Arc;

use rdnbayes::ground::{exact_joint_oracle, gibbs_sample, ground_template, SampleOptions};
use rdnbayes::rdn::moralize_to_rdn;
use rdnbayes::store::{FunctorDecl, Population, Schema};
use rdnbayes::template::{BnStructure, TemplateBn};

fn main() -> rdnbayes::Result<()> {
    let schema = Arc::new(Schema::new(
        vec![Population::new("person", ["ann", "bo", "cy"])?],
        vec![
            FunctorDecl::attribute("smokes", &["person"], &["T", "F"]),
            FunctorDecl::attribute("cancer", &["person"], &["T", "F"]),
        ],
    )?);
    let s = BnStructure::from_text(&schema, &["smokes(P)", "cancer(P)"], &[("smokes(P)", "cancer(P)")])?;
    let bn = TemplateBn::with_rows(s, vec![vec![vec![0.3, 0.7]], vec![vec![0.6, 0.4], vec![0.1, 0.9]]])?;

    let graph = ground_template(&moralize_to_rdn(&bn), &schema)?;
    println!("{} ground atoms, {} ground edges", graph.len(), graph.edges().len());

    let exact = exact_joint_oracle(&ground_template(&bn, &schema)?, &bn, &schema)?;
    let opts = SampleOptions {
        iterations: 20_000,
        seed: 1,
        ..SampleOptions::default()
    };
    let evidence = [(schema.parse_atom("smokes(ann)")?, 0)];
    let free = gibbs_sample(&graph, &bn, &schema, &[], &opts)?;
    for (atom, m) in free.free.iter().zip(&free.marginals) {
        let i = exact.atoms.iter().position(|a| a == atom).unwrap();
        println!(
            "{:<12} sampled {:.3}  exact {:.3}",
            schema.display_atom(atom),
            m[0],
            exact.marginal(i)[0]
        );
    }
    let clamped = gibbs_sample(&graph, &bn, &schema, &evidence, &opts)?;
    let c = clamped.free.iter().position(|a| schema.display_atom(a) == "cancer(ann)").unwrap();
    println!("P(cancer(ann)=T | smokes(ann)=T) ~ {:.3}", clamped.marginals[c][0]);
    Ok(())
}
