//! Audits the friendship template: builds a witness database for the
//! gender edge and shows the two chains of Gibbs conditionals disagree.

use std::path::PathBuf;

use rdnbayes::audit::{audit, construct_witness, construct_witness_with, find_suitable_edges, lowd_residual, WitnessOptions};
use rdnbayes::template::TemplateBn;

fn main() -> rdnbayes::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/friends/model.json");
    let bn = TemplateBn::load(&path)?;
    let edges = find_suitable_edges(bn.structure());
    for e in &edges {
        println!("suitable: {} -> {}", e.parent_prv, e.child_prv);
    }

    let gender = edges.iter().find(|e| e.parent_prv == "g(B)").expect("gender edge");
    // Other parent F(A,B) set to T.
    let w = construct_witness(&bn, gender, &[0])?;
    let r = lowd_residual(&bn, &w)?;
    println!(
        "witness n1={} n2={} n={}: lhs {:.4} rhs {:.4} residual {:.4} (closed form {:.4})",
        w.n1,
        w.n2,
        w.n_common,
        r.lhs,
        r.rhs,
        r.residual,
        r.closed_form.unwrap_or(f64::NAN)
    );

    let sym = construct_witness_with(&bn, gender, &[0], &WitnessOptions::default())?;
    println!("symmetric witness residual {:.2e}", lowd_residual(&bn, &sym)?.residual);

    let report = audit(&bn)?;
    println!("verdict: {:?}", report.verdict);
    Ok(())
}
