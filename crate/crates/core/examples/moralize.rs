//! Reads a template BN as a dependency network: every node's parents
//! become its Markov blanket.

use std::path::PathBuf;

use rdnbayes::rdn::{markov_blanket, moralize_to_rdn};
use rdnbayes::template::{Prv, TemplateBn};

fn main() -> rdnbayes::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/friends/model.json");
    let bn = TemplateBn::load(&path)?;
    let s = bn.structure();
    println!("BN edges:");
    for (p, c) in s.edges() {
        println!("  {} -> {}", s.node(p), s.node(c));
    }

    let rdn = moralize_to_rdn(&bn);
    println!("dependency network ({} edges):", rdn.edge_count());
    for (i, n) in rdn.nodes().iter().enumerate() {
        let ps: Vec<String> = rdn.parents(i).iter().map(|&p| rdn.nodes()[p].to_string()).collect();
        println!("  {n} <- {}", ps.join(", "));
    }

    let mb = markov_blanket(s, &Prv::parse("g(A)")?)?;
    let names: Vec<String> = mb.iter().map(|p| p.to_string()).collect();
    println!("blanket of g(A): {}", names.join(", "));
    Ok(())
}
