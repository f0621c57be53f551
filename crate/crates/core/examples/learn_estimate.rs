//! Samples a database from a known template, then recovers a structure by
//! hill-climbing and estimates its CPTs.

use std::sync::Arc;

use rdnbayes::eval::generate_synthetic;
use rdnbayes::store::{FunctorDecl, Population, Schema};
use rdnbayes::template::{default_candidates, estimate_parameters, learn_structure, BnStructure, LearnOptions, TemplateBn};

fn main() -> rdnbayes::Result<()> {
    let schema = Arc::new(Schema::new(
        vec![
            Population::new("user", (0..300).map(|i| format!("u{i}")))?,
            Population::new("item", (0..40).map(|i| format!("i{i}")))?,
        ],
        vec![
            FunctorDecl::attribute("age", &["user"], &["young", "old"]),
            FunctorDecl::attribute("genre", &["item"], &["drama", "comedy"]),
            FunctorDecl::relationship("Rated", &["user", "item"]),
            FunctorDecl::attribute("liked", &["user", "item"], &["T", "F"]),
        ],
    )?);
    let truth = BnStructure::from_text(
        &schema,
        &["age(User)", "genre(Item)", "Rated(User,Item)", "liked(User,Item)"],
        &[("age(User)", "liked(User,Item)"), ("genre(Item)", "liked(User,Item)")],
    )?;
    let generator = TemplateBn::with_rows(
        truth.clone(),
        vec![
            vec![vec![0.6, 0.4]],
            vec![vec![0.5, 0.5]],
            vec![vec![0.2, 0.8]],
            vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.4, 0.6], vec![0.8, 0.2]],
        ],
    )?;
    let db = generate_synthetic(&generator, schema.clone(), 7)?;
    println!("{} ground atoms, {} ratings", db.atom_count(), db.true_count(2));

    let refit = estimate_parameters(&truth, &db, 1.0)?;
    println!("liked(User,Item) given the true parents:");
    for (r, row) in refit.cpt(3).rows().into_iter().enumerate() {
        println!("  row {r}: {:.3?}", row);
    }

    let candidates = default_candidates(&schema);
    let learned = learn_structure(&db, &candidates, &LearnOptions::default())?;
    println!("learned edges:");
    let s = learned.structure();
    for (p, c) in s.edges() {
        println!("  {} -> {}", s.node(p), s.node(c));
    }
    Ok(())
}
