//! Counting groundings of conjunctions against the closed-world store.

use std::path::PathBuf;

use rdnbayes::store::{count_groundings, enumerate_groundings, load_dir, Conjunction};

fn main() -> rdnbayes::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/coffee");
    let db = load_dir(&dir.join("schema.json"), &dir)?;

    let male_friends = Conjunction::new()
        .with("g(B)", "M")?
        .with("F(A,B)", "T")?
        .constrain("A", "sam");
    println!("male friends of sam: {}", count_groundings(&db, &male_friends)?);

    let friends = Conjunction::new().with("F(A,B)", "T")?.constrain("A", "sam");
    println!("friends of sam: {}", count_groundings(&db, &friends)?);

    // Negated relationships count the complement.
    let strangers = Conjunction::new().with("F(A,B)", "F")?.constrain("A", "sam");
    println!("non-friends of sam: {}", count_groundings(&db, &strangers)?);

    let drinkers = Conjunction::new().with("CD(A)", "T")?;
    for g in enumerate_groundings(&db, &drinkers)? {
        println!("coffee drinker: {}", g["A"]);
    }
    Ok(())
}
