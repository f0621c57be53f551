//! Scores `g(sam)` on the coffee-drinker fixture and prints the per-family
//! trace for both genders.

use std::path::PathBuf;

use rdnbayes::gibbs::{parse_query, Scorer};
use rdnbayes::store::load_dir;
use rdnbayes::template::TemplateBn;

fn main() -> rdnbayes::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/coffee");
    let bn = TemplateBn::load(&dir.join("model.json"))?;
    let db = load_dir(&dir.join("schema.json"), &dir)?;
    let query = parse_query(&bn, db.schema(), "g(sam)", None)?;
    let scorer = Scorer::new(&bn, db.schema())?;

    for t in 0..2 {
        let trace = scorer.trace(&db, &query, t)?;
        println!("g(sam) = {}", trace.value);
        println!("  {:<6} {:<22} {:>5} {:>8} {:>5} {:>8}", "family", "parents", "cp", "w", "p_r", "w*p_r");
        for r in trace.rows.iter().filter(|r| r.proportion > 0.0) {
            println!(
                "  {:<6} {:<22} {:>5.2} {:>8.3} {:>5.2} {:>8.3}",
                r.family,
                r.parent_state(),
                r.cp,
                r.weight,
                r.proportion,
                r.contribution
            );
        }
        println!("  score {:.4}", trace.score);
    }
    let p = scorer.probability(&db, &query)?;
    println!("P(g(sam)=W) = {:.4}, P(g(sam)=M) = {:.4}", p[0], p[1]);
    Ok(())
}
