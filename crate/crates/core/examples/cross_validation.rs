//! Five-fold subgraph cross-validation on a synthetic friendship database.

use std::sync::Arc;

use rdnbayes::eval::{evaluate, generate_synthetic, EvalOptions};
use rdnbayes::store::{FunctorDecl, Population, Schema};
use rdnbayes::template::{BnStructure, TemplateBn};

fn main() -> rdnbayes::Result<()> {
    let schema = Arc::new(Schema::new(
        vec![Population::new("person", (0..60).map(|i| format!("p{i}")))?],
        vec![
            FunctorDecl::attribute("smokes", &["person"], &["T", "F"]),
            FunctorDecl::attribute("cough", &["person"], &["T", "F"]),
            FunctorDecl::relationship("Friend", &["person", "person"]),
        ],
    )?);
    let s = BnStructure::from_text(
        &schema,
        &["smokes(A)", "cough(A)", "Friend(A,B)"],
        &[("smokes(A)", "cough(A)")],
    )?;
    let bn = TemplateBn::with_rows(
        s,
        vec![
            vec![vec![0.3, 0.7]],
            vec![vec![0.8, 0.2], vec![0.15, 0.85]],
            vec![vec![0.1, 0.9]],
        ],
    )?;
    let db = generate_synthetic(&bn, schema, 11)?;
    let (report, rows) = evaluate(&bn, &db, &EvalOptions::default())?;
    for p in &report.per_predicate {
        let auc = p.auc_pr.map(|a| format!("{:.3} ± {:.3}", a.mean, a.stderr)).unwrap_or("-".into());
        println!("{:<8} CLL {:.3} ± {:.3}  AUC-PR {auc}  ({} facts)", p.predicate, p.cll.mean, p.cll.stderr, p.facts);
    }
    println!("overall CLL {:.3} ± {:.3} over {} scored facts", report.cll.mean, report.cll.stderr, rows.len());
    Ok(())
}
