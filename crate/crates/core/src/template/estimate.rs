use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::store::count::{count_table, Filter};
use crate::store::{compile, AtomSource};
use crate::template::{BnStructure, Cpt, Prv, TemplateBn};

/// Raw grounding counts of one family over a whole database, indexed
/// `[u * rows + row]` where `row` follows the CPT row order.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyCounts {
    pub child_dim: usize,
    pub parent_dims: Vec<usize>,
    pub counts: Vec<u64>,
}

impl FamilyCounts {
    pub fn rows(&self) -> usize {
        self.parent_dims.iter().product()
    }

    pub fn get(&self, u: usize, row: usize) -> u64 {
        self.counts[u * self.rows() + row]
    }

    pub fn row_total(&self, row: usize) -> u64 {
        (0..self.child_dim).map(|u| self.get(u, row)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts every configuration of `child` and `parents` over all
/// groundings of their variables.
pub fn family_counts<S: AtomSource + ?Sized>(db: &S, child: &Prv, parents: &[&Prv]) -> Result<FamilyCounts> {
    let schema = db.schema();
    let prvs: Vec<&Prv> = std::iter::once(child).chain(parents.iter().copied()).collect();
    let compiled = compile(schema, prvs.iter().copied())?;
    let filters = vec![Filter::Free; prvs.len()];
    let bound = vec![None; compiled.var_names.len()];
    let table = count_table(db, &compiled.pattern, &filters, &bound);
    let mut dims = table.dims;
    let child_dim = dims.remove(0);
    Ok(FamilyCounts {
        child_dim,
        parent_dims: dims,
        counts: table.counts,
    })
}

/// Conditional frequencies with additive smoothing:
/// `(n(u, pa) + a) / (n(pa) + a * |range|)`.
pub fn estimate_parameters<S: AtomSource + ?Sized>(
    structure: &BnStructure,
    db: &S,
    pseudocount: f64,
) -> Result<TemplateBn> {
    estimate_parameters_timed(structure, db, pseudocount).map(|(bn, _)| bn)
}

/// [`estimate_parameters`] plus the seconds spent on each node.
pub fn estimate_parameters_timed<S: AtomSource + ?Sized>(
    structure: &BnStructure,
    db: &S,
    pseudocount: f64,
) -> Result<(TemplateBn, Vec<f64>)> {
    check_pseudocount(pseudocount)?;
    structure.check_schema(db.schema())?;
    let timed = (0..structure.len())
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let cpt = estimate_node(structure, db, i, pseudocount)?;
            Ok((cpt, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (cpts, secs): (Vec<Cpt>, Vec<f64>) = timed.into_iter().unzip();
    Ok((TemplateBn::new(structure.clone(), cpts)?, secs))
}

fn check_pseudocount(a: f64) -> Result<()> {
    if !a.is_finite() || a < 0.0 {
        return Err(Error::InvalidArgument(format!("pseudocount must be >= 0, got {a}")));
    }
    Ok(())
}

/// The smoothed CPT of node `i` alone.
pub fn estimate_node<S: AtomSource + ?Sized>(
    structure: &BnStructure,
    db: &S,
    i: usize,
    pseudocount: f64,
) -> Result<Cpt> {
    check_pseudocount(pseudocount)?;
    let parents: Vec<&Prv> = structure.parents(i).iter().map(|&p| structure.node(p)).collect();
    let fc = family_counts(db, structure.node(i), &parents)?;
    let k = fc.child_dim as f64;
    let mut rows = Vec::with_capacity(fc.rows());
    for r in 0..fc.rows() {
        let denom = fc.row_total(r) as f64 + pseudocount * k;
        if denom == 0.0 {
            return Err(Error::UndefinedRow {
                node: structure.node(i).to_string(),
                row: describe_row(structure, i, r),
            });
        }
        let mut row: Vec<f64> = (0..fc.child_dim)
            .map(|u| (fc.get(u, r) as f64 + pseudocount) / denom)
            .collect();
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
        rows.push(row);
    }
    Cpt::new(fc.parent_dims, fc.child_dim, rows)
}

/// `"g(B)=W, F(A,B)=T"` for row `r` of node `i`.
pub(crate) fn describe_row(structure: &BnStructure, i: usize, mut r: usize) -> String {
    let ps = structure.parents(i);
    let mut vals = vec![0usize; ps.len()];
    for (k, &p) in ps.iter().enumerate().rev() {
        let d = structure.range_len(p);
        vals[k] = r % d;
        r /= d;
    }
    if ps.is_empty() {
        return "no parents".into();
    }
    ps.iter()
        .zip(vals)
        .map(|(&p, v)| format!("{}={}", structure.node(p), structure.decl(p).range[v]))
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::store::{DatabaseBuilder, Schema, FunctorDecl, Population};

    fn schema(n: usize) -> Arc<Schema> {
        Arc::new(
            Schema::new(
                vec![Population::new("person", (0..n).map(|i| format!("p{i}"))).unwrap()],
                vec![
                    FunctorDecl::attribute("g", &["person"], &["W", "M"]),
                    FunctorDecl::attribute("CD", &["person"], &["T", "F"]),
                    FunctorDecl::relationship("F", &["person", "person"]),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn all_coffee_drinkers_degenerate_frequency() {
        let s = schema(3);
        let mut b = DatabaseBuilder::new(s.clone()).unwrap();
        for (i, g) in ["W", "M", "M"].iter().enumerate() {
            b.set("g", &[&format!("p{i}")], g).unwrap();
            b.set("CD", &[&format!("p{i}")], "T").unwrap();
        }
        let db = b.finish().unwrap();
        let st = BnStructure::from_text(&s, &["g(A)", "CD(A)"], &[("g(A)", "CD(A)")]).unwrap();
        let bn = estimate_parameters(&st, &db, 0.0).unwrap();
        assert_eq!(bn.cpt(1).row(0), &[1.0, 0.0]);
        assert_eq!(bn.cpt(1).row(1), &[1.0, 0.0]);
        assert_eq!(bn.cpt(0).row(0), &[1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn undefined_row_is_named() {
        let s = schema(2);
        let mut b = DatabaseBuilder::new(s.clone()).unwrap();
        for i in 0..2 {
            b.set("g", &[&format!("p{i}")], "W").unwrap();
            b.set("CD", &[&format!("p{i}")], "T").unwrap();
        }
        let db = b.finish().unwrap();
        let st = BnStructure::from_text(&s, &["g(A)", "CD(A)"], &[("g(A)", "CD(A)")]).unwrap();
        match estimate_parameters(&st, &db, 0.0) {
            Err(Error::UndefinedRow { node, row }) => {
                assert_eq!(node, "CD(A)");
                assert_eq!(row, "g(A)=M");
            }
            other => panic!("{other:?}"),
        }
        let bn = estimate_parameters(&st, &db, 1.0).unwrap();
        assert_eq!(bn.cpt(1).row(1), &[0.5, 0.5]);
        assert_eq!(bn.cpt(1).row(0), &[0.75, 0.25]);
    }

    #[test]
    fn relational_family_counts_include_false_relationships() {
        let s = schema(2);
        let mut b = DatabaseBuilder::new(s.clone()).unwrap();
        b.set("g", &["p0"], "W").unwrap();
        b.set("g", &["p1"], "M").unwrap();
        b.set("CD", &["p0"], "T").unwrap();
        b.set("CD", &["p1"], "T").unwrap();
        b.set("F", &["p0", "p1"], "T").unwrap();
        let db = b.finish().unwrap();
        let child = Prv::parse("g(A)").unwrap();
        let pa = [Prv::parse("g(B)").unwrap(), Prv::parse("F(A,B)").unwrap()];
        let fc = family_counts(&db, &child, &[&pa[0], &pa[1]]).unwrap();
        assert_eq!(fc.total(), 4);
        // g(A)=W, g(B)=M, F=T: only (p0, p1).
        assert_eq!(fc.get(0, 2), 1);
        // g(A)=W, g(B)=W, F=F: (p0, p0).
        assert_eq!(fc.get(0, 1), 1);
    }
}
