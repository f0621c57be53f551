use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::store::count::{self, Arg, Filter, Pattern, Slot};
use crate::store::database::AtomSource;
use crate::store::schema::{ConstId, PopId, Schema, Value};
use crate::template::Prv;

/// A substitution of constants for first-order variables. Acts as an
/// equality constraint when attached to a conjunction.
pub type Grounding = BTreeMap<String, String>;

/// A conjunction of `PRV = value` literals, optionally restricted by an
/// equality constraint.
#[derive(Debug, Clone, Default)]
pub struct Conjunction {
    pub literals: Vec<(Prv, String)>,
    pub constraint: Option<Grounding>,
}

impl Conjunction {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `prv = value`; `prv` uses the text form, e.g. `"Friend(sam,B)"`.
    pub fn with(mut self, prv: &str, value: &str) -> Result<Self> {
        self.literals.push((Prv::parse(prv)?, value.to_string()));
        Ok(self)
    }

    pub fn constrain(mut self, var: &str, constant: &str) -> Self {
        self.constraint
            .get_or_insert_with(Grounding::new)
            .insert(var.to_string(), constant.to_string());
        self
    }
}

/// PRVs compiled against a schema: variables sorted by name.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub pattern: Pattern,
    pub var_names: Vec<String>,
}

impl Compiled {
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|v| v == name)
    }

    /// Binding vector for an equality constraint. Variables of the
    /// constraint that do not occur in the pattern are an error.
    pub fn bind(&self, schema: &Schema, gamma: &Grounding) -> Result<Vec<Option<ConstId>>> {
        let mut bound = vec![None; self.var_names.len()];
        for (var, c) in gamma {
            let v = self
                .var_index(var)
                .ok_or_else(|| Error::UnknownVariable(var.clone()))?;
            bound[v] = Some(schema.population(self.pattern.var_pops[v]).id(c)?);
        }
        Ok(bound)
    }
}

pub(crate) fn compile<'p>(schema: &Schema, prvs: impl IntoIterator<Item = &'p Prv>) -> Result<Compiled> {
    let prvs: Vec<&Prv> = prvs.into_iter().collect();
    let mut var_pops: BTreeMap<String, PopId> = BTreeMap::new();
    for prv in &prvs {
        let f = schema.functor_id(&prv.functor)?;
        let info = schema.functor(f);
        if prv.args.len() != info.arg_pops.len() {
            return Err(Error::Type(format!(
                "{prv}: `{}` takes {} arguments",
                prv.functor,
                info.arg_pops.len()
            )));
        }
        for (a, &p) in prv.args.iter().zip(&info.arg_pops) {
            if let Some(v) = a.as_var() {
                match var_pops.get(v) {
                    Some(&q) if q != p => {
                        return Err(Error::Type(format!(
                            "variable `{v}` used for populations `{}` and `{}`",
                            schema.population(q).name(),
                            schema.population(p).name()
                        )))
                    }
                    _ => {
                        var_pops.insert(v.to_string(), p);
                    }
                }
            }
        }
    }
    let var_names: Vec<String> = var_pops.keys().cloned().collect();
    let slots = prvs
        .iter()
        .map(|prv| {
            let f = schema.functor_id(&prv.functor)?;
            let info = schema.functor(f);
            let args = prv
                .args
                .iter()
                .zip(&info.arg_pops)
                .map(|(a, &p)| match a.as_var() {
                    Some(v) => Ok(Arg::Var(var_names.iter().position(|n| n == v).unwrap())),
                    None => match a {
                        crate::template::Term::Const { name } => {
                            Ok(Arg::Const(schema.population(p).id(name)?))
                        }
                        crate::template::Term::Var(_) => unreachable!(),
                    },
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Slot { functor: f, args })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Compiled {
        pattern: Pattern {
            var_pops: var_pops.values().copied().collect(),
            slots,
        },
        var_names,
    })
}

struct Prepared {
    compiled: Compiled,
    values: Vec<Value>,
    bound: Vec<Option<ConstId>>,
}

fn prepare(schema: &Schema, conj: &Conjunction) -> Result<Prepared> {
    for (i, (p, v)) in conj.literals.iter().enumerate() {
        if conj.literals[..i].iter().any(|(q, w)| q == p && w != v) {
            return Err(Error::Type(format!("{p} appears with conflicting values")));
        }
    }
    let compiled = compile(schema, conj.literals.iter().map(|(p, _)| p))?;
    let values = conj
        .literals
        .iter()
        .map(|(p, v)| schema.functor(schema.functor_id(&p.functor)?).decl.value_index(v))
        .collect::<Result<Vec<_>>>()?;
    let bound = match &conj.constraint {
        Some(g) => compiled.bind(schema, g)?,
        None => vec![None; compiled.var_names.len()],
    };
    Ok(Prepared {
        compiled,
        values,
        bound,
    })
}

/// Number of groundings of the free variables, consistent with the
/// constraint, under which every literal holds.
pub fn count_groundings<S: AtomSource + ?Sized>(db: &S, conj: &Conjunction) -> Result<u64> {
    let p = prepare(db.schema(), conj)?;
    let filters: Vec<Filter> = p.values.iter().map(|&v| Filter::Is(v)).collect();
    Ok(count::count_table(db, &p.compiled.pattern, &filters, &p.bound).total())
}

/// The groundings counted by [`count_groundings`], in lexicographic order of
/// constants with variables taken in name order. Each grounding binds the
/// free variables only.
pub fn enumerate_groundings<S: AtomSource + ?Sized>(db: &S, conj: &Conjunction) -> Result<Vec<Grounding>> {
    let schema = db.schema();
    let p = prepare(schema, conj)?;
    let mut out = Vec::new();
    let free: Vec<usize> = (0..p.bound.len()).filter(|&v| p.bound[v].is_none()).collect();
    count::enumerate(db, &p.compiled.pattern, &p.values, &p.bound, &mut |b| {
        out.push(
            free.iter()
                .map(|&v| {
                    let pop = schema.population(p.compiled.pattern.var_pops[v]);
                    (p.compiled.var_names[v].clone(), pop.constant(b[v]).to_string())
                })
                .collect(),
        )
    });
    Ok(out)
}
