use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::split_call;

/// An argument of a parametrized random variable.
///
/// In text form an identifier starting with an uppercase letter is a
/// first-order variable and anything else is a constant. In JSON a plain
/// string is a variable and `{"const": "sam"}` is a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Term {
    Var(String),
    Const {
        #[serde(rename = "const")]
        name: String,
    },
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const {
            name: name.to_string(),
        }
    }

    fn parse(text: &str) -> Self {
        if text.starts_with(|c: char| c.is_ascii_uppercase()) {
            Term::var(text)
        } else {
            Term::constant(text)
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const { .. } => None,
        }
    }
}

/// A parametrized random variable: a functor applied to variables and
/// constants, e.g. `gender(A)` or `Friend(sam, B)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Prv {
    pub functor: String,
    pub args: Vec<Term>,
}

impl Prv {
    pub fn new(functor: &str, args: Vec<Term>) -> Self {
        Prv {
            functor: functor.to_string(),
            args,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = split_call(text)?;
        Ok(Prv::new(name, args.into_iter().map(Term::parse).collect()))
    }

    /// Distinct variables in argument order.
    pub fn vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.args {
            if let Some(v) = a.as_var() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Replaces bound variables by constants.
    pub fn substitute(&self, gamma: &BTreeMap<String, String>) -> Prv {
        Prv {
            functor: self.functor.clone(),
            args: self
                .args
                .iter()
                .map(|a| match a {
                    Term::Var(v) => match gamma.get(v) {
                        Some(c) => Term::constant(c),
                        None => a.clone(),
                    },
                    Term::Const { .. } => a.clone(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Prv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.functor)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match a {
                Term::Var(v) => f.write_str(v)?,
                Term::Const { name } => f.write_str(name)?,
            }
        }
        f.write_str(")")
    }
}

impl std::str::FromStr for Prv {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Prv::parse(s)
    }
}
