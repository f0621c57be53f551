use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PopId = usize;
pub type FunctorId = usize;
pub type ConstId = u32;
/// Index of a value in a functor's declared range.
pub type Value = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctorKind {
    Attribute,
    Relationship,
}

/// Declaration of a functor: typed arguments and a finite value range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctorDecl {
    pub name: String,
    pub args: Vec<String>,
    pub range: Vec<String>,
    pub kind: FunctorKind,
}

impl FunctorDecl {
    pub fn attribute(name: &str, args: &[&str], range: &[&str]) -> Self {
        FunctorDecl {
            name: name.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
            range: range.iter().map(|s| s.to_string()).collect(),
            kind: FunctorKind::Attribute,
        }
    }

    pub fn relationship(name: &str, args: &[&str]) -> Self {
        FunctorDecl {
            name: name.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
            range: vec!["T".to_string(), "F".to_string()],
            kind: FunctorKind::Relationship,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_relationship(&self) -> bool {
        self.kind == FunctorKind::Relationship
    }

    pub fn value_index(&self, value: &str) -> Result<Value> {
        self.range
            .iter()
            .position(|v| v == value)
            .map(|i| i as Value)
            .ok_or_else(|| Error::UnknownValue {
                functor: self.name.clone(),
                value: value.to_string(),
            })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.range.len() < 2 {
            return Err(Error::Schema(format!(
                "functor `{}` needs at least two values",
                self.name
            )));
        }
        let distinct: HashSet<&String> = self.range.iter().collect();
        if distinct.len() != self.range.len() {
            return Err(Error::Schema(format!(
                "functor `{}` has duplicate range values",
                self.name
            )));
        }
        if self.is_relationship() {
            let mut r: Vec<&str> = self.range.iter().map(String::as_str).collect();
            r.sort_unstable();
            if r != ["F", "T"] {
                return Err(Error::Schema(format!(
                    "relationship `{}` must have range {{T, F}}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// A named finite set of entity constants, interned in lexicographic order.
#[derive(Debug, Clone)]
pub struct Population {
    name: String,
    constants: Vec<String>,
    index: HashMap<String, ConstId>,
}

impl Population {
    pub fn new(name: &str, constants: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let mut constants: Vec<String> = constants.into_iter().map(Into::into).collect();
        constants.sort();
        let before = constants.len();
        constants.dedup();
        if constants.len() != before {
            return Err(Error::Schema(format!(
                "population `{name}` lists a constant twice"
            )));
        }
        let index = constants
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as ConstId))
            .collect();
        Ok(Population {
            name: name.to_string(),
            constants,
            index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constants.is_empty()
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn constant(&self, id: ConstId) -> &str {
        &self.constants[id as usize]
    }

    pub fn id(&self, constant: &str) -> Result<ConstId> {
        self.index
            .get(constant)
            .copied()
            .ok_or_else(|| Error::UnknownConstant {
                population: self.name.clone(),
                constant: constant.to_string(),
            })
    }
}

/// A functor declaration with its argument populations resolved.
#[derive(Debug, Clone)]
pub struct FunctorInfo {
    pub decl: FunctorDecl,
    pub arg_pops: Vec<PopId>,
    true_value: Option<Value>,
    false_value: Option<Value>,
}

impl FunctorInfo {
    pub fn name(&self) -> &str {
        &self.decl.name
    }

    pub fn range_len(&self) -> usize {
        self.decl.range.len()
    }

    pub fn is_relationship(&self) -> bool {
        self.decl.is_relationship()
    }

    /// Range index of `T`; relationships only.
    pub fn true_value(&self) -> Value {
        self.true_value.expect("true_value on attribute functor")
    }

    /// Range index of `F`; relationships only.
    pub fn false_value(&self) -> Value {
        self.false_value.expect("false_value on attribute functor")
    }
}

#[derive(Debug, Clone)]
pub struct Schema {
    populations: Vec<Population>,
    functors: Vec<FunctorInfo>,
    pop_index: HashMap<String, PopId>,
    functor_index: HashMap<String, FunctorId>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    populations: BTreeMap<String, Vec<String>>,
    functors: Vec<FunctorDecl>,
}

impl Schema {
    pub fn new(populations: Vec<Population>, functors: Vec<FunctorDecl>) -> Result<Self> {
        let mut pop_index = HashMap::new();
        for (i, p) in populations.iter().enumerate() {
            if pop_index.insert(p.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate population `{}`", p.name)));
            }
        }
        let mut functor_index = HashMap::new();
        let mut infos = Vec::with_capacity(functors.len());
        for (i, decl) in functors.into_iter().enumerate() {
            decl.validate()?;
            if functor_index.insert(decl.name.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate functor `{}`", decl.name)));
            }
            let arg_pops = decl
                .args
                .iter()
                .map(|a| {
                    pop_index.get(a).copied().ok_or_else(|| {
                        Error::Schema(format!(
                            "functor `{}` references undeclared population `{a}`",
                            decl.name
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let (true_value, false_value) = if decl.is_relationship() {
                (Some(decl.value_index("T")?), Some(decl.value_index("F")?))
            } else {
                (None, None)
            };
            infos.push(FunctorInfo {
                decl,
                arg_pops,
                true_value,
                false_value,
            });
        }
        Ok(Schema {
            populations,
            functors: infos,
            pop_index,
            functor_index,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<schema>".into(),
            source: e,
        })?;
        Self::from_file_repr(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: SchemaFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_file_repr(file)
    }

    fn from_file_repr(file: SchemaFile) -> Result<Self> {
        let pops = file
            .populations
            .into_iter()
            .map(|(name, consts)| Population::new(&name, consts))
            .collect::<Result<Vec<_>>>()?;
        Schema::new(pops, file.functors)
    }

    pub fn to_json(&self) -> String {
        let file = SchemaFile {
            populations: self
                .populations
                .iter()
                .map(|p| (p.name.clone(), p.constants.clone()))
                .collect(),
            functors: self.functors.iter().map(|f| f.decl.clone()).collect(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn populations(&self) -> &[Population] {
        &self.populations
    }

    pub fn population(&self, id: PopId) -> &Population {
        &self.populations[id]
    }

    pub fn population_id(&self, name: &str) -> Result<PopId> {
        self.pop_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownPopulation(name.to_string()))
    }

    pub fn functors(&self) -> &[FunctorInfo] {
        &self.functors
    }

    pub fn functor(&self, id: FunctorId) -> &FunctorInfo {
        &self.functors[id]
    }

    pub fn functor_id(&self, name: &str) -> Result<FunctorId> {
        self.functor_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownFunctor(name.to_string()))
    }

    /// Number of ground atoms of a functor, i.e. the size of its grounding space.
    pub fn grounding_space(&self, f: FunctorId) -> u64 {
        self.functors[f]
            .arg_pops
            .iter()
            .map(|&p| self.populations[p].len() as u64)
            .product()
    }

    /// Same functors, different populations. Functor ids are preserved.
    pub fn with_populations(&self, populations: Vec<Population>) -> Result<Schema> {
        Schema::new(
            populations,
            self.functors.iter().map(|f| f.decl.clone()).collect(),
        )
    }

    pub fn display_atom(&self, atom: &GroundAtom) -> String {
        let info = &self.functors[atom.functor];
        let args: Vec<&str> = atom
            .args
            .iter()
            .zip(&info.arg_pops)
            .map(|(&c, &p)| self.populations[p].constant(c))
            .collect();
        format!("{}({})", info.decl.name, args.join(","))
    }

    /// Parses `functor(c1,...,ck)` with every argument a constant.
    pub fn parse_atom(&self, text: &str) -> Result<GroundAtom> {
        let (name, args) = split_call(text)?;
        let f = self.functor_id(name)?;
        let info = &self.functors[f];
        if args.len() != info.arg_pops.len() {
            return Err(Error::Type(format!(
                "`{name}` takes {} arguments, got {}",
                info.arg_pops.len(),
                args.len()
            )));
        }
        let args = args
            .iter()
            .zip(&info.arg_pops)
            .map(|(a, &p)| self.populations[p].id(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundAtom { functor: f, args })
    }
}

/// Splits `name(a, b, c)` into `("name", ["a", "b", "c"])`.
pub(crate) fn split_call(text: &str) -> Result<(&str, Vec<&str>)> {
    let text = text.trim();
    let open = text
        .find('(')
        .ok_or_else(|| Error::Parse(format!("expected `name(args)`, got `{text}`")))?;
    if !text.ends_with(')') {
        return Err(Error::Parse(format!("missing `)` in `{text}`")));
    }
    let name = text[..open].trim();
    if name.is_empty() {
        return Err(Error::Parse(format!("missing functor name in `{text}`")));
    }
    let inner = text[open + 1..text.len() - 1].trim();
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    if args.iter().any(|a| a.is_empty()) {
        return Err(Error::Parse(format!("empty argument in `{text}`")));
    }
    Ok((name, args))
}

/// A fully ground atom: functor plus one constant per argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub functor: FunctorId,
    pub args: Vec<ConstId>,
}

impl GroundAtom {
    pub fn new(functor: FunctorId, args: Vec<ConstId>) -> Self {
        GroundAtom { functor, args }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}{:?}", self.functor, self.args)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn friends() -> Schema {
        Schema::from_json_str(
            r#"{"populations": {"person": ["bob", "anna"]},
                "functors": [
                  {"name": "gender", "args": ["person"], "range": ["W", "M"], "kind": "attribute"},
                  {"name": "Friend", "args": ["person", "person"], "range": ["T", "F"], "kind": "relationship"}
                ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn constants_are_interned_lexicographically() {
        let s = friends();
        let p = s.population(s.population_id("person").unwrap());
        assert_eq!(p.constants(), ["anna", "bob"]);
        assert_eq!(p.id("bob").unwrap(), 1);
    }

    #[test]
    fn relationship_range_must_be_boolean() {
        let bad = FunctorDecl {
            name: "R".into(),
            args: vec![],
            range: vec!["T".into(), "X".into()],
            kind: FunctorKind::Relationship,
        };
        assert!(Schema::new(vec![], vec![bad]).is_err());
    }

    #[test]
    fn undeclared_population_rejected() {
        let err = Schema::new(vec![], vec![FunctorDecl::attribute("g", &["person"], &["a", "b"])])
            .unwrap_err();
        assert!(err.to_string().contains("undeclared population"));
    }

    #[test]
    fn single_value_range_rejected() {
        assert!(Schema::new(vec![], vec![FunctorDecl::attribute("g", &[], &["a"])]).is_err());
    }

    #[test]
    fn atoms_parse_and_display() {
        let s = friends();
        let a = s.parse_atom("Friend(anna, bob)").unwrap();
        assert_eq!(a.args, vec![0, 1]);
        assert_eq!(s.display_atom(&a), "Friend(anna,bob)");
        assert!(s.parse_atom("Friend(anna)").is_err());
        assert!(s.parse_atom("gender(zed)").is_err());
    }

    #[test]
    fn schema_json_round_trip() {
        let s = friends();
        let again = Schema::from_json_str(&s.to_json()).unwrap();
        assert_eq!(again.to_json(), s.to_json());
    }
}
