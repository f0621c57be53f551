use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{FunctorDecl, Schema};
use crate::template::Prv;

/// The graph of a template Bayesian network: PRV nodes and parent to child
/// edges, with the declarations of the functors they use.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStructure {
    functors: Vec<FunctorDecl>,
    nodes: Vec<Prv>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    node_functor: Vec<usize>,
    var_pops: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct StructureFile {
    functors: Vec<FunctorDecl>,
    nodes: Vec<Prv>,
    edges: Vec<[usize; 2]>,
}

impl BnStructure {
    /// Validates and builds a structure. Edges are `(parent, child)` node
    /// indices. A variable name must denote the same population everywhere
    /// in the template.
    pub fn new(functors: Vec<FunctorDecl>, nodes: Vec<Prv>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut fidx = HashMap::new();
        for (i, d) in functors.iter().enumerate() {
            d.validate()?;
            if fidx.insert(d.name.clone(), i).is_some() {
                return Err(Error::Model(format!("functor `{}` declared twice", d.name)));
            }
        }
        let mut var_pops: BTreeMap<String, String> = BTreeMap::new();
        let mut node_functor = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::Model(format!("node {n} listed twice")));
            }
            let &f = fidx
                .get(&n.functor)
                .ok_or_else(|| Error::UnknownFunctor(n.functor.clone()))?;
            let decl = &functors[f];
            if decl.args.len() != n.args.len() {
                return Err(Error::Type(format!("{n}: `{}` takes {} arguments", decl.name, decl.args.len())));
            }
            for (a, pop) in n.args.iter().zip(&decl.args) {
                if let Some(v) = a.as_var() {
                    match var_pops.get(v) {
                        Some(p) if p != pop => {
                            return Err(Error::Type(format!(
                                "variable `{v}` used for populations `{p}` and `{pop}`"
                            )))
                        }
                        _ => {
                            var_pops.insert(v.to_string(), pop.clone());
                        }
                    }
                }
            }
            node_functor.push(f);
        }
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in edges {
            if p >= n || c >= n {
                return Err(Error::Model(format!("edge ({p}, {c}) refers to a missing node")));
            }
            if p == c {
                return Err(Error::Model(format!("self edge on {}", nodes[p])));
            }
            if parents[c].contains(&p) {
                return Err(Error::Model(format!("edge {} -> {} listed twice", nodes[p], nodes[c])));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
        }
        let s = BnStructure {
            functors,
            nodes,
            parents,
            children,
            node_functor,
            var_pops,
        };
        if s.topological_order().is_none() {
            return Err(Error::Model("edges contain a directed cycle".into()));
        }
        Ok(s)
    }

    /// Builds a structure taking functor declarations from `schema`.
    pub fn from_schema(schema: &Schema, nodes: Vec<Prv>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut used: Vec<FunctorDecl> = Vec::new();
        for n in &nodes {
            if !used.iter().any(|d| d.name == n.functor) {
                used.push(schema.functor(schema.functor_id(&n.functor)?).decl.clone());
            }
        }
        Self::new(used, nodes, edges)
    }

    /// Parses nodes in text form, e.g. `["g(A)", "g(B)"]`, with edges given
    /// as `(parent, child)` text pairs.
    pub fn from_text(schema: &Schema, nodes: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let prvs = nodes.iter().map(|t| Prv::parse(t)).collect::<Result<Vec<_>>>()?;
        let find = |t: &str| -> Result<usize> {
            let p = Prv::parse(t)?;
            prvs.iter()
                .position(|q| *q == p)
                .ok_or_else(|| Error::UnknownNode(t.to_string()))
        };
        let e = edges
            .iter()
            .map(|(p, c)| Ok((find(p)?, find(c)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_schema(schema, prvs, &e)
    }

    pub fn functors(&self) -> &[FunctorDecl] {
        &self.functors
    }

    pub fn nodes(&self) -> &[Prv] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: usize) -> &Prv {
        &self.nodes[i]
    }

    pub fn node_id(&self, prv: &Prv) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == prv)
            .ok_or_else(|| Error::UnknownNode(prv.to_string()))
    }

    /// Parents of node `i`, ascending.
    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    /// Children of node `i`, ascending.
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// All edges as `(parent, child)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            out.extend(ps.iter().map(|&p| (p, c)));
        }
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn decl(&self, i: usize) -> &FunctorDecl {
        &self.functors[self.node_functor[i]]
    }

    pub fn range_len(&self, i: usize) -> usize {
        self.decl(i).range.len()
    }

    pub fn is_relationship(&self, i: usize) -> bool {
        self.decl(i).is_relationship()
    }

    /// Population of a first-order variable.
    pub fn var_population(&self, var: &str) -> Option<&str> {
        self.var_pops.get(var).map(String::as_str)
    }

    pub fn var_populations(&self) -> &BTreeMap<String, String> {
        &self.var_pops
    }

    /// Variables of node `i` as a set.
    pub fn var_set(&self, i: usize) -> BTreeSet<&str> {
        self.nodes[i].vars().into_iter().collect()
    }

    /// Kahn order, lowest index first among ready nodes. `None` on a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Checks that every functor used agrees with its declaration in
    /// `schema`.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        for d in &self.functors {
            let s = &schema.functor(schema.functor_id(&d.name)?).decl;
            if s != d {
                return Err(Error::Model(format!(
                    "functor `{}` is declared differently in the model and the schema",
                    d.name
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = StructureFile {
            functors: self.functors.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges().into_iter().map(|(p, c)| [p, c]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("structure serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<structure>".into(),
            source: e,
        })?;
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(file.functors, file.nodes, &edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| relabel(e, path))
    }
}

pub(crate) fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Json { source, .. } => Error::Json {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

/// A conditional probability table. Rows enumerate parent value vectors in
/// row-major order (last parent fastest), parents in ascending node order;
/// each row lists child probabilities in declared range order.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    parent_dims: Vec<usize>,
    child_dim: usize,
    table: Vec<f64>,
}

impl Cpt {
    pub fn new(parent_dims: Vec<usize>, child_dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let want: usize = parent_dims.iter().product();
        if rows.len() != want {
            return Err(Error::Model(format!("expected {want} rows, found {}", rows.len())));
        }
        let mut table = Vec::with_capacity(want * child_dim);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != child_dim {
                return Err(Error::Model(format!("row {r} has {} entries, expected {child_dim}", row.len())));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Model(format!("row {r} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Model(format!("row {r} sums to {s}")));
            }
            table.extend_from_slice(row);
        }
        Ok(Cpt {
            parent_dims,
            child_dim,
            table,
        })
    }

    /// Every row uniform.
    pub fn uniform(parent_dims: Vec<usize>, child_dim: usize) -> Self {
        let rows: usize = parent_dims.iter().product();
        Cpt {
            parent_dims,
            child_dim,
            table: vec![1.0 / child_dim as f64; rows * child_dim],
        }
    }

    pub fn parent_dims(&self) -> &[usize] {
        &self.parent_dims
    }

    pub fn child_dim(&self) -> usize {
        self.child_dim
    }

    pub fn row_count(&self) -> usize {
        self.table.len() / self.child_dim
    }

    pub fn row_index(&self, parent_values: &[crate::store::Value]) -> usize {
        parent_values
            .iter()
            .zip(&self.parent_dims)
            .fold(0, |acc, (&v, &d)| acc * d + v as usize)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.table[r * self.child_dim..(r + 1) * self.child_dim]
    }

    pub fn prob(&self, row: usize, u: usize) -> f64 {
        self.table[row * self.child_dim + u]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.row_count()).map(|r| self.row(r).to_vec()).collect()
    }
}

/// A template Bayesian network: structure plus one CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBn {
    structure: BnStructure,
    cpts: Vec<Cpt>,
}

#[derive(Serialize, Deserialize)]
struct CptFile {
    node: usize,
    parents: Vec<usize>,
    table: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    functors: Vec<FunctorDecl>,
    nodes: Vec<Prv>,
    edges: Vec<[usize; 2]>,
    cpts: Vec<CptFile>,
}

impl TemplateBn {
    pub fn new(structure: BnStructure, cpts: Vec<Cpt>) -> Result<Self> {
        if cpts.len() != structure.len() {
            return Err(Error::Model(format!(
                "{} nodes but {} CPTs",
                structure.len(),
                cpts.len()
            )));
        }
        for (i, cpt) in cpts.iter().enumerate() {
            let dims: Vec<usize> = structure.parents(i).iter().map(|&p| structure.range_len(p)).collect();
            if cpt.parent_dims != dims || cpt.child_dim != structure.range_len(i) {
                return Err(Error::Model(format!(
                    "CPT of {} does not match its family",
                    structure.node(i)
                )));
            }
        }
        Ok(TemplateBn { structure, cpts })
    }

    /// Builds CPTs from nested rows given per node, in node order.
    pub fn with_rows(structure: BnStructure, rows: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let cpts = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let dims = structure.parents(i).iter().map(|&p| structure.range_len(p)).collect();
                Cpt::new(dims, structure.range_len(i), r)
                    .map_err(|e| Error::Model(format!("{}: {e}", structure.node(i))))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(structure, cpts)
    }

    /// Uniform CPTs everywhere.
    pub fn uniform(structure: BnStructure) -> Self {
        let cpts = (0..structure.len())
            .map(|i| {
                let dims = structure.parents(i).iter().map(|&p| structure.range_len(p)).collect();
                Cpt::uniform(dims, structure.range_len(i))
            })
            .collect();
        TemplateBn { structure, cpts }
    }

    pub fn structure(&self) -> &BnStructure {
        &self.structure
    }

    pub fn cpt(&self, i: usize) -> &Cpt {
        &self.cpts[i]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    /// Replaces one CPT; dimensions must match.
    pub fn set_cpt(&mut self, i: usize, cpt: Cpt) -> Result<()> {
        if cpt.parent_dims != self.cpts[i].parent_dims || cpt.child_dim != self.cpts[i].child_dim {
            return Err(Error::Model(format!("CPT of {} does not match its family", self.structure.node(i))));
        }
        self.cpts[i] = cpt;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let s = &self.structure;
        let file = ModelFile {
            functors: s.functors.clone(),
            nodes: s.nodes.clone(),
            edges: s.edges().into_iter().map(|(p, c)| [p, c]).collect(),
            cpts: self
                .cpts
                .iter()
                .enumerate()
                .map(|(i, c)| CptFile {
                    node: i,
                    parents: s.parents(i).to_vec(),
                    table: c.rows(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<model>".into(),
            source: e,
        })?;
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        let structure = BnStructure::new(file.functors, file.nodes, &edges)?;
        let mut rows: Vec<Option<Vec<Vec<f64>>>> = vec![None; structure.len()];
        for c in file.cpts {
            if c.node >= structure.len() || rows[c.node].is_some() {
                return Err(Error::Model(format!("bad or repeated CPT for node {}", c.node)));
            }
            if c.parents != structure.parents(c.node) {
                return Err(Error::Model(format!(
                    "CPT parents of {} disagree with the edges",
                    structure.node(c.node)
                )));
            }
            rows[c.node] = Some(c.table);
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::Model(format!("no CPT for {}", structure.node(i)))))
            .collect::<Result<Vec<_>>>()?;
        Self::with_rows(structure, rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| relabel(e, path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
