//! Dependency-network structure obtained from a template BN by giving each
//! node its Markov blanket as parents.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::FunctorDecl;
use crate::template::{BnStructure, Prv, TemplateBn};

/// A graph that can report a Markov blanket for each node.
pub trait BlanketGraph {
    fn nodes(&self) -> &[Prv];
    fn functors(&self) -> &[FunctorDecl];
    fn blanket(&self, i: usize) -> BTreeSet<usize>;
}

impl BlanketGraph for BnStructure {
    fn nodes(&self) -> &[Prv] {
        BnStructure::nodes(self)
    }

    fn functors(&self) -> &[FunctorDecl] {
        BnStructure::functors(self)
    }

    /// Parents, children and co-parents, without `i` itself.
    fn blanket(&self, i: usize) -> BTreeSet<usize> {
        let mut mb: BTreeSet<usize> = self.parents(i).iter().copied().collect();
        for &c in self.children(i) {
            mb.insert(c);
            mb.extend(self.parents(c));
        }
        mb.remove(&i);
        mb
    }
}

/// A relational dependency network structure. Edges may form cycles and
/// mutual pairs; parameters come from the source BN.
#[derive(Debug, Clone, PartialEq)]
pub struct RdnTemplate {
    functors: Vec<FunctorDecl>,
    nodes: Vec<Prv>,
    parents: Vec<Vec<usize>>,
    source_model: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RdnFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_model: Option<String>,
    functors: Vec<FunctorDecl>,
    nodes: Vec<Prv>,
    edges: Vec<[usize; 2]>,
}

impl BlanketGraph for RdnTemplate {
    fn nodes(&self) -> &[Prv] {
        &self.nodes
    }

    fn functors(&self) -> &[FunctorDecl] {
        &self.functors
    }

    fn blanket(&self, i: usize) -> BTreeSet<usize> {
        self.parents[i].iter().copied().collect()
    }
}

impl RdnTemplate {
    pub fn nodes(&self) -> &[Prv] {
        &self.nodes
    }

    pub fn functors(&self) -> &[FunctorDecl] {
        &self.functors
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    /// Parents of a node by PRV.
    pub fn parents_of(&self, prv: &Prv) -> Result<Vec<&Prv>> {
        let i = self
            .nodes
            .iter()
            .position(|n| n == prv)
            .ok_or_else(|| Error::UnknownNode(prv.to_string()))?;
        Ok(self.parents[i].iter().map(|&p| &self.nodes[p]).collect())
    }

    /// `(parent, child)` pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(c, ps)| ps.iter().map(move |&p| (p, c)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn source_model(&self) -> Option<&str> {
        self.source_model.as_deref()
    }

    pub fn set_source_model(&mut self, path: Option<String>) {
        self.source_model = path;
    }

    pub fn to_json(&self) -> String {
        let file = RdnFile {
            source_model: self.source_model.clone(),
            functors: self.functors.clone(),
            nodes: self.nodes.clone(),
            edges: self.edges().into_iter().map(|(p, c)| [p, c]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("rdn serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: RdnFile = serde_json::from_str(text).map_err(|e| Error::Json {
            path: "<rdn>".into(),
            source: e,
        })?;
        let n = file.nodes.len();
        let mut parents = vec![Vec::new(); n];
        for [p, c] in file.edges {
            if p >= n || c >= n || p == c {
                return Err(Error::Model(format!("bad edge ({p}, {c})")));
            }
            parents[c].push(p);
        }
        for ps in &mut parents {
            ps.sort_unstable();
            ps.dedup();
        }
        Ok(RdnTemplate {
            functors: file.functors,
            nodes: file.nodes,
            parents,
            source_model: file.source_model,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }
}

/// Gives every node an incoming edge from each member of its blanket.
pub fn moralize<G: BlanketGraph + ?Sized>(g: &G) -> RdnTemplate {
    let parents = (0..g.nodes().len())
        .map(|i| g.blanket(i).into_iter().collect())
        .collect();
    RdnTemplate {
        functors: g.functors().to_vec(),
        nodes: g.nodes().to_vec(),
        parents,
        source_model: None,
    }
}

pub fn moralize_to_rdn(bn: &TemplateBn) -> RdnTemplate {
    moralize(bn.structure())
}

/// Parents, children and co-parents of `node`.
pub fn markov_blanket(bn: &BnStructure, node: &Prv) -> Result<Vec<Prv>> {
    let i = bn.node_id(node)?;
    Ok(bn.blanket(i).into_iter().map(|j| bn.node(j).clone()).collect())
}
