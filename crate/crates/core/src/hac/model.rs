use serde::{Deserialize, Serialize};

use crate::copula::{ArchimedeanGenerator, GeneratorFamily};
use crate::error::{Error, Result};

/// Node of a HAC tree.
#[derive(Debug, Clone, PartialEq)]
pub enum HacNode {
    Leaf(usize),
    Internal {
        generator: ArchimedeanGenerator,
        children: Vec<HacNode>,
    },
}

impl HacNode {
    pub fn internal(generator: ArchimedeanGenerator, children: Vec<HacNode>) -> Self {
        HacNode::Internal {
            generator,
            children,
        }
    }

    pub fn min_leaf(&self) -> usize {
        match self {
            HacNode::Leaf(i) => *i,
            HacNode::Internal { children, .. } => children
                .iter()
                .map(HacNode::min_leaf)
                .min()
                .unwrap_or(usize::MAX),
        }
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            HacNode::Leaf(i) => out.push(*i),
            HacNode::Internal { children, .. } => {
                children.iter().for_each(|c| c.collect_leaves(out))
            }
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut v = Vec::new();
        self.collect_leaves(&mut v);
        v
    }

    fn canonicalize(&mut self) {
        if let HacNode::Internal { children, .. } = self {
            children.iter_mut().for_each(HacNode::canonicalize);
            children.sort_by_key(HacNode::min_leaf);
        }
    }

    fn theta(&self) -> Option<f64> {
        match self {
            HacNode::Leaf(_) => None,
            HacNode::Internal { generator, .. } => Some(generator.theta),
        }
    }

    fn nested_ok(&self) -> bool {
        match self {
            HacNode::Leaf(_) => true,
            HacNode::Internal {
                generator,
                children,
            } => children
                .iter()
                .all(|c| c.theta().is_none_or(|th| generator.theta <= th) && c.nested_ok()),
        }
    }
}

/// A validated, canonically ordered HAC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HacJson", into = "HacJson")]
pub struct HacModel {
    family: GeneratorFamily,
    root: HacNode,
    dim: usize,
}

impl HacModel {
    /// Validates the tree: the root is internal, every internal node has at
    /// least two children, all generators share a family and the leaves are
    /// exactly 0..d. Nesting is not required here, see [`check_nesting`].
    pub fn new(mut root: HacNode) -> Result<Self> {
        let HacNode::Internal { generator, .. } = &root else {
            return Err(Error::param("the root of a HAC must be an internal node"));
        };
        let family = generator.family;
        validate(&root, family)?;
        let mut leaves = root.leaves();
        let dim = leaves.len();
        leaves.sort_unstable();
        for (expected, &got) in leaves.iter().enumerate() {
            if got != expected {
                return Err(Error::param(format!(
                    "leaves must be 1..{dim} each exactly once (found leaf {})",
                    got + 1
                )));
            }
        }
        root.canonicalize();
        Ok(Self { family, root, dim })
    }

    /// Exchangeable copula as a one-node tree.
    pub fn exchangeable(generator: ArchimedeanGenerator, dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("copula dimension must be at least 2"));
        }
        Self::new(HacNode::internal(
            generator,
            (0..dim).map(HacNode::Leaf).collect(),
        ))
    }

    pub fn family(&self) -> GeneratorFamily {
        self.family
    }

    pub fn root(&self) -> &HacNode {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// θ of every internal node in pre-order, root first. For a fully nested
    /// tree this is (θ₁, …, θ_{d-1}) from the root down.
    pub fn theta_vector(&self) -> Vec<f64> {
        fn walk(n: &HacNode, out: &mut Vec<f64>) {
            if let HacNode::Internal {
                generator,
                children,
            } = n
            {
                out.push(generator.theta);
                children.iter().for_each(|c| walk(c, out));
            }
        }
        let mut v = Vec::new();
        walk(&self.root, &mut v);
        v
    }

    /// Canonical text form, e.g. `((1 2)@3.31 3)@1.04`.
    pub fn structure_string(&self) -> String {
        super::parse::format_structure(self)
    }

    /// Canonical text form without parameters, e.g. `((1 2) 3)`.
    pub fn topology_string(&self) -> String {
        fn walk(n: &HacNode, out: &mut String) {
            match n {
                HacNode::Leaf(i) => out.push_str(&(i + 1).to_string()),
                HacNode::Internal { children, .. } => {
                    out.push('(');
                    for (k, c) in children.iter().enumerate() {
                        if k > 0 {
                            out.push(' ');
                        }
                        walk(c, out);
                    }
                    out.push(')');
                }
            }
        }
        let mut s = String::new();
        walk(&self.root, &mut s);
        s
    }

    pub fn check_nesting(&self) -> bool {
        self.root.nested_ok()
    }

    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim {
            return Err(Error::domain(format!(
                "expected {} coordinates, got {}",
                self.dim,
                u.len()
            )));
        }
        if let Some(bad) = u.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::domain(format!(
                "copula argument {bad} not in (0, 1]"
            )));
        }
        Ok(node_cdf(&self.root, u))
    }
}

fn validate(node: &HacNode, family: GeneratorFamily) -> Result<()> {
    match node {
        HacNode::Leaf(_) => Ok(()),
        HacNode::Internal {
            generator,
            children,
        } => {
            if generator.family != family {
                return Err(Error::param("mixed generator families are not supported"));
            }
            ArchimedeanGenerator::new(family, generator.theta)?;
            if children.len() < 2 {
                return Err(Error::param("internal nodes need at least two children"));
            }
            children.iter().try_for_each(|c| validate(c, family))
        }
    }
}

fn node_cdf(node: &HacNode, u: &[f64]) -> f64 {
    match node {
        HacNode::Leaf(i) => u[*i],
        HacNode::Internal {
            generator,
            children,
        } => {
            let values: Vec<f64> = children.iter().map(|c| node_cdf(c, u)).collect();
            let mut free = values.iter().filter(|&&v| v < 1.0);
            match (free.next(), free.next()) {
                (None, _) => 1.0,
                (Some(&only), None) => only,
                _ => {
                    let s: f64 = values
                        .iter()
                        .filter(|&&v| v < 1.0)
                        .map(|&v| generator.laplace_inverse(v))
                        .sum();
                    generator.laplace(s)
                }
            }
        }
    }
}

/// True iff θ_parent ≤ θ_child for every parent/child pair of internal nodes.
pub fn check_nesting(model: &HacModel) -> bool {
    model.check_nesting()
}

/// Recursive HAC distribution function.
pub fn hac_cdf(model: &HacModel, u: &[f64]) -> Result<f64> {
    model.cdf(u)
}

#[derive(Serialize, Deserialize)]
struct HacJson {
    family: GeneratorFamily,
    root: NodeJson,
}

#[derive(Serialize, Deserialize)]
struct NodeJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    children: Option<Vec<NodeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    leaf: Option<usize>,
}

impl From<HacModel> for HacJson {
    fn from(m: HacModel) -> Self {
        fn conv(n: &HacNode) -> NodeJson {
            match n {
                HacNode::Leaf(i) => NodeJson {
                    theta: None,
                    children: None,
                    leaf: Some(i + 1),
                },
                HacNode::Internal {
                    generator,
                    children,
                } => NodeJson {
                    theta: Some(generator.theta),
                    children: Some(children.iter().map(conv).collect()),
                    leaf: None,
                },
            }
        }
        HacJson {
            family: m.family,
            root: conv(&m.root),
        }
    }
}

impl TryFrom<HacJson> for HacModel {
    type Error = Error;

    fn try_from(j: HacJson) -> Result<Self> {
        fn conv(n: NodeJson, family: GeneratorFamily) -> Result<HacNode> {
            match (n.leaf, n.theta, n.children) {
                (Some(0), ..) => Err(Error::param("leaf indices are 1-based")),
                (Some(i), None, None) => Ok(HacNode::Leaf(i - 1)),
                (None, Some(theta), Some(children)) => Ok(HacNode::Internal {
                    generator: ArchimedeanGenerator::new(family, theta)?,
                    children: children
                        .into_iter()
                        .map(|c| conv(c, family))
                        .collect::<Result<_>>()?,
                }),
                _ => Err(Error::param(
                    "a node needs either `leaf` or both `theta` and `children`",
                )),
            }
        }
        HacModel::new(conv(j.root, j.family)?)
    }
}
