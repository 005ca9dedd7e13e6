use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::schreier::{member, FiniteSet};
use crate::space::SpaceSpec;
use crate::vector::BlockVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Leaf {
    pub index: u64,
    pub sign: i8,
}

/// Tree-analysis of a norming functional: leaves are ±e_k*, an internal node with
/// weight index n stands for θ_n · (sum of its children).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormingTree {
    Leaf { leaf: Leaf },
    Node { weight_index: u32, children: Vec<NormingTree> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedLeaf {
    pub index: u64,
    pub sign: i8,
    /// product of ancestor weight indices' θ values, as the list of indices
    pub path_weights: Vec<u32>,
    pub ord: u32,
}

impl NormingTree {
    pub fn leaf(index: u64, sign: i8) -> Self {
        NormingTree::Leaf {
            leaf: Leaf { index, sign },
        }
    }

    pub fn node(weight_index: u32, children: Vec<NormingTree>) -> Self {
        NormingTree::Node {
            weight_index,
            children,
        }
    }

    pub fn support(&self) -> Vec<u64> {
        let mut v = Vec::new();
        self.collect_support(&mut v);
        v.sort_unstable();
        v
    }

    fn collect_support(&self, out: &mut Vec<u64>) {
        match self {
            NormingTree::Leaf { leaf } => out.push(leaf.index),
            NormingTree::Node { children, .. } => children.iter().for_each(|c| c.collect_support(out)),
        }
    }

    pub fn minsupp(&self) -> Option<u64> {
        match self {
            NormingTree::Leaf { leaf } => Some(leaf.index),
            NormingTree::Node { children, .. } => children.iter().filter_map(|c| c.minsupp()).min(),
        }
    }

    pub fn maxsupp(&self) -> Option<u64> {
        match self {
            NormingTree::Leaf { leaf } => Some(leaf.index),
            NormingTree::Node { children, .. } => children.iter().filter_map(|c| c.maxsupp()).max(),
        }
    }

    /// Number of internal levels on the longest root-to-leaf path.
    pub fn height(&self) -> usize {
        match self {
            NormingTree::Leaf { .. } => 0,
            NormingTree::Node { children, .. } => 1 + children.iter().map(|c| c.height()).max().unwrap_or(0),
        }
    }

    pub fn leaves(&self) -> Vec<TaggedLeaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut Vec::new(), 0, &mut out);
        out
    }

    fn collect_leaves(&self, path: &mut Vec<u32>, ord: u32, out: &mut Vec<TaggedLeaf>) {
        match self {
            NormingTree::Leaf { leaf } => out.push(TaggedLeaf {
                index: leaf.index,
                sign: leaf.sign,
                path_weights: path.clone(),
                ord,
            }),
            NormingTree::Node {
                weight_index,
                children,
            } => {
                path.push(*weight_index);
                for c in children {
                    c.collect_leaves(path, ord + weight_index, out);
                }
                path.pop();
            }
        }
    }

    pub fn get(&self, path: &[usize]) -> Option<&NormingTree> {
        match (path.split_first(), self) {
            (None, _) => Some(self),
            (Some((&i, rest)), NormingTree::Node { children, .. }) => children.get(i)?.get(rest),
            _ => None,
        }
    }

    pub fn get_mut(&mut self, path: &[usize]) -> Option<&mut NormingTree> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => match self {
                NormingTree::Node { children, .. } => children.get_mut(i)?.get_mut(rest),
                _ => None,
            },
        }
    }

    /// ord of the node at `path` (sum of strict-ancestor weight indices).
    pub fn ord_at(&self, path: &[usize]) -> Option<u32> {
        let mut node = self;
        let mut ord = 0;
        for &i in path {
            match node {
                NormingTree::Node {
                    weight_index,
                    children,
                } => {
                    ord += weight_index;
                    node = children.get(i)?;
                }
                _ => return None,
            }
        }
        Some(ord)
    }
}

/// Product θ_{n_1}···θ_{n_r}; `None` if an index has no weight.
pub fn tag_of(weights: &[u32], spec: &SpaceSpec, prec: u32) -> Option<Enclosure> {
    let mut t = Enclosure::one();
    for &n in weights {
        t = t.mul(&spec.theta(n, prec)?);
    }
    Some(t)
}

pub fn validate_tree(f: &NormingTree, spec: &SpaceSpec) -> Vec<String> {
    let mut out = Vec::new();
    validate_rec(f, spec, &mut Vec::new(), &mut out);
    let s = f.support();
    if s.windows(2).any(|w| w[0] == w[1]) {
        out.push("repeated coordinate functional".into());
    }
    out
}

fn validate_rec(f: &NormingTree, spec: &SpaceSpec, path: &mut Vec<usize>, out: &mut Vec<String>) {
    match f {
        NormingTree::Leaf { leaf } => {
            if leaf.index == 0 {
                out.push(format!("{path:?}: leaf index 0"));
            }
            if leaf.sign != 1 && leaf.sign != -1 {
                out.push(format!("{path:?}: leaf sign must be ±1"));
            }
        }
        NormingTree::Node {
            weight_index,
            children,
        } => {
            let n = *weight_index;
            if children.is_empty() {
                out.push(format!("{path:?}: node without children"));
                return;
            }
            if spec.theta(n, 16).is_none() {
                out.push(format!("{path:?}: no weight θ_{n} in this space"));
            }
            let supports: Vec<Vec<u64>> = children.iter().map(|c| c.support()).collect();
            if !spec.modified {
                for (i, w) in supports.windows(2).enumerate() {
                    if let (Some(a), Some(b)) = (w[0].last(), w[1].first()) {
                        if a >= b {
                            out.push(format!("{path:?}: children {i} and {} not successive", i + 1));
                        }
                    }
                }
            }
            let mut all: Vec<u64> = supports.iter().flatten().copied().collect();
            let total = all.len();
            all.sort_unstable();
            all.dedup();
            if all.len() != total {
                out.push(format!("{path:?}: children supports overlap"));
            }
            let minima = FiniteSet::from_unsorted(supports.iter().filter_map(|s| s.first().copied()).collect());
            let fam = spec.family(n);
            if !member(&minima, &fam) {
                out.push(format!("{path:?}: minima {:?} not in {:?}", minima.elems(), fam));
            }
            for (i, c) in children.iter().enumerate() {
                path.push(i);
                validate_rec(c, spec, path, out);
                path.pop();
            }
        }
    }
}

/// f(x) = Σ over leaves of tag · sign · x(index).
pub fn evaluate(f: &NormingTree, x: &BlockVector, spec: &SpaceSpec, prec: u32) -> Result<Enclosure> {
    let v = validate_tree(f, spec);
    if !v.is_empty() {
        return Err(Error::InvalidTree(v.join("; ")));
    }
    Ok(evaluate_unchecked(f, x, spec, prec))
}

pub fn evaluate_unchecked(f: &NormingTree, x: &BlockVector, spec: &SpaceSpec, prec: u32) -> Enclosure {
    match f {
        NormingTree::Leaf { leaf } => {
            let c = x.get(leaf.index);
            Enclosure::Exact(if leaf.sign < 0 { -c } else { c })
        }
        NormingTree::Node {
            weight_index,
            children,
        } => {
            let mut s = Enclosure::zero();
            for c in children {
                s = s.add(&evaluate_unchecked(c, x, spec, prec));
            }
            if s.as_exact().is_some_and(|v| v.is_zero()) {
                return s;
            }
            let th = spec
                .theta(*weight_index, prec)
                .expect("weight index checked by validate_tree");
            th.mul(&s)
        }
    }
}
