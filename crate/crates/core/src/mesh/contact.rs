//! Node-to-node pairing of the two contact lips.

use std::collections::{BTreeMap, BTreeSet};

use super::{BoundaryTag, Mesh2D, MeshError};

/// One discrete non-penetration constraint `(u_a − u_b)·ν ≤ gap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPair {
    /// Node on the CONTACT_A lip.
    pub a: usize,
    /// Matched node on the CONTACT_B lip.
    pub b: usize,
    /// Unit normal pointing from lip A toward lip B, fixed in the reference
    /// configuration.
    pub normal: [f64; 2],
    /// Initial separation along `normal`, nonnegative.
    pub gap: f64,
}

/// The discrete admissible set: a list of pairwise disjoint contact pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pairs: Vec<ContactPair>,
}

impl ConstraintSet {
    pub fn new(pairs: Vec<ContactPair>) -> Result<Self, MeshError> {
        let mut seen = BTreeSet::new();
        for (k, p) in pairs.iter().enumerate() {
            let invalid = |detail: String| Err(MeshError::InvalidPair { pair: k, detail });
            if p.a == p.b {
                return invalid(format!("node {} is paired with itself", p.a));
            }
            if !seen.insert(p.a) || !seen.insert(p.b) {
                return invalid(format!(
                    "nodes ({}, {}) already appear in another pair",
                    p.a, p.b
                ));
            }
            let len = p.normal[0].hypot(p.normal[1]);
            if (len - 1.0).abs() > 1e-12 {
                return invalid(format!("normal {:?} is not a unit vector", p.normal));
            }
            if !(p.gap >= 0.0) {
                return Err(MeshError::NegativeGap {
                    a: p.a,
                    b: p.b,
                    gap: p.gap,
                });
            }
        }
        Ok(ConstraintSet { pairs })
    }

    pub fn empty() -> Self {
        ConstraintSet::default()
    }

    pub fn pairs(&self) -> &[ContactPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.gap).collect()
    }

    /// Replaces the geometric gap of one pair.
    pub fn set_gap(&mut self, pair: usize, gap: f64) -> Result<(), MeshError> {
        if !(gap >= 0.0) {
            let p = self.pairs[pair];
            return Err(MeshError::NegativeGap { a: p.a, b: p.b, gap });
        }
        self.pairs[pair].gap = gap;
        Ok(())
    }

    /// Replaces every gap by `gap`.
    pub fn with_uniform_gap(mut self, gap: f64) -> Result<Self, MeshError> {
        for k in 0..self.pairs.len() {
            self.set_gap(k, gap)?;
        }
        Ok(self)
    }
}

/// Pairs every CONTACT_A node with the CONTACT_B node at the same `x1`.
///
/// Nodes that lie on both lips (the slit tips) have no relative displacement
/// and are left out. The normal is vertical, oriented along the outward
/// normal of lip A; the gap is the initial separation along it.
pub fn match_contact_pairs(mesh: &Mesh2D, tol: f64) -> Result<ConstraintSet, MeshError> {
    let lip_a = mesh.nodes_tagged(BoundaryTag::ContactA);
    let lip_b = mesh.nodes_tagged(BoundaryTag::ContactB);
    let shared: BTreeSet<usize> = lip_a.intersection(&lip_b).copied().collect();
    let lip_a: Vec<usize> = lip_a.difference(&shared).copied().collect();
    let lip_b: Vec<usize> = lip_b.difference(&shared).copied().collect();

    // Summed outward normals of lip A at each of its nodes.
    let mut normal_sum: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
    for e in mesh.edges_tagged(BoundaryTag::ContactA) {
        if let Some(n) = mesh.outward_normal(e.nodes) {
            for v in e.nodes {
                let s = normal_sum.entry(v).or_insert([0.0, 0.0]);
                s[0] += n[0];
                s[1] += n[1];
            }
        }
    }

    let mut used_b = BTreeSet::new();
    let mut pairs = Vec::with_capacity(lip_a.len());
    for &a in &lip_a {
        let pa = mesh.node(a);
        let candidates: Vec<usize> = lip_b
            .iter()
            .copied()
            .filter(|&b| (mesh.node(b)[0] - pa[0]).abs() <= tol)
            .collect();
        let b = match candidates.as_slice() {
            [] => {
                return Err(MeshError::UnmatchedNode {
                    node: a,
                    x1: pa[0],
                    x2: pa[1],
                })
            }
            [b] => *b,
            _ => {
                return Err(MeshError::AmbiguousMatch {
                    node: a,
                    x1: pa[0],
                    x2: pa[1],
                    candidates,
                })
            }
        };
        used_b.insert(b);
        let pb = mesh.node(b);
        let ny = normal_sum.get(&a).map_or(0.0, |n| n[1]);
        let normal = if ny < 0.0 {
            [0.0, -1.0]
        } else if ny > 0.0 {
            [0.0, 1.0]
        } else if pa[1] != pb[1] {
            [0.0, (pb[1] - pa[1]).signum()]
        } else {
            return Err(MeshError::InvalidGeometry(format!(
                "cannot orient the contact normal at node {a}: lip A is vertical there"
            )));
        };
        let mut gap = (pb[0] - pa[0]) * normal[0] + (pb[1] - pa[1]) * normal[1];
        if gap < 0.0 && gap >= -tol {
            gap = 0.0;
        }
        if gap < 0.0 {
            return Err(MeshError::NegativeGap { a, b, gap });
        }
        pairs.push(ContactPair { a, b, normal, gap });
    }
    if let Some(&b) = lip_b.iter().find(|b| !used_b.contains(b)) {
        let pb = mesh.node(b);
        return Err(MeshError::UnmatchedNode {
            node: b,
            x1: pb[0],
            x2: pb[1],
        });
    }
    pairs.sort_by(|p, q| mesh.node(p.a)[0].total_cmp(&mesh.node(q.a)[0]));
    ConstraintSet::new(pairs)
}
