//! Triangulated planar domains with tagged boundary parts.
//!
//! A [`Mesh2D`] carries linear triangles, the boundary edges of the domain and
//! a tag for each of them. The slit geometry used throughout the crate is a
//! rectangle cut by a horizontal interior slit whose two lips may come into
//! contact with each other: the upper lip is tagged [`BoundaryTag::ContactA`],
//! the lower lip [`BoundaryTag::ContactB`].

mod build;
mod contact;
mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use build::{build_notched_rectangle, build_rectangle, NotchedRectangle};
pub use contact::{match_contact_pairs, ConstraintSet, ContactPair};
pub use format::{load_mesh, write_mesh, LoadedMesh};

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing section {0}")]
    MissingSection(&'static str),
    #[error("mesh invariant violated: {check}: {detail}")]
    Invariant { check: String, detail: String },
    #[error("contact node {node} at ({x1}, {x2}) has no partner on the opposite lip")]
    UnmatchedNode { node: usize, x1: f64, x2: f64 },
    #[error("contact node {node} at ({x1}, {x2}) has several partners within tolerance: {candidates:?}")]
    AmbiguousMatch {
        node: usize,
        x1: f64,
        x2: f64,
        candidates: Vec<usize>,
    },
    #[error("contact pair ({a}, {b}) has negative gap {gap}")]
    NegativeGap { a: usize, b: usize, gap: f64 },
    #[error("contact pair {pair}: {detail}")]
    InvalidPair { pair: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Fixed,
    Traction,
    ContactA,
    ContactB,
    Free,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Fixed,
        BoundaryTag::Traction,
        BoundaryTag::ContactA,
        BoundaryTag::ContactB,
        BoundaryTag::Free,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::Fixed => "FIXED",
            BoundaryTag::Traction => "TRACTION",
            BoundaryTag::ContactA => "CONTACT_A",
            BoundaryTag::ContactB => "CONTACT_B",
            BoundaryTag::Free => "FREE",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundaryTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundaryTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown boundary tag '{s}'"))
    }
}

/// A boundary edge, oriented as it appears in its (counterclockwise) triangle
/// when built by this crate. Orientation is not required of loaded meshes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<u32>,
    edges: Vec<BoundaryEdge>,
}

impl Mesh2D {
    /// Builds a mesh and checks every invariant; the first failure is returned.
    pub fn new(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let regions = vec![0; triangles.len()];
        Self::with_regions(nodes, triangles, regions, edges)
    }

    pub fn with_regions(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<u32>,
        edges: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let mesh = Mesh2D::from_parts_unchecked(nodes, triangles, regions, edges);
        mesh.validate().into_result()?;
        Ok(mesh)
    }

    /// Assembles a mesh without any check. Use [`Mesh2D::validate`] to inspect it.
    pub fn from_parts_unchecked(
        nodes: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        regions: Vec<u32>,
        edges: Vec<BoundaryEdge>,
    ) -> Self {
        Mesh2D {
            nodes,
            triangles,
            regions,
            edges,
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Point {
        self.nodes[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn regions(&self) -> &[u32] {
        &self.regions
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn edges_tagged(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.edges.iter().filter(move |e| e.tag == tag)
    }

    /// Sorted, deduplicated nodes touching an edge with the given tag.
    pub fn nodes_tagged(&self, tag: BoundaryTag) -> BTreeSet<usize> {
        self.edges_tagged(tag).flat_map(|e| e.nodes).collect()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let p = self.nodes[e.nodes[0]];
        let q = self.nodes[e.nodes[1]];
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Diagonal of the axis-aligned bounding box; an upper bound on the
    /// diameter within a factor √2.
    pub fn diameter(&self) -> f64 {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if self.nodes.is_empty() {
            return 0.0;
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Edges referenced by exactly one triangle, oriented as in that triangle.
    pub fn topological_boundary(&self) -> Vec<[usize; 2]> {
        let counts = self.edge_use_counts();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if counts.get(&edge_key(a, b)) == Some(&1) {
                    out.push([a, b]);
                }
            }
        }
        out
    }

    /// Outward unit normal of a boundary edge, using the orientation of the
    /// triangle that owns it.
    pub fn outward_normal(&self, e: [usize; 2]) -> Option<[f64; 2]> {
        let owner = self.triangles.iter().find(|tri| {
            (0..3).any(|k| edge_key(tri[k], tri[(k + 1) % 3]) == edge_key(e[0], e[1]))
        })?;
        let (mut p, mut q) = (self.nodes[e[0]], self.nodes[e[1]]);
        // Traverse the edge in the owner's counterclockwise direction.
        let pos = (0..3).find(|&k| owner[k] == e[0])?;
        let ccw = owner[(pos + 1) % 3] == e[1];
        let orient = signed_area(
            self.nodes[owner[0]],
            self.nodes[owner[1]],
            self.nodes[owner[2]],
        );
        if ccw != (orient > 0.0) {
            std::mem::swap(&mut p, &mut q);
        }
        let d = [q[0] - p[0], q[1] - p[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 {
            // Degenerate edge: fall back to the direction away from the owner.
            return None;
        }
        Some([d[1] / len, -d[0] / len])
    }

    fn edge_use_counts(&self) -> BTreeMap<(usize, usize), usize> {
        let mut counts = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                *counts.entry(edge_key(tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Checks every mesh invariant and reports each one.
    pub fn validate(&self) -> MeshDiagnostics {
        validate(self)
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Pass,
    Warning,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticEntry {
    pub check: &'static str,
    pub severity: Severity,
    pub detail: String,
}

/// Per-invariant outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshDiagnostics {
    pub entries: Vec<DiagnosticEntry>,
}

impl MeshDiagnostics {
    fn push(&mut self, check: &'static str, severity: Severity, detail: impl Into<String>) {
        self.entries.push(DiagnosticEntry {
            check,
            severity,
            detail: detail.into(),
        });
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.severity != Severity::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &DiagnosticEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Fail)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &DiagnosticEntry> {
        self.entries.iter().filter(|e| e.severity == Severity::Warning)
    }

    pub fn into_result(self) -> Result<Vec<DiagnosticEntry>, MeshError> {
        if let Some(f) = self.failures().next() {
            return Err(MeshError::Invariant {
                check: f.check.to_string(),
                detail: f.detail.clone(),
            });
        }
        Ok(self.warnings().cloned().collect())
    }
}

impl fmt::Display for MeshDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let s = match e.severity {
                Severity::Pass => "pass",
                Severity::Warning => "warn",
                Severity::Fail => "FAIL",
            };
            writeln!(f, "{s:<5} {:<24} {}", e.check, e.detail)?;
        }
        Ok(())
    }
}

/// Reports each mesh invariant with its offending entities. Never fails.
pub fn validate(mesh: &Mesh2D) -> MeshDiagnostics {
    let mut diag = MeshDiagnostics::default();
    let n = mesh.nodes.len();

    diag.push("dimension", Severity::Pass, "d = 2");

    let bad_coords: Vec<usize> = (0..n)
        .filter(|&i| !(mesh.nodes[i][0].is_finite() && mesh.nodes[i][1].is_finite()))
        .collect();
    if bad_coords.is_empty() {
        diag.push("finite coordinates", Severity::Pass, format!("{n} nodes"));
    } else {
        diag.push(
            "finite coordinates",
            Severity::Fail,
            format!("non-finite coordinates at nodes {bad_coords:?}"),
        );
    }

    let bad_tris: Vec<usize> = (0..mesh.triangles.len())
        .filter(|&t| mesh.triangles[t].iter().any(|&v| v >= n))
        .collect();
    let bad_edges: Vec<usize> = (0..mesh.edges.len())
        .filter(|&e| mesh.edges[e].nodes.iter().any(|&v| v >= n))
        .collect();
    if !bad_tris.is_empty() || !bad_edges.is_empty() {
        diag.push(
            "index range",
            Severity::Fail,
            format!("triangles {bad_tris:?} and edges {bad_edges:?} reference missing nodes"),
        );
        // Remaining checks would index out of bounds.
        return diag;
    }
    diag.push("index range", Severity::Pass, "all indices valid");

    if mesh.regions.len() == mesh.triangles.len() {
        diag.push("region ids", Severity::Pass, "one per triangle");
    } else {
        diag.push(
            "region ids",
            Severity::Fail,
            format!(
                "{} region ids for {} triangles",
                mesh.regions.len(),
                mesh.triangles.len()
            ),
        );
    }

    let nonpositive: Vec<usize> = (0..mesh.triangles.len())
        .filter(|&t| !(mesh.signed_area(t) > 0.0))
        .collect();
    if mesh.triangles.is_empty() {
        diag.push("positive area", Severity::Fail, "mesh has no triangles");
    } else if nonpositive.is_empty() {
        diag.push(
            "positive area",
            Severity::Pass,
            format!("{} triangles", mesh.triangles.len()),
        );
    } else {
        diag.push(
            "positive area",
            Severity::Fail,
            format!("nonpositive signed area at triangles {nonpositive:?}"),
        );
    }

    let fixed_len: f64 = mesh
        .edges_tagged(BoundaryTag::Fixed)
        .map(|e| mesh.edge_length(e))
        .sum();
    if fixed_len > 0.0 {
        diag.push(
            "fixed boundary",
            Severity::Pass,
            format!("meas(Γ_F) = {fixed_len}"),
        );
    } else {
        diag.push("fixed boundary", Severity::Fail, "meas(Γ_F) = 0");
    }

    let counts = mesh.edge_use_counts();
    let nonmanifold: Vec<(usize, usize)> = counts
        .iter()
        .filter(|(_, &c)| c > 2)
        .map(|(&k, _)| k)
        .collect();
    if nonmanifold.is_empty() {
        diag.push("manifold edges", Severity::Pass, "each edge in ≤ 2 triangles");
    } else {
        diag.push(
            "manifold edges",
            Severity::Fail,
            format!("edges shared by more than two triangles: {nonmanifold:?}"),
        );
    }

    let mut tagged: BTreeMap<(usize, usize), Vec<BoundaryTag>> = BTreeMap::new();
    for e in &mesh.edges {
        tagged
            .entry(edge_key(e.nodes[0], e.nodes[1]))
            .or_default()
            .push(e.tag);
    }
    let multiply_tagged: Vec<String> = tagged
        .iter()
        .filter(|(_, tags)| tags.len() > 1)
        .map(|(k, tags)| format!("{k:?} {tags:?}"))
        .collect();
    let not_boundary: Vec<(usize, usize)> = tagged
        .keys()
        .filter(|k| counts.get(k) != Some(&1))
        .copied()
        .collect();
    let untagged: Vec<(usize, usize)> = counts
        .iter()
        .filter(|(k, &c)| c == 1 && !tagged.contains_key(k))
        .map(|(&k, _)| k)
        .collect();
    if multiply_tagged.is_empty() && not_boundary.is_empty() && untagged.is_empty() {
        diag.push(
            "boundary partition",
            Severity::Pass,
            format!("{} boundary edges tagged once", mesh.edges.len()),
        );
    } else {
        let mut parts = Vec::new();
        if !multiply_tagged.is_empty() {
            parts.push(format!("edges with several tags: {}", multiply_tagged.join(", ")));
        }
        if !not_boundary.is_empty() {
            parts.push(format!("tagged edges not on the boundary: {not_boundary:?}"));
        }
        if !untagged.is_empty() {
            parts.push(format!("untagged boundary edges: {untagged:?}"));
        }
        diag.push("boundary partition", Severity::Fail, parts.join("; "));
    }

    // Coincident nodes are expected across the two contact lips.
    let lip_a = mesh.nodes_tagged(BoundaryTag::ContactA);
    let lip_b = mesh.nodes_tagged(BoundaryTag::ContactB);
    let mut by_coord: BTreeMap<(u64, u64), Vec<usize>> = BTreeMap::new();
    for (i, p) in mesh.nodes.iter().enumerate() {
        by_coord
            .entry(((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()))
            .or_default()
            .push(i);
    }
    let duplicates: Vec<Vec<usize>> = by_coord
        .into_values()
        .filter(|ids| ids.len() > 1)
        .filter(|ids| {
            !(ids.len() == 2
                && ((lip_a.contains(&ids[0]) && lip_b.contains(&ids[1]))
                    || (lip_b.contains(&ids[0]) && lip_a.contains(&ids[1]))))
        })
        .collect();
    if duplicates.is_empty() {
        diag.push("distinct nodes", Severity::Pass, "no coincident nodes off the lips");
    } else {
        diag.push(
            "distinct nodes",
            Severity::Warning,
            format!("coincident node groups {duplicates:?}"),
        );
    }

    diag
}
