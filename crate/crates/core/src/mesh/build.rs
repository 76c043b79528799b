//! Structured preset meshes.

use std::collections::BTreeMap;

use super::{BoundaryEdge, BoundaryTag, Mesh2D, MeshError, Point};

/// Geometry of a rectangle `[0, width] × [0, height]` cut by a horizontal slit.
///
/// The slit spans `slit_x` at height `slit_y`. Its interior nodes are
/// duplicated: the upper copy sits at `slit_y + gap/2` and belongs to the
/// material above, the lower copy at `slit_y − gap/2` belongs to the material
/// below. The two slit tips are shared by both lips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotchedRectangle {
    pub width: f64,
    pub height: f64,
    pub slit_x: (f64, f64),
    pub slit_y: f64,
    pub gap: f64,
    /// Number of element columns along the slit; each lip carries
    /// `resolution − 1` contact nodes.
    pub resolution: usize,
}

impl Default for NotchedRectangle {
    /// The five-pair toy problem used by the verification suite.
    fn default() -> Self {
        NotchedRectangle {
            width: 2.0,
            height: 1.0,
            slit_x: (0.5, 1.5),
            slit_y: 0.5,
            gap: 0.01,
            resolution: 6,
        }
    }
}

fn subdivide(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect()
}

fn cells(length: f64, h: f64) -> usize {
    ((length / h).round() as usize).max(1)
}

/// Structured rectangle with `nx × ny` cells, two triangles per cell.
/// Bottom edge FIXED, top edge TRACTION, sides FREE.
pub fn build_rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh2D, MeshError> {
    if !(width > 0.0 && height > 0.0) {
        return Err(MeshError::InvalidGeometry(format!(
            "rectangle dimensions must be positive, got {width} × {height}"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidGeometry(
            "rectangle needs at least one cell in each direction".into(),
        ));
    }
    let xs = subdivide(0.0, width, nx);
    let ys = subdivide(0.0, height, ny);
    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            push_cell(
                &mut triangles,
                [grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)],
            );
        }
    }
    finish(nodes, triangles, width, height, None)
}

fn push_cell(triangles: &mut Vec<[usize; 3]>, [n00, n10, n11, n01]: [usize; 4]) {
    triangles.push([n00, n10, n11]);
    triangles.push([n00, n11, n01]);
}

/// Tags the topological boundary from geometry and validates.
fn finish(
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    width: f64,
    height: f64,
    slit_y: Option<f64>,
) -> Result<Mesh2D, MeshError> {
    let n_tris = triangles.len();
    let probe = Mesh2D::from_parts_unchecked(nodes, triangles, vec![0; n_tris], Vec::new());
    let mut owner: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (t, tri) in probe.triangles().iter().enumerate() {
        for k in 0..3 {
            owner.insert(super::edge_key(tri[k], tri[(k + 1) % 3]), t);
        }
    }
    let mut edges = Vec::new();
    for e in probe.topological_boundary() {
        let p = probe.node(e[0]);
        let q = probe.node(e[1]);
        let tag = if p[1] == 0.0 && q[1] == 0.0 {
            BoundaryTag::Fixed
        } else if p[1] == height && q[1] == height {
            BoundaryTag::Traction
        } else if (p[0] == 0.0 && q[0] == 0.0) || (p[0] == width && q[0] == width) {
            BoundaryTag::Free
        } else if let Some(ys) = slit_y {
            let t = owner[&super::edge_key(e[0], e[1])];
            if probe.centroid(t)[1] > ys {
                BoundaryTag::ContactA
            } else {
                BoundaryTag::ContactB
            }
        } else {
            BoundaryTag::Free
        };
        edges.push(BoundaryEdge { nodes: e, tag });
    }
    let (nodes, triangles) = (probe.nodes, probe.triangles);
    Mesh2D::new(nodes, triangles, edges)
}

/// Rectangle with an interior horizontal slit whose lips are tagged
/// CONTACT_A (upper) and CONTACT_B (lower).
///
/// The element size is fixed by the slit subdivision; the remaining segments
/// are split into as many cells as match that size most closely.
pub fn build_notched_rectangle(geom: &NotchedRectangle) -> Result<Mesh2D, MeshError> {
    let NotchedRectangle {
        width,
        height,
        slit_x: (x0, x1),
        slit_y,
        gap,
        resolution,
    } = *geom;
    let invalid = |msg: String| Err(MeshError::InvalidGeometry(msg));
    if !(width > 0.0 && height > 0.0) {
        return invalid(format!("rectangle dimensions must be positive, got {width} × {height}"));
    }
    if !(0.0 < x0 && x0 < x1 && x1 < width) {
        return invalid(format!(
            "slit [{x0}, {x1}] must lie strictly inside (0, {width})"
        ));
    }
    if !(0.0 < slit_y && slit_y < height) {
        return invalid(format!("slit height {slit_y} must lie strictly inside (0, {height})"));
    }
    if !(gap >= 0.0) {
        return invalid(format!("gap must be nonnegative, got {gap}"));
    }
    if resolution < 2 {
        return invalid(format!(
            "resolution {resolution} leaves no interior slit node; at least 2 columns are needed"
        ));
    }

    let h = (x1 - x0) / resolution as f64;
    let n_left = cells(x0, h);
    let n_right = cells(width - x1, h);
    let n_below = cells(slit_y, h);
    let n_above = cells(height - slit_y, h);
    let dy = (slit_y / n_below as f64).min((height - slit_y) / n_above as f64);
    if 0.5 * gap >= dy {
        return invalid(format!(
            "gap {gap} is too wide for element height {dy}: half the gap must be smaller"
        ));
    }

    let mut xs = subdivide(0.0, x0, n_left);
    xs.pop();
    let mut mid = subdivide(x0, x1, resolution);
    mid.pop();
    xs.extend(mid);
    xs.extend(subdivide(x1, width, n_right));
    let mut ys = subdivide(0.0, slit_y, n_below);
    ys.pop();
    ys.extend(subdivide(slit_y, height, n_above));

    let nx = xs.len() - 1;
    let ny = ys.len() - 1;
    let (i0, i1, js) = (n_left, n_left + resolution, n_below);
    let grid = |i: usize, j: usize| j * (nx + 1) + i;

    let mut nodes: Vec<Point> = Vec::with_capacity((nx + 1) * (ny + 1) + resolution - 1);
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let y = if j == js && i > i0 && i < i1 {
                slit_y - 0.5 * gap
            } else {
                y
            };
            nodes.push([x, y]);
        }
    }
    // Upper copies of the interior slit nodes.
    let mut upper = BTreeMap::new();
    for i in i0 + 1..i1 {
        upper.insert(grid(i, js), nodes.len());
        nodes.push([xs[i], slit_y + 0.5 * gap]);
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut quad = [grid(i, j), grid(i + 1, j), grid(i + 1, j + 1), grid(i, j + 1)];
            if j == js {
                for v in quad.iter_mut().take(2) {
                    if let Some(&u) = upper.get(v) {
                        *v = u;
                    }
                }
            }
            push_cell(&mut triangles, quad);
        }
    }
    finish(nodes, triangles, width, height, Some(slit_y))
}
