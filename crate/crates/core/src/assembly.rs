//! P1 discretization of the bilinear and linear forms.
//!
//! Displacements are continuous piecewise-linear; strains and stresses are
//! constant per triangle. Dirichlet degrees of freedom on FIXED nodes are
//! eliminated, so every vector in this module lives on the free dofs only.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::material::MaterialField;
use crate::mesh::{BoundaryTag, Mesh2D};
use crate::sparse::{dot, norm, CsrMatrix};
use crate::tensor::{SymTensor2, TensorField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("stiffness is singular: {0}")]
    Singular(String),
    #[error("expected a vector of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid load profile: {0}")]
    Profile(String),
}

/// Global numbering of the free displacement components.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    dofs: Vec<[Option<usize>; 2]>,
    n_free: usize,
}

impl DofMap {
    /// Both components of every node on a FIXED edge are constrained to zero.
    pub fn new(mesh: &Mesh2D) -> Self {
        let fixed = mesh.nodes_tagged(BoundaryTag::Fixed);
        Self::with_fixed(mesh.n_nodes(), |i| fixed.contains(&i))
    }

    /// Every node free; useful for kernel and strain checks.
    pub fn all_free(mesh: &Mesh2D) -> Self {
        Self::with_fixed(mesh.n_nodes(), |_| false)
    }

    fn with_fixed(n_nodes: usize, is_fixed: impl Fn(usize) -> bool) -> Self {
        let mut n_free = 0;
        let dofs = (0..n_nodes)
            .map(|i| {
                if is_fixed(i) {
                    [None, None]
                } else {
                    n_free += 2;
                    [Some(n_free - 2), Some(n_free - 1)]
                }
            })
            .collect();
        DofMap { dofs, n_free }
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.len()
    }

    pub fn dof(&self, node: usize, comp: usize) -> Option<usize> {
        self.dofs[node][comp]
    }

    pub fn is_fixed(&self, node: usize) -> bool {
        self.dofs[node][0].is_none()
    }

    /// Nodal displacements with zeros on fixed nodes.
    pub fn expand(&self, u: &[f64]) -> Vec<[f64; 2]> {
        self.dofs
            .iter()
            .map(|d| d.map(|k| k.map_or(0.0, |k| u[k])))
            .collect()
    }

    /// Samples a nodal field on the free dofs.
    pub fn interpolate(&self, mesh: &Mesh2D, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_free];
        for (i, d) in self.dofs.iter().enumerate() {
            let v = f(mesh.node(i));
            for c in 0..2 {
                if let Some(k) = d[c] {
                    u[k] = v[c];
                }
            }
        }
        u
    }

    fn check_len(&self, u: &[f64]) -> Result<(), AssemblyError> {
        if u.len() == self.n_free {
            Ok(())
        } else {
            Err(AssemblyError::Length {
                expected: self.n_free,
                got: u.len(),
            })
        }
    }
}

/// Gradients of the three barycentric shape functions of triangle `t`.
fn shape_gradients(mesh: &Mesh2D, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles()[t];
    let p = tri.map(|v| mesh.node(v));
    let two_a = 2.0 * mesh.signed_area(t);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / two_a, (p[k][0] - p[j][0]) / two_a];
    }
    g
}

/// Strain of the unit displacement of local node `i` in direction `c`.
fn unit_strain(grad: &[[f64; 2]; 3], i: usize, c: usize) -> SymTensor2 {
    let [gx, gy] = grad[i];
    if c == 0 {
        SymTensor2::new(gx, 0.0, 0.5 * gy)
    } else {
        SymTensor2::new(0.0, gy, 0.5 * gx)
    }
}

/// Piecewise-constant strain `ε_ij = ½(u_i,j + u_j,i)` of a free-dof vector.
pub fn strain(mesh: &Mesh2D, dofmap: &DofMap, u: &[f64]) -> TensorField {
    debug_assert_eq!(u.len(), dofmap.n_free());
    (0..mesh.n_triangles())
        .map(|t| {
            let grad = shape_gradients(mesh, t);
            let tri = mesh.triangles()[t];
            let mut e = SymTensor2::ZERO;
            for (i, &v) in tri.iter().enumerate() {
                for c in 0..2 {
                    if let Some(k) = dofmap.dof(v, c) {
                        e += u[k] * unit_strain(&grad, i, c);
                    }
                }
            }
            e
        })
        .collect()
}

/// `(σ, τ)_Q = Σ_T |T| σ·τ`.
pub fn q_inner(mesh: &Mesh2D, sigma: &[SymTensor2], tau: &[SymTensor2]) -> f64 {
    debug_assert_eq!(sigma.len(), mesh.n_triangles());
    debug_assert_eq!(tau.len(), mesh.n_triangles());
    (0..mesh.n_triangles())
        .map(|t| mesh.area(t) * sigma[t].dot(&tau[t]))
        .sum()
}

pub fn q_norm(mesh: &Mesh2D, sigma: &[SymTensor2]) -> f64 {
    q_inner(mesh, sigma, sigma).max(0.0).sqrt()
}

/// `‖u‖_V = ‖ε(u)‖_Q`.
pub fn v_norm(mesh: &Mesh2D, dofmap: &DofMap, u: &[f64]) -> f64 {
    q_norm(mesh, &strain(mesh, dofmap, u))
}

/// `E ε` evaluated per triangle with that triangle's region tensor.
pub fn apply_material(mesh: &Mesh2D, material: &MaterialField, eps: &[SymTensor2]) -> TensorField {
    eps.iter()
        .zip(mesh.regions())
        .map(|(e, &r)| material.tensor(r).apply(e))
        .collect()
}

/// Element matrix of triangle `t`, local dof order `(u0x, u0y, u1x, u1y, u2x, u2y)`.
pub fn element_stiffness(mesh: &Mesh2D, t: usize, material: &MaterialField) -> [[f64; 6]; 6] {
    let grad = shape_gradients(mesh, t);
    let tensor = material.tensor(mesh.regions()[t]);
    let area = mesh.area(t);
    let eps: Vec<SymTensor2> = (0..6).map(|k| unit_strain(&grad, k / 2, k % 2)).collect();
    let stress: Vec<SymTensor2> = eps.iter().map(|e| tensor.apply(e)).collect();
    let mut ke = [[0.0; 6]; 6];
    for (r, row) in ke.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = area * stress[c].dot(&eps[r]);
        }
    }
    // Exact symmetry regardless of rounding in the products above.
    for r in 0..6 {
        for c in r + 1..6 {
            let m = 0.5 * (ke[r][c] + ke[c][r]);
            ke[r][c] = m;
            ke[c][r] = m;
        }
    }
    ke
}

/// The operator `A` with `u·(A v) = (u, v)_E`, restricted to free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessOperator {
    matrix: CsrMatrix,
    lambda_max: f64,
}

impl StiffnessOperator {
    pub fn n_free(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Power-iteration estimate of the largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        self.matrix.mul_vec_into(u, out);
    }

    /// `(u, v)_E = u·(A v)`.
    pub fn energy_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.apply(v))
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, relative tolerance `tol`, at most `max_iters` products.
pub fn power_iteration(matrix: &CsrMatrix, tol: f64, max_iters: usize) -> f64 {
    let n = matrix.n();
    if n == 0 {
        return 0.0;
    }
    // Deterministic start with components in every eigendirection generically.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iters {
        matrix.mul_vec_into(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (next - lambda).abs() <= tol * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    lambda
}

/// Every connected piece of the mesh must be clamped along a FIXED edge, or
/// rigid motions make `A` singular.
fn check_clamped(mesh: &Mesh2D) -> Result<(), AssemblyError> {
    let n = mesh.n_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in mesh.triangles() {
        let r0 = find(&mut parent, tri[0]);
        for &v in &tri[1..] {
            let r = find(&mut parent, v);
            parent[r] = r0;
        }
    }
    let mut clamped = vec![false; n];
    for e in mesh.edges_tagged(BoundaryTag::Fixed) {
        if mesh.edge_length(e) > 0.0 {
            let r = find(&mut parent, e.nodes[0]);
            clamped[r] = true;
        }
    }
    let mut in_mesh = vec![false; n];
    for tri in mesh.triangles() {
        for &v in tri {
            in_mesh[v] = true;
        }
    }
    for v in 0..n {
        if in_mesh[v] {
            let r = find(&mut parent, v);
            if !clamped[r] {
                return Err(AssemblyError::Singular(format!(
                    "the component containing node {v} has no FIXED edge"
                )));
            }
        }
    }
    Ok(())
}

/// Assembles `A`. With every node fixed the operator is empty.
pub fn assemble_stiffness(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    material: &MaterialField,
) -> Result<StiffnessOperator, AssemblyError> {
    let n = dofmap.n_free();
    if n > 0 {
        check_clamped(mesh)?;
    }
    let mut trip = Vec::with_capacity(36 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let ke = element_stiffness(mesh, t, material);
        let tri = mesh.triangles()[t];
        let g: Vec<Option<usize>> = (0..6).map(|k| dofmap.dof(tri[k / 2], k % 2)).collect();
        for r in 0..6 {
            let Some(gr) = g[r] else { continue };
            for c in 0..6 {
                if let Some(gc) = g[c] {
                    trip.push((gr, gc, ke[r][c]));
                }
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, trip);
    let lambda_max = power_iteration(&matrix, 1e-6, 500);
    if n > 0 && !(lambda_max > 0.0) {
        return Err(AssemblyError::Singular("zero operator".into()));
    }
    Ok(StiffnessOperator { matrix, lambda_max })
}

/// Vector `r` with `r·v = (η, ε(v))_Q` for every free-dof vector `v`.
pub fn assemble_eta_load(mesh: &Mesh2D, dofmap: &DofMap, eta: &[SymTensor2]) -> Vec<f64> {
    debug_assert_eq!(eta.len(), mesh.n_triangles());
    let mut r = vec![0.0; dofmap.n_free()];
    for t in 0..mesh.n_triangles() {
        let grad = shape_gradients(mesh, t);
        let area = mesh.area(t);
        let tri = mesh.triangles()[t];
        for (i, &v) in tri.iter().enumerate() {
            for c in 0..2 {
                if let Some(k) = dofmap.dof(v, c) {
                    r[k] += area * eta[t].dot(&unit_strain(&grad, i, c));
                }
            }
        }
    }
    r
}

/// Scalar time modulation of a load.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TimeProfile {
    #[default]
    Constant,
    /// `min(t / t*, 1)`.
    Ramp { t_star: f64 },
    /// `sin(ω t)`.
    Sinusoid { omega: f64 },
}

impl TimeProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Ramp { t_star } => (t / t_star).min(1.0),
            TimeProfile::Sinusoid { omega } => (omega * t).sin(),
        }
    }
}

impl FromStr for TimeProfile {
    type Err = AssemblyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AssemblyError::Profile(format!("expected constant, ramp:<t*> or sin:<omega>, got '{s}'"));
        let s = s.trim();
        if s == "constant" {
            return Ok(TimeProfile::Constant);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let x: f64 = arg.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "ramp" if x > 0.0 => Ok(TimeProfile::Ramp { t_star: x }),
            "ramp" => Err(AssemblyError::Profile(format!("ramp time must be positive, got {x}"))),
            "sin" if x.is_finite() => Ok(TimeProfile::Sinusoid { omega: x }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TimeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeProfile::Constant => write!(f, "constant"),
            TimeProfile::Ramp { t_star } => write!(f, "ramp:{t_star:?}"),
            TimeProfile::Sinusoid { omega } => write!(f, "sin:{omega:?}"),
        }
    }
}

/// A spatially uniform density times a time profile.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Load {
    pub amplitude: [f64; 2],
    pub profile: TimeProfile,
}

impl Load {
    pub fn constant(amplitude: [f64; 2]) -> Self {
        Load {
            amplitude,
            profile: TimeProfile::Constant,
        }
    }

    pub fn at(&self, t: f64) -> [f64; 2] {
        let s = self.profile.value(t);
        [s * self.amplitude[0], s * self.amplitude[1]]
    }
}

/// Body force density `f0` on Ω and traction density `f1` on Γ_T.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LoadSpec {
    pub body: Load,
    pub traction: Load,
}

/// `f(t)` with `f(t)·v = ∫_Ω f0·v + ∫_{Γ_T} f1·v`, by the one-point rule on
/// triangles and the trapezoid rule on edges (both exact for P1 test
/// functions and uniform densities).
pub fn assemble_force(mesh: &Mesh2D, dofmap: &DofMap, loads: &LoadSpec, t: f64) -> Vec<f64> {
    let mut f = vec![0.0; dofmap.n_free()];
    let body = loads.body.at(t);
    if body != [0.0, 0.0] {
        for (tri, k) in mesh.triangles().iter().zip(0..) {
            let w = mesh.area(k) / 3.0;
            for &v in tri {
                for c in 0..2 {
                    if let Some(d) = dofmap.dof(v, c) {
                        f[d] += w * body[c];
                    }
                }
            }
        }
    }
    let trac = loads.traction.at(t);
    if trac != [0.0, 0.0] {
        for e in mesh.edges_tagged(BoundaryTag::Traction) {
            let w = 0.5 * mesh.edge_length(e);
            for &v in &e.nodes {
                for c in 0..2 {
                    if let Some(d) = dofmap.dof(v, c) {
                        f[d] += w * trac[c];
                    }
                }
            }
        }
    }
    f
}

/// Checked wrapper used by callers holding vectors of unknown provenance.
pub fn checked_v_norm(mesh: &Mesh2D, dofmap: &DofMap, u: &[f64]) -> Result<f64, AssemblyError> {
    dofmap.check_len(u)?;
    Ok(v_norm(mesh, dofmap, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{isotropic_tensor, ElasticTensor, PlaneMode};
    use crate::mesh::{build_notched_rectangle, build_rectangle, BoundaryEdge, NotchedRectangle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lame(l: f64, m: f64) -> MaterialField {
        ElasticTensor::from_lame(l, m, PlaneMode::PlaneStrain).unwrap().into()
    }

    fn toy() -> Mesh2D {
        build_notched_rectangle(&NotchedRectangle::default()).unwrap()
    }

    fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn strain_of_linear_fields_is_exact() {
        let m = toy();
        let d = DofMap::all_free(&m);
        assert!(strain(&m, &d, &vec![0.0; d.n_free()]).iter().all(|e| *e == SymTensor2::ZERO));
        let u = d.interpolate(&m, |p| [p[0], 0.0]);
        for e in strain(&m, &d, &u) {
            assert!((e - SymTensor2::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        }
        let u = d.interpolate(&m, |p| [p[1], p[0]]);
        for e in strain(&m, &d, &u) {
            assert!((e - SymTensor2::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        }
        let u = d.interpolate(&m, |_| [0.3, -2.0]);
        assert!(v_norm(&m, &d, &u) < 1e-12);
    }

    /// Hand assembly for the triangle (0,0), (1,0), (0,1) with λ = 0,
    /// μ = 0.5: shape gradients b = (−1, 1, 0), c = (−1, 0, 1), D = diag(1,
    /// 1, ½) in engineering Voigt form, K = ½ Bᵀ D B.
    #[test]
    fn one_triangle_element_matrix() {
        let m = Mesh2D::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![
                BoundaryEdge { nodes: [0, 1], tag: BoundaryTag::Fixed },
                BoundaryEdge { nodes: [1, 2], tag: BoundaryTag::Free },
                BoundaryEdge { nodes: [2, 0], tag: BoundaryTag::Free },
            ],
        )
        .unwrap();
        let s = [
            [1.5, 0.5, -1.0, -0.5, -0.5, 0.0],
            [0.5, 1.5, 0.0, -0.5, -0.5, -1.0],
            [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [-0.5, -0.5, 0.0, 0.5, 0.5, 0.0],
            [-0.5, -0.5, 0.0, 0.5, 0.5, 0.0],
            [0.0, -1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let ke = element_stiffness(&m, 0, &lame(0.0, 0.5));
        for r in 0..6 {
            for c in 0..6 {
                assert!((ke[r][c] - 0.5 * s[r][c]).abs() < 1e-15, "({r},{c})");
            }
        }
        // Only node 2 is free once the bottom edge is clamped.
        let d = DofMap::new(&m);
        let a = assemble_stiffness(&m, &d, &lame(0.0, 0.5)).unwrap();
        assert_eq!(a.n_free(), 2);
        assert_eq!(a.matrix().get(0, 0), 0.25);
        assert_eq!(a.matrix().get(1, 1), 0.5);
    }

    #[test]
    fn energy_matches_q_inner_and_matrix_is_symmetric() {
        let m = toy();
        let d = DofMap::new(&m);
        let mat: MaterialField = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStrain).unwrap().into();
        let a = assemble_stiffness(&m, &d, &mat).unwrap();
        assert!(a.matrix().is_symmetric());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let u = random_vec(d.n_free(), &mut rng);
            let eps = strain(&m, &d, &u);
            let direct = q_inner(&m, &apply_material(&m, &mat, &eps), &eps);
            let e = a.energy_inner(&u, &u);
            assert!((e - direct).abs() <= 1e-12 * direct.abs());
            // Discrete strong monotonicity.
            assert!(e >= mat.ellipticity_constant() * q_inner(&m, &eps, &eps) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn fully_fixed_mesh_gives_empty_operator() {
        let m = build_rectangle(1.0, 1.0, 1, 1).unwrap();
        let mut edges = m.boundary_edges().to_vec();
        for e in &mut edges {
            e.tag = BoundaryTag::Fixed;
        }
        let m = Mesh2D::new(m.nodes().to_vec(), m.triangles().to_vec(), edges).unwrap();
        let d = DofMap::new(&m);
        assert_eq!(d.n_free(), 0);
        let a = assemble_stiffness(&m, &d, &lame(1.0, 1.0)).unwrap();
        assert_eq!(a.n_free(), 0);
    }

    #[test]
    fn floating_component_is_singular() {
        // Two disjoint squares, only the first clamped.
        let nodes = vec![
            [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0],
            [2.0, 0.0], [3.0, 0.0], [3.0, 1.0], [2.0, 1.0],
        ];
        let tris = vec![[0, 1, 2], [0, 2, 3], [4, 5, 6], [4, 6, 7]];
        let e = |a, b, tag| BoundaryEdge { nodes: [a, b], tag };
        use BoundaryTag::*;
        let edges = vec![
            e(0, 1, Fixed), e(1, 2, Free), e(2, 3, Free), e(3, 0, Free),
            e(4, 5, Free), e(5, 6, Free), e(6, 7, Free), e(7, 4, Free),
        ];
        let m = Mesh2D::new(nodes, tris, edges).unwrap();
        let d = DofMap::new(&m);
        assert!(matches!(
            assemble_stiffness(&m, &d, &lame(1.0, 1.0)),
            Err(AssemblyError::Singular(_))
        ));
    }

    #[test]
    fn eta_load_identities() {
        let m = toy();
        let d = DofMap::new(&m);
        let mat = lame(1.0, 1.0);
        let a = assemble_stiffness(&m, &d, &mat).unwrap();
        let zero = vec![SymTensor2::ZERO; m.n_triangles()];
        assert!(assemble_eta_load(&m, &d, &zero).iter().all(|&x| x == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_vec(d.n_free(), &mut rng);
        let eta = apply_material(&m, &mat, &strain(&m, &d, &w));
        let r = assemble_eta_load(&m, &d, &eta);
        let aw = a.apply(&w);
        let scale = norm(&aw);
        for (x, y) in r.iter().zip(&aw) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }

        // Random η: assembled r·v against direct quadrature (η, ε(v))_Q.
        let eta: Vec<SymTensor2> = (0..m.n_triangles())
            .map(|_| SymTensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let r = assemble_eta_load(&m, &d, &eta);
        for _ in 0..10 {
            let v = random_vec(d.n_free(), &mut rng);
            let direct = q_inner(&m, &eta, &strain(&m, &d, &v));
            assert!((dot(&r, &v) - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn traction_integrates_to_total_force() {
        let m = build_rectangle(1.0, 1.0, 4, 4).unwrap();
        let d = DofMap::new(&m);
        let zero = assemble_force(&m, &d, &LoadSpec::default(), 0.3);
        assert!(zero.iter().all(|&x| x == 0.0));
        let loads = LoadSpec {
            traction: Load::constant([0.0, -1.0]),
            ..LoadSpec::default()
        };
        let f = assemble_force(&m, &d, &loads, 0.0);
        let total_y: f64 = (0..m.n_nodes()).filter_map(|i| d.dof(i, 1)).map(|k| f[k]).sum();
        let total_x: f64 = (0..m.n_nodes()).filter_map(|i| d.dof(i, 0)).map(|k| f[k]).sum();
        assert!((total_y + 1.0).abs() < 1e-15);
        assert_eq!(total_x, 0.0);

        let body = LoadSpec {
            body: Load::constant([2.0, 0.0]),
            ..LoadSpec::default()
        };
        // Interior and top nodes carry the body force; the clamped bottom
        // row absorbs the rest, so the free total is below 2 · area.
        let f = assemble_force(&m, &d, &body, 0.0);
        let total_x: f64 = (0..m.n_nodes()).filter_map(|i| d.dof(i, 0)).map(|k| f[k]).sum();
        let full = assemble_force(&m, &DofMap::all_free(&m), &body, 0.0);
        assert!((full.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(total_x < 2.0);
    }

    #[test]
    fn ramp_vanishes_at_zero_and_profiles_are_continuous() {
        let m = build_rectangle(1.0, 1.0, 2, 2).unwrap();
        let d = DofMap::new(&m);
        let loads = LoadSpec {
            body: Load { amplitude: [0.0, -1.0], profile: TimeProfile::Ramp { t_star: 0.5 } },
            traction: Load { amplitude: [1.0, 0.0], profile: TimeProfile::Ramp { t_star: 0.5 } },
        };
        assert!(assemble_force(&m, &d, &loads, 0.0).iter().all(|&x| x == 0.0));
        for p in [
            TimeProfile::Constant,
            TimeProfile::Ramp { t_star: 0.3 },
            TimeProfile::Sinusoid { omega: 4.0 },
        ] {
            for k in 0..100 {
                let t = k as f64 * 0.013;
                assert!((p.value(t + 1e-9) - p.value(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("constant".parse::<TimeProfile>().unwrap(), TimeProfile::Constant);
        assert_eq!("ramp:0.5".parse::<TimeProfile>().unwrap(), TimeProfile::Ramp { t_star: 0.5 });
        assert_eq!("sin:2".parse::<TimeProfile>().unwrap(), TimeProfile::Sinusoid { omega: 2.0 });
        assert!("ramp:0".parse::<TimeProfile>().is_err());
        assert!("square".parse::<TimeProfile>().is_err());
        let p = TimeProfile::Ramp { t_star: 0.25 };
        assert_eq!(p.to_string().parse::<TimeProfile>().unwrap(), p);
    }

    #[test]
    fn power_iteration_bounds_rayleigh_quotients() {
        let m = toy();
        let d = DofMap::new(&m);
        let a = assemble_stiffness(&m, &d, &lame(1.0, 1.0)).unwrap();
        let lmax = a.lambda_max();
        let dense = a.matrix().to_dense();
        let exact = nalgebra::SymmetricEigen::new(dense).eigenvalues.max();
        assert!((lmax - exact).abs() <= 1e-3 * exact, "{lmax} vs {exact}");
    }

    #[test]
    fn norm_equivalence_on_random_vectors() {
        let m = toy();
        let d = DofMap::new(&m);
        let mat = lame(1.0, 1.0);
        let a = assemble_stiffness(&m, &d, &mat).unwrap();
        let (me, q) = (mat.ellipticity_constant(), mat.q_inf_norm());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let u = random_vec(d.n_free(), &mut rng);
            let v = v_norm(&m, &d, &u);
            let e = a.energy_inner(&u, &u).sqrt();
            assert!(me.sqrt() * v <= e * (1.0 + 1e-12));
            assert!(e <= (2.0 * q).sqrt() * v * (1.0 + 1e-12));
        }
        assert!(checked_v_norm(&m, &d, &[1.0]).is_err());
    }
}
