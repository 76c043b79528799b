//! The elliptic variational inequality for a frozen history term.
//!
//! Find `u ∈ K = {u : C u ≤ g}` with `A u − b` in the normal cone of `K`,
//! i.e. minimize `½ u·A u − b·u` over `K`. Each row of `C` couples one
//! contact pair and no two rows share a dof, so the rows are mutually
//! orthogonal and the Euclidean projection onto `K` splits per pair.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::assembly::{DofMap, StiffnessOperator};
use crate::mesh::ConstraintSet;
use crate::sparse::{dot, norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VIError {
    #[error("variational inequality solver did not converge in {iterations} iterations (step residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("expected a vector of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("invalid solver setting: {0}")]
    Config(String),
    #[error("oracle handles at most {max} constraints, got {got}")]
    OracleTooLarge { max: usize, got: usize },
}

/// One row of `C` restricted to free dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactRow {
    entries: Vec<(usize, f64)>,
    gap: f64,
    norm: f64,
}

impl ContactRow {
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// `c·u`.
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.entries.iter().map(|&(d, c)| c * u[d]).sum()
    }

    /// `‖c‖`; zero when both nodes are clamped.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    fn unit_component(&self, v: &[f64]) -> f64 {
        self.apply(v) / self.norm
    }

    fn add_unit(&self, v: &mut [f64], s: f64) {
        for &(d, c) in &self.entries {
            v[d] += s * c / self.norm;
        }
    }
}

/// The constraint matrix `C` and gap vector `g` in free-dof coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactRows {
    rows: Vec<ContactRow>,
}

impl ContactRows {
    /// Row `p` reads `(u_a − u_b)·ν_p`; components on clamped nodes drop out.
    pub fn new(constraints: &ConstraintSet, dofmap: &DofMap) -> Self {
        let rows = constraints
            .pairs()
            .iter()
            .map(|p| {
                let mut entries = Vec::with_capacity(4);
                for (node, sign) in [(p.a, 1.0), (p.b, -1.0)] {
                    for c in 0..2 {
                        if let Some(d) = dofmap.dof(node, c) {
                            if p.normal[c] != 0.0 {
                                entries.push((d, sign * p.normal[c]));
                            }
                        }
                    }
                }
                let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                ContactRow {
                    entries,
                    gap: p.gap,
                    norm,
                }
            })
            .collect();
        ContactRows { rows }
    }

    pub fn rows(&self) -> &[ContactRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    /// `C u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.apply(u)).collect()
    }

    /// `g − C u`, nonnegative on `K`.
    pub fn slack(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap - r.apply(u)).collect()
    }

    /// `Cᵀ λ`.
    pub fn apply_transpose(&self, lambda: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (r, &l) in self.rows.iter().zip(lambda) {
            for &(d, c) in &r.entries {
                out[d] += c * l;
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), n);
        for (p, r) in self.rows.iter().enumerate() {
            for &(d, c) in &r.entries {
                m[(p, d)] = c;
            }
        }
        m
    }
}

/// Euclidean projection onto `K`: each violated row is pulled back along
/// its own normal, `u − max(0, c·u − g)/‖c‖² c`.
pub fn project_k(u: &[f64], rows: &ContactRows) -> Vec<f64> {
    let mut v = u.to_vec();
    project_in_place(&mut v, rows);
    v
}

fn project_in_place(u: &mut [f64], rows: &ContactRows) {
    for r in &rows.rows {
        if r.norm == 0.0 {
            continue;
        }
        let s = r.apply(u) - r.gap;
        if s > 0.0 {
            let f = s / (r.norm * r.norm);
            for &(d, c) in &r.entries {
                u[d] -= f * c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSize {
    /// `ρ = 1/λ_max`.
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for StepSize {
    type Err = VIError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "auto" => Ok(StepSize::Auto),
            other => match other.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(StepSize::Fixed(x)),
                _ => Err(VIError::Config(format!("step must be auto or a positive number, got '{other}'"))),
            },
        }
    }
}

impl fmt::Display for StepSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSize::Auto => write!(f, "auto"),
            StepSize::Fixed(x) => write!(f, "{x:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VIMethod {
    /// Conjugate gradients on the free face with proportioning and
    /// projected expansion steps.
    #[default]
    Mprgp,
    /// Plain successive approximations `u ← P_K(u − ρ(Au − b))`.
    ProjectedGradient,
}

impl FromStr for VIMethod {
    type Err = VIError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mprgp" => Ok(VIMethod::Mprgp),
            "pg" => Ok(VIMethod::ProjectedGradient),
            other => Err(VIError::Config(format!("method must be mprgp or pg, got '{other}'"))),
        }
    }
}

impl fmt::Display for VIMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VIMethod::Mprgp => "mprgp",
            VIMethod::ProjectedGradient => "pg",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VIConfig {
    pub tol: f64,
    /// `None` means `50 · n_free`.
    pub max_iters: Option<usize>,
    pub step: StepSize,
    pub method: VIMethod,
}

impl Default for VIConfig {
    fn default() -> Self {
        VIConfig {
            tol: 1e-10,
            max_iters: None,
            step: StepSize::Auto,
            method: VIMethod::Mprgp,
        }
    }
}

impl VIConfig {
    pub fn iteration_cap(&self, n_free: usize) -> usize {
        self.max_iters.unwrap_or(50 * n_free).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VIResult {
    pub u: Vec<f64>,
    /// Contact force per pair, `λ_p ≥ 0`.
    pub multipliers: Vec<f64>,
    pub active: Vec<bool>,
    pub iterations: usize,
    /// Final step measure `‖P_K(u − ρ(Au − b)) − u‖ / (1 + ‖u‖)`.
    pub residual: f64,
    /// Active pairs whose multiplier vanishes (weakly active).
    pub degenerate: Vec<usize>,
}

fn step_of(a: &StiffnessOperator, cfg: &VIConfig) -> f64 {
    match cfg.step {
        StepSize::Auto => 1.0 / a.lambda_max(),
        StepSize::Fixed(x) => x,
    }
}

/// `‖P_K(u − ρ r) − u‖ / (1 + ‖u‖)`.
fn step_residual(u: &[f64], r: &[f64], rho: f64, rows: &ContactRows, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(u.iter().zip(r).map(|(ui, ri)| ui - rho * ri));
    project_in_place(buf, rows);
    let d: f64 = buf.iter().zip(u).map(|(p, ui)| (p - ui) * (p - ui)).sum();
    d.sqrt() / (1.0 + norm(u))
}

fn residual_vec(a: &StiffnessOperator, u: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = a.apply(u);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    r
}

/// Solves the VI from the origin (projected onto `K`).
pub fn solve_vi(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    cfg: &VIConfig,
) -> Result<VIResult, VIError> {
    solve_vi_from(a, b, rows, cfg, None)
}

/// Solves the VI starting from `start`, which is projected onto `K` first.
pub fn solve_vi_from(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    cfg: &VIConfig,
    start: Option<&[f64]>,
) -> Result<VIResult, VIError> {
    let n = a.n_free();
    if b.len() != n {
        return Err(VIError::Length { expected: n, got: b.len() });
    }
    if !(cfg.tol > 0.0) {
        return Err(VIError::Config(format!("tolerance must be positive, got {}", cfg.tol)));
    }
    let mut u = match start {
        Some(s) if s.len() != n => return Err(VIError::Length { expected: n, got: s.len() }),
        Some(s) => s.to_vec(),
        None => vec![0.0; n],
    };
    project_in_place(&mut u, rows);
    if n == 0 {
        return Ok(VIResult {
            u,
            multipliers: vec![0.0; rows.len()],
            active: vec![false; rows.len()],
            iterations: 0,
            residual: 0.0,
            degenerate: Vec::new(),
        });
    }
    let (u, iterations, residual) = match cfg.method {
        VIMethod::Mprgp => mprgp(a, b, rows, cfg, u)?,
        VIMethod::ProjectedGradient => projected_gradient(a, b, rows, cfg, u)?,
    };
    let (u, residual) = polish(a, b, rows, step_of(a, cfg), u, residual);
    Ok(finish(a, b, rows, u, iterations, residual))
}

fn finish(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    u: Vec<f64>,
    iterations: usize,
    residual: f64,
) -> VIResult {
    let r = residual_vec(a, &u, b);
    let active = active_set(&u, rows);
    let multipliers = contact_pressure(&r, rows, &active);
    let scale = multipliers.iter().fold(norm(b), |m, &l| m.max(l));
    let degenerate = (0..rows.len())
        .filter(|&p| active[p] && multipliers[p] <= 1e-12 * scale)
        .collect();
    VIResult {
        u,
        multipliers,
        active,
        iterations,
        residual,
        degenerate,
    }
}

/// Conjugate gradients on the face identified by a converged iterate.
///
/// The step criterion bounds the error only up to the condition number of
/// `A`; minimizing exactly on the final face removes that factor. The
/// polished point is kept only if it scores no worse on the same criterion.
fn polish(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    rho: f64,
    u0: Vec<f64>,
    res0: f64,
) -> (Vec<f64>, f64) {
    let n = u0.len();
    let faces = Faces { rows, active: active_set(&u0, rows) };
    let mut u = u0.clone();
    let mut r = residual_vec(a, &u, b);
    let mut phi = faces.free(&r);
    let mut p = phi.clone();
    let mut ap = vec![0.0; n];
    let floor = 1e-15 * norm(b).max(f64::MIN_POSITIVE);
    let mut pp = dot(&phi, &phi);
    for _ in 0..n.max(10) {
        if pp.sqrt() <= floor {
            break;
        }
        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = pp / pap;
        axpy_neg(alpha, &p, &mut u);
        axpy_neg(alpha, &ap, &mut r);
        phi = faces.free(&r);
        let next = dot(&phi, &phi);
        let beta = next / pp;
        pp = next;
        for (pi, fi) in p.iter_mut().zip(&phi) {
            *pi = fi + beta * *pi;
        }
        p = faces.free(&p);
    }
    project_in_place(&mut u, rows);
    let r = residual_vec(a, &u, b);
    let mut buf = Vec::with_capacity(n);
    let res = step_residual(&u, &r, rho, rows, &mut buf);
    if res <= res0 {
        (u, res)
    } else {
        (u0, res0)
    }
}

/// Rows with slack below a relative rounding threshold.
fn active_set(u: &[f64], rows: &ContactRows) -> Vec<bool> {
    let scale = rows
        .rows
        .iter()
        .map(|r| r.gap.abs() / r.norm.max(f64::MIN_POSITIVE))
        .fold(u.iter().fold(0.0f64, |m, x| m.max(x.abs())), f64::max);
    let tol = 1e-12 * scale;
    rows.rows
        .iter()
        .map(|r| r.norm > 0.0 && (r.gap - r.apply(u)) / r.norm <= tol)
        .collect()
}

/// Contact forces from the residual `r = A u − b`: on active rows the
/// least-squares multiplier `λ_p = −c_p·r / ‖c_p‖²` (exact because the
/// rows are orthogonal), clamped at zero; inactive rows carry none.
pub fn contact_pressure(r: &[f64], rows: &ContactRows, active: &[bool]) -> Vec<f64> {
    rows.rows
        .iter()
        .zip(active)
        .map(|(row, &on)| {
            if on && row.norm > 0.0 {
                (-row.apply(r) / (row.norm * row.norm)).max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn projected_gradient(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    cfg: &VIConfig,
    mut u: Vec<f64>,
) -> Result<(Vec<f64>, usize, f64), VIError> {
    let rho = step_of(a, cfg);
    let cap = cfg.iteration_cap(u.len());
    let mut buf = Vec::with_capacity(u.len());
    let mut res = f64::INFINITY;
    for it in 0..=cap {
        let r = residual_vec(a, &u, b);
        res = step_residual(&u, &r, rho, rows, &mut buf);
        if res <= cfg.tol {
            return Ok((u, it, res));
        }
        if it == cap {
            break;
        }
        std::mem::swap(&mut u, &mut buf);
    }
    Err(VIError::NotConverged { iterations: cap, residual: res })
}

/// Gradient split for the rotated bound-constrained form `y_p = n_p·u ≤ ĝ_p`.
struct Faces<'a> {
    rows: &'a ContactRows,
    active: Vec<bool>,
}

impl Faces<'_> {
    fn refresh(&mut self, u: &[f64]) {
        self.active = active_set(u, self.rows);
    }

    fn live(&self) -> impl Iterator<Item = (usize, &ContactRow)> {
        self.rows.rows.iter().enumerate().filter(|(_, r)| r.norm > 0.0)
    }

    /// `φ`: the gradient with active normal components removed.
    fn free(&self, r: &[f64]) -> Vec<f64> {
        let mut phi = r.to_vec();
        for (p, row) in self.live() {
            if self.active[p] {
                let g = row.unit_component(r);
                row.add_unit(&mut phi, -g);
            }
        }
        phi
    }

    /// `β`: active components that point back into the interior.
    fn chopped(&self, r: &[f64], n: usize) -> Vec<f64> {
        let mut beta = vec![0.0; n];
        for (p, row) in self.live() {
            if self.active[p] {
                let g = row.unit_component(r);
                if g > 0.0 {
                    row.add_unit(&mut beta, g);
                }
            }
        }
        beta
    }

    /// `φ̃`: the free gradient truncated so that a step of length `alpha`
    /// stays feasible.
    fn reduced(&self, phi: &[f64], u: &[f64], alpha: f64) -> Vec<f64> {
        let mut out = phi.to_vec();
        for (p, row) in self.live() {
            if !self.active[p] {
                let f = row.unit_component(phi);
                let slack = (row.gap - row.apply(u)) / row.norm;
                let t = f.max(-slack / alpha);
                if t != f {
                    row.add_unit(&mut out, t - f);
                }
            }
        }
        out
    }

    /// Largest `α` with `u − α p ∈ K`.
    fn feasible_step(&self, u: &[f64], p: &[f64]) -> f64 {
        let mut amax = f64::INFINITY;
        for (q, row) in self.live() {
            if self.active[q] {
                continue;
            }
            let np = row.apply(p);
            if np < 0.0 {
                let slack = (row.gap - row.apply(u)).max(0.0);
                amax = amax.min(slack / -np);
            }
        }
        amax
    }
}

fn mprgp(
    a: &StiffnessOperator,
    b: &[f64],
    rows: &ContactRows,
    cfg: &VIConfig,
    mut u: Vec<f64>,
) -> Result<(Vec<f64>, usize, f64), VIError> {
    let n = u.len();
    let rho = step_of(a, cfg);
    let alpha_bar = 1.8 / a.lambda_max();
    let cap = cfg.iteration_cap(n);
    let mut faces = Faces { rows, active: Vec::new() };
    faces.refresh(&u);
    let mut r = residual_vec(a, &u, b);
    let mut p = faces.free(&r);
    let mut ap = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    let mut res = f64::INFINITY;

    for it in 0..=cap {
        res = step_residual(&u, &r, rho, rows, &mut buf);
        if res <= cfg.tol {
            // Confirm against the true residual before accepting.
            r = residual_vec(a, &u, b);
            res = step_residual(&u, &r, rho, rows, &mut buf);
            if res <= cfg.tol {
                return Ok((u, it, res));
            }
            p = faces.free(&r);
        }
        if it == cap {
            break;
        }

        let phi = faces.free(&r);
        let beta = faces.chopped(&r, n);
        let phi_t = faces.reduced(&phi, &u, alpha_bar);
        if dot(&beta, &beta) <= dot(&phi_t, &phi) {
            if dot(&p, &p) == 0.0 {
                p = phi.clone();
            }
            a.apply_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                p = phi;
                continue;
            }
            let a_cg = dot(&r, &p) / pap;
            let a_f = faces.feasible_step(&u, &p);
            if a_cg <= a_f {
                // Conjugate gradient step on the current face.
                axpy_neg(a_cg, &p, &mut u);
                axpy_neg(a_cg, &ap, &mut r);
                project_in_place(&mut u, rows);
                let before = faces.active.clone();
                faces.refresh(&u);
                let phi = faces.free(&r);
                if faces.active != before {
                    p = phi;
                } else {
                    let g = dot(&phi, &ap) / pap;
                    for (pi, fi) in p.iter_mut().zip(&phi) {
                        *pi = fi - g * *pi;
                    }
                    // Rounding along active normals would otherwise grow by
                    // the conjugation factor at every step.
                    p = faces.free(&p);
                }
            } else {
                // Expansion: feasible half step, then a projected gradient step.
                axpy_neg(a_f, &p, &mut u);
                axpy_neg(a_f, &ap, &mut r);
                faces.refresh(&u);
                let phi = faces.free(&r);
                axpy_neg(alpha_bar, &phi, &mut u);
                project_in_place(&mut u, rows);
                r = residual_vec(a, &u, b);
                faces.refresh(&u);
                p = faces.free(&r);
            }
        } else {
            // Proportioning: release active rows along the chopped gradient.
            let mut ad = vec![0.0; n];
            a.apply_into(&beta, &mut ad);
            let a_cg = dot(&r, &beta) / dot(&beta, &ad);
            axpy_neg(a_cg, &beta, &mut u);
            axpy_neg(a_cg, &ad, &mut r);
            faces.refresh(&u);
            p = faces.free(&r);
        }
    }
    Err(VIError::NotConverged { iterations: cap, residual: res })
}

fn axpy_neg(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi -= a * xi;
    }
}

/// Exact solution by enumeration of active sets.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub u: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub active: Vec<bool>,
}

pub const ORACLE_MAX_ROWS: usize = 12;

/// Minimizes `½ u·A u − b·u` subject to `C u ≤ g` by solving the
/// equality-constrained saddle system for every subset of rows and keeping
/// the candidate that is primal feasible with nonnegative multipliers.
/// Among near-ties the smallest sign violation wins.
pub fn solve_qp_activeset_oracle(
    a_dense: &DMatrix<f64>,
    b: &[f64],
    rows: &ContactRows,
) -> Result<OracleSolution, VIError> {
    let n = a_dense.nrows();
    if b.len() != n {
        return Err(VIError::Length { expected: n, got: b.len() });
    }
    let p = rows.len();
    if p > ORACLE_MAX_ROWS {
        return Err(VIError::OracleTooLarge { max: ORACLE_MAX_ROWS, got: p });
    }
    let chol = a_dense
        .clone()
        .cholesky()
        .ok_or_else(|| VIError::Config("oracle matrix is not positive definite".into()))?;
    let bv = DVector::from_column_slice(b);
    let a_inv_b = chol.solve(&bv);
    let c = rows.to_dense(n);
    let a_inv_ct = chol.solve(&c.transpose());
    let g = DVector::from_vec(rows.gaps());
    let live: Vec<usize> = (0..p).filter(|&k| rows.rows[k].norm > 0.0).collect();

    let scale_u = a_inv_b.amax().max(g.amax()).max(f64::MIN_POSITIVE);
    let scale_l = bv.amax().max(f64::MIN_POSITIVE);
    let mut best: Option<(f64, OracleSolution)> = None;
    for mask in 0u32..(1u32 << live.len()) {
        let set: Vec<usize> = (0..live.len()).filter(|&k| mask & (1 << k) != 0).map(|k| live[k]).collect();
        let m = set.len();
        let mut mu = DVector::zeros(m);
        if m > 0 {
            // Schur complement S = C_S A⁻¹ C_Sᵀ and rhs C_S A⁻¹ b − g_S.
            let s = DMatrix::from_fn(m, m, |i, j| (c.row(set[i]) * a_inv_ct.column(set[j]))[(0, 0)]);
            let rhs = DVector::from_fn(m, |i, _| (c.row(set[i]) * &a_inv_b)[(0, 0)] - g[set[i]]);
            match s.cholesky() {
                Some(sc) => mu = sc.solve(&rhs),
                None => continue,
            }
        }
        let mut u = a_inv_b.clone();
        for (i, &k) in set.iter().enumerate() {
            u -= a_inv_ct.column(k) * mu[i];
        }
        let cu = &c * &u;
        let mut viol = 0.0f64;
        for k in 0..p {
            viol = viol.max((cu[k] - g[k]) / scale_u);
        }
        for i in 0..m {
            viol = viol.max(-mu[i] / scale_l);
        }
        if best.as_ref().is_none_or(|(v, _)| viol < *v) {
            let mut multipliers = vec![0.0; p];
            let mut active = vec![false; p];
            for (i, &k) in set.iter().enumerate() {
                multipliers[k] = mu[i].max(0.0);
                active[k] = true;
            }
            best = Some((
                viol,
                OracleSolution {
                    u: u.iter().copied().collect(),
                    multipliers,
                    active,
                },
            ));
        }
    }
    Ok(best.expect("the empty active set is always a candidate").1)
}
