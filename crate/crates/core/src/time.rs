//! History operator, per-node stress recovery and the two drivers of the
//! fixed point `η = Λ(η)`: a global Picard sweep over the whole grid and a
//! sequential time march.
//!
//! `u(0)` is not forced to equal `u0`. The displacement at every node comes
//! from the variational inequality; `u0` and `σ0` enter only through the
//! initial offset `η_init = σ0 − E ε(u0)` of the history term.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{
    apply_material, assemble_eta_load, assemble_force, assemble_stiffness, q_norm, strain, AssemblyError, DofMap,
    LoadSpec, StiffnessOperator,
};
use crate::material::{MaterialField, ViscoplasticLaw};
use crate::mesh::{ConstraintSet, Mesh2D};
use crate::tensor::{SymTensor2, TensorField};
use crate::vi::{solve_vi_from, ContactRows, VIConfig, VIError};

/// Caps the worker threads of a Picard sweep.
pub const THREADS_ENV: &str = "VISCONTACT_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeError {
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("invalid problem data: {0}")]
    Data(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("time node {node} (t = {t}): {source}")]
    Vi {
        node: usize,
        t: f64,
        #[source]
        source: VIError,
    },
    #[error("fixed-point iteration did not converge in {iterations} sweeps (last residual {last:e})", last = residuals.last().copied().unwrap_or(f64::NAN))]
    NotConverged { iterations: usize, residuals: Vec<f64> },
    #[error("inner fixed point at time node {node} did not converge in {iterations} iterations (residual {residual:e})")]
    InnerNotConverged { node: usize, iterations: usize, residual: f64 },
}

impl TimeError {
    /// Solver failures as opposed to bad input.
    pub fn is_nonconvergence(&self) -> bool {
        matches!(
            self,
            TimeError::NotConverged { .. }
                | TimeError::InnerNotConverged { .. }
                | TimeError::Vi { source: VIError::NotConverged { .. }, .. }
        )
    }
}

/// Uniform grid `t_j = j Δt`, `j = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn from_steps(horizon: f64, n_steps: usize) -> Result<Self, TimeError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(TimeError::Grid(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(TimeError::Grid("at least one step is required".into()));
        }
        Ok(TimeGrid {
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    /// `N = round(T/Δt)`; `Δt` must divide `T` up to a relative `1e-9`.
    pub fn new(horizon: f64, dt: f64) -> Result<Self, TimeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(TimeError::Grid(format!("time step must be positive, got {dt}")));
        }
        let n = (horizon / dt).round();
        if n < 1.0 || ((n * dt - horizon).abs() > 1e-9 * horizon) {
            return Err(TimeError::Grid(format!(
                "time step {dt} does not divide the horizon {horizon}"
            )));
        }
        TimeGrid::from_steps(horizon, n as usize)
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|j| self.t(j)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Left endpoints; explicit in time.
    Rectangle,
    #[default]
    Trapezoid,
}

impl FromStr for Quadrature {
    type Err = TimeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "rectangle" => Ok(Quadrature::Rectangle),
            "trapezoid" => Ok(Quadrature::Trapezoid),
            other => Err(TimeError::Config(format!("quadrature must be rectangle or trapezoid, got '{other}'"))),
        }
    }
}

impl fmt::Display for Quadrature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quadrature::Rectangle => "rectangle",
            Quadrature::Trapezoid => "trapezoid",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Picard,
    March,
}

impl FromStr for Scheme {
    type Err = TimeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "picard" => Ok(Scheme::Picard),
            "march" => Ok(Scheme::March),
            other => Err(TimeError::Config(format!("scheme must be picard or march, got '{other}'"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Picard => "picard",
            Scheme::March => "march",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub vi: VIConfig,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub quadrature: Quadrature,
    pub scheme: Scheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            vi: VIConfig::default(),
            fp_tol: 1e-10,
            fp_max_iters: 200,
            quadrature: Quadrature::Trapezoid,
            scheme: Scheme::Picard,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), TimeError> {
        if !(self.vi.tol > 0.0) {
            return Err(TimeError::Config(format!("vi.tol must be positive, got {}", self.vi.tol)));
        }
        if self.vi.max_iters == Some(0) {
            return Err(TimeError::Config("vi.max_iters must be at least 1".into()));
        }
        if !(self.fp_tol > 0.0) {
            return Err(TimeError::Config(format!("fp.tol must be positive, got {}", self.fp_tol)));
        }
        if self.fp_max_iters == 0 {
            return Err(TimeError::Config("fp.max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything that defines one quasistatic run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub mesh: Mesh2D,
    pub constraints: ConstraintSet,
    pub material: MaterialField,
    pub law: ViscoplasticLaw,
    pub loads: LoadSpec,
    /// Initial displacement on the free dofs; `None` is zero.
    pub u0: Option<Vec<f64>>,
    /// Initial stress per triangle; `None` is zero.
    pub sigma0: Option<TensorField>,
    pub grid: TimeGrid,
    pub config: SolverConfig,
}

/// A spec with its discretization assembled once.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub dofmap: DofMap,
    pub stiffness: StiffnessOperator,
    pub rows: ContactRows,
    eta_init: TensorField,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self, TimeError> {
        spec.config.validate()?;
        let dofmap = DofMap::new(&spec.mesh);
        let stiffness = assemble_stiffness(&spec.mesh, &dofmap, &spec.material)?;
        let rows = ContactRows::new(&spec.constraints, &dofmap);
        let nt = spec.mesh.n_triangles();
        if let Some(u0) = &spec.u0 {
            if u0.len() != dofmap.n_free() {
                return Err(TimeError::Data(format!(
                    "u0 has {} entries, expected {} free dofs",
                    u0.len(),
                    dofmap.n_free()
                )));
            }
            if u0.iter().any(|x| !x.is_finite()) {
                return Err(TimeError::Data("u0 is not finite".into()));
            }
        }
        if let Some(s0) = &spec.sigma0 {
            if s0.len() != nt {
                return Err(TimeError::Data(format!("sigma0 has {} entries, expected {nt} triangles", s0.len())));
            }
            if s0.iter().any(|s| !s.is_finite()) {
                return Err(TimeError::Data("sigma0 is not finite".into()));
            }
        }
        let eta_init = initial_eta(&spec.mesh, &dofmap, &spec.material, spec.u0.as_deref(), spec.sigma0.as_deref());
        Ok(Problem {
            spec,
            dofmap,
            stiffness,
            rows,
            eta_init,
        })
    }

    /// `σ0 − E ε(u0)`.
    pub fn eta_init(&self) -> &[SymTensor2] {
        &self.eta_init
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.spec.grid
    }

    pub fn mesh(&self) -> &Mesh2D {
        &self.spec.mesh
    }

    /// Same discretization, different solver settings or grid.
    pub fn with_grid(&self, grid: TimeGrid) -> Self {
        let mut p = self.clone();
        p.spec.grid = grid;
        p
    }

    pub fn with_config(&self, config: SolverConfig) -> Result<Self, TimeError> {
        config.validate()?;
        let mut p = self.clone();
        p.spec.config = config;
        Ok(p)
    }

    /// `G(σ, ε)` per triangle with each triangle's own tensor.
    pub fn evaluate_law(&self, sigma: &[SymTensor2], eps: &[SymTensor2]) -> TensorField {
        let mesh = &self.spec.mesh;
        (0..mesh.n_triangles())
            .map(|t| {
                let e = self.spec.material.tensor(mesh.regions()[t]);
                self.spec.law.evaluate(e, &sigma[t], &eps[t])
            })
            .collect()
    }
}

pub fn initial_eta(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    material: &MaterialField,
    u0: Option<&[f64]>,
    sigma0: Option<&[SymTensor2]>,
) -> TensorField {
    let nt = mesh.n_triangles();
    let mut eta = sigma0.map_or_else(|| vec![SymTensor2::ZERO; nt], <[SymTensor2]>::to_vec);
    if let Some(u0) = u0 {
        let e_eps = apply_material(mesh, material, &strain(mesh, dofmap, u0));
        for (h, s) in eta.iter_mut().zip(e_eps) {
            *h -= s;
        }
    }
    eta
}

/// `η_j = η_init + Δt · Quad_{s ≤ j} G_s`; `history` must hold at least
/// `G_0..G_j` (only `G_0..G_{j−1}` for the rectangle rule).
pub fn lambda_quadrature(
    history: &[TensorField],
    eta_init: &[SymTensor2],
    rule: Quadrature,
    dt: f64,
    j: usize,
) -> TensorField {
    let mut eta = eta_init.to_vec();
    if j == 0 {
        return eta;
    }
    let weight = |s: usize| match rule {
        Quadrature::Rectangle => {
            if s < j {
                1.0
            } else {
                0.0
            }
        }
        Quadrature::Trapezoid => {
            if s == 0 || s == j {
                0.5
            } else {
                1.0
            }
        }
    };
    for (s, g) in history.iter().enumerate().take(j + 1) {
        let w = weight(s) * dt;
        if w != 0.0 {
            for (h, gi) in eta.iter_mut().zip(g) {
                *h += w * *gi;
            }
        }
    }
    eta
}

/// All `η_j` at once by running sums, exactly the values of
/// [`lambda_quadrature`] at every node.
pub fn cumulative_quadrature(
    history: &[TensorField],
    eta_init: &[SymTensor2],
    rule: Quadrature,
    dt: f64,
) -> Vec<TensorField> {
    let n = history.len();
    let mut out = Vec::with_capacity(n);
    let nt = eta_init.len();
    // Σ_{s<j} G_s, accumulated per triangle.
    let mut sum = vec![SymTensor2::ZERO; nt];
    for j in 0..n {
        let eta: TensorField = match rule {
            Quadrature::Rectangle => (0..nt).map(|t| eta_init[t] + dt * sum[t]).collect(),
            Quadrature::Trapezoid if j == 0 => eta_init.to_vec(),
            Quadrature::Trapezoid => (0..nt)
                .map(|t| eta_init[t] + dt * (sum[t] - 0.5 * history[0][t] + 0.5 * history[j][t]))
                .collect(),
        };
        out.push(eta);
        for (s, g) in sum.iter_mut().zip(&history[j]) {
            *s += *g;
        }
    }
    out
}

/// Solution of the per-node problem for a given `η_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSolution {
    pub u: Vec<f64>,
    pub sigma: TensorField,
    pub eps: TensorField,
    pub multipliers: Vec<f64>,
    pub vi_iterations: usize,
}

/// `u_j` from the VI with `b = f(t_j) − r(η_j)`, then `σ_j = E ε(u_j) + η_j`.
pub fn step_solve(problem: &Problem, eta: &[SymTensor2], t: f64, warm: Option<&[f64]>) -> Result<StepSolution, VIError> {
    let spec = &problem.spec;
    let mut b = assemble_force(&spec.mesh, &problem.dofmap, &spec.loads, t);
    let r = assemble_eta_load(&spec.mesh, &problem.dofmap, eta);
    for (bi, ri) in b.iter_mut().zip(&r) {
        *bi -= ri;
    }
    let res = solve_vi_from(&problem.stiffness, &b, &problem.rows, &spec.config.vi, warm)?;
    let eps = strain(&spec.mesh, &problem.dofmap, &res.u);
    let sigma = apply_material(&spec.mesh, &spec.material, &eps)
        .into_iter()
        .zip(eta)
        .map(|(s, h)| s + *h)
        .collect();
    Ok(StepSolution {
        u: res.u,
        sigma,
        eps,
        multipliers: res.multipliers,
        vi_iterations: res.iterations,
    })
}

/// The triple `(u_j, σ_j, η_j)` at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub sigma: Vec<TensorField>,
    pub eta: Vec<TensorField>,
    pub multipliers: Vec<Vec<f64>>,
    /// Picard: `max_j ‖η^{k+1}_j − η^k_j‖_Q` per sweep. March: the largest
    /// inner residual seen at each node.
    pub fp_residuals: Vec<f64>,
    /// Sweeps (Picard, same value at every node) or inner iterations (march).
    pub fp_iterations: Vec<usize>,
    pub vi_iterations: Vec<usize>,
}

impl DiscreteState {
    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// `max_j ‖σ_j − E ε(u_j) − η_j‖_Q`.
    pub fn consistency_defect(&self, problem: &Problem) -> f64 {
        let mesh = problem.mesh();
        (0..self.n_nodes())
            .map(|j| {
                let e = apply_material(mesh, &problem.spec.material, &strain(mesh, &problem.dofmap, &self.u[j]));
                let d: TensorField = (0..mesh.n_triangles())
                    .map(|t| self.sigma[j][t] - e[t] - self.eta[j][t])
                    .collect();
                q_norm(mesh, &d)
            })
            .fold(0.0, f64::max)
    }
}

fn thread_pool() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

fn max_q_diff(mesh: &Mesh2D, a: &[TensorField], b: &[TensorField]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d: TensorField = x.iter().zip(y).map(|(p, q)| *p - *q).collect();
            q_norm(mesh, &d)
        })
        .fold(0.0, f64::max)
}

/// Global Picard iteration from `η^0_j = η_init`.
pub fn picard_solve(problem: &Problem) -> Result<DiscreteState, TimeError> {
    let eta0 = vec![problem.eta_init.clone(); problem.grid().n_nodes()];
    picard_solve_from(problem, eta0)
}

/// Global Picard iteration from an arbitrary starting history.
pub fn picard_solve_from(problem: &Problem, eta0: Vec<TensorField>) -> Result<DiscreteState, TimeError> {
    let grid = *problem.grid();
    let nn = grid.n_nodes();
    let nt = problem.mesh().n_triangles();
    if eta0.len() != nn || eta0.iter().any(|e| e.len() != nt) {
        return Err(TimeError::Data(format!(
            "starting history must hold {nn} fields of {nt} tensors"
        )));
    }
    let cfg = problem.spec.config;
    let pool = thread_pool();
    let mut eta = eta0;
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; nn];
    let mut residuals = Vec::new();

    for k in 1..=cfg.fp_max_iters {
        let sweep = || -> Result<Vec<StepSolution>, TimeError> {
            (0..nn)
                .into_par_iter()
                .map(|j| {
                    step_solve(problem, &eta[j], grid.t(j), warm[j].as_deref()).map_err(|source| TimeError::Vi {
                        node: j,
                        t: grid.t(j),
                        source,
                    })
                })
                .collect()
        };
        let steps = match &pool {
            Some(p) => p.install(sweep)?,
            None => sweep()?,
        };
        let history: Vec<TensorField> = steps.iter().map(|s| problem.evaluate_law(&s.sigma, &s.eps)).collect();
        let next = cumulative_quadrature(&history, &problem.eta_init, cfg.quadrature, grid.dt());
        let res = max_q_diff(problem.mesh(), &next, &eta);
        residuals.push(res);
        if res <= cfg.fp_tol {
            let mut state = DiscreteState {
                times: grid.times(),
                u: Vec::with_capacity(nn),
                sigma: Vec::with_capacity(nn),
                eta,
                multipliers: Vec::with_capacity(nn),
                fp_residuals: residuals,
                fp_iterations: vec![k; nn],
                vi_iterations: Vec::with_capacity(nn),
            };
            for s in steps {
                state.u.push(s.u);
                state.sigma.push(s.sigma);
                state.multipliers.push(s.multipliers);
                state.vi_iterations.push(s.vi_iterations);
            }
            return Ok(state);
        }
        warm = steps.into_iter().map(|s| Some(s.u)).collect();
        eta = next;
    }
    Err(TimeError::NotConverged {
        iterations: cfg.fp_max_iters,
        residuals,
    })
}

/// Sequential march. The rectangle rule is explicit; the trapezoid rule
/// couples `η_j` to `G(σ_j, ε(u_j))` and is resolved by an inner fixed
/// point with the same tolerance and cap as the global iteration.
pub fn march_solve(problem: &Problem) -> Result<DiscreteState, TimeError> {
    let grid = *problem.grid();
    let nn = grid.n_nodes();
    let cfg = problem.spec.config;
    let mesh = problem.mesh();
    let nt = mesh.n_triangles();
    let dt = grid.dt();
    let eta_init = &problem.eta_init;

    let mut state = DiscreteState {
        times: grid.times(),
        u: Vec::with_capacity(nn),
        sigma: Vec::with_capacity(nn),
        eta: Vec::with_capacity(nn),
        multipliers: Vec::with_capacity(nn),
        fp_residuals: Vec::with_capacity(nn),
        fp_iterations: Vec::with_capacity(nn),
        vi_iterations: Vec::with_capacity(nn),
    };
    let mut history: Vec<TensorField> = Vec::with_capacity(nn);
    // Σ_{s<j} G_s.
    let mut sum = vec![SymTensor2::ZERO; nt];
    let mut warm: Option<Vec<f64>> = None;
    let vi_err = |j: usize| move |source| TimeError::Vi { node: j, t: grid.t(j), source };

    for j in 0..nn {
        let t = grid.t(j);
        let explicit = j == 0 || cfg.quadrature == Quadrature::Rectangle;
        // Part of η_j that does not depend on G_j.
        let base: TensorField = match cfg.quadrature {
            Quadrature::Rectangle => (0..nt).map(|k| eta_init[k] + dt * sum[k]).collect(),
            Quadrature::Trapezoid if j == 0 => eta_init.to_vec(),
            Quadrature::Trapezoid => (0..nt).map(|k| eta_init[k] + dt * (sum[k] - 0.5 * history[0][k])).collect(),
        };
        let (eta, step, g, inner, inner_res) = if explicit {
            let step = step_solve(problem, &base, t, warm.as_deref()).map_err(vi_err(j))?;
            let g = problem.evaluate_law(&step.sigma, &step.eps);
            (base, step, g, 0, 0.0)
        } else {
            // Predictor G_j ≈ G_{j−1}.
            let mut g = history[j - 1].clone();
            let mut eta: TensorField = (0..nt).map(|k| base[k] + 0.5 * dt * g[k]).collect();
            let mut guess = warm.clone();
            let mut iters = 0;
            let mut worst = 0.0f64;
            loop {
                if iters >= cfg.fp_max_iters {
                    return Err(TimeError::InnerNotConverged {
                        node: j,
                        iterations: iters,
                        residual: worst,
                    });
                }
                iters += 1;
                let step = step_solve(problem, &eta, t, guess.as_deref()).map_err(vi_err(j))?;
                g = problem.evaluate_law(&step.sigma, &step.eps);
                let next: TensorField = (0..nt).map(|k| base[k] + 0.5 * dt * g[k]).collect();
                let d: TensorField = next.iter().zip(&eta).map(|(a, b)| *a - *b).collect();
                let res = q_norm(mesh, &d);
                worst = res;
                if res <= cfg.fp_tol {
                    break (eta, step, g, iters, res);
                }
                guess = Some(step.u);
                eta = next;
            }
        };
        for (s, gi) in sum.iter_mut().zip(&g) {
            *s += *gi;
        }
        history.push(g);
        warm = Some(step.u.clone());
        state.u.push(step.u);
        state.sigma.push(step.sigma);
        state.eta.push(eta);
        state.multipliers.push(step.multipliers);
        state.fp_residuals.push(inner_res);
        state.fp_iterations.push(inner);
        state.vi_iterations.push(step.vi_iterations);
    }
    Ok(state)
}

/// Dispatches on `config.scheme`.
pub fn solve(problem: &Problem) -> Result<DiscreteState, TimeError> {
    match problem.spec.config.scheme {
        Scheme::Picard => picard_solve(problem),
        Scheme::March => march_solve(problem),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{v_norm, Load};
    use crate::material::{isotropic_tensor, ElasticTensor, PlaneMode};
    use crate::mesh::{build_notched_rectangle, match_contact_pairs, NotchedRectangle};

    fn problem(law: ViscoplasticLaw, traction: [f64; 2], sigma0: Option<SymTensor2>, n_steps: usize) -> Problem {
        let mesh = build_notched_rectangle(&NotchedRectangle::default()).unwrap();
        let constraints = match_contact_pairs(&mesh, 1e-9).unwrap();
        let material: MaterialField = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStrain).unwrap().into();
        let nt = mesh.n_triangles();
        Problem::new(ProblemSpec {
            mesh,
            constraints,
            material,
            law,
            loads: LoadSpec { traction: Load::constant(traction), ..LoadSpec::default() },
            u0: None,
            sigma0: sigma0.map(|s| vec![s; nt]),
            grid: TimeGrid::from_steps(1.0, n_steps).unwrap(),
            config: SolverConfig::default(),
        })
        .unwrap()
    }

    fn field(nt: usize, f: impl Fn(usize) -> SymTensor2) -> TensorField {
        (0..nt).map(f).collect()
    }

    #[test]
    fn grid_construction() {
        let g = TimeGrid::new(1.0, 0.02).unwrap();
        assert_eq!(g.n_steps(), 50);
        assert_eq!(g.times().len(), 51);
        assert!((g.t(50) - 1.0).abs() < 1e-15);
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::from_steps(-1.0, 3).is_err());
        assert!(TimeGrid::from_steps(1.0, 0).is_err());
    }

    #[test]
    fn quadrature_of_zero_and_constant_histories() {
        let nt = 3;
        let init = field(nt, |t| SymTensor2::new(t as f64, 1.0, -1.0));
        let zero = vec![vec![SymTensor2::ZERO; nt]; 6];
        let g = SymTensor2::new(0.5, -2.0, 0.25);
        let constant = vec![vec![g; nt]; 6];
        for rule in [Quadrature::Rectangle, Quadrature::Trapezoid] {
            for j in 0..6 {
                assert_eq!(lambda_quadrature(&zero, &init, rule, 0.1, j), init);
                let eta = lambda_quadrature(&constant, &init, rule, 0.1, j);
                for t in 0..nt {
                    assert!((eta[t] - (init[t] + (j as f64 * 0.1) * g)).norm() < 1e-14);
                }
            }
            let all = cumulative_quadrature(&constant, &init, rule, 0.1);
            for j in 0..6 {
                let one = lambda_quadrature(&constant, &init, rule, 0.1, j);
                for t in 0..nt {
                    assert!((all[j][t] - one[t]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn quadrature_rules_on_a_linear_history() {
        // G_s = s: trapezoid is exact (j²/2), the rectangle rule lags by j/2.
        let init = vec![SymTensor2::ZERO];
        let hist: Vec<TensorField> = (0..5).map(|s| vec![SymTensor2::new(s as f64, 0.0, 0.0)]).collect();
        for j in 0..5 {
            let tr = lambda_quadrature(&hist, &init, Quadrature::Trapezoid, 1.0, j)[0].xx;
            let re = lambda_quadrature(&hist, &init, Quadrature::Rectangle, 1.0, j)[0].xx;
            let jf = j as f64;
            assert_eq!(tr, jf * jf / 2.0);
            assert_eq!(re, jf * (jf - 1.0) / 2.0);
            let cum_t = cumulative_quadrature(&hist, &init, Quadrature::Trapezoid, 1.0);
            let cum_r = cumulative_quadrature(&hist, &init, Quadrature::Rectangle, 1.0);
            assert_eq!(cum_t[j][0].xx, tr);
            assert_eq!(cum_r[j][0].xx, re);
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let p = problem(ViscoplasticLaw::Zero, [0.0, 0.0], None, 2);
        let eta = vec![SymTensor2::ZERO; p.mesh().n_triangles()];
        let s = step_solve(&p, &eta, 0.0, None).unwrap();
        assert!(s.u.iter().all(|&x| x == 0.0));
        assert!(s.sigma.iter().all(|x| *x == SymTensor2::ZERO));
    }

    #[test]
    fn zero_law_converges_in_one_sweep() {
        let p = problem(ViscoplasticLaw::Zero, [0.0, -1.0], None, 4);
        let st = picard_solve(&p).unwrap();
        assert_eq!(st.fp_residuals, vec![0.0]);
        assert_eq!(st.fp_iterations[0], 1);
        assert_eq!(st.consistency_defect(&p), 0.0);
        let m = march_solve(&p).unwrap();
        for j in 0..st.n_nodes() {
            let d: Vec<f64> = st.u[j].iter().zip(&m.u[j]).map(|(a, b)| a - b).collect();
            assert!(v_norm(p.mesh(), &p.dofmap, &d) <= 1e-10);
        }
    }

    #[test]
    fn linear_relaxation_decays_exponentially() {
        // G = −κη exactly, so η solves η' = −κη independently of u.
        let s0 = SymTensor2::new(0.0, -0.2, 0.05);
        let p = problem(ViscoplasticLaw::linear_relaxation(0.5).unwrap(), [0.0, 0.0], Some(s0), 50);
        let st = picard_solve(&p).unwrap();
        assert!(*st.fp_residuals.last().unwrap() <= 1e-10);
        assert!(st.fp_residuals.len() <= 50);
        let area = p.mesh().total_area();
        for (j, eta) in st.eta.iter().enumerate() {
            let exact = (-0.5 * st.times[j]).exp() * s0.norm() * area.sqrt();
            assert!((q_norm(p.mesh(), eta) - exact).abs() <= 1e-4 * exact);
        }
        assert!(st.consistency_defect(&p) <= 1e-14);
    }

    #[test]
    fn picard_and_march_agree() {
        let s0 = SymTensor2::new(0.0, -0.2, 0.0);
        for rule in [Quadrature::Trapezoid, Quadrature::Rectangle] {
            let base = problem(ViscoplasticLaw::truncated_perzyna(1.0, 0.05).unwrap(), [0.0, -0.5], Some(s0), 10);
            let cfg = SolverConfig { quadrature: rule, ..base.spec.config };
            let p = base.with_config(cfg).unwrap();
            let a = picard_solve(&p).unwrap();
            let b = march_solve(&p).unwrap();
            if rule == Quadrature::Rectangle {
                assert!(b.fp_iterations.iter().all(|&k| k == 0));
            }
            assert!(max_q_diff(p.mesh(), &a.eta, &b.eta) <= 10.0 * cfg.fp_tol);
        }
    }

    #[test]
    fn nonconvergence_carries_history() {
        let s0 = SymTensor2::new(0.0, -0.2, 0.0);
        let base = problem(ViscoplasticLaw::linear_relaxation(0.5).unwrap(), [0.0, 0.0], Some(s0), 5);
        let cfg = SolverConfig { fp_max_iters: 2, ..base.spec.config };
        match picard_solve(&base.with_config(cfg).unwrap()) {
            Err(e @ TimeError::NotConverged { .. }) => {
                assert!(e.is_nonconvergence());
                if let TimeError::NotConverged { residuals, .. } = e {
                    assert_eq!(residuals.len(), 2);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let p = problem(ViscoplasticLaw::Zero, [0.0, 0.0], None, 2);
        let mut spec = p.spec.clone();
        spec.u0 = Some(vec![0.0; 3]);
        assert!(matches!(Problem::new(spec), Err(TimeError::Data(_))));
        let mut spec = p.spec.clone();
        spec.config.fp_tol = -1.0;
        assert!(matches!(Problem::new(spec), Err(TimeError::Config(_))));
        assert!(picard_solve_from(&p, vec![]).is_err());
        let e: MaterialField = ElasticTensor::from_lame(1.0, 1.0, PlaneMode::PlaneStrain).unwrap().into();
        assert_eq!(e.ellipticity_constant(), 2.0);
    }

    #[test]
    fn parsing_of_options() {
        assert_eq!("rectangle".parse::<Quadrature>().unwrap(), Quadrature::Rectangle);
        assert_eq!("march".parse::<Scheme>().unwrap(), Scheme::March);
        assert!("simpson".parse::<Quadrature>().is_err());
        assert_eq!(Quadrature::Trapezoid.to_string(), "trapezoid");
    }
}
