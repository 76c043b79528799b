//! Numerical certificates for the structural inequalities of the model.
//!
//! Every check returns a [`CheckReport`]. Randomized checks take an explicit
//! seed and draw from a ChaCha8 stream, so reports are reproducible bit for
//! bit.

use std::fmt;

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{q_norm, v_norm, DofMap, Load, LoadSpec, StiffnessOperator};
use crate::material::{isotropic_tensor, MaterialField, PlaneMode, ViscoplasticLaw, DIM};
use crate::mesh::{build_notched_rectangle, match_contact_pairs, BoundaryTag, Mesh2D, NotchedRectangle};
use crate::tensor::{SymTensor2, TensorField};
use crate::time::{
    march_solve, picard_solve, solve, step_solve, DiscreteState, Problem, ProblemSpec, Quadrature, SolverConfig,
    TimeError, TimeGrid,
};
use crate::vi::{solve_qp_activeset_oracle, solve_vi, ContactRows, VIError};

/// Relative slack in every pass decision.
pub const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// Pass iff `measured ≤ bound·(1 + 1e-9)`.
    AtMost,
    /// Pass iff `measured ≥ bound·(1 − 1e-9)`.
    AtLeast,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::AtMost => "<=",
            Sense::AtLeast => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub sense: Sense,
    pub passed: bool,
    pub seed: Option<u64>,
    /// Inputs that realize the worst measured value.
    pub witness: String,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, measured: f64, bound: f64, sense: Sense) -> Self {
        let passed = match sense {
            Sense::AtMost => measured <= bound * (1.0 + REL_SLACK) || (bound == 0.0 && measured == 0.0),
            Sense::AtLeast => measured >= bound * (1.0 - REL_SLACK),
        };
        CheckReport {
            name: name.into(),
            measured,
            bound,
            sense,
            passed,
            seed: None,
            witness: String::new(),
        }
    }

    pub fn failed(name: impl Into<String>, witness: impl Into<String>) -> Self {
        CheckReport {
            witness: witness.into(),
            passed: false,
            ..CheckReport::new(name, f64::NAN, f64::NAN, Sense::AtMost)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_witness(mut self, witness: impl Into<String>) -> Self {
        self.witness = witness.into();
        self
    }

    pub const CSV_HEADER: &'static str = "name,measured,sense,bound,passed,seed,witness";

    pub fn csv_row(&self) -> String {
        let seed = self.seed.map_or_else(String::new, |s| s.to_string());
        format!(
            "{},{:e},{},{:e},{},{},\"{}\"",
            self.name,
            self.measured,
            self.sense.symbol(),
            self.bound,
            self.passed,
            seed,
            self.witness.replace('"', "'")
        )
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<26} {:>14.6e} {} {:<14.6e} {}",
            self.name,
            self.measured,
            self.sense.symbol(),
            self.bound,
            if self.passed { "PASS" } else { "FAIL" }
        )?;
        if !self.witness.is_empty() {
            write!(f, "  [{}]", self.witness)?;
        }
        Ok(())
    }
}

/// Table printed by the `verify` subcommand.
pub fn format_table(reports: &[CheckReport]) -> String {
    let mut out = format!("{:<26} {:>14}    {:<14} {}\n", "check", "measured", "bound", "result");
    for r in reports {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

pub fn format_csv(reports: &[CheckReport]) -> String {
    let mut out = String::from(CheckReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn random_field(nt: usize, rng: &mut impl Rng) -> TensorField {
    (0..nt)
        .map(|_| SymTensor2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Nodal interpolant of the uniform strain `ε` that vanishes on the FIXED
/// boundary. Exists when that boundary is one horizontal line `x2 = c` and
/// `ε11 = 0`: then `u = (2ε12 (x2 − c), ε22 (x2 − c))`.
pub fn uniform_strain_witness(mesh: &Mesh2D, dofmap: &DofMap, eps: &SymTensor2) -> Option<Vec<f64>> {
    let fixed = mesh.nodes_tagged(BoundaryTag::Fixed);
    let c = mesh.node(*fixed.iter().next()?)[1];
    if fixed.iter().any(|&i| mesh.node(i)[1] != c) || eps.xx.abs() > 1e-12 * eps.norm() {
        return None;
    }
    Some(dofmap.interpolate(mesh, |p| [2.0 * eps.xy * (p[1] - c), eps.yy * (p[1] - c)]))
}

/// Unit tensor in the lowest eigenspace of `E` with `ε11 = 0`, if any.
fn softest_shear(material: &MaterialField) -> Option<SymTensor2> {
    let eig = SymmetricEigen::new(material.default_tensor().mandel_matrix());
    let lmin = eig.eigenvalues.min();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let vecs: Vec<[f64; 3]> = (0..3)
        .filter(|&k| (eig.eigenvalues[k] - lmin).abs() <= 1e-12 * scale)
        .map(|k| {
            let c = eig.eigenvectors.column(k);
            [c[0], c[1], c[2]]
        })
        .collect();
    let m = match vecs.as_slice() {
        [v] if v[0].abs() <= 1e-12 => *v,
        [v, w, ..] => {
            let c = [0, 1, 2].map(|i| v[0] * w[i] - w[0] * v[i]);
            if c.iter().all(|x| x.abs() <= 1e-14) {
                *v
            } else {
                c
            }
        }
        _ => return None,
    };
    let t = SymTensor2::from_mandel(m);
    let n = t.norm();
    (n > 0.0).then(|| (1.0 / n) * t)
}

/// `min (u·A u) / ‖u‖_V²` over random `u` and, when one exists, the
/// uniform-shear witness; must not fall below `m_E`.
pub fn check_monotonicity(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    a: &StiffnessOperator,
    material: &MaterialField,
    samples: usize,
    seed: u64,
) -> CheckReport {
    let m_e = material.ellipticity_constant();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = |u: &[f64]| {
        let v = v_norm(mesh, dofmap, u);
        a.energy_inner(u, u) / (v * v)
    };
    let mut worst = f64::INFINITY;
    let mut witness = String::from("none");
    for k in 0..samples.max(1) {
        let u = random_vec(dofmap.n_free(), &mut rng);
        let r = ratio(&u);
        if r < worst {
            worst = r;
            witness = format!("random sample {k}");
        }
    }
    if let Some(u) = softest_shear(material).and_then(|e| uniform_strain_witness(mesh, dofmap, &e)) {
        let r = ratio(&u);
        if r <= worst {
            worst = r;
            witness = format!("uniform shear, ratio - m_E = {:e}", r - m_e);
        }
    }
    CheckReport::new("monotonicity", worst, m_e, Sense::AtLeast)
        .with_seed(seed)
        .with_witness(witness)
}

/// Both sides of `√m_E ‖v‖_V ≤ ‖v‖_E ≤ √(d ‖E‖_Q∞) ‖v‖_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormEquivalence {
    pub lower: CheckReport,
    pub upper: CheckReport,
    /// Best ratios reached by the uniform-strain witnesses.
    pub lower_witness: Option<f64>,
    pub upper_witness: Option<f64>,
}

impl NormEquivalence {
    pub fn reports(&self) -> [CheckReport; 2] {
        [self.lower.clone(), self.upper.clone()]
    }
}

pub fn check_norm_equivalence(
    mesh: &Mesh2D,
    dofmap: &DofMap,
    a: &StiffnessOperator,
    material: &MaterialField,
    samples: usize,
    seed: u64,
) -> NormEquivalence {
    let lo = material.ellipticity_constant().sqrt();
    let hi = (DIM as f64 * material.q_inf_norm()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratio = |u: &[f64]| {
        let v = v_norm(mesh, dofmap, u);
        if v == 0.0 {
            None
        } else {
            Some(a.energy_inner(u, u).max(0.0).sqrt() / v)
        }
    };
    let (mut min, mut max) = (f64::INFINITY, 0.0f64);
    for _ in 0..samples.max(1) {
        if let Some(r) = ratio(&random_vec(dofmap.n_free(), &mut rng)) {
            min = min.min(r);
            max = max.max(r);
        }
    }
    let lower_witness = softest_shear(material)
        .and_then(|e| uniform_strain_witness(mesh, dofmap, &e))
        .and_then(|u| ratio(&u));
    let upper_witness =
        uniform_strain_witness(mesh, dofmap, &SymTensor2::new(0.0, 1.0, 0.0)).and_then(|u| ratio(&u));
    if let Some(w) = lower_witness {
        min = min.min(w);
    }
    if let Some(w) = upper_witness {
        max = max.max(w);
    }
    NormEquivalence {
        lower: CheckReport::new("norm_equivalence_lower", min, lo, Sense::AtLeast)
            .with_seed(seed)
            .with_witness(format!("sqrt(m_E) = {lo:e}")),
        upper: CheckReport::new("norm_equivalence_upper", max, hi, Sense::AtMost)
            .with_seed(seed)
            .with_witness(format!("sqrt(d q_inf) = {hi:e}")),
        lower_witness,
        upper_witness,
    }
}

/// `C = 1/m_E + d ‖E‖_Q∞ / m_E + 1`, from the material alone.
pub fn lemma2_constant(material: &MaterialField) -> f64 {
    let m_e = material.ellipticity_constant();
    let q = material.q_inf_norm();
    1.0 / m_e + DIM as f64 * q / m_e + 1.0
}

/// `(‖σ¹ − σ²‖_Q + ‖ε(u¹) − ε(u²)‖_Q) / ‖η¹ − η²‖_Q` at time `t`, against
/// [`lemma2_constant`]. Equal histories give ratio 0.
pub fn check_lemma2(problem: &Problem, eta1: &[SymTensor2], eta2: &[SymTensor2], t: f64) -> Result<CheckReport, VIError> {
    let c = lemma2_constant(&problem.spec.material);
    let mesh = problem.mesh();
    let diff = |x: &[SymTensor2], y: &[SymTensor2]| -> TensorField { x.iter().zip(y).map(|(a, b)| *a - *b).collect() };
    let d_eta = q_norm(mesh, &diff(eta1, eta2));
    if d_eta == 0.0 {
        return Ok(CheckReport::new("lemma2", 0.0, c, Sense::AtMost).with_witness("equal histories"));
    }
    let s1 = step_solve(problem, eta1, t, None)?;
    let s2 = step_solve(problem, eta2, t, None)?;
    let num = q_norm(mesh, &diff(&s1.sigma, &s2.sigma)) + q_norm(mesh, &diff(&s1.eps, &s2.eps));
    Ok(CheckReport::new("lemma2", num / d_eta, c, Sense::AtMost).with_witness(format!("t = {t}")))
}

/// Worst stability ratio over `samples` random history pairs.
pub fn check_lemma2_random(problem: &Problem, samples: usize, t: f64, seed: u64) -> Result<CheckReport, VIError> {
    let nt = problem.mesh().n_triangles();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: Option<CheckReport> = None;
    let mut violations = 0;
    for k in 0..samples.max(1) {
        let e1 = random_field(nt, &mut rng);
        let e2 = random_field(nt, &mut rng);
        let r = check_lemma2(problem, &e1, &e2, t)?;
        if !r.passed {
            violations += 1;
        }
        if worst.as_ref().is_none_or(|w| r.measured > w.measured) {
            worst = Some(r.with_witness(format!("pair {k} at t = {t}")));
        }
    }
    let w = worst.expect("at least one sample");
    let witness = format!("{}, {violations} violations in {} pairs", w.witness, samples.max(1));
    Ok(CheckReport::new("lemma2", w.measured, w.bound, Sense::AtMost)
        .with_seed(seed)
        .with_witness(witness))
}

/// Per node and pair: gap residual, dual sign and complementarity product.
/// Tangential contact forces vanish by construction (the multiplier acts
/// along the normal only) and contribute an exact zero.
pub fn check_complementarity(state: &DiscreteState, rows: &ContactRows, tol: f64) -> CheckReport {
    let tangential = 0.0f64;
    let mut worst = tangential;
    let mut witness = String::from("no contact pairs");
    for j in 0..state.n_nodes() {
        let slack = rows.slack(&state.u[j]);
        for (p, (&s, &l)) in slack.iter().zip(&state.multipliers[j]).enumerate() {
            for (kind, v) in [("gap", (-s).max(0.0)), ("sign", (-l).max(0.0)), ("product", (l * s).abs())] {
                if v > worst || witness == "no contact pairs" {
                    worst = worst.max(v);
                    witness = format!("node {j}, pair {p}, {kind}");
                }
            }
        }
    }
    CheckReport::new("complementarity", worst, tol, Sense::AtMost).with_witness(witness)
}

/// Tail median of `res_{k+1}/res_k`. A history that reaches an exact zero
/// has converged and passes.
pub fn measure_contraction(residuals: &[f64]) -> CheckReport {
    let name = "contraction";
    // Strictly below one; the pass flag is set explicitly below.
    let bound = 1.0;
    if let Some(z) = residuals.iter().position(|&r| r == 0.0) {
        return CheckReport::new(name, 0.0, bound, Sense::AtMost)
            .with_witness(format!("exact fixed point after {} sweeps", z + 1));
    }
    if residuals.len() < 3 {
        return CheckReport::failed(name, format!("insufficient data: {} residuals", residuals.len()));
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let k = ratios.len();
    let tail_len = 3.max(k.div_ceil(2)).min(k);
    let mut tail = ratios[k - tail_len..].to_vec();
    tail.sort_by(f64::total_cmp);
    let median = if tail_len % 2 == 1 {
        tail[tail_len / 2]
    } else {
        0.5 * (tail[tail_len / 2 - 1] + tail[tail_len / 2])
    };
    let mut report = CheckReport::new(name, median, bound, Sense::AtMost);
    report.passed = median < 1.0;
    report.with_witness(format!(
        "median of the last {tail_len} of {k} ratios, max {:e}",
        tail.last().copied().unwrap_or(f64::NAN)
    ))
}

/// Self-convergence of the terminal displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub dts: Vec<f64>,
    /// `‖u_N(Δt) − u_N(ref)‖_V`.
    pub errors: Vec<f64>,
    pub order: f64,
    pub monotone: bool,
    pub report: CheckReport,
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_order(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn expected_order(rule: Quadrature) -> f64 {
    match rule {
        Quadrature::Rectangle => 1.0,
        Quadrature::Trapezoid => 2.0,
    }
}

/// Runs the problem on every step in `dts` and on `ref_dt`, and fits the
/// order of the terminal error. The report passes when the fitted order is
/// within 0.3 of the quadrature's nominal order and errors decrease, or
/// when every error is at solver-tolerance level (time-independent data).
pub fn convergence_study(problem: &Problem, dts: &[f64], ref_dt: f64) -> Result<ConvergenceStudy, TimeError> {
    if dts.len() < 3 || dts.windows(2).any(|w| w[1] >= w[0]) || dts.iter().any(|&d| d <= ref_dt) {
        return Err(TimeError::Grid(
            "the study needs at least three decreasing steps, all above the reference step".into(),
        ));
    }
    let horizon = problem.grid().horizon();
    let terminal = |dt: f64| -> Result<Vec<f64>, TimeError> {
        let p = problem.with_grid(TimeGrid::new(horizon, dt)?);
        let state = solve(&p)?;
        Ok(state.u.last().cloned().unwrap_or_default())
    };
    let reference = terminal(ref_dt)?;
    let mesh = problem.mesh();
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let u = terminal(dt)?;
        let d: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
        errors.push(v_norm(mesh, &problem.dofmap, &d));
    }
    let rule = problem.spec.config.quadrature;
    let expected = expected_order(rule);
    let scale = v_norm(mesh, &problem.dofmap, &reference).max(f64::MIN_POSITIVE);
    let floor = 1e-8 * scale;
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let (order, report) = if errors.iter().all(|&e| e <= floor) {
        let worst = errors.iter().fold(0.0f64, |m, &e| m.max(e));
        (
            f64::NAN,
            CheckReport::new("convergence_order", worst, floor, Sense::AtMost)
                .with_witness("errors at solver tolerance for every step"),
        )
    } else {
        let order = fit_order(dts, &errors);
        let mut r = CheckReport::new(format!("convergence_order_{rule}"), (order - expected).abs(), 0.3, Sense::AtMost)
            .with_witness(format!("fitted order {order:.4}, nominal {expected}"));
        if !monotone {
            r.passed = false;
            r.witness.push_str(", errors not monotone");
        }
        (order, r)
    };
    Ok(ConvergenceStudy {
        dts: dts.to_vec(),
        errors,
        order,
        monotone,
        report,
    })
}

/// Outcome of comparing the VI solver with active-set enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub report: CheckReport,
    pub max_v_error: f64,
    pub active_sets_match: bool,
    pub ever_active: bool,
}

/// Compares `solve_vi` with the enumeration oracle for `f(t)` scaled by
/// random factors in `[0.1, 10]`, with a zero history term.
pub fn check_oracle_equivalence(problem: &Problem, scalings: usize, seed: u64) -> Result<OracleComparison, VIError> {
    let spec = &problem.spec;
    let base = crate::assembly::assemble_force(&spec.mesh, &problem.dofmap, &spec.loads, 0.0);
    let dense = problem.stiffness.matrix().to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut matches = true;
    let mut ever_active = false;
    let mut witness = String::from("all scalings agree");
    for k in 0..scalings.max(1) {
        let s: f64 = 10f64.powf(rng.gen_range(-1.0..1.0));
        let b: Vec<f64> = base.iter().map(|x| s * x).collect();
        let res = solve_vi(&problem.stiffness, &b, &problem.rows, &spec.config.vi)?;
        let oracle = solve_qp_activeset_oracle(&dense, &b, &problem.rows)?;
        let d: Vec<f64> = res.u.iter().zip(&oracle.u).map(|(x, y)| x - y).collect();
        let err = v_norm(&spec.mesh, &problem.dofmap, &d);
        ever_active |= oracle.active.iter().any(|&a| a);
        if res.active != oracle.active {
            matches = false;
            witness = format!("scaling {k} (factor {s:.4}): active sets differ");
        } else if err > max_err && matches {
            witness = format!("worst at scaling {k} (factor {s:.4})");
        }
        max_err = max_err.max(err);
    }
    let mut report = CheckReport::new("oracle_equivalence", max_err, 1e-8, Sense::AtMost)
        .with_seed(seed)
        .with_witness(witness);
    report.passed &= matches;
    Ok(OracleComparison {
        report,
        max_v_error: max_err,
        active_sets_match: matches,
        ever_active,
    })
}

/// The notched toy body: default geometry, `E = 1`, `ν = 0.3`, plane
/// strain, uniform top traction and uniform initial stress.
pub fn toy_problem(
    law: ViscoplasticLaw,
    traction: [f64; 2],
    sigma0: SymTensor2,
    grid: TimeGrid,
    config: SolverConfig,
) -> Result<Problem, TimeError> {
    let mesh = build_notched_rectangle(&NotchedRectangle::default())
        .map_err(|e| TimeError::Data(e.to_string()))?;
    let constraints = match_contact_pairs(&mesh, 1e-9 * mesh.diameter()).map_err(|e| TimeError::Data(e.to_string()))?;
    let material: MaterialField = isotropic_tensor(1.0, 0.3, PlaneMode::PlaneStrain)
        .map_err(|e| TimeError::Data(e.to_string()))?
        .into();
    let nt = mesh.n_triangles();
    Problem::new(ProblemSpec {
        mesh,
        constraints,
        material,
        law,
        loads: LoadSpec {
            traction: Load::constant(traction),
            ..LoadSpec::default()
        },
        u0: None,
        sigma0: (sigma0 != SymTensor2::ZERO).then(|| vec![sigma0; nt]),
        grid,
        config,
    })
}

/// The checks run by `verify`, all on toy problems and all seeded from `seed`.
pub fn default_suite(seed: u64) -> Result<Vec<CheckReport>, TimeError> {
    let vi_err = |source| TimeError::Vi { node: 0, t: 0.0, source };
    let cfg = SolverConfig::default();
    let grid = TimeGrid::new(1.0, 0.02)?;
    let compressed = toy_problem(ViscoplasticLaw::Zero, [0.0, -1.0], SymTensor2::ZERO, grid, cfg)?;
    let mesh = compressed.mesh();
    let mut reports = Vec::new();

    reports.push(check_monotonicity(
        mesh,
        &compressed.dofmap,
        &compressed.stiffness,
        &compressed.spec.material,
        200,
        seed,
    ));
    let ne = check_norm_equivalence(
        mesh,
        &compressed.dofmap,
        &compressed.stiffness,
        &compressed.spec.material,
        200,
        seed.wrapping_add(1),
    );
    reports.extend(ne.reports());
    reports.push(check_lemma2_random(&compressed, 100, 0.0, seed.wrapping_add(2)).map_err(vi_err)?);
    reports.push(
        check_oracle_equivalence(&compressed, 20, seed.wrapping_add(3))
            .map_err(vi_err)?
            .report,
    );

    let relax = toy_problem(
        ViscoplasticLaw::linear_relaxation(0.5).map_err(|e| TimeError::Data(e.to_string()))?,
        [0.0, -0.5],
        SymTensor2::new(0.0, -0.2, 0.05),
        grid,
        cfg,
    )?;
    let picard = picard_solve(&relax)?;
    reports.push(check_complementarity(&picard, &relax.rows, 1e-8));
    reports.push(measure_contraction(&picard.fp_residuals));
    let march = march_solve(&relax)?;
    let gap = picard
        .eta
        .iter()
        .zip(&march.eta)
        .map(|(a, b)| {
            let d: TensorField = a.iter().zip(b).map(|(x, y)| *x - *y).collect();
            q_norm(relax.mesh(), &d)
        })
        .fold(0.0, f64::max);
    reports.push(
        CheckReport::new("picard_vs_march", gap, 10.0 * cfg.fp_tol, Sense::AtMost).with_witness("max_j |eta diff|_Q"),
    );
    Ok(reports)
}

/// `max_j ‖u^a_j − u^b_j‖_V`.
pub fn trajectory_distance(problem: &Problem, a: &DiscreteState, b: &DiscreteState) -> f64 {
    a.u.iter()
        .zip(&b.u)
        .map(|(x, y)| {
            let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            v_norm(problem.mesh(), &problem.dofmap, &d)
        })
        .fold(0.0, f64::max)
}

/// `max_j ‖η^a_j − η^b_j‖_Q`.
pub fn history_distance(problem: &Problem, a: &DiscreteState, b: &DiscreteState) -> f64 {
    a.eta
        .iter()
        .zip(&b.eta)
        .map(|(x, y)| {
            let d: TensorField = x.iter().zip(y).map(|(p, q)| *p - *q).collect();
            q_norm(problem.mesh(), &d)
        })
        .fold(0.0, f64::max)
}
