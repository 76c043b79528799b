//! Legacy VTK snapshots and the per-step CSV time series.

use std::fmt::Write as _;

use crate::assembly::{q_norm, v_norm};
use crate::io::config::OutField;
use crate::tensor::SymTensor2;
use crate::time::{DiscreteState, Problem};

/// `-0` prints as `0` so that output does not depend on the sign of zero.
fn num(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:?}")
    }
}

fn tensor_block(out: &mut String, name: &str, field: &[SymTensor2]) {
    let _ = writeln!(out, "TENSORS {name} double");
    for s in field {
        let _ = writeln!(out, "{} {} 0", num(s.xx), num(s.xy));
        let _ = writeln!(out, "{} {} 0", num(s.xy), num(s.yy));
        let _ = writeln!(out, "0 0 0");
    }
}

/// Nodal contact pressure: `λ_p` on both nodes of pair `p`, zero elsewhere.
pub fn nodal_pressure(problem: &Problem, multipliers: &[f64]) -> Vec<f64> {
    let mut lam = vec![0.0; problem.mesh().n_nodes()];
    for (pair, &l) in problem.spec.constraints.pairs().iter().zip(multipliers) {
        lam[pair.a] = l;
        lam[pair.b] = l;
    }
    lam
}

/// Legacy ASCII unstructured grid holding grid node `j` of `state`.
pub fn vtk_string(problem: &Problem, state: &DiscreteState, j: usize, fields: &[OutField]) -> String {
    let mesh = problem.mesh();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "viscontact t={}", num(state.times[j]));
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{} {} 0", num(p[0]), num(p[1]));
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }

    let has = |f| fields.contains(&f);
    if has(OutField::U) || has(OutField::Lambda) {
        let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
        if has(OutField::U) {
            let _ = writeln!(out, "VECTORS u double");
            for d in problem.dofmap.expand(&state.u[j]) {
                let _ = writeln!(out, "{} {} 0", num(d[0]), num(d[1]));
            }
        }
        if has(OutField::Lambda) {
            let _ = writeln!(out, "SCALARS lambda double 1");
            let _ = writeln!(out, "LOOKUP_TABLE default");
            for l in nodal_pressure(problem, &state.multipliers[j]) {
                let _ = writeln!(out, "{}", num(l));
            }
        }
    }
    if has(OutField::Sigma) || has(OutField::Eta) {
        let _ = writeln!(out, "CELL_DATA {nt}");
        if has(OutField::Sigma) {
            tensor_block(&mut out, "sigma", &state.sigma[j]);
        }
        if has(OutField::Eta) {
            tensor_block(&mut out, "eta", &state.eta[j]);
        }
    }
    out
}

pub const TIMESERIES_HEADER: &str = "t,max_gap_violation,total_contact_force,v_norm_u,q_norm_sigma,fp_iterations";

/// One CSV row per grid node.
pub fn timeseries_string(problem: &Problem, state: &DiscreteState) -> String {
    let mesh = problem.mesh();
    let mut out = String::from(TIMESERIES_HEADER);
    out.push('\n');
    for j in 0..state.n_nodes() {
        let violation = problem
            .rows
            .slack(&state.u[j])
            .into_iter()
            .map(|s| (-s).max(0.0))
            .fold(0.0, f64::max);
        let force: f64 = state.multipliers[j].iter().sum();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(state.times[j]),
            num(violation),
            num(force),
            num(v_norm(mesh, &problem.dofmap, &state.u[j])),
            num(q_norm(mesh, &state.sigma[j])),
            state.fp_iterations[j]
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::config::RunConfig;
    use crate::time::solve;

    fn small_run() -> (Problem, DiscreteState) {
        let mut cfg = RunConfig::default();
        cfg.geometry.resolution = 2;
        cfg.dt = 0.5;
        let (mesh, _) = cfg.load_mesh(std::path::Path::new(".")).unwrap();
        let p = cfg.build_problem(mesh).unwrap();
        let s = solve(&p).unwrap();
        (p, s)
    }

    #[test]
    fn vtk_sections_follow_fields() {
        let (p, s) = small_run();
        let full = vtk_string(&p, &s, 1, &OutField::ALL);
        let nn = p.mesh().n_nodes();
        let nt = p.mesh().n_triangles();
        assert!(full.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(full.contains(&format!("POINTS {nn} double\n")));
        assert!(full.contains(&format!("CELLS {nt} {}\n", 4 * nt)));
        for key in ["VECTORS u", "SCALARS lambda", "TENSORS sigma", "TENSORS eta"] {
            assert!(full.contains(key), "{key}");
        }
        // header, points, cells, types, point data (u, lambda), cell data (sigma, eta)
        assert_eq!(full.lines().count(), 4 + (1 + nn) + 2 * (1 + nt) + (1 + 1 + nn + 2 + nn) + (1 + 2 * (1 + 3 * nt)));

        let only_u = vtk_string(&p, &s, 1, &[OutField::U]);
        assert!(only_u.contains("VECTORS u"));
        assert!(!only_u.contains("lambda") && !only_u.contains("CELL_DATA"));
        let none = vtk_string(&p, &s, 1, &[]);
        assert!(!none.contains("POINT_DATA") && !none.contains("CELL_DATA"));
    }

    #[test]
    fn pressure_sits_on_pair_nodes() {
        let (p, _) = small_run();
        let m: Vec<f64> = (0..p.rows.len()).map(|i| 1.0 + i as f64).collect();
        let lam = nodal_pressure(&p, &m);
        let total: f64 = lam.iter().sum();
        assert_eq!(total, 2.0 * m.iter().sum::<f64>());
    }

    #[test]
    fn timeseries_has_one_row_per_node() {
        let (p, s) = small_run();
        let csv = timeseries_string(&p, &s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TIMESERIES_HEADER);
        assert_eq!(lines.len(), s.n_nodes() + 1);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 6);
        }
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(0.5), "0.5");
    }
}
