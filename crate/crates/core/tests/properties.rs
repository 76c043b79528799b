use proptest::prelude::*;

use viscontact::assembly::{assemble_force, strain, DofMap, Load, LoadSpec};
use viscontact::io::parse_config;
use viscontact::material::ViscoplasticLaw;
use viscontact::mesh::{build_notched_rectangle, load_mesh, match_contact_pairs, write_mesh, NotchedRectangle};
use viscontact::tensor::SymTensor2;
use viscontact::time::{Problem, SolverConfig, TimeGrid};
use viscontact::verification::toy_problem;
use viscontact::vi::{project_k, solve_vi, VIConfig};

fn toy() -> Problem {
    toy_problem(
        ViscoplasticLaw::Zero,
        [0.0, -1.0],
        SymTensor2::ZERO,
        TimeGrid::from_steps(1.0, 1).unwrap(),
        SolverConfig::default(),
    )
    .unwrap()
}

fn energy(p: &Problem, b: &[f64], u: &[f64]) -> f64 {
    0.5 * p.stiffness.energy_inner(u, u) - u.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mesh_round_trips(resolution in 2usize..8, gap in 0.0f64..0.05) {
        let geom = NotchedRectangle { resolution, gap, ..NotchedRectangle::default() };
        let mesh = build_notched_rectangle(&geom).unwrap();
        let loaded = load_mesh(&write_mesh(&mesh)).unwrap();
        prop_assert_eq!(&loaded.mesh, &mesh);
        let pairs = match_contact_pairs(&mesh, 1e-9 * mesh.diameter()).unwrap();
        prop_assert_eq!(pairs.len(), resolution - 1);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(scale in -1.0f64..1.0) {
        let p = toy();
        let v: Vec<f64> = (0..p.dofmap.n_free()).map(|i| scale * ((i as f64) * 0.37).sin()).collect();
        let w = project_k(&v, &p.rows);
        for s in p.rows.slack(&w) {
            prop_assert!(s >= -1e-14);
        }
        let w2 = project_k(&w, &p.rows);
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn rigid_translation_has_no_strain(ax in -1.0f64..1.0, ay in -1.0f64..1.0) {
        let mesh = build_notched_rectangle(&NotchedRectangle::default()).unwrap();
        let dofs = DofMap::all_free(&mesh);
        let u = dofs.interpolate(&mesh, |_| [ax, ay]);
        for e in strain(&mesh, &dofs, &u) {
            prop_assert!(e.norm() <= 1e-13);
        }
    }

    #[test]
    fn vi_solution_beats_projected_points(tx in -1.0f64..1.0, ty in -2.0f64..0.5, k in 0usize..50) {
        let p = toy();
        let loads = LoadSpec { traction: Load::constant([tx, ty]), ..LoadSpec::default() };
        let b = assemble_force(p.mesh(), &p.dofmap, &loads, 0.0);
        let sol = solve_vi(&p.stiffness, &b, &p.rows, &VIConfig::default()).unwrap();
        for s in p.rows.slack(&sol.u) {
            prop_assert!(s >= -1e-12);
        }
        let j = energy(&p, &b, &sol.u);
        let mut trial = sol.u.clone();
        let n = trial.len();
        trial[k % n] += 1e-3;
        let trial = project_k(&trial, &p.rows);
        prop_assert!(energy(&p, &b, &trial) >= j - 1e-12 * (1.0 + j.abs()));
    }

    #[test]
    fn config_echo_round_trips(dt_steps in 1usize..100, kappa in 0.01f64..10.0, tol in 1e-14f64..1e-6) {
        let text = format!("time.dt = {:?}\nlaw.kind = linear\nlaw.kappa = {kappa:?}\nfp.tol = {tol:?}\n", 1.0 / dt_steps as f64);
        let cfg = parse_config(&text).unwrap();
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }
}
