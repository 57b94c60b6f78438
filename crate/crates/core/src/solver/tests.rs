use super::*;
use crate::fv::{PatchCondition, VelocityCondition};
use crate::geometry::{RigidMotion, TriSurface};
use crate::linalg::dense_solve;
use crate::mesh::{build_structured_grid, BoxSpec, PatchKind};

fn physics(mu: f64) -> Physics {
    Physics {
        material: MaterialProps::new(1.0, 1000.0, 0.1).unwrap(),
        rheology: PowerLawModel::newtonian(mu).unwrap(),
        shift: ArrheniusShift::none(),
        body_force: Vec3::zeros(),
        heat_source: 0.0,
    }
}

/// Square section one cell deep with symmetry front and back.
fn section(n: usize, min: f64, max: f64) -> Mesh {
    let dz = (max - min) / n as f64;
    let mut m = build_structured_grid(&BoxSpec::new(Vec3::new(min, min, 0.0), Vec3::new(max, max, dz), [n, n, 1])).unwrap();
    m.set_patch_kind("zmin", PatchKind::Symmetry).unwrap();
    m.set_patch_kind("zmax", PatchKind::Symmetry).unwrap();
    m
}

fn lid_bcs(m: &Mesh, speed: f64) -> BoundaryConditions {
    let mut bcs = BoundaryConditions::from_kinds(m);
    let lid = RigidMotion::new(Vec3::z(), Vec3::zeros(), 0.0, Vec3::new(speed, 0.0, 0.0)).unwrap();
    bcs.set(m, "ymax", PatchCondition { velocity: VelocityCondition::Fixed(lid), thermal: ThermalCondition::Insulated })
        .unwrap();
    bcs
}

fn solver(m: Mesh, bcs: BoundaryConditions, cfg: SolverConfig, bodies: Vec<BodySetup>) -> Solver {
    let fs = FieldSet::uniform(&m, Vec3::zeros(), 300.0, 1.0);
    Solver::new(m, bcs, physics(1.0), cfg, bodies, StencilCriteria::default(), fs).unwrap()
}

fn cylinder_bodies(ri: f64, ro: f64, omega: f64) -> Vec<BodySetup> {
    let rot = RigidMotion::rotation(Vec3::z(), Vec3::zeros(), omega).unwrap();
    let inner = ImmersedBody::new("inner", TriSurface::cylinder(Vec3::zeros(), Vec3::z(), ri, -1.0, 1.0, 256).unwrap())
        .with_motion(rot);
    let outer = ImmersedBody::new("outer", TriSurface::cylinder(Vec3::zeros(), Vec3::z(), ro, -1.0, 1.0, 256).unwrap())
        .inverted();
    vec![
        BodySetup { body: inner, moves: false, temperature: None },
        BodySetup { body: outer, moves: false, temperature: None },
    ]
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

#[test]
fn config_validation_collects_every_problem() {
    let cfg = SolverConfig { dt: -1.0, velocity_relaxation: 1.5, pressure_tolerance: 0.0, ..Default::default() };
    match cfg.validate() {
        Err(Error::Config(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
        other => panic!("{other:?}"),
    }
    assert!(SolverConfig::default().validate().is_ok());
}

#[test]
fn predictor_with_zero_data_returns_zero() {
    let m = section(5, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let fs = FieldSet::uniform(&m, Vec3::zeros(), 300.0, 1.0);
    let sys = assemble_momentum(&MomentumInputs {
        mesh: &m,
        bcs: &bcs,
        scheme: Scheme::default(),
        density: 1.0,
        mu: &fs.mu,
        phi: &fs.phi,
        u: &fs.u,
        u_old: &fs.u,
        u_old2: None,
        body_force: Vec3::zeros(),
        dt: 0.1,
        time: 0.1,
    })
    .unwrap();
    let zero = vec![Vec3::zeros(); m.n_cells()];
    let (u, _) = momentum_predictor(&sys, &zero, &zero, &SolveControls::bicgstab(1e-12)).unwrap();
    assert!(u.iter().all(|v| *v == Vec3::zeros()));
    // With H = 0 and b = 0 the intermediate velocity vanishes as well.
    let inter = intermediate_velocity(&sys, &zero, None);
    assert!(inter.iter().all(|v| *v == Vec3::zeros()));
}

#[test]
fn intermediate_velocity_without_surfaces_is_hbya() {
    let m = section(4, 0.0, 1.0);
    let bcs = lid_bcs(&m, 1.0);
    let s = solver(m, bcs, SolverConfig { dt: 0.01, ..Default::default() }, vec![]);
    let sys = s.assemble(&s.fields().u, 0.01).unwrap();
    let u: Vec<Vec3> = s.mesh.centres().iter().map(|x| Vec3::new(x.y, -x.x, 0.0)).collect();
    assert_eq!(intermediate_velocity(&sys, &u, None), sys.hbya(&u, None));
}

/// Manufactured starred velocity with a known divergence, open on `xmax`.
fn manufactured_pressure_case(outflow: bool) -> (Mesh, BoundaryConditions, Vec<f64>, Vec<f64>) {
    let mut m = build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(1.2, 1.0, 0.5), [6, 5, 2])).unwrap();
    if outflow {
        m.set_patch_kind("xmax", PatchKind::Outflow).unwrap();
    }
    let bcs = BoundaryConditions::from_kinds(&m);
    let u: Vec<Vec3> = m.centres().iter().map(|x| Vec3::new(x.x * x.y, x.z - x.x * x.x, 0.3 * x.y)).collect();
    let phi = predicted_flux(&m, &bcs, &u, 0.0);
    let kappa: Vec<f64> = m.centres().iter().map(|x| 0.5 + x.x + 0.25 * x.y * x.z).collect();
    (m, bcs, phi, kappa)
}

#[test]
fn pressure_matches_dense_factorization() {
    for outflow in [true, false] {
        let (m, bcs, phi, kappa) = manufactured_pressure_case(outflow);
        let mut phi = phi;
        if !outflow {
            // Make the closed-domain data compatible.
            let total: f64 = flux_divergence(&m, &phi).iter().sum();
            let f0 = m.n_internal_faces();
            phi[f0] -= total;
        }
        let reference = if outflow { None } else { Some(0) };
        let op = pressure_operator(&m, &bcs, &kappa, reference);
        let controls = SolveControls { preconditioner: Preconditioner::Ilu0, ..SolveControls::cg(1e-14) };
        let sol = pressure_solve(&m, &bcs, &op, &kappa, &phi, &vec![0.0; m.n_cells()], &controls).unwrap();
        let rhs: Vec<f64> = flux_divergence(&m, &phi).iter().map(|v| -v).collect();
        let dense = dense_solve(&op.matrix, &rhs).unwrap();
        let scale = max_abs(dense.iter().copied());
        for (a, b) in sol.p.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b} (outflow {outflow})");
        }
        // The corrected fluxes are conservative in every cell.
        let div = flux_divergence(&m, &sol.phi);
        assert!(max_abs(div) < 1e-10 * max_abs(phi.iter().copied()));
    }
}

#[test]
fn divergence_free_data_gives_the_gauge_pressure() {
    let m = section(6, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let phi = vec![0.0; m.n_faces()];
    let kappa = vec![1.0; m.n_cells()];
    let op = pressure_operator(&m, &bcs, &kappa, Some(3));
    let p0: Vec<f64> = (0..m.n_cells()).map(|i| i as f64).collect();
    let sol = pressure_solve(&m, &bcs, &op, &kappa, &phi, &p0, &SolveControls::cg(1e-12)).unwrap();
    assert!(max_abs(sol.p) < 1e-9);
}

#[test]
fn incompatible_closed_domain_data_is_rejected() {
    let m = section(4, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let mut phi = vec![0.0; m.n_faces()];
    phi[m.n_internal_faces()] = 1.0;
    let kappa = vec![1.0; m.n_cells()];
    let op = pressure_operator(&m, &bcs, &kappa, Some(0));
    let r = pressure_solve(&m, &bcs, &op, &kappa, &phi, &vec![0.0; m.n_cells()], &SolveControls::cg(1e-12));
    assert!(matches!(r, Err(Error::Compatibility { .. })));
}

#[test]
fn constant_pressure_shift_changes_no_flux_or_gradient() {
    let m = section(5, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let p: Vec<f64> = m.centres().iter().map(|x| x.x * x.x - x.y).collect();
    let shifted: Vec<f64> = p.iter().map(|v| v + 17.0).collect();
    let kappa = vec![0.7; m.n_cells()];
    let phi = vec![0.0; m.n_faces()];
    let a = corrected_flux(&m, &bcs, &kappa, &phi, &p);
    let b = corrected_flux(&m, &bcs, &kappa, &phi, &shifted);
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
    let ga = pressure_gradient(&m, &bcs, &p);
    let gb = pressure_gradient(&m, &bcs, &shifted);
    assert!(ga.iter().zip(&gb).all(|(x, y)| (x - y).norm() < 1e-12));
}

#[test]
fn constant_pressure_leaves_the_corrected_velocity_unchanged() {
    let m = section(4, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let u: Vec<Vec3> = m.centres().iter().map(|x| Vec3::new(x.y, x.x, 0.0)).collect();
    let out = final_correction(&m, &bcs, &u, &vec![2.0; m.n_cells()], &vec![5.0; m.n_cells()], None, 1e-12).unwrap();
    assert!(out.iter().zip(&u).all(|(a, b)| (a - b).norm() < 1e-12));
}

#[test]
fn quiescent_case_stays_identically_zero() {
    let m = section(6, 0.0, 1.0);
    let bcs = BoundaryConditions::from_kinds(&m);
    let mut s = solver(m, bcs, SolverConfig { dt: 0.01, end_time: 0.03, ..Default::default() }, vec![]);
    s.run(|_, _| Ok(())).unwrap();
    assert!(s.fields().u.iter().all(|v| *v == Vec3::zeros()));
    assert!(s.fields().p.iter().all(|v| *v == 0.0));
    assert_eq!(s.state.step, 3);
}

#[test]
fn lid_cavity_first_step_is_bounded_and_conservative() {
    let m = section(12, 0.0, 1.0);
    let bcs = lid_bcs(&m, 1.0);
    let cfg = SolverConfig { dt: 0.005, end_time: 0.005, pressure_tolerance: 1e-10, ..Default::default() };
    let mut s = solver(m, bcs, cfg, vec![]);
    let rep = s.step().unwrap();
    let umax = s.state.u_predicted.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(umax <= 1.0, "predicted {umax}");
    let umax = s.fields().u.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(umax <= 1.0, "corrected {umax}");
    let area = s.mesh.mean_face_area();
    assert!(rep.max_imbalance <= 10.0 * 1e-10 * area, "{}", rep.max_imbalance);
    // The residual log carries one line per momentum component and corrector.
    assert_eq!(s.state.residuals.len(), 3 + 2);
    let mut csv = Vec::new();
    write_residual_csv(&s.state.residuals, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with(RESIDUAL_CSV_HEADER));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn initial_pressure_offset_does_not_change_the_step() {
    let run = |offset: f64| {
        let m = section(8, 0.0, 1.0);
        let bcs = lid_bcs(&m, 1.0);
        let mut s = solver(m, bcs, SolverConfig { dt: 0.005, ..Default::default() }, vec![]);
        for p in s.state.fields.p.iter_mut() {
            *p += offset;
        }
        s.step().unwrap();
        s.step().unwrap();
        s.fields().u.clone()
    };
    let a = run(0.0);
    let b = run(3.5);
    let d = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(d < 1e-12, "{d}");
}

#[test]
fn immersed_cylinders_satisfy_continuity_and_the_ib_relation() {
    let m = section(20, -1.1, 1.1);
    let bcs = BoundaryConditions::from_kinds(&m);
    let cfg = SolverConfig { dt: 0.01, end_time: 0.05, ..Default::default() };
    let mut s = solver(m, bcs, cfg, cylinder_bodies(0.5, 1.0, 1.0));
    let reps = s.run(|_, _| Ok(())).unwrap();
    let area = s.mesh.mean_face_area();
    assert!(reps.iter().all(|r| r.max_imbalance <= 1e-6 * 0.5 * area));
    assert!(s.ib_replay_error() < 1e-8, "{}", s.ib_replay_error());
    assert_eq!(reps.last().unwrap().flagged_rows, 0);
    // Solid cells carry the body velocity.
    let ib = s.ib.as_ref().unwrap();
    for (c, l) in ib.labels().iter().enumerate() {
        if *l == CellLabel::Solid {
            let b = ib.classification.solid_body[c].unwrap();
            let expect = s.bodies[b].body.motion.boundary_velocity(&s.mesh.centre(c), s.time());
            assert!((s.fields().u[c] - expect).norm() < 1e-10);
        }
    }
}

#[test]
fn diffuse_mode_pressure_operator_is_the_unmodified_one() {
    let m = section(16, -1.1, 1.1);
    let bcs = BoundaryConditions::from_kinds(&m);
    let dim = solver(m.clone(), bcs.clone(), SolverConfig { dt: 0.01, degree: 0, dim: true, ..Default::default() }, cylinder_bodies(0.5, 1.0, 1.0));
    let (used, plain) = dim.pressure_operators().unwrap();
    assert!(used.matrix.bitwise_eq(&plain.matrix));
    let ibm = solver(m, bcs, SolverConfig { dt: 0.01, degree: 2, ..Default::default() }, cylinder_bodies(0.5, 1.0, 1.0));
    let (used, plain) = ibm.pressure_operators().unwrap();
    assert!(!used.matrix.bitwise_eq(&plain.matrix));
}

#[test]
fn ib_diffusivity_keeps_fluid_and_clears_solid() {
    let m = section(16, -1.1, 1.1);
    let bcs = BoundaryConditions::from_kinds(&m);
    let s = solver(m, bcs, SolverConfig::default(), cylinder_bodies(0.5, 1.0, 1.0));
    let ib = s.ib.as_ref().unwrap();
    let base: Vec<f64> = (0..s.mesh.n_cells()).map(|i| 1.0 + 0.01 * i as f64).collect();
    let (k, flagged) = ib_pressure_diffusivity(&ib.operator, &base);
    for (c, l) in ib.labels().iter().enumerate() {
        match l {
            CellLabel::Fluid => assert_eq!(k[c], base[c]),
            CellLabel::Solid => assert_eq!(k[c], 0.0),
            CellLabel::Ib if !flagged.contains(&c) => {
                let expect: f64 = ib.operator.s.row(c).map(|(j, v)| v * base[j]).sum();
                assert_eq!(k[c], expect);
            }
            CellLabel::Ib => assert_eq!(k[c], base[c]),
        }
    }
}

#[test]
fn consistent_mode_holds_a_viscous_cavity_at_large_steps() {
    // μ Δt / (ρ h²) = 100
    let cfg = SolverConfig { dt: 0.25, end_time: 2.5, consistent: true, ..Default::default() };
    let mut s = solver(section(20, 0.0, 1.0), lid_bcs(&section(20, 0.0, 1.0), 1.0), cfg, vec![]);
    let reps = s.run(|_, _| Ok(())).unwrap();
    let umax = max_abs(s.fields().u.iter().map(|v| v.norm()));
    assert!(umax < 1.0, "{umax}");
    assert!(reps.last().unwrap().velocity_change < 1e-2, "{:?}", reps.last());
}
