mod support;

use std::sync::Arc;

use cutstokes_core::assembly::{assemble_mass, context};
use cutstokes_core::error::Error;
use cutstokes_core::geometry::{
    make_channel_2d, make_stationary_box_2d, Aabb, BackgroundLayout, BoundaryTag, DomainMotion, HalfPlane,
};
use cutstokes_core::quadrature::CutQuadrature;
use cutstokes_core::space::FieldState;
use cutstokes_core::timestepper::{
    stability_monitor, Bdf2Init, Level, ProblemData, SchemeConfig, Simulation, TimeState,
};
use cutstokes_core::verification::expr::{c, x, y};
use cutstokes_core::verification::{channel2d_case, ManufacturedCase};
use support::with_case_data;

fn steady_case() -> Arc<ManufacturedCase> {
    Arc::new(ManufacturedCase::new("steady", [y().powi(2) + x(), x().powi(2) - y()], x() * y() - c(0.25)))
}

/// Channel of fixed half-height 1 with do-nothing outflow.
fn static_channel() -> DomainMotion {
    let layout = BackgroundLayout { origin: [0.0, 0.0], extent: Aabb::new([-0.05, -1.05], [4.05, 1.05]) };
    DomainMotion::from_half_planes("static_channel", 0.0, layout, |_| {
        vec![
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([1.0, 0.0], -4.0, BoundaryTag::DoNothing),
            HalfPlane::new([0.0, 1.0], -0.93, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], -0.93, BoundaryTag::Dirichlet),
        ]
    })
}

fn max_diff(a: &FieldState, b: &FieldState) -> f64 {
    let mut m = 0.0f64;
    for d in 0..a.p.len() {
        if a.velocity_active[d] {
            m = m.max((a.u[0][d] - b.u[0][d]).abs()).max((a.u[1][d] - b.u[1][d]).abs());
        }
        if a.pressure_active[d] {
            m = m.max((a.p[d] - b.p[d]).abs());
        }
    }
    m
}

#[test]
fn stationary_solution_is_a_fixed_point() {
    let case = steady_case();
    let motion = with_case_data(make_stationary_box_2d(), &case);
    for degree in [1, 2] {
        let cfg = SchemeConfig { degree, h: 0.125, dt: 0.1, ..Default::default() };
        let sim = Simulation::new(&motion, case.problem_data(), cfg).unwrap();
        let (slab, steady) = sim.stationary(0).unwrap();
        let state = TimeState {
            n: 0,
            t: 0.0,
            levels: vec![Level { time: 0.0, state: steady.clone(), slab }],
            diagnostics: Vec::new(),
            initial_l2_sq: 0.0,
        };
        let (next, _) = sim.step(state).unwrap();
        let scale = steady.u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let dev = max_diff(&next.levels[0].state, &steady);
        assert!(dev <= 1e-9 * scale, "m={degree}: moved by {dev:e}");
    }
}

#[test]
fn free_decay_energy_is_nonincreasing() {
    use std::f64::consts::PI;
    let motion = make_stationary_box_2d();
    let u0 = |p: [f64; 2]| [(PI * p[0]).sin() * (PI * p[1]).sin(), p[0] * (1.0 - p[0]) * p[1]];
    for degree in [1, 2] {
        let cfg = SchemeConfig { degree, h: 0.125, dt: 0.05, t_final: 0.5, ..Default::default() };
        let sim = Simulation::new(&motion, ProblemData::free_decay(u0), cfg.clone()).unwrap();
        let end = sim.run(|_| Ok(())).unwrap();
        let mut prev = end.initial_l2_sq;
        assert!(prev > 0.0);
        for d in &end.diagnostics {
            assert!(d.l2_sq <= prev * (1.0 + 1e-12), "m={degree} step {}: {} > {prev}", d.step, d.l2_sq);
            prev = d.l2_sq;
        }
        let rep = stability_monitor(&end.diagnostics, end.initial_l2_sq, cfg.gamma_p, cfg.dt, 10.0);
        assert!(rep.max_energy <= end.initial_l2_sq * (1.0 + 1e-10), "energy inequality with f = 0");
        assert!(!rep.blow_up);
    }
}

#[test]
fn zero_data_run_stays_zero() {
    let motion = make_channel_2d();
    let cfg = SchemeConfig { h: 0.25, dt: 0.2, t_final: 0.6, ..Default::default() };
    let sim = Simulation::new(&motion, ProblemData::zero(), cfg.clone()).unwrap();
    let end = sim.run(|_| Ok(())).unwrap();
    assert!(end.levels[0].state.u.iter().flatten().all(|&v| v == 0.0));
    let rep = stability_monitor(&end.diagnostics, end.initial_l2_sq, cfg.gamma_p, cfg.dt, 10.0);
    assert_eq!(rep.max_energy, 0.0);
    assert!(!rep.blow_up);
}

#[test]
fn channel_smoke_step() {
    let case = Arc::new(channel2d_case());
    let motion = with_case_data(make_channel_2d(), &case);
    for (degree, bdf_order) in [(1, 1), (2, 2)] {
        let cfg = SchemeConfig {
            degree,
            bdf_order,
            h: 0.125,
            dt: 0.1,
            t_final: 0.1,
            bdf2_init: Bdf2Init::AnalyticPrev,
            ..Default::default()
        };
        let sim = Simulation::new(&motion, case.problem_data(), cfg).unwrap();
        let end = sim.run(|_| Ok(())).unwrap();
        let d = &end.diagnostics[0];
        assert_eq!(d.step, 1);
        assert!((d.time - 0.1).abs() < 1e-15);
        assert_eq!(d.bdf_order, bdf_order);
        for v in [d.l2_sq, d.triple_sq, d.cip_sq, d.forcing_sq, d.residual, d.domain_area] {
            assert!(v.is_finite());
        }
        assert!(d.l2_sq > 0.0);
        assert!(d.residual <= 1e-10, "residual {}", d.residual);
    }
}

#[test]
fn analytic_prev_needs_a_manufactured_solution() {
    let motion = make_channel_2d();
    let cfg = SchemeConfig { bdf_order: 2, bdf2_init: Bdf2Init::AnalyticPrev, ..Default::default() };
    assert!(matches!(Simulation::new(&motion, ProblemData::zero(), cfg.clone()), Err(Error::Config(_))));
    let case = Arc::new(channel2d_case());
    assert!(Simulation::new(&motion, case.problem_data(), cfg).is_ok());
    let boot = SchemeConfig { bdf_order: 2, ..Default::default() };
    assert!(Simulation::new(&motion, ProblemData::zero(), boot).is_ok());
}

fn first_step(init: Bdf2Init, dt: f64) -> (f64, usize) {
    let case = Arc::new(channel2d_case());
    let motion = with_case_data(make_channel_2d(), &case);
    let cfg = SchemeConfig { degree: 2, bdf_order: 2, h: 0.25, dt, t_final: dt, bdf2_init: init, ..Default::default() };
    let sim = Simulation::new(&motion, case.problem_data(), cfg).unwrap();
    let end = sim.run(|_| Ok(())).unwrap();
    (end.diagnostics[0].l2_sq.sqrt(), end.diagnostics[0].bdf_order)
}

#[test]
fn bdf2_start_modes_agree_to_second_order() {
    let dts = [0.1, 0.05, 0.025, 0.0125];
    let mut diffs = Vec::new();
    for &dt in &dts {
        let (a, oa) = first_step(Bdf2Init::Bdf1Bootstrap, dt);
        let (b, ob) = first_step(Bdf2Init::AnalyticPrev, dt);
        assert_eq!((oa, ob), (1, 2));
        diffs.push((a - b).abs());
    }
    for k in 1..diffs.len() {
        let order = (diffs[k - 1] / diffs[k]).log2();
        assert!(order >= 1.8, "order {order} from {diffs:?}");
    }
}

#[test]
fn identical_runs_are_bit_identical() {
    let case = Arc::new(channel2d_case());
    let motion = with_case_data(make_channel_2d(), &case);
    let cfg = SchemeConfig { degree: 2, bdf_order: 2, h: 0.25, dt: 0.1, t_final: 0.3, ..Default::default() };
    let run = || {
        let sim = Simulation::new(&motion, case.problem_data(), cfg.clone()).unwrap();
        let mut rows = Vec::new();
        let end = sim.run(|v| {
            rows.push(v.diagnostics.csv_row());
            Ok(())
        })
        .unwrap();
        (rows, end.diagnostics, end.levels[0].state.clone())
    };
    let (ra, da, sa) = run();
    let (rb, db, sb) = run();
    assert_eq!(ra, rb);
    assert_eq!(da, db);
    assert_eq!(sa, sb);
}

#[test]
fn understated_boundary_speed_violates_containment() {
    // walls move outwards at speed 0.1, but the motion claims w_max = 0
    let layout = BackgroundLayout { origin: [0.0, 0.0], extent: Aabb::new([-0.05, -1.6], [4.05, 1.6]) };
    let motion = DomainMotion::from_half_planes("growing", 0.0, layout, |t| {
        let g = 1.0 + 0.1 * t;
        vec![
            HalfPlane::new([-1.0, 0.0], 0.0, BoundaryTag::Dirichlet),
            HalfPlane::new([1.0, 0.0], -4.0, BoundaryTag::DoNothing),
            HalfPlane::new([0.0, 1.0], -g, BoundaryTag::Dirichlet),
            HalfPlane::new([0.0, -1.0], -g, BoundaryTag::Dirichlet),
        ]
    });
    let cfg = SchemeConfig { h: 0.125, dt: 0.5, t_final: 2.0, ..Default::default() };
    let sim = Simulation::new(&motion, ProblemData::zero(), cfg).unwrap();
    match sim.run(|_| Ok(())) {
        Err(Error::ContainmentViolation { step, .. }) => assert!(step >= 2),
        other => panic!("expected containment violation, got {:?}", other.map(|s| s.n)),
    }
}

#[test]
fn doubling_gamma_p_is_a_small_perturbation() {
    let motion = make_channel_2d();
    let data = ProblemData::free_decay(|p| [1.0 - p[1] * p[1], 0.0]);
    let run = |gamma_p: f64| {
        let cfg = SchemeConfig { degree: 1, h: 0.125, dt: 0.1, t_final: 1.0, gamma_p, ..Default::default() };
        let sim = Simulation::new(&motion, data.clone(), cfg.clone()).unwrap();
        let end = sim.run(|_| Ok(())).unwrap();
        let rep = stability_monitor(&end.diagnostics, end.initial_l2_sq, gamma_p, cfg.dt, 10.0);
        let cip: f64 = end.diagnostics.iter().map(|d| cfg.dt * gamma_p * d.cip_sq).sum();
        (end.diagnostics, rep, cip)
    };
    let (da, ra, ca) = run(1e-3);
    let (db, rb, cb) = run(2e-3);
    assert!(!ra.blow_up && !rb.blow_up);
    assert!(ca > 0.0 && (cb - ca).abs() > 1e-3 * ca, "cip part {ca} vs {cb}");
    for (a, b) in da.iter().zip(&db) {
        let (na, nb) = (a.l2_sq.sqrt(), b.l2_sq.sqrt());
        assert!((na - nb).abs() <= 0.01 * na, "t={}: {na} vs {nb}", a.time);
    }
}

#[test]
fn summed_steps_reproduce_the_telescoped_system() {
    let case = Arc::new(channel2d_case());
    let motion = with_case_data(static_channel(), &case);
    for degree in [1, 2] {
        let cfg = SchemeConfig { degree, h: 0.25, dt: 0.1, t_final: 0.3, ..Default::default() };
        let sim = Simulation::new(&motion, case.problem_data(), cfg.clone()).unwrap();
        let init = sim.initialize().unwrap();
        let u0 = init.levels[0].state.clone();
        let mut state = init;
        let mut xs = Vec::new();
        for _ in 0..3 {
            let (next, _) = sim.step(state).unwrap();
            xs.push(next.levels[0].state.clone());
            state = next;
        }
        // static domain: every level shares one slab and one numbering
        let slab = sim.slab(1).unwrap();
        let stat: Vec<_> = (1..=3).map(|n| sim.assemble(&sim.slab(n).unwrap(), &[]).unwrap()).collect();
        let dofs = &stat[0].dofs;
        let quad = CutQuadrature::new(&sim.mesh, &slab, 2 * degree, 2 * degree + 1);
        let mass = assemble_mass(&context(&sim.mesh, &sim.space, &slab, &quad, dofs));
        let x3 = xs[2].to_solution(dofs);
        let x0 = u0.to_solution(dofs);
        let diff: Vec<f64> = x3.iter().zip(&x0).map(|(a, b)| (a - b) / cfg.dt).collect();
        let mut total = mass.matvec(&diff);
        let mut scale = 0.0f64;
        for (sys, x) in stat.iter().zip(&xs) {
            let ax = sys.system.matrix.matvec(&x.to_solution(dofs));
            for i in 0..total.len() {
                total[i] += ax[i] - sys.system.rhs[i];
                scale = scale.max(sys.system.rhs[i].abs());
            }
        }
        let worst = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-9 * scale, "m={degree}: telescoped residual {worst:e} (scale {scale:e})");
    }
}

#[test]
fn manufactured_channel_run_is_not_flagged() {
    let case = Arc::new(channel2d_case());
    let motion = with_case_data(make_channel_2d(), &case);
    for (degree, bdf_order) in [(1, 1), (2, 2)] {
        let cfg = SchemeConfig {
            degree,
            bdf_order,
            h: 0.125,
            dt: 0.1,
            t_final: 2.0,
            bdf2_init: Bdf2Init::AnalyticPrev,
            ..Default::default()
        };
        let sim = Simulation::new(&motion, case.problem_data(), cfg.clone()).unwrap();
        let end = sim.run(|_| Ok(())).unwrap();
        let rep = stability_monitor(&end.diagnostics, end.initial_l2_sq, cfg.gamma_p, cfg.dt, 10.0);
        assert!(!rep.blow_up, "{rep:?}");
        assert!(end.diagnostics.iter().all(|d| d.dirichlet_sq > 0.0));
    }
}
