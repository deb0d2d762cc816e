mod common;

use common::*;
use num_complex::Complex64;
use surfwave::amplitude::*;
use surfwave::kernel::Acceleration;
use surfwave::params::{coefficients_for_direction, FrequencyTriple, ReferenceState};
use surfwave::residual::*;

fn mode(j1: i64, j2: i64, k: i64, re: f64, im: f64) -> FrontMode {
    FrontMode { j1, j2, k, re, im }
}

fn solver(dt: f64, t_end: f64, every: usize) -> SolverConfig {
    SolverConfig {
        dt,
        t_end,
        dealias: true,
        blowup_h4_factor: 10.0,
        k_const: 1.0,
        snapshot_every: every,
        acceleration: Acceleration::Direct,
    }
}

fn worked_trajectory(modes: &[FrontMode]) -> (ReferenceState, FrequencyTriple, Trajectory) {
    let (s, f, c) = worked_coefficients(1, 0, 8);
    let phi0 = FrontSpectrum::from_modes(4, 16, modes).unwrap();
    (s, f, integrate(&phi0, &solver(2e-3, 0.04, 2), &c).unwrap())
}

/// Front evolved exactly by pure transport, with its time derivative.
fn transported(phi0: &FrontSpectrum, op: &AmplitudeOperator, t: f64) -> (FrontSpectrum, FrontSpectrum) {
    let v = op.velocity();
    let mut f = phi0.clone();
    for (j1, j2, _, i) in phi0.modes() {
        f.coeffs[i] = phi0.coeffs[i] * Complex64::from_polar(1.0, -(v[0] * j1 as f64 + v[1] * j2 as f64) * t);
    }
    f.time = t;
    let d = op.rhs(&f);
    (f, d)
}

#[test]
fn zero_front_leaves_the_reference_state() {
    let (s, f, traj) = worked_trajectory(&[]);
    let grid = WkbGrid { nx: 16, nz: 8, ..WkbGrid::default() };
    let field = assemble_wkb(&traj, 0, &s, &f, f.eps(), &grid).unwrap();
    assert_eq!(interior_residual(&field).sup(), 0.0);
    let b = jump_residual(&field);
    assert!(b.max() < 1e-15 && b.third_row == 0.0);
    assert!(field.front_samples().iter().all(|v| *v == 0.0));
    let p = field.plasma_samples();
    assert!(p.iter().all(|v| *v == [0.3, 0.0, 0.0, 1.0, 0.0, 0.0, s.q0()]));
    assert!(field.vacuum_samples().iter().all(|v| *v == [0.0, 1.0, 0.0, 0.0, 0.0, 0.5]));
    let rep = epsilon_sweep(&traj, &s, &f, &[8, 16, 32], &grid, &[0]).unwrap();
    assert!(rep.degenerate && rep.interior_slope.is_none() && rep.boundary_slope.is_none());
}

#[test]
fn initial_front_is_the_scaled_profile() {
    let (s, f, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.02)]);
    let grid = WkbGrid { nx: 12, nz: 4, ..WkbGrid::default() };
    let field = assemble_wkb(&traj, 0, &s, &f, f.eps(), &grid).unwrap();
    let eps = f.eps();
    for (node, phi) in field.front_samples().into_iter().enumerate() {
        let x = grid.x_prime(node);
        let theta = (f.xi()[0] * x[0] + f.xi()[1] * x[1]) / eps;
        let a = Complex64::new(0.05, 0.02) * Complex64::from_polar(1.0, x[0] + x[1] + theta);
        assert!((phi - eps * eps * 2.0 * a.re).abs() < 1e-16);
    }
}

#[test]
fn chain_rule_matches_finite_differences() {
    let (s, f, c) = worked_coefficients(1, 1, 2);
    let eps = f.eps();
    let phi0 = FrontSpectrum::from_modes(2, 4, &[mode(1, 0, 1, 0.3, 0.1), mode(0, -1, 2, 0.1, -0.2)]).unwrap();
    let op = AmplitudeOperator::new(&c, 2, 4, Acceleration::Direct).unwrap().with_nl_coeff(0.0);
    let kernel = JetKernel::new(&s, &c, eps, &phi0);
    // (front jet, plasma value, vacuum value) at physical (t, x)
    let eval = |t: f64, x: [f64; 3], pick: &dyn Fn(&SlowModes, f64, f64, &FrontJet) -> [f64; 7]| {
        let (front, d) = transported(&phi0, &op, t);
        let slow = SlowModes::at(&front, &d, [x[0], x[1]]);
        let th = kernel.theta(t, [x[0], x[1]]);
        let fj = kernel.front_jet(slow.view(), th);
        (fj, pick(&slow, th, x[2] - fj.phi, &fj))
    };
    let plasma = |sl: &SlowModes, th: f64, y3: f64, fj: &FrontJet| kernel.plasma_jet(sl.view(), th, y3, fj).value;
    let vacuum = |sl: &SlowModes, th: f64, y3: f64, fj: &FrontJet| kernel.vacuum_jet(sl.view(), th, y3, fj).value;
    let h = 1e-3;
    let stencil = |g: &dyn Fn(f64) -> [f64; 7]| {
        let (a, b, cc, d) = (g(-2.0 * h), g(-h), g(h), g(2.0 * h));
        std::array::from_fn::<f64, 7, _>(|i| (a[i] - 8.0 * b[i] + 8.0 * cc[i] - d[i]) / (12.0 * h))
    };
    let (t0, x0) = (0.37, [0.4, 1.1, 0.0]);
    for (side, pick, x3) in [("plasma", &plasma as &dyn Fn(&SlowModes, f64, f64, &FrontJet) -> [f64; 7], 0.07), ("vacuum", &vacuum, -0.05)] {
        let x = [x0[0], x0[1], x3];
        let (fj, _) = eval(t0, x, pick);
        let jet = {
            let (front, d) = transported(&phi0, &op, t0);
            let slow = SlowModes::at(&front, &d, [x[0], x[1]]);
            let th = kernel.theta(t0, [x[0], x[1]]);
            if side == "plasma" {
                kernel.plasma_jet(slow.view(), th, x3 - fj.phi, &fj)
            } else {
                kernel.vacuum_jet(slow.view(), th, x3 - fj.phi, &fj)
            }
        };
        let fd = [
            stencil(&|dh| eval(t0 + dh, x, pick).1),
            stencil(&|dh| eval(t0, [x[0] + dh, x[1], x[2]], pick).1),
            stencil(&|dh| eval(t0, [x[0], x[1] + dh, x[2]], pick).1),
            stencil(&|dh| eval(t0, [x[0], x[1], x[2] + dh], pick).1),
        ];
        let width = if side == "plasma" { 7 } else { 6 };
        for a in 0..4 {
            for i in 0..width {
                let tol = 1e-6 * (1.0 + fd[a][i].abs());
                assert!((fd[a][i] - jet.d[a][i]).abs() < tol, "{side} d{a}[{i}]: {} vs {}", fd[a][i], jet.d[a][i]);
            }
        }
        let front_fd = |g: &dyn Fn(f64) -> f64| (g(-2.0 * h) - 8.0 * g(-h) + 8.0 * g(h) - g(2.0 * h)) / (12.0 * h);
        let pt = front_fd(&|dh| eval(t0 + dh, x, pick).0.phi);
        let p1 = front_fd(&|dh| eval(t0, [x[0] + dh, x[1], x[2]], pick).0.phi);
        let p2 = front_fd(&|dh| eval(t0, [x[0], x[1] + dh, x[2]], pick).0.phi);
        assert!((pt - fj.phi_t).abs() < 1e-9 && (p1 - fj.phi_x[0]).abs() < 1e-9 && (p2 - fj.phi_x[1]).abs() < 1e-9);
    }
}

#[test]
fn kinematic_condition_by_hand() {
    let (s, f, c) = worked_coefficients(1, 0, 4);
    let eps = f.eps();
    let a = Complex64::new(0.2, -0.1);
    let front = FrontSpectrum::from_modes(1, 2, &[mode(0, 0, 1, a.re, a.im)]).unwrap();
    let op = AmplitudeOperator::new(&c, 1, 2, Acceleration::Direct).unwrap();
    let dfront = op.rhs(&front);
    let kernel = JetKernel::new(&s, &c, eps, &front);
    let x = [0.3, 0.9];
    let slow = SlowModes::at(&front, &dfront, x);
    let th = kernel.theta(0.0, x);
    let fj = kernel.front_jet(slow.view(), th);
    let plasma = kernel.plasma_jet(slow.view(), th, 0.0, &fj).value;
    let vacuum = kernel.vacuum_jet(slow.view(), th, 0.0, &fj).value;
    let got = interface_residual(&fj, &plasma, &vacuum, s.nu)[0];

    let e = Complex64::from_polar(1.0, th);
    let i = Complex64::i();
    let da = dfront.get(0, 0, 1);
    let phi_t = eps * eps * 2.0 * (da * e).re + eps * c.tau * 2.0 * (i * a * e).re;
    let phi_x1 = eps * 2.0 * (i * a * e).re;
    let (cp, x1) = (c.c_plus, c.xi[0]);
    let u = [0.3 + eps * 2.0 * (a * x1 * cp * e).re, 0.0, eps * 2.0 * (a * i * cp * e).re];
    let expected = phi_t - (u[0] * -phi_x1 + u[2]);
    assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    assert!(got.abs() < 10.0 * eps * eps);
}

#[test]
fn fields_are_periodic_in_the_tangential_variables() {
    let (s, f, c) = worked_coefficients(2, 1, 3);
    let eps = f.eps();
    let front = FrontSpectrum::from_modes(2, 3, &[mode(1, -1, 1, 0.1, 0.05), mode(0, 2, 3, 0.02, 0.0)]).unwrap();
    let op = AmplitudeOperator::new(&c, 2, 3, Acceleration::Direct).unwrap();
    let d = op.rhs(&front);
    let kernel = JetKernel::new(&s, &c, eps, &front);
    let at = |x: [f64; 2]| {
        let slow = SlowModes::at(&front, &d, x);
        let th = kernel.theta(0.2, x);
        let fj = kernel.front_jet(slow.view(), th);
        (fj.phi, kernel.plasma_jet(slow.view(), th, 0.1, &fj).value, kernel.vacuum_jet(slow.view(), th, -0.1, &fj).value)
    };
    let tp = std::f64::consts::TAU;
    let base = at([0.5, 0.7]);
    for shifted in [at([0.5 + tp, 0.7]), at([0.5, 0.7 + tp])] {
        assert!((base.0 - shifted.0).abs() < 1e-14);
        for i in 0..7 {
            assert!((base.1[i] - shifted.1[i]).abs() < 1e-11 && (base.2[i] - shifted.2[i]).abs() < 1e-11);
        }
    }
}

#[test]
fn non_periodic_eps_is_rejected() {
    let (s, f, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.0)]);
    assert!(assemble_wkb(&traj, 0, &s, &f, 0.9 * f.eps(), &WkbGrid::default()).is_err());
    assert!(assemble_wkb(&traj, 99, &s, &f, f.eps(), &WkbGrid::default()).is_err());
    assert!(assemble_wkb(&traj, 0, &s, &f, f.eps(), &WkbGrid { nx: 8, ..WkbGrid::default() }).is_err());
}

#[test]
fn residuals_scale_with_eps() {
    let (s, f, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.0)]);
    let grid = WkbGrid::default();
    let snaps = snapshot_selection(traj.snapshots.len(), 8);
    let level = |l: u32| {
        let fl = f.with_l(l);
        let mut interior = 0.0f64;
        let mut pressure = 0.0f64;
        for &n in &snaps {
            let field = assemble_wkb(&traj, n, &s, &fl, fl.eps(), &grid).unwrap();
            interior = interior.max(interior_residual(&field).sup());
            pressure = pressure.max(jump_residual(&field).sup[1]);
        }
        (interior, pressure)
    };
    let (a, b) = (level(16), level(32));
    assert!((a.0 / b.0 - 2.0).abs() < 0.3 * 2.0, "interior ratio {}", a.0 / b.0);
    assert!((a.1 / b.1 - 4.0).abs() < 0.3 * 4.0, "pressure ratio {}", a.1 / b.1);
}

#[test]
fn vacuum_equations_fail_on_the_wrong_side() {
    let (s, f, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.0)]);
    let grid = WkbGrid { nx: 64, nz: 24, ..WkbGrid::default() };
    let at = |l: u32| {
        let fl = f.with_l(l);
        let field = assemble_wkb(&traj, 3, &s, &fl, fl.eps(), &grid).unwrap();
        let right = interior_residual(&field).vacuum_sup.iter().copied().fold(0.0, f64::max);
        let wrong = mirrored_vacuum_residual(&field).iter().copied().fold(0.0, f64::max);
        (right, wrong)
    };
    let (coarse, fine) = (at(8), at(32));
    assert!(fine.1 > 0.5 * coarse.1, "mirrored residual decays: {coarse:?} {fine:?}");
    assert!(fine.1 > 10.0 * fine.0);
}

#[test]
fn sweep_slopes_and_grid_refinement() {
    let (s, f, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.0)]);
    let snaps = snapshot_selection(traj.snapshots.len(), 4);
    let coarse = epsilon_sweep(&traj, &s, &f, &[8, 16, 32], &WkbGrid { nz: 24, ..WkbGrid::default() }, &snaps).unwrap();
    let fine = epsilon_sweep(&traj, &s, &f, &[8, 16, 32], &WkbGrid { nz: 48, ..WkbGrid::default() }, &snaps).unwrap();
    for rep in [&coarse, &fine] {
        assert!(!rep.degenerate && rep.warnings.is_empty());
        let (i, b) = (rep.interior_slope.unwrap(), rep.boundary_slope.unwrap());
        assert!((0.7..=1.3).contains(&i) && (1.7..=2.3).contains(&b), "{i} {b}");
    }
    assert!((coarse.interior_slope.unwrap() - fine.interior_slope.unwrap()).abs() < 0.05);
    assert!((coarse.boundary_slope.unwrap() - fine.boundary_slope.unwrap()).abs() < 0.05);
    assert_eq!(fine.levels.len(), 3);
    assert!(epsilon_sweep(&traj, &s, &f, &[8, 16], &WkbGrid::default(), &snaps).is_err());
}

#[test]
fn slope_and_selection_helpers() {
    let x = [0.1, 0.05, 0.025];
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
    assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
    assert!(loglog_slope(&x, &[1.0, 0.0, 1.0]).is_none());
    assert_eq!(snapshot_selection(11, 4), vec![0, 3, 7, 10]);
    assert_eq!(snapshot_selection(3, 8), vec![0, 1, 2]);
    assert_eq!(snapshot_selection(5, 1), vec![4]);
    let g = WkbGrid::default();
    let z = g.y3_nodes();
    assert_eq!(z.len(), 48);
    assert!((z[0] - 1e-3).abs() < 1e-18 && (z[47] - 3.0).abs() < 1e-12);
    assert!((g.y3_weights().iter().sum::<f64>() - (3.0 - 1e-3)).abs() < 1e-12);
}

#[test]
fn rectification_vanishes_for_zero_front() {
    let (s, _, traj) = worked_trajectory(&[]);
    let c = worked_coefficients(1, 0, 8).2;
    let r = rectification_indicator(&traj, &s, &c).unwrap();
    assert_eq!(r.sup, 0.0);
    assert_eq!(r.relative, 0.0);
}

#[test]
fn rectification_vanishes_without_vacuum_fields() {
    let s = ReferenceState::new([0.3, 0.0, 0.0], [1.0, 0.5, 0.0], [0.0; 3], 0.0, 0.01).unwrap();
    let c = coefficients_for_direction(&s, [1.0, 0.0], 0.7).unwrap();
    assert_eq!(rectification_coefficients(&s, &c), [0.0; 3]);
    let phi0 = FrontSpectrum::from_modes(4, 16, &[mode(1, 0, 1, 0.05, 0.0), mode(0, 1, 1, 0.03, 0.01)]).unwrap();
    let traj = integrate(&phi0, &solver(2e-3, 0.04, 2), &c).unwrap();
    assert_eq!(rectification_indicator(&traj, &s, &c).unwrap().sup, 0.0);
}

#[test]
fn rectification_is_nontrivial_for_the_worked_state() {
    let (s, _, traj) = worked_trajectory(&[mode(1, 0, 1, 0.05, 0.0), mode(0, 1, 1, 0.05, 0.0)]);
    let c = worked_coefficients(1, 0, 8).2;
    let r = rectification_indicator(&traj, &s, &c).unwrap();
    assert!(r.relative > 1e-6, "{r:?}");
    assert!(r.max_imag_s < 1e-13 && r.min_s > -1e-13);
    assert_eq!(r.times.len(), traj.snapshots.len() - 2);
}

#[test]
fn single_harmonic_pair_gives_a_flat_s() {
    let (s, _, traj) = worked_trajectory(&[mode(1, 1, 1, 0.05, 0.0)]);
    let c = worked_coefficients(1, 0, 8).2;
    let r = rectification_indicator(&traj, &s, &c).unwrap();
    assert!(r.relative < 1e-10);
    assert!(r.max_imag_s < 1e-13 && r.min_s > -1e-13);
}

#[test]
fn rectification_needs_three_uniform_snapshots() {
    let (s, f, c) = worked_coefficients(1, 0, 8);
    let _ = f;
    let phi0 = FrontSpectrum::from_modes(2, 4, &[mode(1, 0, 1, 0.05, 0.0)]).unwrap();
    let traj = integrate(&phi0, &solver(1e-2, 0.01, 1), &c).unwrap();
    assert!(rectification_indicator(&traj, &s, &c).is_err());
}
