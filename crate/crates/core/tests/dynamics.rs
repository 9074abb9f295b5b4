//! Integrator checks against closed forms, and basin tests on the
//! stiffness-reduced parameter set.

use multistab_eit::dynamics::{basin_test, integrate, integrate_fixed, StateScale};
use multistab_eit::error::DynamicsError;
use multistab_eit::stability::{classify_all, MeanFieldState};
use multistab_eit::steady_state::{solve, Stability};
use multistab_eit::SystemParams;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn decay_params() -> SystemParams {
    SystemParams {
        g_n: 0.0,
        omega: 0.0,
        alpha_in: 1e-300,
        gamma0: 0.5,
        ..SystemParams::stiffness_reduced()
    }
}

fn decay_start() -> MeanFieldState {
    MeanFieldState::new(0.0, 0.0, c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0))
}

#[test]
fn cavity_amplitude_decays_at_half_gamma0() {
    let p = decay_params();
    let d0 = p.omega_a - 1.0;
    let tr = integrate(&decay_start(), 0.0, d0, &p, 30.0, 1e-10).unwrap();
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(tr.times.len(), tr.states.len());
    for (t, s) in tr.times.iter().zip(&tr.states) {
        let want = (-0.5 * p.gamma0 * t).exp();
        assert!((s.a().norm() - want).abs() <= 1e-6 * want, "t = {t}");
    }
}

#[test]
fn fixed_step_error_falls_at_fifth_order() {
    let p = decay_params();
    let d0 = p.omega_a - 1.0;
    let t_end = 8.0;
    let want = (-0.5 * p.gamma0 * t_end).exp();
    let err = |n: usize| {
        let s = integrate_fixed(&decay_start(), 0.0, d0, &p, t_end / n as f64, n);
        (s.a().norm() - want).abs()
    };
    let (e1, e2, e3) = (err(8), err(16), err(32));
    // nominal order 5, so at least 2^(5-1) per halving
    assert!(e1 / e2 >= 16.0, "{e1:e} {e2:e}");
    assert!(e2 / e3 >= 16.0, "{e2:e} {e3:e}");
}

#[test]
fn adaptive_error_tracks_tolerance() {
    let p = decay_params();
    let d0 = p.omega_a - 1.0;
    let err = |tol: f64| {
        let tr = integrate(&decay_start(), 0.0, d0, &p, 20.0, tol).unwrap();
        tr.times
            .iter()
            .zip(&tr.states)
            .map(|(t, s)| (s.a().norm() - (-0.5 * p.gamma0 * t).exp()).abs())
            .fold(0.0, f64::max)
    };
    let tols = [1e-4, 1e-6, 1e-8, 1e-10];
    let errs: Vec<f64> = tols.iter().map(|&t| err(t)).collect();
    for (t, e) in tols.iter().zip(&errs) {
        assert!(*e <= 10.0 * t, "tol {t:e} err {e:e}");
    }
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

#[test]
fn atoms_alone_follow_damped_rabi_oscillation() {
    let p = SystemParams {
        g_n: 0.0,
        alpha_in: 1e-300,
        ..SystemParams::stiffness_reduced()
    };
    // Δp = Δ₀ + (ω₀/l)·frame_x = 0 with frame_x = 0, Δ₀ = 0
    let a0 = c(0.4, 0.1);
    let c0 = c(-0.2, 0.3);
    let s0 = MeanFieldState::new(0.0, 0.0, c(0.0, 0.0), a0, c0);
    let tr = integrate(&s0, 0.0, 0.0, &p, 12.0, 1e-11).unwrap();
    let sigma = 0.5 * (p.gamma1 + p.gamma2);
    let half = 0.5 * (p.gamma1 - p.gamma2);
    let w = (p.omega * p.omega - half * half).sqrt();
    for (t, s) in tr.times.iter().zip(&tr.states) {
        // e^{Mt} = e^{-σt}[cos(wt) + sin(wt)/w (M + σ)], M + σ = [[-h, -iΩ], [-iΩ, h]]
        let (co, si) = ((w * t).cos(), (w * t).sin() / w);
        let env = (-sigma * t).exp();
        let i = Complex64::i();
        let a = env * (co * a0 + si * (-half * a0 - i * p.omega * c0));
        let cc = env * (co * c0 + si * (-i * p.omega * a0 + half * c0));
        assert!((s.big_a() - a).norm() <= 1e-6, "t = {t}");
        assert!((s.c() - cc).norm() <= 1e-6, "t = {t}");
    }
}

#[test]
fn moving_the_frame_only_rotates_phases() {
    // decoupled and undriven: a frame shift is a pure phase rotation
    let p = SystemParams {
        g_n: 0.0,
        alpha_in: 1e-300,
        ..SystemParams::stiffness_reduced()
    };
    let d0 = 0.3;
    let s0 = MeanFieldState::new(1e-3, 0.0, c(0.5, 0.2), c(0.1, -0.3), c(0.2, 0.0));
    let t_end = 5.0;
    let run = |fx: f64| {
        let tr = integrate(&s0, fx, d0, &p, t_end, 1e-11).unwrap();
        *tr.last()
    };
    let (u, v) = (run(0.0), run(2e-3));
    assert!((u.a().norm() - v.a().norm()).abs() <= 1e-6);
    assert!((u.big_a().norm() - v.big_a().norm()).abs() <= 1e-6);
    assert!((u.c().norm() - v.c().norm()).abs() <= 1e-6);
    // and the atomic phase turns by (ω₀/l)·Δframe·t
    let turn = p.pull(d0) * 2e-3 * t_end;
    let rotated = u.big_a() * Complex64::from_polar(1.0, -turn);
    assert!((rotated - v.big_a()).norm() <= 1e-6);
}

#[test]
fn fixed_point_stays_put() {
    let p = SystemParams::stiffness_reduced();
    let d0 = -5.0;
    let mut s = solve(d0, &p).unwrap();
    classify_all(&mut s, &p);
    let b = s.branches.iter().find(|b| b.stability == Stability::Stable).unwrap();
    let start = MeanFieldState::from_branch(b);
    let scale = StateScale::for_branch(b, &p);
    let tr = integrate(&start, b.x_s, d0, &p, 200.0, 1e-10).unwrap();
    let worst = tr.states.iter().map(|s| scale.distance(s, &start)).fold(0.0, f64::max);
    assert!(worst < 1e-8, "drifted {worst:e}");
}

#[test]
fn stiff_showcase_parameters_report_underflow() {
    let p = SystemParams::paper_defaults();
    let s = solve(10.0, &p).unwrap();
    let start = MeanFieldState::from_branch(&s.branches[1]);
    let r = integrate(&start, s.branches[1].x_s, 10.0, &p, 1e16, 1e-8);
    assert!(matches!(r, Err(DynamicsError::StepSizeUnderflow { .. })), "{r:?}");
}

#[test]
fn tolerance_outside_range_is_rejected() {
    let p = decay_params();
    for tol in [1e-2, 1e-13, f64::NAN] {
        assert!(matches!(
            integrate(&decay_start(), 0.0, 0.0, &p, 1.0, tol),
            Err(DynamicsError::BadTolerance(_))
        ));
    }
}

fn branch_at(d0: f64, idx: usize) -> (SystemParams, multistab_eit::BranchSolution) {
    let p = SystemParams::stiffness_reduced();
    let mut s = solve(d0, &p).unwrap();
    classify_all(&mut s, &p);
    let b = *s.branch(idx).unwrap();
    (p, b)
}

#[test]
fn stable_branch_reconverges() {
    let (p, b) = branch_at(-5.0, 3);
    assert_eq!(b.stability, Stability::Stable);
    let o = basin_test(&b, -5.0, &p, 1e-3, None, 1e-8).unwrap();
    assert!(o.converged);
    assert_eq!(o.trajectory.converged_to, Some(3));
    assert!(*o.distances.last().unwrap() < 1e-6);
}

#[test]
fn unstable_branch_one_departs() {
    let (p, b) = branch_at(-5.0, 1);
    assert_eq!(b.stability, Stability::Unstable);
    let o = basin_test(&b, -5.0, &p, 1e-3, None, 1e-8).unwrap();
    assert!(!o.converged);
    assert_eq!(o.trajectory.converged_to, None);
    assert!(*o.distances.last().unwrap() > 1.0);
}

#[test]
fn zero_kick_is_trivially_converged() {
    let (p, b) = branch_at(-5.0, 1);
    let o = basin_test(&b, -5.0, &p, 0.0, None, 1e-8).unwrap();
    assert!(o.converged);
    assert_eq!(o.distances, vec![0.0]);
}

#[test]
fn kick_outside_range_is_rejected() {
    let (p, b) = branch_at(-5.0, 3);
    assert!(matches!(basin_test(&b, -5.0, &p, 0.5, None, 1e-8), Err(DynamicsError::BadEpsilon(_))));
    assert!(matches!(basin_test(&b, -5.0, &p, -1e-3, None, 1e-8), Err(DynamicsError::BadEpsilon(_))));
}
