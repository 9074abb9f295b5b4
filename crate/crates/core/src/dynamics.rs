//! Time integration of the mean-field equations (noise means are zero).
//!
//! Dormand–Prince 5(4) with FSAL, per-component absolute tolerances taken
//! from a [`StateScale`], and the Hairer stiffness test. Stiff parameter sets
//! stall on the step-size floor and are reported, not clamped.

use num_complex::Complex64;

use crate::error::DynamicsError;
use crate::params::SystemParams;
use crate::stability::{drift, jacobian, least_stable_direction, verdict_for, MeanFieldState};
use crate::steady_state::{BranchSolution, Stability};

pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-3;
/// Steps below this fraction of `t_max` count as a stiffness failure.
pub const MIN_STEP_REL: f64 = 1e-14;
/// Scaled distance below which a perturbed run has returned.
pub const CONVERGED_DISTANCE: f64 = 1e-6;
/// Divergence is declared at this multiple of the initial perturbation.
pub const DIVERGED_FACTOR: f64 = 1e3;
const MAX_STEPS: usize = 5_000_000;

/// Typical magnitude of each state component, used for error control and
/// for distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScale(pub [f64; 8]);

impl StateScale {
    /// Mirror position and momentum on their own scales; the three complex
    /// amplitudes share one scale so phase rotations stay norm-preserving.
    pub fn new(x: f64, p_mom: f64, field: f64) -> Self {
        StateScale([x, p_mom, field, field, field, field, field, field])
    }

    pub fn for_branch(b: &BranchSolution, p: &SystemParams) -> Self {
        let x = b.x_s.abs().max(f64::MIN_POSITIVE);
        let field = b.a_s.norm().max(b.big_a_s.norm()).max(b.c_s.norm()).max(f64::MIN_POSITIVE);
        Self::new(x, p.mirror_mass() * p.omega_m * x, field)
    }

    /// Scale from a starting state: the field scale is its largest
    /// amplitude (the drive's empty-cavity amplitude if all are zero), the
    /// mirror scale the displacement that field would produce.
    pub fn for_state(s: &MeanFieldState, delta0: f64, p: &SystemParams) -> Self {
        let mut field = s.a().norm().max(s.big_a().norm()).max(s.c().norm());
        if field == 0.0 {
            field = 2.0 * p.alpha_in / p.gamma0.sqrt();
        }
        let m = p.mirror_mass();
        let pushed = p.pull(delta0) * field * field / (m * p.omega_m * p.omega_m);
        let x = s.x().abs().max(s.p().abs() / (m * p.omega_m)).max(pushed).max(f64::MIN_POSITIVE);
        Self::new(x, m * p.omega_m * x, field.max(f64::MIN_POSITIVE))
    }

    /// Euclidean norm of `(a - b) / scale`.
    pub fn distance(&self, a: &MeanFieldState, b: &MeanFieldState) -> f64 {
        (0..8)
            .map(|i| ((a.0[i] - b.0[i]) / self.0[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Steps on which the stiffness estimate h·|λ| exceeded the explicit
    /// stability boundary.
    pub stiff_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
    pub frame_x: f64,
    pub converged_to: Option<usize>,
    pub step_stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &MeanFieldState {
        self.states.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub t_max: f64,
    pub tol: f64,
    pub scale: StateScale,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type V8 = [f64; 8];

fn axpy(y: &V8, terms: &[(f64, &V8)], h: f64) -> V8 {
    let mut out = *y;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..8 {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

struct Rhs<'a> {
    frame_x: f64,
    delta0: f64,
    p: &'a SystemParams,
}

impl Rhs<'_> {
    fn eval(&self, y: &V8) -> V8 {
        drift(&MeanFieldState(*y), self.frame_x, self.delta0, self.p).0
    }
}

/// One Dormand–Prince step: new state, its derivative (FSAL), error estimate.
fn dp_step(f: &Rhs, y: &V8, k1: &V8, h: f64) -> (V8, V8, V8) {
    let k2 = f.eval(&axpy(y, &[(A21, k1)], h));
    let k3 = f.eval(&axpy(y, &[(A31, k1), (A32, &k2)], h));
    let k4 = f.eval(&axpy(y, &[(A41, k1), (A42, &k2), (A43, &k3)], h));
    let k5 = f.eval(&axpy(y, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
    let k6 = f.eval(&axpy(y, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], h));
    let y1 = axpy(y, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)], h);
    let k7 = f.eval(&y1);
    let mut err = [0.0; 8];
    for i in 0..8 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y1, k7, err)
}

/// Fixed-step Dormand–Prince (fifth-order solution), for order checks.
pub fn integrate_fixed(
    initial: &MeanFieldState,
    frame_x: f64,
    delta0: f64,
    p: &SystemParams,
    h: f64,
    steps: usize,
) -> MeanFieldState {
    let f = Rhs { frame_x, delta0, p };
    let mut y = initial.0;
    let mut k1 = f.eval(&y);
    for _ in 0..steps {
        let (y1, k7, _) = dp_step(&f, &y, &k1, h);
        y = y1;
        k1 = k7;
    }
    MeanFieldState(y)
}

/// Adaptive integration from `initial` to `t_max` with local tolerance `tol`.
pub fn integrate(
    initial: &MeanFieldState,
    frame_x: f64,
    delta0: f64,
    p: &SystemParams,
    t_max: f64,
    tol: f64,
) -> Result<Trajectory, DynamicsError> {
    let scale = StateScale::for_state(initial, delta0, p);
    integrate_with(initial, frame_x, delta0, p, IntegrateOptions { t_max, tol, scale }, |_, _| false)
}

/// Adaptive integration with an explicit scale; `stop(t, state)` ends the
/// run early when it returns true.
pub fn integrate_with<F>(
    initial: &MeanFieldState,
    frame_x: f64,
    delta0: f64,
    p: &SystemParams,
    opts: IntegrateOptions,
    mut stop: F,
) -> Result<Trajectory, DynamicsError>
where
    F: FnMut(f64, &MeanFieldState) -> bool,
{
    let IntegrateOptions { t_max, tol, scale } = opts;
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(DynamicsError::BadTolerance(tol));
    }
    let f = Rhs { frame_x, delta0, p };
    let atol: V8 = std::array::from_fn(|i| tol * scale.0[i]);
    let err_norm = |err: &V8, y0: &V8, y1: &V8| -> f64 {
        let s: f64 = (0..8)
            .map(|i| {
                let sk = atol[i] + tol * y0[i].abs().max(y1[i].abs());
                (err[i] / sk).powi(2)
            })
            .sum();
        (s / 8.0).sqrt()
    };

    let mut t = 0.0;
    let mut y = initial.0;
    let mut k1 = f.eval(&y);
    let mut times = vec![0.0];
    let mut states = vec![*initial];
    let mut stats = StepStats::default();
    let h_min = MIN_STEP_REL * t_max;

    if t_max <= 0.0 || stop(0.0, initial) {
        return Ok(Trajectory {
            times,
            states,
            frame_x,
            converged_to: None,
            step_stats: stats,
        });
    }

    let mut h = initial_step(&f, &y, &k1, &atol, tol, t_max);
    let mut prev_err: f64 = 1e-4;
    let mut last_rejected = false;
    for _ in 0..MAX_STEPS {
        if t >= t_max {
            break;
        }
        if t + h > t_max {
            h = t_max - t;
        }
        if h < h_min && t + h < t_max {
            return Err(DynamicsError::StepSizeUnderflow { t, h, min: h_min });
        }
        let (y1, k7, err) = dp_step(&f, &y, &k1, h);
        let e = err_norm(&err, &y, &y1);
        if !e.is_finite() {
            if h <= h_min {
                return Err(DynamicsError::NonFinite(t));
            }
            h *= 0.1;
            stats.rejected += 1;
            continue;
        }
        if e <= 1.0 {
            // Lund-stabilised controller
            let mut fac = 0.9 * e.max(1e-10).powf(-0.7 / 5.0) * prev_err.powf(0.4 / 5.0);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            prev_err = e.max(1e-4);
            // stiffness: h·|λ| estimated from |f(y1) − f(y)| / |y1 − y|
            let num: f64 = (0..8).map(|i| ((k7[i] - k1[i]) / scale.0[i]).powi(2)).sum::<f64>().sqrt();
            let den: f64 = (0..8).map(|i| ((y1[i] - y[i]) / scale.0[i]).powi(2)).sum::<f64>().sqrt();
            if den > 0.0 && h * num / den > 3.25 {
                stats.stiff_steps += 1;
            }
            t += h;
            y = y1;
            k1 = k7;
            stats.accepted += 1;
            last_rejected = false;
            let state = MeanFieldState(y);
            if !state.is_finite() {
                return Err(DynamicsError::NonFinite(t));
            }
            times.push(t);
            states.push(state);
            if stop(t, &state) {
                break;
            }
            h *= fac;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h *= (0.9 * e.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(Trajectory {
        times,
        states,
        frame_x,
        converged_to: None,
        step_stats: stats,
    })
}

/// Hairer's starting-step heuristic.
fn initial_step(f: &Rhs, y: &V8, k1: &V8, atol: &V8, tol: f64, t_max: f64) -> f64 {
    let sk: V8 = std::array::from_fn(|i| atol[i] + tol * y[i].abs());
    let norm = |v: &V8| ((0..8).map(|i| (v[i] / sk[i]).powi(2)).sum::<f64>() / 8.0).sqrt();
    let d0 = norm(y);
    let d1 = norm(k1);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(t_max);
    let y1 = axpy(y, &[(1.0, k1)], h0);
    let k2 = f.eval(&y1);
    let diff: V8 = std::array::from_fn(|i| k2[i] - k1[i]);
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(t_max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinOutcome {
    pub converged: bool,
    pub trajectory: Trajectory,
    /// Scaled distance from the fixed point at each recorded time.
    pub distances: Vec<f64>,
    pub t_max: f64,
}

/// Default horizon: forty e-folds of the least-stable mode.
pub fn default_horizon(max_real_eig: f64) -> f64 {
    40.0 / max_real_eig.abs().max(1e-12)
}

/// Kicks a branch along its least-stable eigendirection by `epsilon` (scaled
/// norm) and integrates in the branch's frame until the run returns within
/// [`CONVERGED_DISTANCE`], leaves beyond `DIVERGED_FACTOR * epsilon`, or
/// reaches the horizon.
pub fn basin_test(
    b: &BranchSolution,
    delta0: f64,
    p: &SystemParams,
    epsilon: f64,
    t_max: Option<f64>,
    tol: f64,
) -> Result<BasinOutcome, DynamicsError> {
    if !(0.0..=0.1).contains(&epsilon) {
        return Err(DynamicsError::BadEpsilon(epsilon));
    }
    let fixed = MeanFieldState::from_branch(b);
    let scale = StateScale::for_branch(b, p);
    let j = jacobian(b, delta0, p);
    let v = verdict_for(&j, p);
    let lead = v.eigenvalues[0];
    let horizon = t_max.unwrap_or_else(|| default_horizon(v.max_real_eig));

    let dir = least_stable_direction(&j, lead);
    let scaled: [f64; 8] = std::array::from_fn(|i| dir[i] / scale.0[i]);
    let norm = scaled.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut start = fixed;
    for i in 0..8 {
        start.0[i] += epsilon * dir[i] / norm;
    }

    let diverge_at = DIVERGED_FACTOR * epsilon;
    let mut outcome: Option<bool> = None;
    let opts = IntegrateOptions {
        t_max: horizon,
        tol,
        scale,
    };
    let mut traj = integrate_with(&start, b.x_s, delta0, p, opts, |_, s| {
        let d = scale.distance(s, &fixed);
        if d < CONVERGED_DISTANCE {
            outcome = Some(true);
            true
        } else if d > diverge_at && epsilon > 0.0 {
            outcome = Some(false);
            true
        } else {
            false
        }
    })?;
    let distances: Vec<f64> = traj.states.iter().map(|s| scale.distance(s, &fixed)).collect();
    match outcome {
        Some(converged) => {
            if converged {
                traj.converged_to = Some(b.branch_index);
            }
            Ok(BasinOutcome {
                converged,
                trajectory: traj,
                distances,
                t_max: horizon,
            })
        }
        None => Err(DynamicsError::Inconclusive {
            t_max: horizon,
            distance: *distances.last().unwrap(),
        }),
    }
}

/// Whether a basin outcome agrees with an eigenvalue verdict.
pub fn agrees(label: Stability, converged: bool) -> Option<bool> {
    match label {
        Stability::Stable => Some(converged),
        Stability::Unstable => Some(!converged),
        _ => None,
    }
}

/// Closed-form `(Ã(t), C̃(t))` of the driven-free atomic pair with the
/// cavity decoupled, for checking the integrator.
pub fn atomic_pair_exact(
    a0: Complex64,
    c0: Complex64,
    delta_p: f64,
    p: &SystemParams,
    t: f64,
) -> (Complex64, Complex64) {
    // d/dt [A, C] = M [A, C],  M = [[-(γ₁+iΔp), -iΩ], [-iΩ, -(γ₂+i(Δp−Δc))]]
    let m11 = -Complex64::new(p.gamma1, delta_p);
    let m22 = -Complex64::new(p.gamma2, delta_p - p.delta_c);
    let m12 = Complex64::new(0.0, -p.omega);
    let tr = m11 + m22;
    let det = m11 * m22 - m12 * m12;
    let disc = (tr * tr * 0.25 - det).sqrt();
    let (l1, l2) = (tr * 0.5 + disc, tr * 0.5 - disc);
    // e^{Mt} = (e^{l1 t}(M − l2) − e^{l2 t}(M − l1)) / (l1 − l2)
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let w = l1 - l2;
    let apply = |d: Complex64| -> [[Complex64; 2]; 2] {
        [[m11 - d, m12], [m12, m22 - d]]
    };
    let (p2, p1) = (apply(l2), apply(l1));
    let mut e = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            e[r][c] = (e1 * p2[r][c] - e2 * p1[r][c]) / w;
        }
    }
    (e[0][0] * a0 + e[0][1] * c0, e[1][0] * a0 + e[1][1] * c0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_params() -> SystemParams {
        SystemParams {
            g_n: 0.0,
            omega: 0.0,
            alpha_in: 1e-300,
            gamma0: 0.5,
            ..SystemParams::stiffness_reduced()
        }
    }

    #[test]
    fn cavity_decays_exponentially() {
        let p = decay_params();
        let s0 = MeanFieldState::new(0.0, 0.0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        // ω₀ = 1 keeps the radiation-pressure phase small
        let d0 = p.omega_a - 1.0;
        let tr = integrate(&s0, 0.0, d0, &p, 20.0, 1e-10).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let want = (-0.5 * p.gamma0 * t).exp();
            assert!((s.a().norm() - want).abs() <= 1e-6 * want, "t={t}");
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        let p = decay_params();
        let s0 = MeanFieldState::default();
        assert!(matches!(integrate(&s0, 0.0, 0.0, &p, 1.0, 1e-2), Err(DynamicsError::BadTolerance(_))));
    }

    #[test]
    fn atomic_pair_matches_closed_form() {
        let p = SystemParams {
            g_n: 0.0,
            alpha_in: 1e-300,
            ..SystemParams::stiffness_reduced()
        };
        let a0 = Complex64::new(0.3, -0.1);
        let c0 = Complex64::new(0.0, 0.2);
        let s0 = MeanFieldState::new(0.0, 0.0, Complex64::new(0.0, 0.0), a0, c0);
        let tr = integrate(&s0, 0.0, 0.5, &p, 10.0, 1e-11).unwrap();
        let dp = 0.5;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let (a, c) = atomic_pair_exact(a0, c0, dp, &p, *t);
            assert!((s.big_a() - a).norm() <= 1e-6 * (a0.norm() + c0.norm()));
            assert!((s.c() - c).norm() <= 1e-6 * (a0.norm() + c0.norm()));
        }
    }
}
