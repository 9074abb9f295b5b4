//! Independent steady-state oracle: eliminates the atoms and the mirror from
//! the mean-field equations directly and bisects the self-consistency
//! condition on a dense composite grid. Shares no code with the solver.
#![allow(dead_code)]

use multistab_eit::SystemParams;
use num_complex::Complex64;

/// Cavity amplitude in the frame where the probe detuning is `delta`.
pub fn cavity_amplitude(delta: f64, p: &SystemParams) -> Complex64 {
    let i = Complex64::i();
    let wt = Complex64::new(p.gamma2, delta - p.delta_c);
    // atoms: A = -i gN a / (γ₁ + iΔ + Ω²/Ω̃)
    let atom = Complex64::new(p.gamma1, delta) + p.omega * p.omega / wt;
    let chi_a = -i * p.g_n / atom;
    // cavity: 0 = -(γ₀/2) a - i gN A + √γ₀ α
    let denom = 0.5 * p.gamma0 + i * p.g_n * chi_a;
    p.gamma0.sqrt() * p.alpha_in / denom
}

/// Transmission-like ratio γ₀|a|²/(4α²), in [0, 1].
pub fn transmission(delta: f64, p: &SystemParams) -> f64 {
    p.gamma0 * cavity_amplitude(delta, p).norm_sqr() / (4.0 * p.alpha_in * p.alpha_in)
}

/// Mirror self-consistency at shift `u = Δ − Δ₀`: radiation-pressure
/// displacement mapped back to a detuning shift, minus `u`.
pub fn mismatch(u: f64, delta0: f64, p: &SystemParams) -> f64 {
    let omega0 = p.omega_a - delta0;
    let k = omega0 / p.l;
    let m = p.kappa / (p.omega_m * p.omega_m * p.l * p.l);
    let a2 = cavity_amplitude(delta0 + u, p).norm_sqr();
    let x = k * a2 / (m * p.omega_m * p.omega_m);
    k * x - u
}

fn push_log(out: &mut Vec<f64>, centre: f64, lo: f64, hi: f64, n: usize, sign: f64) {
    let (a, b) = (lo.ln(), hi.ln());
    for j in 0..n {
        out.push(centre + sign * (a + (b - a) * j as f64 / (n - 1) as f64).exp());
    }
}

/// Roots of `mismatch` on `u > 0`, as Δ = Δ₀ + u, ascending, with the far
/// cavity-dominated root removed (transmission above 1/2) when gN > 0.
pub fn oracle_roots(delta0: f64, p: &SystemParams, points: usize) -> Vec<f64> {
    let omega0 = p.omega_a - delta0;
    let slope = p.gamma0 * p.kappa / (4.0 * p.alpha_in * p.alpha_in * omega0 * omega0);
    // transmission ≤ 1 bounds every root
    let u_max = 1.05 / slope;
    let uc = p.delta_c - delta0;
    let quarter = points / 4;
    let mut grid = Vec::with_capacity(points + 4);
    push_log(&mut grid, 0.0, 1e-12 * (1.0 + delta0.abs()), u_max, quarter, 1.0);
    push_log(&mut grid, uc, 1e-10, u_max, quarter, 1.0);
    push_log(&mut grid, uc, 1e-10, u_max, quarter, -1.0);
    for j in 0..quarter {
        grid.push(u_max * j as f64 / (quarter - 1) as f64);
    }
    grid.push(uc);
    grid.retain(|&u| u > 0.0 && u <= u_max);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();

    let f: Vec<f64> = grid.iter().map(|&u| mismatch(u, delta0, p)).collect();
    let mut roots = Vec::new();
    for j in 0..grid.len() - 1 {
        if f[j] == 0.0 {
            roots.push(grid[j]);
        } else if f[j].signum() != f[j + 1].signum() && f[j + 1] != 0.0 {
            roots.push(bisect(grid[j], grid[j + 1], f[j], delta0, p));
        }
    }
    roots
        .into_iter()
        .map(|u| delta0 + u)
        .filter(|&d| p.g_n == 0.0 || transmission(d, p) <= 0.5)
        .collect()
}

fn bisect(mut a: f64, mut b: f64, fa: f64, delta0: f64, p: &SystemParams) -> f64 {
    let sa = fa.signum();
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            return m;
        }
        if mismatch(m, delta0, p).signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
}

/// Deterministic parameter draws around the showcase set.
pub fn random_draws(n: usize) -> Vec<(SystemParams, f64)> {
    use proptest::strategy::{Strategy, ValueTree};
    use proptest::test_runner::TestRunner;

    let mut runner = TestRunner::deterministic();
    let strat = (
        1.0f64..6.0,   // log10 kappa
        0.5f64..5.0,   // Omega
        1.0f64..2.5,   // log10 gN
        0.3f64..1.5,   // log10 alpha_in
        -2.0f64..3.5,  // log10 |Delta0|
        proptest::bool::ANY,
        -1.0f64..1.0,  // Delta_c
    );
    (0..n)
        .map(|_| {
            let (lk, om, lg, la, ld, neg, dc) = strat.new_tree(&mut runner).unwrap().current();
            let p = SystemParams {
                kappa: 10f64.powf(lk),
                omega: om,
                g_n: 10f64.powf(lg),
                alpha_in: 10f64.powf(la),
                delta_c: dc,
                ..SystemParams::paper_defaults()
            };
            let d0 = if neg { -10f64.powf(ld) } else { 10f64.powf(ld) };
            (p, d0)
        })
        .collect()
}

/// Root sets equal: same count, each within `rel` of its partner.
pub fn same_roots(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()))
}
