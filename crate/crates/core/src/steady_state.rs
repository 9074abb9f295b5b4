//! Steady states of the coupled mirror–cavity–atom system.
//!
//! Eliminating the atoms and the mirror leaves one real equation for the
//! steady-state detuning Δ:
//!
//! ```text
//! Y_L(Δ) = |N(Δ)|² / |D(Δ)|²  =  s · (Δ − Δ₀)  = Y_R(Δ)
//! N = (γ₀/2)[(γ₁ + iΔ)Ω̃ + Ω²],   D = N + g²N·Ω̃,   Ω̃ = γ₂ + i(Δ − Δ_c)
//! ```
//!
//! with `s = γ₀κ / (4 α_in² ω₀²)`. Clearing denominators gives a real quintic
//! `P(Δ) = |N|² − s(Δ − Δ₀)|D|²`. Its coefficients span some thirty decades,
//! so the roots are isolated by a derivative cascade evaluated in
//! double-double arithmetic: `P` is re-expanded around every evaluation
//! point straight from `N` and `D`, which never cancels more than the
//! function value itself.

use num_complex::Complex64;

use crate::dd::{Cdd, Dd};
use crate::error::SolveError;
use crate::params::SystemParams;

/// Relative spacing under which two roots count as one tangency.
pub const DEGENERACY_REL: f64 = 1e-8;

/// Roots whose cavity transmission exceeds this are the far-detuned,
/// atom-free solution and go to the diagnostics channel.
pub const FAR_ROOT_TRANSMISSION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
    Unclassified,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "Stable",
            Stability::Unstable => "Unstable",
            Stability::Marginal => "Marginal",
            Stability::Unclassified => "Unclassified",
        }
    }
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSolution {
    pub delta_ps: f64,
    /// Δ_p,s − Δ₀, kept separately because it is tiny next to Δ₀ when the
    /// mirror is stiff.
    pub shift: f64,
    pub x_s: f64,
    pub a_s: Complex64,
    pub big_a_s: Complex64,
    pub c_s: Complex64,
    pub omega_l: f64,
    pub branch_index: usize,
    pub stability: Stability,
    /// A double root (or two roots closer than the degeneracy spacing)
    /// reported once; it counts as two roots.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RootDiagnostics {
    /// Far-detuned roots (Y_L ≈ 1) left out of the branch list.
    pub far_detuned: Vec<f64>,
    /// Real roots below Δ₀ (they would need x_s < 0).
    pub below_delta0: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStates {
    pub delta0: f64,
    /// Sorted by descending Δ_p,s.
    pub branches: Vec<BranchSolution>,
    pub diagnostics: RootDiagnostics,
}

impl SteadyStates {
    /// Number of physical roots, double roots counted twice.
    pub fn root_count(&self) -> usize {
        self.branches
            .iter()
            .map(|b| if b.degenerate { 2 } else { 1 })
            .sum()
    }

    pub fn branch(&self, index: usize) -> Option<&BranchSolution> {
        self.branches.iter().find(|b| b.branch_index == index)
    }
}

pub fn omega_tilde(delta: f64, p: &SystemParams) -> Complex64 {
    Complex64::new(p.gamma2, delta - p.delta_c)
}

pub fn g_func(delta: f64, p: &SystemParams) -> Complex64 {
    Complex64::new(p.g_n * p.g_n, 0.0) + 0.5 * p.gamma0 * Complex64::new(p.gamma1, delta)
}

/// `N(Δ)`, the part of `D` that survives without atoms.
pub fn numerator(delta: f64, p: &SystemParams) -> Complex64 {
    let w = Complex64::new(p.gamma1, delta) * omega_tilde(delta, p) + p.omega * p.omega;
    0.5 * p.gamma0 * w
}

/// `D(Δ) = G(Δ)Ω̃(Δ) + γ₀Ω²/2`.
pub fn denominator(delta: f64, p: &SystemParams) -> Complex64 {
    numerator(delta, p) + p.g_n * p.g_n * omega_tilde(delta, p)
}

pub fn y_left(delta: f64, p: &SystemParams) -> f64 {
    let q = Quintic::new(p, 0.0);
    let (n, d) = q.nd(Dd::new(delta));
    (n.norm_sqr() / d.norm_sqr()).to_f64()
}

/// `Y_L` and its first two derivatives in Δ.
pub fn y_left_derivs(delta: f64, p: &SystemParams) -> (f64, f64, f64) {
    let q = Quintic::new(p, 0.0);
    let (n, d) = q.norm_taylor(Dd::new(delta));
    let d2 = d[0].sqr();
    let cross = n[1] * d[0] - n[0] * d[1];
    let y = n[0] / d[0];
    let y1 = cross / d2;
    let y2 = (n[2] * d[0] - n[0] * d[2]).scale(2.0) / d2 - (d[1] * cross).scale(2.0) / (d2 * d[0]);
    (y.to_f64(), y1.to_f64(), y2.to_f64())
}

pub fn y_right(delta: f64, delta0: f64, p: &SystemParams) -> f64 {
    p.pressure_slope(delta0) * (delta - delta0)
}

/// Coefficients `c₀..c₅` of `P(Δ)` in powers of Δ.
pub fn quintic_coeffs(delta0: f64, p: &SystemParams) -> [f64; 6] {
    quintic_coeffs_about(delta0, 0.0, p)
}

/// Coefficients of `P(centre + h)` in powers of `h`.
pub fn quintic_coeffs_about(delta0: f64, centre: f64, p: &SystemParams) -> [f64; 6] {
    let q = Quintic::new(p, delta0);
    let (c, _) = q.taylor(Dd::new(centre) - Dd::new(delta0));
    c.map(Dd::to_f64)
}

/// Evaluates `P` in double-double; `shift` is Δ − Δ₀.
pub fn quintic_value(delta0: f64, shift: f64, p: &SystemParams) -> f64 {
    Quintic::new(p, delta0).taylor(Dd::new(shift)).0[0].to_f64()
}

pub fn two_photon_residual(branch: &BranchSolution, p: &SystemParams) -> f64 {
    branch.delta_ps - p.delta_c
}

/// The steady-state polynomial bound to one `(params, Δ₀)`; offsets `u`
/// are measured from Δ₀.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Quintic {
    gamma0_half: Dd,
    gamma1: Dd,
    gamma2: Dd,
    omega_sq: Dd,
    g2n: Dd,
    delta_c: Dd,
    delta0: Dd,
    slope: Dd,
    // f64 copies for error bounds
    g2n_f: f64,
    omega_sq_f: f64,
    slope_f: f64,
}

/// Noise floor of one double-double Taylor coefficient, relative to the
/// magnitude of its constituent terms.
const DD_NOISE: f64 = 1e-28;

impl Quintic {
    pub(crate) fn new(p: &SystemParams, delta0: f64) -> Self {
        let alpha = Dd::new(p.alpha_in);
        let w0 = Dd::new(p.omega_a) - Dd::new(delta0);
        let slope = Dd::new(p.gamma0) * Dd::new(p.kappa) / (Dd::new(4.0) * alpha.sqr() * w0.sqr());
        let g = Dd::new(p.g_n);
        let om = Dd::new(p.omega);
        Quintic {
            gamma0_half: Dd::new(p.gamma0).half(),
            gamma1: Dd::new(p.gamma1),
            gamma2: Dd::new(p.gamma2),
            omega_sq: om.sqr(),
            g2n: g.sqr(),
            delta_c: Dd::new(p.delta_c),
            delta0: Dd::new(delta0),
            slope,
            g2n_f: p.g_n * p.g_n,
            omega_sq_f: p.omega * p.omega,
            slope_f: slope.to_f64(),
        }
    }

    /// `N` and `D` at an absolute detuning.
    fn nd(&self, delta: Dd) -> (Cdd, Cdd) {
        let wt = Cdd::new(self.gamma2, delta - self.delta_c);
        let w = Cdd::new(self.gamma1, delta) * wt;
        let n = Cdd::new(w.re + self.omega_sq, w.im).scale(self.gamma0_half);
        let d = n + wt.scale(self.g2n);
        (n, d)
    }

    /// Taylor coefficients of `|N|²` and `|D|²` about an absolute detuning.
    fn norm_taylor(&self, delta: Dd) -> ([Dd; 5], [Dd; 5]) {
        let wt = Cdd::new(self.gamma2, delta - self.delta_c);
        let gi = Cdd::new(self.gamma1, delta);
        let (n0, d0) = self.nd(delta);
        // N' = (γ₀/2) i (Ω̃ + γ₁ + iΔ),  N'' / 2 = −γ₀/2
        let n1 = (wt + gi).mul_i().scale(self.gamma0_half);
        let d1 = Cdd::new(n1.re, n1.im + self.g2n);
        let n2 = Cdd::new(-self.gamma0_half, Dd::ZERO);
        let n = [n0, n1, n2];
        let d = [d0, d1, n2];
        let mut nk = [Dd::ZERO; 5];
        let mut dk = [Dd::ZERO; 5];
        for i in 0..3 {
            for j in 0..3 {
                nk[i + j] = nk[i + j] + (n[i].conj() * n[j]).re;
                dk[i + j] = dk[i + j] + (d[i].conj() * d[j]).re;
            }
        }
        (nk, dk)
    }

    /// Taylor coefficients of `P(Δ₀ + u + h)` in `h`, with a magnitude bound
    /// for each (for noise estimates).
    pub(crate) fn taylor(&self, u: Dd) -> ([Dd; 6], [f64; 6]) {
        let delta = self.delta0 + u;
        let dc = delta - self.delta_c;
        let (nk, dk) = self.norm_taylor(delta);

        let h = self.gamma0_half.hi;
        let uf = u.to_f64().abs();
        let df = delta.hi.abs();
        let m_gi = (self.gamma1.hi * self.gamma1.hi + df * df).sqrt();
        let m_wt = (self.gamma2.hi * self.gamma2.hi + dc.hi * dc.hi).sqrt();
        let mn = [h * (m_gi * m_wt + self.omega_sq_f), h * (m_gi + m_wt), h];
        let md = [mn[0] + self.g2n_f * m_wt, mn[1] + self.g2n_f, h];
        let mut mnk = [0.0; 5];
        let mut mdk = [0.0; 5];
        for i in 0..3 {
            for j in 0..3 {
                mnk[i + j] += mn[i] * mn[j];
                mdk[i + j] += md[i] * md[j];
            }
        }

        let mut c = [Dd::ZERO; 6];
        let mut mag = [0.0; 6];
        for k in 0..6 {
            let nn = if k < 5 { nk[k] } else { Dd::ZERO };
            let mut dterm = if k < 5 { u * dk[k] } else { Dd::ZERO };
            if k > 0 {
                dterm = dterm + dk[k - 1];
            }
            c[k] = nn - self.slope * dterm;
            let mnn = if k < 5 { mnk[k] } else { 0.0 };
            let mut md_k = if k < 5 { uf * mdk[k] } else { 0.0 };
            if k > 0 {
                md_k += mdk[k - 1];
            }
            mag[k] = mnn + self.slope_f * md_k;
        }
        (c, mag)
    }

    /// `P^(k)(u)`, `P^(k+1)(u)` and the noise floor of the first.
    fn deriv(&self, k: usize, u: Dd) -> (Dd, Dd, f64) {
        let (c, mag) = self.taylor(u);
        let f = FACT[k];
        let v = c[k].scale(f);
        let dv = if k < 5 { c[k + 1].scale(FACT[k + 1]) } else { Dd::ZERO };
        (v, dv, DD_NOISE * mag[k] * f)
    }

    /// Fujiwara bound on |u| for every root of `P`.
    fn root_bound(&self) -> f64 {
        let (c, _) = self.taylor(Dd::ZERO);
        let lead = c[5].to_f64().abs();
        let mut b: f64 = 0.0;
        for j in 1..=5 {
            let r = (c[5 - j].to_f64().abs() / lead).powf(1.0 / j as f64);
            b = b.max(r);
        }
        2.0 * b * 1.01 + 1e-300
    }

    /// All real roots of `P`, ascending in `u`.
    pub(crate) fn real_roots(&self) -> Vec<RawRoot> {
        let bound = self.root_bound();
        let lo = Dd::new(-bound);
        let hi = Dd::new(bound);
        // Breakpoints of level 5 (P^(5) is a nonzero constant): none.
        let mut crit: Vec<Dd> = Vec::new();
        for k in (1..5).rev() {
            crit = self.level_roots(k, lo, hi, &crit);
        }
        let mut pts = Vec::with_capacity(crit.len() + 2);
        pts.push(lo);
        pts.extend(crit.iter().copied());
        pts.push(hi);
        let vals: Vec<(Dd, Dd, f64)> = pts.iter().map(|&u| self.deriv(0, u)).collect();

        let mut sign: Vec<f64> = vals.iter().map(|v| v.0.signum()).collect();
        let mut out = Vec::new();
        // Tangencies first: an interior critical point with |P| at noise level.
        for i in 1..pts.len() - 1 {
            if vals[i].0.abs().to_f64() <= vals[i].2 {
                sign[i] = 0.0;
                let (c, _) = self.taylor(pts[i]);
                out.push(RawRoot {
                    u: pts[i],
                    double: true,
                    slope_sign: c[2].signum(),
                });
            }
        }
        for i in 0..pts.len() - 1 {
            if sign[i] * sign[i + 1] < 0.0 {
                let u = self.bracketed_root(0, pts[i], pts[i + 1], vals[i].0, vals[i + 1].0);
                out.push(RawRoot {
                    u,
                    double: false,
                    slope_sign: sign[i + 1],
                });
            }
        }
        out.sort_by(|a, b| a.u.partial_cmp(&b.u).unwrap());
        out
    }

    /// Roots of `P^(k)` on `[lo, hi]`, given the roots of `P^(k+1)`.
    /// Near-double roots are kept as extra breakpoints; that only splits the
    /// next level's monotone intervals further.
    fn level_roots(&self, k: usize, lo: Dd, hi: Dd, crit: &[Dd]) -> Vec<Dd> {
        let mut pts = Vec::with_capacity(crit.len() + 2);
        pts.push(lo);
        pts.extend(crit.iter().copied());
        pts.push(hi);
        let vals: Vec<(Dd, Dd, f64)> = pts.iter().map(|&u| self.deriv(k, u)).collect();
        let mut out = Vec::new();
        for i in 0..pts.len() - 1 {
            let (fa, fb) = (vals[i].0, vals[i + 1].0);
            if fa.signum() * fb.signum() < 0.0 {
                out.push(self.bracketed_root(k, pts[i], pts[i + 1], fa, fb));
            }
            if i + 1 < pts.len() - 1 && fb.abs().to_f64() <= vals[i + 1].2 {
                out.push(pts[i + 1]);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    /// Safeguarded Newton on `P^(k)` inside a sign-changing bracket.
    fn bracketed_root(&self, k: usize, mut a: Dd, mut b: Dd, fa: Dd, _fb: Dd) -> Dd {
        let sa = fa.signum();
        let mut x = bisect_point(a, b);
        let mut last_width = (b - a).to_f64().abs();
        for _ in 0..400 {
            let (fx, dfx, _) = self.deriv(k, x);
            let sx = fx.signum();
            if sx == 0.0 {
                return x;
            }
            if sx == sa {
                a = x;
            } else {
                b = x;
            }
            let width = (b - a).to_f64();
            let scale = a.to_f64().abs().max(b.to_f64().abs());
            if width <= 1e-30 * scale || width == 0.0 {
                break;
            }
            let mut next = None;
            if dfx.hi != 0.0 {
                let cand = x - fx / dfx;
                let inside = cand > a && cand < b;
                if inside && (cand - x).to_f64().abs() < 0.5 * last_width {
                    next = Some(cand);
                }
            }
            last_width = width;
            x = next.unwrap_or_else(|| bisect_point(a, b));
        }
        (a + b).half()
    }
}

const FACT: [f64; 6] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];

/// Bracket midpoint that closes in on roots many decades from the ends.
fn bisect_point(a: Dd, b: Dd) -> Dd {
    let (af, bf) = (a.to_f64(), b.to_f64());
    if af >= 0.0 && bf > 0.0 {
        if af == 0.0 {
            return Dd::new(bf * 1e-6);
        }
        if bf > 16.0 * af {
            return Dd::new((af * bf).sqrt());
        }
    } else if af < 0.0 && bf <= 0.0 {
        return -bisect_point(-b, -a);
    } else if af < 0.0 && bf > 0.0 && (bf > 16.0 * -af || -af > 16.0 * bf) {
        // straddles zero with lopsided ends: step to zero first
        return Dd::ZERO;
    }
    (a + b).half()
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RawRoot {
    pub u: Dd,
    pub double: bool,
    /// Sign of `P'` for a simple root, of `P''` for a double root.
    pub slope_sign: f64,
}

/// All steady states at `delta0`, possibly none.
pub fn solve(delta0: f64, p: &SystemParams) -> Result<SteadyStates, SolveError> {
    p.validate()?;
    let omega0 = p.omega0(delta0);
    if !(omega0 > 0.0) || !delta0.is_finite() {
        return Err(SolveError::NonPositiveCavityFrequency { delta0, omega0 });
    }
    let q = Quintic::new(p, delta0);
    let raw = q.real_roots();

    let mut diagnostics = RootDiagnostics::default();
    let mut kept: Vec<RawRoot> = Vec::new();
    for r in raw {
        if r.u.hi <= 0.0 {
            diagnostics.below_delta0 += 1;
            continue;
        }
        let delta = (q.delta0 + r.u).to_f64();
        if p.g_n > 0.0 {
            let (n, d) = q.nd(q.delta0 + r.u);
            let y = (n.norm_sqr() / d.norm_sqr()).to_f64();
            if y > FAR_ROOT_TRANSMISSION {
                diagnostics.far_detuned.push(delta);
                continue;
            }
        }
        kept.push(r);
    }

    // Merge roots closer than the degeneracy spacing into one double root.
    // The spacing scales with the roots' own magnitude, not with Δ₀: the
    // pair near Δ_c stays O(1e-4) apart even at |Δ₀| ~ 1e5.
    let mut merged: Vec<RawRoot> = Vec::new();
    for r in kept {
        if let Some(last) = merged.last_mut() {
            let at = (q.delta0 + r.u).to_f64().abs().max((q.delta0 + last.u).to_f64().abs());
            let tol = DEGENERACY_REL * (1.0 + at);
            if !last.double && (r.u - last.u).to_f64().abs() < tol {
                let (c, _) = q.taylor((last.u + r.u).half());
                *last = RawRoot {
                    u: (last.u + r.u).half(),
                    double: true,
                    slope_sign: c[2].signum(),
                };
                continue;
            }
        }
        merged.push(r);
    }

    let labels = family_labels(&merged, &q, p.delta_c);
    let mut branches: Vec<BranchSolution> = merged
        .iter()
        .zip(labels)
        .map(|(r, label)| build_branch(&q, p, delta0, r, label))
        .collect();
    branches.sort_by(|a, b| b.delta_ps.partial_cmp(&a.delta_ps).unwrap());
    Ok(SteadyStates {
        delta0,
        branches,
        diagnostics,
    })
}

/// Steady states at `delta0`; `NoRoot` if there are none.
pub fn find_steady_states(delta0: f64, p: &SystemParams) -> Result<SteadyStates, SolveError> {
    let s = solve(delta0, p)?;
    if s.branches.is_empty() {
        return Err(SolveError::NoRoot { delta0 });
    }
    Ok(s)
}

/// Branch numbers by root family. Walking up in Δ, the crossings of
/// `Y_L − Y_R` come as down/up on the red side of the EIT peak (3, 4) and
/// down/up on its blue side (2, 1). Falls back to descending order when a
/// family repeats.
fn family_labels(roots: &[RawRoot], q: &Quintic, delta_c: f64) -> Vec<usize> {
    let mut labels = Vec::with_capacity(roots.len());
    for r in roots {
        let delta = (q.delta0 + r.u).to_f64();
        let left = delta < delta_c;
        let label = if r.double {
            // A merging pair: P'' > 0 means a down/up pair on one side,
            // P'' < 0 the up/down pair straddling the peak.
            match (r.slope_sign > 0.0, left) {
                (true, true) => 3,
                (true, false) => 1,
                (false, _) => 2,
            }
        } else {
            let up = r.slope_sign > 0.0;
            match (left, up) {
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
                (true, true) => 4,
            }
        };
        labels.push(label);
    }
    let mut seen = labels.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != labels.len() {
        // descending Δ order
        let n = roots.len();
        return (0..n).map(|i| n - i).collect();
    }
    labels
}

fn build_branch(q: &Quintic, p: &SystemParams, delta0: f64, r: &RawRoot, label: usize) -> BranchSolution {
    let delta_dd = q.delta0 + r.u;
    let (n, d) = q.nd(delta_dd);
    let to_c = |z: Cdd| Complex64::new(z.re.to_f64(), z.im.to_f64());
    let (nc, dc) = (to_c(n), to_c(d));
    let delta = delta_dd.to_f64();
    let shift = r.u.to_f64();
    let omega0 = p.omega0(delta0);
    let x_s = p.l * shift / omega0;
    let sg = p.gamma0.sqrt();
    let a_s = (2.0 * p.alpha_in / sg) * (nc / dc);
    let wt = omega_tilde(delta, p);
    let big_a_s = Complex64::new(0.0, -p.g_n * sg * p.alpha_in) * wt / dc;
    let c_s = Complex64::new(0.0, -p.omega) * big_a_s / wt;
    BranchSolution {
        delta_ps: delta,
        shift,
        x_s,
        a_s,
        big_a_s,
        c_s,
        omega_l: omega0 - omega0 / p.l * x_s,
        branch_index: label,
        stability: if r.double {
            Stability::Marginal
        } else {
            Stability::Unclassified
        },
        degenerate: r.double,
    }
}

/// Largest scaled residual of the four steady-state equations at a branch
/// (each divided by the magnitude of its largest term).
pub fn steady_state_residual(b: &BranchSolution, delta0: f64, p: &SystemParams) -> f64 {
    let i = Complex64::i();
    let m = p.mirror_mass();
    let pull = p.pull(delta0);
    let (a, aa, c) = (b.a_s, b.big_a_s, b.c_s);

    let spring = m * p.omega_m * p.omega_m * b.x_s;
    let force = pull * a.norm_sqr();
    let r_mirror = (spring - force).abs() / spring.abs().max(force.abs()).max(f64::MIN_POSITIVE);

    let t1 = -0.5 * p.gamma0 * a;
    let t2 = -i * p.g_n * aa;
    let t3 = Complex64::new(p.gamma0.sqrt() * p.alpha_in, 0.0);
    let r_cavity = scaled(&[t1, t2, t3]);

    let s1 = -Complex64::new(p.gamma1, b.delta_ps) * aa;
    let s2 = -i * p.omega * c;
    let s3 = -i * p.g_n * a;
    let r_atom = scaled(&[s1, s2, s3]);

    let u1 = -omega_tilde(b.delta_ps, p) * c;
    let u2 = -i * p.omega * aa;
    let r_spin = scaled(&[u1, u2]);

    r_mirror.max(r_cavity).max(r_atom).max(r_spin)
}

fn scaled(terms: &[Complex64]) -> f64 {
    let sum: Complex64 = terms.iter().sum();
    let big = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if big == 0.0 {
        0.0
    } else {
        sum.norm() / big
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> SystemParams {
        SystemParams::paper_defaults()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn omega_tilde_examples() {
        let p = defaults();
        assert_eq!(omega_tilde(0.0, &p), Complex64::new(1e-4, 0.0));
        assert_eq!(omega_tilde(2.0, &p), Complex64::new(1e-4, 2.0));
        let q = SystemParams { delta_c: 2.0, ..p };
        assert_eq!(omega_tilde(0.0, &q), Complex64::new(1e-4, -2.0));
    }

    #[test]
    fn g_func_examples() {
        let p = SystemParams {
            g_n: 0.0,
            gamma0: 2.0,
            ..defaults()
        };
        assert_eq!(g_func(0.0, &p), Complex64::new(1.0, 0.0));
        let q = defaults();
        assert_eq!(g_func(0.0, &q), Complex64::new(1e4 + 5e-7, 0.0));
        let z = g_func(1e6, &q);
        assert_eq!(z.re, 1e4 + 5e-7);
        assert!((z.im - 0.5).abs() < 1e-15);
    }

    #[test]
    fn y_left_is_one_without_atoms() {
        let p = SystemParams { g_n: 0.0, ..defaults() };
        for d in [-1e6, -3.0, 0.0, 1e-3, 7.5, 1e9] {
            assert!((y_left(d, &p) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn y_left_two_level_limit() {
        let p = SystemParams { omega: 0.0, ..defaults() };
        for d in [-50.0, -1.0, 0.0, 0.3, 200.0] {
            let g = g_func(d, &p);
            let want = (0.5 * p.gamma0 * Complex64::new(p.gamma1, d) / g).norm_sqr();
            assert!(rel(y_left(d, &p), want) < 1e-10);
        }
    }

    #[test]
    fn y_right_examples() {
        let p = defaults();
        assert_eq!(y_right(3.0, 3.0, &p), 0.0);
        assert!(rel(y_right(4e17, 0.0, &p), 0.1) < 1e-12);
        let q = p.with_kappa(200.0);
        assert!(rel(y_right(5.0, 1.0, &q), 2.0 * y_right(5.0, 1.0, &p)) < 1e-14);
    }

    #[test]
    fn leading_coefficient() {
        let p = defaults();
        let c = quintic_coeffs(10.0, &p);
        let want = -p.pressure_slope(10.0) * (0.5 * p.gamma0).powi(2);
        assert!(rel(c[5], want) < 1e-14);
    }

    #[test]
    fn bare_cavity_root() {
        let p = SystemParams { g_n: 0.0, ..defaults() };
        for d0 in [-5.0, 0.0, 10.0] {
            let s = find_steady_states(d0, &p).unwrap();
            assert_eq!(s.branches.len(), 1);
            let want = 1.0 / p.pressure_slope(d0);
            assert!(rel(s.branches[0].shift, want) < 1e-12);
        }
    }

    #[test]
    fn two_branches_at_plus_ten() {
        let s = find_steady_states(10.0, &defaults()).unwrap();
        assert_eq!(s.root_count(), 2);
        assert_eq!(s.diagnostics.far_detuned.len(), 1);
        assert_eq!(s.diagnostics.below_delta0, 0);
        let idx: Vec<usize> = s.branches.iter().map(|b| b.branch_index).collect();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn four_branches_at_minus_five() {
        let p = defaults();
        let s = find_steady_states(-5.0, &p).unwrap();
        assert_eq!(s.root_count(), 4);
        let idx: Vec<usize> = s.branches.iter().map(|b| b.branch_index).collect();
        assert_eq!(idx, vec![1, 2, 4, 3]);
        let mut by_distance = s.branches.clone();
        by_distance.sort_by(|a, b| a.delta_ps.abs().partial_cmp(&b.delta_ps.abs()).unwrap());
        let mut near: Vec<usize> = by_distance[..2].iter().map(|b| b.branch_index).collect();
        near.sort();
        assert_eq!(near, vec![2, 4]);
        for b in &s.branches {
            assert!(steady_state_residual(b, -5.0, &p) < 1e-9);
        }
    }

    #[test]
    fn no_root_beyond_upper_threshold() {
        assert!(matches!(
            find_steady_states(30.0, &defaults()),
            Err(SolveError::NoRoot { .. })
        ));
    }

    #[test]
    fn y_left_derivatives_match_differences() {
        let p = defaults();
        for d in [-3.0, -0.2, 0.15, 4.0] {
            let h = 1e-5;
            let (y, y1, y2) = y_left_derivs(d, &p);
            let (yp, ..) = y_left_derivs(d + h, &p);
            let (ym, ..) = y_left_derivs(d - h, &p);
            assert!(rel(y, y_left(d, &p)) < 1e-9);
            assert!(rel(y1, (yp - ym) / (2.0 * h)) < 1e-5);
            assert!(rel(y2, (yp - 2.0 * y + ym) / (h * h)) < 1e-3);
        }
    }
}
