//! Linear stability of the steady states under the mean-field equations of
//! motion, with the rotating frame frozen at a chosen mirror position.

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;

use crate::error::StabilityError;
use crate::params::SystemParams;
use crate::steady_state::{BranchSolution, Stability, SteadyStates};

pub type Matrix8 = SMatrix<f64, 8, 8>;

/// Eigenvalues closer to the imaginary axis than this (times the spectral
/// radius of their block) are called marginal.
pub const STABILITY_TOL_REL: f64 = 1e-9;

pub const IX: usize = 0;
pub const IP: usize = 1;
pub const IA_RE: usize = 2;
pub const IA_IM: usize = 3;
pub const IBIG_A_RE: usize = 4;
pub const IBIG_A_IM: usize = 5;
pub const IC_RE: usize = 6;
pub const IC_IM: usize = 7;

/// Mean values of (x, p, ã, Ã, C̃) as eight reals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanFieldState(pub [f64; 8]);

impl MeanFieldState {
    pub fn new(x: f64, p: f64, a: Complex64, big_a: Complex64, c: Complex64) -> Self {
        MeanFieldState([x, p, a.re, a.im, big_a.re, big_a.im, c.re, c.im])
    }

    pub fn from_branch(b: &BranchSolution) -> Self {
        Self::new(b.x_s, 0.0, b.a_s, b.big_a_s, b.c_s)
    }

    pub fn x(&self) -> f64 {
        self.0[IX]
    }
    pub fn p(&self) -> f64 {
        self.0[IP]
    }
    pub fn a(&self) -> Complex64 {
        Complex64::new(self.0[IA_RE], self.0[IA_IM])
    }
    pub fn big_a(&self) -> Complex64 {
        Complex64::new(self.0[IBIG_A_RE], self.0[IBIG_A_IM])
    }
    pub fn c(&self) -> Complex64 {
        Complex64::new(self.0[IC_RE], self.0[IC_IM])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Right-hand side of the mean-field equations.
pub fn drift(s: &MeanFieldState, frame_x: f64, delta0: f64, p: &SystemParams) -> MeanFieldState {
    let m = p.mirror_mass();
    let k = p.pull(delta0);
    let delta_p = delta0 + k * frame_x;
    let i = Complex64::i();
    let (a, aa, c) = (s.a(), s.big_a(), s.c());

    let xdot = s.p() / m;
    let pdot = -(p.mirror_damping() / (2.0 * m)) * s.p() + k * a.norm_sqr()
        - m * p.omega_m * p.omega_m * s.x();
    let adot = -Complex64::new(0.5 * p.gamma0, -k * (frame_x - s.x())) * a - i * p.g_n * aa
        + p.gamma0.sqrt() * p.alpha_in;
    let aadot = -Complex64::new(p.gamma1, delta_p) * aa - i * p.omega * c - i * p.g_n * a;
    let cdot = -Complex64::new(p.gamma2, delta_p - p.delta_c) * c - i * p.omega * aa;
    MeanFieldState::new(xdot, pdot, adot, aadot, cdot)
}

/// Analytic Jacobian of [`drift`] at an arbitrary state.
pub fn jacobian_at(s: &MeanFieldState, frame_x: f64, delta0: f64, p: &SystemParams) -> Matrix8 {
    let m = p.mirror_mass();
    let k = p.pull(delta0);
    let delta_p = delta0 + k * frame_x;
    let a = s.a();
    let mut j = Matrix8::zeros();

    j[(IX, IP)] = 1.0 / m;
    j[(IP, IP)] = -p.mirror_damping() / (2.0 * m);
    j[(IP, IX)] = -m * p.omega_m * p.omega_m;
    j[(IP, IA_RE)] = 2.0 * k * a.re;
    j[(IP, IA_IM)] = 2.0 * k * a.im;

    // d(ȧ)/dx = −i k ã
    j[(IA_RE, IX)] = k * a.im;
    j[(IA_IM, IX)] = -k * a.re;

    let set = |j: &mut Matrix8, row: usize, col: usize, z: Complex64| {
        j[(row, col)] = z.re;
        j[(row, col + 1)] = -z.im;
        j[(row + 1, col)] = z.im;
        j[(row + 1, col + 1)] = z.re;
    };
    let i = Complex64::i();
    set(&mut j, IA_RE, IA_RE, -Complex64::new(0.5 * p.gamma0, -k * (frame_x - s.x())));
    set(&mut j, IA_RE, IBIG_A_RE, -i * p.g_n);
    set(&mut j, IBIG_A_RE, IBIG_A_RE, -Complex64::new(p.gamma1, delta_p));
    set(&mut j, IBIG_A_RE, IC_RE, -i * p.omega);
    set(&mut j, IBIG_A_RE, IA_RE, -i * p.g_n);
    set(&mut j, IC_RE, IC_RE, -Complex64::new(p.gamma2, delta_p - p.delta_c));
    set(&mut j, IC_RE, IBIG_A_RE, -i * p.omega);
    j
}

/// Jacobian at a branch, in the branch's own rotating frame.
pub fn jacobian(b: &BranchSolution, delta0: f64, p: &SystemParams) -> Matrix8 {
    jacobian_at(&MeanFieldState::from_branch(b), b.x_s, delta0, p)
}

/// Expected trace of the Jacobian (sum of the damping rates).
pub fn jacobian_trace(p: &SystemParams) -> f64 {
    -p.mirror_damping() / (2.0 * p.mirror_mass()) - p.gamma0 - 2.0 * p.gamma1 - 2.0 * p.gamma2
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityVerdict {
    pub label: Stability,
    pub max_real_eig: f64,
    pub eigenvalues: [Complex64; 8],
    pub tol: f64,
    /// Mirror damping the verdict was computed with.
    pub gamma_m: f64,
}

/// Eigenvalues of `j` and the largest spectral radius among its irreducible
/// blocks (after removing each complex block's mean rotation).
pub fn spectrum(j: &Matrix8) -> ([Complex64; 8], f64) {
    let mut out = Vec::with_capacity(8);
    let mut radius: f64 = 0.0;
    for block in irreducible_blocks(j) {
        let (eigs, r) = block_eigenvalues(j, &block);
        radius = radius.max(r);
        out.extend(eigs);
    }
    out.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut arr = [Complex64::new(0.0, 0.0); 8];
    arr.copy_from_slice(&out);
    (arr, radius)
}

pub fn verdict_for(j: &Matrix8, p: &SystemParams) -> StabilityVerdict {
    let (eigenvalues, radius) = spectrum(j);
    let max_real_eig = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tol = STABILITY_TOL_REL * radius.max(1.0);
    let label = if max_real_eig < -tol {
        Stability::Stable
    } else if max_real_eig > tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    };
    StabilityVerdict {
        label,
        max_real_eig,
        eigenvalues,
        tol,
        gamma_m: p.mirror_damping(),
    }
}

/// Verdict for a branch without touching it. Degenerate (tangent) roots are
/// always Marginal.
pub fn verdict(b: &BranchSolution, delta0: f64, p: &SystemParams) -> StabilityVerdict {
    let mut v = verdict_for(&jacobian(b, delta0, p), p);
    if b.degenerate {
        v.label = Stability::Marginal;
    }
    v
}

/// Classifies a branch and records the label on it.
pub fn classify(
    b: &mut BranchSolution,
    delta0: f64,
    p: &SystemParams,
) -> Result<StabilityVerdict, StabilityError> {
    let v = verdict(b, delta0, p);
    b.stability = v.label;
    if v.label == Stability::Marginal {
        return Err(StabilityError::MarginalAtThreshold {
            max_real_eig: v.max_real_eig,
            tol: v.tol,
        });
    }
    Ok(v)
}

/// Classifies every branch, leaving Marginal ones labelled as such.
pub fn classify_all(states: &mut SteadyStates, p: &SystemParams) -> Vec<StabilityVerdict> {
    let d0 = states.delta0;
    states
        .branches
        .iter_mut()
        .map(|b| {
            let v = verdict(b, d0, p);
            b.stability = v.label;
            v
        })
        .collect()
}

/// Real unit direction (Euclidean) of the eigenvector belonging to the
/// eigenvalue with the largest real part, by inverse iteration.
pub fn least_stable_direction(j: &Matrix8, lambda: Complex64) -> [f64; 8] {
    let n = 8;
    let scale = j.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let shift = lambda + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            mat[(r, c)] = Complex64::new(j[(r, c)], 0.0);
        }
        mat[(r, r)] -= shift;
    }
    let lu = mat.lu();
    let mut v = DVector::<Complex64>::from_element(n, Complex64::new(1.0, 0.3));
    for _ in 0..4 {
        if let Some(w) = lu.solve(&v) {
            let norm = w.norm();
            if norm > 0.0 && norm.is_finite() {
                v = w / Complex64::new(norm, 0.0);
            }
        }
    }
    // Rotate so the largest component is real, then keep the real part.
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[imax].conj() / v[imax].norm();
    let mut out = [0.0; 8];
    for (o, z) in out.iter_mut().zip(v.iter()) {
        *o = (z * phase).re;
    }
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    for o in &mut out {
        *o /= norm;
    }
    out
}

/// Index sets of the strongly connected components of the Jacobian's
/// sparsity graph. Eigenvalues of a reducible matrix are the union of the
/// eigenvalues of these diagonal blocks.
fn irreducible_blocks(j: &Matrix8) -> Vec<Vec<usize>> {
    let n = 8;
    let mut reach = [[false; 8]; 8];
    for (r, row) in reach.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            *cell = r == c || j[(r, c)] != 0.0;
        }
    }
    for k in 0..n {
        for r in 0..n {
            if reach[r][k] {
                for c in 0..n {
                    if reach[k][c] {
                        reach[r][c] = true;
                    }
                }
            }
        }
    }
    let mut assigned = [false; 8];
    let mut blocks = Vec::new();
    for r in 0..n {
        if assigned[r] {
            continue;
        }
        let block: Vec<usize> = (0..n).filter(|&c| reach[r][c] && reach[c][r]).collect();
        for &c in &block {
            assigned[c] = true;
        }
        blocks.push(block);
    }
    blocks
}

/// Whether a block consists of whole (re, im) pairs of the field variables
/// and acts complex-linearly on them.
fn complex_pairs(j: &Matrix8, block: &[usize]) -> Option<Vec<usize>> {
    if !block.len().is_multiple_of(2) || block.iter().any(|&i| i < IA_RE) {
        return None;
    }
    let pairs: Vec<usize> = block.iter().copied().filter(|i| i % 2 == 0).collect();
    if pairs.len() * 2 != block.len() || pairs.iter().any(|i| !block.contains(&(i + 1))) {
        return None;
    }
    for &r in &pairs {
        for &c in &pairs {
            let (a, b) = (j[(r, c)], j[(r, c + 1)]);
            let (cc, d) = (j[(r + 1, c)], j[(r + 1, c + 1)]);
            if a != d || b != -cc {
                return None;
            }
        }
    }
    Some(pairs)
}

fn block_eigenvalues(j: &Matrix8, block: &[usize]) -> (Vec<Complex64>, f64) {
    if let Some(pairs) = complex_pairs(j, block) {
        let n = pairs.len();
        let mut z = DMatrix::<Complex64>::zeros(n, n);
        for (r, &pr) in pairs.iter().enumerate() {
            for (c, &pc) in pairs.iter().enumerate() {
                z[(r, c)] = Complex64::new(j[(pr, pc)], j[(pr + 1, pc)]);
            }
        }
        let shift = (0..n).map(|i| z[(i, i)]).sum::<Complex64>() / n as f64;
        for i in 0..n {
            z[(i, i)] -= shift;
        }
        let eig = complex_eigenvalues(z);
        let radius = eig.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let mut out = Vec::with_capacity(2 * n);
        for e in eig {
            out.push(e + shift);
            out.push((e + shift).conj());
        }
        return (out, radius);
    }

    let n = block.len();
    if n == 1 {
        let v = j[(block[0], block[0])];
        return (vec![Complex64::new(v, 0.0)], v.abs());
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (r, &br) in block.iter().enumerate() {
        for (c, &bc) in block.iter().enumerate() {
            m[(r, c)] = j[(br, bc)];
        }
    }
    balance(&mut m);
    let eig: Vec<Complex64> = m
        .schur()
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    let radius = eig.iter().map(|e| e.norm()).fold(0.0, f64::max);
    (eig, radius)
}

fn complex_eigenvalues(z: DMatrix<Complex64>) -> Vec<Complex64> {
    let n = z.nrows();
    if n == 1 {
        return vec![z[(0, 0)]];
    }
    if n == 2 {
        // closed form keeps tiny real parts exact
        let (a, b, c, d) = (z[(0, 0)], z[(0, 1)], z[(1, 0)], z[(1, 1)]);
        let tr = a + d;
        let disc = ((a - d) * (a - d) * 0.25 + b * c).sqrt();
        return vec![tr * 0.5 + disc, tr * 0.5 - disc];
    }
    match z.clone().eigenvalues() {
        Some(v) => v.iter().copied().collect(),
        None => nalgebra::Schur::new(z).eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default(),
    }
}

/// Parlett–Reinsch diagonal similarity balancing (powers of two, so exact).
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for k in 0..n {
                if k != i {
                    c += m[(k, i)].abs();
                    r += m[(i, k)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / radix {
                cc *= radix;
                rr /= radix;
                f *= radix;
            }
            while cc >= rr * radix {
                cc /= radix;
                rr *= radix;
                f /= radix;
            }
            if (cc + rr) < 0.95 * s {
                done = false;
                for k in 0..n {
                    m[(i, k)] /= f;
                    m[(k, i)] *= f;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steady_state::find_steady_states;

    #[test]
    fn trace_matches_damping_sum() {
        let p = SystemParams::paper_defaults();
        let s = find_steady_states(-5.0, &p).unwrap();
        for b in &s.branches {
            let j = jacobian(b, -5.0, &p);
            assert!((j.trace() - jacobian_trace(&p)).abs() < 1e-12 * jacobian_trace(&p).abs());
        }
    }

    #[test]
    fn fixed_point_has_no_drift() {
        let p = SystemParams::paper_defaults();
        let s = find_steady_states(10.0, &p).unwrap();
        for b in &s.branches {
            let f = drift(&MeanFieldState::from_branch(b), b.x_s, 10.0, &p);
            let a_scale = p.gamma0.sqrt() * p.alpha_in;
            assert!(f.a().norm() < 1e-9 * a_scale);
            assert!(f.big_a().norm() < 1e-9 * (p.g_n * b.a_s.norm()));
        }
    }

    #[test]
    fn decoupled_mirror_is_damped_oscillator() {
        let p = SystemParams {
            g_n: 0.0,
            omega: 0.0,
            ..SystemParams::paper_defaults()
        };
        let s = MeanFieldState([1e-3, 2e-3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = drift(&s, 0.0, 0.0, &p);
        let m = p.mirror_mass();
        assert_eq!(f.0[IX], 2e-3 / m);
        let want = -(p.mirror_damping() / (2.0 * m)) * 2e-3 - m * 1e-3;
        assert!((f.0[IP] - want).abs() < 1e-15);
    }

    #[test]
    fn paper_stability_claims() {
        let p = SystemParams::paper_defaults();
        let mut s = find_steady_states(10.0, &p).unwrap();
        classify_all(&mut s, &p);
        assert_eq!(s.branch(1).unwrap().stability, Stability::Unstable);

        let mut s = find_steady_states(-5.0, &p).unwrap();
        classify_all(&mut s, &p);
        let stable = s.branches.iter().filter(|b| b.stability == Stability::Stable).count();
        assert!((1..=3).contains(&stable));
    }

    #[test]
    fn bare_cavity_branch_is_stable() {
        let p = SystemParams {
            g_n: 0.0,
            ..SystemParams::paper_defaults()
        };
        let mut s = find_steady_states(0.0, &p).unwrap();
        let v = classify(&mut s.branches[0], 0.0, &p).unwrap();
        assert_eq!(v.label, Stability::Stable);
        // decoupled atoms: underdamped pair with real part −(γ₁+γ₂)/2
        let want = -0.5 * (p.gamma1 + p.gamma2);
        let hits = v.eigenvalues.iter().filter(|z| (z.re - want).abs() < 1e-9).count();
        assert_eq!(hits, 4, "{:?}", v.eigenvalues);
    }

    #[test]
    fn spectrum_is_conjugate_closed() {
        let p = SystemParams::paper_defaults();
        let s = find_steady_states(-5.0, &p).unwrap();
        for b in &s.branches {
            let (eig, _) = spectrum(&jacobian(b, -5.0, &p));
            for z in eig {
                let partner = eig
                    .iter()
                    .map(|w| (w - z.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(partner <= 1e-9 * (1.0 + z.norm()));
            }
        }
    }
}
