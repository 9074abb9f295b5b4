//! Probe susceptibility of the atomic medium at each steady state, and
//! branch-resolved sweeps of it over Δ₀.

use rayon::prelude::*;

use crate::error::ChiError;
use crate::params::SystemParams;
use crate::stability::classify_all;
use crate::steady_state::{solve, BranchSolution, Stability};

/// Smallest accepted `Xi² + Theta²`.
pub const DENOM_FLOOR: f64 = 1e-30;
/// A curve continues only if Δ_p,s moves by less than this many times the
/// change expected from the grid step.
pub const JUMP_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiValue {
    /// Re χ (in units of F when `f_scale` is 1).
    pub re: f64,
    pub im: f64,
    pub f_scale: f64,
    pub xi: f64,
    pub theta: f64,
    pub delta_ps: f64,
    pub branch_index: usize,
}

/// χ at a steady-state detuning.
pub fn chi_at(delta_ps: f64, branch_index: usize, p: &SystemParams) -> Result<ChiValue, ChiError> {
    let dd = delta_ps - p.delta_c;
    let xi = p.gamma1 * dd + p.gamma2 * delta_ps;
    let theta = p.omega * p.omega - delta_ps * dd + p.gamma1 * p.gamma2;
    let den = xi * xi + theta * theta;
    if !(den >= DENOM_FLOOR) {
        return Err(ChiError::DegenerateDenominator(den));
    }
    let f = p.f_scale;
    Ok(ChiValue {
        re: f * (p.gamma2 * xi - dd * theta) / den,
        im: f * (p.gamma2 * theta + dd * xi) / den,
        f_scale: f,
        xi,
        theta,
        delta_ps,
        branch_index,
    })
}

pub fn chi(b: &BranchSolution, p: &SystemParams) -> Result<ChiValue, ChiError> {
    chi_at(b.delta_ps, b.branch_index, p)
}

/// Susceptibility with the mirror clamped (Δ_p,s = Δ₀).
pub fn chi_fixed_mirror(delta0: f64, p: &SystemParams) -> Result<ChiValue, ChiError> {
    chi_at(delta0, 0, p)
}

/// One continuous stable curve; `points` are (grid index, value).
#[derive(Debug, Clone, PartialEq)]
pub struct ChiCurve {
    pub branch_index: usize,
    pub points: Vec<(usize, ChiValue)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarantinedChi {
    pub grid_index: usize,
    pub delta0: f64,
    pub stability: Stability,
    pub value: ChiValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSweep {
    pub grid: Vec<f64>,
    /// Stable branches, split wherever continuity breaks.
    pub curves: Vec<ChiCurve>,
    /// Unstable and marginal branches.
    pub quarantined: Vec<QuarantinedChi>,
    /// Grid points with no steady state.
    pub empty: Vec<usize>,
}

/// Solves, classifies and evaluates χ on every grid point (in parallel),
/// then links stable branches into curves in one ordered pass.
pub fn chi_sweep(p: &SystemParams, grid: &[f64]) -> Result<ChiSweep, ChiError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(ChiError::BadGrid);
    }
    let solved: Vec<Vec<BranchSolution>> = grid
        .par_iter()
        .map(|&d0| match solve(d0, p) {
            Ok(mut s) => {
                classify_all(&mut s, p);
                s.branches
            }
            Err(_) => Vec::new(),
        })
        .collect();

    let mut curves: Vec<ChiCurve> = Vec::new();
    let mut open: Vec<usize> = Vec::new();
    let mut quarantined = Vec::new();
    let mut empty = Vec::new();
    for (gi, branches) in solved.iter().enumerate() {
        if branches.is_empty() {
            empty.push(gi);
        }
        let mut next_open = Vec::new();
        for b in branches {
            let value = chi(b, p)?;
            if b.stability != Stability::Stable {
                quarantined.push(QuarantinedChi {
                    grid_index: gi,
                    delta0: grid[gi],
                    stability: b.stability,
                    value,
                });
                continue;
            }
            let hit = open.iter().copied().find(|&ci| {
                let c = &curves[ci];
                c.branch_index == b.branch_index && continues(c, grid, gi, b.delta_ps)
            });
            let ci = match hit {
                Some(ci) => {
                    open.retain(|&o| o != ci);
                    curves[ci].points.push((gi, value));
                    ci
                }
                None => {
                    curves.push(ChiCurve {
                        branch_index: b.branch_index,
                        points: vec![(gi, value)],
                    });
                    curves.len() - 1
                }
            };
            next_open.push(ci);
        }
        open = next_open;
    }
    Ok(ChiSweep {
        grid: grid.to_vec(),
        curves,
        quarantined,
        empty,
    })
}

fn continues(c: &ChiCurve, grid: &[f64], gi: usize, delta_ps: f64) -> bool {
    let &(li, last) = c.points.last().unwrap();
    if li + 1 != gi {
        return false;
    }
    let step = grid[gi] - grid[li];
    // expected change: the curve's own last slope, at least one grid step
    let slope = if c.points.len() >= 2 {
        let &(pi, prev) = &c.points[c.points.len() - 2];
        ((last.delta_ps - prev.delta_ps) / (grid[li] - grid[pi])).abs()
    } else {
        1.0
    };
    let expected = step * slope.max(1.0);
    (delta_ps - last.delta_ps).abs() <= JUMP_FACTOR * expected
}

/// Largest Im χ over the stable curves at each grid point; points without
/// a stable branch are skipped.
pub fn absorption_envelope(sweep: &ChiSweep) -> Vec<(f64, f64)> {
    let mut best: Vec<Option<f64>> = vec![None; sweep.grid.len()];
    for c in &sweep.curves {
        for &(gi, v) in &c.points {
            best[gi] = Some(best[gi].map_or(v.im, |b: f64| b.max(v.im)));
        }
    }
    sweep
        .grid
        .iter()
        .zip(best)
        .filter_map(|(&d, b)| b.map(|im| (d, im)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowMetrics {
    pub center: f64,
    pub width: f64,
    pub floor: f64,
    pub left_peak: f64,
    pub right_peak: f64,
}

/// Transparency window between the two largest absorption peaks of a
/// sampled `(Δ₀, Im χ)` curve.
pub fn window_metrics(curve: &[(f64, f64)]) -> Result<WindowMetrics, ChiError> {
    let n = curve.len();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| curve[i].1 > curve[i - 1].1 && curve[i].1 >= curve[i + 1].1)
        .collect();
    if peaks.len() < 2 {
        return Err(ChiError::NoWindow { peaks: peaks.len() });
    }
    peaks.sort_by(|&a, &b| curve[b].1.partial_cmp(&curve[a].1).unwrap());
    let (mut l, mut r) = (peaks[0], peaks[1]);
    if l > r {
        std::mem::swap(&mut l, &mut r);
    }
    let (imin, _) = (l..=r).fold((l, f64::INFINITY), |acc, i| {
        if curve[i].1 < acc.1 {
            (i, curve[i].1)
        } else {
            acc
        }
    });
    let floor = curve[imin].1;
    let level = 0.1 * curve[l].1.min(curve[r].1);
    let width = if floor >= level {
        0.0
    } else {
        let cross = |i: usize, j: usize| {
            let (x0, y0) = curve[i];
            let (x1, y1) = curve[j];
            if y1 == y0 {
                x0
            } else {
                x0 + (level - y0) * (x1 - x0) / (y1 - y0)
            }
        };
        let mut a = imin;
        while a > l && curve[a - 1].1 < level {
            a -= 1;
        }
        let mut b = imin;
        while b < r && curve[b + 1].1 < level {
            b += 1;
        }
        cross(b, b + 1) - cross(a - 1, a)
    };
    Ok(WindowMetrics {
        center: curve[imin].0,
        width,
        floor,
        left_peak: curve[l].0,
        right_peak: curve[r].0,
    })
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
        .collect()
}
