//! Critical detunings where steady-state roots appear or vanish in pairs,
//! the region structure they induce, and the critical spring constant below
//! which the lowest region does not exist.

use rayon::prelude::*;

use crate::error::ThresholdError;
use crate::params::SystemParams;
use crate::steady_state::{solve, y_left_derivs};

/// Log-spaced scan points on each side of `Delta_c`.
pub const SCAN_POINTS_PER_SIDE: usize = 2048;
/// Extra uniformly spaced scan points over the whole range.
pub const SCAN_POINTS_UNIFORM: usize = 512;
/// Relative width to which each count change is bisected.
pub const BISECT_REL: f64 = 1e-6;
/// Relative accuracy of the kappa lower bound.
pub const KAPPA_REL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThresholdKind {
    /// Between regions b (2 roots) and a (none).
    Cd,
    /// Between c (4 roots) and b.
    Bc,
    /// Between d (2 roots) and c.
    Ab,
    Other,
}

impl ThresholdKind {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdKind::Cd => "cd",
            ThresholdKind::Bc => "bc",
            ThresholdKind::Ab => "ab",
            ThresholdKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    A,
    B,
    C,
    D,
    Other,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::A => "a",
            RegionLabel::B => "b",
            RegionLabel::C => "c",
            RegionLabel::D => "d",
            RegionLabel::Other => "?",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub kind: ThresholdKind,
    pub delta0: f64,
    /// Where the two merging roots touch (the tangency point).
    pub touch: f64,
    pub count_above: usize,
    pub count_below: usize,
    /// Whether the tangency refinement converged; otherwise `delta0` is the
    /// bisection midpoint.
    pub refined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub label: RegionLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub kappa: f64,
    /// Range actually scanned (the top may be clamped below `omega_a`).
    pub lo: f64,
    pub hi: f64,
    pub clamped_hi: bool,
    /// Ascending in Δ₀.
    pub thresholds: Vec<Threshold>,
    /// Ascending in Δ₀.
    pub regions: Vec<Region>,
    pub kappa_l: Option<KappaBound>,
}

impl RegionReport {
    pub fn threshold(&self, kind: ThresholdKind) -> Option<&Threshold> {
        self.thresholds.iter().find(|t| t.kind == kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaBound {
    pub kappa_l: f64,
    /// Bracket the bisection ended with.
    pub kappa_below: f64,
    pub kappa_above: f64,
    /// Δ₀ window searched for the lowest transition.
    pub window_lo: f64,
    pub window_hi: f64,
}

/// Number of physical steady states at `delta0` (tangent pairs count two).
/// Detunings that leave no positive cavity frequency have none.
pub fn count_roots(delta0: f64, p: &SystemParams) -> usize {
    solve(delta0, p).map(|s| s.root_count()).unwrap_or(0)
}

/// Highest Δ₀ that still leaves a positive cavity frequency.
pub fn max_delta0(p: &SystemParams) -> f64 {
    p.omega_a * (1.0 - 1e-9)
}

fn scan_grid(lo: f64, hi: f64, centre: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    if centre > lo && centre < hi {
        pts.push(centre);
    }
    let o_min = 1e-6 * (1.0 + centre.abs());
    let o_max = (hi - centre).max(centre - lo);
    if o_max > o_min {
        let n = SCAN_POINTS_PER_SIDE;
        let ratio = (o_max / o_min).ln();
        for i in 0..n {
            let off = o_min * (ratio * i as f64 / (n - 1) as f64).exp();
            for v in [centre + off, centre - off] {
                if v > lo && v < hi {
                    pts.push(v);
                }
            }
        }
    }
    for i in 1..SCAN_POINTS_UNIFORM {
        pts.push(lo + (hi - lo) * i as f64 / SCAN_POINTS_UNIFORM as f64);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// Scans Δ₀ over `[lo, hi]`, locating every change in the root count.
pub fn find_thresholds(p: &SystemParams, lo: f64, hi: f64) -> Result<RegionReport, ThresholdError> {
    p.validate()?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ThresholdError::InvalidRange(format!("[{lo}, {hi}]")));
    }
    let top = max_delta0(p);
    let clamped_hi = hi > top;
    let hi = hi.min(top);
    if lo >= hi {
        return Err(ThresholdError::InvalidRange(format!(
            "[{lo}, {hi}] leaves no positive cavity frequency"
        )));
    }

    let grid = scan_grid(lo, hi, p.delta_c);
    let counts: Vec<usize> = grid.par_iter().map(|&d| count_roots(d, p)).collect();

    let mut thresholds = Vec::new();
    for i in 0..grid.len() - 1 {
        if counts[i] != counts[i + 1] {
            thresholds.push(locate(p, grid[i], grid[i + 1], counts[i], counts[i + 1]));
        }
    }
    if thresholds.is_empty() {
        return Err(ThresholdError::NoTransition {
            lo,
            hi,
            count: counts[0],
        });
    }

    let mut regions = Vec::new();
    let mut start = lo;
    for t in &thresholds {
        regions.push(Region {
            lo: start,
            hi: t.delta0,
            count: t.count_below,
            label: RegionLabel::Other,
        });
        start = t.delta0;
    }
    regions.push(Region {
        lo: start,
        hi,
        count: thresholds.last().unwrap().count_above,
        label: RegionLabel::Other,
    });
    label_regions(&mut regions);
    for (k, t) in thresholds.iter_mut().enumerate() {
        t.kind = kind_between(regions[k].label, regions[k + 1].label);
    }

    Ok(RegionReport {
        kappa: p.kappa,
        lo,
        hi,
        clamped_hi,
        thresholds,
        regions,
        kappa_l: None,
    })
}

/// Names regions by the a/b/c/d pattern read downward from region a (the
/// lowest empty region with two roots just below it). Anything outside that
/// chain, such as roots re-entering as the cavity frequency nears zero or a
/// second 2 → 4 change far below region d, is `Other`.
fn label_regions(regions: &mut [Region]) {
    for r in regions.iter_mut() {
        r.label = RegionLabel::Other;
    }
    let chain = [(2, RegionLabel::B), (4, RegionLabel::C), (2, RegionLabel::D)];
    let top = (1..regions.len()).find(|&i| regions[i].count == 0 && regions[i - 1].count == 2);
    match top {
        Some(ia) => {
            regions[ia].label = RegionLabel::A;
            for (k, &(count, label)) in chain.iter().enumerate() {
                match ia.checked_sub(k + 1) {
                    Some(i) if regions[i].count == count => regions[i].label = label,
                    _ => break,
                }
            }
        }
        None => {
            // region a out of range: anchor on the highest 4-root region
            if let Some(ic) = (0..regions.len()).rev().find(|&i| regions[i].count == 4) {
                regions[ic].label = RegionLabel::C;
                if ic + 1 < regions.len() && regions[ic + 1].count == 2 {
                    regions[ic + 1].label = RegionLabel::B;
                }
                if ic > 0 && regions[ic - 1].count == 2 {
                    regions[ic - 1].label = RegionLabel::D;
                }
            }
        }
    }
}

fn kind_between(below: RegionLabel, above: RegionLabel) -> ThresholdKind {
    match (below, above) {
        (RegionLabel::B, RegionLabel::A) => ThresholdKind::Cd,
        (RegionLabel::C, RegionLabel::B) => ThresholdKind::Bc,
        (RegionLabel::D, RegionLabel::C) => ThresholdKind::Ab,
        _ => ThresholdKind::Other,
    }
}

/// Bisects a count change, then polishes it on the tangency conditions.
fn locate(p: &SystemParams, mut a: f64, mut b: f64, ca: usize, cb: usize) -> Threshold {
    let (count_below, count_above) = (ca, cb);
    while (b - a) > BISECT_REL * (1.0 + 0.5 * (a + b).abs()) {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if count_roots(m, p) == ca {
            a = m;
        } else {
            b = m;
        }
    }
    let mid = 0.5 * (a + b);
    // The pair is close together on the side with more roots.
    let more = if ca > cb { a } else { b };
    let kind = ThresholdKind::Other;
    let guess = closest_pair(more, p).unwrap_or(mid);
    let width = (b - a).max(BISECT_REL * (1.0 + mid.abs()));
    match refine_tangency(p, mid, guess) {
        Some((d0, touch)) if (d0 - mid).abs() <= 4.0 * width => Threshold {
            kind,
            delta0: d0,
            touch,
            count_above,
            count_below,
            refined: true,
        },
        _ => Threshold {
            kind,
            delta0: mid,
            touch: guess,
            count_above,
            count_below,
            refined: false,
        },
    }
}

/// Midpoint of the two closest roots (or the degenerate root) at `delta0`.
fn closest_pair(delta0: f64, p: &SystemParams) -> Option<f64> {
    let s = solve(delta0, p).ok()?;
    if let Some(b) = s.branches.iter().find(|b| b.degenerate) {
        return Some(b.delta_ps);
    }
    let mut d: Vec<f64> = s.branches.iter().map(|b| b.delta_ps).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d.windows(2)
        .min_by(|x, y| (x[1] - x[0]).partial_cmp(&(y[1] - y[0])).unwrap())
        .map(|w| 0.5 * (w[0] + w[1]))
}

/// Residuals of the tangency conditions at (Δ₀, Δ), each scaled by the
/// larger of its two terms.
pub fn tangency_residual(p: &SystemParams, delta0: f64, delta: f64) -> (f64, f64) {
    let s = p.pressure_slope(delta0);
    let (y, y1, _) = y_left_derivs(delta, p);
    let yr = s * (delta - delta0);
    let r1 = (y - yr).abs() / y.abs().max(yr.abs()).max(f64::MIN_POSITIVE);
    let r2 = (y1 - s).abs() / y1.abs().max(s).max(f64::MIN_POSITIVE);
    (r1, r2)
}

/// Newton on `Y_L(Δ) = s(Δ₀)(Δ − Δ₀)`, `Y_L'(Δ) = s(Δ₀)` from a nearby
/// guess. Returns `(Δ₀, Δ)` of the tangency.
pub fn refine_tangency(p: &SystemParams, delta0: f64, delta: f64) -> Option<(f64, f64)> {
    let (mut d0, mut d) = (delta0, delta);
    for _ in 0..60 {
        let u = d - d0;
        let s = p.pressure_slope(d0);
        let ds = 2.0 * s / p.omega0(d0);
        let (y, y1, y2) = y_left_derivs(d, p);
        let f1 = y - s * u;
        let f2 = y1 - s;
        // columns: ∂/∂Δ₀, ∂/∂Δ
        let j11 = s - ds * u;
        let j12 = y1 - s;
        let j21 = -ds;
        let j22 = y2;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step_d0 = (f1 * j22 - f2 * j12) / det;
        let step_d = (j11 * f2 - j21 * f1) / det;
        d0 -= step_d0;
        d -= step_d;
        if !(d0.is_finite() && d.is_finite()) {
            return None;
        }
        if step_d0.abs() <= 1e-15 * (1.0 + d0.abs()) && step_d.abs() <= 1e-15 * (1e-300 + d.abs()) {
            break;
        }
    }
    let (r1, r2) = tangency_residual(p, d0, d);
    (r1 < 1e-8 && r2 < 1e-8 && d > d0).then_some((d0, d))
}

/// The Δ₀ window searched for the lowest (4 → 2) transition when bounding κ.
pub fn kappa_window(p: &SystemParams, kappa_hi: f64) -> (f64, f64) {
    let mut reach = p.omega_a;
    if let Ok(r) = find_thresholds(&p.with_kappa(kappa_hi), -10.0 * p.omega_a, p.delta_c) {
        if let Some(t) = r.threshold(ThresholdKind::Ab) {
            reach = reach.max(t.delta0.abs());
        }
    }
    (p.delta_c - 10.0 * reach, p.delta_c)
}

fn has_lowest_region(p: &SystemParams, kappa: f64, window: (f64, f64)) -> bool {
    match find_thresholds(&p.with_kappa(kappa), window.0, window.1) {
        Ok(r) => r.threshold(ThresholdKind::Ab).is_some(),
        Err(_) => false,
    }
}

/// Smallest κ at which the 4 → 2 transition (and with it region d) exists,
/// by bisection in log κ.
pub fn kappa_lower_bound(p: &SystemParams, kappa_lo: f64, kappa_hi: f64) -> Result<KappaBound, ThresholdError> {
    p.validate()?;
    if !(kappa_lo > 0.0 && kappa_hi > kappa_lo && kappa_hi.is_finite()) {
        return Err(ThresholdError::InvalidRange(format!("kappa in [{kappa_lo}, {kappa_hi}]")));
    }
    let window = kappa_window(p, kappa_hi);
    let at_lo = has_lowest_region(p, kappa_lo, window);
    let at_hi = has_lowest_region(p, kappa_hi, window);
    if at_lo == at_hi {
        return Err(ThresholdError::SamePhase {
            lo: kappa_lo,
            hi: kappa_hi,
            phase: if at_lo { "three thresholds" } else { "fewer than three thresholds" },
        });
    }
    let (mut below, mut above) = if at_hi { (kappa_lo, kappa_hi) } else { (kappa_hi, kappa_lo) };
    while (above / below - 1.0).abs() > KAPPA_REL {
        let mid = (below * above).sqrt();
        if has_lowest_region(p, mid, window) {
            above = mid;
        } else {
            below = mid;
        }
    }
    Ok(KappaBound {
        kappa_l: (below * above).sqrt(),
        kappa_below: below,
        kappa_above: above,
        window_lo: window.0,
        window_hi: window.1,
    })
}

pub fn classify_region(delta0: f64, report: &RegionReport) -> Result<RegionLabel, ThresholdError> {
    if !(delta0 >= report.lo && delta0 <= report.hi) {
        return Err(ThresholdError::OutOfRange {
            delta0,
            lo: report.lo,
            hi: report.hi,
        });
    }
    Ok(report
        .regions
        .iter()
        .find(|r| delta0 >= r.lo && delta0 <= r.hi)
        .map(|r| r.label)
        .unwrap_or(RegionLabel::Other))
}
