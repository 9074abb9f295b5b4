//! Command-line front end. Every CSV carries a `#` manifest header (params,
//! flags, version) so a file can be regenerated from itself; data rows are
//! deterministic regardless of thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::dynamics::{basin_test, StateScale};
use crate::error::{DynamicsError, ThresholdError};
use crate::params::SystemParams;
use crate::stability::{classify_all, MeanFieldState};
use crate::steady_state::{solve, two_photon_residual, SteadyStates};
use crate::susceptibility::{chi_fixed_mirror, chi_sweep, uniform_grid};
use crate::thresholds::{find_thresholds, kappa_lower_bound, max_delta0, RegionReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_ROOT: i32 = 2;
pub const EXIT_NO_TRANSITION: i32 = 3;
pub const EXIT_STIFF: i32 = 4;
/// A basin test that neither converged nor diverged.
pub const EXIT_INCONCLUSIVE: i32 = 5;

const UNITS_NOTE: &str = "all rates/frequencies in units of gamma1";
/// Branch labels 1..=4 get their own columns.
const BRANCH_COLUMNS: usize = 4;

#[derive(Parser, Debug)]
#[command(name = "multistab-eit", version, about = "Steady states, stability and EIT susceptibility of a movable-mirror cavity with Lambda atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// `key = value` parameter file; omitted keys take the showcase defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "./out")]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Steady states and stability at one detuning.
    Solve {
        #[arg(long, allow_hyphen_values = true)]
        delta0: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Branch-tracked Δps and ⟨x⟩ over a detuning range.
    Sweep {
        #[arg(long, allow_hyphen_values = true, default_value_t = -6.0)]
        delta0_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 30.0)]
        delta0_max: f64,
        #[arg(long, default_value_t = 2048)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Critical detunings and the regions between them.
    Thresholds {
        /// Default: -10 omega_a.
        #[arg(long, allow_hyphen_values = true)]
        delta0_min: Option<f64>,
        /// Default: just below omega_a.
        #[arg(long, allow_hyphen_values = true)]
        delta0_max: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Smallest kappa at which region d exists.
    KappaBound {
        #[arg(long, default_value_t = 1e2)]
        kappa_min: f64,
        #[arg(long, default_value_t = 1e5)]
        kappa_max: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Probe susceptibility along the stable branches.
    Chi {
        #[arg(long, allow_hyphen_values = true, default_value_t = -6.0)]
        delta0_min: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 6.0)]
        delta0_max: f64,
        #[arg(long, default_value_t = 2001)]
        steps: usize,
        /// Overrides Delta_c from the config.
        #[arg(long, allow_hyphen_values = true)]
        delta_c: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Perturb a branch and integrate the mean-field equations.
    Evolve {
        #[arg(long, allow_hyphen_values = true)]
        delta0: f64,
        #[arg(long)]
        branch: usize,
        #[arg(long, default_value_t = 1e-3)]
        perturb: f64,
        /// Default: 40 / |max Re(lambda)|.
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Solve { common, .. }
            | Command::Sweep { common, .. }
            | Command::Thresholds { common, .. }
            | Command::KappaBound { common, .. }
            | Command::Chi { common, .. }
            | Command::Evolve { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Thresholds { .. } => "thresholds",
            Command::KappaBound { .. } => "kappa-bound",
            Command::Chi { .. } => "chi",
            Command::Evolve { .. } => "evolve",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_CONFIG, format!("cannot write {}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cmd: &Command) -> Result<(), CliError> {
    let common = cmd.common();
    let mut params = match &common.config {
        Some(path) => SystemParams::from_config_file(path)
            .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?,
        None => SystemParams::paper_defaults(),
    };
    if let Command::Chi { delta_c: Some(dc), .. } = cmd {
        params.delta_c = *dc;
    }
    params
        .validate()
        .map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::new(EXIT_CONFIG, "--threads must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::new(EXIT_CONFIG, format!("thread pool: {e}")))?;
    let manifest = manifest(cmd, &params);
    pool.install(|| dispatch(cmd, &params, &manifest))
}

fn dispatch(cmd: &Command, p: &SystemParams, manifest: &str) -> Result<(), CliError> {
    let out = &cmd.common().out;
    match *cmd {
        Command::Solve { delta0, .. } => cmd_solve(p, delta0, out, manifest),
        Command::Sweep {
            delta0_min,
            delta0_max,
            steps,
            ..
        } => cmd_sweep(p, delta0_min, delta0_max, steps, out, manifest),
        Command::Thresholds {
            delta0_min,
            delta0_max,
            ..
        } => {
            let lo = delta0_min.unwrap_or(-10.0 * p.omega_a);
            let hi = delta0_max.unwrap_or_else(|| max_delta0(p));
            let report = find_thresholds(p, lo, hi).map_err(threshold_err)?;
            write_report(&report, out, manifest)
        }
        Command::KappaBound {
            kappa_min,
            kappa_max,
            ..
        } => cmd_kappa_bound(p, kappa_min, kappa_max, out, manifest),
        Command::Chi {
            delta0_min,
            delta0_max,
            steps,
            ..
        } => cmd_chi(p, delta0_min, delta0_max, steps, out, manifest),
        Command::Evolve {
            delta0,
            branch,
            perturb,
            t_max,
            tol,
            ..
        } => cmd_evolve(p, delta0, branch, perturb, t_max, tol, out, manifest),
    }
}

fn threshold_err(e: ThresholdError) -> CliError {
    match e {
        ThresholdError::NoTransition { .. } | ThresholdError::SamePhase { .. } => {
            CliError::new(EXIT_NO_TRANSITION, e.to_string())
        }
        _ => CliError::new(EXIT_CONFIG, e.to_string()),
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn manifest(cmd: &Command, p: &SystemParams) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "# multistab-eit {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "# command: {}", cmd.name());
    let _ = writeln!(m, "# flags: {}", flags_line(cmd));
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(m, "# timestamp_unix: {stamp}");
    let _ = writeln!(m, "# units: {UNITS_NOTE}");
    for (k, v) in p.entries() {
        let _ = writeln!(m, "# param {k} = {}", num(v));
    }
    let _ = writeln!(m, "# derived M = {}", num(p.mirror_mass()));
    let _ = writeln!(
        m,
        "# derived gammaM = {}{}",
        num(p.mirror_damping()),
        if p.gamma_m.is_none() { " (default 0.1 M omega_M)" } else { "" }
    );
    let _ = writeln!(m, "# derived omega_M = {}", num(p.omega_m));
    let _ = writeln!(m, "# derived l = {}", num(p.l));
    m
}

fn flags_line(cmd: &Command) -> String {
    let c = cmd.common();
    let mut s = match cmd {
        Command::Solve { delta0, .. } => format!("--delta0 {delta0}"),
        Command::Sweep {
            delta0_min,
            delta0_max,
            steps,
            ..
        } => format!("--delta0-min {delta0_min} --delta0-max {delta0_max} --steps {steps}"),
        Command::Thresholds {
            delta0_min,
            delta0_max,
            ..
        } => {
            let mut s = String::new();
            if let Some(v) = delta0_min {
                let _ = write!(s, "--delta0-min {v} ");
            }
            if let Some(v) = delta0_max {
                let _ = write!(s, "--delta0-max {v}");
            }
            s.trim_end().to_string()
        }
        Command::KappaBound {
            kappa_min,
            kappa_max,
            ..
        } => format!("--kappa-min {kappa_min} --kappa-max {kappa_max}"),
        Command::Chi {
            delta0_min,
            delta0_max,
            steps,
            delta_c,
            ..
        } => {
            let mut s = format!("--delta0-min {delta0_min} --delta0-max {delta0_max} --steps {steps}");
            if let Some(dc) = delta_c {
                let _ = write!(s, " --delta-c {dc}");
            }
            s
        }
        Command::Evolve {
            delta0,
            branch,
            perturb,
            t_max,
            tol,
            ..
        } => {
            let mut s = format!("--delta0 {delta0} --branch {branch} --perturb {perturb} --tol {tol}");
            if let Some(t) = t_max {
                let _ = write!(s, " --t-max {t}");
            }
            s
        }
    };
    if let Some(path) = &c.config {
        let _ = write!(s, " --config {}", path.display());
    }
    // thread count and output directory never change data rows; omitted so
    // headers differ only by timestamp
    s
}

fn write_csv(out: &Path, name: &str, manifest: &str, header: &str, rows: &[String]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join(name);
    let mut text = String::with_capacity(manifest.len() + rows.len() * 128);
    text.push_str(manifest);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn solve_classified(delta0: f64, p: &SystemParams) -> Option<SteadyStates> {
    let mut s = solve(delta0, p).ok()?;
    classify_all(&mut s, p);
    Some(s)
}

fn cmd_solve(p: &SystemParams, delta0: f64, out: &Path, manifest: &str) -> Result<(), CliError> {
    let states = match solve(delta0, p) {
        Ok(s) if !s.branches.is_empty() => {
            let mut s = s;
            classify_all(&mut s, p);
            s
        }
        Ok(_) => {
            return Err(CliError::new(
                EXIT_NO_ROOT,
                format!("no steady state in region a (Delta0 = {delta0})"),
            ))
        }
        Err(e) => return Err(CliError::new(EXIT_NO_ROOT, e.to_string())),
    };
    let header = "branch_index,delta_ps,x_s,a_re,a_im,A_re,A_im,C_re,C_im,stability,degenerate,two_photon_residual";
    let rows: Vec<String> = states
        .branches
        .iter()
        .map(|b| {
            format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                b.branch_index,
                num(b.delta_ps),
                num(b.x_s),
                num(b.a_s.re),
                num(b.a_s.im),
                num(b.big_a_s.re),
                num(b.big_a_s.im),
                num(b.c_s.re),
                num(b.c_s.im),
                b.stability,
                b.degenerate,
                num(two_photon_residual(b, p)),
            )
        })
        .collect();
    let path = write_csv(out, "solve.csv", manifest, header, &rows)?;
    println!("{header}");
    for r in &rows {
        println!("{r}");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn check_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if steps < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::new(
            EXIT_CONFIG,
            format!("need steps >= 2 and delta0-min < delta0-max (got {steps}, [{lo}, {hi}])"),
        ));
    }
    Ok(uniform_grid(lo, hi, steps))
}

fn cmd_sweep(p: &SystemParams, lo: f64, hi: f64, steps: usize, out: &Path, manifest: &str) -> Result<(), CliError> {
    let grid = check_grid(lo, hi, steps)?;
    let solved: Vec<Option<SteadyStates>> = grid.par_iter().map(|&d0| solve_classified(d0, p)).collect();

    let cols: Vec<String> = (1..=BRANCH_COLUMNS).map(|i| format!("branch_{i}")).collect();
    let stab: Vec<String> = (1..=BRANCH_COLUMNS).map(|i| format!("stability_{i}")).collect();
    let header_dps = format!("delta0,root_count,{},{}", cols.join(","), stab.join(","));
    let header_x = format!("delta0,root_count,{}", cols.join(","));
    let mut rows_dps = Vec::with_capacity(grid.len());
    let mut rows_x = Vec::with_capacity(grid.len());
    for (&d0, s) in grid.iter().zip(&solved) {
        let mut dps = vec![String::new(); BRANCH_COLUMNS];
        let mut xs = vec![String::new(); BRANCH_COLUMNS];
        let mut st = vec![String::new(); BRANCH_COLUMNS];
        let count = s.as_ref().map_or(0, |s| s.root_count());
        if let Some(s) = s {
            for b in &s.branches {
                let k = b.branch_index.clamp(1, BRANCH_COLUMNS) - 1;
                if dps[k].is_empty() {
                    dps[k] = num(b.delta_ps);
                    xs[k] = num(b.x_s);
                    st[k] = b.stability.to_string();
                }
            }
        }
        rows_dps.push(format!("{},{count},{},{}", num(d0), dps.join(","), st.join(",")));
        rows_x.push(format!("{},{count},{}", num(d0), xs.join(",")));
    }
    let a = write_csv(out, "delta_ps.csv", manifest, &header_dps, &rows_dps)?;
    let b = write_csv(out, "x_s.csv", manifest, &header_x, &rows_x)?;
    eprintln!("wrote {} and {}", a.display(), b.display());
    Ok(())
}

fn write_report(r: &RegionReport, out: &Path, manifest: &str) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for t in &r.thresholds {
        rows.push(format!(
            "threshold,{},{},{},{},{},{}",
            t.kind.name(),
            num(t.delta0),
            num(t.touch),
            t.count_above,
            t.count_below,
            t.refined
        ));
    }
    for g in &r.regions {
        rows.push(format!("region,{},{},{},{},,", g.label.as_str(), num(g.lo), num(g.hi), g.count));
    }
    if let Some(k) = &r.kappa_l {
        rows.push(format!(
            "kappa_l,{},{},{},{},{},",
            num(k.kappa_l),
            num(k.kappa_below),
            num(k.kappa_above),
            num(k.window_lo),
            num(k.window_hi)
        ));
    }
    // per-kind column meaning: threshold(kind,delta0,touch,count_above,count_below,refined),
    // region(label,lo,hi,count), kappa_l(kappa_l,below,above,window_lo,window_hi)
    let header = "row,c1,c2,c3,c4,c5,c6";
    let mut m = manifest.to_string();
    let _ = writeln!(m, "# kappa = {}", num(r.kappa));
    let _ = writeln!(m, "# scanned [{}, {}]{}", num(r.lo), num(r.hi), if r.clamped_hi { " (top clamped below omega_a)" } else { "" });
    let _ = writeln!(m, "# threshold rows: kind,delta0,touch,count_above,count_below,refined");
    let _ = writeln!(m, "# region rows: label,lo,hi,count");
    let _ = writeln!(m, "# kappa_l rows: kappa_l,kappa_below,kappa_above,window_lo,window_hi");
    let path = write_csv(out, "regions.csv", &m, header, &rows)?;
    for t in &r.thresholds {
        println!("{} {} (roots {} below, {} above)", t.kind.name(), num(t.delta0), t.count_below, t.count_above);
    }
    if let Some(k) = &r.kappa_l {
        println!("kappa_L {}", num(k.kappa_l));
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_kappa_bound(p: &SystemParams, klo: f64, khi: f64, out: &Path, manifest: &str) -> Result<(), CliError> {
    let bound = kappa_lower_bound(p, klo, khi).map_err(threshold_err)?;
    let q = p.with_kappa(bound.kappa_above);
    let (lo, hi) = (bound.window_lo, bound.window_hi);
    let mut report = find_thresholds(&q, lo, hi).map_err(threshold_err)?;
    report.kappa_l = Some(bound);
    write_report(&report, out, manifest)
}

fn cmd_chi(p: &SystemParams, lo: f64, hi: f64, steps: usize, out: &Path, manifest: &str) -> Result<(), CliError> {
    let grid = check_grid(lo, hi, steps)?;
    let sweep = chi_sweep(p, &grid).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?;

    let mut header = String::from("delta0,re_chi_fixed,im_chi_fixed");
    for (k, c) in sweep.curves.iter().enumerate() {
        let _ = write!(header, ",re_chi_{k}_b{0},im_chi_{k}_b{0}", c.branch_index);
    }
    let mut cells = vec![vec![String::new(); 2 * sweep.curves.len()]; grid.len()];
    for (k, c) in sweep.curves.iter().enumerate() {
        for &(gi, v) in &c.points {
            cells[gi][2 * k] = num(v.re / v.f_scale);
            cells[gi][2 * k + 1] = num(v.im / v.f_scale);
        }
    }
    let rows: Vec<String> = grid
        .iter()
        .zip(&cells)
        .map(|(&d0, row)| {
            let fixed = chi_fixed_mirror(d0, p).ok();
            let mut s = format!(
                "{},{},{}",
                num(d0),
                opt_num(fixed.map(|v| v.re / v.f_scale)),
                opt_num(fixed.map(|v| v.im / v.f_scale))
            );
            for c in row {
                s.push(',');
                s.push_str(c);
            }
            s
        })
        .collect();
    let mut m = manifest.to_string();
    let _ = writeln!(m, "# chi columns are chi/F; one pair per continuous stable curve, _b<n> = branch index");
    let a = write_csv(out, "chi.csv", &m, &header, &rows)?;

    let qrows: Vec<String> = sweep
        .quarantined
        .iter()
        .map(|q| {
            format!(
                "{},{},{},{},{},{}",
                num(q.delta0),
                q.value.branch_index,
                q.stability,
                num(q.value.delta_ps),
                num(q.value.re / q.value.f_scale),
                num(q.value.im / q.value.f_scale)
            )
        })
        .collect();
    let b = write_csv(
        out,
        "chi_unstable.csv",
        manifest,
        "delta0,branch_index,stability,delta_ps,re_chi,im_chi",
        &qrows,
    )?;
    eprintln!("wrote {} and {}", a.display(), b.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    p: &SystemParams,
    delta0: f64,
    branch: usize,
    perturb: f64,
    t_max: Option<f64>,
    tol: f64,
    out: &Path,
    manifest: &str,
) -> Result<(), CliError> {
    let states = solve_classified(delta0, p)
        .filter(|s| !s.branches.is_empty())
        .ok_or_else(|| CliError::new(EXIT_NO_ROOT, format!("no steady state in region a (Delta0 = {delta0})")))?;
    let b = states.branch(branch).ok_or_else(|| {
        let have: Vec<String> = states.branches.iter().map(|b| b.branch_index.to_string()).collect();
        CliError::new(
            EXIT_CONFIG,
            format!("no branch {branch} at Delta0 = {delta0} (have {})", have.join(", ")),
        )
    })?;
    let outcome = basin_test(b, delta0, p, perturb, t_max, tol).map_err(|e| match e {
        DynamicsError::StepSizeUnderflow { .. } => CliError::new(
            EXIT_STIFF,
            format!("{e}; rates here span too many decades for explicit integration, try the stiffness-reduced parameter set (gamma0=1e-2, gamma2=1e-2, omega_a=1e3, gN=10, Omega=2, alpha_in=2, kappa=100)"),
        ),
        DynamicsError::Inconclusive { .. } => CliError::new(EXIT_INCONCLUSIVE, e.to_string()),
        _ => CliError::new(EXIT_CONFIG, e.to_string()),
    })?;

    let fixed = MeanFieldState::from_branch(b);
    let scale = StateScale::for_branch(b, p);
    let header = "t,x,p,a_re,a_im,A_re,A_im,C_re,C_im,distance";
    let tr = &outcome.trajectory;
    let rows: Vec<String> = tr
        .times
        .iter()
        .zip(&tr.states)
        .map(|(&t, s)| {
            let mut r = num(t);
            for v in s.0 {
                r.push(',');
                r.push_str(&num(v));
            }
            r.push(',');
            r.push_str(&num(scale.distance(s, &fixed)));
            r
        })
        .collect();
    let mut m = manifest.to_string();
    let _ = writeln!(
        m,
        "# branch {} ({}), frame_x = {}, horizon = {}",
        b.branch_index,
        b.stability,
        num(tr.frame_x),
        num(outcome.t_max)
    );
    let mut rows = rows;
    rows.push(format!("# converged={}", outcome.converged));
    rows.push(format!(
        "# steps accepted={} rejected={} stiff={}",
        tr.step_stats.accepted, tr.step_stats.rejected, tr.step_stats.stiff_steps
    ));
    let path = write_csv(out, "trajectory.csv", &m, header, &rows)?;
    println!("converged={}", outcome.converged);
    eprintln!("wrote {}", path.display());
    Ok(())
}
