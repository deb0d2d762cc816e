//! Command-line front end: reads a TOML run configuration, runs one
//! subcommand, writes `<directory>/<command>.json` plus columnar text files and
//! echoes the manifest on stdout.
//!
//! Exit codes: 0 on success, 1 on invalid input or configuration, 2 on a
//! numerical abort.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplitude::{integrate, FrontMode, FrontSpectrum, SolverConfig, Trajectory};
use crate::dispersion::{find_real_roots, limit_roots, RootReport};
use crate::error::{invalid, Error, Result};
use crate::kernel::{lambda, lambda_piecewise, lambda_piecewise_rational, lambda_rational, quadratic_sum, Acceleration, KernelSpec};
use crate::params::{
    check_stability_h1, check_stability_h1star, derive_coefficients, verify_frequency_assumptions, DerivedCoefficients,
    FrequencyTriple, ReferenceState,
};
use crate::profiles::{
    build_matrices, fast_pde_residual_leading, front_norm, leading_boundary_residual, reconstruct_leading, EigenBasis,
    ProfileGrid,
};
use crate::residual::{epsilon_sweep, rectification_indicator, snapshot_selection, WkbGrid};

#[derive(Parser, Debug)]
#[command(name = "surfwave", version, about = "Plasma-vacuum surface waves: stability, roots, front equation, profiles, residuals")]
struct Cli {
    /// Worker threads for data-parallel regions (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct OptionalConfigArg {
    /// TOML run configuration (only `[solver] K` and `[output]` are read).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stability conditions and, with a `[frequency]` block, the frequency assumptions.
    Stability(ConfigArg),
    /// Real roots of the Lopatinskii determinant.
    Roots(ConfigArg),
    /// Kernel identities and the direct vs exponential-integral comparison.
    KernelCheck(OptionalConfigArg),
    /// Integrates the front equation.
    Solve(ConfigArg),
    /// Leading profile at the final time, with its fast-problem residuals.
    Reconstruct(ConfigArg),
    /// Interior and boundary residuals of the approximate solution over several eps.
    ResidualSweep(ConfigArg),
    /// The rectification indicator along the trajectory.
    Rectification(ConfigArg),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Stability(_) => "stability",
            Command::Roots(_) => "roots",
            Command::KernelCheck(_) => "kernel-check",
            Command::Solve(_) => "solve",
            Command::Reconstruct(_) => "reconstruct",
            Command::ResidualSweep(_) => "residual-sweep",
            Command::Rectification(_) => "rectification",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauPick {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyBlock {
    pub p: i64,
    pub q: i64,
    pub l: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_seed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_pick: Option<TauPick>,
}

fn d_j() -> usize {
    16
}
fn d_k() -> usize {
    64
}
fn d_true() -> bool {
    true
}
fn d_kconst() -> f64 {
    1.0
}
fn d_blowup() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(rename = "J", default = "d_j")]
    pub jmax: usize,
    #[serde(rename = "K", default = "d_k")]
    pub kmax: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "d_true")]
    pub dealias: bool,
    #[serde(rename = "K_const", default = "d_kconst")]
    pub k_const: f64,
    #[serde(default = "d_blowup")]
    pub blowup_h4_factor: f64,
    #[serde(default)]
    pub acceleration: Acceleration,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            jmax: d_j(),
            kmax: d_k(),
            dt: None,
            t_end: None,
            dealias: true,
            k_const: d_kconst(),
            blowup_h4_factor: d_blowup(),
            acceleration: Acceleration::Direct,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontBlock {
    /// `[j1, j2, k, re, im]`; conjugate partners are added automatically.
    #[serde(default)]
    pub modes: Vec<(i64, i64, i64, f64, f64)>,
}

fn d_nx() -> usize {
    64
}
fn d_nz() -> usize {
    48
}
fn d_zmin() -> f64 {
    1e-3
}
fn d_zmax() -> f64 {
    3.0
}
fn d_ls() -> Vec<u32> {
    vec![8, 16, 32]
}
fn d_snaps() -> usize {
    8
}
fn d_pny() -> usize {
    8
}
fn d_pnz() -> usize {
    16
}
fn d_pzmax() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridsBlock {
    #[serde(default = "d_nx")]
    pub nx: usize,
    #[serde(default = "d_nz")]
    pub nz: usize,
    #[serde(default = "d_zmin")]
    pub z_min: f64,
    #[serde(default = "d_zmax")]
    pub z_max: f64,
    #[serde(default = "d_ls")]
    pub ls: Vec<u32>,
    /// Number of trajectory snapshots at which residuals are sampled.
    #[serde(default = "d_snaps")]
    pub snapshots: usize,
    #[serde(default = "d_pny")]
    pub profile_ny: usize,
    #[serde(default = "d_pnz")]
    pub profile_nz: usize,
    #[serde(default = "d_pnz")]
    pub profile_ntheta: usize,
    #[serde(default = "d_pzmax")]
    pub profile_z_max: f64,
}

impl Default for GridsBlock {
    fn default() -> Self {
        toml::from_str("").expect("all grid fields have defaults")
    }
}

fn d_dir() -> PathBuf {
    PathBuf::from("out")
}
fn d_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "d_dir")]
    pub directory: PathBuf,
    #[serde(default = "d_every")]
    pub snapshot_every: usize,
    /// Also write sampled fields as columnar text.
    #[serde(default)]
    pub dump_fields: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: d_dir(), snapshot_every: d_every(), dump_fields: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub state: ReferenceState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<FrequencyBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub front: FrontBlock,
    #[serde(default)]
    pub grids: GridsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.state.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn frequency(&self) -> Result<&FrequencyBlock> {
        self.frequency.as_ref().ok_or_else(|| Error::Config("missing [frequency] block".into()))
    }

    /// The accepted root selected by `tau_seed` or `tau_pick` (default `upper`).
    pub fn resolve_frequency(&self) -> Result<(FrequencyTriple, RootReport)> {
        let f = self.frequency()?;
        let base = FrequencyTriple::new(f.p, f.q, f.l, 0.0)?;
        let report = find_real_roots(&self.state, base.xi())?;
        let tau = match (f.tau_seed, f.tau_pick) {
            (Some(_), Some(_)) => return invalid("give either tau_seed or tau_pick, not both"),
            (Some(seed), None) => *report
                .roots
                .iter()
                .min_by(|a, b| (*a - seed).abs().total_cmp(&(*b - seed).abs()))
                .expect("two roots"),
            (None, pick) => match pick.unwrap_or(TauPick::Upper) {
                TauPick::Lower => report.roots[0],
                TauPick::Upper => report.roots[1],
            },
        };
        Ok((base.with_tau(tau), report))
    }

    pub fn initial_front(&self) -> Result<FrontSpectrum> {
        let modes: Vec<FrontMode> =
            self.front.modes.iter().map(|&(j1, j2, k, re, im)| FrontMode { j1, j2, k, re, im }).collect();
        FrontSpectrum::from_modes(self.solver.jmax, self.solver.kmax, &modes)
    }

    pub fn solver_config(&self, coeffs: &DerivedCoefficients, phi0: &FrontSpectrum) -> SolverConfig {
        let mut cfg = SolverConfig::defaults(coeffs, phi0);
        cfg.k_const = self.solver.k_const;
        let t = crate::amplitude::existence_time_estimate(phi0, cfg.k_const);
        cfg.t_end = self.solver.t_end.unwrap_or(if t.is_finite() { 0.5 * t } else { 1.0 });
        if let Some(dt) = self.solver.dt {
            cfg.dt = dt;
        }
        cfg.dealias = self.solver.dealias;
        cfg.blowup_h4_factor = self.solver.blowup_h4_factor;
        cfg.snapshot_every = self.output.snapshot_every;
        cfg.acceleration = self.solver.acceleration;
        cfg
    }

    pub fn wkb_grid(&self) -> WkbGrid {
        WkbGrid { nx: self.grids.nx, nz: self.grids.nz, z_min: self.grids.z_min, z_max: self.grids.z_max }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::Validation("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Validation(format!("cannot build thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(&cli.command))),
        None => dispatch(&cli.command),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("surfwave {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config: Option<&'a RunConfig>,
    result: T,
}

fn emit<T: Serialize>(cmd: &str, cfg: Option<&RunConfig>, result: T) -> Result<String> {
    let text = crate::jsonfmt::to_string(&Manifest { command: cmd, config: cfg, result })?;
    if let Some(cfg) = cfg {
        let dir = &cfg.output.directory;
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{cmd}.json")), &text)?;
    }
    Ok(text)
}

fn write_columns(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# {header}");
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| crate::jsonfmt::format_f64(*x)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Stability(a) => stability(&RunConfig::load(&a.config)?),
        Command::Roots(a) => roots(&RunConfig::load(&a.config)?),
        Command::KernelCheck(a) => {
            let cfg = a.config.as_deref().map(RunConfig::load).transpose()?;
            kernel_check(cfg.as_ref())
        }
        Command::Solve(a) => solve(&RunConfig::load(&a.config)?),
        Command::Reconstruct(a) => reconstruct(&RunConfig::load(&a.config)?),
        Command::ResidualSweep(a) => residual_sweep(&RunConfig::load(&a.config)?),
        Command::Rectification(a) => rectification(&RunConfig::load(&a.config)?),
    }
}

fn stability(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        h1: crate::params::H1Report,
        h1star: crate::params::H1StarReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        assumptions: Option<crate::params::AssumptionReport>,
    }
    let h1 = check_stability_h1(&cfg.state);
    let h1star = check_stability_h1star(&cfg.state);
    let assumptions = if cfg.frequency.is_some() && h1.stable {
        let (freq, _) = cfg.resolve_frequency()?;
        Some(verify_frequency_assumptions(&cfg.state, &freq))
    } else {
        None
    };
    emit("stability", Some(cfg), Out { h1, h1star, assumptions })
}

fn roots(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        xi: [f64; 2],
        tau_roots: Vec<f64>,
        residuals: Vec<f64>,
        derivative_values: Vec<f64>,
        scale: f64,
        limit_roots: Option<[f64; 2]>,
        selected_tau: f64,
    }
    let (freq, r) = cfg.resolve_frequency()?;
    emit(
        "roots",
        Some(cfg),
        Out {
            xi: r.xi,
            limit_roots: limit_roots(&cfg.state, r.xi),
            tau_roots: r.roots,
            residuals: r.residuals,
            derivative_values: r.derivative_values,
            scale: r.scale,
            selected_tau: freq.tau,
        },
    )
}

#[derive(Serialize)]
struct KernelSummary {
    kmax_identities: i64,
    pairs_checked: usize,
    symmetry_failures: usize,
    reality_failures: usize,
    homogeneity_failures: usize,
    piecewise_rational_failures: usize,
    piecewise_float_max_rel_diff: f64,
    quadrature_kmax: usize,
    direct_vs_exp_integral_rel_diff: f64,
}

/// Exact kernel identities over `|k| ≤ 200` and the two quadratic-sum routes at `kmax`.
pub fn kernel_summary(kmax: usize) -> Result<impl Serialize> {
    let n = 200i64;
    let mut s = KernelSummary {
        kmax_identities: n,
        pairs_checked: 0,
        symmetry_failures: 0,
        reality_failures: 0,
        homogeneity_failures: 0,
        piecewise_rational_failures: 0,
        piecewise_float_max_rel_diff: 0.0,
        quadrature_kmax: kmax,
        direct_vs_exp_integral_rel_diff: 0.0,
    };
    for k1 in -n..=n {
        for k2 in -n..=n {
            if k1 == 0 || k2 == 0 || k1 + k2 == 0 || (k1 + k2).abs() > n {
                continue;
            }
            s.pairs_checked += 1;
            let v = lambda(k1, k2)?;
            s.symmetry_failures += usize::from(v != lambda(k2, k1)?);
            s.reality_failures += usize::from(v != lambda(-k1, -k2)?);
            s.homogeneity_failures += usize::from(4.0 * v != lambda(2 * k1, 2 * k2)?);
            s.piecewise_rational_failures += usize::from(lambda_rational(k1, k2)? != lambda_piecewise_rational(k1, k2)?);
            s.piecewise_float_max_rel_diff = s.piecewise_float_max_rel_diff.max((lambda_piecewise(k1, k2)? - v).abs() / v);
        }
    }
    let phi: Vec<Complex64> = (-(kmax as i64)..=kmax as i64)
        .map(|k| {
            if k == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0 / (1.0 + (k * k) as f64), 0.7 * k as f64)
            }
        })
        .collect();
    let direct = quadratic_sum(KernelSpec::new(kmax, Acceleration::Direct)?, &phi);
    let fast = quadratic_sum(KernelSpec::new(kmax, Acceleration::ExpIntegral)?, &phi);
    let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
    s.direct_vs_exp_integral_rel_diff =
        direct.iter().zip(&fast).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale;
    Ok(s)
}

fn kernel_check(cfg: Option<&RunConfig>) -> Result<String> {
    let kmax = cfg.map_or(256, |c| c.solver.kmax);
    emit("kernel-check", cfg, kernel_summary(kmax)?)
}

struct Solved {
    freq: FrequencyTriple,
    coeffs: DerivedCoefficients,
    traj: Trajectory,
}

fn run_solver(cfg: &RunConfig) -> Result<Solved> {
    let h1 = check_stability_h1(&cfg.state);
    if !h1.stable {
        return invalid(format!(
            "reference state violates the stability condition: margin = {:.6e}, rhs = {:.6e}, E3_0^2 = {:.6e}",
            h1.margin,
            h1.rhs,
            cfg.state.e3 * cfg.state.e3
        ));
    }
    let (freq, _) = cfg.resolve_frequency()?;
    let report = verify_frequency_assumptions(&cfg.state, &freq);
    if !(report.h3 && report.h4 && report.nondegenerate) {
        return invalid(format!(
            "frequency assumptions fail: h3 = {}, h4 = {}, nondegenerate = {} (residual {:.3e})",
            report.h3, report.h4, report.nondegenerate, report.h3_residual
        ));
    }
    let coeffs = derive_coefficients(&cfg.state, &freq)?;
    let phi0 = cfg.initial_front()?;
    let scfg = cfg.solver_config(&coeffs, &phi0);
    let traj = integrate(&phi0, &scfg, &coeffs)?;
    Ok(Solved { freq, coeffs, traj })
}

fn spectrum_rows(s: &FrontSpectrum) -> impl Iterator<Item = Vec<f64>> + '_ {
    s.modes()
        .filter(|m| s.coeffs[m.3] != Complex64::new(0.0, 0.0))
        .map(|(j1, j2, k, i)| vec![j1 as f64, j2 as f64, k as f64, s.coeffs[i].re, s.coeffs[i].im])
}

fn solve(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        coefficients: DerivedCoefficients,
        solver: SolverConfig,
        dt: f64,
        steps: usize,
        times: Vec<f64>,
        h4_norms: Vec<f64>,
        h4_initial: f64,
        files: Vec<String>,
    }
    let s = run_solver(cfg)?;
    fs::create_dir_all(&cfg.output.directory)?;
    let mut files = Vec::new();
    for (n, snap) in s.traj.snapshots.iter().enumerate() {
        let name = format!("solve_snapshot_{n:05}.txt");
        write_columns(&cfg.output.directory.join(&name), "j1 j2 k re im", spectrum_rows(snap))?;
        files.push(name);
    }
    emit(
        "solve",
        Some(cfg),
        Out {
            coefficients: s.coeffs,
            solver: s.traj.config,
            dt: s.traj.dt,
            steps: s.traj.steps,
            times: s.traj.times(),
            h4_norms: s.traj.h4_norms.clone(),
            h4_initial: s.traj.h4_initial,
            files,
        },
    )
}

fn reconstruct(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        frequency: FrequencyTriple,
        eps: f64,
        time: f64,
        shape_plasma: [usize; 5],
        shape_vacuum: [usize; 5],
        max_imag: f64,
        front_norm: f64,
        leading_boundary_residual: f64,
        fast_pde_residual: crate::profiles::FastResidual,
        files: Vec<String>,
    }
    let s = run_solver(cfg)?;
    let g = &cfg.grids;
    if g.profile_ny == 0 || g.profile_nz < 2 || g.profile_ntheta == 0 || !(g.profile_z_max > 0.0) {
        return invalid("profile grid sizes must be positive with profile_nz >= 2");
    }
    let front = s.traj.last();
    let big: Vec<f64> =
        (0..g.profile_nz).map(|i| g.profile_z_max * i as f64 / (g.profile_nz - 1) as f64).collect();
    let theta: Vec<f64> =
        (0..g.profile_ntheta).map(|i| 2.0 * std::f64::consts::PI * i as f64 / g.profile_ntheta as f64).collect();
    let pgrid = ProfileGrid {
        ny: g.profile_ny,
        y3_plus: vec![0.0],
        big_y3_plus: big.clone(),
        y3_minus: vec![0.0],
        big_y3_minus: big.iter().map(|y| -y).collect(),
        theta: theta.clone(),
    };
    let fields = reconstruct_leading(front, &s.coeffs, &pgrid)?;
    let m = build_matrices(&cfg.state, &s.coeffs);
    let bases = [EigenBasis::new(&s.coeffs, 1), EigenBasis::new(&s.coeffs, -1)];
    let lbr = leading_boundary_residual(front, &m, &bases, g.profile_ny, g.profile_ntheta);
    let fpr = fast_pde_residual_leading(front, &m, &bases, &s.coeffs, g.profile_ny, &big, g.profile_ntheta);

    fs::create_dir_all(&cfg.output.directory)?;
    let ny = g.profile_ny;
    let coords = |idx: usize, sign: f64| {
        let th = idx % theta.len();
        let yy = (idx / theta.len()) % big.len();
        let node = idx / (theta.len() * big.len());
        let h = 2.0 * std::f64::consts::PI / ny as f64;
        vec![h * (node / ny) as f64, h * (node % ny) as f64, 0.0, sign * big[yy], theta[th]]
    };
    write_columns(
        &cfg.output.directory.join("reconstruct_plasma.txt"),
        "y1 y2 y3 Y3 theta u1 u2 u3 B1 B2 B3 q",
        fields.u1.iter().enumerate().map(|(i, u)| {
            let mut row = coords(i, 1.0);
            row.extend_from_slice(u);
            row
        }),
    )?;
    write_columns(
        &cfg.output.directory.join("reconstruct_vacuum.txt"),
        "y1 y2 y3 Y3 theta H1 H2 H3 E1 E2 E3",
        fields.v1.iter().enumerate().map(|(i, v)| {
            let mut row = coords(i, -1.0);
            row.extend_from_slice(v);
            row
        }),
    )?;
    let shape = [ny, ny, 1, big.len(), theta.len()];
    emit(
        "reconstruct",
        Some(cfg),
        Out {
            frequency: s.freq,
            eps: s.freq.eps(),
            time: front.time,
            shape_plasma: shape,
            shape_vacuum: shape,
            max_imag: fields.max_imag,
            front_norm: front_norm(front),
            leading_boundary_residual: lbr,
            fast_pde_residual: fpr,
            files: vec!["reconstruct_plasma.txt".into(), "reconstruct_vacuum.txt".into()],
        },
    )
}

fn residual_sweep(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        frequency: FrequencyTriple,
        coefficients: DerivedCoefficients,
        snapshots: Vec<usize>,
        report: crate::residual::ResidualReport,
        files: Vec<String>,
    }
    let s = run_solver(cfg)?;
    let grid = cfg.wkb_grid();
    let snaps = snapshot_selection(s.traj.snapshots.len(), cfg.grids.snapshots);
    let report = epsilon_sweep(&s.traj, &cfg.state, &s.freq, &cfg.grids.ls, &grid, &snaps)?;
    let mut files = Vec::new();
    if cfg.output.dump_fields {
        fs::create_dir_all(&cfg.output.directory)?;
        let l = *cfg.grids.ls.iter().max().expect("at least 3 values of l");
        let f = s.freq.with_l(l);
        let last = *snaps.last().expect("nonempty selection");
        let field = crate::residual::assemble_wkb(&s.traj, last, &cfg.state, &f, f.eps(), &grid)?;
        let name = "residual_sweep_front.txt".to_string();
        let front = field.front_samples();
        write_columns(
            &cfg.output.directory.join(&name),
            "x1 x2 phi_eps",
            front.iter().enumerate().map(|(n, p)| {
                let x = grid.x_prime(n);
                vec![x[0], x[1], *p]
            }),
        )?;
        files.push(name);
        let z = grid.y3_nodes();
        let name = "residual_sweep_plasma.txt".to_string();
        write_columns(
            &cfg.output.directory.join(&name),
            "x1 x2 y3 u1 u2 u3 B1 B2 B3 q",
            field.plasma_samples().into_iter().enumerate().map(|(i, u)| {
                let x = grid.x_prime(i / z.len());
                let mut row = vec![x[0], x[1], z[i % z.len()]];
                row.extend_from_slice(&u);
                row
            }),
        )?;
        files.push(name);
        let name = "residual_sweep_vacuum.txt".to_string();
        write_columns(
            &cfg.output.directory.join(&name),
            "x1 x2 y3 H1 H2 H3 E1 E2 E3",
            field.vacuum_samples().into_iter().enumerate().map(|(i, v)| {
                let x = grid.x_prime(i / z.len());
                let mut row = vec![x[0], x[1], -z[i % z.len()]];
                row.extend_from_slice(&v);
                row
            }),
        )?;
        files.push(name);
    }
    emit("residual-sweep", Some(cfg), Out { frequency: s.freq, coefficients: s.coeffs, snapshots: snaps, report, files })
}

fn rectification(cfg: &RunConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Out {
        frequency: FrequencyTriple,
        report: crate::residual::RectificationReport,
    }
    let s = run_solver(cfg)?;
    let report = rectification_indicator(&s.traj, &cfg.state, &s.coeffs)?;
    emit("rectification", Some(cfg), Out { frequency: s.freq, report })
}
