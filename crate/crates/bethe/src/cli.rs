//! Reproducible experiment driver behind the `bethe` binary.
//!
//! Subcommands: `verify` (invariant suites), `dos` (density-of-states
//! sweep), `lyapunov` (exponent estimates), `remainder` (Thouless remainder
//! studies), `green` (single-query debugging). Every run writes a CSV data
//! file plus a JSON sidecar embedding the resolved, seed-complete
//! [`ExperimentConfig`]; re-running an identical config reproduces the
//! bytes, independent of `--threads` (parallel sections fill indexed slots
//! and reduce over fixed pairwise trees). Floats print with 17 significant
//! digits so the CSV round-trips exactly.
//!
//! Exit codes: 0 pass, 1 usage error, 2 numerical guard, 3 verification
//! failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ergodic::{DisorderSpec, Distribution};
use crate::green::{self, GreenError};
use crate::lattice::{self, LatticeContext, VertexLabel};
use crate::operator::{assemble, OperatorError, Region};
use crate::spectral::{self, SpectralError, SpectralMeasure};
use crate::thouless::{self, LyapunovMethod, ThoulessError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical guard: {0}")]
    Guard(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Guard(_) | CliError::Io(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

fn guard_err(e: impl std::fmt::Display) -> CliError {
    CliError::Guard(e.to_string())
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::BadEta(_)
            | SpectralError::RadiusTooSmall(_)
            | SpectralError::NoSamples
            | SpectralError::BadGrid => CliError::Usage(e.to_string()),
            other => guard_err(other),
        }
    }
}

impl From<ThoulessError> for CliError {
    fn from(e: ThoulessError) -> Self {
        match e {
            ThoulessError::NeedUpperHalfPlane(_)
            | ThoulessError::DepthTooSmall(_)
            | ThoulessError::BadNeighborIndex { .. }
            | ThoulessError::NoSamples
            | ThoulessError::EmptyPath => CliError::Usage(e.to_string()),
            other => guard_err(other),
        }
    }
}

impl From<OperatorError> for CliError {
    fn from(e: OperatorError) -> Self {
        guard_err(e)
    }
}

impl From<GreenError> for CliError {
    fn from(e: GreenError) -> Self {
        guard_err(e)
    }
}

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Dos,
    Lyapunov,
    Remainder,
    Green,
}

/// Which Green engine a `green` query uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Direct,
    Rw,
    Saw,
}

/// Resolved, seed-complete experiment description. Serialized into every
/// JSON sidecar; two runs with equal configs produce identical bytes.
/// Worker count is deliberately not part of the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub kappa: u32,
    pub seed: u64,
    pub disorder: Distribution,
    /// Ball radius / volume parameter L.
    #[serde(default)]
    pub l: u32,
    /// Recursion depth for m-function Monte Carlo.
    #[serde(default)]
    pub depth: u32,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub samples: u64,
    #[serde(default)]
    pub grid_points: usize,
    /// Real parts of the spectral parameters (remainder, lyapunov sweeps).
    #[serde(default)]
    pub z_values: Vec<f64>,
    /// Complex z for green queries, as (re, im).
    #[serde(default)]
    pub z_complex: Option<(f64, f64)>,
    #[serde(default)]
    pub method: Option<LyapunovMethod>,
    /// Root-neighbor index for the m-function estimator.
    #[serde(default)]
    pub j: u32,
    /// First spine digit for path estimators.
    #[serde(default)]
    pub a1: u32,
    #[serde(default)]
    pub n_terms: usize,
    #[serde(default)]
    pub x: Option<String>,
    #[serde(default)]
    pub y: Option<String>,
    #[serde(default)]
    pub engine: Option<EngineKind>,
    /// Use the analytic free-Laplacian inputs in remainder studies.
    #[serde(default)]
    pub analytic_dos: bool,
}

/// Long-form command line. A `--config` TOML file supplies defaults that
/// individual flags override.
#[derive(Debug, Parser)]
#[command(
    name = "bethe",
    about = "Spectral experiments on the Bethe lattice",
    disable_help_subcommand = true
)]
pub struct Cli {
    /// TOML config file with an [experiment] table of config fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV + JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (results are independent of this).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Embed a timestamp field in the JSON sidecar (off for byte-stable runs).
    #[arg(long, global = true)]
    pub timestamp: bool,
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Args, Default, Clone)]
pub struct DisorderArgs {
    /// Zero potential (the free Laplacian).
    #[arg(long)]
    pub zero_disorder: bool,
    /// Constant potential c.
    #[arg(long)]
    pub constant: Option<f64>,
    /// Uniform potential on [-C, C].
    #[arg(long)]
    pub uniform: Option<f64>,
    /// Bernoulli potential "p,w" (+w w.p. p, else -w).
    #[arg(long)]
    pub bernoulli: Option<String>,
    /// Master seed of the disorder stream.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Run the lattice / Green invariant suites.
    Verify {
        #[arg(long)]
        kappa: Option<u32>,
    },
    /// Density-of-states sweep on an energy grid.
    Dos {
        #[arg(long)]
        kappa: Option<u32>,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long)]
        points: Option<usize>,
        #[command(flatten)]
        disorder: DisorderArgs,
    },
    /// Lyapunov-exponent estimates at a list of energies.
    Lyapunov {
        #[arg(long)]
        kappa: Option<u32>,
        /// Comma-separated real parts of z.
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, value_enum)]
        method: Option<CliMethod>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        j: Option<u32>,
        #[arg(long)]
        a1: Option<u32>,
        #[arg(long)]
        samples: Option<u64>,
        #[command(flatten)]
        disorder: DisorderArgs,
    },
    /// Remainder study R(z) = L(z) - Thouless term over a z list.
    Remainder {
        #[arg(long)]
        kappa: Option<u32>,
        /// Comma-separated real parts of z.
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        eta: Option<f64>,
        /// Use the analytic Kesten-McKay density and L = (1/2) log kappa.
        #[arg(long)]
        analytic_dos: bool,
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        samples: Option<u64>,
        #[command(flatten)]
        disorder: DisorderArgs,
    },
    /// Single Green-function query for debugging.
    Green {
        #[arg(long)]
        kappa: Option<u32>,
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
        #[arg(long)]
        l: Option<u32>,
        /// Vertex label, e.g. "0,1,0" (root is "0").
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        y: Option<String>,
        /// Complex z as "re,im".
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        n_terms: Option<usize>,
        #[command(flatten)]
        disorder: DisorderArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CliMethod {
    Mc,
    Path,
}

/// TOML config file shape: a single `[experiment]` table.
#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    experiment: Option<ExperimentFileTable>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFileTable {
    kappa: Option<u32>,
    seed: Option<u64>,
    l: Option<u32>,
    depth: Option<u32>,
    eta: Option<f64>,
    samples: Option<u64>,
    grid_points: Option<usize>,
    z_values: Option<Vec<f64>>,
    j: Option<u32>,
    a1: Option<u32>,
    n_terms: Option<usize>,
    x: Option<String>,
    y: Option<String>,
    analytic_dos: Option<bool>,
    disorder: Option<Distribution>,
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse number '{p}' in z list")))
        })
        .collect()
}

fn parse_complex(s: &str) -> Result<(f64, f64), CliError> {
    let parts = parse_f64_list(s)?;
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "complex z must be 're,im', got '{s}'"
        )));
    }
    Ok((parts[0], parts[1]))
}

fn resolve_disorder(
    args: &DisorderArgs,
    file: Option<&Distribution>,
    file_seed: Option<u64>,
) -> Result<(Distribution, u64), CliError> {
    let mut chosen: Option<Distribution> = None;
    let mut set = |d: Distribution| -> Result<(), CliError> {
        if chosen.is_some() {
            return Err(CliError::Usage(
                "more than one disorder distribution given".into(),
            ));
        }
        chosen = Some(d);
        Ok(())
    };
    if args.zero_disorder {
        set(Distribution::Zero)?;
    }
    if let Some(c) = args.constant {
        set(Distribution::Constant { c })?;
    }
    if let Some(c) = args.uniform {
        set(Distribution::Uniform { c })?;
    }
    if let Some(s) = &args.bernoulli {
        let parts = parse_f64_list(s)?;
        if parts.len() != 2 {
            return Err(CliError::Usage("--bernoulli needs 'p,w'".into()));
        }
        set(Distribution::Bernoulli {
            p: parts[0],
            w: parts[1],
        })?;
    }
    let dist = chosen
        .or_else(|| file.cloned())
        .unwrap_or(Distribution::Zero);
    dist.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = args.seed.or(file_seed).unwrap_or(1);
    Ok((dist, seed))
}

/// Resolve CLI flags over an optional config file into an
/// [`ExperimentConfig`].
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let file: ExperimentFileTable = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let parsed: ConfigFile = toml::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config file: {e}")))?;
            parsed.experiment.unwrap_or_default()
        }
        None => ExperimentFileTable::default(),
    };
    let kappa_of = |flag: &Option<u32>| flag.or(file.kappa).unwrap_or(2);
    let cfg = match &cli.command {
        CliCommand::Verify { kappa } => ExperimentConfig {
            command: CommandKind::Verify,
            kappa: kappa_of(kappa),
            seed: file.seed.unwrap_or(1),
            disorder: Distribution::Zero,
            l: 0,
            depth: 0,
            eta: 0.0,
            samples: 0,
            grid_points: 0,
            z_values: Vec::new(),
            z_complex: None,
            method: None,
            j: 0,
            a1: 0,
            n_terms: 0,
            x: None,
            y: None,
            engine: None,
            analytic_dos: false,
        },
        CliCommand::Dos {
            kappa,
            l,
            eta,
            samples,
            points,
            disorder,
        } => {
            let (dist, seed) = resolve_disorder(disorder, file.disorder.as_ref(), file.seed)?;
            ExperimentConfig {
                command: CommandKind::Dos,
                kappa: kappa_of(kappa),
                seed,
                disorder: dist,
                l: l.or(file.l).unwrap_or(8),
                depth: 0,
                eta: eta.or(file.eta).unwrap_or(0.05),
                samples: samples.or(file.samples).unwrap_or(1),
                grid_points: points.or(file.grid_points).unwrap_or(1024),
                z_values: Vec::new(),
                z_complex: None,
                method: None,
                j: 0,
                a1: 0,
                n_terms: 0,
                x: None,
                y: None,
                engine: None,
                analytic_dos: false,
            }
        }
        CliCommand::Lyapunov {
            kappa,
            z,
            eta,
            method,
            depth,
            l,
            j,
            a1,
            samples,
            disorder,
        } => {
            let (dist, seed) = resolve_disorder(disorder, file.disorder.as_ref(), file.seed)?;
            let z_values = match z {
                Some(s) => parse_f64_list(s)?,
                None => file.z_values.clone().unwrap_or_else(|| vec![0.0]),
            };
            let method = match method {
                Some(CliMethod::Mc) => LyapunovMethod::McMFunction,
                Some(CliMethod::Path) => LyapunovMethod::PathDecay,
                None => LyapunovMethod::McMFunction,
            };
            ExperimentConfig {
                command: CommandKind::Lyapunov,
                kappa: kappa_of(kappa),
                seed,
                disorder: dist,
                l: l.or(file.l).unwrap_or(20),
                depth: depth.or(file.depth).unwrap_or(60),
                eta: eta.or(file.eta).unwrap_or(0.05),
                samples: samples.or(file.samples).unwrap_or(50),
                grid_points: 0,
                z_values,
                z_complex: None,
                method: Some(method),
                j: j.or(file.j).unwrap_or(0),
                a1: a1.or(file.a1).unwrap_or(0),
                n_terms: 0,
                x: None,
                y: None,
                engine: None,
                analytic_dos: false,
            }
        }
        CliCommand::Remainder {
            kappa,
            z,
            eta,
            analytic_dos,
            l,
            depth,
            samples,
            disorder,
        } => {
            let (dist, seed) = resolve_disorder(disorder, file.disorder.as_ref(), file.seed)?;
            let z_values = match z {
                Some(s) => parse_f64_list(s)?,
                None => file.z_values.clone().unwrap_or_else(|| vec![0.0, 1.0]),
            };
            ExperimentConfig {
                command: CommandKind::Remainder,
                kappa: kappa_of(kappa),
                seed,
                disorder: dist,
                l: l.or(file.l).unwrap_or(6),
                depth: depth.or(file.depth).unwrap_or(40),
                eta: eta.or(file.eta).unwrap_or(1e-3),
                samples: samples.or(file.samples).unwrap_or(50),
                grid_points: file.grid_points.unwrap_or(1024),
                z_values,
                z_complex: None,
                method: None,
                j: 0,
                a1: file.a1.unwrap_or(0),
                n_terms: 0,
                x: None,
                y: None,
                engine: None,
                analytic_dos: *analytic_dos || file.analytic_dos.unwrap_or(false),
            }
        }
        CliCommand::Green {
            kappa,
            engine,
            l,
            x,
            y,
            z,
            n_terms,
            disorder,
        } => {
            let (dist, seed) = resolve_disorder(disorder, file.disorder.as_ref(), file.seed)?;
            let z_complex = match z {
                Some(s) => Some(parse_complex(s)?),
                None => Some((0.0, 1.0)),
            };
            ExperimentConfig {
                command: CommandKind::Green,
                kappa: kappa_of(kappa),
                seed,
                disorder: dist,
                l: l.or(file.l).unwrap_or(3),
                depth: 0,
                eta: 0.0,
                samples: 1,
                grid_points: 0,
                z_values: Vec::new(),
                z_complex,
                method: None,
                j: 0,
                a1: 0,
                n_terms: n_terms.or(file.n_terms).unwrap_or(30),
                x: x.clone().or(file.x.clone()),
                y: y.clone().or(file.y.clone()),
                engine: Some(engine.unwrap_or(EngineKind::Direct)),
                analytic_dos: false,
            }
        }
    };
    Ok(cfg)
}

/// 17-significant-digit float text (exact round trip).
fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(
    path: &Path,
    header: &str,
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut text = String::new();
    writeln!(text, "{header}").expect("string write");
    for row in rows {
        writeln!(text, "{}", row.join(",")).expect("string write");
    }
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    summary: T,
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

fn write_sidecar<T: Serialize>(
    path: &Path,
    summary: T,
    config: &ExperimentConfig,
    timestamp: bool,
) -> Result<(), CliError> {
    let stamp = timestamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_default()
    });
    let sidecar = Sidecar {
        summary,
        config,
        timestamp: stamp,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("serializable");
    fs::write(path, json + "\n")?;
    Ok(())
}

/// Run a resolved experiment, writing artifacts into `out_dir`.
pub fn run(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    threads: usize,
    timestamp: bool,
) -> Result<(), CliError> {
    if threads == 0 {
        return Err(CliError::Usage("--threads must be >= 1".into()));
    }
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Guard(e.to_string()))?;
    pool.install(|| match cfg.command {
        CommandKind::Verify => run_verify(cfg, out_dir, timestamp),
        CommandKind::Dos => run_dos(cfg, out_dir, timestamp),
        CommandKind::Lyapunov => run_lyapunov(cfg, out_dir, timestamp),
        CommandKind::Remainder => run_remainder(cfg, out_dir, timestamp),
        CommandKind::Green => run_green(cfg, out_dir, timestamp),
    })
}

fn context(cfg: &ExperimentConfig) -> Result<LatticeContext, CliError> {
    LatticeContext::new(cfg.kappa).map_err(|e| CliError::Usage(e.to_string()))
}

fn run_verify(cfg: &ExperimentConfig, out: &Path, timestamp: bool) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut failures = Vec::new();
    let mut record = |name: &str, pass: bool, detail: String| {
        println!(
            "[{}] {name}: {detail}",
            if pass { "pass" } else { "FAIL" }
        );
        if !pass {
            failures.push(name.to_string());
        }
        rows.push(vec![
            name.to_string(),
            if pass { "pass" } else { "fail" }.to_string(),
            detail,
        ]);
    };

    // closed-form shift vs word evaluation, all Appendix cases
    let (mismatches, cases) =
        lattice::shift_equivalence_sweep(&ctx, 4).map_err(|e| CliError::Guard(e.to_string()))?;
    record(
        "shift_closed_vs_word_ball4",
        mismatches == 0 && cases.len() >= 5,
        format!("{mismatches} mismatches, {} cases", cases.len()),
    );

    // compositional law on its domain of validity (forward pairs), plus
    // the universal root-image identity
    let verts = lattice::ball(&ctx, 3).map_err(|e| CliError::Guard(e.to_string()))?;
    let mut comp_bad = 0usize;
    let mut root_bad = 0usize;
    for x in &verts {
        let wx = lattice::exponents_of(&ctx, x);
        for y in &verts {
            let xy = lattice::tau_x_closed(&ctx, x, y);
            if lattice::apply_word(&ctx, &wx, y) != xy {
                root_bad += 1;
            }
            if y.digits().first() == Some(&ctx.kappa()) {
                continue;
            }
            let wxy = lattice::exponents_of(&ctx, &xy);
            for w in verts.iter().step_by(3) {
                let lhs =
                    lattice::tau_x_closed(&ctx, x, &lattice::tau_x_closed(&ctx, y, w));
                let rhs = lattice::apply_word(&ctx, &wxy, w);
                if lhs != rhs {
                    comp_bad += 1;
                }
            }
        }
    }
    record(
        "compositional_law_forward_pairs_ball3",
        comp_bad == 0 && root_bad == 0,
        format!("{comp_bad} forward violations, {root_bad} root-image violations"),
    );

    // SAW vs direct on random disorder
    let spec = DisorderSpec::new(Distribution::Uniform { c: 1.0 }, cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let region = Region::ball(&ctx, 3)?;
    let mut worst_rel: f64 = 0.0;
    for s in 0..10u64 {
        let omega = spec.realization(s);
        let op = assemble(&ctx, &region, &omega);
        let z = Complex64::new(0.3 * s as f64 - 1.0, 0.4 + 0.1 * (s % 3) as f64);
        let vs = region.vertices();
        let x = &vs[(7 * s as usize + 1) % vs.len()];
        let y = &vs[(11 * s as usize + 3) % vs.len()];
        if x == y {
            continue;
        }
        let saw = green::green_saw(&ctx, &region, &omega, z, x, y)?;
        let direct = green::green_direct(&op, z, x, y)?;
        worst_rel = worst_rel.max((saw - direct).norm() / direct.norm());
    }
    record(
        "saw_vs_direct",
        worst_rel <= 1e-9,
        format!("worst relative error {worst_rel:.3e}"),
    );

    // RW bound at z = 10i
    let op = assemble(&ctx, &region, &spec.realization(0));
    let z10 = Complex64::new(0.0, 10.0);
    let x = &region.vertices()[0];
    let y = &region.vertices()[2];
    let exact = green::green_direct(&op, z10, x, y)?;
    let mut rw_ok = true;
    for n in 1..=30 {
        let (val, bound) = green::green_rw(&op, z10, x, y, n)?;
        if (val - exact).norm() > bound {
            rw_ok = false;
        }
    }
    record("rw_partial_sums_within_bound", rw_ok, "orders 1..=30".into());

    // m-recursion against the closed form
    let child = VertexLabel::root().child(0);
    let zm = Complex64::new(0.0, 2.0);
    let m_rec = green::m_recursive(&ctx, &DisorderSpec::zero(0).realization(0), zm, &child, 60)?;
    let m_closed = green::m_free_closed(zm, cfg.kappa)?;
    let m_err = (m_rec - m_closed).norm();
    record(
        "m_recursion_vs_closed_form",
        m_err < 1e-8,
        format!("|diff| = {m_err:.3e}"),
    );

    write_csv(&out.join("verify.csv"), "check,status,detail", &rows)?;
    #[derive(Serialize)]
    struct Summary {
        checks: usize,
        failures: Vec<String>,
    }
    write_sidecar(
        &out.join("verify.json"),
        Summary {
            checks: rows.len(),
            failures: failures.clone(),
        },
        cfg,
        timestamp,
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join(", ")))
    }
}

fn run_dos(cfg: &ExperimentConfig, out: &Path, timestamp: bool) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let spec = DisorderSpec::new(cfg.disorder.clone(), cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let grid = spectral::default_grid(
        cfg.kappa,
        cfg.disorder.support_bound(),
        cfg.grid_points.max(2),
    );
    let dos = spectral::dos_resolvent(&ctx, &spec, cfg.l, cfg.eta, &grid, cfg.samples)?;
    let rows: Vec<Vec<String>> = dos
        .energies
        .iter()
        .zip(dos.density.iter())
        .map(|(e, d)| vec![fmt_f(*e), fmt_f(*d)])
        .collect();
    write_csv(&out.join("dos.csv"), "energy,density", &rows)?;
    #[derive(Serialize)]
    struct Summary {
        kappa: u32,
        l: u32,
        eta: f64,
        samples: u64,
        seed: u64,
        mass: f64,
    }
    write_sidecar(
        &out.join("dos.json"),
        Summary {
            kappa: dos.kappa,
            l: dos.radius,
            eta: dos.eta,
            samples: dos.samples,
            seed: dos.seed,
            mass: dos.raw_mass,
        },
        cfg,
        timestamp,
    )?;
    println!(
        "dos: {} grid points, raw mass {:.6}",
        dos.energies.len(),
        dos.raw_mass
    );
    Ok(())
}

fn run_lyapunov(cfg: &ExperimentConfig, out: &Path, timestamp: bool) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let spec = DisorderSpec::new(cfg.disorder.clone(), cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let method = cfg.method.unwrap_or(LyapunovMethod::McMFunction);
    let mut rows = Vec::new();
    let mut estimates = Vec::new();
    for &e in &cfg.z_values {
        let z = Complex64::new(e, cfg.eta);
        let est = match method {
            LyapunovMethod::McMFunction => {
                thouless::lyapunov_mc(&ctx, &spec, z, cfg.depth, cfg.samples, cfg.j)?
            }
            LyapunovMethod::PathDecay => {
                let path = lattice::spine_path(&ctx, cfg.a1, cfg.l as usize)
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                let est = thouless::lyapunov_path(&ctx, &spec, z, &path, cfg.samples)?;
                if !est.mrp_guaranteed {
                    eprintln!("warning: path is not a spine; ergodic limit not guaranteed");
                }
                est
            }
        };
        rows.push(vec![
            fmt_f(est.z_re),
            fmt_f(est.z_im),
            fmt_f(cfg.eta),
            est.kappa.to_string(),
            est.scale.to_string(),
            est.samples.to_string(),
            est.seed.to_string(),
            fmt_f(est.value),
            fmt_f(est.stderr),
            format!("{:?}", est.method),
        ]);
        println!(
            "lyapunov z={}+{}i: {} +- {}",
            est.z_re, est.z_im, est.value, est.stderr
        );
        estimates.push(est);
    }
    write_csv(
        &out.join("lyapunov.csv"),
        "z_re,z_im,eta,kappa,scale,samples,seed,value,stderr,method",
        &rows,
    )?;
    write_sidecar(&out.join("lyapunov.json"), estimates, cfg, timestamp)?;
    Ok(())
}

fn run_remainder(cfg: &ExperimentConfig, out: &Path, timestamp: bool) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let mut rows = Vec::new();
    let mut remainders = Vec::new();
    let mut first_r: Option<f64> = None;
    for &e in &cfg.z_values {
        let z = Complex64::new(e, cfg.eta);
        let est = if cfg.analytic_dos {
            let lyap = thouless::LyapunovEstimate {
                kappa: cfg.kappa,
                z_re: e,
                z_im: cfg.eta,
                value: 0.5 * (cfg.kappa as f64).ln(),
                stderr: 0.0,
                method: LyapunovMethod::McMFunction,
                scale: 0,
                samples: 0,
                seed: cfg.seed,
                mrp_guaranteed: true,
            };
            thouless::remainder_from_parts(
                cfg.kappa,
                z,
                SpectralMeasure::KestenMckay { kappa: cfg.kappa },
                &lyap,
            )?
        } else {
            let spec = DisorderSpec::new(cfg.disorder.clone(), cfg.seed)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let grid =
                spectral::default_grid(cfg.kappa, cfg.disorder.support_bound(), cfg.grid_points);
            let dos = spectral::dos_resolvent(
                &ctx,
                &spec,
                cfg.l,
                cfg.eta.max(0.02),
                &grid,
                cfg.samples,
            )?;
            let lyap = thouless::lyapunov_mc(
                &ctx,
                &spec,
                Complex64::new(e, cfg.eta.max(0.02)),
                cfg.depth,
                cfg.samples,
                0,
            )?;
            thouless::remainder_from_parts(cfg.kappa, z, SpectralMeasure::Grid(&dos), &lyap)?
        };
        let delta = match first_r {
            None => {
                first_r = Some(est.remainder);
                0.0
            }
            Some(r0) => est.remainder - r0,
        };
        rows.push(vec![
            fmt_f(est.z_re),
            fmt_f(cfg.eta),
            est.kappa.to_string(),
            fmt_f(est.lyapunov),
            fmt_f(est.thouless_term),
            fmt_f(est.remainder),
            fmt_f(est.stderr),
            fmt_f(delta),
        ]);
        println!(
            "remainder z={e}: R = {} (delta vs first = {delta})",
            est.remainder
        );
        remainders.push(est);
    }
    write_csv(
        &out.join("remainder.csv"),
        "z,eta,kappa,lyapunov,thouless_term,remainder,stderr,delta_r",
        &rows,
    )?;
    write_sidecar(&out.join("remainder.json"), remainders, cfg, timestamp)?;
    Ok(())
}

fn run_green(cfg: &ExperimentConfig, out: &Path, timestamp: bool) -> Result<(), CliError> {
    let ctx = context(cfg)?;
    let spec = DisorderSpec::new(cfg.disorder.clone(), cfg.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let omega = spec.realization(0);
    let (zre, zim) = cfg
        .z_complex
        .ok_or_else(|| CliError::Usage("green needs --z re,im".into()))?;
    let z = Complex64::new(zre, zim);
    let parse_vertex = |s: &Option<String>, default: &str| -> Result<VertexLabel, CliError> {
        let text = s.as_deref().unwrap_or(default);
        VertexLabel::parse(&ctx, text).map_err(|e| CliError::Usage(e.to_string()))
    };
    let x = parse_vertex(&cfg.x, "0")?;
    let y = parse_vertex(&cfg.y, "0,0")?;
    let region = Region::ball(&ctx, cfg.l)?;
    let op = assemble(&ctx, &region, &omega);
    let engine = cfg.engine.unwrap_or(EngineKind::Direct);
    let (value, bound) = match engine {
        EngineKind::Direct => (green::green_direct(&op, z, &x, &y)?, f64::NAN),
        EngineKind::Rw => {
            let (v, b) = green::green_rw(&op, z, &x, &y, cfg.n_terms)?;
            (v, b)
        }
        EngineKind::Saw => (green::green_saw(&ctx, &region, &omega, z, &x, &y)?, f64::NAN),
    };
    let row = vec![
        format!("{engine:?}"),
        cfg.kappa.to_string(),
        cfg.l.to_string(),
        x.label_string(),
        y.label_string(),
        fmt_f(z.re),
        fmt_f(z.im),
        fmt_f(value.re),
        fmt_f(value.im),
        fmt_f(bound),
    ];
    write_csv(
        &out.join("green.csv"),
        "engine,kappa,radius,x,y,z_re,z_im,value_re,value_im,error_bound",
        &[row],
    )?;
    #[derive(Serialize)]
    struct Summary {
        value_re: f64,
        value_im: f64,
        error_bound: f64,
    }
    write_sidecar(
        &out.join("green.json"),
        Summary {
            value_re: value.re,
            value_im: value.im,
            error_bound: bound,
        },
        cfg,
        timestamp,
    )?;
    println!("G(z; {x}, {y}) = {value}");
    Ok(())
}

/// Entry point used by the binary: parse, resolve, run, map to exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own message; help/version are success
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match run(&cfg, &cli.out, cli.threads, cli.timestamp) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_17_significant_digits() {
        let s = fmt_f(std::f64::consts::PI);
        assert!(s.starts_with("3.1415926535897931"), "{s}");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn z_list_parsing() {
        assert_eq!(parse_f64_list("0,1").unwrap(), vec![0.0, 1.0]);
        assert_eq!(parse_f64_list(" 0.5 , -1 ").unwrap(), vec![0.5, -1.0]);
        assert!(parse_f64_list("a,b").is_err());
        assert_eq!(parse_complex("1,0.5").unwrap(), (1.0, 0.5));
        assert!(parse_complex("1").is_err());
    }

    #[test]
    fn disorder_resolution_conflicts_rejected() {
        let args = DisorderArgs {
            zero_disorder: true,
            constant: Some(1.0),
            ..Default::default()
        };
        assert!(resolve_disorder(&args, None, None).is_err());
        let ok = DisorderArgs {
            bernoulli: Some("0.5,1.0".into()),
            seed: Some(9),
            ..Default::default()
        };
        let (d, s) = resolve_disorder(&ok, None, None).unwrap();
        assert_eq!(d, Distribution::Bernoulli { p: 0.5, w: 1.0 });
        assert_eq!(s, 9);
    }

    #[test]
    fn config_file_roundtrip() {
        let toml_text = r#"
[experiment]
kappa = 3
seed = 7
l = 5
eta = 0.02
samples = 4

[experiment.disorder]
kind = "uniform"
c = 0.5
"#;
        let parsed: ConfigFile = toml::from_str(toml_text).unwrap();
        let table = parsed.experiment.unwrap();
        assert_eq!(table.kappa, Some(3));
        assert_eq!(table.disorder, Some(Distribution::Uniform { c: 0.5 }));
        assert_eq!(table.eta, Some(0.02));
    }
}
