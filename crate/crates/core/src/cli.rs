//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 1 for
//! runtime failures (I/O, failed round-trip checks).

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::ballsbins::{
    balls_until_overflow, lambert_w0, max_load_prediction, solve_dc, throw_balls,
};
use crate::cell::{CodeKind, CodeParams};
use crate::sim::{
    cycle_rng, gamma_upper_bounds, roundtrip_check, run_experiment, DistributionSpec,
    ExperimentStats,
};

/// Environment variable consulted when `--seed` is not given.
pub const SEED_ENV: &str = "FLASHMOD_SEED";

/// Column order of `simulate` output.
pub const RECORD_HEADER: [&str; 11] = [
    "code",
    "k",
    "l",
    "q",
    "n",
    "cycles",
    "mean_r_inc",
    "mean_r_total",
    "eta",
    "gamma",
    "seed",
];

#[derive(Debug, Parser)]
#[command(name = "flashmod", version, about = "Flash modulation code simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run erase cycles for one code over a list of q values.
    Simulate(SimulateArgs),
    /// Random-loading experiments (max load or balls until overflow).
    Ballsbins(BallsArgs),
    /// Evaluate the analytic bounds and solvers.
    Bounds(BoundsArgs),
    /// Encode/decode consistency check over a (code, k, q) grid.
    Roundtrip(RoundtripArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CodeArg {
    SelfRandomized,
    LoadBalancing,
}

impl From<CodeArg> for CodeKind {
    fn from(c: CodeArg) -> Self {
        match c {
            CodeArg::SelfRandomized => CodeKind::SelfRandomized,
            CodeArg::LoadBalancing => CodeKind::LoadBalancing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    code: CodeArg,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 2)]
    l: u32,
    /// Comma-separated list of cell level counts.
    #[arg(long, value_delimiter = ',', required = true)]
    q: Vec<u32>,
    #[arg(long, default_value_t = 1000)]
    cycles: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Distribution file: one probability per line, '#' comments.
    #[arg(long, conflicts_with = "probs")]
    dist: Option<PathBuf>,
    /// Inline comma-separated probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BallsArgs {
    #[arg(long)]
    n: usize,
    /// Balls per trial; reports the max load.
    #[arg(long, conflicts_with = "q", required_unless_present = "q")]
    m: Option<u64>,
    /// Bin capacities plus one; reports balls placed until overflow.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    /// Solve for d(c).
    #[arg(long, allow_negative_numbers = true)]
    dc: Vec<f64>,
    /// Evaluate W0(x).
    #[arg(long = "lambert-w", allow_negative_numbers = true)]
    lambert_w: Vec<f64>,
    /// Efficiency bounds for this k (with --l).
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = 2)]
    l: u32,
    /// Max-load prediction for n,m,d.
    #[arg(long = "max-load", value_delimiter = ',', num_args = 1)]
    max_load: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    /// Restrict to one code; both when omitted.
    #[arg(long, value_enum)]
    code: Option<CodeArg>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    k: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    q: Vec<u32>,
    #[arg(long, default_value_t = 10_000)]
    writes: u64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => m,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: Option<&Path>, e: io::Error) -> CliError {
    match path {
        Some(p) => CliError::Runtime(format!("cannot write {}: {e}", p.display())),
        None => CliError::Runtime(format!("write failed: {e}")),
    }
}

/// Runs the CLI with process stdout/stderr and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_cli_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Same as [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Ballsbins(a) => ballsbins(a, out),
        Command::Bounds(a) => bounds(a, out),
        Command::Roundtrip(a) => roundtrip(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn write_output(path: Option<&Path>, body: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| io_err(Some(p), e)),
        None => out.write_all(body.as_bytes()).map_err(|e| io_err(None, e)),
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.cycles == 0 {
        return Err(usage("--cycles must be at least 1"));
    }
    if let Some(bad) = a.q.iter().find(|&&q| q < 2) {
        return Err(usage(format!("--q entries must be >= 2, got {bad}")));
    }
    let seed = resolve_seed(a.seed)?;
    let kind = CodeKind::from(a.code);
    let params: Vec<CodeParams> =
        a.q.iter()
            .map(|&q| CodeParams::new(kind, a.k, a.l, q).map_err(|e| usage(e.to_string())))
            .collect::<Result<_, _>>()?;
    let values = params[0].alphabet_size() as usize;
    let dist = match (&a.dist, &a.probs) {
        (Some(path), _) => DistributionSpec::from_file(path).map_err(|e| usage(e.to_string()))?,
        (None, Some(p)) => DistributionSpec::new(p.clone()).map_err(|e| usage(e.to_string()))?,
        (None, None) => DistributionSpec::uniform(values),
    };
    if dist.len() != values {
        return Err(usage(format!(
            "distribution has {} entries, expected l^k = {values}",
            dist.len()
        )));
    }
    let stats = params
        .iter()
        .map(|p| run_experiment(p, &dist, a.cycles, seed).map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let body = render_records(&stats, a.output.format);
    write_output(a.output.out.as_deref(), &body, out)
}

fn ballsbins(a: BallsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if a.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    if a.d.contains(&0) {
        return Err(usage("--d entries must be >= 1"));
    }
    let seed = resolve_seed(a.seed)?;
    let mut body = String::new();
    if let Some(m) = a.m {
        body.push_str("n,m,d,trials,mean_max_load,predicted_max_load,seed\n");
        for &d in &a.d {
            let total: u64 = (0..a.trials)
                .into_par_iter()
                .map(|i| throw_balls(a.n, m, d, &mut cycle_rng(seed, i)).max_load())
                .sum();
            let predicted = if a.n >= 3 && m >= 1 {
                max_load_prediction(a.n as f64, m as f64, d as u32).predicted_max_load
            } else {
                f64::NAN
            };
            let _ = writeln!(
                body,
                "{},{},{},{},{},{},{}",
                a.n,
                m,
                d,
                a.trials,
                fmt_real(total as f64 / a.trials as f64),
                fmt_real(predicted),
                seed
            );
        }
    } else {
        let qs = a.q.unwrap_or_default();
        if let Some(bad) = qs.iter().find(|&&q| q < 2) {
            return Err(usage(format!("--q entries must be >= 2, got {bad}")));
        }
        body.push_str("n,q,d,trials,mean_placed,eta,seed\n");
        for &q in &qs {
            for &d in &a.d {
                let total: u64 = (0..a.trials)
                    .into_par_iter()
                    .map(|i| balls_until_overflow(a.n, q, d, &mut cycle_rng(seed, i)))
                    .sum();
                let mean = total as f64 / a.trials as f64;
                let eta = 1.0 - mean / (a.n as f64 * (q as f64 - 1.0));
                let _ = writeln!(
                    body,
                    "{},{},{},{},{},{},{}",
                    a.n,
                    q,
                    d,
                    a.trials,
                    fmt_real(mean),
                    fmt_real(eta),
                    seed
                );
            }
        }
    }
    write_output(a.out.as_deref(), &body, out)
}

fn bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut body = String::new();
    for &c in &a.dc {
        let d = solve_dc(c).map_err(|e| usage(e.to_string()))?;
        let _ = writeln!(body, "solve_dc({c}) = {d}");
    }
    for &x in &a.lambert_w {
        let w = lambert_w0(x).map_err(|e| usage(e.to_string()))?;
        let _ = writeln!(body, "lambert_w0({x}) = {w}");
    }
    if let Some(k) = a.k {
        if k == 0 || a.l < 2 {
            return Err(usage("need k >= 1 and l >= 2"));
        }
        let (single, arbitrary) = gamma_upper_bounds(k, a.l);
        let _ = writeln!(
            body,
            "gamma_single_change_bound(k={k}, l={}) = {single}",
            a.l
        );
        let _ = writeln!(
            body,
            "gamma_arbitrary_change_bound(k={k}, l={}) = {arbitrary}",
            a.l
        );
    }
    if let Some(v) = &a.max_load {
        let [n, m, d] = v[..] else {
            return Err(usage("--max-load takes n,m,d"));
        };
        if n < 3.0 || m < 1.0 || d < 1.0 || d.fract() != 0.0 {
            return Err(usage("--max-load needs n >= 3, m >= 1 and integer d >= 1"));
        }
        let p = max_load_prediction(n, m, d as u32);
        let _ = writeln!(
            body,
            "max_load_prediction(n={n}, m={m}, d={d}) = {} ({:?})",
            p.predicted_max_load, p.regime
        );
    }
    if body.is_empty() {
        return Err(usage(
            "nothing to evaluate; pass --dc, --lambert-w, --k or --max-load",
        ));
    }
    out.write_all(body.as_bytes()).map_err(|e| io_err(None, e))
}

fn roundtrip(a: RoundtripArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed)?;
    let kinds = match a.code {
        Some(c) => vec![CodeKind::from(c)],
        None => vec![CodeKind::SelfRandomized, CodeKind::LoadBalancing],
    };
    let mut grid = Vec::new();
    for kind in kinds {
        for &k in &a.k {
            for &q in &a.q {
                grid.push(CodeParams::new(kind, k, 2, q).map_err(|e| usage(e.to_string()))?);
            }
        }
    }
    let mut body = String::from("code,k,q,written,noops,erases,mismatches,result\n");
    let mut failed = 0;
    for p in &grid {
        let r = roundtrip_check(p, a.writes, seed);
        failed += (!r.passed()) as usize;
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{}",
            p.kind(),
            p.k(),
            p.q(),
            r.written,
            r.noops,
            r.erases,
            r.mismatches,
            if r.passed() { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(
        body,
        "# passed {}/{} grid points",
        grid.len() - failed,
        grid.len()
    );
    out.write_all(body.as_bytes())
        .map_err(|e| io_err(None, e))?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} grid point(s) failed")));
    }
    Ok(())
}

/// Reals are written with 17 significant digits so they parse back exactly.
fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders records as CSV (fixed header) or a JSON array of flat objects.
pub fn render_records(stats: &[ExperimentStats], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = RECORD_HEADER.join(",");
            s.push('\n');
            for r in stats {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.code,
                    r.k,
                    r.l,
                    r.q,
                    r.n,
                    r.cycles,
                    fmt_real(r.mean_r_inc),
                    fmt_real(r.mean_r_total),
                    fmt_real(r.eta),
                    fmt_real(r.gamma),
                    r.seed
                );
            }
            s
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(stats).expect("stats serialize");
            s.push('\n');
            s
        }
    }
}

pub fn emit_records(stats: &[ExperimentStats], format: Format, path: &Path) -> io::Result<()> {
    fs::write(path, render_records(stats, format))
}
