//! The `sdpi` command line.
//!
//! ```text
//! sdpi compute <channel> --f kl          # BoundReport JSON on stdout
//! sdpi sweep --out fig.csv               # 19x19 BSC (p, q) sweep, CSV
//! sdpi verify inequalities --samples N   # SuiteReport JSON, exit 1 on fail
//! sdpi fdiv kl "[0.5,0.5]" "[0.25,0.75]" # one divergence evaluation
//! ```
//!
//! Channels are builtins (`bsc:<p>`, `bec:<beta>:<q>`, `dsbs:<alpha>`) or
//! paths to JSON files `{"p_x": [...], "W": [[row-major, |Y| rows]]}`.
//! Exit codes: 0 success / all verdicts pass, 1 verification failure,
//! 2 input error. Output is byte-stable for a fixed seed and inputs:
//! floats serialize with 17 significant digits (round-trip exact).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{certify, SuiteReport};
use crate::channel::{make_bsc_with_input, make_dsbs, JointSpec, Pmf};
use crate::contraction::OptimizerConfig;
use crate::divergence::{chi2_divergence, f_divergence, kl_divergence, FGenerator};
use crate::spectral::analyze;
use crate::verify;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "sdpi",
    version,
    about = "Contraction coefficients of discrete channels and their linear bounds"
)]
struct Cli {
    /// Seed for every randomized routine (restarts, suites, sweeps).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Optimizer configuration JSON. Fields and defaults: restarts 64,
    /// max_iters 500, step_tolerance 1e-10, ratio_tolerance 1e-9,
    /// include_chi2_seed true, include_vertex_seeds true. Missing fields
    /// take the defaults; seed comes from --seed.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path (sweep requires it; other commands print to stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format where a choice exists (sweep defaults to csv, the
    /// JSON-report commands to json).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the bound sandwich for one channel spec and one generator.
    Compute(ComputeArgs),
    /// Sweep a channel family over a parameter grid and write CSV rows.
    Sweep(SweepArgs),
    /// Run a verification suite; nonzero exit on any violation.
    Verify(VerifyArgs),
    /// Evaluate one f-divergence between two pmfs.
    Fdiv(FdivArgs),
}

#[derive(Args)]
struct ComputeArgs {
    /// Builtin (`bsc:<p>`, `bec:<beta>:<q>`, `dsbs:<alpha>`) or JSON path.
    channel: String,
    /// Generator name: kl, chi2, tv, tsallis:<alpha>.
    #[arg(long, default_value = "kl")]
    f: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Channel family to sweep.
    #[arg(long, value_enum, default_value_t = Family::Bsc)]
    family: Family,
    /// Crossover axis `start:stop:count` (closed endpoints).
    #[arg(long, default_value = "0.05:0.95:19")]
    p: String,
    /// Input-probability axis `start:stop:count`; must stay inside (0,1).
    #[arg(long, default_value = "0.05:0.95:19")]
    q: String,
    /// Full sweep specification as JSON (overrides the flags above):
    /// {"family": "bsc"|"dsbs", "p": {"start","stop","count"},
    ///  "q": {...}, "f_list": ["kl", ...], "outputs": [column names]}.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Family {
    /// BSC(p) with Bernoulli(q) input: the (p, q) surface of the bounds.
    Bsc,
    /// DSBS(alpha): the uniform-input slice, alpha on the p axis.
    Dsbs,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: inequalities, properties, local_limit, tensorization,
    /// appendix_c.
    suite: String,
    /// Sample budget (per dimension for inequalities).
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
}

#[derive(Args)]
struct FdivArgs {
    /// Generator name.
    f: String,
    /// First pmf: inline JSON array or @path.
    r: String,
    /// Second (reference) pmf: inline JSON array or @path.
    p: String,
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Compute(args) => {
            require_json(cli.format, "compute")?;
            cmd_compute(&args, &cfg, cli.out.as_deref())
        }
        Command::Sweep(args) => cmd_sweep(
            &args,
            &cfg,
            cli.out.as_deref(),
            cli.format.unwrap_or(Format::Csv),
        ),
        Command::Verify(args) => {
            require_json(cli.format, "verify")?;
            cmd_verify(&args, cli.seed, cli.out.as_deref())
        }
        Command::Fdiv(args) => {
            require_json(cli.format, "fdiv")?;
            cmd_fdiv(&args, cli.out.as_deref())
        }
    }
}

fn require_json(format: Option<Format>, command: &'static str) -> Result<()> {
    match format.unwrap_or(Format::Json) {
        Format::Json => Ok(()),
        Format::Csv => Err(Error::MissingData(match command {
            "compute" => "compute emits JSON only; use sweep for CSV",
            "verify" => "verify emits JSON only",
            _ => "this command emits JSON only",
        })),
    }
}

fn load_config(path: Option<&Path>, seed: u64) -> Result<OptimizerConfig> {
    let mut cfg = match path {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => OptimizerConfig::default(),
    };
    cfg.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn load_channel(spec: &str) -> Result<JointSpec> {
    if spec.starts_with("bsc:") || spec.starts_with("bec:") || spec.starts_with("dsbs:") {
        JointSpec::from_builtin_str(spec)
    } else {
        JointSpec::from_json(&fs::read_to_string(spec)?)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn cmd_compute(args: &ComputeArgs, cfg: &OptimizerConfig, out: Option<&Path>) -> Result<i32> {
    let spec = load_channel(&args.channel)?;
    let f = FGenerator::from_name(&args.f)?;
    let report = certify(&f, &spec, cfg)?;
    emit(out, &to_json(&report)?)?;
    Ok(if report.all_pass { 0 } else { 1 })
}

/// One sweep axis: `count` evenly spaced values on [start, stop].
#[derive(Clone, Copy, Debug, Serialize, serde::Deserialize)]
pub struct AxisSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AxisSpec {
    fn values(&self, name: &'static str) -> Result<Vec<f64>> {
        if self.count < 2 || !(self.stop > self.start) {
            return Err(Error::ParameterOutOfRange {
                name,
                value: f64::NAN,
            });
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|i| self.start + i as f64 * step)
            .collect())
    }
}

/// A parameter-grid sweep: family, axes, generators, and column selection.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct SweepSpec {
    /// `bsc` (axes p, q) or `dsbs` (axis p is alpha; q pinned at 1/2).
    pub family: String,
    pub p: AxisSpec,
    #[serde(default)]
    pub q: Option<AxisSpec>,
    /// Generators whose estimates appear as columns; `kl` drives the
    /// standard columns, others append `eta_<name>_est`.
    #[serde(default)]
    pub f_list: Option<Vec<String>>,
    /// Column selection; defaults to every available column in standard
    /// order.
    #[serde(default)]
    pub outputs: Option<Vec<String>>,
}

fn parse_axis(text: &str, name: &'static str) -> Result<AxisSpec> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::ParameterOutOfRange {
        name,
        value: f64::NAN,
    };
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(AxisSpec {
        start: parts[0].parse().map_err(|_| bad())?,
        stop: parts[1].parse().map_err(|_| bad())?,
        count: parts[2].parse().map_err(|_| bad())?,
    })
}

/// 17-significant-digit serialization: round-trip exact for f64.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

const STANDARD_COLUMNS: [&str; 8] = [
    "p",
    "q",
    "eta_chi2",
    "eta_kl_est",
    "thm3_raw",
    "thm2_raw",
    "thm3_clip",
    "thm2_clip",
];

fn cmd_sweep(
    args: &SweepArgs,
    cfg: &OptimizerConfig,
    out: Option<&Path>,
    format: Format,
) -> Result<i32> {
    let out = out.ok_or(Error::MissingData("--out path for sweep"))?;
    let spec = match &args.spec {
        Some(path) => serde_json::from_str::<SweepSpec>(&fs::read_to_string(path)?)?,
        None => SweepSpec {
            family: match args.family {
                Family::Bsc => "bsc".into(),
                Family::Dsbs => "dsbs".into(),
            },
            p: parse_axis(&args.p, "p")?,
            q: Some(parse_axis(&args.q, "q")?),
            f_list: None,
            outputs: None,
        },
    };
    let csv = run_sweep(&spec, cfg)?;
    let text = match format {
        Format::Csv => csv,
        Format::Json => csv_to_json(&csv)?,
    };
    fs::write(out, text)?;
    Ok(0)
}

/// Re-renders sweep CSV as a JSON array of row objects (same 17-digit
/// numbers, serialized as strings to stay byte-faithful).
fn csv_to_json(csv: &str) -> Result<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let rows: Vec<serde_json::Value> = lines
        .map(|line| {
            let cells = line.split(',');
            let map: serde_json::Map<String, serde_json::Value> = header
                .iter()
                .zip(cells)
                .map(|(h, c)| (h.to_string(), serde_json::Value::String(c.to_string())))
                .collect();
            serde_json::Value::Object(map)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows)?;
    text.push('\n');
    Ok(text)
}

/// Evaluates a sweep and renders the CSV (header plus one row per grid
/// point, row order fixed by grid index).
pub fn run_sweep(spec: &SweepSpec, cfg: &OptimizerConfig) -> Result<String> {
    let p_values = spec.p.values("p")?;
    let rows: Vec<(f64, f64)> = match spec.family.as_str() {
        "bsc" => {
            let q_axis = spec
                .q
                .ok_or(Error::MissingData("q axis for the bsc family"))?;
            let q_values = q_axis.values("q")?;
            if q_values.iter().any(|&q| q <= 0.0 || q >= 1.0) {
                return Err(Error::ParameterOutOfRange {
                    name: "q (grid must stay inside (0,1))",
                    value: f64::NAN,
                });
            }
            p_values
                .iter()
                .flat_map(|&p| q_values.iter().map(move |&q| (p, q)))
                .collect()
        }
        "dsbs" => p_values.iter().map(|&a| (a, 0.5)).collect(),
        other => return Err(Error::UnknownGenerator(format!("sweep family '{other}'"))),
    };

    let extra_fs: Vec<FGenerator> = spec
        .f_list
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .filter(|name| name.as_str() != "kl")
        .map(|name| FGenerator::from_name(name))
        .collect::<Result<_>>()?;

    let mut available: Vec<String> = STANDARD_COLUMNS.iter().map(|s| s.to_string()).collect();
    for f in &extra_fs {
        available.push(format!("eta_{}_est", f.name().replace(':', "_")));
    }
    let columns: Vec<String> = match &spec.outputs {
        Some(sel) => {
            for name in sel {
                if !available.contains(name) {
                    return Err(Error::UnknownGenerator(format!("output column '{name}'")));
                }
            }
            sel.clone()
        }
        None => available.clone(),
    };

    let kl = FGenerator::kl();
    let mut csv = columns.join(",");
    csv.push('\n');
    for &(p, q) in &rows {
        let joint = match spec.family.as_str() {
            "bsc" => make_bsc_with_input(p, q)?,
            _ => make_dsbs(p)?,
        };
        let report = certify(&kl, &joint, cfg)?;
        let mut cells: Vec<(String, f64)> = STANDARD_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .zip([
                p,
                q,
                report.eta_chi2,
                report.eta_f_estimate,
                report.thm3.raw,
                report.thm2.raw,
                report.thm3.clipped,
                report.thm2.clipped,
            ])
            .collect();
        for f in &extra_fs {
            let est = crate::contraction::estimate_eta_f(f, &joint, cfg)?;
            cells.push((format!("eta_{}_est", f.name().replace(':', "_")), est.value));
        }
        let line: Vec<String> = columns
            .iter()
            .map(|c| {
                let v = cells.iter().find(|(n, _)| n == c).expect("validated").1;
                fmt_f64(v)
            })
            .collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    Ok(csv)
}

fn cmd_verify(args: &VerifyArgs, seed: u64, out: Option<&Path>) -> Result<i32> {
    let report: SuiteReport = match args.suite.as_str() {
        "inequalities" => verify::run_inequalities(args.samples, seed, &[2, 3, 5, 8])?,
        "properties" => verify::run_properties(args.samples.min(500), seed)?,
        "local_limit" => verify::run_local_limit(seed, args.samples.min(10).max(1))?,
        "tensorization" => verify::run_tensorization(seed, args.samples.min(100).max(1))?,
        "appendix_c" => verify::run_appendix_c(seed)?,
        other => return Err(Error::UnknownGenerator(format!("suite '{other}'"))),
    };
    emit(out, &to_json(&report)?)?;
    Ok(if report.pass { 0 } else { 1 })
}

fn parse_pmf(text: &str) -> Result<Pmf> {
    let body = match text.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)?,
        None => text.to_string(),
    };
    let masses: Vec<f64> = serde_json::from_str(&body)?;
    Pmf::new(masses)
}

#[derive(Serialize)]
struct FdivOutput {
    f: String,
    /// Divergence in nats; null when infinite.
    value: Option<f64>,
    finite: bool,
    /// For kl: the bracket D <= log(1 + chi2) <= chi2.
    kl_bracket: Option<[f64; 3]>,
}

fn cmd_fdiv(args: &FdivArgs, out: Option<&Path>) -> Result<i32> {
    let f = FGenerator::from_name(&args.f)?;
    let r = parse_pmf(&args.r)?;
    let p = parse_pmf(&args.p)?;
    let d = f_divergence(&f, &r, &p)?;
    let kl_bracket = if f.is_kl() {
        let kl = kl_divergence(&r, &p)?.value();
        let chi2 = chi2_divergence(&r, &p)?.value();
        Some([kl, chi2.ln_1p(), chi2])
    } else {
        None
    };
    let output = FdivOutput {
        f: f.name().to_string(),
        value: d.is_finite().then(|| d.value()),
        finite: d.is_finite(),
        kl_bracket,
    };
    emit(out, &to_json(&output)?)?;
    Ok(0)
}

/// `compute dsbs:<alpha>` convenience used by tests: eta_chi2 of a builtin.
pub fn eta_chi2_of(spec: &str) -> Result<f64> {
    Ok(analyze(&load_channel(spec)?).eta_chi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_parsing() {
        let values = parse_axis("0.05:0.95:19", "p")
            .unwrap()
            .values("p")
            .unwrap();
        assert_eq!(values.len(), 19);
        assert!((values[0] - 0.05).abs() < 1e-12);
        assert!((values[18] - 0.95).abs() < 1e-12);
        assert!(parse_axis("0.5:0.4:3", "p").unwrap().values("p").is_err());
        assert!(parse_axis("0.1:0.9:1", "p").unwrap().values("p").is_err());
        assert!(parse_axis("0:1", "p").is_err());
    }

    #[test]
    fn sweep_spec_json_custom_columns() {
        let spec: SweepSpec = serde_json::from_str(
            r#"{"family": "dsbs", "p": {"start": 0.1, "stop": 0.3, "count": 3},
                "f_list": ["kl", "tsallis:1.5"],
                "outputs": ["p", "eta_chi2", "eta_kl_est", "eta_tsallis_1.5_est"]}"#,
        )
        .unwrap();
        let csv = run_sweep(&spec, &OptimizerConfig::light(3)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "p,eta_chi2,eta_kl_est,eta_tsallis_1.5_est"
        );
        let first: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|c| c.parse().unwrap())
            .collect();
        assert_eq!(first.len(), 4);
        assert!((first[1] - 0.64).abs() < 1e-12);
        // tsallis estimate also realizes eta_chi2 from below
        assert!(first[3] >= first[1] - 1e-6);
        assert!(first[3] <= 1.0 + 1e-9);

        let bad: SweepSpec = serde_json::from_str(
            r#"{"family": "dsbs", "p": {"start": 0.1, "stop": 0.3, "count": 3},
                "outputs": ["nope"]}"#,
        )
        .unwrap();
        assert!(run_sweep(&bad, &OptimizerConfig::light(3)).is_err());
    }

    #[test]
    fn float_format_roundtrips() {
        for v in [0.64, 1.0 / 3.0, 1e-17, 123456.789, 0.0] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
    }

    #[test]
    fn pmf_argument_parsing() {
        let p = parse_pmf("[0.25, 0.75]").unwrap();
        assert_eq!(p.len(), 2);
        assert!(parse_pmf("[0.5, 0.6]").is_err());
        assert!(parse_pmf("nonsense").is_err());
    }

    #[test]
    fn builtin_eta_values() {
        assert!((eta_chi2_of("dsbs:0.1").unwrap() - 0.64).abs() < 1e-12);
        assert!((eta_chi2_of("bec:0.3:0.5").unwrap() - 0.7).abs() < 1e-10);
        assert!(eta_chi2_of("bsc:0.5").unwrap() < 1e-15);
    }
}
