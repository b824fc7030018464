//! Command-line front end.
//!
//! Every command produces a small table of numbers that is written as CSV,
//! JSON or aligned plain text. Stochastic commands are deterministic given
//! `--seed`, `--R` and the command arguments; `--workers` only changes speed.

use std::io::{self, Write};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::cramer::{gamma_of_x, theta_of_x, theta_tilde};
use crate::error::Error;
use crate::laplace::{
    laplace_power_estimate, log_laplace_asymptotic, log_laplace_k, moment_asymptotic, AsymptoticVariant,
    PowerStrategy, QuadratureConfig,
};
use crate::model::LognormalModel;
use crate::montecarlo::{cdf_is_estimate, pdf_is_estimate, LaplaceMode, McConfig, PdfVariant};
use crate::saddlepoint::{saddlepoint, SaddlepointOptions};
use crate::tables::{build, lookup, TABLE_NAMES};
use crate::tilted::{Algorithm, SamplerReport, TiltedSampler};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

const DEFAULT_R: usize = 100_000;

#[derive(Debug, Parser)]
#[command(name = "lognsum", version, about = "Left tails of i.i.d. lognormal sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    pub format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Monte Carlo replications.
    #[arg(long = "R", global = true)]
    pub replications: Option<usize>,
    /// Worker threads for Monte Carlo; does not affect results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Plain,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Laplace transform `L_k(θ) = E[X^k e^{−θX}]`.
    Laplace(LaplaceArgs),
    /// Start value `θ̃(x)` and saddlepoint `θ(x)`.
    Theta(ThetaArgs),
    /// Distribution function of the sum at `nx`.
    Cdf(SumArgs),
    /// Density of the sum at `nx`.
    Pdf(SumArgs),
    /// Draws from the tilted law `F_θ`.
    Sample(SampleArgs),
    /// One of the reproducible tables.
    Tables(TablesArgs),
}

#[derive(Debug, Args)]
pub struct LaplaceArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = 0)]
    pub k: u32,
    /// Closed-form asymptotic value.
    #[arg(long, conflicts_with_all = ["numeric", "is"])]
    pub asymptotic: bool,
    /// Quadrature (the default).
    #[arg(long, conflicts_with = "is")]
    pub numeric: bool,
    /// Importance-sampling estimate with this many replications.
    #[arg(long, value_name = "R")]
    pub is: Option<usize>,
    /// Report the n-th power of the value.
    #[arg(long, default_value_t = 1)]
    pub power: u32,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub x: f64,
    /// Refine `θ̃(x)` by Newton-Raphson.
    #[arg(long)]
    pub refine: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Saddle1,
    Saddle2,
    Mc,
}

#[derive(Debug, Args)]
pub struct SumArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub n: u32,
    #[arg(long, required_unless_present = "x_grid", conflicts_with = "x_grid")]
    pub x: Option<f64>,
    /// Comma-separated list of x values.
    #[arg(long, value_delimiter = ',')]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Method::Saddle2)]
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Naive,
    Gamma,
    Auto,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long)]
    pub theta: f64,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, value_enum, default_value_t = Algo::Auto)]
    pub algo: Algo,
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(TABLE_NAMES))]
    pub table: String,
    /// Deterministic columns only.
    #[arg(long)]
    pub no_mc: bool,
}

/// Numbers to print, plus metadata that only the JSON form carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub meta: Map<String, Value>,
    /// Lines appended to plain output and written to stderr otherwise.
    pub notes: Vec<String>,
}

impl Output {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
            meta: Map::new(),
            notes: vec![],
        }
    }

    fn meta(mut self, key: &str, v: Value) -> Self {
        self.meta.insert(key.into(), v);
        self
    }
}

/// Nine significant digits, independent of locale.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn render(out: &Output, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = out.columns.join(",");
            s.push('\n');
            for r in &out.rows {
                s.push_str(&r.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let rows: Vec<Value> = out
                .rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> = out
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.clone(), json!(v)))
                        .collect();
                    Value::Object(obj)
                })
                .collect();
            let mut top = out.meta.clone();
            top.insert("columns".into(), json!(out.columns));
            top.insert("rows".into(), Value::Array(rows));
            if !out.notes.is_empty() {
                top.insert("notes".into(), json!(out.notes));
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(top)).expect("json values are finite or null");
            s.push('\n');
            s
        }
        Format::Plain => {
            let cells: Vec<Vec<String>> = out.rows.iter().map(|r| r.iter().map(|v| fmt_num(*v)).collect()).collect();
            let widths: Vec<usize> = (0..out.columns.len())
                .map(|j| cells.iter().map(|r| r[j].len()).chain([out.columns[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |items: Vec<&str>| {
                items
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            let mut s = line(out.columns.iter().map(String::as_str).collect());
            s.push('\n');
            for r in &cells {
                s.push_str(&line(r.iter().map(String::as_str).collect()));
                s.push('\n');
            }
            for n in &out.notes {
                s.push_str("# ");
                s.push_str(n);
                s.push('\n');
            }
            s
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain { .. } | Error::NotLeftTail { .. } => EXIT_DOMAIN,
        Error::Convergence { .. } | Error::ProposalCap { .. } => EXIT_CONVERGENCE,
        Error::InsufficientSample { .. } | Error::Config(_) => EXIT_USAGE,
    }
}

fn mc_config(c: &Common) -> McConfig {
    let mc = McConfig::new(c.replications.unwrap_or(DEFAULT_R), c.seed);
    match c.workers {
        Some(k) => mc.with_workers(k),
        None => mc,
    }
}

fn cmd_laplace(a: &LaplaceArgs, c: &Common, cfg: &QuadratureConfig) -> crate::Result<Output> {
    let model = LognormalModel::new(a.sigma)?;
    if a.power == 0 {
        return Err(Error::Config("--power must be at least 1".into()));
    }
    let p = f64::from(a.power);
    let cols = ["sigma", "theta", "k", "power", "value", "log_value", "half_width"];
    let (method, log_v, hw) = if let Some(r) = a.is {
        if a.k != 0 {
            return Err(Error::Config("--is estimates the k = 0 transform only".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let e = laplace_power_estimate(&model, a.theta, a.power, r, PowerStrategy::Product, &mut rng)?;
        ("is", e.log_value, e.half_width)
    } else if a.asymptotic {
        let l = if a.k == 0 {
            log_laplace_asymptotic(&model, a.theta, AsymptoticVariant::WithDenominator)?
        } else {
            moment_asymptotic(&model, a.theta, a.k)?.ln()
        };
        ("asymptotic", p * l, f64::NAN)
    } else {
        let l = if a.theta == 0.0 {
            // E X^k at θ = 0
            0.5 * f64::from(a.k * a.k) * model.sigma2()
        } else {
            log_laplace_k(&model, a.theta, a.k, cfg)?
        };
        ("numeric", p * l, f64::NAN)
    };
    let mut out = Output::new(&cols).meta("method", json!(method));
    if method == "is" {
        out = out.meta("seed", json!(c.seed)).meta("R", json!(a.is));
    }
    out.rows.push(vec![a.sigma, a.theta, f64::from(a.k), p, log_v.exp(), log_v, hw]);
    Ok(out)
}

fn cmd_theta(a: &ThetaArgs, cfg: &QuadratureConfig) -> crate::Result<Output> {
    let model = LognormalModel::new(a.sigma)?;
    let g = gamma_of_x(&model, a.x)?;
    let tt = theta_tilde(&model, a.x)?;
    let (th, it, res) = if a.refine {
        let s = theta_of_x(&model, a.x, cfg)?;
        (s.theta, s.iterations as f64, s.residual)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let mut out = Output::new(&["x", "gamma", "theta_tilde", "theta", "iterations", "residual"]);
    out.rows.push(vec![a.x, g, tt, th, it, res]);
    Ok(out)
}

fn cmd_sum(a: &SumArgs, pdf: bool, c: &Common, cfg: &QuadratureConfig) -> crate::Result<Output> {
    let model = LognormalModel::new(a.sigma)?;
    let xs = match (&a.x, &a.x_grid) {
        (Some(x), _) => vec![*x],
        (None, Some(g)) if !g.is_empty() => g.clone(),
        _ => return Err(Error::Config("give --x or a nonempty --x-grid".into())),
    };
    let nf = f64::from(a.n);
    let mut out = Output::new(&["x", "nx", "theta", "value", "half_width"]);
    let mc = mc_config(c);
    for &x in &xs {
        let row = match a.method {
            Method::Saddle1 | Method::Saddle2 => {
                let r = saddlepoint(&model, a.n, x, cfg, SaddlepointOptions::default())?;
                let v = match (pdf, a.method == Method::Saddle1) {
                    (false, true) => r.cdf1,
                    (false, false) => r.cdf2,
                    (true, true) => r.pdf1,
                    (true, false) => r.pdf2,
                };
                vec![x, nf * x, r.theta_x, v, f64::NAN]
            }
            Method::Mc => {
                let e = if pdf {
                    pdf_is_estimate(&model, a.n, x, PdfVariant::B, cfg, &mc)?
                } else {
                    cdf_is_estimate(&model, a.n, x, LaplaceMode::Numeric, cfg, &mc)?
                };
                vec![x, nf * x, theta_tilde(&model, x)?, e.value, e.half_width]
            }
        };
        out.rows.push(row);
    }
    let method = match a.method {
        Method::Saddle1 => "saddle1",
        Method::Saddle2 => "saddle2",
        Method::Mc => "mc",
    };
    out = out.meta("method", json!(method)).meta("sigma", json!(a.sigma)).meta("n", json!(a.n));
    if a.method == Method::Mc {
        out = out.meta("seed", json!(mc.seed)).meta("R", json!(mc.replications));
    }
    Ok(out)
}

fn cmd_sample(a: &SampleArgs, c: &Common, cfg: &QuadratureConfig) -> crate::Result<Output> {
    let model = LognormalModel::new(a.sigma)?;
    let sampler = match a.algo {
        Algo::Auto => TiltedSampler::new(&model, a.theta, cfg)?,
        Algo::Naive => TiltedSampler::with_algorithm(&model, a.theta, Algorithm::Naive)?,
        Algo::Gamma => TiltedSampler::with_algorithm(&model, a.theta, Algorithm::GammaProposal)?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut out = Output::new(&["draw"]);
    let mut rep = SamplerReport::default();
    for _ in 0..a.count {
        let (x, r) = sampler.sample(&mut rng)?;
        out.rows.push(vec![x]);
        rep = rep.combine(&r);
    }
    let name = match sampler.algorithm() {
        Algorithm::Naive => "naive",
        Algorithm::GammaProposal => "gamma",
    };
    out.notes.push(format!(
        "algorithm {name}, accepted {}, proposals {}, acceptance {}",
        rep.draws_accepted,
        rep.proposals_used,
        fmt_num(rep.empirical_acceptance)
    ));
    Ok(out
        .meta("algorithm", json!(name))
        .meta("report", serde_json::to_value(rep).expect("plain struct"))
        .meta("seed", json!(c.seed)))
}

fn cmd_tables(a: &TablesArgs, c: &Common, cfg: &QuadratureConfig) -> crate::Result<Output> {
    let spec = lookup(&a.table)?;
    let mc = mc_config(c);
    let t = build(&spec, cfg, (!a.no_mc).then_some(&mc))?;
    let mut out = Output {
        columns: t.columns,
        rows: t.rows,
        meta: Map::new(),
        notes: vec![],
    }
    .meta("table", json!(t.name))
    .meta("sigma", json!(t.sigma))
    .meta("n", json!(t.n));
    if let (Some(r), Some(s)) = (t.replications, t.seed) {
        out = out.meta("seed", json!(s)).meta("R", json!(r));
    }
    Ok(out)
}

/// Executes a parsed command and returns what it would print.
pub fn execute(cli: &Cli) -> crate::Result<Output> {
    let cfg = QuadratureConfig::from_env()?;
    let c = &cli.common;
    match &cli.command {
        Command::Laplace(a) => cmd_laplace(a, c, &cfg),
        Command::Theta(a) => cmd_theta(a, &cfg),
        Command::Cdf(a) => cmd_sum(a, false, c, &cfg),
        Command::Pdf(a) => cmd_sum(a, true, c, &cfg),
        Command::Sample(a) => cmd_sample(a, c, &cfg),
        Command::Tables(a) => cmd_tables(a, c, &cfg),
    }
}

/// Parses `args`, runs the command and writes the result; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let text = render(&out, cli.common.format);
            let mut stdout = io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return EXIT_USAGE;
            }
            if cli.common.format != Format::Plain {
                for n in &out.notes {
                    eprintln!("{n}");
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("lognsum: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(args: &[&str]) -> crate::Result<Output> {
        let cli = Cli::try_parse_from(std::iter::once("lognsum").chain(args.iter().copied())).unwrap();
        execute(&cli)
    }

    #[test]
    fn laplace_near_zero() {
        let o = exec(&["laplace", "--sigma", "0.25", "--theta", "1e-12", "--k", "0", "--numeric"]).unwrap();
        assert!((o.rows[0][4] - 1.0).abs() < 1e-11);
        let o = exec(&["laplace", "--sigma", "0.25", "--theta", "0", "--k", "2"]).unwrap();
        assert!((o.rows[0][4] - 0.125f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn laplace_power_asymptotic() {
        let o = exec(&["laplace", "--sigma", "0.25", "--theta", "0.5002", "--asymptotic", "--power", "256"]).unwrap();
        assert!((o.rows[0][4] / 3.69e-57 - 1.0).abs() < 0.01, "{}", o.rows[0][4]);
    }

    #[test]
    fn theta_refine() {
        let o = exec(&["theta", "--sigma", "0.25", "--x", "0.5", "--refine"]).unwrap();
        assert!((o.rows[0][2] - 23.184_528_2).abs() < 1e-7);
        assert!((o.rows[0][3] - 22.763_931_5).abs() < 1e-6);
        let o = exec(&["theta", "--sigma", "0.25", "--x", "0.5"]).unwrap();
        assert!(o.rows[0][3].is_nan());
    }

    #[test]
    fn cdf_saddle_grid() {
        let o = exec(&["cdf", "--sigma", "0.25", "--n", "4", "--x-grid", "0.65,0.7", "--method", "saddle1"]).unwrap();
        assert_eq!(o.rows.len(), 2);
        assert!((o.rows[0][3] / 1.536_084e-4 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["lognsum", "theta", "--sigma", "0.25", "--x", "2"]), EXIT_DOMAIN);
        assert_eq!(run(["lognsum", "theta", "--sigma=-1", "--x", "0.5"]), EXIT_DOMAIN);
        assert_eq!(run(["lognsum", "theta", "--sigma", "0.25"]), EXIT_USAGE);
        assert_eq!(run(["lognsum", "cdf", "--sigma", "0.25", "--n", "4", "--x", "0.7", "--method", "mc", "--R", "1"]), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Convergence { iterations: 1, theta: 1.0, residual: 1.0 }), EXIT_CONVERGENCE);
    }

    #[test]
    fn csv_layout() {
        let mut o = Output::new(&["a", "b"]);
        o.rows.push(vec![1.0, 0.000_153_608_4]);
        assert_eq!(render(&o, Format::Csv), "a,b\n1.00000000e0,1.53608400e-4\n");
        let j: Value = serde_json::from_str(&render(&o.clone().meta("seed", json!(3)), Format::Json)).unwrap();
        assert_eq!(j["seed"], 3);
        assert_eq!(j["rows"][0]["b"], 0.000_153_608_4);
    }

    #[test]
    fn sample_reports_algorithm() {
        let o = exec(&["sample", "--sigma", "0.25", "--theta", "100", "--count", "5", "--seed", "2"]).unwrap();
        assert_eq!(o.meta["algorithm"], "gamma");
        assert_eq!(o.rows.len(), 5);
        let again = exec(&["sample", "--sigma", "0.25", "--theta", "100", "--count", "5", "--seed", "2"]).unwrap();
        assert_eq!(render(&o, Format::Csv), render(&again, Format::Csv));
    }
}
