//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on errors (bad flags, unreadable data, failed
//! fits), 2 when a fit stops without converging. Non-converged results are
//! still written.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::chunk::{ChunkSchema, CsvSource, DEFAULT_CHUNK_SIZE};
use crate::error::{Error, Result};
use crate::family::{Family, FamilyLink, Link};
use crate::fit::{
    fit, DispersionRule, FitConfig, FitResult, Variant, DEFAULT_EPSILON, DEFAULT_MAX_ITER,
};
use crate::sim::{self, SimOptions};

#[derive(Debug, Parser)]
#[command(
    name = "bigglm",
    version,
    about = "Bounded-memory GLM fitting with bias reduction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a GLM to a CSV file, streaming it in chunks.
    Fit(FitArgs),
    /// Run a high-dimensional logistic regression simulation grid.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Column of prior weights (binomial totals for proportions).
    #[arg(long)]
    pub weights: Option<String>,
    /// Covariate columns; defaults to every other column.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub no_intercept: bool,
    #[arg(long, default_value = "binomial")]
    pub family: String,
    /// Defaults to the canonical link of the family.
    #[arg(long)]
    pub link: Option<String>,
    #[arg(long, default_value = "mjpl")]
    pub estimator: String,
    /// Power of the Jeffreys' prior penalty for mjpl.
    #[arg(long, default_value_t = 1.0)]
    pub jeffreys_power: f64,
    #[arg(long, default_value = "two-pass")]
    pub variant: String,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// fixed, moment, ml or mbr; defaults to fixed for binomial/poisson and moment otherwise.
    #[arg(long)]
    pub dispersion: Option<String>,
    /// json, csv or text.
    #[arg(long, default_value = "json")]
    pub output: String,
    /// Write results here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// CSV with columns kappa,n,rho2,gamma,shape,reps,seed,mle_exists.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub summary_csv: Option<PathBuf>,
    #[arg(long)]
    pub summary_json: Option<PathBuf>,
    /// Long-format per-replicate estimates.
    #[arg(long)]
    pub estimates: Option<PathBuf>,
    /// Mean fit time per setting (machine-dependent).
    #[arg(long)]
    pub timing_out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = sim::SIM_CHUNK_SIZE)]
    pub chunk_size: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Also fit ML where it exists.
    #[arg(long)]
    pub fit_ml: bool,
}

fn flag<T: std::str::FromStr<Err = Error>>(name: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|e: Error| Error::Config(format!("--{name}: {e}")))
}

/// Parses flags into a model and configuration without touching the data.
pub fn build_model(args: &FitArgs) -> Result<(FamilyLink, FitConfig)> {
    let family: Family = flag("family", &args.family)?;
    let link = match &args.link {
        Some(l) => flag::<Link>("link", l)?,
        None => family.canonical_link(),
    };
    let mut fl =
        FamilyLink::new(family, link).map_err(|e| Error::Config(format!("--link: {e}")))?;
    fl = fl
        .with_jeffreys_power(args.jeffreys_power)
        .map_err(|e| Error::Config(format!("--jeffreys-power: {e}")))?;
    let mut config = FitConfig::new(flag("estimator", &args.estimator)?)
        .variant(flag::<Variant>("variant", &args.variant)?)
        .epsilon(args.epsilon)
        .max_iter(args.max_iter);
    if let Some(d) = &args.dispersion {
        config = config.dispersion(flag::<DispersionRule>("dispersion", d)?);
    }
    if args.chunk_size == 0 {
        return Err(Error::Config("--chunk-size must be positive".into()));
    }
    if !matches!(args.output.as_str(), "json" | "csv" | "text") {
        return Err(Error::Config(format!(
            "--output: unknown format {:?}",
            args.output
        )));
    }
    let p = args.covariates.len() + usize::from(!args.no_intercept);
    if !args.covariates.is_empty() {
        config.validate(&fl, p)?;
    }
    Ok((fl, config))
}

fn header_of(path: &PathBuf) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::Read(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().quoting(false).from_reader(file);
    Ok(rdr
        .headers()
        .map_err(|e| Error::Read(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

/// Fits the model and writes the result to `out`. Returns the exit code.
pub fn run_fit(args: &FitArgs, out: &mut dyn Write) -> Result<i32> {
    let (fl, config) = build_model(args)?;
    let covariates = if args.covariates.is_empty() {
        header_of(&args.data)?
            .into_iter()
            .filter(|h| *h != args.response && Some(h) != args.weights.as_ref())
            .collect()
    } else {
        args.covariates.clone()
    };
    let mut schema =
        ChunkSchema::new(args.response.clone(), covariates).with_intercept(!args.no_intercept);
    if let Some(w) = &args.weights {
        schema = schema.with_weights(w.clone());
    }
    let mut source = CsvSource::open(&args.data, schema, args.chunk_size)?;
    let result = fit(&config, &mut source, &fl)?;
    let rendered = match args.output.as_str() {
        "json" => {
            serde_json::to_string_pretty(&result).map_err(|e| Error::Read(e.to_string()))? + "\n"
        }
        "csv" => render_csv(&result),
        _ => render_text(&result),
    };
    out.write_all(rendered.as_bytes())?;
    if result.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: {}",
            result.reason.as_deref().unwrap_or("fit did not converge")
        );
        Ok(2)
    }
}

fn render_csv(r: &FitResult) -> String {
    let mut s = String::from("name,estimate,se\n");
    for ((name, b), se) in r.names.iter().zip(&r.beta).zip(&r.se) {
        let _ = writeln!(s, "{name},{b},{se}");
    }
    s
}

/// Estimates over parenthesized standard errors, one coefficient per pair of lines.
fn render_text(r: &FitResult) -> String {
    let width = r.names.iter().map(String::len).max().unwrap_or(0).max(10);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} fit by {} ({}), n = {}",
        r.model, r.estimator, r.variant, r.n
    );
    for ((name, b), se) in r.names.iter().zip(&r.beta).zip(&r.se) {
        let _ = writeln!(s, "{name:<width$}  {b:>10.2}");
        let _ = writeln!(s, "{:<width$}  {:>10}", "", format!("({se:.2})"));
    }
    let _ = writeln!(s, "dispersion {:.4} ({})", r.phi, r.dispersion);
    let status = if r.converged {
        "converged"
    } else {
        "not converged"
    };
    let _ = writeln!(s, "{} iterations, {status}", r.iterations);
    s
}

pub fn run_simulate(args: &SimulateArgs) -> Result<i32> {
    let grid = sim::read_grid(&args.grid)?;
    let options = SimOptions {
        chunk_size: args.chunk_size,
        epsilon: args.epsilon,
        max_iter: args.max_iter,
        fit_ml: args.fit_ml,
        keep_estimates: args.estimates.is_some(),
        threads: args.threads,
    };
    let outcomes = sim::run_grid(&grid, &options)?;
    if let Some(p) = &args.summary_csv {
        sim::write_summary_csv(p, &outcomes)?;
    }
    if let Some(p) = &args.summary_json {
        sim::write_summary_json(p, &outcomes)?;
    }
    if let Some(p) = &args.estimates {
        sim::write_estimates_csv(p, &outcomes)?;
    }
    if let Some(p) = &args.timing_out {
        sim::write_timing_csv(p, &outcomes)?;
    }
    let mut err = io::stderr().lock();
    writeln!(
        err,
        "{:>6} {:>6} {:>5} {:>9} {:>9} {:>4} {:>6} {:>4} {:>9}",
        "kappa", "gamma", "p", "slope", "adjusted", "min", "mean", "max", "seconds"
    )?;
    for o in &outcomes {
        let s = &o.summary;
        writeln!(
            err,
            "{:>6} {:>6} {:>5} {:>9.3} {:>9.3} {:>4} {:>6.1} {:>4} {:>9.2}",
            s.kappa,
            s.gamma,
            s.p,
            s.slope,
            s.slope_adjusted,
            s.iterations_min,
            s.iterations_mean,
            s.iterations_max,
            s.time_mean_seconds
        )?;
        for r in o
            .replicates
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| (r.rep, e)))
        {
            writeln!(err, "  replicate {} failed: {}", r.0, r.1)?;
        }
    }
    Ok(0)
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => match &a.out {
            Some(path) => File::create(path)
                .map_err(Error::from)
                .and_then(|mut f| run_fit(a, &mut f)),
            None => run_fit(a, &mut io::stdout().lock()),
        },
        Command::Simulate(a) => run_simulate(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
