//! Command-line front end behind the `msb` binary.
//!
//! Every command is also callable in-process through [`run`], which writes
//! to any `Write` sink and returns the process exit code. Exit codes: 0
//! success, 1 validation or parse error, 2 numerical-consistency failure,
//! 3 statistical-check failure.

pub mod io;
pub mod presets;
pub mod verify;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::moments::{
    moment_bruteforce, moment_conditional, moment_unconditional, moment_via_theta_recursion, Root, DEFAULT_BRUTE_CAP,
};
use crate::posterior::CountVector;
use crate::sampler::{sample_data, MsbSampler, RngStream, DEFAULT_EPS};

use self::io::{
    bar_chart_svg, parse_category, parse_query, read_counts, read_generator, smoothing_table, write_smooth_csv,
};
use self::presets::{FigurePreset, PresetName};
use self::verify::{run_suite, VerifyConfig};

const BIN_NOTE: &str =
    "Categories are numbered from 1; wherever a category is expected, a generator label is accepted as well.";

#[derive(Debug, Parser)]
#[command(name = "msb", version, about = "Markovian stick-breaking priors on finite category spaces", after_help = BIN_NOTE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a generator spec and print d, theta_G and the stationary distribution.
    Validate(ValidateArgs),
    /// Posterior-mean pmf for a counts file.
    Smooth(SmoothArgs),
    /// Evaluate a prior moment E[prod nu(A_i)^k_i].
    Moments(MomentsArgs),
    /// Draw truncated MSB measures, or data from them.
    Sample(SampleArgs),
    /// Run the exact and Monte Carlo self-check suite.
    Verify(VerifyArgs),
    /// Reproduce one of the 30-bin smoothing experiments.
    Figure(FigureArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// JSON generator spec.
    #[arg(long)]
    pub generator: PathBuf,
}

#[derive(Debug, Args)]
#[command(after_help = BIN_NOTE)]
pub struct SmoothArgs {
    #[arg(long)]
    pub generator: PathBuf,
    /// CSV with header `category,count`; absent categories count zero.
    #[arg(long)]
    pub counts: PathBuf,
    /// Condition on the first atom's category.
    #[arg(long)]
    pub given_t1: Option<String>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG bar chart of the posterior mean.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// How `moments` evaluates the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dp,
    Brute,
    Theta(f64),
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "dp" => Ok(Method::Dp),
        "brute" => Ok(Method::Brute),
        _ => match s.strip_prefix("theta:") {
            Some(v) => v.parse().map(Method::Theta).map_err(|_| format!("bad theta in '{s}'")),
            None => Err(format!("unknown method '{s}' (expected dp, brute or theta:VALUE)")),
        },
    }
}

#[derive(Debug, Args)]
#[command(after_help = BIN_NOTE)]
pub struct MomentsArgs {
    #[arg(long)]
    pub generator: PathBuf,
    /// Comma-separated `set:exponent` terms; a set joins categories with `+`, e.g. "3+4+5:2,7:1".
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub given_t1: Option<String>,
    /// dp, brute, or theta:VALUE for the fixed-theta recursion.
    #[arg(long, default_value = "dp", value_parser = parse_method)]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub generator: PathBuf,
    /// Number of independent measures to draw.
    #[arg(long, default_value_t = 1)]
    pub n: u64,
    /// Stick-breaking truncation threshold.
    #[arg(long, default_value_t = DEFAULT_EPS)]
    pub eps: f64,
    #[arg(long)]
    pub seed: u64,
    /// Stick-breaking parameter; defaults to theta_G.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Emit M observations per measure instead of the atom table.
    #[arg(long)]
    pub data: Option<usize>,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub generator: PathBuf,
    /// Monte Carlo draws per statistical check.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// normal, gamma or wrapped.
    #[arg(long)]
    pub preset: String,
    /// Directory receiving one CSV and one SVG per prior.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Singular | Error::Numerical(_) | Error::Overflow | Error::PrecisionLoss { .. } => 2,
        _ => 1,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                1
            } else {
                let _ = write!(out, "{}", e.render());
                0
            };
        }
    };
    match run(&cli, out, err) {
        Ok(code) => code,
        // A closed downstream pipe (`msb ... | head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let code = main_with_args(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code)
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, out),
        Command::Smooth(a) => cmd_smooth(a, out),
        Command::Moments(a) => cmd_moments(a, out),
        Command::Sample(a) => cmd_sample(a, out),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Figure(a) => cmd_figure(a, out),
    }
}

fn with_output<F>(path: Option<&Path>, out: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(fs::File::create(p)?);
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(out),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

fn cmd_validate(a: &ValidateArgs, out: &mut dyn Write) -> Result<u8> {
    let g = read_generator(&a.generator)?;
    writeln!(out, "dimension: {}", g.dim())?;
    writeln!(out, "theta_G: {}", g.theta_g())?;
    writeln!(out, "mu: {}", join(g.mu().as_slice()))?;
    writeln!(out, "irreducible: yes")?;
    Ok(0)
}

fn optional_category(g: &GeneratorMatrix, token: Option<&String>) -> Result<Option<usize>> {
    token.map(|t| parse_category(g, t)).transpose()
}

fn cmd_smooth(a: &SmoothArgs, out: &mut dyn Write) -> Result<u8> {
    let g = read_generator(&a.generator)?;
    let counts = read_counts(&g, &a.counts)?;
    let given = optional_category(&g, a.given_t1.as_ref())?;
    let rows = smoothing_table(&g, &counts, given)?;
    with_output(a.out.as_deref(), out, |w| write_smooth_csv(&rows, w))?;
    if let Some(svg) = &a.svg {
        let post: Vec<f64> = rows.iter().map(|r| r.posterior_mean).collect();
        let emp: Vec<f64> = rows.iter().map(|r| r.empirical).collect();
        fs::write(svg, bar_chart_svg("posterior mean", &post, Some(&emp)))?;
    }
    Ok(0)
}

fn cmd_moments(a: &MomentsArgs, out: &mut dyn Write) -> Result<u8> {
    let g = read_generator(&a.generator)?;
    let q = parse_query(&g, &a.query)?;
    let root = match optional_category(&g, a.given_t1.as_ref())? {
        Some(x) => Root::Category(x),
        None => Root::Stationary,
    };
    let value = match (a.method, root) {
        (Method::Dp, Root::Stationary) => moment_unconditional(&g, &q)?,
        (Method::Dp, Root::Category(x)) => moment_conditional(&g, &q, x)?,
        (Method::Brute, root) => moment_bruteforce(&g, &q, root, DEFAULT_BRUTE_CAP)?,
        (Method::Theta(theta), root) => moment_via_theta_recursion(&g, theta, &q, root)?,
    };
    writeln!(out, "{value}")?;
    Ok(0)
}

fn cmd_sample(a: &SampleArgs, out: &mut dyn Write) -> Result<u8> {
    let g = read_generator(&a.generator)?;
    let theta = a.theta.unwrap_or(g.theta_g());
    let sampler = MsbSampler::new(&g, theta, a.eps)?;
    with_output(a.out.as_deref(), out, |w| {
        let mut csv = csv::Writer::from_writer(w);
        match a.data {
            None => csv.write_record(["draw", "atom", "category", "weight"])?,
            Some(_) => csv.write_record(["draw", "observation", "category"])?,
        }
        for r in 0..a.n {
            let mut rng = RngStream::derive(a.seed, r);
            let m = sampler.draw(None, &mut rng);
            let draw = (r + 1).to_string();
            match a.data {
                None => {
                    let tail = (m.residual_state, m.residual);
                    for (j, &(t, p)) in m.atoms.iter().chain(std::iter::once(&tail)).enumerate() {
                        csv.write_record([draw.clone(), (j + 1).to_string(), g.category_name(t), p.to_string()])?;
                    }
                }
                Some(count) => {
                    for (i, y) in sample_data(&m, count, &mut rng).into_iter().enumerate() {
                        csv.write_record([draw.clone(), (i + 1).to_string(), g.category_name(y)])?;
                    }
                }
            }
        }
        csv.flush()?;
        Ok(())
    })?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<u8> {
    let report = run_suite(read_generator(&a.generator), VerifyConfig::new(a.samples, a.seed));
    for w in &report.warnings {
        writeln!(err, "warning: {w}")?;
    }
    for c in &report.checks {
        writeln!(out, "{c}")?;
    }
    Ok(report.exit_code())
}

/// Writes `<preset>_<g1..g4>.csv` and `.svg` into `dir`; returns the paths written.
pub fn write_figure(name: PresetName, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let preset = FigurePreset::new(name);
    let counts: CountVector = preset.counts();
    let mut written = Vec::new();
    for prior in &preset.priors {
        let g = prior.spec.build()?;
        let rows = smoothing_table(&g, &counts, None)?;
        let stem = format!("{}_{}", preset.name, prior.key);
        let csv_path = dir.join(format!("{stem}.csv"));
        write_smooth_csv(&rows, fs::File::create(&csv_path)?)?;
        let post: Vec<f64> = rows.iter().map(|r| r.posterior_mean).collect();
        let emp: Vec<f64> = rows.iter().map(|r| r.empirical).collect();
        let svg_path = dir.join(format!("{stem}.svg"));
        fs::write(
            &svg_path,
            bar_chart_svg(&format!("{}: {}", preset.name, prior.title), &post, Some(&emp)),
        )?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}

fn cmd_figure(a: &FigureArgs, out: &mut dyn Write) -> Result<u8> {
    let name: PresetName = a.preset.parse()?;
    for p in write_figure(name, &a.out)? {
        writeln!(out, "{}", p.display())?;
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_parsing() {
        assert_eq!(parse_method("dp").unwrap(), Method::Dp);
        assert_eq!(parse_method("brute").unwrap(), Method::Brute);
        assert_eq!(parse_method("theta:2.5").unwrap(), Method::Theta(2.5));
        assert!(parse_method("theta:x").is_err());
        assert!(parse_method("mc").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
