use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finsler_cr::nijenhuis::flag_fit;
use finsler_cr::report::emit_report;
use finsler_cr::suite::{run_suite, sample_points, CheckId, ConfigError, RunConfig};
use finsler_cr::framed::FrameContext;
use finsler_cr::FinslerSpec;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Residual checks for the CR-structures on the slit tangent bundle of a
/// Finsler manifold.
#[derive(Parser)]
#[command(name = "finsler-cr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured checks and write `<out>.csv` and `<out>.summary.txt`.
    Check(RunArgs),
    /// Print the metric catalog and the check identifiers.
    List,
    /// Fit scalar flag curvature at the sampled points.
    FitFlag(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the configured check list; repeatable.
    #[arg(long = "check", value_parser = parse_check)]
    checks: Vec<CheckId>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    /// Replaces the configured beta values; repeatable.
    #[arg(long = "beta")]
    betas: Vec<f64>,
    #[arg(long)]
    tol_jet: Option<f64>,
    #[arg(long)]
    tol_bracket: Option<f64>,
    /// Output path prefix.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_check(s: &str) -> Result<CheckId, String> {
    s.parse()
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Failure> {
        let text = fs::read_to_string(&self.config)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", self.config.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if !self.checks.is_empty() {
            cfg.checks = self.checks.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.points {
            cfg.n_points = n;
        }
        if !self.betas.is_empty() {
            cfg.beta_values = self.betas.clone();
        }
        if let Some(t) = self.tol_jet {
            cfg.tolerances.jet_exact = t;
        }
        if let Some(t) = self.tol_bracket {
            cfg.tolerances.bracket = t;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            list();
            Ok(0)
        }
        Command::Check(args) => check(&args),
        Command::FitFlag(args) => fit_flag(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn list() {
    println!("catalog:");
    for m in [2, 3] {
        let mut specs = FinslerSpec::catalog(m);
        specs.insert(2, FinslerSpec::poincare(m));
        for s in specs {
            let json = serde_json::to_string(&s).expect("spec serializes");
            println!("  {:<36} {json}", s.label());
        }
    }
    println!("checks:");
    for id in CheckId::ALL {
        println!("  {:<22} {}", id.as_str(), id.description());
    }
}

fn check(args: &RunArgs) -> Result<u8, Failure> {
    let cfg = args.load()?;
    let result = run_suite(&cfg)?;
    write_outputs(&result.report, &result.notes, &cfg.output)?;
    for n in &result.notes {
        println!("{n}");
    }
    print!("{}", result.report.summary_text());
    Ok(if result.status() == 0 { 0 } else { EXIT_FAIL })
}

fn write_outputs(report: &finsler_cr::CheckReport, notes: &[String], prefix: &Path) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("cannot write report {}: {e}", prefix.display()));
    let (_, txt) = emit_report(report, prefix).map_err(io)?;
    let mut text = notes.join("\n");
    text.push('\n');
    text.push_str(&report.summary_text());
    fs::write(txt, text).map_err(io)
}

fn fit_flag(args: &RunArgs) -> Result<u8, Failure> {
    let cfg = args.load()?;
    let tol = cfg.tolerances.jet_exact;
    let points = sample_points(&cfg.spec, cfg.n_points, cfg.seed).map_err(|e| Failure::Config(e.to_string()))?;
    println!("{}", cfg.spec.label());
    println!("{:>5}  {:>16}  {:>10}  {:>10}", "point", "lambda", "misfit", "phi");
    let mut ok = true;
    for (i, p) in points.iter().enumerate() {
        let ctx = match FrameContext::new(&cfg.spec, p) {
            Ok(c) => c,
            Err(e) => {
                println!("{i:>5}  error: {e}");
                ok = false;
                continue;
            }
        };
        let fit = flag_fit(&ctx.geometry, tol);
        let phi = fit.phi_residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
        println!("{i:>5}  {:>16.12}  {:>10.3e}  {:>10}", fit.lambda, fit.residual, phi);
        ok &= fit.residual < tol;
    }
    Ok(if ok { 0 } else { EXIT_FAIL })
}
