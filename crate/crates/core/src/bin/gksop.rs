use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gk_secrecy::channel::MixedGammaModel;
use gk_secrecy::cli::{
    run_checks, run_sweep, write_csv, CliError, Column, FaultInjection, LawName, MethodColumn, SweepOutcome, SweepSpec,
    SweptVariable, ValidationLevel, EXIT_CHECKS, EXIT_CONFIG, EXIT_OK,
};
use gk_secrecy::secrecy::asymptote_report;

/// Secrecy outage probability over generalized-K fading links.
#[derive(Parser)]
#[command(name = "gksop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the requested methods at one operating point.
    Point {
        #[command(flatten)]
        spec: SpecArgs,
        /// Also write the result as a one-row CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a grid over one swept variable and write CSV.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        end: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-check suite.
    Validate {
        #[arg(long, default_value = "fast")]
        level: String,
        #[arg(long = "inject_fault", hide = true)]
        inject_fault: bool,
    },
}

/// Flags mirror the config file keys and override them.
#[derive(Args)]
#[command(rename_all = "snake_case")]
struct SpecArgs {
    /// TOML file with SweepSpec keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d_k: Option<f64>,
    #[arg(long)]
    d_m: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    d_gamma_bar_db: Option<f64>,
    #[arg(long)]
    e_k: Option<f64>,
    #[arg(long)]
    e_m: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    e_gamma_bar_db: Option<f64>,
    #[arg(long)]
    rate_rs: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Mixture order.
    #[arg(short = 'L', long = "L")]
    order: Option<usize>,
    #[arg(long)]
    mc_samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo substreams (part of the reproducibility key).
    #[arg(long)]
    workers: Option<usize>,
    /// exact_gk or surrogate_mixture.
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    quad_rel_tol: Option<f64>,
    /// Comma-separated subset of closed,quadrature,asymptotic,mc,conventional.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Worker threads; does not affect results.
    #[arg(long)]
    threads: Option<usize>,
}

impl SpecArgs {
    fn resolve(&self) -> Result<SweepSpec, CliError> {
        let mut spec = match &self.config {
            Some(path) => SweepSpec::from_file(path)?,
            None => SweepSpec::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { spec.$target = v; })*
            };
        }
        set!(d_k => d_k, d_m => d_m, d_gamma_bar_db => d_gamma_bar_db, e_k => e_k, e_m => e_m,
             e_gamma_bar_db => e_gamma_bar_db, rate_rs => rate_rs, mu => mu, order => order,
             mc_samples => mc_samples, seed => seed, workers => workers, quad_rel_tol => quad_rel_tol);
        if let Some(law) = &self.law {
            spec.law = match law.as_str() {
                "exact_gk" => LawName::ExactGk,
                "surrogate_mixture" => LawName::SurrogateMixture,
                other => return Err(CliError::Config(format!("unknown law '{other}'"))),
            };
        }
        if let Some(methods) = &self.methods {
            spec.methods = methods
                .iter()
                .filter(|m| !m.trim().is_empty())
                .map(|m| m.parse::<MethodColumn>())
                .collect::<Result<_, _>>()
                .map_err(CliError::Config)?;
        }
        Ok(spec)
    }

    fn threads(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

fn main() -> ExitCode {
    // Usage errors share the configuration exit status.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() {
                EXIT_CONFIG as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Point { spec, out } => {
            let threads = spec.threads();
            let spec = spec.resolve()?;
            spec.validate(false)?;
            let outcome = run_sweep(&spec, threads)?;
            if let Some(err) = outcome.first_error(&spec) {
                return Err(err);
            }
            print_report(&spec, &outcome)?;
            if let Some(path) = out {
                write_file(&path, &spec, &outcome)?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            spec: args,
            sweep,
            start,
            end,
            step,
            out,
        } => {
            let threads = args.threads();
            let mut spec = args.resolve()?;
            if let Some(var) = sweep {
                spec.sweep = Some(var.parse::<SweptVariable>().map_err(CliError::Config)?);
            }
            spec.start = start.or(spec.start);
            spec.end = end.or(spec.end);
            spec.step = step.or(spec.step);
            if spec.sweep.is_none() {
                return Err(CliError::Config(
                    "sweep needs --sweep (or `sweep` in the config)".into(),
                ));
            }
            let outcome = run_sweep(&spec, threads)?;
            match &out {
                Some(path) => write_file(path, &spec, &outcome)?,
                None => write_csv(io::stdout().lock(), spec.swept_name(), &outcome).map_err(io_error)?,
            }
            eprintln!("units: {}", spec.unit_metadata());
            let failed: Vec<_> = outcome.failures().collect();
            eprintln!("rows={} failed_cells={}", outcome.rows.len(), failed.len());
            for f in &failed {
                eprintln!(
                    "failed: {} at {}={}: {}",
                    f.method,
                    spec.swept_name(),
                    f.swept_value,
                    f.error
                );
            }
            match outcome.first_error(&spec) {
                Some(err) => Err(err),
                None => Ok(EXIT_OK),
            }
        }
        Command::Validate { level, inject_fault } => {
            let level: ValidationLevel = level.parse().map_err(CliError::Config)?;
            let fault = inject_fault.then_some(FaultInjection::CorruptMixtureCoefficient);
            let results = run_checks(level, fault);
            let mut stdout = io::stdout().lock();
            for r in &results {
                writeln!(stdout, "{r}").map_err(io_error)?;
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            writeln!(stdout, "summary passed={} failed={failed}", results.len() - failed).map_err(io_error)?;
            Ok(if failed == 0 { EXIT_OK } else { EXIT_CHECKS })
        }
    }
}

fn io_error(e: io::Error) -> CliError {
    CliError::Config(format!("cannot write output: {e}"))
}

fn write_file(path: &PathBuf, spec: &SweepSpec, outcome: &SweepOutcome) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
    write_csv(BufWriter::new(file), spec.swept_name(), outcome).map_err(io_error)
}

fn print_report(spec: &SweepSpec, outcome: &SweepOutcome) -> Result<(), CliError> {
    let row = &outcome.rows[0];
    let mut out = io::stdout().lock();
    let mut line = |s: String| writeln!(out, "{s}").map_err(io_error);
    line(format!("configuration: {}", spec.describe()))?;
    line(format!("units: {}", spec.unit_metadata()))?;
    line(format!("lambda = {}", 2f64.powf(spec.rate_rs)))?;
    for (col, value) in outcome.columns.iter().zip(&row.values) {
        if *col == Column::McStderr {
            continue;
        }
        let mut text = format!("{:<13}{:.10e}", col.name(), value.unwrap_or(f64::NAN));
        if *col == Column::Mc {
            if let Some(se) = row.get(&outcome.columns, Column::McStderr) {
                text.push_str(&format!("  (stderr {se:.3e}, {} samples)", spec.mc_samples));
            }
        }
        line(text)?;
    }
    if spec.methods.contains(&MethodColumn::Asymptotic) {
        let point = spec.point(spec.d_gamma_bar_db)?;
        let e_model =
            MixedGammaModel::fit(&point.e, spec.order).map_err(|e| CliError::from_core(&e, &spec.describe()))?;
        let report = asymptote_report(&point.d, &e_model, &point.secrecy)
            .map_err(|e| CliError::from_core(&e, &spec.describe()))?;
        line(format!(
            "high-SNR law: diversity order {}, coefficient {:.10e}, array gain {:.10e}",
            report.diversity_order, report.coefficient, report.array_gain
        ))?;
    }
    Ok(())
}
