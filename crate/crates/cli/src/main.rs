use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbd_cli::config::{parse_overrides, ScenarioConfig};
use qbd_cli::error::CliError;
use qbd_cli::{fit, sweep, verify};

#[derive(Parser)]
#[command(name = "qbd", version, about = "Survival probabilities under quantum Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate S(t) and its regime predictions as CSV.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Output CSV; defaults to `output.path` of the config, then stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Express the t column in units of the decoherence time.
        #[arg(long)]
        in_tau_d: bool,
        /// Skip the gnuplot script written next to the CSV.
        #[arg(long)]
        no_plot: bool,
        /// Config overrides, e.g. `--bath.gamma 1e-3`.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Estimate damping and temperature from a sweep table.
    Fit {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        hbar: f64,
    },
    /// Run the verification checks and report them as JSON.
    Verify {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(value: &impl serde::Serialize, path: Option<&Path>) -> Result<(), CliError> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Io(e.into()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QBD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("QBD_THREADS = `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Sweep {
            config,
            output,
            in_tau_d,
            no_plot,
            overrides,
        } => {
            let cfg = ScenarioConfig::load(&config, &parse_overrides(&overrides)?)?;
            let table = sweep::run_sweep(&cfg)?;
            let output = output.or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
            sweep::write_csv(&table, sink(output.as_deref())?, in_tau_d)?;
            if let (Some(path), false) = (&output, no_plot) {
                std::fs::write(path.with_extension("gp"), sweep::gnuplot_snippet(path, in_tau_d))?;
            }
            if !table.failures.is_empty() {
                for (t, reason) in &table.failures {
                    eprintln!("t = {t:e}: {reason}");
                }
                return Err(CliError::Numerical(qbd_core::QbdError::IntegrationFailure {
                    t: table.failures[0].0,
                    reason: format!("{} rows written as nan", table.failures.len()),
                }));
            }
            Ok(())
        }
        Command::Fit { input, output, hbar } => {
            let file = File::open(&input)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", input.display())))?;
            let report = fit::run_fit(file, hbar)?;
            write_json(&report, output.as_deref())
        }
        Command::Verify {
            config,
            output,
            overrides,
        } => {
            let cfg = ScenarioConfig::load(&config, &parse_overrides(&overrides)?)?;
            let report = verify::run_verify(&cfg)?;
            write_json(&report, output.as_deref())?;
            if report.all_passed() {
                Ok(())
            } else {
                Err(CliError::Acceptance {
                    failed: report.failed,
                    total: report.checks.len(),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
