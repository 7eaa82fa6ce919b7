use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ltshift::distribution::DivergenceConvention;
use ltshift::protocol::{compare, run_named, ProtocolConfig, SamplingMode, DEFAULT_REPEATS};
use ltshift::report::{
    curve, curve_csv, leaderboard_csv, leaderboard_markdown, read_report, report_to_string,
};
use ltshift::{ingest, Error};

#[derive(Parser)]
#[command(
    name = "ltshift",
    version,
    about = "Evaluate classifier predictions under long-tailed label shift"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Bootstrap,
    Exhaustive,
    Expected,
}

#[derive(Clone, Copy, ValueEnum)]
enum Divergence {
    Jeffreys,
    Js,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Run the shift protocol on a predictions file and write a report.
    Run {
        /// JSONL file with one {id, label, pred[, scores]} record per line.
        #[arg(long)]
        predictions: PathBuf,
        /// JSON dataset manifest with the class count and training counts.
        #[arg(long)]
        manifest: PathBuf,
        /// Test imbalance ratio; values below 1 are read as 1/ratio.
        #[arg(long = "rho-test", default_value_t = 100.0)]
        rho_test: f64,
        /// Largest per-class test size of the head-peaked profile.
        #[arg(long = "n-max", default_value_t = 1000)]
        n_max: usize,
        /// Number of synthesized test distributions (default: number of classes).
        #[arg(long = "t")]
        t: Option<usize>,
        /// Independent test sets drawn per synthesized distribution.
        #[arg(long, default_value_t = DEFAULT_REPEATS)]
        repeats: usize,
        /// Master seed; every draw derives its own stream from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// bootstrap: with replacement; exhaustive: without; expected: closed form.
        #[arg(long, value_enum, default_value = "bootstrap")]
        mode: Mode,
        /// Distance between training and test label distributions.
        #[arg(long, value_enum, default_value = "jeffreys")]
        divergence: Divergence,
        /// Method name stored in the report (default: predictions file stem).
        #[arg(long)]
        method: Option<String>,
        /// Worker threads (default: all cores). Does not affect the report.
        #[arg(long)]
        threads: Option<usize>,
        /// Report format; only json is accepted.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Emit the accuracy-versus-shift curve of a report.
    Curve {
        /// Report written by `run`.
        report: PathBuf,
        /// csv or json.
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank several reports in a comparison table.
    Compare {
        /// Reports written by `run` with matching protocol settings.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// md, csv or json.
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        /// Output file (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
struct CliError(String);

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError(e.into().to_string())
    }
}

fn with_path(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError(format!("{}: {e}", path.display())))
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            predictions,
            manifest,
            rho_test,
            n_max,
            t,
            repeats,
            seed,
            mode,
            divergence,
            method,
            threads,
            format,
            out,
        } => {
            if format != Format::Json {
                return Err(CliError("run writes reports as json only".into()));
            }
            let pool = ingest(open(&predictions)?, open(&manifest)?).map_err(|e| match e {
                Error::Parse {
                    source_name,
                    line,
                    message,
                } => {
                    let path = if source_name == "manifest" {
                        &manifest
                    } else {
                        &predictions
                    };
                    CliError(format!("{}:{line}: {message}", path.display()))
                }
                other => CliError(other.to_string()),
            })?;
            let config = ProtocolConfig {
                rho_tst: rho_test,
                n_max_tst: n_max,
                num_synthesizations: t,
                repeats,
                master_seed: seed,
                sampling_mode: match mode {
                    Mode::Bootstrap => SamplingMode::Bootstrap,
                    Mode::Exhaustive => SamplingMode::Exhaustive,
                    Mode::Expected => SamplingMode::Expected,
                },
                divergence: match divergence {
                    Divergence::Jeffreys => DivergenceConvention::Jeffreys,
                    Divergence::Js => DivergenceConvention::Js,
                },
            };
            let method = method.unwrap_or_else(|| {
                predictions
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default()
            });
            let workers = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| CliError(format!("thread pool: {e}")))?;
            let report = workers.install(|| run_named(&pool, &config, &method))?;
            emit(Some(&out), &report_to_string(&report))?;
            let a = report.aggregate;
            println!(
                "{} mode={} T={} AUC={:.4} AVG={:.4} STD={:.4} MAX={:.4} MIN={:.4} DR={:.4} BTD={:.4}",
                report.method,
                report.config.sampling_mode.as_str(),
                report.config.num_synthesizations,
                a.auc,
                a.avg,
                a.std,
                a.max_acc,
                a.min_acc,
                a.drop_ratio,
                report.balanced_accuracy
            );
            Ok(())
        }
        Command::Curve {
            report,
            format,
            out,
        } => {
            let parsed = read_report(open(&report)?).map_err(with_path(&report))?;
            let points = curve(&parsed);
            let text = match format {
                Format::Csv => curve_csv(&points),
                Format::Json => serde_json::to_string_pretty(&points)? + "\n",
                Format::Md => return Err(CliError("curve supports csv or json".into())),
            };
            emit(out.as_deref(), &text)
        }
        Command::Compare {
            reports,
            format,
            out,
        } => {
            let parsed = reports
                .iter()
                .map(|p| read_report(open(p)?).map_err(with_path(p)))
                .collect::<Result<Vec<_>, _>>()?;
            let board = compare(&parsed)?;
            let text = match format {
                Format::Md => leaderboard_markdown(&board),
                Format::Csv => leaderboard_csv(&board),
                Format::Json => serde_json::to_string_pretty(&board)? + "\n",
            };
            emit(out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
