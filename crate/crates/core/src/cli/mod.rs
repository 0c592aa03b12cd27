//! The `girnet` command line: `gen`, `train`, `eval`, `trace` and
//! `gradcheck`, each reading a JSON run configuration.
//!
//! Fields of the configuration can be overridden with dotted flags placed
//! anywhere on the command line, `--loss.lambda 0.01` or `--optim.epochs=3`.
//! `GIRNET_SEED` overrides the seed.
//!
//! Exit codes: 0 ok, 1 usage or invalid input, 2 I/O, 3 numerical failure,
//! 4 checkpoint mismatch, 5 gradient check failure.

pub mod commands;
pub mod config;
pub mod fixture;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::numeric::Fault;
pub use commands::CheckpointMeta;
pub use config::{RunConfig, SEED_ENV};

#[derive(Debug, Parser)]
#[command(name = "girnet", version, about = "Gated interleaved recurrent networks for sequence multi-task learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic corpus files into the data directory.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Train and write the checkpoint and the metrics log.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Score a checkpoint on the test file (or `--input`).
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `output.checkpoint`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Export per-position gate values as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Defaults to `output.trace`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare backward-pass gradients of a tiny model with finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, hide = true)]
        fault: Option<FaultArg>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    SigmoidGrad,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_CHECKPOINT: u8 = 4;
pub const EXIT_GRADCHECK: u8 = 5;

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Data(_) | Error::Contract(_) | Error::Dimension { .. } => EXIT_USAGE,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => EXIT_IO,
        Error::NonFinite { .. } => EXIT_NUMERIC,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
    }
}

/// Wraps an I/O error with the path it happened on.
pub(crate) fn io_at(path: &std::path::Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Dotted `(path, value)` pairs taken from the command line.
type Overrides = Vec<(String, String)>;

/// Separates `--a.b value` and `--a.b=value` pairs from the arguments clap
/// sees.
fn split_overrides(args: Vec<OsString>) -> Result<(Vec<OsString>, Overrides), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key = arg.to_str().and_then(|s| s.strip_prefix("--")).filter(|k| {
            let name = k.split('=').next().unwrap_or_default();
            name.contains('.') && !name.starts_with('.')
        });
        let Some(key) = key else {
            rest.push(arg);
            continue;
        };
        match key.split_once('=') {
            Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
            None => {
                let value = it.next().ok_or_else(|| format!("--{key} needs a value"))?;
                let value = value.into_string().map_err(|_| format!("--{key}: value is not UTF-8"))?;
                overrides.push((key.to_string(), value));
            }
        }
    }
    Ok((rest, overrides))
}

/// Runs the command line and returns the process exit code.
pub fn run<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let (rest, overrides) = match split_overrides(args.into_iter().map(Into::into).collect()) {
        Ok(split) => split,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command, &overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, overrides: &[(String, String)]) -> crate::Result<u8> {
    let seed = std::env::var(SEED_ENV).ok();
    let load = |c: &Common| RunConfig::load(&c.config, seed.as_deref(), overrides);
    match command {
        Command::Gen { common } => {
            let config = load(&common)?;
            for path in commands::gen(&config)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Train { common } => {
            let config = load(&common)?;
            let summary = commands::train_cmd(&config)?;
            print!("trained {} epochs, final loss {:.6}", summary.epochs, summary.final_loss);
            if let Some(acc) = summary.dev_accuracy {
                print!(", dev accuracy {acc:.4}");
            }
            println!();
            println!("checkpoint {}", config.checkpoint_path().display());
            println!("metrics {}", config.metrics_path().display());
        }
        Command::Eval {
            common,
            checkpoint,
            input,
        } => {
            let config = load(&common)?;
            let ckpt = checkpoint.unwrap_or_else(|| config.checkpoint_path());
            let s = commands::eval_cmd(&config, &ckpt, input.as_deref())?;
            println!("accuracy {:.4}", s.metrics.accuracy);
            println!("macro_precision {:.4}", s.metrics.macro_precision);
            println!("macro_recall {:.4}", s.metrics.macro_recall);
            println!("macro_f1 {:.4}", s.metrics.macro_f1);
            if let Some(a) = s.agreement {
                println!("agreement {a:.4}");
            }
        }
        Command::Trace {
            common,
            checkpoint,
            input,
            out,
        } => {
            let config = load(&common)?;
            let ckpt = checkpoint.unwrap_or_else(|| config.checkpoint_path());
            let out = out.unwrap_or_else(|| config.trace_path());
            let rows = commands::trace_cmd(&config, &ckpt, input.as_deref(), &out)?;
            println!("wrote {rows} rows to {}", out.display());
        }
        Command::Gradcheck { common, fault } => {
            let config = load(&common)?;
            let fault = fault.map(|FaultArg::SigmoidGrad| Fault::SigmoidGrad);
            let (report, pass) = commands::gradcheck_cmd(&config, fault)?;
            println!(
                "max relative error {:.4e} over {} entries",
                report.max_rel_error, report.entries_checked
            );
            if !pass {
                if let Some((path, idx)) = &report.worst {
                    eprintln!("gradient check failed; worst parameter {path}[{idx}]");
                } else {
                    eprintln!("gradient check failed");
                }
                return Ok(EXIT_GRADCHECK);
            }
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(args: &[&str]) -> Vec<OsString> {
        args.iter().map(OsString::from).collect()
    }

    #[test]
    fn dotted_flags_are_split_off() {
        let (rest, ov) =
            split_overrides(os(&["girnet", "train", "--loss.lambda", "0.01", "--config", "c.json", "--optim.epochs=3"]))
                .unwrap();
        assert_eq!(rest, os(&["girnet", "train", "--config", "c.json"]));
        assert_eq!(
            ov,
            vec![("loss.lambda".into(), "0.01".into()), ("optim.epochs".into(), "3".into())]
        );
        assert!(split_overrides(os(&["girnet", "--loss.lambda"])).is_err());
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::NonFinite { step: 3 }), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Checkpoint("x".into())), EXIT_CHECKPOINT);
        assert_eq!(exit_code(&std::io::Error::other("x").into()), EXIT_IO);
    }
}
