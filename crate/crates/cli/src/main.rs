use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qef_cli::{emit, load_instance, write_file, CliError, Overrides};

#[derive(Parser)]
#[command(
    name = "qef",
    version,
    about = "Risk-sensitive controller synthesis for quantum plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Knobs {
    /// Overrides the instance risk parameter.
    #[arg(long)]
    theta: Option<f64>,
    /// Relative and absolute quadrature tolerance.
    #[arg(long)]
    quad_tol: Option<f64>,
    /// End of the ordinary quadrature panels.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Oracle grid points per horizon.
    #[arg(long = "oracle-N")]
    oracle_n: Option<usize>,
    /// Longest oracle horizon.
    #[arg(long = "oracle-T")]
    oracle_t: Option<f64>,
}

impl Knobs {
    fn overrides(&self) -> Overrides {
        Overrides {
            theta: self.theta,
            quad_tol: self.quad_tol,
            lambda_max: self.lambda_max,
            oracle_points: self.oracle_n,
            oracle_horizon: self.oracle_t,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load and check an instance.
    Validate { instance: PathBuf },
    /// Growth rate, LQG cost and admissibility report.
    Evaluate {
        instance: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
    /// Analytic derivatives against central differences.
    GradCheck {
        instance: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-horizon estimates against the frequency-domain growth rate.
    OracleCompare {
        instance: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long, default_value = "oracle.csv")]
        out: PathBuf,
    },
    /// Gradient descent from the LQG controller (or the instance controller).
    Synthesize {
        instance: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long, default_value = "trace.csv")]
        trace: PathBuf,
        /// Instance file with the synthesized controller.
        #[arg(long, default_value = "synthesized.json")]
        output: PathBuf,
    },
    /// Print an instance: the canonical plant, or a random one with --seed.
    Generate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, knobs: &Knobs) -> Result<qef_cli::ProblemInstance, CliError> {
    let mut inst = load_instance(path)?;
    knobs.overrides().apply(&mut inst)?;
    Ok(inst)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { instance } => {
            print!("{}", qef_cli::cmd_validate(&load_instance(&instance)?)?);
        }
        Command::Evaluate { instance, knobs } => {
            print!("{}", qef_cli::cmd_evaluate(&load(&instance, &knobs)?)?);
        }
        Command::GradCheck {
            instance,
            knobs,
            out,
        } => {
            let (csv, err) = qef_cli::cmd_grad_check(&load(&instance, &knobs)?)?;
            if let Some(text) = emit(out.as_deref(), &csv)? {
                print!("{text}");
            }
            println!("max_rel_error,{err:.16e}");
        }
        Command::OracleCompare {
            instance,
            knobs,
            out,
        } => {
            let csv = qef_cli::cmd_oracle_compare(&load(&instance, &knobs)?)?;
            write_file(&out, &csv)?;
            print!("{csv}");
        }
        Command::Synthesize {
            instance,
            knobs,
            trace,
            output,
        } => {
            let res = qef_cli::cmd_synthesize(&load(&instance, &knobs)?)?;
            write_file(&trace, &res.trace_csv)?;
            write_file(&output, &res.instance_json)?;
            print!("{}", res.summary);
        }
        Command::Generate { seed, out } => {
            let json = qef_cli::cmd_generate(seed)?;
            if let Some(text) = emit(out.as_deref(), &json)? {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
