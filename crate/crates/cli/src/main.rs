use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serialvoc_cli::commands::{self, Failure, TrainArgs};

#[derive(Parser)]
#[command(name = "serialvoc", version, about = "Mel-spectrogram vocoder: train, synthesize, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a directory of 16-bit mono WAV files.
    Train {
        /// `key = value` configuration file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data_dir: PathBuf,
        /// Receives checkpoints, the loss log and a configuration snapshot.
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint; the loss log is appended to.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides the configured total step count.
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Synthesize a waveform from a WAV (copy-synthesis) or a MELB mel file.
    Synth {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Copy-synthesize every WAV in a directory.
    CopySyn {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input_dir: PathBuf,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Compare same-named WAV files in two directories.
    Eval {
        #[arg(long)]
        ref_dir: PathBuf,
        #[arg(long)]
        syn_dir: PathBuf,
        /// Tab-separated report destination.
        #[arg(long)]
        report: PathBuf,
        /// Configuration supplying the analysis settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print step, parameter count, FLOPs and configuration of a checkpoint.
    Inspect {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write the mel-spectrogram of a WAV as a MELB file.
    ExtractMel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Train { config, data_dir, out, resume, steps } => {
            let step = commands::train(&TrainArgs {
                config: config.as_deref(),
                data_dir: &data_dir,
                out: &out,
                resume: resume.as_deref(),
                steps,
            })?;
            eprintln!("trained to step {step}; outputs in {}", out.display());
        }
        Command::Synth { checkpoint, input, output } => {
            let n = commands::synth(&checkpoint, &input, &output)?;
            eprintln!("wrote {n} samples to {}", output.display());
        }
        Command::CopySyn { checkpoint, input_dir, output_dir } => {
            let n = commands::copy_syn(&checkpoint, &input_dir, &output_dir)?;
            eprintln!("synthesized {n} files into {}", output_dir.display());
        }
        Command::Eval { ref_dir, syn_dir, report, config } => {
            let r = commands::eval(config.as_deref(), &ref_dir, &syn_dir, &report)?;
            if !r.unmatched.is_empty() {
                eprintln!("warning: {} unmatched file(s), listed in the report footer", r.unmatched.len());
            }
            eprintln!("evaluated {} pair(s) into {}", r.rows.len(), report.display());
        }
        Command::Inspect { checkpoint } => print!("{}", commands::inspect(&checkpoint)?),
        Command::ExtractMel { input, output, config } => {
            let (f, k) = commands::extract_mel(config.as_deref(), &input, &output)?;
            eprintln!("wrote {f}x{k} mel matrix to {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
