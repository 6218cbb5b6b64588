//! `saakiqa` command line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use saak_iqa::harness::{
    emit_report, parse_manifest, report_json, run_eval, synth_distort, EvalOptions,
};
use saak_iqa::{assess, read_pgm, write_pgm, ChannelStats, Codec, FilterSpec, QualityConfig};

#[derive(Parser)]
#[command(
    name = "saakiqa",
    version,
    about = "Saak-feature quality assessment for compressed images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodecArg {
    Jpeg,
    Jpeg2000,
}

impl From<CodecArg> for Codec {
    fn from(c: CodecArg) -> Codec {
        match c {
            CodecArg::Jpeg => Codec::Jpeg,
            CodecArg::Jpeg2000 => Codec::Jpeg2000,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score one distorted image against its reference.
    Score {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        /// Selects the default lambda.
        #[arg(long, value_enum, default_value = "jpeg")]
        codec: CodecArg,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Print the score with per-channel statistics as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a `ref,dist,mos,codec` manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        scatter: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Apply 8x8 block-DCT quantization to an image.
    Distort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        qstep: f64,
    },
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    score: f64,
    lambda: f64,
    codec: Codec,
    stats: &'a ChannelStats,
}

fn run(command: Command) -> saak_iqa::Result<()> {
    match command {
        Command::Score {
            reference,
            dist,
            codec,
            lambda,
            sigma,
            json,
        } => {
            let codec = Codec::from(codec);
            let mut config = QualityConfig::for_codec(codec)?;
            if let Some(l) = lambda {
                config = config.with_lambda(l);
            }
            if let Some(s) = sigma {
                config.filter = FilterSpec::with_sigma(s)?;
            }
            let result = assess(&read_pgm(&reference)?, &read_pgm(&dist)?, &config)?;
            if json {
                let out = ScoreOutput {
                    score: result.score,
                    lambda: config.lambda,
                    codec,
                    stats: &result.stats,
                };
                println!(
                    "{}",
                    serde_json::to_string_pretty(&out).expect("serializable")
                );
            } else {
                println!("{:.6}", result.score);
            }
        }
        Command::Eval {
            manifest,
            out,
            csv,
            scatter,
            lambda,
            sigma,
        } => {
            let records = parse_manifest(&manifest)?;
            let options = EvalOptions {
                lambda,
                sigma,
                threads: None,
            };
            let report = run_eval(&records, &options)?;
            for row in report.records.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "row {}: {}",
                    row.index + 1,
                    row.error.as_deref().unwrap_or_default()
                );
            }
            for summary in &report.codecs {
                if let Some(w) = &summary.warning {
                    eprintln!("{}: {w}", summary.codec);
                }
            }
            emit_report(&report, out.as_deref(), csv.as_deref(), scatter.as_deref())?;
            if out.is_none() {
                println!("{}", report_json(&report));
            }
        }
        Command::Distort { input, out, qstep } => {
            let img = read_pgm(&input)?;
            write_pgm(&synth_distort(&img, qstep)?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
