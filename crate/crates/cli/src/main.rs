use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fracquant_cli::config::parse_config;
use fracquant_cli::pipeline::{run_pipeline, Stage};
use fracquant_cli::report::Report;

#[derive(Parser)]
#[command(name = "fracquant", version, about = "Fractional Lagrange-Fedosov quantization engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Caputo,
    Algebra,
    Geometry,
    Fedosov,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and write the full report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the truncation order from the config.
        #[arg(long)]
        order: Option<u32>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one check suite.
    Check {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Compute the star-product coefficients of the configured f and g.
    Star {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        order: u32,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    }
}

fn main() -> ExitCode {
    // clap's own usage-error code (2) is reserved for domain errors here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let (config, order, stages, format, out): (_, _, &[Stage], _, _) = match &cli.command {
        Command::Run {
            config,
            order,
            format,
            out,
        } => (config, *order, Stage::ALL, *format, out.clone()),
        Command::Check { suite, config, format } => {
            let stages: &[Stage] = match suite {
                Suite::Caputo => &[Stage::Caputo],
                Suite::Algebra => &[Stage::Algebra],
                Suite::Geometry => &[Stage::Geometry],
                Suite::Fedosov => &[Stage::Fedosov],
            };
            (config, None, stages, *format, None)
        }
        Command::Star { config, order, format } => (config, Some(*order), &[Stage::Star], *format, None),
    };

    let mut spec = match parse_config(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("fracquant: {e}");
            return ExitCode::from(3);
        }
    };
    if let Some(k) = order {
        if !(2..=12).contains(&k) {
            eprintln!("fracquant: --order must be in 2..=12, got {k}");
            return ExitCode::from(3);
        }
        spec.truncation_order = k;
    }

    let report = run_pipeline(&spec, stages);
    let text = render(&report, format);
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, text) {
                eprintln!("fracquant: cannot write {}: {e}", path.display());
                return ExitCode::from(3);
            }
        }
        None => print!("{text}"),
    }
    if let Some(e) = &report.error {
        eprintln!("fracquant: {e}");
    }
    ExitCode::from(report.exit_code() as u8)
}
