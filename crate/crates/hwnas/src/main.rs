use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use hwnas::run;

#[derive(Parser)]
#[command(name = "hwnas", version, about = "Hardware-aware architecture search on simulated devices")]
struct Cli {
    /// Master seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated device from a template.
    GenDevice {
        #[arg(long)]
        template: String,
        /// Space document; the built-in space when omitted.
        #[arg(long)]
        space: Option<PathBuf>,
        /// Output file; defaults to device.json in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and calibrate a latency profile for a device.
    Profile {
        #[arg(long)]
        device: PathBuf,
        #[arg(long)]
        space: Option<PathBuf>,
        /// Number of calibration measurements.
        #[arg(long, default_value_t = 100)]
        m: usize,
        /// Extra measurements kept out of calibration.
        #[arg(long, default_value_t = 0)]
        holdout: usize,
    },
    /// Progressively shrink the space.
    Shrink {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evolutionary search over the configured space.
    Search {
        #[arg(long)]
        config: PathBuf,
    },
    /// Device, profile, shrink and search in one run.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Summary and histogram from an existing search report.
    Report {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        space: Option<PathBuf>,
    },
    /// Schema-check documents.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::GenDevice { template, space, out: file } => {
            let file = file.clone().unwrap_or_else(|| out.join(run::DEVICE));
            run::gen_device(template, seed.unwrap_or(0), space.as_deref(), &file)?;
        }
        Command::Profile { device, space, m, holdout } => run::profile(&run::ProfileArgs {
            device,
            space: space.as_deref(),
            m: *m,
            holdout: *holdout,
            seed: seed.unwrap_or(0),
            out_dir: out,
        })?,
        Command::Shrink { config } => {
            run::Session::open(config, seed, cli.jobs)?.shrink(out)?;
        }
        Command::Search { config } => {
            run::Session::open(config, seed, cli.jobs)?.search(out)?;
        }
        Command::Pipeline { config } => {
            run::Session::open(config, seed, cli.jobs)?.pipeline(out)?;
        }
        Command::Report { report, space } => run::report(report, space.as_deref(), out)?,
        Command::Validate { files } => {
            let mut failed = 0;
            for f in files {
                match run::validate(f) {
                    Ok(schema) => eprintln!("ok {} ({schema})", f.display()),
                    Err(e) => {
                        eprintln!("invalid: {e:#}");
                        failed += 1;
                    }
                }
            }
            anyhow::ensure!(failed == 0, "{failed} of {} documents failed validation", files.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
