//! `antispoof`: run the carrier/IMU spoofing test on recordings, generate
//! synthetic recordings and characterize inertial sensor noise.

mod allan;
mod detect;
mod error;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "antispoof", version, about = "Single-antenna GNSS spoofing detection from carrier phase and IMU motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify every window of a recording and write verdicts as JSON lines.
    Detect {
        /// RINEX 3 observation file.
        #[arg(long)]
        obs: PathBuf,
        /// IMU CSV (t_s,ax,ay,az,gx,gy,gz,mx,my,mz).
        #[arg(long)]
        imu: PathBuf,
        /// Satellite position CSV (t_s,sat,x_m,y_m,z_m).
        #[arg(long)]
        sats: PathBuf,
        /// key=value run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides a configuration key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Verdict output (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Evaluate windows on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Generate a synthetic recording: obs.rnx, imu.csv, sats.csv and truth.csv.
    Simulate {
        /// key=value scenario file; the built-in defaults when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, required_unless_present = "template")]
        out_dir: Option<PathBuf>,
        /// Print an annotated scenario file and exit.
        #[arg(long)]
        template: bool,
    },
    /// Overlapping Allan deviation of one IMU axis as tau_s,adev CSV.
    Allan {
        #[arg(long)]
        imu: PathBuf,
        /// One of ax, ay, az, gx, gy, gz, mx, my, mz.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        out: PathBuf,
        /// Averaging times per decade.
        #[arg(long, default_value_t = 10)]
        per_decade: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect {
            obs,
            imu,
            sats,
            config,
            overrides,
            out,
            sequential,
        } => detect::run(&detect::DetectArgs {
            obs,
            imu,
            sats,
            config,
            overrides,
            out,
            sequential,
        }),
        Command::Simulate {
            scenario,
            seed,
            out_dir,
            template,
        } => {
            if template {
                print!("{}", antispoof::synth::SCENARIO_TEMPLATE);
                return Ok(());
            }
            let out_dir = out_dir.expect("clap requires --out-dir without --template");
            simulate::run(scenario.as_deref(), seed, &out_dir)
        }
        Command::Allan {
            imu,
            axis,
            out,
            per_decade,
        } => allan::run(&imu, &axis, &out, per_decade),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("antispoof: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
