use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use racksim::config::{load_table, Config, OUT_DIR_ENV};
use racksim::harness::{self, HarnessError};
use racksim::rack::RunOptions;

/// Rack-scale flash storage simulator.
#[derive(Debug, Parser)]
#[command(name = "racksim", version)]
struct Cli {
    /// Output directory (default: ./out/<config name>).
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Run one simulation and write its report and artifacts.
    Run {
        config: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write every switch packet to packets.bin.
        #[arg(long)]
        packet_trace: bool,
    },
    /// One run per value of a config field.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Latency ratios and throughput delta between two reports.
    Compare {
        baseline: PathBuf,
        treatment: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Long-horizon wear-leveling experiment.
    WearSim { config: PathBuf },
}

fn out_dir(flag: &Option<PathBuf>, name: &str) -> PathBuf {
    flag.clone().unwrap_or_else(|| Path::new("out").join(name))
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.cmd {
        Cmd::Run {
            config,
            seed,
            packet_trace,
        } => {
            let mut cfg = Config::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out_dir(&cli.out, &cfg.name);
            let opts = RunOptions {
                capture_packets: packet_trace,
                ..RunOptions::default()
            };
            let out = harness::run_config(&cfg, &dir, opts)?;
            let r = &out.report;
            println!(
                "{} [{}] iops={:.0} read p99.9={}us write p99.9={}us gc={} redirected={} -> {}",
                r.name,
                r.mode,
                r.iops,
                r.latency.read.p999_ns / 1000,
                r.latency.write.p999_ns / 1000,
                r.gc.episodes,
                r.reads.redirected,
                dir.display()
            );
        }
        Cmd::Sweep { config, axis, values } => {
            let table = load_table(&config)?;
            let name = table.get("name").and_then(|v| v.as_str()).unwrap_or("sweep").to_string();
            let dir = out_dir(&cli.out, &format!("{name}-sweep"));
            let points = harness::sweep(&table, &axis, &values, &dir)?;
            for p in &points {
                println!(
                    "{}={} iops={:.0} read p99.9={}us -> {}",
                    axis,
                    p.value,
                    p.report.iops,
                    p.report.latency.read.p999_ns / 1000,
                    p.dir.display()
                );
            }
        }
        Cmd::Compare {
            baseline,
            treatment,
            json,
        } => {
            let c = harness::compare_files(&baseline, &treatment)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&c).expect("comparison serializes"));
            } else {
                print!("{}", c.to_table());
            }
        }
        Cmd::WearSim { config } => {
            let cfg = Config::load(&config)?;
            let dir = out_dir(&cli.out, &format!("{}-wear", cfg.name));
            let outcome = harness::wear_sim(&cfg)?;
            harness::write_wear_outcome(&outcome, &dir)?;
            println!("{outcome} -> {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
