//! Experiment plumbing shared by the command-line tool, tests and benches:
//! run a config, write its artifacts, sweep an axis, compare two reports.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{sweep_configs, Config, ConfigError};
use crate::flash::FlashError;
use crate::metrics::{compare, write_gc_log, write_histograms, CompareError, Comparison, Report};
use crate::par;
use crate::rack::{self, RackError, RunOptions, RunOutput};
use crate::wear::{write_wear_csv, WearOutcome, WearSetup, WearSim};

pub const REPORT_FILE: &str = "report.json";
pub const HIST_FILE: &str = "latency_hist.csv";
pub const WEAR_FILE: &str = "wear.csv";
pub const GC_LOG_FILE: &str = "gc_log.csv";
pub const SWITCH_DUMP_FILE: &str = "switch_tables.json";
pub const SNAPSHOT_FILE: &str = "vssd_snapshot.json";
pub const PACKET_TRACE_FILE: &str = "packets.bin";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Rack(#[from] RackError),
    #[error("wear simulation: {0}")]
    Wear(#[from] FlashError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl HarnessError {
    /// 1 for problems with the inputs, 2 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Compare(_) => 1,
            HarnessError::Rack(RackError::Config(_) | RackError::Trace { .. } | RackError::Traffic(_)) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<(), HarnessError> {
    create_dir(dir)?;
    write_file(&dir.join(REPORT_FILE), |w| w.write_all(out.report.to_json().as_bytes()))?;
    write_file(&dir.join(HIST_FILE), |w| write_histograms(w, &out.read_hist, &out.write_hist))?;
    write_file(&dir.join(WEAR_FILE), |w| write_wear_csv(w, &out.wear_rows))?;
    write_file(&dir.join(GC_LOG_FILE), |w| write_gc_log(w, &out.gc_log))?;
    write_file(&dir.join(SWITCH_DUMP_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &out.switch_dump)?;
        writeln!(w)
    })?;
    write_file(&dir.join(SNAPSHOT_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, &out.snapshots)?;
        writeln!(w)
    })?;
    if !out.packet_trace.is_empty() {
        write_file(&dir.join(PACKET_TRACE_FILE), |w| w.write_all(&out.packet_trace))?;
    }
    Ok(())
}

pub fn run_config(cfg: &Config, dir: &Path, opts: RunOptions) -> Result<RunOutput, HarnessError> {
    let out = rack::run(cfg, opts)?;
    write_artifacts(&out, dir)?;
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub dir: PathBuf,
    pub report: Report,
}

/// Directory name for one sweep value.
pub fn point_dir(axis: &str, value: &str) -> String {
    let clean: String = value
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{axis}={clean}")
}

/// One run per value, all sharing the base seed. Runs go through
/// [`par::map`] and are written in value order.
pub fn sweep(base: &toml::Table, axis: &str, values: &[String], dir: &Path) -> Result<Vec<SweepPoint>, HarnessError> {
    let configs = sweep_configs(base, axis, values)?;
    let outputs = par::map(&configs, |c| rack::run(c, RunOptions::default()));
    create_dir(dir)?;
    let mut points = Vec::with_capacity(values.len());
    for (value, out) in values.iter().zip(outputs) {
        let out = out?;
        let pdir = dir.join(point_dir(axis, value));
        write_artifacts(&out, &pdir)?;
        points.push(SweepPoint {
            value: value.clone(),
            dir: pdir,
            report: out.report,
        });
    }
    write_file(&dir.join(SWEEP_FILE), |w| write_sweep_csv(w, axis, &points))?;
    Ok(points)
}

pub fn write_sweep_csv<W: Write>(w: &mut W, axis: &str, points: &[SweepPoint]) -> io::Result<()> {
    writeln!(
        w,
        "{axis},mode,scheduler,iops,read_p50_ns,read_p99_ns,read_p999_ns,write_p50_ns,write_p99_ns,write_p999_ns,gc_episodes,redirected_reads,blocked_reads,gc_blocked_writes"
    )?;
    for p in points {
        let r = &p.report;
        writeln!(
            w,
            "{},{},{},{:.1},{},{},{},{},{},{},{},{},{},{}",
            p.value,
            r.mode,
            r.scheduler,
            r.iops,
            r.latency.read.p50_ns,
            r.latency.read.p99_ns,
            r.latency.read.p999_ns,
            r.latency.write.p50_ns,
            r.latency.write.p99_ns,
            r.latency.write.p999_ns,
            r.gc.episodes,
            r.reads.redirected,
            r.reads.blocked,
            r.writes.gc_blocked
        )?;
    }
    Ok(())
}

pub fn compare_files(baseline: &Path, treatment: &Path) -> Result<Comparison, HarnessError> {
    let a = fs::read_to_string(baseline).map_err(io_err(baseline))?;
    let b = fs::read_to_string(treatment).map_err(io_err(treatment))?;
    Ok(compare(&a, &b)?)
}

/// Long-horizon wear experiment with the configured balancer.
pub fn wear_sim(cfg: &Config) -> Result<WearOutcome, HarnessError> {
    let setup = WearSetup::from_config(cfg)?;
    Ok(WearSim::new(setup, cfg.wear.balancer)?.run()?)
}

pub fn write_wear_outcome(outcome: &WearOutcome, dir: &Path) -> Result<(), HarnessError> {
    create_dir(dir)?;
    write_file(&dir.join(WEAR_FILE), |w| write_wear_csv(w, &outcome.rows))?;
    write_file(&dir.join(REPORT_FILE), |w| {
        serde_json::to_writer_pretty(&mut *w, outcome)?;
        writeln!(w)
    })
}
