use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "schema_version = 1\nname = \"cli-small\"\nmode = \"rackblox\"\nseed = 2\nduration_ms = 2000\n\
[topology]\nservers = 2\nssds_per_server = 2\nvssds_per_ssd = 2\n\
[workload.arrival]\nkind = \"open\"\nrate_per_sec = 300\n";

fn racksim(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_racksim"));
    cmd.args(args).env_remove("RACKSIM_OUT_DIR");
    if let Some(d) = out_env {
        cmd.env("RACKSIM_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_artifacts_to_env_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("env-out");
    let o = racksim(&["run", &cfg], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "latency_hist.csv", "wear.csv", "gc_log.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = racksim(&["--out", d.to_str().unwrap(), "run", &cfg], None);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(&a), read(&b));

    let o = racksim(
        &["compare", a.join("report.json").to_str().unwrap(), b.join("report.json").to_str().unwrap(), "--json"],
        None,
    );
    assert_eq!(o.status.code(), Some(0));
    let c: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["iops_delta"], 0.0);
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let one_server = SMALL.replace("servers = 2", "servers = 1");
    let bad = write(tmp.path(), "bad.toml", &one_server);
    assert_eq!(racksim(&["run", &bad], Some(tmp.path())).status.code(), Some(1));

    let typo = write(tmp.path(), "typo.toml", &format!("{SMALL}\nbogus_key = 3\n"));
    assert_eq!(racksim(&["run", &typo], Some(tmp.path())).status.code(), Some(1));

    let missing = tmp.path().join("nope.toml");
    assert_eq!(racksim(&["run", missing.to_str().unwrap()], Some(tmp.path())).status.code(), Some(1));

    let cfg = write(tmp.path(), "small.toml", SMALL);
    let o = racksim(&["sweep", &cfg, "--axis", "write_ratio", "--values"], Some(tmp.path()));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let blocker = write(tmp.path(), "file", "not a directory");
    let o = racksim(&["--out", &format!("{blocker}/sub"), "run", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_rejects_different_workloads() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", SMALL);
    let b = write(tmp.path(), "b.toml", &SMALL.replace("rate_per_sec = 300", "rate_per_sec = 301"));
    for (cfg, d) in [(&a, "ra"), (&b, "rb")] {
        let dir = tmp.path().join(d);
        assert_eq!(racksim(&["run", cfg], Some(&dir)).status.code(), Some(0));
    }
    let ra = tmp.path().join("ra/report.json");
    let rb = tmp.path().join("rb/report.json");
    let o = racksim(&["compare", ra.to_str().unwrap(), rb.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_and_wear_sim() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("sweep");
    let o = racksim(&["sweep", &cfg, "--axis", "sched", "--values", "fifo-baseline,fifo-coordinated"], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("sweep.csv").is_file());

    let wout = tmp.path().join("wear");
    let o = racksim(&["wear-sim", &cfg], Some(&wout));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(wout.join("wear.csv").is_file());
}
