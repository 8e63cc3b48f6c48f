//! Batch of independent small runs, on the rayon pool and on one thread.
//! With a single core the two should be about equal; the gap grows with
//! the number of cores.

use criterion::{criterion_group, criterion_main, Criterion};
use racksim::config::Config;
use racksim::par;
use racksim::rack::{self, RunOptions};

fn batch() -> Vec<Config> {
    (0..8)
        .map(|seed| {
            Config::from_toml_str(&format!(
                "schema_version = 1\nname = \"bench\"\nseed = {seed}\nduration_ms = 2000\n\
                 [topology]\nservers = 2\nssds_per_server = 2\nvssds_per_ssd = 2\n\
                 [workload.arrival]\nkind = \"open\"\nrate_per_sec = 300\n"
            ))
            .expect("bench config")
        })
        .collect()
}

fn iops(c: &Config) -> f64 {
    rack::run(c, RunOptions::default()).expect("run").report.iops
}

fn runs(c: &mut Criterion) {
    let cfgs = batch();
    let mut g = c.benchmark_group("batch_of_8_runs");
    g.sample_size(10);
    g.bench_function("par_map", |b| b.iter(|| par::map(&cfgs, iops)));
    g.bench_function("sequential", |b| b.iter(|| par::map_sequential(&cfgs, iops)));
    g.finish();
}

criterion_group!(benches, runs);
criterion_main!(benches);
