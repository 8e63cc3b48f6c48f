//! Rack-scale wear leveling: a local balancer that swaps SSD contents
//! within a server and a global one that swaps across servers, plus a
//! year-scale wear simulator used to evaluate them.
//!
//! The simulator runs in two modes. Event mode drives a page-mapped FTL per
//! vSSD with every write. Accelerated mode measures erases per host page on
//! one calibration vSSD and advances wear analytically between balancing
//! events.

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::engine::{stream_rng, NS_PER_SEC};
use crate::flash::{FlashError, FlashUnit};
use crate::traffic::{preset, KeyDist, Workload, WorkloadSpec, PRESETS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Balancer {
    /// No swapping at all.
    None,
    Local,
    LocalGlobal,
}

/// Window over which an SSD's rate of wear is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateWindow {
    LastPeriod,
    Lifetime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WearConfig {
    pub gamma: f64,
    pub local_period_days: f64,
    pub global_period_days: f64,
    pub balancer: Balancer,
    pub rate_window: RateWindow,
    /// Balancing periods excluded from the bound check.
    pub warmup_periods: u32,
    pub days: f64,
    /// Full logical capacity written per day by a vSSD with write ratio 1.
    pub dwpd: f64,
    /// Application profiles drawn (uniformly, per vSSD) for the mix.
    pub presets: Vec<String>,
    pub accelerated: bool,
    pub endurance: u32,
    /// Copy bandwidth for swaps inside a server.
    pub local_swap_gbps: f64,
    /// Network bandwidth for swaps between servers.
    pub network_swap_gbps: f64,
    /// Calibration length in multiples of a vSSD's logical capacity.
    pub calibration_passes: f64,
    /// Overwrite passes run before measuring, so devices start in steady
    /// state.
    pub warmup_passes: f64,
    /// Skip calibration and use this many erases per host page.
    pub erase_per_page: Option<f64>,
}

impl Default for WearConfig {
    fn default() -> Self {
        WearConfig {
            gamma: 0.1,
            local_period_days: 12.0,
            global_period_days: 56.0,
            balancer: Balancer::LocalGlobal,
            rate_window: RateWindow::LastPeriod,
            warmup_periods: 2,
            days: 365.0,
            dwpd: 3.0,
            presets: PRESETS.iter().map(|s| s.to_string()).collect(),
            accelerated: true,
            endurance: crate::flash::DEFAULT_ENDURANCE,
            local_swap_gbps: 8.0,
            network_swap_gbps: 25.0,
            calibration_passes: 200.0,
            warmup_passes: 4.0,
            erase_per_page: None,
        }
    }
}

impl WearConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0) {
            return Err("wear gamma must be positive".into());
        }
        if !(self.local_period_days > 0.0 && self.global_period_days > 0.0 && self.days > 0.0) {
            return Err("wear periods and horizon must be positive".into());
        }
        if !(self.dwpd >= 0.0) || self.endurance == 0 {
            return Err("dwpd must be nonnegative and endurance positive".into());
        }
        if self.presets.is_empty() {
            return Err("wear presets must not be empty".into());
        }
        for p in &self.presets {
            preset(p).map_err(|e| e.to_string())?;
        }
        if !(self.local_swap_gbps > 0.0 && self.network_swap_gbps > 0.0) {
            return Err("swap bandwidths must be positive".into());
        }
        if !(self.calibration_passes > 0.0) || !(self.warmup_passes >= 0.0) {
            return Err("calibration_passes must be positive".into());
        }
        Ok(())
    }
}

/// `max / mean`; 1 when every value is zero.
pub fn imbalance(wear: &[f64]) -> f64 {
    assert!(!wear.is_empty(), "imbalance of an empty set");
    let avg = wear.iter().sum::<f64>() / wear.len() as f64;
    if avg <= 0.0 {
        return 1.0;
    }
    wear.iter().copied().fold(f64::MIN, f64::max) / avg
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Pick `(most worn, slowest wearing)` when the projected imbalance at the
/// end of the next period would exceed `1 + gamma`. A pair naming the same
/// device is no swap.
pub fn local_balance(wear: &[f64], rate: &[f64], gamma: f64) -> Option<(usize, usize)> {
    let projected: Vec<f64> = wear.iter().zip(rate).map(|(w, r)| w + r).collect();
    if imbalance(&projected) <= 1.0 + gamma && imbalance(wear) <= 1.0 + gamma {
        return None;
    }
    let (a, b) = (argmax(wear), argmin(rate));
    (a != b).then_some((a, b))
}

/// Same rule over servers; the caller picks the SSDs to exchange.
pub fn global_balance(server_wear: &[f64], server_rate: &[f64], gamma: f64) -> Option<(usize, usize)> {
    local_balance(server_wear, server_rate, gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwapKind {
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwapRecord {
    pub day: f64,
    pub kind: SwapKind,
    /// Physical SSD indices (server-major).
    pub a: usize,
    pub b: usize,
    pub bytes_moved: u64,
    /// Bytes that crossed the network.
    pub network_bytes: u64,
    /// Erase cycles per block added to `a` and `b` by the copy.
    pub wear_added: (f64, f64),
    pub duration_ns: u64,
}

/// Cost of exchanging the contents of two SSDs holding `pages_a` and
/// `pages_b` valid pages. Each side programs the other's data once.
pub fn swap_cost(
    pages_a: u64,
    pages_b: u64,
    page_size: u64,
    pages_per_ssd: u64,
    kind: SwapKind,
    cfg: &WearConfig,
) -> (u64, u64, (f64, f64), u64) {
    let bytes = (pages_a + pages_b) * page_size;
    let network = if kind == SwapKind::Global { bytes } else { 0 };
    let wear = (pages_b as f64 / pages_per_ssd as f64, pages_a as f64 / pages_per_ssd as f64);
    let gbps = match kind {
        SwapKind::Local => cfg.local_swap_gbps,
        SwapKind::Global => cfg.local_swap_gbps.min(cfg.network_swap_gbps),
    };
    // Both directions share the copy path.
    let duration = (bytes as f64 * 8.0 / gbps).round() as u64;
    (bytes, network, wear, duration)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearRow {
    pub day: f64,
    pub server: usize,
    pub ssd: usize,
    pub wear: f64,
    pub rate: f64,
    pub lambda_local: f64,
    pub lambda_rack: f64,
}

pub fn write_wear_csv<W: Write>(w: &mut W, rows: &[WearRow]) -> io::Result<()> {
    writeln!(w, "day,server,ssd,wear,rate,lambda_local,lambda_rack")?;
    for r in rows {
        writeln!(
            w,
            "{:.3},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.day, r.server, r.ssd, r.wear, r.rate, r.lambda_local, r.lambda_rack
        )?;
    }
    Ok(())
}

/// Per-boundary imbalance of every server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub day: f64,
    pub period: u32,
    pub lambda_per_server: Vec<f64>,
    pub lambda_rack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WearOutcome {
    pub balancer: Balancer,
    pub erase_per_page: f64,
    pub boundaries: Vec<Boundary>,
    pub swaps: Vec<SwapRecord>,
    pub rows: Vec<WearRow>,
    /// Largest per-server imbalance at boundaries after warm-up.
    pub max_lambda_after_warmup: f64,
    pub final_lambda_rack: f64,
    /// Mean erase cycles per block added by swaps, over endurance.
    pub swap_wear_fraction: f64,
    pub total_erases: f64,
}

impl fmt::Display for WearOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "balancer={:?} swaps={} max_lambda_after_warmup={:.4} final_lambda_rack={:.4} swap_wear={:.4}%",
            self.balancer,
            self.swaps.len(),
            self.max_lambda_after_warmup,
            self.final_lambda_rack,
            self.swap_wear_fraction * 100.0
        )
    }
}

/// Geometry and workload of one wear experiment.
#[derive(Debug, Clone)]
pub struct WearSetup {
    pub servers: usize,
    pub ssds_per_server: usize,
    pub vssds_per_ssd: usize,
    pub blocks_per_vssd: u32,
    pub pages_per_block: u32,
    pub page_size: u64,
    pub logical_pages: u64,
    pub theta: f64,
    /// Write ratio of each vSSD workload, indexed by workload id.
    pub write_ratios: Vec<f64>,
    pub restore_target: f64,
    pub trigger: f64,
    pub seed: u64,
    pub cfg: WearConfig,
}

impl WearSetup {
    pub fn from_config(c: &Config) -> Result<Self, crate::config::ConfigError> {
        let t = &c.topology;
        let theta = match c.workload.distribution {
            KeyDist::Zipfian { theta } => theta,
            _ => crate::traffic::DEFAULT_THETA,
        };
        let n = t.total_vssds() as usize;
        let mut rng = stream_rng(c.seed, "wear-mix");
        let write_ratios = (0..n)
            .map(|_| {
                let p = &c.wear.presets[rng.random_range(0..c.wear.presets.len())];
                preset(p).expect("validated").0
            })
            .collect();
        Ok(WearSetup {
            servers: t.servers as usize,
            ssds_per_server: t.ssds_per_server as usize,
            vssds_per_ssd: t.vssds_per_ssd as usize,
            blocks_per_vssd: c.blocks_per_vssd()?,
            pages_per_block: c.device.pages_per_block,
            page_size: c.device.page_size,
            logical_pages: c.logical_pages_per_vssd()?,
            theta,
            write_ratios,
            restore_target: c.gc.restore_target(),
            trigger: c.gc.soft_threshold,
            seed: c.seed,
            cfg: c.wear.clone(),
        })
    }

    fn ssds(&self) -> usize {
        self.servers * self.ssds_per_server
    }

    fn pages_per_ssd(&self) -> u64 {
        self.blocks_per_vssd as u64 * self.pages_per_block as u64 * self.vssds_per_ssd as u64
    }

    fn blocks_per_ssd(&self) -> f64 {
        self.blocks_per_vssd as f64 * self.vssds_per_ssd as f64
    }

    /// Host pages per day written by workload `w`.
    fn pages_per_day(&self, w: usize) -> f64 {
        self.cfg.dwpd * self.write_ratios[w] * self.logical_pages as f64
    }

    fn workload(&self, w: usize) -> Workload {
        Workload::new(WorkloadSpec {
            write_ratio: 1.0,
            key_space: self.logical_pages,
            distribution: KeyDist::Zipfian { theta: self.theta },
            ..WorkloadSpec::default()
        })
        .unwrap_or_else(|e| panic!("workload {w}: {e}"))
    }
}

/// One vSSD's FTL driven write by write, collecting at a free-ratio trigger.
#[derive(Debug, Clone)]
pub struct VssdDevice {
    pub unit: FlashUnit,
    version: u64,
    trigger: f64,
    target: f64,
}

impl VssdDevice {
    pub fn new(setup: &WearSetup) -> Result<Self, FlashError> {
        let profile = crate::flash::DeviceProfile::of(crate::flash::ProfileKind::PSsd);
        let unit = FlashUnit::new(
            profile,
            setup.pages_per_block,
            &[(setup.blocks_per_vssd, setup.logical_pages)],
            setup.restore_target,
        )?;
        Ok(VssdDevice {
            unit,
            version: 0,
            trigger: setup.trigger,
            target: setup.restore_target,
        })
    }

    pub fn write(&mut self, lpn: u64) -> Result<(), FlashError> {
        self.version += 1;
        self.unit.write(0, lpn, self.version)?;
        if self.unit.free_ratio(0) < self.trigger {
            self.unit.collect(0, self.target, 1)?;
        }
        Ok(())
    }

    /// Write every logical page once in order.
    pub fn fill(&mut self, pages: u64) -> Result<(), FlashError> {
        (0..pages).try_for_each(|p| self.write(p))
    }

    pub fn erases(&self) -> u64 {
        self.unit.counters().erases
    }
}

/// Erases per host page of a steady-state vSSD under the setup's skew.
pub fn calibrate(setup: &WearSetup) -> Result<f64, FlashError> {
    if let Some(e) = setup.cfg.erase_per_page {
        return Ok(e);
    }
    let mut dev = VssdDevice::new(setup)?;
    let mut rng = stream_rng(setup.seed, "wear-calibration");
    let mut wl = setup.workload(0);
    dev.fill(setup.logical_pages)?;
    let warm = (setup.cfg.warmup_passes * setup.logical_pages as f64) as u64;
    for _ in 0..warm {
        let k = wl.next_request(crate::engine::SimTime::ZERO, &mut rng).key;
        dev.write(k)?;
    }
    let base = dev.erases();
    let n = (setup.cfg.calibration_passes * setup.logical_pages as f64) as u64;
    for _ in 0..n {
        let k = wl.next_request(crate::engine::SimTime::ZERO, &mut rng).key;
        dev.write(k)?;
    }
    Ok((dev.erases() - base) as f64 / n as f64)
}

enum Backend {
    Analytic {
        erase_per_page: f64,
    },
    Events {
        /// Indexed by physical vSSD slot (ssd * per + k).
        devices: Vec<VssdDevice>,
        generators: Vec<Workload>,
        rng: rand_chacha::ChaCha8Rng,
        /// Fractional pages carried between steps, per workload.
        carry: Vec<f64>,
        base_erases: Vec<u64>,
    },
}

/// Wear state of a rack plus the placement of workloads on SSDs.
pub struct WearSim {
    setup: WearSetup,
    balancer: Balancer,
    backend: Backend,
    /// `placement[ssd][k]` = workload hosted in slot k.
    placement: Vec<Vec<usize>>,
    /// Erase cycles per block to date, per physical SSD.
    wear: Vec<f64>,
    /// Swap wear already folded into `wear`.
    swap_wear: Vec<f64>,
    window_start: Vec<(f64, f64)>,
    day: f64,
}

impl WearSim {
    pub fn new(setup: WearSetup, balancer: Balancer) -> Result<Self, FlashError> {
        let n = setup.ssds();
        let per = setup.vssds_per_ssd;
        // Round-robin: workload i lands on server i % servers.
        let mut placement = vec![Vec::with_capacity(per); n];
        let mut next_slot = vec![0usize; setup.servers];
        for w in 0..n * per {
            let s = w % setup.servers;
            let local = next_slot[s] / per;
            next_slot[s] += 1;
            placement[s * setup.ssds_per_server + local].push(w);
        }
        let backend = if setup.cfg.accelerated {
            Backend::Analytic {
                erase_per_page: calibrate(&setup)?,
            }
        } else {
            let mut devices = Vec::with_capacity(n * per);
            let mut generators = Vec::with_capacity(n * per);
            let mut rng = stream_rng(setup.seed, "wear-events");
            for ws in &placement {
                for &w in ws {
                    let mut d = VssdDevice::new(&setup)?;
                    d.fill(setup.logical_pages)?;
                    let mut g = setup.workload(w);
                    let warm = (setup.cfg.warmup_passes * setup.logical_pages as f64) as u64;
                    for _ in 0..warm {
                        let key = g.next_request(crate::engine::SimTime::ZERO, &mut rng).key;
                        d.write(key)?;
                    }
                    devices.push(d);
                }
            }
            for w in 0..n * per {
                generators.push(setup.workload(w));
            }
            let base_erases = devices.iter().map(VssdDevice::erases).collect();
            Backend::Events {
                devices,
                generators,
                rng,
                carry: vec![0.0; n * per],
                base_erases,
            }
        };
        Ok(WearSim {
            balancer,
            backend,
            placement,
            wear: vec![0.0; n],
            swap_wear: vec![0.0; n],
            window_start: vec![(0.0, 0.0); n],
            day: 0.0,
            setup,
        })
    }

    pub fn wear(&self) -> &[f64] {
        &self.wear
    }

    pub fn erase_per_page(&self) -> Option<f64> {
        match self.backend {
            Backend::Analytic { erase_per_page } => Some(erase_per_page),
            Backend::Events { .. } => None,
        }
    }

    /// Total block erases so far, over every SSD.
    pub fn total_erases(&self) -> f64 {
        self.wear.iter().sum::<f64>() * self.setup.blocks_per_ssd()
    }

    /// Advance wear by `days` without balancing.
    pub fn advance(&mut self, days: f64) -> Result<(), FlashError> {
        let per = self.setup.vssds_per_ssd;
        let blocks = self.setup.blocks_per_ssd();
        match &mut self.backend {
            Backend::Analytic { erase_per_page } => {
                for (ssd, ws) in self.placement.iter().enumerate() {
                    let pages: f64 = ws.iter().map(|&w| self.setup.pages_per_day(w)).sum::<f64>() * days;
                    self.wear[ssd] += pages * *erase_per_page / blocks;
                }
            }
            Backend::Events {
                devices,
                generators,
                rng,
                carry,
                base_erases,
            } => {
                for (ssd, ws) in self.placement.iter().enumerate() {
                    for (k, &w) in ws.iter().enumerate() {
                        let want = self.setup.pages_per_day(w) * days + carry[w];
                        let n = want.floor();
                        carry[w] = want - n;
                        let dev = &mut devices[ssd * per + k];
                        for _ in 0..n as u64 {
                            let key = generators[w].next_request(crate::engine::SimTime::ZERO, rng).key;
                            dev.write(key)?;
                        }
                    }
                    let erased: u64 = (0..per)
                        .map(|k| devices[ssd * per + k].erases() - base_erases[ssd * per + k])
                        .sum();
                    self.wear[ssd] = erased as f64 / blocks + self.swap_wear[ssd];
                }
            }
        }
        self.day += days;
        Ok(())
    }

    fn rate(&self, ssd: usize) -> f64 {
        let (d0, w0) = match self.setup.cfg.rate_window {
            RateWindow::LastPeriod => self.window_start[ssd],
            RateWindow::Lifetime => (0.0, 0.0),
        };
        let span = self.day - d0;
        if span <= 0.0 {
            return 0.0;
        }
        (self.wear[ssd] - w0) / span
    }

    fn server_ssds(&self, s: usize) -> std::ops::Range<usize> {
        s * self.setup.ssds_per_server..(s + 1) * self.setup.ssds_per_server
    }

    fn valid_pages(&self, ssd: usize) -> u64 {
        self.placement[ssd].len() as u64 * self.setup.logical_pages
    }

    fn swap(&mut self, a: usize, b: usize, kind: SwapKind) -> Result<SwapRecord, FlashError> {
        let (bytes, network, wear, duration) = swap_cost(
            self.valid_pages(a),
            self.valid_pages(b),
            self.setup.page_size,
            self.setup.pages_per_ssd(),
            kind,
            &self.setup.cfg,
        );
        self.placement.swap(a, b);
        if let Backend::Events { devices, .. } = &mut self.backend {
            // Each side's slots receive the other's data: a full rewrite.
            let per = self.setup.vssds_per_ssd;
            for ssd in [a, b] {
                for k in 0..per {
                    devices[ssd * per + k].fill(self.setup.logical_pages)?;
                }
            }
            // `advance` recomputes wear from erase counters, which already
            // include the copy.
        } else {
            self.swap_wear[a] += wear.0;
            self.swap_wear[b] += wear.1;
            self.wear[a] += wear.0;
            self.wear[b] += wear.1;
        }
        Ok(SwapRecord {
            day: self.day,
            kind,
            a,
            b,
            bytes_moved: bytes,
            network_bytes: network,
            wear_added: wear,
            duration_ns: duration,
        })
    }

    fn lambda_rack(&self) -> f64 {
        let sw: Vec<f64> = (0..self.setup.servers)
            .map(|s| {
                let r = self.server_ssds(s);
                let n = r.len() as f64;
                self.wear[r].iter().sum::<f64>() / n
            })
            .collect();
        imbalance(&sw)
    }

    /// Run the configured horizon, balancing at period boundaries.
    pub fn run(mut self) -> Result<WearOutcome, FlashError> {
        let cfg = self.setup.cfg.clone();
        let lp = cfg.local_period_days;
        let gp = cfg.global_period_days;
        let mut boundaries = Vec::new();
        let mut swaps = Vec::new();
        let mut rows = Vec::new();
        let mut next_local = lp;
        let mut next_global = gp;
        let mut period = 0u32;
        let eps = 1e-9;
        while self.day + eps < cfg.days {
            let next = next_local.min(next_global).min(cfg.days);
            self.advance(next - self.day)?;
            if (self.day - next_local).abs() < eps {
                period += 1;
                let lambdas: Vec<f64> = (0..self.setup.servers)
                    .map(|s| imbalance(&self.wear[self.server_ssds(s)]))
                    .collect();
                let lr = self.lambda_rack();
                for s in 0..self.setup.servers {
                    for (i, ssd) in self.server_ssds(s).enumerate() {
                        rows.push(WearRow {
                            day: self.day,
                            server: s,
                            ssd: i,
                            wear: self.wear[ssd],
                            rate: self.rate(ssd),
                            lambda_local: lambdas[s],
                            lambda_rack: lr,
                        });
                    }
                }
                boundaries.push(Boundary {
                    day: self.day,
                    period,
                    lambda_per_server: lambdas,
                    lambda_rack: lr,
                });
                if self.balancer != Balancer::None {
                    for s in 0..self.setup.servers {
                        let r = self.server_ssds(s);
                        let rates: Vec<f64> = r.clone().map(|i| self.rate(i)).collect();
                        if let Some((a, b)) = local_balance(&self.wear[r.clone()], &rates, cfg.gamma) {
                            swaps.push(self.swap(r.start + a, r.start + b, SwapKind::Local)?);
                        }
                    }
                }
                let snapshot: Vec<(f64, f64)> = (0..self.wear.len()).map(|i| (self.day, self.wear[i])).collect();
                self.window_start = snapshot;
                next_local += lp;
            }
            if (self.day - next_global).abs() < eps {
                if self.balancer == Balancer::LocalGlobal && self.setup.servers > 1 {
                    let n = self.setup.servers;
                    let sw: Vec<f64> = (0..n)
                        .map(|s| self.wear[self.server_ssds(s)].iter().sum::<f64>() / self.setup.ssds_per_server as f64)
                        .collect();
                    let sr: Vec<f64> = (0..n)
                        .map(|s| self.server_ssds(s).map(|i| self.rate(i)).sum::<f64>() / self.setup.ssds_per_server as f64)
                        .collect();
                    if let Some((hot, cold)) = global_balance(&sw, &sr, cfg.gamma) {
                        let hr = self.server_ssds(hot);
                        let cr = self.server_ssds(cold);
                        let a = hr.start + argmax(&self.wear[hr]);
                        let rates: Vec<f64> = cr.clone().map(|i| self.rate(i)).collect();
                        let b = cr.start + argmin(&rates);
                        swaps.push(self.swap(a, b, SwapKind::Global)?);
                        // Touched SSDs start a fresh rate window.
                        for i in [a, b] {
                            self.window_start[i] = (self.day, self.wear[i]);
                        }
                    }
                }
                next_global += gp;
            }
        }
        let warm = cfg.warmup_periods;
        let max_lambda_after_warmup = boundaries
            .iter()
            .filter(|b| b.period > warm)
            .flat_map(|b| b.lambda_per_server.iter().copied())
            .fold(1.0, f64::max);
        let n = self.wear.len() as f64;
        let swap_wear_fraction = self.swap_wear.iter().sum::<f64>() / n / cfg.endurance as f64
            + match self.backend {
                // Event mode folds copy wear into erase counters; account it
                // from the swap records instead.
                Backend::Events { .. } => {
                    swaps.iter().map(|s| s.wear_added.0 + s.wear_added.1).sum::<f64>() / n / cfg.endurance as f64
                }
                Backend::Analytic { .. } => 0.0,
            };
        Ok(WearOutcome {
            balancer: self.balancer,
            erase_per_page: self.erase_per_page().unwrap_or(f64::NAN),
            final_lambda_rack: self.lambda_rack(),
            total_erases: self.total_erases(),
            boundaries,
            swaps,
            rows,
            max_lambda_after_warmup,
            swap_wear_fraction,
        })
    }
}

/// Seconds in a simulated day, for converting swap durations.
pub const SECS_PER_DAY: u64 = 86_400;

/// Wall duration of a swap record in days.
pub fn swap_days(r: &SwapRecord) -> f64 {
    r.duration_ns as f64 / (SECS_PER_DAY * NS_PER_SEC) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imbalance_examples() {
        assert_eq!(imbalance(&[10.0, 10.0, 10.0, 10.0]), 1.0);
        assert!((imbalance(&[20.0, 10.0, 10.0, 10.0]) - 1.6).abs() < 1e-12);
        assert_eq!(imbalance(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn local_selection() {
        let w = [300.0, 100.0, 100.0, 100.0];
        assert_eq!(local_balance(&w, &[5.0, 1.0, 2.0, 3.0], 0.1), Some((0, 1)));
        assert_eq!(local_balance(&[105.0, 100.0, 100.0, 95.0], &[1.0; 4], 0.1), None);
        // Most worn is also the slowest wearing: no self-swap.
        assert_eq!(local_balance(&w, &[0.0, 1.0, 2.0, 3.0], 0.1), None);
        // Ties go to the lowest index.
        assert_eq!(local_balance(&[300.0, 300.0, 100.0], &[2.0, 1.0, 1.0], 0.1), Some((0, 1)));
    }

    #[test]
    fn global_selection() {
        assert_eq!(global_balance(&[200.0, 100.0], &[3.0, 1.0], 0.1), Some((0, 1)));
        assert_eq!(global_balance(&[100.0, 100.0], &[1.0, 1.0], 0.1), None);
    }

    #[test]
    fn swap_bytes_and_network() {
        let cfg = WearConfig::default();
        let gib_pages = (64u64 << 30) / 4096;
        let (bytes, net, wear, _) = swap_cost(gib_pages, gib_pages, 4096, gib_pages * 2, SwapKind::Local, &cfg);
        assert_eq!(bytes, 128 << 30);
        assert_eq!(net, 0);
        assert_eq!(wear, (0.5, 0.5));
        let (_, net, _, _) = swap_cost(1, 1, 4096, 4, SwapKind::Global, &cfg);
        assert_eq!(net, 8192);
    }
}
