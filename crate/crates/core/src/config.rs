//! Experiment configuration: a versioned TOML document with every default
//! pre-filled, plus the override mechanism used by sweeps.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, NS_PER_US};
use crate::flash::{DeviceProfile, FlashError, Isolation, ProfileKind, SsdAllocator, SsdGeometry, PAGE_SIZE};
use crate::gc::GcMonitorConfig;
use crate::sched::{SchedVariant, SchedulerPolicy};
use crate::traffic::{Arrival, Congestion, KeyDist, NetClass, Pattern, SwitchQueuePolicy, WorkloadSpec, DEFAULT_THETA};
use crate::wear::WearConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_SERVERS: u32 = 64;
pub const MAX_VSSDS_PER_SSD: u32 = 128;
/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "RACKSIM_OUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("sweep needs at least one value")]
    EmptySweep,
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Token-bucket isolation, baseline scheduling, uncoordinated local GC.
    VdcLike,
    /// Coordination state kept on a controller server one network round
    /// trip away.
    SoftwareCoord,
    /// In-switch coordination of GC and I/O.
    Rackblox,
    /// Coordinated scheduling only; GC is local and never announced.
    CoordIoOnly,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::VdcLike, Mode::SoftwareCoord, Mode::Rackblox, Mode::CoordIoOnly];

    pub fn coordinated_gc(self) -> bool {
        matches!(self, Mode::SoftwareCoord | Mode::Rackblox)
    }

    pub fn default_coordinated_sched(self) -> bool {
        self != Mode::VdcLike
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::VdcLike => "vdc-like",
            Mode::SoftwareCoord => "software-coord",
            Mode::Rackblox => "rackblox",
            Mode::CoordIoOnly => "coord-io-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace('_', "-");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == k)
            .ok_or_else(|| invalid(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsolationKind {
    Hardware,
    Software,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Topology {
    pub servers: u32,
    pub ssds_per_server: u32,
    pub vssds_per_ssd: u32,
    pub isolation: IsolationKind,
    /// vSSDs per channel group under software isolation.
    pub group_size: u32,
    /// Explicit replica pairs by vSSD id. Empty: pair each vSSD with the
    /// same slot on server `(s + servers/2) % servers`.
    pub pairs: Vec<[u32; 2]>,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            servers: 4,
            ssds_per_server: 4,
            vssds_per_ssd: 4,
            isolation: IsolationKind::Hardware,
            group_size: 2,
            pairs: Vec::new(),
        }
    }
}

impl Topology {
    pub fn vssds_per_server(&self) -> u32 {
        self.ssds_per_server * self.vssds_per_ssd
    }

    pub fn total_vssds(&self) -> u32 {
        self.servers * self.vssds_per_server()
    }

    pub fn ssds(&self) -> u32 {
        self.servers * self.ssds_per_server
    }

    /// `(server, ssd, slot)` of a vSSD id.
    pub fn locate(&self, v: u32) -> (u32, u32, u32) {
        let per = self.vssds_per_server();
        (v / per, (v % per) / self.vssds_per_ssd, v % self.vssds_per_ssd)
    }

    /// Replica of every vSSD, indexed by id.
    pub fn replica_map(&self) -> Result<Vec<u32>, ConfigError> {
        let n = self.total_vssds();
        let mut map = vec![u32::MAX; n as usize];
        if self.pairs.is_empty() {
            if self.servers < 2 || !self.servers.is_multiple_of(2) {
                return Err(invalid(format!(
                    "replica must be on a different server: automatic pairing needs an even number of servers (got {})",
                    self.servers
                )));
            }
            let per = self.vssds_per_server();
            for v in 0..n {
                let (s, _, _) = self.locate(v);
                let partner = (s + self.servers / 2) % self.servers;
                map[v as usize] = partner * per + v % per;
            }
        } else {
            for &[a, b] in &self.pairs {
                for x in [a, b] {
                    if x >= n {
                        return Err(invalid(format!("pair names vSSD {x}, but only {n} exist")));
                    }
                    if map[x as usize] != u32::MAX {
                        return Err(invalid(format!("vSSD {x} appears in more than one pair")));
                    }
                }
                map[a as usize] = b;
                map[b as usize] = a;
            }
            if let Some(v) = map.iter().position(|&r| r == u32::MAX) {
                return Err(invalid(format!("vSSD {v} has no replica")));
            }
        }
        for (v, &r) in map.iter().enumerate() {
            if self.locate(v as u32).0 == self.locate(r).0 {
                return Err(invalid(format!(
                    "replica must be on a different server: vSSD {v} and {r} share server {}",
                    self.locate(r).0
                )));
            }
        }
        Ok(map)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.servers == 0 || self.servers > MAX_SERVERS {
            return Err(invalid(format!("servers must be in 1..={MAX_SERVERS}")));
        }
        if self.ssds_per_server == 0 || self.vssds_per_ssd == 0 || self.vssds_per_ssd > MAX_VSSDS_PER_SSD {
            return Err(invalid(format!(
                "ssds_per_server must be positive and vssds_per_ssd in 1..={MAX_VSSDS_PER_SSD}"
            )));
        }
        if self.isolation == IsolationKind::Software
            && (self.group_size == 0 || !self.vssds_per_ssd.is_multiple_of(self.group_size))
        {
            return Err(invalid("group_size must divide vssds_per_ssd"));
        }
        self.replica_map().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub profile: ProfileKind,
    pub read_ns: Option<Nanos>,
    pub program_ns: Option<Nanos>,
    pub erase_ns: Option<Nanos>,
    pub channels: u32,
    pub chips_per_channel: u32,
    pub blocks_per_chip: u32,
    pub pages_per_block: u32,
    pub page_size: u64,
    /// Exported logical capacity as a fraction of physical.
    pub logical_fraction: f64,
    /// Fill every logical page before the run starts.
    pub precondition: bool,
    pub cache_bytes: u64,
    pub cache_ns: Nanos,
    /// Cache fill above which flushing preempts foreground work.
    pub flush_threshold: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        DeviceConfig {
            profile: ProfileKind::PSsd,
            read_ns: None,
            program_ns: None,
            erase_ns: None,
            channels: 8,
            chips_per_channel: 2,
            blocks_per_chip: 16,
            pages_per_block: 64,
            page_size: PAGE_SIZE,
            logical_fraction: 0.5,
            precondition: true,
            cache_bytes: 4 << 20,
            cache_ns: 5 * NS_PER_US,
            flush_threshold: 0.8,
        }
    }
}

impl DeviceConfig {
    pub fn profile(&self) -> DeviceProfile {
        let mut p = DeviceProfile::of(self.profile);
        if let Some(r) = self.read_ns {
            p.read_ns = r;
        }
        if let Some(w) = self.program_ns {
            p.program_ns = w;
        }
        if let Some(e) = self.erase_ns {
            p.erase_ns = Some(e);
        }
        p
    }

    pub fn geometry(&self) -> SsdGeometry {
        SsdGeometry {
            channels: self.channels,
            chips_per_channel: self.chips_per_channel,
            blocks_per_chip: self.blocks_per_chip,
            pages_per_block: self.pages_per_block,
            page_size: self.page_size,
            profile: self.profile(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerConfig {
    pub variant: SchedVariant,
    /// Defaults to the mode's choice.
    pub coordinated: Option<bool>,
    pub read_target_ns: Option<Nanos>,
    pub write_target_ns: Option<Nanos>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            variant: SchedVariant::Fifo,
            coordinated: None,
            read_target_ns: None,
            write_target_ns: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCongestion {
    pub rate_per_sec: f64,
    pub duration_ns: Nanos,
    pub added_ns: Nanos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub class: NetClass,
    pub median_ns: Option<Nanos>,
    pub sigma: Option<f64>,
    /// Latency trace to replay instead of the class distribution; relative
    /// paths resolve against the config file.
    pub trace: Option<PathBuf>,
    pub congestion: Vec<Congestion>,
    pub random_congestion: Option<RandomCongestion>,
    /// Switch to server link, each way.
    pub hop_ns: Nanos,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            class: NetClass::Medium,
            median_ns: None,
            sigma: None,
            trace: None,
            congestion: Vec::new(),
            random_congestion: None,
            hop_ns: 2 * NS_PER_US,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    pub capacity: usize,
    pub pipeline_ns: Nanos,
    /// Defaults to a token bucket under vdc-like and priority otherwise.
    pub queue: Option<SwitchQueuePolicy>,
    pub link_gbps: f64,
    pub background_load: f64,
    pub background_burst_ns: Nanos,
    /// Per-flow rate used by the default token bucket.
    pub token_rate_per_sec: f64,
    pub token_burst: u32,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            capacity: crate::switch::DEFAULT_CAPACITY,
            pipeline_ns: crate::switch::DEFAULT_PIPELINE_NS,
            queue: None,
            link_gbps: 100.0,
            background_load: 0.0,
            background_burst_ns: 50 * NS_PER_US,
            token_rate_per_sec: 5000.0,
            token_burst: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Named application profile; overrides `write_ratio` and `pattern`.
    pub preset: Option<String>,
    pub write_ratio: f64,
    pub request_size: u64,
    /// Keys per vSSD; defaults to every logical page.
    pub key_space: Option<u64>,
    pub distribution: KeyDist,
    pub arrival: Arrival,
    pub pattern: Pattern,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            preset: None,
            write_ratio: 0.5,
            request_size: PAGE_SIZE,
            key_space: None,
            distribution: KeyDist::Zipfian { theta: DEFAULT_THETA },
            arrival: Arrival::Open { rate_per_sec: 280.0 },
            pattern: Pattern::Mixed,
        }
    }
}

impl WorkloadConfig {
    pub fn resolved(&self, logical_pages: u64) -> Result<WorkloadSpec, ConfigError> {
        let spec = WorkloadSpec {
            write_ratio: self.write_ratio,
            request_size: self.request_size,
            key_space: self.key_space.unwrap_or(logical_pages),
            distribution: self.distribution,
            arrival: self.arrival,
            pattern: self.pattern,
        };
        let spec = match &self.preset {
            Some(p) => spec.with_preset(p).map_err(|e| invalid(e.to_string()))?,
            None => spec,
        };
        spec.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    /// Drop the replica copy of every n-th write (0 = never).
    pub drop_fanout_every: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub mode: Mode,
    pub duration_ms: u64,
    /// Requests generated before this point are excluded from statistics.
    pub warmup_ms: u64,
    pub topology: Topology,
    pub device: DeviceConfig,
    pub scheduler: SchedulerConfig,
    pub gc: GcMonitorConfig,
    pub network: NetworkConfig,
    pub switch: SwitchConfig,
    pub workload: WorkloadConfig,
    pub wear: WearConfig,
    pub fault: FaultConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            schema_version: SCHEMA_VERSION,
            name: "rack".into(),
            seed: 1,
            mode: Mode::Rackblox,
            duration_ms: 60_000,
            warmup_ms: 1_000,
            topology: Topology::default(),
            device: DeviceConfig::default(),
            scheduler: SchedulerConfig::default(),
            gc: GcMonitorConfig::default(),
            network: NetworkConfig::default(),
            switch: SwitchConfig::default(),
            workload: WorkloadConfig::default(),
            wear: WearConfig::default(),
            fault: FaultConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let value: toml::Table = s.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Self::from_table(value)
    }

    pub fn from_table(t: toml::Table) -> Result<Self, ConfigError> {
        let version = t
            .get("schema_version")
            .and_then(toml::Value::as_integer)
            .ok_or_else(|| invalid("schema_version is required"))?;
        if version != SCHEMA_VERSION as i64 {
            return Err(ConfigError::Schema(version as u32));
        }
        let cfg: Config = toml::Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; a relative trace path is made relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let t = load_table(path)?;
        let mut cfg = Self::from_table(t)?;
        cfg.rebase(path);
        Ok(cfg)
    }

    fn rebase(&mut self, path: &Path) {
        if let (Some(trace), Some(dir)) = (&self.network.trace, path.parent()) {
            if trace.is_relative() {
                self.network.trace = Some(dir.join(trace));
            }
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(self.schema_version));
        }
        if self.duration_ms == 0 {
            return Err(invalid("duration_ms must be positive"));
        }
        if self.warmup_ms >= self.duration_ms {
            return Err(invalid("warmup_ms must be shorter than duration_ms"));
        }
        self.topology.validate()?;
        let d = &self.device;
        if !(d.logical_fraction > 0.0 && d.logical_fraction < 1.0) {
            return Err(invalid("logical_fraction must lie in (0, 1)"));
        }
        if d.logical_fraction >= 1.0 - self.gc.restore_target() && !d.profile().gc_free() {
            return Err(invalid(format!(
                "logical_fraction {} leaves too little spare space to restore {:.2} free after collection",
                d.logical_fraction,
                self.gc.restore_target()
            )));
        }
        if !(d.flush_threshold > 0.0 && d.flush_threshold <= 1.0) {
            return Err(invalid("flush_threshold must lie in (0, 1]"));
        }
        if d.cache_bytes < d.page_size {
            return Err(invalid("cache must hold at least one page"));
        }
        self.device.profile().validate().map_err(flash_err)?;
        self.ssd_layout()?;
        self.gc.validate().map_err(|e| invalid(e.to_string()))?;
        let logical = self.logical_pages_per_vssd()?;
        let ws = self.workload.resolved(logical)?;
        let pages = ws.request_size.div_ceil(d.page_size);
        if ws.key_space * pages > logical {
            return Err(invalid(format!(
                "key_space {} of {pages}-page requests exceeds the {logical} logical pages of a vSSD",
                ws.key_space
            )));
        }
        if let Some(q) = &self.switch.queue {
            q.validate().map_err(invalid)?;
        }
        if !(self.switch.link_gbps > 0.0) || !(0.0..1.0).contains(&self.switch.background_load) {
            return Err(invalid("link_gbps must be positive and background_load in [0, 1)"));
        }
        if !(self.switch.token_rate_per_sec > 0.0) || self.switch.token_burst == 0 {
            return Err(invalid("token bucket rate and burst must be positive"));
        }
        if let Some(s) = self.network.sigma {
            if !(s >= 0.0) {
                return Err(invalid("network sigma must be nonnegative"));
            }
        }
        self.wear.validate().map_err(invalid)?;
        Ok(())
    }

    pub fn sched_policy(&self) -> SchedulerPolicy {
        let coordinated = self
            .scheduler
            .coordinated
            .unwrap_or_else(|| self.mode.default_coordinated_sched());
        let mut p = SchedulerPolicy::new(self.scheduler.variant, coordinated);
        if let Some(r) = self.scheduler.read_target_ns {
            p.read_target_ns = r;
        }
        if let Some(w) = self.scheduler.write_target_ns {
            p.write_target_ns = w;
        }
        p
    }

    pub fn switch_queue(&self) -> SwitchQueuePolicy {
        self.switch.queue.unwrap_or(match self.mode {
            Mode::VdcLike => SwitchQueuePolicy::TokenBucket {
                rate_per_sec: self.switch.token_rate_per_sec,
                burst: self.switch.token_burst,
            },
            _ => SwitchQueuePolicy::Priority,
        })
    }

    /// Carve one SSD; every SSD in the rack is identical.
    pub fn ssd_layout(&self) -> Result<Vec<Isolation>, ConfigError> {
        let t = &self.topology;
        let d = &self.device;
        let mut alloc = SsdAllocator::new(d.geometry()).map_err(flash_err)?;
        let mut out = Vec::new();
        match t.isolation {
            IsolationKind::Hardware => {
                if d.channels % t.vssds_per_ssd != 0 {
                    return Err(invalid("vssds_per_ssd must divide channels under hardware isolation"));
                }
                let per = d.channels / t.vssds_per_ssd;
                for k in 0..t.vssds_per_ssd {
                    out.push(Isolation::Hardware {
                        channels: (k * per..(k + 1) * per).collect(),
                    });
                }
            }
            IsolationKind::Software => {
                let groups = t.vssds_per_ssd / t.group_size;
                if d.channels % groups != 0 || d.chips_per_channel % t.group_size != 0 {
                    return Err(invalid(
                        "software isolation needs groups to divide channels and group_size to divide chips_per_channel",
                    ));
                }
                let span = d.channels / groups;
                for k in 0..t.vssds_per_ssd {
                    let (g, j) = (k / t.group_size, k % t.group_size);
                    let chips = (g * span..(g + 1) * span)
                        .flat_map(|c| {
                            (0..d.chips_per_channel)
                                .filter(move |chip| chip % t.group_size == j)
                                .map(move |chip| (c, chip))
                        })
                        .collect();
                    out.push(Isolation::Software { chips, group: g });
                }
            }
        }
        for (k, iso) in out.iter().enumerate() {
            alloc.create_vssd(k as u32, iso.clone(), 0).map_err(flash_err)?;
        }
        Ok(out)
    }

    pub fn blocks_per_vssd(&self) -> Result<u32, ConfigError> {
        let layout = self.ssd_layout()?;
        let d = &self.device;
        Ok(match &layout[0] {
            Isolation::Hardware { channels } => channels.len() as u32 * d.chips_per_channel * d.blocks_per_chip,
            Isolation::Software { chips, .. } => chips.len() as u32 * d.blocks_per_chip,
        })
    }

    pub fn logical_pages_per_vssd(&self) -> Result<u64, ConfigError> {
        let phys = self.blocks_per_vssd()? as u64 * self.device.pages_per_block as u64;
        Ok((phys as f64 * self.device.logical_fraction).floor() as u64)
    }

    /// Stable fingerprint of everything that defines the offered load, used
    /// to check that two reports are comparable.
    pub fn workload_identity(&self) -> String {
        let id = serde_json::json!({
            "workload": self.workload,
            "topology": self.topology,
            "duration_ms": self.duration_ms,
            "warmup_ms": self.warmup_ms,
            "seed": self.seed,
        });
        format!("{:016x}", fnv1a(id.to_string().as_bytes()))
    }
}

fn flash_err(e: FlashError) -> ConfigError {
    invalid(e.to_string())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn load_table(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
}

/// Short names accepted by `sweep --axis`.
pub fn resolve_axis(axis: &str) -> &str {
    match axis {
        "write_ratio" => "workload.write_ratio",
        "preset" => "workload.preset",
        "network" => "network.class",
        "device" | "profile" => "device.profile",
        "isolation" => "topology.isolation",
        "sched" => "scheduler",
        other => other,
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let raw = raw.trim();
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set `axis` to `raw` in a raw config table. The `scheduler` axis takes
/// `<variant>` or `<variant>-coordinated` / `<variant>-baseline`.
pub fn apply_override(t: &mut toml::Table, axis: &str, raw: &str) -> Result<(), ConfigError> {
    let path = resolve_axis(axis);
    if path == "scheduler" {
        let lower = raw.trim().to_ascii_lowercase();
        let (variant, coordinated) = match lower.split_once('-') {
            Some((v, "coord" | "coordinated")) => (v.to_string(), true),
            Some((v, "base" | "baseline")) => (v.to_string(), false),
            None => (lower.clone(), false),
            Some(_) => return Err(invalid(format!("bad scheduler value `{raw}`"))),
        };
        variant
            .parse::<SchedVariant>()
            .map_err(|e| invalid(e.to_string()))?;
        let s = t
            .entry("scheduler")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let s = s.as_table_mut().ok_or_else(|| invalid("scheduler is not a table"))?;
        s.insert("variant".into(), toml::Value::String(variant));
        s.insert("coordinated".into(), toml::Value::Boolean(coordinated));
        return Ok(());
    }
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::UnknownAxis(axis.to_string()));
    }
    let mut cur = t;
    for k in &keys[..keys.len() - 1] {
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::UnknownAxis(axis.to_string()))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_scalar(raw));
    Ok(())
}

/// Check that `axis` names a config field (against the fully populated
/// default document).
pub fn check_axis(axis: &str) -> Result<(), ConfigError> {
    let path = resolve_axis(axis);
    if path == "scheduler" {
        return Ok(());
    }
    let mut t: toml::Table = Config::default().to_toml_string().parse().expect("default config parses");
    apply_override(&mut t, axis, "0")?;
    // Optional fields are absent from the default document, so the probe
    // value may be the wrong type for them; only unknown keys count here.
    match toml::Value::Table(t).try_into::<Config>() {
        Err(e) if e.to_string().contains("unknown field") => Err(ConfigError::UnknownAxis(axis.to_string())),
        _ => Ok(()),
    }
}

/// One validated config per sweep value.
pub fn sweep_configs(base: &toml::Table, axis: &str, values: &[String]) -> Result<Vec<Config>, ConfigError> {
    if values.is_empty() {
        return Err(ConfigError::EmptySweep);
    }
    check_axis(axis)?;
    values
        .iter()
        .map(|v| {
            let mut t = base.clone();
            apply_override(&mut t, axis, v)?;
            Config::from_table(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = Config::default();
        c.validate().unwrap();
        let back = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn single_server_rejected() {
        let c = Config {
            topology: Topology {
                servers: 1,
                ..Topology::default()
            },
            ..Config::default()
        };
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("different server"), "{e}");
    }

    #[test]
    fn explicit_pairs_must_cross_servers() {
        let mut c = Config::default();
        c.topology = Topology {
            servers: 2,
            ssds_per_server: 1,
            vssds_per_ssd: 2,
            pairs: vec![[0, 1], [2, 3]],
            ..Topology::default()
        };
        assert!(c.validate().is_err());
        c.topology.pairs = vec![[0, 2], [1, 3]];
        c.device.channels = 2;
        c.validate().unwrap();
    }

    #[test]
    fn mirror_pairing_is_an_involution() {
        let t = Topology::default();
        let m = t.replica_map().unwrap();
        for (v, &r) in m.iter().enumerate() {
            assert_eq!(m[r as usize], v as u32);
            assert_ne!(t.locate(v as u32).0, t.locate(r).0);
        }
    }

    #[test]
    fn missing_schema_version() {
        assert!(matches!(Config::from_toml_str("seed = 3"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            Config::from_toml_str("schema_version = 9"),
            Err(ConfigError::Schema(9))
        ));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(Config::from_toml_str("schema_version = 1\nbogus = 2").is_err());
    }

    #[test]
    fn sweep_overrides() {
        let base: toml::Table = "schema_version = 1".parse().unwrap();
        let vals: Vec<String> = ["0", "0.25", "0.5", "0.75", "1.0"].iter().map(|s| s.to_string()).collect();
        let cs = sweep_configs(&base, "write_ratio", &vals).unwrap();
        assert_eq!(cs.len(), 5);
        assert_eq!(cs[1].workload.write_ratio, 0.25);

        let scheds: Vec<String> = ["fifo", "fifo-coord", "deadline", "deadline-coord", "kyber", "kyber-coord"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cs = sweep_configs(&base, "scheduler", &scheds).unwrap();
        assert_eq!(cs.len(), 6);
        assert_eq!(cs[3].sched_policy().label(), "deadline-coordinated");

        assert!(matches!(sweep_configs(&base, "write_ratio", &[]), Err(ConfigError::EmptySweep)));
        assert!(matches!(
            sweep_configs(&base, "workload.nonsense", &vals),
            Err(ConfigError::UnknownAxis(_))
        ));
        let modes: Vec<String> = vec!["vdc-like".into(), "rackblox".into()];
        assert_eq!(sweep_configs(&base, "mode", &modes).unwrap()[0].mode, Mode::VdcLike);
    }

    #[test]
    fn software_layout_shares_channels() {
        let mut c = Config::default();
        c.topology.isolation = IsolationKind::Software;
        let layout = c.ssd_layout().unwrap();
        assert_eq!(layout.len(), 4);
        assert_eq!(c.blocks_per_vssd().unwrap(), 4 * 16);
    }
}
