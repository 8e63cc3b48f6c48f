//! The assembled rack: clients, the switch, servers and their flash units
//! driven by one event loop.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::net::Ipv4Addr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError, IsolationKind, Mode};
use crate::engine::{stream_rng, Engine, EventHandle, Nanos, SimTime, NS_PER_SEC};
use crate::flash::{DeviceProfile, FlashError, FlashUnit, GcReport, Isolation, MemberSnapshot, Timeline, WriteCache};
use crate::gc::{AgentAction, GcAgent, IdlePredictor};
use crate::metrics::{
    audit_overlap, ConsistencyReport, DirLatency, EpisodeKind, GcEpisode, GcSummary, LatencyStats, LogHistogram,
    PhaseTotals, ReadBreakdown, Report, RequestCounts, Safety, WearSummary, WriteBreakdown,
};
use crate::packet::{write_record, Body, GcCode, Packet};
use crate::sched::{Dir, Queued, Scheduler, SlidingWindow, DEFAULT_PRIOR_NS};
use crate::switch::{DecisionKind, SwitchError, SwitchPlane, TableRow};
use crate::traffic::{
    default_sigma, parse_trace, random_episodes, Arrival, NetProfile, SwitchPort, SwitchQueuePolicy, TrafficError,
    Workload,
};
use crate::wear::{imbalance, WearRow};

pub const SWITCH_IP: Ipv4Addr = Ipv4Addr::new(10, 255, 255, 254);
const MISMATCH_EXAMPLES: usize = 8;
const REQ_HEADER_BYTES: u64 = 64;

pub fn server_ip(s: u32) -> Ipv4Addr {
    Ipv4Addr::new(10, 0, s as u8, 1)
}

pub fn client_ip(v: u32) -> Ipv4Addr {
    Ipv4Addr::new(10, 1, (v >> 8) as u8, v as u8)
}

#[derive(Debug, Error)]
pub enum RackError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("flash unit {unit}: {source}")]
    Flash { unit: usize, source: FlashError },
    #[error("switch: {0}")]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("reading trace {path}: {source}")]
    Trace { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep one record per measured request.
    pub keep_records: bool,
    /// Encode every packet entering the switch.
    pub capture_packets: bool,
}

/// What one finished request looked like end to end.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub client: u32,
    pub dir: Dir,
    pub lpn: u64,
    pub gen_ns: Nanos,
    pub done_ns: Nanos,
    /// vSSD that served the critical copy.
    pub served_by: u32,
    pub redirected: bool,
    /// Direct read whose replica the switch saw idle when routing.
    pub replica_idle_at_route: bool,
    pub waited_on: Option<EpisodeKind>,
    pub cache_stall: bool,
    /// inbound, switch, server queue, service, return.
    pub phases: [Nanos; 5],
}

impl RequestRecord {
    pub fn latency_ns(&self) -> Nanos {
        self.done_ns - self.gen_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VssdSnapshot {
    pub vssd: u32,
    pub server: u32,
    pub ssd: u32,
    pub replica: u32,
    pub state: MemberSnapshot,
    pub cache_peak_bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub read_hist: LogHistogram,
    pub write_hist: LogHistogram,
    pub gc_log: Vec<GcEpisode>,
    pub wear_rows: Vec<WearRow>,
    pub switch_dump: Vec<TableRow>,
    pub snapshots: Vec<VssdSnapshot>,
    pub records: Vec<RequestRecord>,
    /// Length-prefixed packet records, empty unless captured.
    pub packet_trace: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
enum Job {
    Copy { req: u32, copy: u8, sched: bool },
    Flush,
}

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrive { client: u32 },
    AtSwitch { req: u32 },
    AtServer { req: u32, copy: u8 },
    Done { unit: u32, job: Job },
    AtClient { req: u32, copy: u8 },
    GcAtSwitch { unit: u32, pkt: Packet, deliver: bool },
    GcReply { unit: u32, pkt: Packet },
    GcTimeout { unit: u32, attempt: u32 },
    GcEnd { unit: u32 },
    Wake { unit: u32 },
    Check { unit: u32 },
}

#[derive(Debug, Clone, Copy, Default)]
struct CopyState {
    active: bool,
    vssd: u32,
    net_ns: Nanos,
    predict_ns: Nanos,
    server_arrive: SimTime,
    start: SimTime,
    end: SimTime,
    done: SimTime,
    waited: Option<EpisodeKind>,
    stalled: bool,
    cached: bool,
}

#[derive(Debug, Clone)]
struct Req {
    client: u32,
    dir: Dir,
    lpn: u64,
    pages: u32,
    version: u64,
    gen: SimTime,
    switch_in: SimTime,
    pending: u8,
    redirected: bool,
    replica_idle: bool,
    copies: [CopyState; 2],
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    Idle,
    Draining { kind: EpisodeKind, requested: SimTime },
    Running { kind: EpisodeKind, requested: SimTime, start: SimTime, report: GcReport },
}

struct Unit {
    server: u32,
    ssd: u32,
    members: Vec<u32>,
    ftl: FlashUnit,
    tl: Timeline,
    sched: Scheduler,
    caches: Vec<WriteCache>,
    windows: Vec<[SlidingWindow; 2]>,
    idle: Vec<IdlePredictor>,
    agent: GcAgent,
    phase: Phase,
    held: Vec<Queued>,
    stalled: Vec<Queued>,
    last_gc: Option<(SimTime, SimTime, EpisodeKind)>,
    timeout: Option<EventHandle>,
    requested: SimTime,
    /// Above the flush threshold, flushes and foreground requests take
    /// turns for free slots.
    flush_turn: bool,
}

#[derive(Default)]
struct Stats {
    lat: [Vec<Nanos>; 2],
    hist: [LogHistogram; 2],
    counts: RequestCounts,
    reads: ReadBreakdown,
    writes: WriteBreakdown,
    phases: PhaseTotals,
    safety: Safety,
    bg_mispredictions: u64,
    requests_sent: u64,
    delays: u64,
    borrows: u64,
    records: Vec<RequestRecord>,
}

pub struct Rack {
    cfg: Config,
    profile: DeviceProfile,
    engine: Engine<Ev>,
    switch: SwitchPlane,
    port: SwitchPort,
    net: NetProfile,
    units: Vec<Unit>,
    /// vSSD id -> (unit, member).
    loc: Vec<(u32, u32)>,
    replica: Vec<u32>,
    clients: Vec<Workload>,
    client_rng: Vec<ChaCha8Rng>,
    net_rng: Vec<ChaCha8Rng>,
    sw_rng: ChaCha8Rng,
    downlink: Vec<SimTime>,
    /// In-order control channel to and from the software controller, per unit.
    ctrl_up: Vec<SimTime>,
    ctrl_down: Vec<SimTime>,
    reqs: Vec<Option<Req>>,
    free_reqs: Vec<u32>,
    logical_pages: u64,
    pages_per_req: u32,
    version: u64,
    writes_routed: u64,
    end: SimTime,
    warmup: SimTime,
    episodes: Vec<GcEpisode>,
    stats: Stats,
    opts: RunOptions,
    trace: Vec<u8>,
}

impl Rack {
    pub fn new(cfg: &Config) -> Result<Self, RackError> {
        Self::with_options(cfg, RunOptions::default())
    }

    pub fn with_options(cfg: &Config, opts: RunOptions) -> Result<Self, RackError> {
        cfg.validate()?;
        let t = &cfg.topology;
        let d = &cfg.device;
        let profile = d.profile();
        let replica = t.replica_map()?;
        let layout = cfg.ssd_layout()?;
        let logical_pages = cfg.logical_pages_per_vssd()?;
        let spec = cfg.workload.resolved(logical_pages)?;
        let policy = cfg.sched_policy();
        let n = t.total_vssds();

        let mut switch = SwitchPlane::new(cfg.switch.capacity, cfg.switch.pipeline_ns);
        for v in 0..n {
            let r = replica[v as usize];
            let pkt = Packet::new(
                v,
                client_ip(v),
                SWITCH_IP,
                Body::CreateVssd {
                    server_ip: server_ip(t.locate(v).0),
                    replica_vssd: r,
                    replica_ip: server_ip(t.locate(r).0),
                },
            );
            switch.process_packet(pkt)?;
        }

        // Group the slots of one SSD into flash units.
        let mut groups: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for (k, iso) in layout.iter().enumerate() {
            let (g, chips) = match iso {
                Isolation::Hardware { channels } => (k as u32, channels.len() as u32 * d.chips_per_channel),
                Isolation::Software { chips, group } => (*group, chips.len() as u32),
            };
            groups.entry(g).or_default().push((k as u32, chips));
        }
        let blocks = cfg.blocks_per_vssd()?;
        let mut units = Vec::new();
        let mut loc = vec![(0, 0); n as usize];
        for v0 in (0..n).step_by(t.vssds_per_ssd as usize) {
            let (server, ssd, _) = t.locate(v0);
            for slots in groups.values() {
                let members: Vec<u32> = slots.iter().map(|&(k, _)| v0 + k).collect();
                let chips: u32 = slots.iter().map(|&(_, c)| c).sum();
                let spec_members: Vec<(u32, u64)> = members.iter().map(|_| (blocks, logical_pages)).collect();
                let ui = units.len();
                let mut ftl = FlashUnit::new(profile, d.pages_per_block, &spec_members, cfg.gc.restore_target())
                    .map_err(|source| RackError::Flash { unit: ui, source })?;
                if d.precondition {
                    for m in 0..members.len() {
                        for lpn in 0..logical_pages {
                            ftl.write(m, lpn, 0).map_err(|source| RackError::Flash { unit: ui, source })?;
                        }
                    }
                }
                for (i, &v) in members.iter().enumerate() {
                    loc[v as usize] = (ui as u32, i as u32);
                }
                let k = members.len();
                units.push(Unit {
                    server,
                    ssd,
                    agent: GcAgent::new(members.clone(), server_ip(server), SWITCH_IP, cfg.gc.retries),
                    members,
                    ftl,
                    tl: Timeline::new(chips),
                    sched: Scheduler::new(policy, chips),
                    caches: (0..k).map(|_| WriteCache::new(d.cache_bytes)).collect(),
                    windows: (0..k)
                        .map(|_| [SlidingWindow::new(DEFAULT_PRIOR_NS), SlidingWindow::new(DEFAULT_PRIOR_NS)])
                        .collect(),
                    idle: (0..k).map(|_| IdlePredictor::new(cfg.gc.alpha)).collect(),
                    phase: Phase::Idle,
                    held: Vec::new(),
                    stalled: Vec::new(),
                    last_gc: None,
                    timeout: None,
                    requested: SimTime::ZERO,
                    flush_turn: false,
                });
            }
        }

        let end = SimTime::from_ms(cfg.duration_ms);
        let net = build_network(cfg, end.as_ns())?;
        let clients = (0..n)
            .map(|_| Workload::new(spec.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let pages_per_req = spec.request_size.div_ceil(d.page_size).max(1) as u32;
        let nunits = units.len();
        Ok(Rack {
            profile,
            engine: Engine::new(cfg.seed),
            switch,
            port: SwitchPort::new(
                cfg.switch_queue(),
                cfg.switch.link_gbps,
                cfg.switch.background_load,
                cfg.switch.background_burst_ns,
            ),
            net,
            units,
            loc,
            replica,
            clients,
            client_rng: (0..n).map(|v| stream_rng(cfg.seed, &format!("client-{v}"))).collect(),
            net_rng: (0..n).map(|v| stream_rng(cfg.seed, &format!("net-{v}"))).collect(),
            sw_rng: stream_rng(cfg.seed, "switch-port"),
            downlink: vec![SimTime::ZERO; t.servers as usize],
            ctrl_up: vec![SimTime::ZERO; nunits],
            ctrl_down: vec![SimTime::ZERO; nunits],
            reqs: Vec::new(),
            free_reqs: Vec::new(),
            logical_pages,
            pages_per_req,
            version: 0,
            writes_routed: 0,
            end,
            warmup: SimTime::from_ms(cfg.warmup_ms),
            episodes: Vec::new(),
            stats: Stats::default(),
            opts,
            trace: Vec::new(),
            cfg: cfg.clone(),
        })
    }

    pub fn switch(&self) -> &SwitchPlane {
        &self.switch
    }

    pub fn replica_map(&self) -> &[u32] {
        &self.replica
    }

    /// Run to the configured duration, let in-flight work finish, flush
    /// every cache and audit the replicas.
    pub fn run(mut self) -> Result<RunOutput, RackError> {
        let n = self.cfg.topology.total_vssds();
        match self.cfg.workload.arrival {
            Arrival::Open { .. } => {
                for v in 0..n {
                    let gap = self.interarrival(v);
                    self.engine.schedule_at(SimTime(gap), Ev::Arrive { client: v });
                }
            }
            Arrival::Closed { clients, think_ns } => {
                for v in 0..n {
                    for _ in 0..clients {
                        let at = if think_ns > 0 { self.client_rng[v as usize].random_range(0..think_ns) } else { 0 };
                        self.engine.schedule_at(SimTime(at), Ev::Arrive { client: v });
                    }
                }
            }
        }
        let mut jitter = stream_rng(self.cfg.seed, "gc-jitter");
        let period = self.cfg.gc.check_period_ns.max(1);
        for u in 0..self.units.len() {
            let at = jitter.random_range(0..period);
            self.engine.schedule_at(SimTime(at), Ev::Check { unit: u as u32 });
        }
        while let Some((_, ev)) = self.engine.step() {
            self.handle(ev)?;
        }
        self.quiesce()?;
        Ok(self.finish())
    }

    fn interarrival(&mut self, v: u32) -> Nanos {
        let Arrival::Open { rate_per_sec } = self.cfg.workload.arrival else {
            return 0;
        };
        let u: f64 = self.client_rng[v as usize].random();
        (-(1.0 - u).ln() * NS_PER_SEC as f64 / rate_per_sec).round() as Nanos
    }

    fn handle(&mut self, ev: Ev) -> Result<(), RackError> {
        match ev {
            Ev::Arrive { client } => self.on_arrive(client),
            Ev::AtSwitch { req } => self.on_switch(req)?,
            Ev::AtServer { req, copy } => self.on_server(req, copy)?,
            Ev::Done { unit, job } => self.on_done(unit as usize, job)?,
            Ev::AtClient { req, copy } => self.on_client(req, copy),
            Ev::GcAtSwitch { unit, pkt, deliver } => self.on_gc_switch(unit as usize, pkt, deliver)?,
            Ev::GcReply { unit, pkt } => self.on_gc_reply(unit as usize, pkt)?,
            Ev::GcTimeout { unit, attempt } => self.on_gc_timeout(unit as usize, attempt)?,
            Ev::GcEnd { unit } => self.on_gc_end(unit as usize)?,
            Ev::Wake { unit } => self.try_dispatch(unit as usize)?,
            Ev::Check { unit } => self.on_check(unit as usize)?,
        }
        Ok(())
    }

    fn capture(&mut self, pkt: &Packet) {
        if self.opts.capture_packets {
            write_record(&mut self.trace, pkt).expect("writing to a Vec cannot fail");
        }
    }

    fn measured(&self, gen: SimTime) -> bool {
        gen >= self.warmup && gen < self.end
    }

    fn req(&mut self, id: u32) -> &mut Req {
        self.reqs[id as usize].as_mut().expect("live request")
    }

    fn on_arrive(&mut self, client: u32) {
        let now = self.engine.now();
        if now >= self.end {
            return;
        }
        if matches!(self.cfg.workload.arrival, Arrival::Open { .. }) {
            let gap = self.interarrival(client);
            self.engine.schedule(gap.max(1), Ev::Arrive { client });
        }
        let c = client as usize;
        let skel = self.clients[c].next_request(now, &mut self.client_rng[c]);
        let inbound = self.net.sample_path_latency(skel.dir, now, &mut self.net_rng[c]);
        if self.measured(now) {
            self.stats.counts.generated += 1;
        }
        let req = Req {
            client,
            dir: skel.dir,
            lpn: skel.key % self.logical_pages,
            pages: self.pages_per_req,
            version: 0,
            gen: now,
            switch_in: now + inbound,
            pending: 0,
            redirected: false,
            replica_idle: false,
            copies: [CopyState::default(); 2],
        };
        let id = match self.free_reqs.pop() {
            Some(id) => {
                self.reqs[id as usize] = Some(req);
                id
            }
            None => {
                self.reqs.push(Some(req));
                (self.reqs.len() - 1) as u32
            }
        };
        self.engine.schedule(inbound, Ev::AtSwitch { req: id });
    }

    /// Arrival at a server over its in-order link from the switch.
    fn downlink_arrival(&mut self, server: u32, depart: SimTime) -> SimTime {
        let slot = &mut self.downlink[server as usize];
        let at = (depart + self.cfg.network.hop_ns).max(*slot);
        *slot = at;
        at
    }

    fn on_switch(&mut self, id: u32) -> Result<(), RackError> {
        let now = self.engine.now();
        let (client, dir, lpn, pages, gen) = {
            let r = self.req(id);
            (r.client, r.dir, r.lpn, r.pages, r.gen)
        };
        let bytes = pages as u64 * self.cfg.device.page_size;
        let body = match dir {
            Dir::Read => Body::Read { lba: lpn, len: bytes as u32 },
            Dir::Write => Body::Write { lba: lpn, len: bytes as u32 },
        };
        let base = Packet::new(client, client_ip(client), SWITCH_IP, body);
        let pkt = base
            .with_lat_ns(now.since(gen))
            .unwrap_or(Packet { lat: u32::MAX, ..base });
        self.capture(&pkt);
        let coordinated = self.cfg.mode.coordinated_gc();
        let replica_idle = self
            .switch
            .dest_entry(self.replica[client as usize])
            .is_some_and(|e| e.gc_status == 0);
        let decision = self.switch.process_packet(pkt)?;
        let mut version = 0;
        let mut drop_copy = false;
        if dir == Dir::Write {
            self.version += 1;
            version = self.version;
            self.writes_routed += 1;
            let every = self.cfg.fault.drop_fanout_every;
            drop_copy = every > 0 && self.writes_routed % every == 0;
        }
        let redirected = decision.kind == DecisionKind::ReadRedirected;
        let pipeline = self.switch.pipeline_ns() * (1 + decision.recirculations as u64);
        let flows = self.cfg.topology.total_vssds();
        let mut copies = [CopyState::default(); 2];
        let mut pending = 0;
        for (c, out) in decision.out.iter().enumerate().take(2) {
            if c == 1 && drop_copy {
                if self.measured(gen) {
                    self.stats.counts.dropped += 1;
                }
                continue;
            }
            let wire = if dir == Dir::Write { bytes } else { REQ_HEADER_BYTES };
            let q = self.port.enqueue_at_switch(out.vssd_id, wire, flows, now, &mut self.sw_rng);
            // A software controller has to be consulted before redirecting.
            let detour = if redirected && self.cfg.mode == Mode::SoftwareCoord {
                let rng = &mut self.net_rng[client as usize];
                self.net.sample_path_latency(dir, now, rng) + self.net.sample_path_latency(dir, now, rng)
            } else {
                0
            };
            let depart = now + pipeline + q + detour;
            let server = self.cfg.topology.locate(out.vssd_id).0;
            // A packet held for the controller enters the link later and must
            // not hold up packets routed meanwhile.
            let arrive = if detour > 0 {
                depart + self.cfg.network.hop_ns
            } else {
                self.downlink_arrival(server, depart)
            };
            let out = self
                .switch
                .traverse(*out, q, decision.recirculations)
                .add_hop_ns(detour + arrive.since(depart));
            copies[c] = CopyState {
                active: true,
                vssd: out.vssd_id,
                net_ns: out.lat_ns(),
                ..CopyState::default()
            };
            pending += 1;
            self.engine.schedule_at(arrive, Ev::AtServer { req: id, copy: c as u8 });
        }
        let r = self.req(id);
        r.version = version;
        r.copies = copies;
        r.pending = pending;
        r.redirected = redirected;
        // Without switch-side GC state there is no routing decision to audit.
        r.replica_idle = coordinated && decision.kind == DecisionKind::ReadDirect && replica_idle;
        Ok(())
    }

    fn on_server(&mut self, id: u32, c: u8) -> Result<(), RackError> {
        let now = self.engine.now();
        let (dir, vssd, net_ns) = {
            let r = self.req(id);
            (r.dir, r.copies[c as usize].vssd, r.copies[c as usize].net_ns)
        };
        let (u, m) = self.loc[vssd as usize];
        let (u, m) = (u as usize, m as usize);
        let unit = &mut self.units[u];
        unit.idle[m].on_arrival(now.as_ns());
        unit.windows[m][dir.idx()].update(net_ns);
        let predict_ns = unit.windows[m][dir.idx()].predict_ns();
        let q = Queued {
            id: (id as u64) << 1 | c as u64,
            dir,
            net_ns,
            enqueue: now,
            predict_ns,
        };
        let busy = !matches!(unit.phase, Phase::Idle);
        {
            let cs = &mut self.reqs[id as usize].as_mut().expect("live").copies[c as usize];
            cs.server_arrive = now;
            cs.predict_ns = predict_ns;
        }
        match (dir, busy) {
            (_, false) => self.units[u].sched.enqueue(q),
            (Dir::Write, true) => self.cache_write(u, m, q),
            (Dir::Read, true) => self.units[u].held.push(q),
        }
        self.try_dispatch(u)
    }

    /// Absorb a write in DRAM while the unit collects, or park it if the
    /// cache is full.
    fn cache_write(&mut self, u: usize, m: usize, q: Queued) {
        let now = self.engine.now();
        let (id, c) = ((q.id >> 1) as u32, (q.id & 1) as usize);
        let r = self.reqs[id as usize].as_mut().expect("live");
        let bytes = r.pages as u64 * self.cfg.device.page_size;
        let cache = &mut self.units[u].caches[m];
        if !cache.has_room(bytes) {
            r.copies[c].stalled = true;
            self.units[u].stalled.push(q);
            self.stats.writes.cache_stalls += 1;
            return;
        }
        for i in 0..r.pages as u64 {
            let lpn = (r.lpn + i) % self.logical_pages;
            cache.insert(lpn, r.version, self.cfg.device.page_size);
        }
        let end = now + self.cfg.device.cache_ns;
        let cs = &mut r.copies[c];
        cs.cached = true;
        cs.start = now;
        cs.end = end;
        self.stats.writes.cached += 1;
        self.engine.schedule_at(
            end,
            Ev::Done {
                unit: u as u32,
                job: Job::Copy { req: id, copy: c as u8, sched: false },
            },
        );
    }

    fn try_dispatch(&mut self, u: usize) -> Result<(), RackError> {
        let now = self.engine.now();
        let threshold = self.cfg.device.flush_threshold;
        loop {
            let unit = &mut self.units[u];
            let idle = match unit.phase {
                Phase::Running { .. } => return Ok(()),
                Phase::Draining { .. } if unit.sched.is_empty() => return self.start_gc(u),
                Phase::Draining { .. } => false,
                Phase::Idle => true,
            };
            let Some(slot) = unit.tl.free_slot(now) else {
                return Ok(());
            };
            if idle {
                if let Some(m) = fullest(&unit.caches).filter(|&m| unit.caches[m].fill() > threshold) {
                    if unit.flush_turn || unit.sched.is_empty() {
                        unit.flush_turn = false;
                        self.flush(u, m, slot)?;
                        continue;
                    }
                    unit.flush_turn = true;
                }
            }
            if let Some(q) = self.units[u].sched.dispatch(now) {
                self.serve(u, slot, q)?;
                continue;
            }
            if idle {
                if let Some(m) = fullest(&self.units[u].caches) {
                    self.flush(u, m, slot)?;
                    continue;
                }
            }
            return Ok(());
        }
    }

    fn flash_err(u: usize) -> impl Fn(FlashError) -> RackError {
        move |source| RackError::Flash { unit: u, source }
    }

    fn flush(&mut self, u: usize, m: usize, slot: usize) -> Result<(), RackError> {
        let now = self.engine.now();
        let e = self.units[u].caches[m].pop().expect("non-empty cache");
        let gc = self.units[u].ftl.write(m, e.lpn, e.version).map_err(Self::flash_err(u))?;
        if let Some(report) = gc {
            self.emergency(u, report);
        }
        let end = self.units[u].tl.occupy(slot, now, self.profile.program_ns);
        self.engine.schedule_at(end, Ev::Done { unit: u as u32, job: Job::Flush });
        Ok(())
    }

    /// A write ran the unit out of free blocks and collected inline.
    fn emergency(&mut self, u: usize, report: GcReport) {
        let now = self.engine.now();
        let unit = &mut self.units[u];
        let dur = report.duration_ns.div_ceil(unit.tl.slots() as u64).max(1);
        let (s, e) = unit.tl.start_gc(now, dur);
        unit.last_gc = Some((s, e, EpisodeKind::Emergency));
        self.episodes.push(GcEpisode {
            server: unit.server,
            ssd: unit.ssd,
            vssds: unit.members.clone(),
            kind: EpisodeKind::Emergency,
            requested_ns: now.as_ns(),
            start_ns: s.as_ns(),
            end_ns: e.as_ns(),
            victims: report.victims,
            pages_migrated: report.pages_migrated,
            blocks_erased: report.blocks_erased,
        });
        self.engine.schedule_at(e, Ev::Wake { unit: u as u32 });
    }

    fn serve(&mut self, u: usize, slot: usize, q: Queued) -> Result<(), RackError> {
        let now = self.engine.now();
        let (id, c) = ((q.id >> 1) as u32, (q.id & 1) as usize);
        let (lpn, pages, version, vssd) = {
            let r = self.req(id);
            (r.lpn, r.pages as u64, r.version, r.copies[c].vssd)
        };
        let m = self.loc[vssd as usize].1 as usize;
        let lp = self.logical_pages;
        let end = match q.dir {
            Dir::Read => {
                let unit = &self.units[u];
                let cached = (0..pages).all(|i| unit.caches[m].lookup((lpn + i) % lp).is_some());
                if cached {
                    now + self.cfg.device.cache_ns
                } else {
                    for i in 0..pages {
                        unit.ftl.read(m, (lpn + i) % lp).map_err(Self::flash_err(u))?;
                    }
                    self.units[u].tl.occupy(slot, now, self.profile.read_ns * pages)
                }
            }
            Dir::Write => {
                for i in 0..pages {
                    let gc = self.units[u].ftl.write(m, (lpn + i) % lp, version).map_err(Self::flash_err(u))?;
                    if let Some(report) = gc {
                        self.emergency(u, report);
                    }
                }
                self.stats.writes.flash += 1;
                self.units[u].tl.occupy(slot, now, self.profile.program_ns * pages)
            }
        };
        let dur = match q.dir {
            Dir::Read if end == now + self.cfg.device.cache_ns => self.cfg.device.cache_ns,
            Dir::Read => self.profile.read_ns * pages,
            Dir::Write => self.profile.program_ns * pages,
        };
        let start = SimTime(end.as_ns() - dur);
        let last_gc = self.units[u].last_gc;
        let cs = &mut self.req(id).copies[c];
        cs.start = start;
        cs.end = end;
        cs.waited = last_gc.filter(|&(_, e, _)| cs.server_arrive < e && start >= e).map(|g| g.2);
        self.engine.schedule_at(
            end,
            Ev::Done {
                unit: u as u32,
                job: Job::Copy { req: id, copy: c as u8, sched: true },
            },
        );
        Ok(())
    }

    fn on_done(&mut self, u: usize, job: Job) -> Result<(), RackError> {
        let now = self.engine.now();
        if let Job::Copy { req, copy, sched } = job {
            let (dir, cs) = {
                let r = self.req(req);
                (r.dir, r.copies[copy as usize])
            };
            if sched {
                let unit = &mut self.units[u];
                let server_ns = now.since(cs.server_arrive);
                let lat = if unit.sched.policy().coordinated {
                    cs.net_ns + server_ns + cs.predict_ns
                } else {
                    server_ns
                };
                unit.sched.complete(dir, lat);
            }
            // Back over the uplink and the switch, then out to the client.
            let client = self.req(req).client as usize;
            let out = self.net.sample_path_latency(dir, now, &mut self.net_rng[client]);
            let at = now + self.cfg.network.hop_ns + self.switch.pipeline_ns() + out;
            self.engine.schedule_at(at, Ev::AtClient { req, copy });
        }
        self.try_dispatch(u)
    }

    fn on_client(&mut self, id: u32, c: u8) {
        let now = self.engine.now();
        let r = self.req(id);
        r.copies[c as usize].done = now;
        r.pending -= 1;
        if r.pending > 0 {
            return;
        }
        let r = self.reqs[id as usize].take().expect("live");
        self.free_reqs.push(id);
        self.complete(&r, now);
        if let Arrival::Closed { think_ns, .. } = self.cfg.workload.arrival {
            if now + think_ns < self.end {
                self.engine.schedule(think_ns, Ev::Arrive { client: r.client });
            }
        }
    }

    fn complete(&mut self, r: &Req, now: SimTime) {
        if !self.measured(r.gen) {
            return;
        }
        let crit = r
            .copies
            .iter()
            .filter(|c| c.active)
            .max_by_key(|c| c.done)
            .copied()
            .expect("at least one copy");
        let total = now.since(r.gen);
        let phases = [
            r.switch_in.since(r.gen),
            crit.server_arrive.since(r.switch_in),
            crit.start.since(crit.server_arrive),
            crit.end.since(crit.start),
            crit.done.since(crit.end),
        ];
        let st = &mut self.stats;
        if phases.iter().sum::<Nanos>() != total || crit.done != now {
            st.safety.additivity_errors += 1;
        }
        st.phases.inbound_ns += phases[0] as u128;
        st.phases.switch_ns += phases[1] as u128;
        st.phases.queue_ns += phases[2] as u128;
        st.phases.service_ns += phases[3] as u128;
        st.phases.return_ns += phases[4] as u128;
        st.counts.completed += 1;
        st.lat[r.dir.idx()].push(total);
        st.hist[r.dir.idx()].record(total);
        match r.dir {
            Dir::Read => {
                st.counts.reads += 1;
                if r.redirected {
                    st.reads.redirected += 1;
                } else if crit.waited.is_some() {
                    st.reads.blocked += 1;
                } else {
                    st.reads.direct += 1;
                }
                match crit.waited {
                    Some(EpisodeKind::Background) => st.bg_mispredictions += 1,
                    Some(_) if r.replica_idle => st.safety.redirect_violations += 1,
                    _ => {}
                }
            }
            Dir::Write => {
                st.counts.writes += 1;
                if crit.waited.is_some() || crit.stalled {
                    st.writes.gc_blocked += 1;
                }
            }
        }
        if self.opts.keep_records {
            st.records.push(RequestRecord {
                client: r.client,
                dir: r.dir,
                lpn: r.lpn,
                gen_ns: r.gen.as_ns(),
                done_ns: now.as_ns(),
                served_by: crit.vssd,
                redirected: r.redirected,
                replica_idle_at_route: r.replica_idle,
                waited_on: crit.waited,
                cache_stall: crit.stalled,
                phases,
            });
        }
    }

    fn coordinated(&self) -> bool {
        self.cfg.mode.coordinated_gc()
    }

    /// One-way delay between a server and whoever arbitrates collection.
    fn control_delay(&mut self, u: usize) -> Nanos {
        if self.cfg.mode == Mode::SoftwareCoord {
            let v = self.units[u].members[0] as usize;
            self.net.sample_path_latency(Dir::Read, self.engine.now(), &mut self.net_rng[v])
        } else {
            self.cfg.network.hop_ns
        }
    }

    fn send_gc(&mut self, u: usize, pkt: Packet, deliver: bool) {
        self.capture(&pkt);
        let at = self.engine.now() + self.control_delay(u);
        let at = at.max(self.ctrl_up[u]);
        self.ctrl_up[u] = at;
        self.engine.schedule_at(at, Ev::GcAtSwitch { unit: u as u32, pkt, deliver });
    }

    fn on_gc_switch(&mut self, u: usize, pkt: Packet, deliver: bool) -> Result<(), RackError> {
        let now = self.engine.now();
        let decision = self.switch.process_packet(pkt)?;
        if !deliver {
            return Ok(());
        }
        let reply = decision.out[0];
        let at = if self.cfg.mode == Mode::SoftwareCoord {
            let at = (now + self.control_delay(u)).max(self.ctrl_down[u]);
            self.ctrl_down[u] = at;
            at
        } else {
            let depart = now + self.switch.pipeline_ns() * (1 + decision.recirculations as u64);
            self.downlink_arrival(self.units[u].server, depart)
        };
        self.engine.schedule_at(at, Ev::GcReply { unit: u as u32, pkt: reply });
        Ok(())
    }

    fn on_gc_reply(&mut self, u: usize, pkt: Packet) -> Result<(), RackError> {
        match self.units[u].agent.handle_gc_reply(&pkt) {
            AgentAction::Granted { code } => {
                self.disarm(u);
                let requested = self.units[u].requested;
                self.begin_drain(u, episode_kind(code), requested)?;
            }
            AgentAction::Deferred { packets } => {
                self.disarm(u);
                self.stats.delays += 1;
                for p in packets {
                    self.send_gc(u, p, false);
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn disarm(&mut self, u: usize) {
        if let Some(h) = self.units[u].timeout.take() {
            self.engine.cancel(h);
        }
    }

    fn send_request(&mut self, u: usize, packets: Vec<Packet>, attempt: u32) {
        self.stats.requests_sent += packets.len() as u64;
        for p in packets {
            self.send_gc(u, p, true);
        }
        let h = self.engine.schedule(
            self.cfg.gc.retry_timeout_ns,
            Ev::GcTimeout { unit: u as u32, attempt },
        );
        self.units[u].timeout = Some(h);
    }

    fn on_gc_timeout(&mut self, u: usize, attempt: u32) -> Result<(), RackError> {
        self.units[u].timeout = None;
        match self.units[u].agent.on_timeout(attempt) {
            AgentAction::Request { packets, attempt } => self.send_request(u, packets, attempt),
            AgentAction::Forced { .. } => {
                let requested = self.units[u].requested;
                self.begin_drain(u, EpisodeKind::Forced, requested)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn on_check(&mut self, u: usize) -> Result<(), RackError> {
        let now = self.engine.now();
        if now >= self.end {
            return Ok(());
        }
        self.engine.schedule(self.cfg.gc.check_period_ns, Ev::Check { unit: u as u32 });
        let gc = self.cfg.gc;
        if !gc.enabled || !matches!(self.units[u].phase, Phase::Idle) {
            return Ok(());
        }
        if self.cfg.topology.isolation == IsolationKind::Software {
            let lend = self.cfg.device.blocks_per_chip;
            let unit = &mut self.units[u];
            for m in 0..unit.members.len() {
                if unit.ftl.free_ratio(m) < gc.soft_threshold && unit.ftl.borrow(m, lend, gc.restore_target()).is_ok() {
                    self.stats.borrows += 1;
                }
            }
        }
        let coordinated = self.coordinated();
        let unit = &mut self.units[u];
        let ratio = (0..unit.members.len()).map(|m| unit.ftl.free_ratio(m)).fold(f64::INFINITY, f64::min);
        let idle = unit.idle.iter().map(|p| p.prediction()).min().unwrap_or(0);
        if !coordinated {
            if ratio < gc.gc_threshold {
                self.begin_drain(u, EpisodeKind::Local, now)?;
            }
            return Ok(());
        }
        match unit.agent.periodic_check(ratio, idle, &gc) {
            AgentAction::Request { packets, attempt } => {
                unit.requested = now;
                self.send_request(u, packets, attempt);
            }
            AgentAction::StartNow { packets, .. } => {
                for p in packets {
                    self.send_gc(u, p, false);
                }
                self.begin_drain(u, EpisodeKind::Background, now)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn begin_drain(&mut self, u: usize, kind: EpisodeKind, requested: SimTime) -> Result<(), RackError> {
        let unit = &mut self.units[u];
        unit.phase = Phase::Draining { kind, requested };
        for q in unit.sched.take_writes() {
            let vssd = self.reqs[(q.id >> 1) as usize].as_ref().expect("live").copies[(q.id & 1) as usize].vssd;
            let m = self.loc[vssd as usize].1 as usize;
            self.cache_write(u, m, q);
        }
        self.try_dispatch(u)
    }

    fn start_gc(&mut self, u: usize) -> Result<(), RackError> {
        let now = self.engine.now();
        let Phase::Draining { kind, requested } = self.units[u].phase else {
            return Ok(());
        };
        let target = if kind == EpisodeKind::Background { 0.0 } else { self.cfg.gc.restore_target() };
        let unit = &mut self.units[u];
        let report = unit.ftl.collect_all(target, 1).map_err(Self::flash_err(u))?;
        // Victims on different chips are collected in parallel.
        let dur = report.duration_ns.div_ceil(unit.tl.slots() as u64).max(1);
        let (start, end) = unit.tl.start_gc(now, dur);
        unit.agent.started();
        unit.phase = Phase::Running { kind, requested, start, report };
        unit.last_gc = Some((start, end, kind));
        self.engine.schedule_at(end, Ev::GcEnd { unit: u as u32 });
        Ok(())
    }

    fn on_gc_end(&mut self, u: usize) -> Result<(), RackError> {
        let now = self.engine.now();
        let coordinated = self.coordinated();
        let unit = &mut self.units[u];
        let Phase::Running { kind, requested, start, report } = unit.phase else {
            return Ok(());
        };
        unit.phase = Phase::Idle;
        self.episodes.push(GcEpisode {
            server: unit.server,
            ssd: unit.ssd,
            vssds: unit.members.clone(),
            kind,
            requested_ns: requested.as_ns(),
            start_ns: start.as_ns(),
            end_ns: now.as_ns(),
            victims: report.victims,
            pages_migrated: report.pages_migrated,
            blocks_erased: report.blocks_erased,
        });
        for q in unit.held.drain(..).chain(unit.stalled.drain(..)) {
            unit.sched.enqueue(q);
        }
        if coordinated && !unit.agent.is_idle() {
            for p in unit.agent.finish() {
                self.send_gc(u, p, false);
            }
        }
        self.try_dispatch(u)
    }

    /// Push whatever is still buffered into flash, off the clock.
    fn quiesce(&mut self) -> Result<(), RackError> {
        for u in 0..self.units.len() {
            let unit = &mut self.units[u];
            for m in 0..unit.members.len() {
                while let Some(e) = unit.caches[m].pop() {
                    unit.ftl.write(m, e.lpn, e.version).map_err(Self::flash_err(u))?;
                }
            }
        }
        Ok(())
    }

    pub fn consistency(&self) -> ConsistencyReport {
        let mut rep = ConsistencyReport::default();
        for (v, &r) in self.replica.iter().enumerate() {
            let v = v as u32;
            if v > r {
                continue;
            }
            rep.pairs_checked += 1;
            let (ua, ma) = self.loc[v as usize];
            let (ub, mb) = self.loc[r as usize];
            let a = self.units[ua as usize].ftl.contents(ma as usize);
            let b = self.units[ub as usize].ftl.contents(mb as usize);
            for (lpn, (x, y)) in a.iter().zip(b).enumerate() {
                if x != y {
                    rep.mismatched_pages += 1;
                    if rep.examples.len() < MISMATCH_EXAMPLES {
                        rep.examples.push((v, r, lpn as u64));
                    }
                }
            }
        }
        rep
    }

    fn wear_rows(&self) -> Vec<WearRow> {
        let t = &self.cfg.topology;
        let endurance = self.cfg.wear.endurance.max(1) as f64;
        let mut per_ssd = vec![(0.0, 0usize); t.ssds() as usize];
        for unit in &self.units {
            let k = (unit.server * t.ssds_per_server + unit.ssd) as usize;
            per_ssd[k].0 += unit.ftl.erase_counts().map(f64::from).sum::<f64>();
            per_ssd[k].1 += unit.ftl.total_blocks();
        }
        let wear: Vec<f64> = per_ssd.iter().map(|&(e, b)| e / b.max(1) as f64 / endurance).collect();
        let per = t.ssds_per_server as usize;
        let servers: Vec<f64> = wear.chunks(per).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let lambda_rack = imbalance(&servers);
        let days = self.end.as_secs_f64() / 86_400.0;
        wear.iter()
            .enumerate()
            .map(|(k, &w)| WearRow {
                day: days,
                server: k / per,
                ssd: k % per,
                wear: w,
                rate: if days > 0.0 { w / days } else { 0.0 },
                lambda_local: imbalance(&wear[k / per * per..(k / per + 1) * per]),
                lambda_rack,
            })
            .collect()
    }

    fn finish(mut self) -> RunOutput {
        let cfg = &self.cfg;
        let measured_ns = self.end.since(self.warmup);
        let latency = DirLatency {
            read: LatencyStats::from_samples(&mut self.stats.lat[0]),
            write: LatencyStats::from_samples(&mut self.stats.lat[1]),
        };
        let mut by_kind = BTreeMap::new();
        for e in &self.episodes {
            *by_kind.entry(e.kind.name().to_string()).or_insert(0) += 1;
        }
        let gc = GcSummary {
            episodes: self.episodes.len() as u64,
            by_kind,
            blocked_ns: self.episodes.iter().map(|e| e.end_ns - e.start_ns).sum(),
            pages_migrated: self.episodes.iter().map(|e| e.pages_migrated).sum(),
            blocks_erased: self.episodes.iter().map(|e| e.blocks_erased).sum(),
            requests_sent: self.stats.requests_sent,
            delays: self.stats.delays,
            overlap: audit_overlap(&self.episodes, &self.replica),
            bg_mispredictions: self.stats.bg_mispredictions,
            borrows: self.stats.borrows,
        };
        let wear_rows = self.wear_rows();
        let total_blocks: usize = self.units.iter().map(|u| u.ftl.total_blocks()).sum();
        let erases: f64 = self.units.iter().flat_map(|u| u.ftl.erase_counts()).map(f64::from).sum();
        let per = cfg.topology.ssds_per_server as usize;
        let server_wear: Vec<f64> = wear_rows
            .chunks(per)
            .map(|c| c.iter().map(|r| r.wear).sum::<f64>() / c.len() as f64)
            .collect();
        let wear = WearSummary {
            mean_erase_count: erases / total_blocks.max(1) as f64,
            max_ssd_wear: wear_rows.iter().map(|r| r.wear).fold(0.0, f64::max),
            rack_imbalance: imbalance(&server_wear),
        };
        let network = if cfg.network.trace.is_some() {
            "trace".to_string()
        } else {
            serde_json::to_value(cfg.network.class)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default()
        };
        let report = Report {
            schema_version: crate::config::SCHEMA_VERSION,
            name: cfg.name.clone(),
            mode: cfg.mode.name().to_string(),
            seed: cfg.seed,
            workload_identity: cfg.workload_identity(),
            scheduler: cfg.sched_policy().label(),
            switch_queue: queue_name(self.port.policy()).to_string(),
            device: serde_json::to_value(cfg.device.profile)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            network,
            write_ratio: self.clients[0].spec().write_ratio,
            duration_ns: self.end.as_ns(),
            measured_ns,
            requests: self.stats.counts.clone(),
            iops: self.stats.counts.completed as f64 / (measured_ns.max(1) as f64 / NS_PER_SEC as f64),
            latency,
            reads: self.stats.reads.clone(),
            writes: self.stats.writes.clone(),
            phases: self.stats.phases.clone(),
            gc,
            switch: self.switch.counters().clone(),
            safety: self.stats.safety.clone(),
            consistency: self.consistency(),
            wear,
            events: self.engine.dispatched(),
        };
        let snapshots = (0..self.loc.len())
            .map(|v| {
                let (u, m) = self.loc[v];
                let unit = &self.units[u as usize];
                VssdSnapshot {
                    vssd: v as u32,
                    server: unit.server,
                    ssd: unit.ssd,
                    replica: self.replica[v],
                    state: unit.ftl.snapshot(m as usize),
                    cache_peak_bytes: unit.caches[m as usize].peak(),
                }
            })
            .collect();
        let [read_hist, write_hist] = std::mem::take(&mut self.stats.hist);
        RunOutput {
            report,
            read_hist,
            write_hist,
            gc_log: std::mem::take(&mut self.episodes),
            wear_rows,
            switch_dump: self.switch.dump(),
            snapshots,
            records: std::mem::take(&mut self.stats.records),
            packet_trace: std::mem::take(&mut self.trace),
        }
    }
}

/// Convenience wrapper: build and run.
pub fn run(cfg: &Config, opts: RunOptions) -> Result<RunOutput, RackError> {
    Rack::with_options(cfg, opts)?.run()
}

fn fullest(caches: &[WriteCache]) -> Option<usize> {
    caches
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .max_by(|a, b| a.1.fill().total_cmp(&b.1.fill()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
}

fn episode_kind(code: GcCode) -> EpisodeKind {
    match code {
        GcCode::Soft => EpisodeKind::Soft,
        GcCode::Bg => EpisodeKind::Background,
        _ => EpisodeKind::Regular,
    }
}

pub fn queue_name(p: &SwitchQueuePolicy) -> &'static str {
    match p {
        SwitchQueuePolicy::TokenBucket { .. } => "token_bucket",
        SwitchQueuePolicy::FairQueue => "fair_queue",
        SwitchQueuePolicy::Priority => "priority",
    }
}

fn build_network(cfg: &Config, horizon: Nanos) -> Result<NetProfile, RackError> {
    let n = &cfg.network;
    let base = match &n.trace {
        Some(path) => {
            let f = File::open(path).map_err(|source| RackError::Trace {
                path: path.display().to_string(),
                source,
            })?;
            NetProfile::from_trace(&parse_trace(BufReader::new(f))?)?
        }
        None => NetProfile::lognormal(n.median_ns.unwrap_or(n.class.median_ns()), n.sigma.unwrap_or_else(default_sigma)),
    };
    let mut episodes = n.congestion.clone();
    if let Some(rc) = n.random_congestion {
        let mut rng = stream_rng(cfg.seed, "congestion");
        episodes.extend(random_episodes(rc.rate_per_sec, rc.duration_ns, rc.added_ns, horizon, &mut rng));
    }
    Ok(base.with_episodes(episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::NS_PER_MS;

    fn small(mode: Mode) -> Config {
        let mut c = Config {
            mode,
            duration_ms: 3_000,
            warmup_ms: 500,
            ..Config::default()
        };
        c.topology.servers = 2;
        c.topology.ssds_per_server = 1;
        c.topology.vssds_per_ssd = 2;
        c.gc.check_period_ns = 50 * NS_PER_MS;
        c.workload.arrival = Arrival::Open { rate_per_sec: 800.0 };
        c
    }

    #[test]
    fn runs_and_accounts() {
        for mode in Mode::ALL {
            let out = run(&small(mode), RunOptions { keep_records: true, ..Default::default() }).unwrap();
            let r = &out.report;
            assert!(r.requests.completed > 1000, "{mode:?}: {}", r.requests.completed);
            assert_eq!(r.requests.completed, r.requests.generated);
            assert_eq!(r.safety.additivity_errors, 0);
            assert!(r.consistency.is_clean(), "{mode:?}: {:?}", r.consistency);
            assert_eq!(r.reads.direct + r.reads.redirected + r.reads.blocked, r.requests.reads);
            assert_eq!(out.records.len() as u64, r.requests.completed);
            assert!(r.gc.episodes > 0, "{mode:?} never collected");
        }
    }

    #[test]
    fn deterministic() {
        let c = small(Mode::Rackblox);
        let a = run(&c, RunOptions::default()).unwrap().report;
        let b = run(&c, RunOptions::default()).unwrap().report;
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn dropped_fanout_is_detected() {
        let mut c = small(Mode::Rackblox);
        c.fault.drop_fanout_every = 50;
        let r = run(&c, RunOptions::default()).unwrap().report;
        assert!(r.consistency.mismatched_pages > 0);
    }
}
