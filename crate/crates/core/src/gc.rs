//! Server half of coordinated garbage collection: threshold monitoring,
//! the request/reply state machine toward the switch, and the idle-time
//! predictor that drives background collection.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, NS_PER_MS};
use crate::packet::{Body, GcCode, Packet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcMonitorConfig {
    pub enabled: bool,
    pub check_period_ns: Nanos,
    pub soft_threshold: f64,
    pub gc_threshold: f64,
    pub retries: u32,
    /// How long to wait for a reply before re-sending a request.
    pub retry_timeout_ns: Nanos,
    pub bg_idle_threshold_ns: Nanos,
    pub alpha: f64,
    /// A collection episode stops once the free ratio reaches
    /// `soft_threshold + restore_margin`.
    pub restore_margin: f64,
    /// Emit background requests at all.
    pub background: bool,
}

impl Default for GcMonitorConfig {
    fn default() -> Self {
        GcMonitorConfig {
            enabled: true,
            check_period_ns: 100 * NS_PER_MS,
            soft_threshold: 0.35,
            gc_threshold: 0.25,
            retries: 3,
            retry_timeout_ns: 10 * NS_PER_MS,
            bg_idle_threshold_ns: 30 * NS_PER_MS,
            alpha: 0.5,
            restore_margin: 0.10,
            background: true,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GcConfigError {
    #[error("gc_threshold ({gc}) must be below soft_threshold ({soft})")]
    ThresholdOrder { gc: f64, soft: f64 },
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("check period must be positive")]
    Period,
}

impl GcMonitorConfig {
    pub fn validate(&self) -> Result<(), GcConfigError> {
        if !(self.gc_threshold < self.soft_threshold) {
            return Err(GcConfigError::ThresholdOrder {
                gc: self.gc_threshold,
                soft: self.soft_threshold,
            });
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(GcConfigError::Alpha(self.alpha));
        }
        if self.check_period_ns == 0 {
            return Err(GcConfigError::Period);
        }
        Ok(())
    }

    pub fn restore_target(&self) -> f64 {
        (self.soft_threshold + self.restore_margin).min(1.0)
    }
}

/// Exponential smoothing of inter-arrival gaps:
/// `next = round(alpha * last_gap + (1 - alpha) * last_prediction)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdlePredictor {
    alpha: f64,
    last_arrival: Option<u64>,
    prediction: Nanos,
}

impl IdlePredictor {
    pub fn new(alpha: f64) -> Self {
        IdlePredictor {
            alpha,
            last_arrival: None,
            prediction: 0,
        }
    }

    pub fn prediction(&self) -> Nanos {
        self.prediction
    }

    pub fn idle_update(&mut self, gap: Nanos) -> Nanos {
        let p = self.alpha * gap as f64 + (1.0 - self.alpha) * self.prediction as f64;
        self.prediction = p.round() as Nanos;
        self.prediction
    }

    /// Feed a request arrival at absolute time `now_ns`.
    pub fn on_arrival(&mut self, now_ns: u64) -> Nanos {
        let prev = self.last_arrival.replace(now_ns);
        match prev {
            Some(t) => self.idle_update(now_ns.saturating_sub(t)),
            None => self.prediction,
        }
    }
}

/// Which request (if any) a unit should send given its free ratio and idle
/// prediction.
pub fn trigger_gc(free_ratio: f64, predicted_idle: Nanos, cfg: &GcMonitorConfig) -> Option<GcCode> {
    if free_ratio < cfg.gc_threshold {
        Some(GcCode::Regular)
    } else if free_ratio < cfg.soft_threshold {
        Some(GcCode::Soft)
    } else if cfg.background && predicted_idle > cfg.bg_idle_threshold_ns {
        Some(GcCode::Bg)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentState {
    Idle,
    Awaiting {
        code: GcCode,
        attempt: u32,
        pending: BTreeSet<u32>,
        accepted: BTreeSet<u32>,
        delayed: bool,
    },
    /// Permission granted; waiting for earlier reads to drain.
    Granted { code: GcCode },
    Running { code: GcCode },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentAction {
    Nothing,
    /// Send packets and arm a reply timeout for `attempt`.
    Request { packets: Vec<Packet>, attempt: u32 },
    /// Begin collection now, sending `packets` alongside (background GC).
    StartNow { code: GcCode, packets: Vec<Packet> },
    /// Every member was granted.
    Granted { code: GcCode },
    /// Abandon this round; `packets` release members that were accepted.
    Deferred { packets: Vec<Packet> },
    /// Retries exhausted for an undeniable request.
    Forced { code: GcCode },
}

/// GC agent for one flash unit (a single vSSD or a whole channel group).
#[derive(Debug, Clone)]
pub struct GcAgent {
    members: Vec<u32>,
    server: Ipv4Addr,
    switch: Ipv4Addr,
    retries: u32,
    state: AgentState,
}

impl GcAgent {
    pub fn new(members: Vec<u32>, server: Ipv4Addr, switch: Ipv4Addr, retries: u32) -> Self {
        assert!(!members.is_empty());
        GcAgent {
            members,
            server,
            switch,
            retries,
            state: AgentState::Idle,
        }
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn is_idle(&self) -> bool {
        self.state == AgentState::Idle
    }

    /// One `GC_OP` per member.
    pub fn group_gc_request(&self, code: GcCode) -> Vec<Packet> {
        self.members
            .iter()
            .map(|&v| Packet::new(v, self.server, self.switch, Body::Gc(code)))
            .collect()
    }

    /// Evaluate the trigger; only acts when idle.
    pub fn periodic_check(&mut self, free_ratio: f64, predicted_idle: Nanos, cfg: &GcMonitorConfig) -> AgentAction {
        if !self.is_idle() {
            return AgentAction::Nothing;
        }
        match trigger_gc(free_ratio, predicted_idle, cfg) {
            None => AgentAction::Nothing,
            Some(GcCode::Bg) => {
                self.state = AgentState::Running { code: GcCode::Bg };
                AgentAction::StartNow {
                    code: GcCode::Bg,
                    packets: self.group_gc_request(GcCode::Bg),
                }
            }
            Some(code) => self.request(code, 0),
        }
    }

    fn request(&mut self, code: GcCode, attempt: u32) -> AgentAction {
        self.state = AgentState::Awaiting {
            code,
            attempt,
            pending: self.members.iter().copied().collect(),
            accepted: BTreeSet::new(),
            delayed: false,
        };
        AgentAction::Request {
            packets: self.group_gc_request(code),
            attempt,
        }
    }

    pub fn handle_gc_reply(&mut self, reply: &Packet) -> AgentAction {
        let Some(gc) = reply.gc() else {
            return AgentAction::Nothing;
        };
        let AgentState::Awaiting {
            code,
            pending,
            accepted,
            delayed,
            ..
        } = &mut self.state
        else {
            return AgentAction::Nothing;
        };
        if !pending.remove(&reply.vssd_id) {
            return AgentAction::Nothing;
        }
        match gc {
            GcCode::Accept => {
                accepted.insert(reply.vssd_id);
            }
            GcCode::Delay => *delayed = true,
            _ => return AgentAction::Nothing,
        }
        if !pending.is_empty() {
            return AgentAction::Nothing;
        }
        let code = *code;
        if *delayed {
            let packets = accepted
                .iter()
                .map(|&v| Packet::new(v, self.server, self.switch, Body::Gc(GcCode::Finish)))
                .collect();
            self.state = AgentState::Idle;
            AgentAction::Deferred { packets }
        } else {
            self.state = AgentState::Granted { code };
            AgentAction::Granted { code }
        }
    }

    /// A reply timeout for `attempt` fired.
    pub fn on_timeout(&mut self, attempt: u32) -> AgentAction {
        let AgentState::Awaiting { code, attempt: cur, .. } = &self.state else {
            return AgentAction::Nothing;
        };
        if *cur != attempt {
            return AgentAction::Nothing;
        }
        let code = *code;
        if attempt < self.retries {
            return self.request(code, attempt + 1);
        }
        if code == GcCode::Regular {
            self.state = AgentState::Running { code };
            AgentAction::Forced { code }
        } else {
            self.state = AgentState::Idle;
            AgentAction::Nothing
        }
    }

    /// Collection actually began (after drain).
    pub fn started(&mut self) {
        if let AgentState::Granted { code } = self.state {
            self.state = AgentState::Running { code };
        }
    }

    pub fn running_code(&self) -> Option<GcCode> {
        match self.state {
            AgentState::Running { code } | AgentState::Granted { code } => Some(code),
            _ => None,
        }
    }

    /// Collection ended: release every member at the switch.
    pub fn finish(&mut self) -> Vec<Packet> {
        self.state = AgentState::Idle;
        self.group_gc_request(GcCode::Finish)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRV: Ipv4Addr = Ipv4Addr::new(10, 0, 0, 1);
    const SW: Ipv4Addr = Ipv4Addr::new(10, 255, 255, 254);

    fn reply(v: u32, code: GcCode) -> Packet {
        Packet::new(v, SW, SRV, Body::Gc(code))
    }

    #[test]
    fn thresholds() {
        let c = GcMonitorConfig::default();
        assert_eq!(trigger_gc(0.20, 0, &c), Some(GcCode::Regular));
        assert_eq!(trigger_gc(0.30, 0, &c), Some(GcCode::Soft));
        assert_eq!(trigger_gc(0.50, 40 * NS_PER_MS, &c), Some(GcCode::Bg));
        assert_eq!(trigger_gc(0.50, 20 * NS_PER_MS, &c), None);
        assert_eq!(trigger_gc(0.25, 0, &c), Some(GcCode::Soft));
    }

    #[test]
    fn config_validation() {
        let mut c = GcMonitorConfig::default();
        c.validate().unwrap();
        c.gc_threshold = 0.4;
        assert!(c.validate().is_err());
        let c = GcMonitorConfig {
            alpha: 1.5,
            ..Default::default()
        };
        assert_eq!(c.validate(), Err(GcConfigError::Alpha(1.5)));
    }

    #[test]
    fn idle_recurrence() {
        let mut p = IdlePredictor::new(0.5);
        p.idle_update(40 * NS_PER_MS);
        p.idle_update(40 * NS_PER_MS);
        // prev is now 30 ms after two halvings from 0: 20 then 30.
        assert_eq!(p.prediction(), 30 * NS_PER_MS);
        let mut p = IdlePredictor::new(0.5);
        p.prediction = 40 * NS_PER_MS;
        assert_eq!(p.idle_update(20 * NS_PER_MS), 30 * NS_PER_MS);
        let mut p = IdlePredictor::new(1.0);
        p.prediction = 123;
        assert_eq!(p.idle_update(777), 777);
    }

    #[test]
    fn converges_to_constant_gap() {
        let g = 10 * NS_PER_MS;
        let mut p = IdlePredictor::new(0.5);
        for _ in 0..10 {
            p.idle_update(g);
        }
        let err = (p.prediction() as f64 - g as f64).abs() / g as f64;
        assert!(err < 0.01, "{err}");
    }

    #[test]
    fn soft_accept_then_finish() {
        let cfg = GcMonitorConfig::default();
        let mut a = GcAgent::new(vec![4], SRV, SW, 3);
        let AgentAction::Request { packets, attempt: 0 } = a.periodic_check(0.3, 0, &cfg) else {
            panic!()
        };
        assert_eq!(packets[0].gc(), Some(GcCode::Soft));
        assert_eq!(a.handle_gc_reply(&reply(4, GcCode::Accept)), AgentAction::Granted { code: GcCode::Soft });
        a.started();
        let fin = a.finish();
        assert_eq!(fin[0].gc(), Some(GcCode::Finish));
        assert!(a.is_idle());
    }

    #[test]
    fn delay_returns_to_idle() {
        let cfg = GcMonitorConfig::default();
        let mut a = GcAgent::new(vec![4], SRV, SW, 3);
        a.periodic_check(0.3, 0, &cfg);
        assert_eq!(
            a.handle_gc_reply(&reply(4, GcCode::Delay)),
            AgentAction::Deferred { packets: vec![] }
        );
        assert!(a.is_idle());
    }

    #[test]
    fn regular_forced_after_retries() {
        let cfg = GcMonitorConfig::default();
        let mut a = GcAgent::new(vec![4], SRV, SW, 3);
        a.periodic_check(0.2, 0, &cfg);
        for attempt in 0..3 {
            assert!(matches!(a.on_timeout(attempt), AgentAction::Request { .. }));
        }
        assert_eq!(a.on_timeout(3), AgentAction::Forced { code: GcCode::Regular });
        // Stale timeouts are ignored.
        assert_eq!(a.on_timeout(1), AgentAction::Nothing);
    }

    #[test]
    fn group_requires_every_accept() {
        let cfg = GcMonitorConfig::default();
        let mut a = GcAgent::new(vec![1, 2, 3], SRV, SW, 3);
        let AgentAction::Request { packets, .. } = a.periodic_check(0.3, 0, &cfg) else {
            panic!()
        };
        assert_eq!(packets.len(), 3);
        a.handle_gc_reply(&reply(1, GcCode::Accept));
        a.handle_gc_reply(&reply(2, GcCode::Delay));
        let AgentAction::Deferred { packets } = a.handle_gc_reply(&reply(3, GcCode::Accept)) else {
            panic!()
        };
        let released: Vec<u32> = packets.iter().map(|p| p.vssd_id).collect();
        assert_eq!(released, vec![1, 3]);

        a.periodic_check(0.3, 0, &cfg);
        for v in [1, 2] {
            assert_eq!(a.handle_gc_reply(&reply(v, GcCode::Accept)), AgentAction::Nothing);
        }
        assert_eq!(a.handle_gc_reply(&reply(3, GcCode::Accept)), AgentAction::Granted { code: GcCode::Soft });
    }

    #[test]
    fn background_starts_without_approval() {
        let cfg = GcMonitorConfig::default();
        let mut a = GcAgent::new(vec![9], SRV, SW, 3);
        let act = a.periodic_check(0.9, 50 * NS_PER_MS, &cfg);
        assert!(matches!(act, AgentAction::StartNow { code: GcCode::Bg, .. }));
        assert_eq!(a.running_code(), Some(GcCode::Bg));
    }
}
