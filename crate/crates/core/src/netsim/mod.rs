//! Deterministic discrete-event packet simulator.
//!
//! Time is kept in integer nanoseconds so that event ordering and per-hop
//! delay bookkeeping are exact. Every node owns one FIFO output queue per
//! outgoing link (four ISLs per satellite, a down-link per served station,
//! an up-link per ground station). A packet occupies buffer space from the
//! moment it is enqueued until its transmission completes.

pub mod event;
pub mod packet;
pub mod traffic;

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, Direction, GroundStation, NodeId, Position3D};
use crate::error::{config_err, Error, Result};
use crate::linkmodel::{propagation_delay, transmission_delay, LinkConfig};

pub use event::{Event, EventKind, EventQueue};
pub use packet::{DropCause, HopRecord, LinkKind, Outcome, Packet, PacketRecord};
pub use traffic::{generate_traffic, PacketSpec, SizeClass, TrafficConfig, TrafficGenerator};

/// Simulation time in nanoseconds.
pub type SimTime = u64;

pub fn secs_to_ns(s: f64) -> SimTime {
    (s * 1e9).round() as SimTime
}

pub fn ns_to_secs(t: SimTime) -> f64 {
    t as f64 * 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Seconds of traffic per epoch.
    pub epoch_duration: f64,
    /// Seconds between satellite position updates.
    pub topology_refresh: f64,
    pub link_buffer_bits: u64,
    pub node_buffer_bits: u64,
    pub max_ttl: u32,
    /// Orbital time (seconds) at which simulated time zero starts.
    pub orbit_offset: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epoch_duration: 30.0,
            topology_refresh: 0.1,
            link_buffer_bits: 16_000_000,
            node_buffer_bits: 16_000_000,
            max_ttl: 64,
            orbit_offset: 0.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epoch_duration > 0.0) || !(self.topology_refresh > 0.0) {
            return Err(config_err("epoch duration and topology refresh must be positive"));
        }
        if self.max_ttl == 0 || self.link_buffer_bits == 0 || self.node_buffer_bits == 0 {
            return Err(config_err("ttl and buffer sizes must be positive"));
        }
        Ok(())
    }
}

/// Everything needed to build a simulator for one epoch.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub constellation: Constellation,
    pub stations: Vec<GroundStation>,
    pub links: LinkConfig,
    pub traffic: TrafficConfig,
    pub sim: SimConfig,
    /// Interval of `TrainTick` control events, seconds.
    pub train_interval: Option<f64>,
    /// Interval of `MetricsTick` control events, seconds.
    pub metrics_interval: Option<f64>,
}

/// Routing decisions are delegated to a `Router` at every satellite hop.
pub trait Router {
    /// Picks the outgoing ISL for `packet`, currently held by satellite `sat`.
    fn route(&mut self, net: &NetView<'_>, packet: &Packet, sat: usize) -> Direction;

    /// Called after every topology refresh, including the initial one.
    fn on_topology(&mut self, _net: &NetView<'_>) {}

    /// Called once per packet when it is delivered or dropped.
    fn on_terminal(&mut self, _net: &NetView<'_>, _record: &PacketRecord) {}
}

/// What the last call to [`Simulator::step`] processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Event,
    Train,
    Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_ttl: u64,
    pub dropped_buffer: u64,
    pub dropped_link_refused: u64,
    /// Packets not created because the source station had no access satellite.
    pub skipped_no_access: u64,
    pub in_flight: u64,
    pub events: u64,
    pub decisions: u64,
}

impl Counters {
    pub fn dropped(&self) -> u64 {
        self.dropped_ttl + self.dropped_buffer + self.dropped_link_refused
    }

    pub fn conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped() + self.in_flight
    }
}

#[derive(Debug, Clone)]
struct Entry {
    packet: u64,
    next: NodeId,
    enqueued_at: SimTime,
    tx_estimate: SimTime,
}

#[derive(Debug, Clone)]
struct InService {
    packet: u64,
    next: NodeId,
    size: u64,
    propagation: SimTime,
}

#[derive(Debug, Clone)]
pub struct OutputQueue {
    pub from: NodeId,
    pub kind: LinkKind,
    pub queued_bits: u64,
    pub capacity: u64,
    pub busy_until: SimTime,
    waiting: VecDeque<Entry>,
    waiting_tx: SimTime,
    in_service: Option<InService>,
}

impl OutputQueue {
    fn new(from: NodeId, kind: LinkKind, capacity: u64) -> Self {
        Self {
            from,
            kind,
            queued_bits: 0,
            capacity,
            busy_until: 0,
            waiting: VecDeque::new(),
            waiting_tx: 0,
            in_service: None,
        }
    }

    /// Packets waiting plus the one in service.
    pub fn len(&self) -> usize {
        self.waiting.len() + usize::from(self.in_service.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_idle(&self) -> bool {
        self.in_service.is_none()
    }
}

#[derive(Debug, Clone, Default)]
struct Topology {
    orbit_time: f64,
    positions: Vec<Position3D>,
    stations: Vec<Position3D>,
    access: Vec<Option<usize>>,
    isl_distance: Vec<f64>,
    isl_rate: Vec<f64>,
}

pub struct Simulator {
    constellation: Constellation,
    stations: Vec<GroundStation>,
    links: LinkConfig,
    traffic_cfg: TrafficConfig,
    cfg: SimConfig,
    neighbors: Vec<[usize; 4]>,
    topo: Topology,
    queues: Vec<OutputQueue>,
    node_bits: Vec<u64>,
    packets: Vec<Option<Packet>>,
    events: EventQueue,
    traffic: TrafficGenerator,
    next_spec: Option<PacketSpec>,
    counters: Counters,
    records: Vec<PacketRecord>,
    keep_records: bool,
    trace: Option<Box<dyn Write>>,
    digest: u64,
    end: SimTime,
    refresh: SimTime,
    train_interval: Option<SimTime>,
    metrics_interval: Option<SimTime>,
    topology_fresh: bool,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

fn fnv_fold(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

impl Simulator {
    pub fn new(setup: SimSetup, seed: u64) -> Result<Self> {
        let SimSetup { constellation, stations, links, traffic, sim, train_interval, metrics_interval } = setup;
        sim.validate()?;
        links.validate()?;
        traffic.validate()?;
        if stations.is_empty() {
            return Err(config_err("at least one ground station is required"));
        }
        for s in &stations {
            s.validate()?;
        }
        for iv in [train_interval, metrics_interval].into_iter().flatten() {
            if !(iv > 0.0) {
                return Err(config_err("control intervals must be positive"));
            }
        }
        let n_sats = constellation.len();
        let n_gs = stations.len();
        let neighbors = (0..n_sats).map(|s| constellation.grid_neighbors(s)).collect();

        let mut queues = Vec::with_capacity(n_gs + 4 * n_sats + n_sats * n_gs);
        for g in 0..n_gs {
            queues.push(OutputQueue::new(NodeId::GroundStation(g), LinkKind::Uplink, sim.link_buffer_bits));
        }
        for s in 0..n_sats {
            for d in Direction::ALL {
                queues.push(OutputQueue::new(NodeId::Satellite(s), LinkKind::Isl(d), sim.link_buffer_bits));
            }
        }
        for s in 0..n_sats {
            for _ in 0..n_gs {
                queues.push(OutputQueue::new(NodeId::Satellite(s), LinkKind::Downlink, sim.link_buffer_bits));
            }
        }

        let traffic_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gen = TrafficGenerator::new(&traffic, n_gs, traffic_rng, sim.epoch_duration);
        let next_spec = gen.next();
        let end = secs_to_ns(sim.epoch_duration);
        let refresh = secs_to_ns(sim.topology_refresh);

        let mut simulator = Self {
            constellation,
            stations,
            links,
            traffic_cfg: traffic,
            cfg: sim,
            neighbors,
            topo: Topology::default(),
            queues,
            node_bits: vec![0; n_sats + n_gs],
            packets: Vec::new(),
            events: EventQueue::new(),
            traffic: gen,
            next_spec,
            counters: Counters::default(),
            records: Vec::new(),
            keep_records: true,
            trace: None,
            digest: FNV_OFFSET,
            end,
            refresh,
            train_interval: train_interval.map(secs_to_ns),
            metrics_interval: metrics_interval.map(secs_to_ns),
            topology_fresh: false,
        };
        simulator.refresh_topology()?;
        simulator.events.schedule(refresh, EventKind::TopologyRefresh)?;
        if let Some(spec) = simulator.next_spec {
            simulator.events.schedule(spec.time, EventKind::TrafficTick)?;
        }
        if let Some(iv) = simulator.train_interval {
            simulator.events.schedule(iv, EventKind::TrainTick)?;
        }
        if let Some(iv) = simulator.metrics_interval {
            simulator.events.schedule(iv, EventKind::MetricsTick)?;
        }
        Ok(simulator)
    }

    /// Streams one JSON line per finished packet into `w`.
    pub fn set_trace(&mut self, w: Box<dyn Write>) {
        self.trace = Some(w);
    }

    pub fn set_keep_records(&mut self, keep: bool) {
        self.keep_records = keep;
    }

    pub fn now(&self) -> SimTime {
        self.events.now()
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    pub fn take_records(&mut self) -> Vec<PacketRecord> {
        std::mem::take(&mut self.records)
    }

    /// Running FNV-1a digest of every processed `(time, seq, kind)` triple.
    pub fn event_digest(&self) -> u64 {
        self.digest
    }

    pub fn view(&self) -> NetView<'_> {
        NetView { sim: self }
    }

    pub fn queues(&self) -> &[OutputQueue] {
        &self.queues
    }

    pub fn live_packets(&self) -> impl Iterator<Item = &Packet> {
        self.packets.iter().flatten()
    }

    fn isl_queue(&self, sat: usize, dir: Direction) -> usize {
        self.stations.len() + 4 * sat + dir.index()
    }

    fn downlink_queue(&self, sat: usize, gs: usize) -> usize {
        self.stations.len() * (1 + sat) + 4 * self.constellation.len() + gs
    }

    fn node_index(&self, node: NodeId) -> usize {
        match node {
            NodeId::Satellite(s) => s,
            NodeId::GroundStation(g) => self.constellation.len() + g,
        }
    }

    fn refresh_topology(&mut self) -> Result<()> {
        let t = self.cfg.orbit_offset + ns_to_secs(self.now());
        let positions = self.constellation.propagate(t);
        let r_e = self.constellation.earth_radius();
        let stations: Vec<_> = self.stations.iter().map(|g| g.position(r_e, t)).collect();
        let access = self
            .stations
            .iter()
            .map(|g| self.constellation.access_satellite(g, &positions, t))
            .collect();
        let mut dist = Vec::with_capacity(4 * positions.len());
        let mut rate = Vec::with_capacity(4 * positions.len());
        for (s, nb) in self.neighbors.iter().enumerate() {
            for n in nb {
                let d = positions[s].distance(&positions[*n]);
                dist.push(d);
                rate.push(self.links.isl_rate_at(d));
            }
        }
        self.topo = Topology { orbit_time: t, positions, stations, access, isl_distance: dist, isl_rate: rate };
        self.topology_fresh = true;
        Ok(())
    }

    /// Processes the next event. Returns `None` once the epoch is over.
    pub fn step(&mut self, router: &mut dyn Router) -> Result<Option<Step>> {
        if self.topology_fresh {
            self.topology_fresh = false;
            router.on_topology(&self.view());
        }
        match self.events.peek_time() {
            Some(t) if t < self.end => {}
            _ => return Ok(None),
        }
        let ev = self.events.pop().expect("peeked");
        self.digest = fnv_fold(fnv_fold(fnv_fold(self.digest, ev.time), ev.seq), ev.kind.tag());
        self.counters.events += 1;
        let now = ev.time;
        let step = match ev.kind {
            EventKind::TrafficTick => {
                self.on_traffic(router)?;
                Step::Event
            }
            EventKind::TopologyRefresh => {
                self.refresh_topology()?;
                self.events.schedule(now + self.refresh, EventKind::TopologyRefresh)?;
                router.on_topology(&self.view());
                self.topology_fresh = false;
                Step::Event
            }
            EventKind::PacketArrival { packet, node } => {
                self.on_arrival(packet, node, router)?;
                Step::Event
            }
            EventKind::TxComplete { queue } => {
                self.on_tx_complete(queue)?;
                Step::Event
            }
            EventKind::TrainTick => {
                if let Some(iv) = self.train_interval {
                    self.events.schedule(now + iv, EventKind::TrainTick)?;
                }
                Step::Train
            }
            EventKind::MetricsTick => {
                if let Some(iv) = self.metrics_interval {
                    self.events.schedule(now + iv, EventKind::MetricsTick)?;
                }
                Step::Metrics
            }
        };
        Ok(Some(step))
    }

    /// Runs until the next train or metrics tick, or the end of the epoch.
    pub fn run_until_control(&mut self, router: &mut dyn Router) -> Result<Option<Step>> {
        while let Some(step) = self.step(router)? {
            if step != Step::Event {
                return Ok(Some(step));
            }
        }
        Ok(None)
    }

    /// Runs the whole epoch, ignoring control ticks.
    pub fn run_epoch(&mut self, router: &mut dyn Router) -> Result<()> {
        while self.step(router)?.is_some() {}
        if let Some(w) = self.trace.as_mut() {
            w.flush()?;
        }
        Ok(())
    }

    fn on_traffic(&mut self, router: &mut dyn Router) -> Result<()> {
        let spec = self.next_spec.take().ok_or_else(|| Error::Internal("traffic tick without spec".into()))?;
        self.next_spec = self.traffic.next();
        if let Some(next) = self.next_spec {
            self.events.schedule(next.time.max(self.now()), EventKind::TrafficTick)?;
        }
        let Some(access) = self.topo.access[spec.source] else {
            self.counters.skipped_no_access += 1;
            return Ok(());
        };
        let id = self.packets.len() as u64;
        let pkt = Packet::new(id, spec.source, spec.dest, spec.size_bits, self.now(), self.cfg.max_ttl);
        self.packets.push(Some(pkt));
        self.counters.generated += 1;
        self.counters.in_flight += 1;
        let q = spec.source;
        if !self.enqueue(q, id, NodeId::Satellite(access))? {
            self.finish(id, Outcome::Dropped(DropCause::BufferFull), router)?;
        }
        Ok(())
    }

    fn on_arrival(&mut self, id: u64, node: NodeId, router: &mut dyn Router) -> Result<()> {
        let sat = match node {
            NodeId::GroundStation(_) => return self.finish(id, Outcome::Delivered, router),
            NodeId::Satellite(s) => s,
        };
        let dest = self.packet(id)?.dest;
        if self.topo.access[dest] == Some(sat) {
            let q = self.downlink_queue(sat, dest);
            if !self.enqueue(q, id, NodeId::GroundStation(dest))? {
                self.finish(id, Outcome::Dropped(DropCause::BufferFull), router)?;
            }
            return Ok(());
        }
        let expired = {
            let p = self.packet_mut(id)?;
            p.ttl -= 1;
            p.hop_count += 1;
            p.ttl == 0
        };
        if expired {
            return self.finish(id, Outcome::Dropped(DropCause::TtlExpired), router);
        }
        let pkt = self.packets[id as usize].take().expect("live packet");
        let dir = router.route(&self.view(), &pkt, sat);
        self.packets[id as usize] = Some(pkt);
        self.counters.decisions += 1;
        if !self.view().link_available(sat, dir) {
            return self.finish(id, Outcome::Dropped(DropCause::LinkRefused), router);
        }
        let q = self.isl_queue(sat, dir);
        let next = NodeId::Satellite(self.neighbors[sat][dir.index()]);
        if !self.enqueue(q, id, next)? {
            self.finish(id, Outcome::Dropped(DropCause::BufferFull), router)?;
        }
        Ok(())
    }

    fn link_distance(&self, queue: usize, next: NodeId) -> f64 {
        let q = &self.queues[queue];
        match (q.from, next) {
            (NodeId::Satellite(s), NodeId::Satellite(_)) => match q.kind {
                LinkKind::Isl(d) => self.topo.isl_distance[4 * s + d.index()],
                _ => unreachable!("satellite pair on a non-ISL queue"),
            },
            (NodeId::Satellite(s), NodeId::GroundStation(g)) | (NodeId::GroundStation(g), NodeId::Satellite(s)) => {
                self.topo.positions[s].distance(&self.topo.stations[g])
            }
            (NodeId::GroundStation(_), NodeId::GroundStation(_)) => unreachable!("no station-to-station links"),
        }
    }

    fn link_rate(&self, queue: usize, next: NodeId) -> Result<f64> {
        let q = &self.queues[queue];
        match q.kind {
            LinkKind::Isl(d) => match q.from {
                NodeId::Satellite(s) => Ok(self.topo.isl_rate[4 * s + d.index()]),
                NodeId::GroundStation(_) => Err(Error::Internal("ISL queue owned by a station".into())),
            },
            LinkKind::Uplink | LinkKind::Downlink => self.links.gsl_rate_at(self.link_distance(queue, next)),
        }
    }

    fn tx_ns(&self, bits: u64, rate: f64) -> Result<SimTime> {
        Ok(secs_to_ns(transmission_delay(bits as f64, rate)?))
    }

    /// Appends the packet to an output queue, or returns `false` when either
    /// the link buffer or the node's aggregate buffer cannot hold it.
    fn enqueue(&mut self, queue: usize, id: u64, next: NodeId) -> Result<bool> {
        let now = self.now();
        let size = self.packet(id)?.size_bits;
        let node = self.node_index(self.queues[queue].from);
        let q = &self.queues[queue];
        if q.queued_bits + size > q.capacity || self.node_bits[node] + size > self.cfg.node_buffer_bits {
            return Ok(false);
        }
        let tx_estimate = self.tx_ns(size, self.link_rate(queue, next)?)?;
        let q = &mut self.queues[queue];
        let predicted = q.busy_until.saturating_sub(now) * u64::from(q.in_service.is_some()) + q.waiting_tx;
        q.waiting.push_back(Entry { packet: id, next, enqueued_at: now, tx_estimate });
        q.waiting_tx += tx_estimate;
        q.queued_bits += size;
        let from = q.from;
        let kind = q.kind;
        let idle = q.in_service.is_none();
        self.node_bits[node] += size;
        self.packet_mut(id)?.hops.push(HopRecord {
            from,
            to: next,
            link: kind,
            enqueued_at: now,
            queuing_predicted: predicted,
            queuing: 0,
            transmission: 0,
            propagation: 0,
            started: false,
        });
        if idle {
            self.start_service(queue)?;
        }
        Ok(true)
    }

    fn start_service(&mut self, queue: usize) -> Result<()> {
        let now = self.now();
        let entry = {
            let q = &mut self.queues[queue];
            let e = q.waiting.pop_front().ok_or_else(|| Error::Internal("service on empty queue".into()))?;
            q.waiting_tx -= e.tx_estimate;
            e
        };
        let size = self.packet(entry.packet)?.size_bits;
        let tx = self.tx_ns(size, self.link_rate(queue, entry.next)?)?;
        let prop = secs_to_ns(propagation_delay(self.link_distance(queue, entry.next), self.links.light_speed()));
        let wait = now - entry.enqueued_at;
        {
            let p = self.packet_mut(entry.packet)?;
            let hop = p.hops.last_mut().ok_or_else(|| Error::Internal("queued packet without hop record".into()))?;
            hop.queuing = wait;
            hop.transmission = tx;
            hop.propagation = prop;
            hop.started = true;
            p.cum_queuing += wait;
        }
        let q = &mut self.queues[queue];
        q.in_service = Some(InService { packet: entry.packet, next: entry.next, size, propagation: prop });
        q.busy_until = now + tx;
        self.events.schedule(now + tx, EventKind::TxComplete { queue })?;
        Ok(())
    }

    fn on_tx_complete(&mut self, queue: usize) -> Result<()> {
        let now = self.now();
        let done = self.queues[queue]
            .in_service
            .take()
            .ok_or_else(|| Error::Internal("tx completion on idle link".into()))?;
        let node = self.node_index(self.queues[queue].from);
        self.queues[queue].queued_bits -= done.size;
        self.node_bits[node] -= done.size;
        self.events
            .schedule(now + done.propagation, EventKind::PacketArrival { packet: done.packet, node: done.next })?;
        if self.queues[queue].waiting.is_empty() {
            self.queues[queue].busy_until = now;
        } else {
            self.start_service(queue)?;
        }
        Ok(())
    }

    fn finish(&mut self, id: u64, outcome: Outcome, router: &mut dyn Router) -> Result<()> {
        let pkt = self.packets[id as usize]
            .take()
            .ok_or_else(|| Error::Internal(format!("packet {id} finished twice")))?;
        let record = PacketRecord::from_packet(pkt, self.now(), outcome);
        self.counters.in_flight -= 1;
        match outcome {
            Outcome::Delivered => self.counters.delivered += 1,
            Outcome::Dropped(DropCause::TtlExpired) => self.counters.dropped_ttl += 1,
            Outcome::Dropped(DropCause::BufferFull) => self.counters.dropped_buffer += 1,
            Outcome::Dropped(DropCause::LinkRefused) => self.counters.dropped_link_refused += 1,
        }
        if let Some(w) = self.trace.as_mut() {
            serde_json::to_writer(&mut *w, &record).map_err(|e| Error::Io(e.into()))?;
            w.write_all(b"\n")?;
        }
        router.on_terminal(&self.view(), &record);
        if self.keep_records {
            self.records.push(record);
        }
        Ok(())
    }

    fn packet(&self, id: u64) -> Result<&Packet> {
        self.packets
            .get(id as usize)
            .and_then(|p| p.as_ref())
            .ok_or_else(|| Error::Internal(format!("packet {id} is not live")))
    }

    fn packet_mut(&mut self, id: u64) -> Result<&mut Packet> {
        self.packets
            .get_mut(id as usize)
            .and_then(|p| p.as_mut())
            .ok_or_else(|| Error::Internal(format!("packet {id} is not live")))
    }

    /// Full structural check: conservation, buffer bounds, TTL bookkeeping
    /// and cumulative queuing of every live packet.
    pub fn check_invariants(&self) -> Result<()> {
        if !self.counters.conserved() {
            return Err(Error::Internal(format!("packet conservation violated: {:?}", self.counters)));
        }
        let live = self.packets.iter().flatten().count() as u64;
        if live != self.counters.in_flight {
            return Err(Error::Internal(format!("{live} live packets, counter says {}", self.counters.in_flight)));
        }
        let mut node_bits = vec![0u64; self.node_bits.len()];
        for q in &self.queues {
            let mut bits = q.in_service.as_ref().map_or(0, |s| s.size);
            for e in &q.waiting {
                bits += self.packet(e.packet)?.size_bits;
            }
            if bits != q.queued_bits || bits > q.capacity {
                return Err(Error::Internal(format!("queue at {} holds {bits} bits (recorded {})", q.from, q.queued_bits)));
            }
            node_bits[self.node_index(q.from)] += bits;
        }
        if node_bits != self.node_bits || node_bits.iter().any(|b| *b > self.cfg.node_buffer_bits) {
            return Err(Error::Internal("node buffer accounting mismatch".into()));
        }
        for p in self.packets.iter().flatten() {
            if p.hop_count + p.ttl != p.max_ttl {
                return Err(Error::Internal(format!("packet {} ttl bookkeeping broken", p.id)));
            }
            let q: SimTime = p.hops.iter().map(|h| h.queuing).sum();
            if q != p.cum_queuing {
                return Err(Error::Internal(format!("packet {} cumulative queuing mismatch", p.id)));
            }
        }
        Ok(())
    }
}

/// Read-only view of the network handed to routers.
#[derive(Clone, Copy)]
pub struct NetView<'a> {
    sim: &'a Simulator,
}

impl<'a> NetView<'a> {
    pub fn now(&self) -> SimTime {
        self.sim.now()
    }

    /// Orbital time of the current topology snapshot, seconds.
    pub fn orbit_time(&self) -> f64 {
        self.sim.topo.orbit_time
    }

    pub fn constellation(&self) -> &'a Constellation {
        &self.sim.constellation
    }

    pub fn stations(&self) -> &'a [GroundStation] {
        &self.sim.stations
    }

    pub fn links(&self) -> &'a LinkConfig {
        &self.sim.links
    }

    pub fn num_satellites(&self) -> usize {
        self.sim.constellation.len()
    }

    pub fn sat_position(&self, sat: usize) -> Position3D {
        self.sim.topo.positions[sat]
    }

    pub fn station_position(&self, gs: usize) -> Position3D {
        self.sim.topo.stations[gs]
    }

    pub fn access_satellite(&self, gs: usize) -> Option<usize> {
        self.sim.topo.access[gs]
    }

    pub fn neighbors(&self, sat: usize) -> [usize; 4] {
        self.sim.neighbors[sat]
    }

    /// ISLs are permanent; only a degenerate self-loop is unavailable.
    pub fn link_available(&self, sat: usize, dir: Direction) -> bool {
        self.sim.neighbors[sat][dir.index()] != sat
    }

    pub fn isl_distance(&self, sat: usize, dir: Direction) -> f64 {
        self.sim.topo.isl_distance[4 * sat + dir.index()]
    }

    pub fn isl_rate(&self, sat: usize, dir: Direction) -> f64 {
        self.sim.topo.isl_rate[4 * sat + dir.index()]
    }

    pub fn isl_queue(&self, sat: usize, dir: Direction) -> &'a OutputQueue {
        &self.sim.queues[self.sim.isl_queue(sat, dir)]
    }

    /// Fraction of the link buffer in use.
    pub fn queue_occupancy(&self, sat: usize, dir: Direction) -> f64 {
        let q = self.isl_queue(sat, dir);
        q.queued_bits as f64 / q.capacity as f64
    }

    pub fn max_ttl(&self) -> u32 {
        self.sim.cfg.max_ttl
    }

    pub fn max_packet_bits(&self) -> u64 {
        self.sim.traffic_cfg.max_size()
    }
}
