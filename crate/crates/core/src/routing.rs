//! Shortest-path-first tables and non-learned routers.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::{central_angle, Direction};
use crate::linkmodel::{propagation_delay, transmission_delay};
use crate::netsim::{secs_to_ns, NetView, Packet, Router};

/// Weighted directed graph, weights in nanoseconds.
#[derive(Debug, Clone, Default)]
pub struct GraphSnapshot {
    pub adj: Vec<Vec<(usize, u64)>>,
}

impl GraphSnapshot {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes] }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: u64) {
        self.adj[from].push((to, weight));
    }

    /// Satellites are nodes `0..S`, station `g` is node `S + g`. Edge weight
    /// is propagation plus transmission delay of a `bits`-sized packet at
    /// the current snapshot; queuing is ignored.
    pub fn from_view(view: &NetView<'_>, bits: u64) -> Self {
        let n_sat = view.num_satellites();
        let n_gs = view.stations().len();
        let c = view.links().light_speed();
        let mut g = Self::new(n_sat + n_gs);
        for s in 0..n_sat {
            for d in Direction::ALL {
                if !view.link_available(s, d) {
                    continue;
                }
                let nb = view.neighbors(s)[d.index()];
                let dist = view.isl_distance(s, d);
                let tx = transmission_delay(bits as f64, view.isl_rate(s, d)).unwrap_or(f64::INFINITY);
                g.add_edge(s, nb, edge_weight(dist / c, tx));
            }
        }
        for gs in 0..n_gs {
            if let Some(s) = view.access_satellite(gs) {
                let dist = view.sat_position(s).distance(&view.station_position(gs));
                let rate = view.links().gsl_rate_at(dist).unwrap_or(0.0);
                let tx = transmission_delay(bits as f64, rate).unwrap_or(f64::INFINITY);
                let w = edge_weight(propagation_delay(dist, c), tx);
                g.add_edge(n_sat + gs, s, w);
                g.add_edge(s, n_sat + gs, w);
            }
        }
        g
    }
}

fn edge_weight(prop: f64, tx: f64) -> u64 {
    let w = prop + tx;
    if w.is_finite() {
        secs_to_ns(w).max(1)
    } else {
        u64::MAX / 4
    }
}

/// Shortest-path tree towards one destination.
#[derive(Debug, Clone)]
pub struct SpfTable {
    pub target: usize,
    /// Cost from each node to the target, `None` if unreachable.
    pub dist: Vec<Option<u64>>,
    /// Next node on the shortest path; `None` at the target and when unreachable.
    pub next_hop: Vec<Option<usize>>,
}

impl SpfTable {
    /// Node sequence from `from` to the target, or `None` if unreachable.
    pub fn path(&self, from: usize) -> Option<Vec<usize>> {
        self.dist[from]?;
        let mut path = vec![from];
        let mut cur = from;
        while cur != self.target {
            cur = self.next_hop[cur]?;
            path.push(cur);
            if path.len() > self.dist.len() {
                return None;
            }
        }
        Some(path)
    }
}

/// Dijkstra towards `target` over reversed edges. Among equal-cost next hops
/// the lowest node id wins.
pub fn spf_to(graph: &GraphSnapshot, target: usize) -> SpfTable {
    let n = graph.len();
    let mut rev: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (u, edges) in graph.adj.iter().enumerate() {
        for &(v, w) in edges {
            rev[v].push((u, w));
        }
    }
    let mut dist: Vec<Option<u64>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[target] = Some(0);
    heap.push(Reverse((0u64, target)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if dist[v] != Some(d) {
            continue;
        }
        for &(u, w) in &rev[v] {
            let nd = d.saturating_add(w);
            if dist[u].is_none_or(|old| nd < old) {
                dist[u] = Some(nd);
                heap.push(Reverse((nd, u)));
            }
        }
    }
    let mut next_hop = vec![None; n];
    for (u, edges) in graph.adj.iter().enumerate() {
        if u == target {
            continue;
        }
        let Some(du) = dist[u] else { continue };
        next_hop[u] = edges
            .iter()
            .filter(|&&(v, w)| dist[v].is_some_and(|dv| dv.saturating_add(w) == du))
            .map(|&(v, _)| v)
            .min();
    }
    SpfTable { target, dist, next_hop }
}

/// One table per destination node.
pub fn spf_tables(graph: &GraphSnapshot, targets: &[usize]) -> Vec<SpfTable> {
    targets.iter().map(|&t| spf_to(graph, t)).collect()
}

/// Which way `sat` has to go to reach neighbour `next`.
pub fn direction_to(view: &NetView<'_>, sat: usize, next: usize) -> Option<Direction> {
    Direction::ALL.into_iter().find(|d| view.link_available(sat, *d) && view.neighbors(sat)[d.index()] == next)
}

/// Neighbour with the smallest great-circle distance to the destination
/// station; used when no shortest path exists.
pub fn greedy_direction(view: &NetView<'_>, sat: usize, dest: usize) -> Direction {
    let gs = view.station_position(dest);
    let mut best = (f64::INFINITY, Direction::North);
    for d in Direction::ALL {
        if !view.link_available(sat, d) {
            continue;
        }
        let nb = view.neighbors(sat)[d.index()];
        let a = central_angle(&view.sat_position(nb), &gs);
        if a < best.0 {
            best = (a, d);
        }
    }
    best.1
}

/// Routes along shortest propagation+transmission paths, recomputed at every
/// topology refresh.
#[derive(Debug, Clone, Default)]
pub struct SpfRouter {
    tables: Vec<SpfTable>,
    n_sat: usize,
    /// Decisions made without a path to the destination.
    pub unreachable: u64,
}

impl SpfRouter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tables(&self) -> &[SpfTable] {
        &self.tables
    }
}

impl Router for SpfRouter {
    fn on_topology(&mut self, net: &NetView<'_>) {
        let graph = GraphSnapshot::from_view(net, net.max_packet_bits());
        self.n_sat = net.num_satellites();
        let targets: Vec<usize> = (0..net.stations().len()).map(|g| self.n_sat + g).collect();
        self.tables = spf_tables(&graph, &targets);
    }

    fn route(&mut self, net: &NetView<'_>, packet: &Packet, sat: usize) -> Direction {
        let next = self.tables.get(packet.dest).and_then(|t| t.next_hop[sat]);
        match next.filter(|n| *n < self.n_sat).and_then(|n| direction_to(net, sat, n)) {
            Some(d) => d,
            None => {
                self.unreachable += 1;
                greedy_direction(net, sat, packet.dest)
            }
        }
    }
}

/// Uniformly random choice among available links.
#[derive(Debug, Clone)]
pub struct RandomRouter {
    rng: ChaCha8Rng,
}

impl RandomRouter {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Router for RandomRouter {
    fn route(&mut self, net: &NetView<'_>, _packet: &Packet, sat: usize) -> Direction {
        let avail: Vec<Direction> = Direction::ALL.into_iter().filter(|d| net.link_available(sat, *d)).collect();
        if avail.is_empty() {
            return Direction::North;
        }
        avail[self.rng.random_range(0..avail.len())]
    }
}

/// A routing choice plus optional per-action scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteDecision {
    pub action: Direction,
    pub scores: Option<[f64; 4]>,
}

/// Sampling (training) or argmax (evaluation) over action probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecideMode {
    Sample,
    Greedy,
}

/// Picks an action from a categorical distribution. Ties in greedy mode go
/// to the lowest index.
pub fn decide(probs: &[f64; 4], mode: DecideMode, rng: &mut impl Rng) -> RouteDecision {
    let idx = match mode {
        DecideMode::Greedy => argmax(probs),
        DecideMode::Sample => sample_categorical(probs, rng),
    };
    RouteDecision { action: Direction::from_index(idx).expect("4 actions"), scores: Some(*probs) }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
