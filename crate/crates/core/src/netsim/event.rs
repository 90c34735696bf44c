//! Deterministic event queue ordered by `(time, seq)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::constellation::NodeId;
use crate::error::{Error, Result};

use super::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    PacketArrival { packet: u64, node: NodeId },
    TxComplete { queue: usize },
    TrafficTick,
    TopologyRefresh,
    TrainTick,
    MetricsTick,
}

impl EventKind {
    pub(crate) fn tag(&self) -> u64 {
        match self {
            EventKind::PacketArrival { packet, node } => {
                let n = match node {
                    NodeId::Satellite(i) => *i as u64,
                    NodeId::GroundStation(i) => (1 << 40) | *i as u64,
                };
                (packet << 8) ^ (n << 3) ^ 1
            }
            EventKind::TxComplete { queue } => ((*queue as u64) << 3) ^ 2,
            EventKind::TrafficTick => 3,
            EventKind::TopologyRefresh => 4,
            EventKind::TrainTick => 5,
            EventKind::MetricsTick => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(SimTime, u64, EventKind)>>,
    next_seq: u64,
    now: SimTime,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Inserts an event. Scheduling into the past is a simulator bug.
    pub fn schedule(&mut self, time: SimTime, kind: EventKind) -> Result<u64> {
        if time < self.now {
            return Err(Error::Internal(format!(
                "event {kind:?} scheduled at {time} ns, before current time {} ns",
                self.now
            )));
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse((time, seq, kind)));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse((t, _, _))| *t)
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse((time, seq, kind)) = self.heap.pop()?;
        self.now = time;
        Some(Event { time, seq, kind })
    }
}
