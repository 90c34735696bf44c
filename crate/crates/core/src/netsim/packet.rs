use serde::{Deserialize, Serialize};

use crate::constellation::{Direction, NodeId};

use super::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Uplink,
    Isl(Direction),
    Downlink,
}

/// Delays of one hop, integer nanoseconds.
///
/// The record is opened when the packet is enqueued (`queuing_predicted` is
/// the backlog ahead of it at that instant) and completed when transmission
/// starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub link: LinkKind,
    pub enqueued_at: SimTime,
    pub queuing_predicted: SimTime,
    pub queuing: SimTime,
    pub transmission: SimTime,
    pub propagation: SimTime,
    pub started: bool,
}

impl HopRecord {
    pub fn total(&self) -> SimTime {
        self.queuing + self.transmission + self.propagation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    /// Source ground-station index.
    pub source: usize,
    /// Destination ground-station index.
    pub dest: usize,
    pub size_bits: u64,
    pub created: SimTime,
    pub ttl: u32,
    pub max_ttl: u32,
    pub hop_count: u32,
    pub cum_queuing: SimTime,
    pub hops: Vec<HopRecord>,
}

impl Packet {
    pub fn new(id: u64, source: usize, dest: usize, size_bits: u64, created: SimTime, max_ttl: u32) -> Self {
        Self {
            id,
            source,
            dest,
            size_bits,
            created,
            ttl: max_ttl,
            max_ttl,
            hop_count: 0,
            cum_queuing: 0,
            hops: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    TtlExpired,
    BufferFull,
    LinkRefused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    Dropped(DropCause),
}

/// Final record of a packet that left the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub id: u64,
    pub source: usize,
    pub dest: usize,
    pub size_bits: u64,
    pub created: SimTime,
    pub finished: SimTime,
    pub outcome: Outcome,
    pub hop_count: u32,
    pub cum_queuing: SimTime,
    pub hops: Vec<HopRecord>,
}

impl PacketRecord {
    pub fn from_packet(p: Packet, finished: SimTime, outcome: Outcome) -> Self {
        Self {
            id: p.id,
            source: p.source,
            dest: p.dest,
            size_bits: p.size_bits,
            created: p.created,
            finished,
            outcome,
            hop_count: p.hop_count,
            cum_queuing: p.cum_queuing,
            hops: p.hops,
        }
    }

    pub fn delivered(&self) -> bool {
        self.outcome == Outcome::Delivered
    }

    pub fn e2e(&self) -> SimTime {
        self.finished - self.created
    }

    pub fn propagation(&self) -> SimTime {
        self.hops.iter().map(|h| h.propagation).sum()
    }

    pub fn transmission(&self) -> SimTime {
        self.hops.iter().map(|h| h.transmission).sum()
    }
}
