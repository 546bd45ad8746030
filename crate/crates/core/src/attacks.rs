//! Attacker behaviors layered on [`AodvNode`]: sinkhole route fabrication,
//! blackhole data dropping and periodic RREQ flooding. Every behavior is
//! inert before the profile's `active_from`.

use std::fmt;

use rand::Rng;

use crate::aodv::{Action, AodvNode, ControlPacket, DataPacket, LogKind, LogRecord};
use crate::sim::SimTime;
use crate::{Error, NodeId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackKind {
    Sinkhole,
    Blackhole,
    Flooding,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Sinkhole => "sinkhole",
            AttackKind::Blackhole => "blackhole",
            AttackKind::Flooding => "flooding",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackProfile {
    pub kind: AttackKind,
    /// Added to the requested sequence number in fabricated RREPs.
    pub seq_inflation: u64,
    /// RREQs per flooding tick.
    pub flood_burst: u32,
    pub flood_period: SimTime,
    pub active_from: SimTime,
}

impl AttackProfile {
    pub fn validate(&self) -> Result<()> {
        if self.seq_inflation < 1 {
            return Err(Error::config("seq_inflation", "must be at least 1"));
        }
        if self.flood_burst < 1 {
            return Err(Error::config("flood_burst", "must be at least 1"));
        }
        if self.flood_period == SimTime::ZERO {
            return Err(Error::config("flood_period", "must be positive"));
        }
        Ok(())
    }

    pub fn is_active(&self, now: SimTime) -> bool {
        now >= self.active_from
    }
}

impl AodvNode {
    /// Fabricated reply to a route request: one hop away, with a sequence
    /// number inflated past anything the real destination could answer.
    pub fn sinkhole_on_rreq(&self, rreq: &ControlPacket) -> ControlPacket {
        let inflation = self.attack.map_or(0, |a| a.seq_inflation);
        ControlPacket::rrep(rreq.origin, rreq.destination, rreq.dest_seq + inflation, 1)
    }

    /// Silently discards a data packet. Only the private counter changes.
    pub fn blackhole_forward(&mut self, _pkt: DataPacket) {
        self.private_drops += 1;
    }

    /// Emits one burst of RREQs toward a destination drawn uniformly from
    /// `candidates` (the attacker itself is skipped). Each RREQ carries a
    /// fresh id so neighbors treat every one as new.
    pub fn flooding_tick<R: Rng + ?Sized>(
        &mut self,
        now: SimTime,
        candidates: &[NodeId],
        rng: &mut R,
    ) -> Vec<Action> {
        let Some(profile) = self.attack.filter(|a| a.kind == AttackKind::Flooding && a.is_active(now)) else {
            return Vec::new();
        };
        let others: Vec<NodeId> = candidates.iter().copied().filter(|&c| c != self.id).collect();
        if others.is_empty() {
            return Vec::new();
        }
        let dest = others[rng.random_range(0..others.len())];
        let mut acts = Vec::with_capacity(profile.flood_burst as usize);
        for _ in 0..profile.flood_burst {
            self.own_seq += 1;
            self.next_rreq_id += 1;
            let dest_seq = self.table.known_seq(dest).unwrap_or(0);
            self.record(
                LogRecord::new(now, LogKind::RreqSent)
                    .origin(self.id)
                    .dst(dest)
                    .hops(0)
                    .seq(dest_seq)
                    .note("flood"),
            );
            acts.push(Action::Broadcast(ControlPacket::rreq(
                self.id,
                dest,
                self.next_rreq_id,
                self.own_seq,
                dest_seq,
            )));
        }
        acts
    }
}
