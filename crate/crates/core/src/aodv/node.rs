use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::log::{LogKind, LogRecord, NodeLog};
use super::packet::{ControlKind, ControlPacket, DataPacket, Packet};
use super::table::{prefers, RouteEntry, RouteState, RoutingTable};
use crate::attacks::{AttackKind, AttackProfile};
use crate::numfmt::sig6;
use crate::sim::SimTime;
use crate::NodeId;

/// Protocol timers and limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AodvParams {
    /// Active routes expire this long after their last use.
    pub active_route_timeout: SimTime,
    /// How long an `(origin, rreq_id)` pair is remembered.
    pub duplicate_horizon: SimTime,
    /// Hop limit for data packets and RREQ propagation.
    pub ttl: u32,
    /// A pending discovery is retried if no route arrived within this time.
    pub discovery_wait: SimTime,
    /// Data packets buffered per destination while discovering.
    pub buffer_cap: usize,
}

impl Default for AodvParams {
    fn default() -> Self {
        AodvParams {
            active_route_timeout: SimTime::from_secs(3.0),
            duplicate_horizon: SimTime::from_secs(5.0),
            ttl: 32,
            discovery_wait: SimTime::from_secs(1.0),
            buffer_cap: 64,
        }
    }
}

/// Side effects the simulation engine must carry out for a node.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Transmit to every current neighbor.
    Broadcast(ControlPacket),
    /// Transmit to one neighbor; adjacency was checked at send time.
    Unicast { to: NodeId, packet: Packet },
    /// A data packet reached its destination.
    Deliver(DataPacket),
    DiscoveryStarted { destination: NodeId },
    RouteEstablished { destination: NodeId },
}

#[derive(Debug, Clone)]
struct Pending {
    started: SimTime,
    buffer: VecDeque<DataPacket>,
}

/// Protocol state of one node.
#[derive(Debug, Clone)]
pub struct AodvNode {
    pub id: NodeId,
    pub params: AodvParams,
    pub own_seq: u64,
    pub(crate) next_rreq_id: u64,
    pub table: RoutingTable,
    seen: BTreeMap<(NodeId, u64), SimTime>,
    pending: BTreeMap<NodeId, Pending>,
    pub log: NodeLog,
    pub attack: Option<AttackProfile>,
    /// Packets swallowed by blackhole behavior. Never written to `log`.
    pub private_drops: u64,
    /// RREPs dropped for lack of a reverse route.
    pub malformed_drops: u64,
}

impl AodvNode {
    pub fn new(id: NodeId, params: AodvParams) -> Self {
        AodvNode {
            id,
            params,
            own_seq: 0,
            next_rreq_id: 0,
            table: RoutingTable::default(),
            seen: BTreeMap::new(),
            pending: BTreeMap::new(),
            log: NodeLog::default(),
            attack: None,
            private_drops: 0,
            malformed_drops: 0,
        }
    }

    pub fn with_attack(mut self, profile: AttackProfile) -> Self {
        self.attack = Some(profile);
        self
    }

    /// The attack behavior in force at `now`, if any.
    pub fn active_attack(&self, now: SimTime) -> Option<AttackKind> {
        self.attack.filter(|a| a.is_active(now)).map(|a| a.kind)
    }

    pub fn has_pending_discovery(&self, dest: NodeId) -> bool {
        self.pending.contains_key(&dest)
    }

    pub fn buffered(&self, dest: NodeId) -> usize {
        self.pending.get(&dest).map_or(0, |p| p.buffer.len())
    }

    pub(crate) fn record(&mut self, r: LogRecord) {
        self.log.push(r);
    }

    /// Application send of a new data packet.
    pub fn originate(
        &mut self,
        now: SimTime,
        dst: NodeId,
        seq: u64,
        size: u32,
        nbrs: &BTreeSet<NodeId>,
    ) -> Vec<Action> {
        let mut acts = Vec::new();
        self.record(LogRecord::new(now, LogKind::DataOrig).origin(self.id).dst(dst).seq(seq));
        let pkt = DataPacket {
            src: self.id,
            dst,
            seq,
            size,
            created: now,
            trace: vec![self.id],
        };
        if dst == self.id {
            acts.push(Action::Deliver(pkt));
            return acts;
        }
        self.route_data(now, pkt, None, nbrs, &mut acts);
        acts
    }

    /// Starts a route discovery for `dest`: fresh RREQ id, own sequence
    /// number bumped, RREQ broadcast with hop count 0.
    pub fn initiate_discovery(&mut self, now: SimTime, dest: NodeId, acts: &mut Vec<Action>) {
        self.own_seq += 1;
        self.next_rreq_id += 1;
        let id = self.next_rreq_id;
        self.seen.insert((self.id, id), now + self.params.duplicate_horizon);
        let dest_seq = self.table.known_seq(dest).unwrap_or(0);
        self.record(LogRecord::new(now, LogKind::DiscInit).origin(self.id).dst(dest));
        self.record(
            LogRecord::new(now, LogKind::RreqSent)
                .origin(self.id)
                .dst(dest)
                .hops(0)
                .seq(dest_seq),
        );
        acts.push(Action::DiscoveryStarted { destination: dest });
        acts.push(Action::Broadcast(ControlPacket::rreq(self.id, dest, id, self.own_seq, dest_seq)));
    }

    /// Entry point for every packet arriving from neighbor `from`.
    pub fn receive(
        &mut self,
        now: SimTime,
        from: NodeId,
        packet: Packet,
        nbrs: &BTreeSet<NodeId>,
    ) -> Vec<Action> {
        let mut acts = Vec::new();
        match packet {
            Packet::Control(c) => match c.kind {
                ControlKind::Rreq => self.handle_rreq(now, from, c, nbrs, &mut acts),
                ControlKind::Rrep => self.handle_rrep(now, from, c, nbrs, &mut acts),
                ControlKind::Rerr => self.handle_rerr(now, from, c, nbrs, &mut acts),
            },
            Packet::Data(d) => self.forward_data(now, from, d, nbrs, &mut acts),
        }
        acts
    }

    pub fn handle_rreq(
        &mut self,
        now: SimTime,
        from: NodeId,
        pkt: ControlPacket,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        self.record(
            LogRecord::new(now, LogKind::RreqRecv)
                .origin(pkt.origin)
                .dst(pkt.destination)
                .hops(pkt.hop_count)
                .seq(pkt.dest_seq),
        );
        let key = (pkt.origin, pkt.rreq_id);
        let duplicate = pkt.origin == self.id || self.seen.get(&key).is_some_and(|&exp| exp > now);
        if duplicate {
            self.record(
                LogRecord::new(now, LogKind::RreqDup)
                    .origin(pkt.origin)
                    .dst(pkt.destination)
                    .hops(pkt.hop_count),
            );
            return;
        }
        self.seen.insert(key, now + self.params.duplicate_horizon);
        self.offer_route(now, pkt.origin, from, pkt.hop_count + 1, pkt.origin_seq);

        if pkt.destination != self.id
            && matches!(self.active_attack(now), Some(AttackKind::Sinkhole | AttackKind::Blackhole))
        {
            let fake = self.sinkhole_on_rreq(&pkt);
            self.send_reply(now, from, fake, nbrs, acts);
            return;
        }

        if pkt.destination == self.id {
            self.own_seq = self.own_seq.max(pkt.dest_seq);
            let rrep = ControlPacket::rrep(pkt.origin, self.id, self.own_seq, 0);
            self.send_reply(now, from, rrep, nbrs, acts);
            return;
        }

        let fresh = self
            .table
            .valid(pkt.destination, now)
            .filter(|r| r.dest_seq_num >= pkt.dest_seq && r.next_hop != from)
            .map(|r| (r.dest_seq_num, r.hop_count));
        if let Some((seq, hops)) = fresh {
            if let Some(e) = self.table.get_mut(pkt.destination) {
                e.precursors.insert(from);
            }
            let rrep = ControlPacket::rrep(pkt.origin, pkt.destination, seq, hops);
            self.send_reply(now, from, rrep, nbrs, acts);
            return;
        }

        if pkt.hop_count + 1 >= self.params.ttl {
            return;
        }
        let mut fwd = pkt;
        fwd.hop_count += 1;
        self.record(
            LogRecord::new(now, LogKind::RreqFwd)
                .origin(fwd.origin)
                .dst(fwd.destination)
                .hops(fwd.hop_count)
                .seq(fwd.dest_seq),
        );
        acts.push(Action::Broadcast(fwd));
    }

    fn send_reply(
        &mut self,
        now: SimTime,
        to: NodeId,
        rrep: ControlPacket,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        if !nbrs.contains(&to) {
            self.handle_link_break(now, to, nbrs, acts);
            return;
        }
        self.record(
            LogRecord::new(now, LogKind::RrepSent)
                .origin(rrep.origin)
                .dst(rrep.destination)
                .hops(rrep.hop_count)
                .seq(rrep.dest_seq),
        );
        acts.push(Action::Unicast {
            to,
            packet: Packet::Control(rrep),
        });
    }

    pub fn handle_rrep(
        &mut self,
        now: SimTime,
        from: NodeId,
        pkt: ControlPacket,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        let known = self.table.known_seq(pkt.destination).unwrap_or(0);
        let delta = pkt.dest_seq as i64 - known as i64;
        self.record(
            LogRecord::new(now, LogKind::RrepRecv)
                .origin(pkt.origin)
                .dst(pkt.destination)
                .hops(pkt.hop_count)
                .seq(pkt.dest_seq)
                .note(format!("delta={delta}")),
        );
        if pkt.destination != self.id {
            self.offer_route(now, pkt.destination, from, pkt.hop_count + 1, pkt.dest_seq);
        }

        if pkt.origin == self.id {
            if self.table.valid(pkt.destination, now).is_some() {
                if let Some(p) = self.pending.remove(&pkt.destination) {
                    acts.push(Action::RouteEstablished {
                        destination: pkt.destination,
                    });
                    for d in p.buffer {
                        self.route_data(now, d, None, nbrs, acts);
                    }
                }
            }
            return;
        }

        let Some(rev) = self.table.valid(pkt.origin, now).map(|r| r.next_hop) else {
            self.malformed_drops += 1;
            return;
        };
        if !nbrs.contains(&rev) {
            self.handle_link_break(now, rev, nbrs, acts);
            return;
        }
        if let Some(e) = self.table.get_mut(pkt.destination) {
            e.precursors.insert(rev);
        }
        if let Some(e) = self.table.get_mut(pkt.origin) {
            e.expiry = e.expiry.max(now + self.params.active_route_timeout);
        }
        let mut fwd = pkt;
        fwd.hop_count += 1;
        self.record(
            LogRecord::new(now, LogKind::RrepFwd)
                .origin(fwd.origin)
                .dst(fwd.destination)
                .hops(fwd.hop_count)
                .seq(fwd.dest_seq),
        );
        acts.push(Action::Unicast {
            to: rev,
            packet: Packet::Control(fwd),
        });
    }

    pub fn handle_rerr(
        &mut self,
        now: SimTime,
        from: NodeId,
        pkt: ControlPacket,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        self.record(
            LogRecord::new(now, LogKind::RerrRecv)
                .origin(from)
                .note(format!("dests={}", pkt.unreachable.len())),
        );
        let mut affected = Vec::new();
        let mut precursors = BTreeSet::new();
        for &(dest, seq) in &pkt.unreachable {
            let Some(e) = self.table.get_mut(dest) else { continue };
            if e.state == RouteState::Active && e.next_hop == from {
                e.state = RouteState::Invalid;
                e.dest_seq_num = e.dest_seq_num.max(seq);
                affected.push((dest, e.dest_seq_num));
                precursors.extend(e.precursors.iter().copied());
                let r = LogRecord::new(now, LogKind::RouteInvalid)
                    .dst(dest)
                    .note("reason=rerr");
                self.record(r);
            }
        }
        if affected.is_empty() {
            return;
        }
        precursors.remove(&from);
        for p in precursors.into_iter().filter(|p| nbrs.contains(p)) {
            self.record(
                LogRecord::new(now, LogKind::RerrFwd)
                    .dst(p)
                    .note(format!("dests={}", affected.len())),
            );
            acts.push(Action::Unicast {
                to: p,
                packet: Packet::Control(ControlPacket::rerr(affected.clone())),
            });
        }
    }

    /// Invalidates every active route through `broken` and reports the lost
    /// destinations to their precursors. A node without precursors only
    /// invalidates locally.
    pub fn handle_link_break(
        &mut self,
        now: SimTime,
        broken: NodeId,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        self.record(LogRecord::new(now, LogKind::LinkBreak).note(format!("nbr={broken}")));
        let mut lost = Vec::new();
        let mut precursors = BTreeSet::new();
        for e in self.table.iter_mut() {
            if e.state == RouteState::Active && e.next_hop == broken {
                e.state = RouteState::Invalid;
                e.dest_seq_num += 1;
                lost.push((e.destination, e.dest_seq_num));
                precursors.extend(e.precursors.iter().copied());
            }
        }
        for &(dest, _) in &lost {
            self.record(
                LogRecord::new(now, LogKind::RouteInvalid)
                    .dst(dest)
                    .note("reason=linkbreak"),
            );
        }
        if lost.is_empty() {
            return;
        }
        precursors.remove(&broken);
        for p in precursors.into_iter().filter(|p| nbrs.contains(p)) {
            self.record(
                LogRecord::new(now, LogKind::RerrSent)
                    .dst(p)
                    .note(format!("dests={}", lost.len())),
            );
            acts.push(Action::Unicast {
                to: p,
                packet: Packet::Control(ControlPacket::rerr(lost.clone())),
            });
        }
    }

    /// Handles a data packet handed over by neighbor `from`.
    pub fn forward_data(
        &mut self,
        now: SimTime,
        from: NodeId,
        mut pkt: DataPacket,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        pkt.trace.push(self.id);
        if pkt.dst == self.id {
            self.record(
                LogRecord::new(now, LogKind::DataRecv)
                    .origin(pkt.src)
                    .dst(pkt.dst)
                    .hops(pkt.trace.len() as u32 - 1)
                    .seq(pkt.seq),
            );
            acts.push(Action::Deliver(pkt));
            return;
        }
        if self.active_attack(now) == Some(AttackKind::Blackhole) {
            self.blackhole_forward(pkt);
            return;
        }
        if pkt.trace.len() as u32 > self.params.ttl {
            self.record(
                LogRecord::new(now, LogKind::DataDrop)
                    .origin(pkt.src)
                    .dst(pkt.dst)
                    .note("reason=ttl"),
            );
            return;
        }
        self.route_data(now, pkt, Some(from), nbrs, acts);
    }

    /// Sends `pkt` along its route. `from` is `None` for packets this node
    /// originated (or buffered as originator).
    fn route_data(
        &mut self,
        now: SimTime,
        pkt: DataPacket,
        from: Option<NodeId>,
        nbrs: &BTreeSet<NodeId>,
        acts: &mut Vec<Action>,
    ) {
        let dst = pkt.dst;
        if let Some(next) = self.table.valid(dst, now).map(|r| r.next_hop) {
            if nbrs.contains(&next) {
                let timeout = self.params.active_route_timeout;
                if let Some(e) = self.table.get_mut(dst) {
                    e.expiry = now + timeout;
                    if let Some(f) = from {
                        e.precursors.insert(f);
                    }
                }
                if from.is_some() {
                    self.record(
                        LogRecord::new(now, LogKind::DataFwd)
                            .origin(pkt.src)
                            .dst(dst)
                            .hops(pkt.trace.len() as u32 - 1)
                            .seq(pkt.seq),
                    );
                }
                acts.push(Action::Unicast {
                    to: next,
                    packet: Packet::Data(pkt),
                });
                return;
            }
            self.handle_link_break(now, next, nbrs, acts);
            if from.is_some() {
                self.record(
                    LogRecord::new(now, LogKind::DataDrop)
                        .origin(pkt.src)
                        .dst(dst)
                        .note("reason=linkbreak"),
                );
                return;
            }
        }
        match from {
            None => self.buffer_and_discover(now, pkt, acts),
            Some(_) if self.active_attack(now) == Some(AttackKind::Sinkhole) => {
                // The attracted flow is kept alive so the sinkhole stays on path.
                self.buffer_and_discover(now, pkt, acts)
            }
            Some(prev) => {
                self.record(
                    LogRecord::new(now, LogKind::DataDrop)
                        .origin(pkt.src)
                        .dst(dst)
                        .note("reason=noroute"),
                );
                if nbrs.contains(&prev) {
                    let seq = self.table.known_seq(dst).unwrap_or(0);
                    self.record(LogRecord::new(now, LogKind::RerrSent).dst(prev).note("dests=1"));
                    acts.push(Action::Unicast {
                        to: prev,
                        packet: Packet::Control(ControlPacket::rerr(vec![(dst, seq)])),
                    });
                }
            }
        }
    }

    fn buffer_and_discover(&mut self, now: SimTime, pkt: DataPacket, acts: &mut Vec<Action>) {
        let dst = pkt.dst;
        let wait = self.params.discovery_wait;
        let restart = match self.pending.get(&dst) {
            None => true,
            Some(p) => now - p.started >= wait,
        };
        let cap = self.params.buffer_cap;
        let pending = self.pending.entry(dst).or_insert_with(|| Pending {
            started: now,
            buffer: VecDeque::new(),
        });
        if restart {
            pending.started = now;
        }
        pending.buffer.push_back(pkt);
        let overflow = if pending.buffer.len() > cap {
            pending.buffer.pop_front()
        } else {
            None
        };
        if let Some(old) = overflow {
            self.record(
                LogRecord::new(now, LogKind::DataDrop)
                    .origin(old.src)
                    .dst(old.dst)
                    .note("reason=buffer"),
            );
        }
        if restart {
            self.initiate_discovery(now, dst, acts);
        }
    }

    /// Installs or improves the route to `dest` learned from a control packet.
    fn offer_route(&mut self, now: SimTime, dest: NodeId, next_hop: NodeId, hops: u32, seq: u64) {
        if dest == self.id {
            return;
        }
        let timeout = self.params.active_route_timeout;
        let candidate = RouteEntry::new(dest, next_hop, hops, seq, now, timeout);
        let kind = match self.table.get_mut(dest) {
            None => Some(LogKind::RouteAdd),
            Some(old) if !old.is_valid(now) => {
                if seq >= old.dest_seq_num {
                    Some(LogKind::RouteAdd)
                } else {
                    None
                }
            }
            Some(old) => {
                if prefers(&candidate, old) {
                    Some(LogKind::RouteUpdate)
                } else {
                    if old.next_hop == next_hop && old.dest_seq_num == seq {
                        old.expiry = old.expiry.max(now + timeout);
                    }
                    None
                }
            }
        };
        let Some(kind) = kind else { return };
        let precursors = self
            .table
            .get(dest)
            .map(|e| e.precursors.clone())
            .unwrap_or_default();
        let mut entry = candidate;
        entry.precursors = precursors;
        self.table.insert(entry);
        self.record(
            LogRecord::new(now, kind)
                .origin(next_hop)
                .dst(dest)
                .hops(hops)
                .seq(seq),
        );
    }

    /// Expires stale routes and duplicate-suppression records.
    pub fn sweep(&mut self, now: SimTime) {
        let mut expired = Vec::new();
        for e in self.table.iter_mut() {
            if e.state == RouteState::Active && e.expiry <= now {
                e.state = RouteState::Invalid;
                expired.push(e.destination);
            }
        }
        for dest in expired {
            self.record(
                LogRecord::new(now, LogKind::RouteInvalid)
                    .dst(dest)
                    .note("reason=expired"),
            );
        }
        self.seen.retain(|_, exp| *exp > now);
    }

    /// Writes the end-of-window state snapshot.
    pub fn snapshot(&mut self, now: SimTime, window_start: SimTime, neighbor_count: usize) {
        self.sweep(now);
        let active = self.table.active_count(now) as u32;
        let mean_hops = self.table.mean_active_hops(now);
        let r = LogRecord::new(now, LogKind::Window)
            .origin(self.id)
            .hops(active)
            .note(format!(
                "start={window_start},nbrs={neighbor_count},mean_hops={}",
                sig6(mean_hops)
            ));
        self.record(r);
    }

    pub fn log_neighbor_change(&mut self, now: SimTime, neighbor: NodeId, added: bool) {
        let kind = if added { LogKind::NbrAdd } else { LogKind::NbrDel };
        self.record(LogRecord::new(now, kind).origin(neighbor));
    }
}
