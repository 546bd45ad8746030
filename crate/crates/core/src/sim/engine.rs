use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::ScenarioConfig;
use super::mobility::{gm_step, GmParams, MOBILITY_TICK};
use super::time::SimTime;
use super::topology::{neighbors, Adjacency};
use super::{NodeState, Role};
use crate::aodv::{Action, AodvNode, AodvParams, DataPacket, LogKind, NodeLog, Packet};
use crate::attacks::{AttackKind, AttackProfile};
use crate::rng::{self, Stream};
use crate::{Error, NodeId, Result};

/// Per-hop transmission latency.
pub const HOP_LATENCY: SimTime = SimTime(2_000);

/// Application sends start this long after time zero.
const TRAFFIC_START: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    WindowClose,
    MobilityTick,
    PacketArrival,
    AppSend,
    AttackTick,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    Window { start: SimTime },
    Mobility,
    Arrival { from: NodeId, packet: Packet },
    AppSend { dst: NodeId, periodic: bool },
    AttackTick,
}

/// One queued event. Events pop in `(time, kind, node, seq)` order, where
/// `seq` is the insertion counter.
#[derive(Debug, Clone)]
pub struct SimEvent {
    pub time: SimTime,
    pub kind: EventKind,
    pub node: NodeId,
    pub seq: u64,
    pub payload: EventPayload,
}

impl SimEvent {
    fn key(&self) -> (SimTime, EventKind, NodeId, u64) {
        (self.time, self.kind, self.node, self.seq)
    }
}

impl PartialEq for SimEvent {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub seq: u64,
    pub created: SimTime,
    /// The source already held a valid route when the packet was created.
    pub after_discovery: bool,
    pub delivered: Option<SimTime>,
    pub trace: Vec<NodeId>,
}

impl PacketRecord {
    pub fn has_loop(&self) -> bool {
        let mut seen = BTreeSet::new();
        !self.trace.iter().all(|n| seen.insert(*n))
    }
}

/// One route discovery started by a benign node for its own traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryRecord {
    pub node: NodeId,
    pub destination: NodeId,
    pub started: SimTime,
    pub active_phase: bool,
    pub attacker_adjacent: bool,
    pub completed: Option<SimTime>,
    /// The installed route passed through an attacker when it completed.
    pub via_attacker: bool,
}

/// Ground-truth bookkeeping. None of it is visible to the nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioStats {
    pub packets: Vec<PacketRecord>,
    pub discoveries: Vec<DiscoveryRecord>,
    pub private_drops: u64,
    pub malformed_drops: u64,
}

impl ScenarioStats {
    /// Delivered fraction of the packets created in `[from, to)`, or `None`
    /// if no packet was created in that span.
    pub fn delivery_ratio(&self, from: SimTime, to: SimTime) -> Option<f64> {
        let mut created = 0usize;
        let mut delivered = 0usize;
        for p in self.packets.iter().filter(|p| p.created >= from && p.created < to) {
            created += 1;
            delivered += usize::from(p.delivered.is_some());
        }
        (created > 0).then(|| delivered as f64 / created as f64)
    }

    pub fn loops(&self) -> usize {
        self.packets.iter().filter(|p| p.delivered.is_some() && p.has_loop()).count()
    }

    /// `(captured, total)` over active-phase discoveries whose originator
    /// had an attacker as a neighbor.
    pub fn sinkhole_capture(&self) -> (usize, usize) {
        let relevant: Vec<_> = self
            .discoveries
            .iter()
            .filter(|d| d.active_phase && d.attacker_adjacent)
            .collect();
        (relevant.iter().filter(|d| d.via_attacker).count(), relevant.len())
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub cfg: ScenarioConfig,
    pub end: SimTime,
    /// Indexed by node id; the last entry is the GBS.
    pub logs: Vec<NodeLog>,
    pub roles: Vec<Role>,
    pub ground_truth: Vec<(NodeId, AttackKind, SimTime)>,
    pub stats: ScenarioStats,
    pub trace: String,
}

impl ScenarioOutput {
    /// RREQ transmissions (originated plus forwarded) at or after `from`.
    pub fn rreq_transmissions(&self, from: SimTime) -> usize {
        self.logs
            .iter()
            .flat_map(|l| &l.records)
            .filter(|r| r.time >= from && matches!(r.kind, LogKind::RreqSent | LogKind::RreqFwd))
            .count()
    }

    pub fn ground_truth_text(&self) -> String {
        let mut out = String::new();
        for (id, kind, from) in &self.ground_truth {
            let _ = writeln!(out, "{id} {kind} {from}");
        }
        out
    }

    pub fn stats_text(&self) -> String {
        let s = &self.stats;
        let created = s.packets.len();
        let delivered = s.packets.iter().filter(|p| p.delivered.is_some()).count();
        let (captured, adjacent) = s.sinkhole_capture();
        let mut out = String::new();
        let _ = writeln!(out, "packets_created={created}");
        let _ = writeln!(out, "packets_delivered={delivered}");
        let _ = writeln!(out, "looped_packets={}", s.loops());
        let _ = writeln!(out, "discoveries={}", s.discoveries.len());
        let _ = writeln!(out, "discoveries_attacker_adjacent={adjacent}");
        let _ = writeln!(out, "discoveries_via_attacker={captured}");
        let _ = writeln!(out, "private_drops={}", s.private_drops);
        let _ = writeln!(out, "malformed_drops={}", s.malformed_drops);
        let _ = writeln!(out, "rreq_transmissions={}", self.rreq_transmissions(SimTime::ZERO));
        out
    }

    /// Writes `scenario.cfg`, `node_###.log`, `ground_truth.txt`,
    /// `trace.log` and `stats.txt` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        write("scenario.cfg", &self.cfg.render())?;
        for (id, log) in self.logs.iter().enumerate() {
            write(&format!("node_{id:03}.log"), &log.render(self.end))?;
        }
        write("ground_truth.txt", &self.ground_truth_text())?;
        write("trace.log", &self.trace)?;
        write("stats.txt", &self.stats_text())
    }
}

/// The simulated network: node kinematics, protocol state and event queue.
pub struct Network {
    cfg: ScenarioConfig,
    params: AodvParams,
    states: Vec<NodeState>,
    nodes: Vec<AodvNode>,
    adj: Adjacency,
    queue: BinaryHeap<Reverse<SimEvent>>,
    next_seq: u64,
    now: SimTime,
    end: SimTime,
    mobility_rng: Stream,
    flood_rngs: BTreeMap<NodeId, Stream>,
    attackers: BTreeSet<NodeId>,
    data_seq: Vec<u64>,
    packet_index: BTreeMap<(NodeId, u64), usize>,
    stats: ScenarioStats,
    trace: String,
}

impl Network {
    /// Builds a full scenario: roles, initial placement, periodic mobility,
    /// traffic, window snapshots and attack ticks.
    pub fn new(cfg: ScenarioConfig) -> Result<Network> {
        cfg.validate()?;
        let n = cfg.node_count;
        let gbs = cfg.gbs_id();
        let mut roles = vec![Role::Relay; n + 1];
        roles[gbs as usize] = Role::Gbs;

        let mut traffic_rng = rng::stream(cfg.seed, "traffic", 0);
        let mut order: Vec<NodeId> = (0..n as NodeId).collect();
        order.shuffle(&mut traffic_rng);
        let pairs: Vec<(NodeId, NodeId)> = (0..cfg.traffic_pairs)
            .map(|i| (order[2 * i], order[2 * i + 1]))
            .collect();
        for &(s, d) in &pairs {
            roles[s as usize] = Role::Source;
            roles[d as usize] = Role::Destination;
        }

        // The permutation depends on the seed only, so attacker sets are
        // nested across ratios and shared across attack types.
        let mut relays: Vec<NodeId> = (0..n as NodeId).filter(|&i| roles[i as usize] == Role::Relay).collect();
        relays.shuffle(&mut rng::stream(cfg.seed, "attackers", 0));
        let profile = cfg.attack_profile();
        let mut attackers = BTreeSet::new();
        if let Some(p) = profile {
            p.validate()?;
            attackers.extend(relays.iter().take(cfg.attacker_count()).copied());
        }
        for &a in &attackers {
            roles[a as usize] = Role::Attacker;
        }

        let mut place = rng::stream(cfg.seed, "placement", 0);
        let center = [cfg.area[0] / 2.0, cfg.area[1] / 2.0, cfg.area[2] / 2.0];
        let states: Vec<NodeState> = (0..=n)
            .map(|i| {
                let role = roles[i];
                if role == Role::Gbs {
                    return NodeState {
                        id: i as NodeId,
                        position: center,
                        speed: 0.0,
                        direction: 0.0,
                        pitch: 0.0,
                        mean_direction: 0.0,
                        role,
                    };
                }
                let position = [
                    place.random_range(0.0..=cfg.area[0]),
                    place.random_range(0.0..=cfg.area[1]),
                    place.random_range(0.0..=cfg.area[2]),
                ];
                let direction = place.random_range(-PI..PI);
                NodeState {
                    id: i as NodeId,
                    position,
                    speed: cfg.mean_speed,
                    direction,
                    pitch: 0.0,
                    mean_direction: direction,
                    role,
                }
            })
            .collect();

        let params = AodvParams::default();
        let nodes: Vec<AodvNode> = (0..=n)
            .map(|i| {
                let node = AodvNode::new(i as NodeId, params);
                match profile {
                    Some(p) if attackers.contains(&(i as NodeId)) => node.with_attack(p),
                    _ => node,
                }
            })
            .collect();

        let end = cfg.total_duration();
        let mut net = Network {
            params,
            states,
            nodes,
            adj: vec![BTreeSet::new(); n + 1],
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            end,
            mobility_rng: rng::stream(cfg.seed, "mobility", 0),
            flood_rngs: BTreeMap::new(),
            attackers,
            data_seq: vec![0; n + 1],
            packet_index: BTreeMap::new(),
            stats: ScenarioStats::default(),
            trace: String::new(),
            cfg,
        };
        net.refresh_adjacency();

        let tick = SimTime::from_secs(MOBILITY_TICK);
        if tick <= end {
            net.push(tick, EventKind::MobilityTick, 0, EventPayload::Mobility);
        }
        let warmup = SimTime::from_secs(net.cfg.warmup);
        let len = SimTime::from_secs(net.cfg.window_len);
        if warmup + len <= end {
            net.push(warmup + len, EventKind::WindowClose, 0, EventPayload::Window { start: warmup });
        }
        let interval = 1.0 / net.cfg.packet_rate;
        for &(s, d) in &pairs {
            let offset = traffic_rng.random_range(0.0..interval);
            let first = SimTime::from_secs(TRAFFIC_START + offset);
            if first < end {
                net.push(first, EventKind::AppSend, s, EventPayload::AppSend { dst: d, periodic: true });
            }
        }
        if let Some(p) = profile.filter(|p| p.kind == AttackKind::Flooding) {
            for a in net.attackers.clone() {
                net.flood_rngs.insert(a, rng::stream(net.cfg.seed, "flood", a as u64));
                if p.active_from < end {
                    net.push(p.active_from, EventKind::AttackTick, a, EventPayload::AttackTick);
                }
            }
        }
        Ok(net)
    }

    /// A static network at fixed positions with no background traffic,
    /// mobility, windows or attackers. Used for scripted replays.
    pub fn fixed(cfg: ScenarioConfig, positions: &[[f64; 3]]) -> Network {
        let n = positions.len();
        let params = AodvParams::default();
        let states = positions
            .iter()
            .enumerate()
            .map(|(i, &position)| NodeState {
                id: i as NodeId,
                position,
                speed: 0.0,
                direction: 0.0,
                pitch: 0.0,
                mean_direction: 0.0,
                role: Role::Relay,
            })
            .collect();
        let mut net = Network {
            params,
            states,
            nodes: (0..n).map(|i| AodvNode::new(i as NodeId, params)).collect(),
            adj: vec![BTreeSet::new(); n],
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            end: SimTime(u64::MAX),
            mobility_rng: rng::stream(cfg.seed, "mobility", 0),
            flood_rngs: BTreeMap::new(),
            attackers: BTreeSet::new(),
            data_seq: vec![0; n],
            packet_index: BTreeMap::new(),
            stats: ScenarioStats::default(),
            trace: String::new(),
            cfg,
        };
        net.refresh_adjacency();
        net
    }

    /// Turns `id` into an attacker in a scripted network.
    pub fn set_attacker(&mut self, id: NodeId, profile: AttackProfile) {
        self.nodes[id as usize].attack = Some(profile);
        self.states[id as usize].role = Role::Attacker;
        self.attackers.insert(id);
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn adjacency(&self) -> &Adjacency {
        &self.adj
    }

    pub fn node(&self, id: NodeId) -> &AodvNode {
        &self.nodes[id as usize]
    }

    pub fn attackers(&self) -> &BTreeSet<NodeId> {
        &self.attackers
    }

    pub fn stats(&self) -> &ScenarioStats {
        &self.stats
    }

    pub fn set_position(&mut self, id: NodeId, position: [f64; 3]) {
        self.states[id as usize].position = position;
        self.refresh_adjacency();
    }

    /// Schedules a single application send.
    pub fn schedule_app_send(&mut self, at: SimTime, src: NodeId, dst: NodeId) {
        self.push(at, EventKind::AppSend, src, EventPayload::AppSend { dst, periodic: false });
    }

    /// Processes every event with time `<= t`.
    pub fn run_until(&mut self, t: SimTime) {
        while let Some(Reverse(ev)) = self.queue.peek() {
            if ev.time > t {
                break;
            }
            let Some(Reverse(ev)) = self.queue.pop() else { break };
            self.now = ev.time;
            self.dispatch(ev);
        }
        self.now = self.now.max(t);
    }

    /// Runs to the scenario end and collects the output.
    pub fn run(mut self) -> ScenarioOutput {
        let end = self.end;
        self.run_until(end);
        self.finish()
    }

    /// Collects the output at the current time.
    pub fn finish(self) -> ScenarioOutput {
        let mut stats = self.stats;
        for n in &self.nodes {
            stats.private_drops += n.private_drops;
            stats.malformed_drops += n.malformed_drops;
        }
        let ground_truth = self
            .nodes
            .iter()
            .filter_map(|n| n.attack.map(|a| (n.id, a.kind, a.active_from)))
            .collect();
        ScenarioOutput {
            end: self.now,
            roles: self.states.iter().map(|s| s.role).collect(),
            logs: self.nodes.into_iter().map(|n| n.log).collect(),
            ground_truth,
            stats,
            trace: self.trace,
            cfg: self.cfg,
        }
    }

    fn push(&mut self, time: SimTime, kind: EventKind, node: NodeId, payload: EventPayload) {
        self.next_seq += 1;
        self.queue.push(Reverse(SimEvent {
            time,
            kind,
            node,
            seq: self.next_seq,
            payload,
        }));
    }

    fn dispatch(&mut self, ev: SimEvent) {
        let now = self.now;
        match ev.payload {
            EventPayload::Mobility => {
                self.move_nodes();
                let next = now + SimTime::from_secs(MOBILITY_TICK);
                if next <= self.end {
                    self.push(next, EventKind::MobilityTick, 0, EventPayload::Mobility);
                }
            }
            EventPayload::Window { start } => {
                for (node, nbrs) in self.nodes.iter_mut().zip(&self.adj) {
                    node.snapshot(now, start, nbrs.len());
                }
                let len = SimTime::from_secs(self.cfg.window_len);
                if now + len <= self.end {
                    self.push(now + len, EventKind::WindowClose, 0, EventPayload::Window { start: now });
                }
            }
            EventPayload::Arrival { from, packet } => {
                let to = ev.node;
                let acts = self.nodes[to as usize].receive(now, from, packet, &self.adj[to as usize]);
                self.apply(to, acts);
            }
            EventPayload::AppSend { dst, periodic } => {
                let src = ev.node;
                self.app_send(src, dst);
                if periodic {
                    let next = now + SimTime::from_secs(1.0 / self.cfg.packet_rate);
                    if next < self.end {
                        self.push(next, EventKind::AppSend, src, EventPayload::AppSend { dst, periodic });
                    }
                }
            }
            EventPayload::AttackTick => {
                let a = ev.node;
                let candidates: Vec<NodeId> = (0..self.nodes.len() as NodeId).collect();
                let Some(rng) = self.flood_rngs.get_mut(&a) else { return };
                let acts = self.nodes[a as usize].flooding_tick(now, &candidates, rng);
                if let Some(crate::aodv::Action::Broadcast(c)) = acts.first() {
                    let _ = writeln!(self.trace, "{now} FLOOD {a} {}", c.destination);
                }
                self.apply(a, acts);
                if let Some(p) = self.nodes[a as usize].attack {
                    let next = now + p.flood_period;
                    if next < self.end {
                        self.push(next, EventKind::AttackTick, a, EventPayload::AttackTick);
                    }
                }
            }
        }
    }

    fn app_send(&mut self, src: NodeId, dst: NodeId) {
        let now = self.now;
        let seq = self.data_seq[src as usize];
        self.data_seq[src as usize] += 1;
        let after_discovery = self.nodes[src as usize].table.valid(dst, now).is_some();
        self.packet_index.insert((src, seq), self.stats.packets.len());
        self.stats.packets.push(PacketRecord {
            src,
            dst,
            seq,
            created: now,
            after_discovery,
            delivered: None,
            trace: Vec::new(),
        });
        let _ = writeln!(self.trace, "{now} ORIG {src} {dst} {seq}");
        let size = self.cfg.packet_size;
        let acts = self.nodes[src as usize].originate(now, dst, seq, size, &self.adj[src as usize]);
        self.apply(src, acts);
    }

    fn apply(&mut self, node: NodeId, acts: Vec<Action>) {
        let now = self.now;
        let arrive = now + HOP_LATENCY;
        for act in acts {
            match act {
                Action::Broadcast(c) => {
                    let nbrs: Vec<NodeId> = self.adj[node as usize].iter().copied().collect();
                    for nb in nbrs {
                        let payload = EventPayload::Arrival {
                            from: node,
                            packet: Packet::Control(c.clone()),
                        };
                        self.push(arrive, EventKind::PacketArrival, nb, payload);
                    }
                }
                Action::Unicast { to, packet } => {
                    self.push(arrive, EventKind::PacketArrival, to, EventPayload::Arrival { from: node, packet });
                }
                Action::Deliver(pkt) => self.record_delivery(pkt),
                Action::DiscoveryStarted { destination } => {
                    if self.attackers.contains(&node) {
                        continue;
                    }
                    let active_phase = self.nodes.iter().any(|n| n.active_attack(now).is_some());
                    let attacker_adjacent = self.adj[node as usize].iter().any(|n| self.attackers.contains(n));
                    let _ = writeln!(self.trace, "{now} DISC {node} {destination}");
                    self.stats.discoveries.push(DiscoveryRecord {
                        node,
                        destination,
                        started: now,
                        active_phase,
                        attacker_adjacent,
                        completed: None,
                        via_attacker: false,
                    });
                }
                Action::RouteEstablished { destination } => {
                    let via = self.route_via_attacker(node, destination);
                    let open = self
                        .stats
                        .discoveries
                        .iter_mut()
                        .rev()
                        .find(|d| d.node == node && d.destination == destination && d.completed.is_none());
                    if let Some(d) = open {
                        d.completed = Some(now);
                        d.via_attacker = via;
                        let _ = writeln!(self.trace, "{now} ROUTE {node} {destination} via_attacker={via}");
                    }
                }
            }
        }
    }

    fn record_delivery(&mut self, pkt: DataPacket) {
        let now = self.now;
        let _ = writeln!(
            self.trace,
            "{now} DELIV {} {} {} hops={}",
            pkt.src,
            pkt.dst,
            pkt.seq,
            pkt.trace.len() - 1
        );
        if let Some(&i) = self.packet_index.get(&(pkt.src, pkt.seq)) {
            let rec = &mut self.stats.packets[i];
            if rec.delivered.is_none() {
                rec.delivered = Some(now);
                rec.trace = pkt.trace;
            }
        }
    }

    /// Follows next-hop pointers from `src` toward `dst` through the nodes'
    /// current tables.
    fn route_via_attacker(&self, src: NodeId, dst: NodeId) -> bool {
        let mut cur = src;
        for _ in 0..self.params.ttl {
            let Some(e) = self.nodes[cur as usize].table.valid(dst, self.now) else {
                return false;
            };
            if self.attackers.contains(&e.next_hop) {
                return true;
            }
            if e.next_hop == dst {
                return false;
            }
            cur = e.next_hop;
        }
        false
    }

    fn move_nodes(&mut self) {
        let p = GmParams {
            alpha: self.cfg.gm_alpha,
            mean_speed: self.cfg.mean_speed,
            tick: MOBILITY_TICK,
            area: self.cfg.area,
        };
        for s in self.states.iter_mut().filter(|s| s.role != Role::Gbs) {
            // Config validation guarantees a legal alpha and finite state.
            if let Ok(next) = gm_step(s, &p, &mut self.mobility_rng) {
                *s = next;
            }
        }
        self.refresh_adjacency();
    }

    fn refresh_adjacency(&mut self) {
        let positions: Vec<[f64; 3]> = self.states.iter().map(|s| s.position).collect();
        let next = neighbors(&positions, self.cfg.tx_range);
        let now = self.now;
        for (i, (old, new)) in self.adj.iter().zip(&next).enumerate() {
            let node = &mut self.nodes[i];
            for &gone in old.difference(new) {
                node.log_neighbor_change(now, gone, false);
            }
            for &added in new.difference(old) {
                node.log_neighbor_change(now, added, true);
            }
        }
        self.adj = next;
    }
}

/// Simulates a scenario from start to end.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    Ok(Network::new(cfg.clone())?.run())
}
