use std::collections::{BTreeMap, BTreeSet};

use crate::sim::SimTime;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteState {
    Active,
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_seq_num: u64,
    pub state: RouteState,
    pub expiry: SimTime,
    /// When the information in this entry arrived.
    pub installed: SimTime,
    pub precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    pub fn new(
        destination: NodeId,
        next_hop: NodeId,
        hop_count: u32,
        dest_seq_num: u64,
        now: SimTime,
        lifetime: SimTime,
    ) -> Self {
        RouteEntry {
            destination,
            next_hop,
            hop_count,
            dest_seq_num,
            state: RouteState::Active,
            expiry: now + lifetime,
            installed: now,
            precursors: BTreeSet::new(),
        }
    }

    pub fn is_valid(&self, now: SimTime) -> bool {
        self.state == RouteState::Active && self.expiry > now
    }
}

/// True when `new` should replace `old`: fresher sequence number, or equal
/// freshness and strictly fewer hops. Equal candidates keep the one that
/// arrived first.
pub fn prefers(new: &RouteEntry, old: &RouteEntry) -> bool {
    new.dest_seq_num > old.dest_seq_num
        || (new.dest_seq_num == old.dest_seq_num && new.hop_count < old.hop_count)
}

/// Picks the route AODV settles on among competing replies for one
/// destination: highest destination sequence number, then fewest hops, then
/// earliest arrival. `next_hop` breaks any remaining tie so the result does
/// not depend on candidate order.
///
/// Panics if `candidates` is empty.
pub fn select_route(candidates: &[RouteEntry]) -> &RouteEntry {
    candidates
        .iter()
        .min_by(|a, b| {
            b.dest_seq_num
                .cmp(&a.dest_seq_num)
                .then(a.hop_count.cmp(&b.hop_count))
                .then(a.installed.cmp(&b.installed))
                .then(a.next_hop.cmp(&b.next_hop))
        })
        .expect("select_route needs at least one candidate")
}

#[derive(Debug, Clone, Default)]
pub struct RoutingTable {
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RoutingTable {
    pub fn get(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dest)
    }

    pub fn get_mut(&mut self, dest: NodeId) -> Option<&mut RouteEntry> {
        self.entries.get_mut(&dest)
    }

    pub fn valid(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.entries.get(&dest).filter(|e| e.is_valid(now))
    }

    pub fn insert(&mut self, entry: RouteEntry) {
        self.entries.insert(entry.destination, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut RouteEntry> {
        self.entries.values_mut()
    }

    pub fn active_count(&self, now: SimTime) -> usize {
        self.entries.values().filter(|e| e.is_valid(now)).count()
    }

    pub fn mean_active_hops(&self, now: SimTime) -> f64 {
        let (n, sum) = self
            .entries
            .values()
            .filter(|e| e.is_valid(now))
            .fold((0usize, 0u64), |(n, s), e| (n + 1, s + u64::from(e.hop_count)));
        if n == 0 {
            0.0
        } else {
            sum as f64 / n as f64
        }
    }

    /// Last sequence number recorded for `dest`, valid or not.
    pub fn known_seq(&self, dest: NodeId) -> Option<u64> {
        self.entries.get(&dest).map(|e| e.dest_seq_num)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, hops: u32, installed: u64, next: NodeId) -> RouteEntry {
        let mut e = RouteEntry::new(9, next, hops, seq, SimTime(installed), SimTime(3_000_000));
        e.installed = SimTime(installed);
        e
    }

    #[test]
    fn fresher_sequence_wins_over_shorter_path() {
        let c = [entry(7, 4, 0, 1), entry(5, 3, 0, 2)];
        assert_eq!(select_route(&c).dest_seq_num, 7);
    }

    #[test]
    fn single_candidate_is_itself() {
        let c = [entry(3, 2, 5, 1)];
        assert_eq!(select_route(&c), &c[0]);
    }

    #[test]
    fn equal_sequence_prefers_fewer_hops_in_any_order() {
        // exhaustive over both orderings
        let a = entry(5, 3, 0, 1);
        let b = entry(5, 2, 1, 2);
        for c in [[a.clone(), b.clone()], [b.clone(), a.clone()]] {
            assert_eq!(select_route(&c).hop_count, 2);
        }
    }

    #[test]
    fn full_tie_keeps_earliest_arrival() {
        let c = [entry(5, 2, 10, 4), entry(5, 2, 3, 8)];
        assert_eq!(select_route(&c).next_hop, 8);
    }

    #[test]
    fn prefers_matches_select_route() {
        let old = entry(5, 3, 0, 1);
        assert!(prefers(&entry(6, 9, 1, 2), &old));
        assert!(prefers(&entry(5, 2, 1, 2), &old));
        assert!(!prefers(&entry(5, 3, 1, 2), &old));
        assert!(!prefers(&entry(4, 1, 1, 2), &old));
    }
}
