use std::collections::{BTreeSet, VecDeque};

use crate::NodeId;

pub type Adjacency = Vec<BTreeSet<NodeId>>;

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Range-disc connectivity: `i` and `j` are adjacent iff they are distinct
/// and at most `range` meters apart. Index `i` of the result is node `i`.
pub fn neighbors(positions: &[[f64; 3]], range: f64) -> Adjacency {
    let mut adj = vec![BTreeSet::new(); positions.len()];
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            if distance(&positions[i], &positions[j]) <= range {
                adj[i].insert(j as NodeId);
                adj[j].insert(i as NodeId);
            }
        }
    }
    adj
}

/// Nodes reachable from `from`, by breadth-first search.
pub fn reachable(adj: &Adjacency, from: NodeId) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for &m in &adj[n as usize] {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

pub fn is_connected(adj: &Adjacency) -> bool {
    adj.is_empty() || reachable(adj, 0).len() == adj.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_distance_is_adjacent() {
        let adj = neighbors(&[[0.0, 0.0, 0.0], [250.0, 0.0, 0.0]], 250.0);
        assert!(adj[0].contains(&1));
    }

    #[test]
    fn single_node_has_no_neighbors() {
        let adj = neighbors(&[[1.0, 2.0, 3.0]], 250.0);
        assert!(adj[0].is_empty());
    }

    #[test]
    fn collinear_chain() {
        let pos = [[0.0, 0.0, 0.0], [200.0, 0.0, 0.0], [400.0, 0.0, 0.0]];
        let adj = neighbors(&pos, 250.0);
        // brute-force pairwise distances: 200, 200, 400
        for i in 0..3 {
            for j in 0..3 {
                let expect = i != j && distance(&pos[i], &pos[j]) <= 250.0;
                assert_eq!(adj[i].contains(&(j as NodeId)), expect);
            }
        }
        assert_eq!(adj[0], BTreeSet::from([1]));
        assert_eq!(adj[1], BTreeSet::from([0, 2]));
        assert!(is_connected(&adj));
        assert_eq!(reachable(&adj, 2).len(), 3);
    }

    proptest::proptest! {
        #[test]
        fn adjacency_is_symmetric(pts in proptest::collection::vec((0.0f64..600.0, 0.0f64..600.0, 0.0f64..100.0), 1..25)) {
            let pos: Vec<[f64; 3]> = pts.iter().map(|&(x, y, z)| [x, y, z]).collect();
            let adj = neighbors(&pos, 250.0);
            for (i, set) in adj.iter().enumerate() {
                proptest::prop_assert!(!set.contains(&(i as NodeId)));
                for &j in set {
                    proptest::prop_assert!(adj[j as usize].contains(&(i as NodeId)));
                }
            }
        }
    }
}
