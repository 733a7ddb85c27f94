use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::RngCore;

use crate::addr::NodeId;

use super::RoutingError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeEntry {
    pub id: NodeId,
    /// `host:port` for TCP deployments; informational in the simulator.
    pub endpoint: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathPolicy {
    #[default]
    RoundRobin,
    UniformRandom,
}

impl FromStr for PathPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round_robin" => Ok(PathPolicy::RoundRobin),
            "uniform_random" => Ok(PathPolicy::UniformRandom),
            other => Err(format!("unknown path policy {other:?}")),
        }
    }
}

impl fmt::Display for PathPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathPolicy::RoundRobin => "round_robin",
            PathPolicy::UniformRandom => "uniform_random",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayPath {
    pub hops: Vec<NodeId>,
}

impl RelayPath {
    pub fn k(&self) -> usize {
        self.hops.len()
    }
}

/// Ordered relay set with a rotation cursor. Mutation goes through `&mut
/// self`; hosts that share a registry wrap its owner in a lock.
#[derive(Debug, Clone, Default)]
pub struct NodeRegistry {
    nodes: Vec<NodeEntry>,
    cursor: usize,
}

impl NodeRegistry {
    pub fn new(nodes: Vec<NodeEntry>) -> Result<Self, RoutingError> {
        let mut reg = NodeRegistry::default();
        for n in nodes {
            reg.add(n)?;
        }
        Ok(reg)
    }

    pub fn from_ids<I, S>(ids: I) -> Result<Self, RoutingError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries = ids
            .into_iter()
            .map(|s| {
                let id = NodeId::new(s.as_ref()).map_err(|e| RoutingError::BadNodesFile {
                    line: 0,
                    reason: e.to_string(),
                })?;
                Ok(NodeEntry {
                    id,
                    endpoint: String::new(),
                })
            })
            .collect::<Result<Vec<_>, RoutingError>>()?;
        NodeRegistry::new(entries)
    }

    pub fn add(&mut self, entry: NodeEntry) -> Result<(), RoutingError> {
        if self.contains(&entry.id) {
            return Err(RoutingError::DuplicateNode(entry.id));
        }
        self.nodes.push(entry);
        Ok(())
    }

    /// Removes a node. The cursor keeps pointing at the node that would
    /// have been drawn next.
    pub fn remove(&mut self, id: &NodeId) -> bool {
        let Some(pos) = self.nodes.iter().position(|n| &n.id == id) else {
            return false;
        };
        self.nodes.remove(pos);
        if pos < self.cursor {
            self.cursor -= 1;
        }
        if self.cursor >= self.nodes.len() {
            self.cursor = 0;
        }
        true
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn nodes(&self) -> &[NodeEntry] {
        &self.nodes
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.iter().any(|n| &n.id == id)
    }

    pub fn endpoint_of(&self, id: &NodeId) -> Option<&str> {
        self.nodes
            .iter()
            .find(|n| &n.id == id)
            .map(|n| n.endpoint.as_str())
    }

    /// Returns `nodes[cursor]` and advances the cursor modulo the node count.
    pub fn next_node(&mut self) -> Result<NodeId, RoutingError> {
        if self.nodes.is_empty() {
            return Err(RoutingError::EmptyRegistry);
        }
        let id = self.nodes[self.cursor].id.clone();
        self.cursor = (self.cursor + 1) % self.nodes.len();
        Ok(id)
    }

    /// `k` consecutive draws. Consecutive rotations over `k <= len` nodes
    /// cannot repeat a node.
    pub fn build_path(&mut self, k: usize) -> Result<RelayPath, RoutingError> {
        self.check_k(k)?;
        let hops = (0..k)
            .map(|_| self.next_node())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RelayPath { hops })
    }

    /// `k` distinct nodes chosen uniformly at random; the cursor is untouched.
    pub fn uniform_path(&self, k: usize, rng: &mut dyn RngCore) -> Result<RelayPath, RoutingError> {
        self.check_k(k)?;
        let hops = index::sample(rng, self.nodes.len(), k)
            .into_iter()
            .map(|i| self.nodes[i].id.clone())
            .collect();
        Ok(RelayPath { hops })
    }

    pub fn select_path(
        &mut self,
        policy: PathPolicy,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<RelayPath, RoutingError> {
        match policy {
            PathPolicy::RoundRobin => self.build_path(k),
            PathPolicy::UniformRandom => self.uniform_path(k, rng),
        }
    }

    fn check_k(&self, k: usize) -> Result<(), RoutingError> {
        if self.nodes.is_empty() {
            return Err(RoutingError::EmptyRegistry);
        }
        if k == 0 {
            return Err(RoutingError::ZeroHops);
        }
        if k > self.nodes.len() {
            return Err(RoutingError::PathTooLong {
                k,
                nodes: self.nodes.len(),
            });
        }
        Ok(())
    }
}

/// Parses a nodes file: one `node_id host:port` per line; blank lines and
/// `#` comments are ignored.
pub fn parse_nodes_file(text: &str) -> Result<Vec<NodeEntry>, RoutingError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |reason: &str| RoutingError::BadNodesFile {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut parts = line.split_whitespace();
        let (Some(id), Some(endpoint), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected `node_id host:port`"));
        };
        if !endpoint.contains(':') {
            return Err(bad("endpoint must be host:port"));
        }
        out.push(NodeEntry {
            id: NodeId::new(id).map_err(|e| bad(&e.to_string()))?,
            endpoint: endpoint.to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn ids(path: &RelayPath) -> Vec<&str> {
        path.hops.iter().map(|h| h.as_str()).collect()
    }

    #[test]
    fn rotation() {
        let mut reg = NodeRegistry::from_ids(["A", "B", "C"]).unwrap();
        let draws: Vec<String> = (0..4).map(|_| reg.next_node().unwrap().to_string()).collect();
        assert_eq!(draws, ["A", "B", "C", "A"]);
    }

    #[test]
    fn singleton_and_empty() {
        let mut reg = NodeRegistry::from_ids(["A"]).unwrap();
        for _ in 0..5 {
            assert_eq!(reg.next_node().unwrap().as_str(), "A");
        }
        let mut empty = NodeRegistry::default();
        assert_eq!(empty.next_node(), Err(RoutingError::EmptyRegistry));
        assert_eq!(empty.build_path(1), Err(RoutingError::EmptyRegistry));
    }

    #[test]
    fn build_path_rotates() {
        let mut reg = NodeRegistry::from_ids(["A", "B", "C"]).unwrap();
        assert_eq!(ids(&reg.build_path(2).unwrap()), ["A", "B"]);
        assert_eq!(ids(&reg.build_path(2).unwrap()), ["C", "A"]);
        assert_eq!(reg.cursor(), 1);

        let mut reg = NodeRegistry::from_ids(["A", "B", "C"]).unwrap();
        assert_eq!(ids(&reg.build_path(3).unwrap()), ["A", "B", "C"]);
        assert_eq!(ids(&reg.build_path(3).unwrap()), ["A", "B", "C"]);
    }

    #[test]
    fn path_bounds() {
        let mut reg = NodeRegistry::from_ids(["A", "B", "C"]).unwrap();
        assert_eq!(reg.build_path(4), Err(RoutingError::PathTooLong { k: 4, nodes: 3 }));
        assert_eq!(reg.build_path(0), Err(RoutingError::ZeroHops));
        assert_eq!(reg.cursor(), 0);
    }

    #[test]
    fn three_hundred_single_draws_are_even() {
        // Oracle: tally draws independently of the registry's own state.
        let mut reg = NodeRegistry::from_ids(["A", "B", "C"]).unwrap();
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for _ in 0..300 {
            let p = reg.build_path(1).unwrap();
            *counts.entry(p.hops[0].to_string()).or_default() += 1;
        }
        assert_eq!(counts.values().copied().collect::<Vec<_>>(), [100, 100, 100]);
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(matches!(
            NodeRegistry::from_ids(["A", "A"]),
            Err(RoutingError::DuplicateNode(_))
        ));
    }

    #[test]
    fn removal_keeps_rotation_position() {
        let mut reg = NodeRegistry::from_ids(["A", "B", "C", "D"]).unwrap();
        reg.next_node().unwrap(); // A
        reg.next_node().unwrap(); // B, cursor -> C
        assert!(reg.remove(&"A".parse().unwrap()));
        assert_eq!(reg.next_node().unwrap().as_str(), "C");
        assert!(reg.remove(&"D".parse().unwrap()));
        assert_eq!(reg.next_node().unwrap().as_str(), "B");
        assert!(!reg.remove(&"Z".parse().unwrap()));
    }

    #[test]
    fn uniform_paths_are_distinct_and_in_range() {
        let reg = NodeRegistry::from_ids(["A", "B", "C", "D", "E"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = reg.uniform_path(3, &mut rng).unwrap();
            let mut hops = p.hops.clone();
            hops.sort();
            hops.dedup();
            assert_eq!(hops.len(), 3);
        }
        assert_eq!(reg.cursor(), 0);
    }

    #[test]
    fn nodes_file() {
        let text = "# relays\nA.r1 127.0.0.1:7001\n\nA.r2 127.0.0.1:7002 # second\n";
        let nodes = parse_nodes_file(text).unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[1].endpoint, "127.0.0.1:7002");
        assert!(parse_nodes_file("A.r1").is_err());
        assert!(parse_nodes_file("A.r1 nohostport").is_err());
    }

    proptest! {
        #[test]
        fn fairness_of_consecutive_draws(size in 1usize..=16, draws in 0usize..2000, start in 0usize..16) {
            let names: Vec<String> = (0..size).map(|i| format!("n{i}")).collect();
            let mut reg = NodeRegistry::from_ids(&names).unwrap();
            for _ in 0..(start % size) {
                reg.next_node().unwrap();
            }
            let mut counts = vec![0u32; size];
            for _ in 0..draws {
                let id = reg.next_node().unwrap();
                counts[names.iter().position(|n| n == id.as_str()).unwrap()] += 1;
            }
            let max = counts.iter().max().unwrap();
            let min = counts.iter().min().unwrap();
            prop_assert!(max - min <= 1);
        }

        #[test]
        fn round_robin_paths_never_repeat(size in 1usize..=16, k_seed in 0usize..16, rounds in 1usize..20) {
            let names: Vec<String> = (0..size).map(|i| format!("n{i}")).collect();
            let mut reg = NodeRegistry::from_ids(&names).unwrap();
            let k = 1 + k_seed % size;
            for _ in 0..rounds {
                let before = reg.cursor();
                let p = reg.build_path(k).unwrap();
                prop_assert_eq!(p.k(), k);
                let mut hops = p.hops.clone();
                hops.sort();
                hops.dedup();
                prop_assert_eq!(hops.len(), k);
                prop_assert_eq!(reg.cursor(), (before + k) % size);
            }
        }
    }
}
