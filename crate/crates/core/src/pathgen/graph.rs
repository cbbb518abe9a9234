use std::collections::VecDeque;

use super::config::{ChunkConfig, LutEntryId};
use super::PathError;

/// Undirected edge between two stored entries whose vectors differ by one unit in
/// coordinate `j`: `vector(hi) = vector(lo) + e_j`.
///
/// Walking lo→hi adds `a_j` (sign 0), hi→lo subtracts it (sign 1). Pairs that only meet
/// through a mirror image are not edges: reaching them would need a negated source value,
/// which the construction datapath (`lut[dst] = lut[src] ± a_j`) cannot produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EntryEdge {
    pub lo: usize,
    pub hi: usize,
    pub j: u8,
}

impl EntryEdge {
    /// Returns `(other endpoint, sign)` when the edge is walked away from `from`.
    pub fn walk_from(&self, from: usize) -> (usize, u8) {
        if from == self.lo {
            (self.hi, 0)
        } else {
            debug_assert_eq!(from, self.hi);
            (self.lo, 1)
        }
    }
}

#[derive(Clone, Debug)]
pub struct EntryGraph {
    config: ChunkConfig,
    nodes: Vec<LutEntryId>,
    edges: Vec<EntryEdge>,
    adjacency: Vec<Vec<usize>>,
}

impl EntryGraph {
    pub fn config(&self) -> &ChunkConfig {
        &self.config
    }

    pub fn nodes(&self) -> &[LutEntryId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EntryEdge] {
        &self.edges
    }

    /// Edge indices incident to `node`, in ascending (j, direction) order.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// Node index of a stored value code.
    pub fn node_of_code(&self, code: u32) -> Option<usize> {
        // stored codes are exactly 0..stored_entries, in order
        let idx = code as usize;
        (idx < self.nodes.len() && self.nodes[idx].value_code == code).then_some(idx)
    }

    pub fn zero_node(&self) -> usize {
        self.node_of_code(self.config.zero_code())
            .expect("zero vector is always stored")
    }

    /// Breadth-first reachability from the zero node.
    pub fn reachable_from_zero(&self) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([self.zero_node()]);
        seen[self.zero_node()] = true;
        let mut count = 1;
        while let Some(node) = queue.pop_front() {
            for &e in &self.adjacency[node] {
                let (next, _) = self.edges[e].walk_from(node);
                if !seen[next] {
                    seen[next] = true;
                    count += 1;
                    queue.push_back(next);
                }
            }
        }
        count
    }
}

/// Builds the single-addition adjacency graph over the stored entries.
pub fn build_entry_graph(
    config: &ChunkConfig,
    entries: Vec<LutEntryId>,
) -> Result<EntryGraph, PathError> {
    let radix = config.mode().radix();
    let mut index = vec![usize::MAX; config.full_space() as usize];
    for (i, e) in entries.iter().enumerate() {
        index[e.value_code as usize] = i;
    }

    let mut edges = Vec::new();
    let mut adjacency = vec![Vec::new(); entries.len()];
    for (lo, entry) in entries.iter().enumerate() {
        let mut place = 1u32;
        for j in 0..config.c() {
            let digit = (entry.value_code / place) % radix;
            if digit + 1 < radix {
                let up = entry.value_code + place;
                if config.is_canonical(up) {
                    let hi = index[up as usize];
                    if hi != usize::MAX {
                        edges.push(EntryEdge { lo, hi, j: j as u8 });
                    }
                }
            }
            place *= radix;
        }
    }
    edges.sort_by_key(|e| (e.lo, e.j, e.hi));
    for (k, e) in edges.iter().enumerate() {
        adjacency[e.lo].push(k);
        adjacency[e.hi].push(k);
    }

    let graph = EntryGraph {
        config: *config,
        nodes: entries,
        edges,
        adjacency,
    };
    let reached = graph.reachable_from_zero();
    if reached != graph.nodes.len() {
        return Err(PathError::Internal(format!(
            "entry graph disconnected: {reached} of {} entries reachable from zero",
            graph.nodes.len()
        )));
    }
    Ok(graph)
}
