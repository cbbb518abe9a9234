use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::graph::{EntryEdge, EntryGraph};
use super::PathError;

/// A tree edge oriented away from the zero entry: `lut[child] = lut[parent] ± a_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub j: u8,
    pub sign: u8,
}

/// Spanning tree rooted at the zero entry, with nodes in the order Prim attached them.
#[derive(Clone, Debug)]
pub struct SpanningTree {
    pub root: usize,
    /// Tree edges in attachment order.
    pub edges: Vec<TreeEdge>,
    /// Attachment rank of every node; the root has rank 0.
    pub rank: Vec<usize>,
    /// Distance from the root in tree edges.
    pub depth: Vec<usize>,
    pub total_cost: u64,
}

impl SpanningTree {
    pub fn parent_edge(&self, node: usize) -> Option<&TreeEdge> {
        match self.rank[node] {
            0 => None,
            r => Some(&self.edges[r - 1]),
        }
    }
}

/// Prim's algorithm with one unit of cost per addition; sign flips are free.
pub fn extract_spanning_tree(graph: &EntryGraph) -> Result<SpanningTree, PathError> {
    extract_spanning_tree_with(graph, |_| 1)
}

/// (cost, parent rank, j, sign, child, parent)
type Candidate = (u64, usize, u8, u8, usize, usize);

/// Prim's algorithm from the zero entry under an arbitrary edge cost.
///
/// Equal-cost frontier edges are taken in ascending (parent rank, j, sign) order, which
/// makes the result independent of hash or heap internals.
pub fn extract_spanning_tree_with<F>(graph: &EntryGraph, cost: F) -> Result<SpanningTree, PathError>
where
    F: Fn(&EntryEdge) -> u64,
{
    let n = graph.nodes().len();
    let root = graph.zero_node();
    let mut rank = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut total_cost = 0u64;

    let mut frontier: BinaryHeap<Reverse<Candidate>> = BinaryHeap::new();
    let push_incident = |frontier: &mut BinaryHeap<_>, node: usize, node_rank: usize| {
        for &e in graph.incident(node) {
            let edge = &graph.edges()[e];
            let (child, sign) = edge.walk_from(node);
            frontier.push(Reverse((cost(edge), node_rank, edge.j, sign, child, node)));
        }
    };

    rank[root] = 0;
    push_incident(&mut frontier, root, 0);
    while let Some(Reverse((c, _, j, sign, child, parent))) = frontier.pop() {
        if rank[child] != usize::MAX {
            continue;
        }
        let r = edges.len() + 1;
        rank[child] = r;
        depth[child] = depth[parent] + 1;
        total_cost += c;
        edges.push(TreeEdge {
            parent,
            child,
            j,
            sign,
        });
        push_incident(&mut frontier, child, r);
    }

    if edges.len() + 1 != n {
        return Err(PathError::Internal(format!(
            "spanning tree covers {} of {n} entries",
            edges.len() + 1
        )));
    }
    Ok(SpanningTree {
        root,
        edges,
        rank,
        depth,
        total_cost,
    })
}
