use super::config::ChunkConfig;
use super::graph::EntryGraph;
use super::mst::SpanningTree;
use super::path::{BuildPath, CanonicalMap, PathStep};
use super::PathError;

/// Orders the tree edges into a build path whose every read of a constructed entry lands at
/// least `pipeline_depth` steps after the write.
///
/// Candidates are visited in BFS level order (tree depth, then attachment rank). At each slot
/// the first candidate whose parent is old enough is emitted; if none is, the candidate with
/// the largest distance is emitted anyway and the shortfall is reported as a schedule error
/// once the whole order is known.
pub fn schedule_path(
    graph: &EntryGraph,
    tree: &SpanningTree,
    config: &ChunkConfig,
) -> Result<BuildPath, PathError> {
    if graph.config().mode() != config.mode() || graph.config().c() != config.c() {
        return Err(PathError::InvalidConfig(
            "graph and schedule configs disagree".into(),
        ));
    }
    let depth = config.pipeline_depth();
    let n = graph.nodes().len();

    let mut pending: Vec<usize> = (0..n).filter(|&v| v != tree.root).collect();
    pending.sort_by_key(|&v| (tree.depth[v], tree.rank[v]));

    // position of the step that wrote each node; the root lives at address 0 from the start
    let mut written_at: Vec<Option<usize>> = vec![None; n];
    let mut address = vec![u8::MAX; n];
    address[tree.root] = 0;
    let mut steps = Vec::with_capacity(n - 1);
    let mut min_distance = usize::MAX;

    for pos in 0..n - 1 {
        let mut best: Option<(usize, usize)> = None; // (index into pending, distance)
        for (idx, &node) in pending.iter().enumerate() {
            let parent = tree.parent_edge(node).expect("non-root").parent;
            let distance = if parent == tree.root {
                usize::MAX
            } else {
                match written_at[parent] {
                    Some(w) => pos - w,
                    None => continue,
                }
            };
            if distance >= depth {
                best = Some((idx, distance));
                break;
            }
            if best.is_none_or(|(_, d)| distance > d) {
                best = Some((idx, distance));
            }
        }
        let (idx, distance) = best.ok_or_else(|| {
            PathError::Internal("no schedulable tree edge; tree is not rooted at zero".into())
        })?;
        min_distance = min_distance.min(distance);

        let node = pending.remove(idx);
        let edge = tree.parent_edge(node).expect("non-root");
        let dst = (pos + 1) as u8;
        address[node] = dst;
        written_at[node] = Some(pos);
        steps.push(PathStep {
            dst,
            src: address[edge.parent],
            j: edge.j,
            sign: edge.sign,
        });
    }

    if min_distance < depth {
        return Err(PathError::Schedule {
            min_achievable_distance: min_distance,
            required: depth,
        });
    }

    let mut perm = vec![0u8; n];
    for (node, entry) in graph.nodes().iter().enumerate() {
        perm[entry.value_code as usize] = address[node];
    }
    Ok(BuildPath {
        config: *config,
        steps,
        canonical_map: CanonicalMap::from_perm(perm)?,
    })
}

#[cfg(test)]
mod tests {
    use crate::pathgen::{generate_path, ChunkConfig, LutMode, PathError};

    #[test]
    fn ternary_c5_depth4_schedules() {
        let path = generate_path(&ChunkConfig::ternary_default()).unwrap();
        assert_eq!(path.steps.len(), 121);
        assert!(path.min_raw_distance().unwrap() >= 4);
    }

    #[test]
    fn binary_c7_depth4_schedules() {
        let path = generate_path(&ChunkConfig::binary_default()).unwrap();
        assert_eq!(path.steps.len(), 127);
        assert!(path.min_raw_distance().unwrap() >= 4);
    }

    #[test]
    fn ternary_c2_depth1_matches_hand_order() {
        let cfg = ChunkConfig::new(LutMode::Ternary, 2, 1).unwrap();
        let path = generate_path(&cfg).unwrap();
        let summary: Vec<_> = path
            .steps
            .iter()
            .map(|s| (s.dst, s.src, s.j, s.sign))
            .collect();
        // -a0, -a1, then (-a0) - a1 and (-a1) + a0
        assert_eq!(summary, vec![(1, 0, 0, 1), (2, 0, 1, 1), (3, 1, 1, 1), (4, 2, 0, 0)]);
    }

    #[test]
    fn impossible_depth_is_schedule_error() {
        let cfg = ChunkConfig::new(LutMode::Ternary, 5, 122).unwrap();
        match generate_path(&cfg) {
            Err(PathError::Schedule { required, .. }) => assert_eq!(required, 122),
            other => panic!("expected schedule error, got {other:?}"),
        }
    }

    #[test]
    fn dst_is_sequential() {
        let path = generate_path(&ChunkConfig::ternary_default()).unwrap();
        for (i, s) in path.steps.iter().enumerate() {
            assert_eq!(s.dst as usize, i + 1);
        }
    }
}
