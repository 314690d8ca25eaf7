//! The divisible task: Knuth-Morris-Pratt text search, proportional text
//! chunking with boundary overlap, and result merging.
//!
//! Splitting is byte-granular. A chunk is extended by `pattern_len - 1`
//! bytes into its successor so that a match straddling a boundary is always
//! visible to the chunk that owns its start offset; merge deduplicates by
//! global offset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{NodeId, PartitionPlan, SearchTask, SubTask};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("pattern must be non-empty")]
    EmptyPattern,
    #[error("node order does not match plan nodes: {0}")]
    PlanMismatch(String),
    #[error("subresults span multiple task ids: `{0}` vs `{1}`")]
    TaskIdMismatch(String, String),
}

/// Sorted, strictly increasing match start offsets in the parent text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchSet {
    pub offsets: Vec<u64>,
}

impl MatchSet {
    pub fn new(mut offsets: Vec<u64>) -> Self {
        offsets.sort_unstable();
        offsets.dedup();
        Self { offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// KMP prefix-function table: `widths[i]` is the length of the longest
/// proper prefix of `pattern[..=i]` that is also a suffix of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureTable {
    pub widths: Vec<usize>,
}

pub fn build_failure_table(pattern: &[u8]) -> Result<FailureTable, WorkloadError> {
    if pattern.is_empty() {
        return Err(WorkloadError::EmptyPattern);
    }
    let mut widths = vec![0usize; pattern.len()];
    let mut matched = 0;
    for i in 1..pattern.len() {
        while matched > 0 && pattern[matched] != pattern[i] {
            matched = widths[matched - 1];
        }
        if pattern[matched] == pattern[i] {
            matched += 1;
        }
        widths[i] = matched;
    }
    Ok(FailureTable { widths })
}

/// All match offsets of `pattern` in `text`, overlapping matches included.
/// Runs in `O(|text| + |pattern|)`.
pub fn kmp_search(text: &[u8], pattern: &[u8]) -> Result<MatchSet, WorkloadError> {
    let table = build_failure_table(pattern)?;
    let mut offsets = Vec::new();
    let mut matched = 0;
    for (i, &byte) in text.iter().enumerate() {
        while matched > 0 && pattern[matched] != byte {
            matched = table.widths[matched - 1];
        }
        if pattern[matched] == byte {
            matched += 1;
        }
        if matched == pattern.len() {
            offsets.push((i + 1 - pattern.len()) as u64);
            matched = table.widths[matched - 1];
        }
    }
    Ok(MatchSet { offsets })
}

/// Round-half-up of a non-negative real to an integer.
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Splits a task's text into contiguous chunks proportional to the plan.
///
/// Chunk boundaries are placed by rounding the cumulative share percentages,
/// so chunk lengths always sum to the text length and the final chunk
/// absorbs rounding remainder. Every chunk except the last is extended by
/// `pattern_len - 1` overlap bytes into its successor. Word boundaries are
/// not respected; the split is purely byte-granular.
pub fn split_text(
    task: &SearchTask,
    plan: &PartitionPlan,
    node_order: &[NodeId],
) -> Result<Vec<SubTask>, WorkloadError> {
    if task.pattern.is_empty() {
        return Err(WorkloadError::EmptyPattern);
    }
    let plan_nodes = plan.nodes();
    if node_order.len() != plan_nodes.len() {
        return Err(WorkloadError::PlanMismatch(format!(
            "{} nodes ordered vs {} in plan",
            node_order.len(),
            plan_nodes.len()
        )));
    }
    for node in node_order {
        if !plan.shares.contains_key(node) {
            return Err(WorkloadError::PlanMismatch(format!("`{node}` not in plan")));
        }
    }
    // node_order has plan's cardinality and every entry is a plan node, but
    // duplicates could still satisfy both checks.
    for (i, node) in node_order.iter().enumerate() {
        if node_order[..i].contains(node) {
            return Err(WorkloadError::PlanMismatch(format!("`{node}` listed twice")));
        }
    }

    let text_len = task.text.len();
    let overlap = task.pattern.len() - 1;
    let mut subtasks = Vec::with_capacity(node_order.len());
    let mut cumulative_pct = 0.0;
    let mut start = 0usize;
    for (index, node) in node_order.iter().enumerate() {
        cumulative_pct += plan.shares[node];
        let nominal_end = if index + 1 == node_order.len() {
            text_len
        } else {
            round_half_up(cumulative_pct / 100.0 * text_len as f64).min(text_len)
        };
        let nominal_end = nominal_end.max(start);
        let extended_end = if index + 1 == node_order.len() {
            nominal_end
        } else {
            (nominal_end + overlap).min(text_len)
        };
        subtasks.push(SubTask {
            task_id: task.task_id.clone(),
            chunk_index: index as u32,
            chunk_offset_bytes: start as u64,
            chunk: task.text[start..extended_end].to_vec(),
            pattern: task.pattern.clone(),
        });
        start = nominal_end;
    }
    Ok(subtasks)
}

/// Rebases per-chunk match offsets into parent-text coordinates and merges
/// them into one sorted, deduplicated set.
pub fn merge_results(subresults: &[(SubTask, MatchSet)]) -> Result<MatchSet, WorkloadError> {
    let mut offsets = Vec::new();
    let mut task_id: Option<&str> = None;
    for (sub, matches) in subresults {
        match task_id {
            None => task_id = Some(&sub.task_id),
            Some(id) if id != sub.task_id => {
                return Err(WorkloadError::TaskIdMismatch(id.to_string(), sub.task_id.clone()))
            }
            _ => {}
        }
        offsets.extend(matches.offsets.iter().map(|o| o + sub.chunk_offset_bytes));
    }
    Ok(MatchSet::new(offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// Independent oracle: brute-force longest proper prefix that is also a
    /// suffix, per position.
    fn naive_failure_table(pattern: &[u8]) -> Vec<usize> {
        let mut widths = vec![0; pattern.len()];
        for i in 0..pattern.len() {
            let slice = &pattern[..=i];
            for width in (1..=i).rev() {
                if slice[..width] == slice[slice.len() - width..] {
                    widths[i] = width;
                    break;
                }
            }
        }
        widths
    }

    /// Independent oracle: O(n*m) window scan.
    fn naive_search(text: &[u8], pattern: &[u8]) -> Vec<u64> {
        assert!(!pattern.is_empty());
        if pattern.len() > text.len() {
            return vec![];
        }
        (0..=text.len() - pattern.len())
            .filter(|&i| &text[i..i + pattern.len()] == pattern)
            .map(|i| i as u64)
            .collect()
    }

    #[test]
    fn failure_table_all_equal() {
        assert_eq!(build_failure_table(b"aaa").unwrap().widths, vec![0, 1, 2]);
    }

    #[test]
    fn failure_table_no_repeats() {
        assert_eq!(build_failure_table(b"abc").unwrap().widths, vec![0, 0, 0]);
    }

    #[test]
    fn failure_table_matches_brute_force() {
        assert_eq!(naive_failure_table(b"ababaca"), vec![0, 0, 1, 2, 3, 0, 1]);
        assert_eq!(
            build_failure_table(b"ababaca").unwrap().widths,
            vec![0, 0, 1, 2, 3, 0, 1]
        );
        let mut rng = SplitMix64::new(11);
        for _ in 0..200 {
            let len = 1 + rng.next_below(12) as usize;
            let pat: Vec<u8> = (0..len).map(|_| b'a' + rng.next_below(3) as u8).collect();
            assert_eq!(
                build_failure_table(&pat).unwrap().widths,
                naive_failure_table(&pat),
                "pattern {pat:?}"
            );
        }
    }

    #[test]
    fn empty_pattern_rejected() {
        assert_eq!(build_failure_table(b"").unwrap_err(), WorkloadError::EmptyPattern);
        assert_eq!(kmp_search(b"abc", b"").unwrap_err(), WorkloadError::EmptyPattern);
    }

    #[test]
    fn search_simple() {
        assert_eq!(kmp_search(b"abcab", b"ab").unwrap().offsets, vec![0, 3]);
        assert_eq!(naive_search(b"abcab", b"ab"), vec![0, 3]);
    }

    #[test]
    fn search_overlapping_matches() {
        assert_eq!(kmp_search(b"aaaa", b"aa").unwrap().offsets, vec![0, 1, 2]);
        assert_eq!(naive_search(b"aaaa", b"aa"), vec![0, 1, 2]);
    }

    #[test]
    fn pattern_longer_than_text() {
        assert!(kmp_search(b"ab", b"abc").unwrap().is_empty());
    }

    #[test]
    fn search_matches_naive_oracle() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..500 {
            let text_len = rng.next_below(300) as usize;
            let pat_len = 1 + rng.next_below(8) as usize;
            let text: Vec<u8> = (0..text_len).map(|_| b'a' + rng.next_below(3) as u8).collect();
            let pat: Vec<u8> = (0..pat_len).map(|_| b'a' + rng.next_below(3) as u8).collect();
            assert_eq!(kmp_search(&text, &pat).unwrap().offsets, naive_search(&text, &pat));
        }
    }

    fn plan_of(shares: &[(&str, f64)]) -> PartitionPlan {
        let mut plan = PartitionPlan::new();
        for (node, pct) in shares {
            plan.shares.insert(NodeId::new(*node), *pct);
        }
        plan
    }

    fn order_of(nodes: &[&str]) -> Vec<NodeId> {
        nodes.iter().map(|n| NodeId::new(*n)).collect()
    }

    #[test]
    fn split_single_node_is_identity() {
        let task = SearchTask::new("t", vec![b'x'; 100], b"ab".to_vec());
        let subs = split_text(&task, &plan_of(&[("only", 100.0)]), &order_of(&["only"])).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].chunk_offset_bytes, 0);
        assert_eq!(subs[0].chunk.len(), 100);
    }

    #[test]
    fn split_half_half_with_overlap() {
        let task = SearchTask::new("t", vec![b'x'; 100], b"abc".to_vec());
        let subs = split_text(
            &task,
            &plan_of(&[("a", 50.0), ("b", 50.0)]),
            &order_of(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(subs[0].chunk_offset_bytes, 0);
        assert_eq!(subs[0].chunk.len(), 52); // nominal 50 + overlap 2
        assert_eq!(subs[1].chunk_offset_bytes, 50);
        assert_eq!(subs[1].chunk.len(), 50);
    }

    #[test]
    fn split_boundary_match_found_once() {
        // Pattern straddling the 50-boundary must be owned by the first chunk.
        let mut text = vec![b'x'; 100];
        text[49] = b'p';
        text[50] = b'q';
        text[51] = b'r';
        let task = SearchTask::new("t", text.clone(), b"pqr".to_vec());
        let plan = plan_of(&[("a", 50.0), ("b", 50.0)]);
        let subs = split_text(&task, &plan, &order_of(&["a", "b"])).unwrap();
        let results: Vec<(SubTask, MatchSet)> = subs
            .into_iter()
            .map(|s| {
                let m = kmp_search(&s.chunk, &s.pattern).unwrap();
                (s, m)
            })
            .collect();
        let merged = merge_results(&results).unwrap();
        assert_eq!(merged.offsets, vec![49]);
        assert_eq!(merged.offsets, naive_search(&text, b"pqr"));
    }

    #[test]
    fn split_rounding_remainder_to_last() {
        let task = SearchTask::new("t", vec![b'x'; 10], b"a".to_vec());
        let subs = split_text(
            &task,
            &plan_of(&[("a", 13.865), ("b", 86.135)]),
            &order_of(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(subs[0].chunk.len(), 1); // round_half_up(1.3865) = 1
        assert_eq!(subs[1].chunk.len(), 9);
        assert_eq!(subs[1].chunk_offset_bytes, 1);
    }

    #[test]
    fn split_rejects_mismatched_order() {
        let task = SearchTask::new("t", vec![b'x'; 10], b"a".to_vec());
        let plan = plan_of(&[("a", 50.0), ("b", 50.0)]);
        assert!(matches!(
            split_text(&task, &plan, &order_of(&["a", "c"])),
            Err(WorkloadError::PlanMismatch(_))
        ));
        assert!(matches!(
            split_text(&task, &plan, &order_of(&["a"])),
            Err(WorkloadError::PlanMismatch(_))
        ));
        assert!(matches!(
            split_text(&task, &plan, &order_of(&["a", "a"])),
            Err(WorkloadError::PlanMismatch(_))
        ));
    }

    #[test]
    fn chunks_cover_text_and_overlap_exactly() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..200 {
            let text_len = rng.next_below(500) as usize;
            let pat_len = 1 + rng.next_below(8) as usize;
            let n_nodes = 1 + rng.next_below(5) as usize;
            let raw: Vec<f64> = (0..n_nodes).map(|_| rng.next_f64() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let names: Vec<String> = (0..n_nodes).map(|i| format!("n{i}")).collect();
            let mut plan = PartitionPlan::new();
            for (name, r) in names.iter().zip(&raw) {
                plan.shares.insert(NodeId::new(name.clone()), r / total * 100.0);
            }
            let order: Vec<NodeId> = names.iter().map(|n| NodeId::new(n.clone())).collect();
            let task = SearchTask::new("t", vec![b'y'; text_len], vec![b'z'; pat_len]);
            let subs = split_text(&task, &plan, &order).unwrap();

            // Coverage: nominal regions tile [0, text_len).
            let mut expected_start = 0u64;
            for (i, sub) in subs.iter().enumerate() {
                assert_eq!(sub.chunk_offset_bytes, expected_start);
                let end = sub.chunk_offset_bytes as usize + sub.chunk.len();
                assert!(end <= text_len);
                if i + 1 == subs.len() {
                    assert_eq!(end, text_len);
                } else {
                    let next_start = subs[i + 1].chunk_offset_bytes as usize;
                    // Overlap is exactly pat_len - 1 unless clipped by text end.
                    let expected_end = (next_start + pat_len - 1).min(text_len);
                    assert_eq!(end, expected_end);
                    expected_start = next_start as u64;
                }
            }
        }
    }

    #[test]
    fn merge_identity_and_empty() {
        let sub = SubTask {
            task_id: "t".into(),
            chunk_index: 0,
            chunk_offset_bytes: 0,
            chunk: vec![],
            pattern: b"ab".to_vec(),
        };
        let merged = merge_results(&[(sub.clone(), MatchSet::new(vec![2, 7]))]).unwrap();
        assert_eq!(merged.offsets, vec![2, 7]);
        let merged = merge_results(&[(sub, MatchSet::default())]).unwrap();
        assert!(merged.is_empty());
    }

    #[test]
    fn merge_rejects_mixed_task_ids() {
        let mk = |id: &str| SubTask {
            task_id: id.into(),
            chunk_index: 0,
            chunk_offset_bytes: 0,
            chunk: vec![],
            pattern: b"a".to_vec(),
        };
        let err = merge_results(&[
            (mk("t1"), MatchSet::default()),
            (mk("t2"), MatchSet::default()),
        ])
        .unwrap_err();
        assert_eq!(err, WorkloadError::TaskIdMismatch("t1".into(), "t2".into()));
    }

    /// Split/merge round trip equals whole-text search, with boundary
    /// straddles forced by a small alphabet.
    #[test]
    fn distributed_search_equals_whole_text_search() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..300 {
            let text_len = rng.next_below(400) as usize;
            let pat_len = 1 + rng.next_below(6) as usize;
            let text: Vec<u8> = (0..text_len).map(|_| b'a' + rng.next_below(2) as u8).collect();
            let pattern: Vec<u8> = (0..pat_len).map(|_| b'a' + rng.next_below(2) as u8).collect();
            let n_nodes = 1 + rng.next_below(4) as usize;
            let names: Vec<String> = (0..n_nodes).map(|i| format!("n{i}")).collect();
            let raw: Vec<f64> = (0..n_nodes).map(|_| rng.next_f64() + 0.01).collect();
            let total: f64 = raw.iter().sum();
            let mut plan = PartitionPlan::new();
            for (name, r) in names.iter().zip(&raw) {
                plan.shares.insert(NodeId::new(name.clone()), r / total * 100.0);
            }
            let order: Vec<NodeId> = names.iter().map(|n| NodeId::new(n.clone())).collect();
            let task = SearchTask::new("t", text.clone(), pattern.clone());
            let subs = split_text(&task, &plan, &order).unwrap();
            let results: Vec<(SubTask, MatchSet)> = subs
                .into_iter()
                .map(|s| {
                    let m = kmp_search(&s.chunk, &s.pattern).unwrap();
                    (s, m)
                })
                .collect();
            let merged = merge_results(&results).unwrap();
            assert_eq!(merged.offsets, naive_search(&text, &pattern));
        }
    }
}
