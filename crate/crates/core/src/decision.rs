//! Offloading-score model, score collection, and proportional task
//! partitioning.
//!
//! A node's score is the weighted sum of its benchmark GFLOPS, CPU clock,
//! and available memory, minus the network cost and (for an uncharging
//! mobile) the missing battery percentage. With unit weights this is a raw
//! sum of incommensurable magnitudes; the weights exist for calibration and
//! default to 1.0.
//!
//! Partitioning divides each eligible node's score by the eligible-only
//! total. The reporting-level total (`total_offloading_score`) instead sums
//! absolute scores, which is preserved verbatim even though it cannot be
//! used as a partition denominator without breaking the 100% sum.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_profile, DomainError, NodeClass, NodeId, NodeProfile, OffloadingScore, PartitionPlan};

/// Share given to the local node when its own score is non-positive but
/// eligible offloadees exist; the coordinator always keeps a sliver.
pub const LOCAL_SCORE_FLOOR: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum DecisionError {
    #[error("rtt estimate is for node `{rtt_node}`, profile is for `{profile_node}`")]
    ProfileMismatch { profile_node: NodeId, rtt_node: NodeId },
    #[error(transparent)]
    Profile(#[from] DomainError),
}

/// Multipliers over the score terms. Defaults reproduce the unweighted sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreWeights {
    pub w_b: f64,
    pub w_p: f64,
    pub w_m: f64,
    pub w_rtt: f64,
    pub w_batt: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { w_b: 1.0, w_p: 1.0, w_m: 1.0, w_rtt: 1.0, w_batt: 1.0 }
    }
}

/// Network cost toward one node: measured round trip plus the estimated
/// task-data transfer time, in seconds. Zero for the local node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RttEstimate {
    pub node_id: NodeId,
    pub rtt_s: f64,
}

impl RttEstimate {
    pub fn zero(node_id: NodeId) -> Self {
        Self { node_id, rtt_s: 0.0 }
    }
}

/// Scores keyed by node in insertion order, local node first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeScores {
    pub scores: IndexMap<NodeId, OffloadingScore>,
    pub self_id: NodeId,
}

impl NodeScores {
    pub fn local(&self) -> &OffloadingScore {
        &self.scores[&self.self_id]
    }

    /// Offloadee scores in insertion order (everything but the local node).
    pub fn offloadees(&self) -> impl Iterator<Item = &OffloadingScore> {
        self.scores.values().filter(move |s| s.node_id != self.self_id)
    }
}

/// Composite score for one node: `w_b*B + w_p*P + w_m*M - w_rtt*RTT`, minus
/// `w_batt*(100 - BL)` when the node is a mobile running on battery. The
/// clock term uses the per-core clock only; core count never enters the
/// score (it shows up in compute-time simulation instead).
pub fn offloading_score(
    profile: &NodeProfile,
    rtt: &RttEstimate,
    weights: &ScoreWeights,
) -> Result<OffloadingScore, DecisionError> {
    validate_profile(profile)?;
    if rtt.node_id != profile.node_id {
        return Err(DecisionError::ProfileMismatch {
            profile_node: profile.node_id.clone(),
            rtt_node: rtt.node_id.clone(),
        });
    }
    let battery_penalty = match (profile.class, profile.battery_level_pct, profile.charging) {
        (NodeClass::Mobile, Some(level), Some(false)) => weights.w_batt * (100.0 - level),
        _ => 0.0,
    };
    let score = weights.w_b * profile.benchmark_gflops
        + weights.w_p * profile.cpu_clock_ghz
        + weights.w_m * profile.memory_gb
        - weights.w_rtt * rtt.rtt_s
        - battery_penalty;
    Ok(OffloadingScore { node_id: profile.node_id.clone(), score, eligible: score > 0.0 })
}

/// Sum of absolute scores across all nodes. Reporting only; partitioning
/// divides by the eligible-only sum.
pub fn total_offloading_score(scores: &NodeScores) -> f64 {
    scores.scores.values().map(|s| s.score.abs()).sum()
}

/// Scores the local node first (with zero network cost), then every
/// connected node with its own estimate.
pub fn collect_node_scores(
    self_profile: &NodeProfile,
    connected: &[(NodeProfile, RttEstimate)],
    weights: &ScoreWeights,
) -> Result<NodeScores, DecisionError> {
    let mut scores = IndexMap::new();
    let local = offloading_score(
        self_profile,
        &RttEstimate::zero(self_profile.node_id.clone()),
        weights,
    )?;
    scores.insert(self_profile.node_id.clone(), local);
    for (profile, rtt) in connected {
        let score = offloading_score(profile, rtt, weights)?;
        scores.insert(profile.node_id.clone(), score);
    }
    Ok(NodeScores { scores, self_id: self_profile.node_id.clone() })
}

/// Proportional split over the eligible nodes: the local node plus every
/// offloadee with a strictly positive score. Each share is
/// `score / eligible_total * 100`.
///
/// A local node with a non-positive score still coordinates, so it is kept
/// with [`LOCAL_SCORE_FLOOR`] substituted; if no offloadee is eligible the
/// local node takes everything.
pub fn partition_task(scores: &NodeScores) -> PartitionPlan {
    let local = scores.local().clone();
    let eligible: Vec<&OffloadingScore> = scores.offloadees().filter(|s| s.eligible).collect();
    if eligible.is_empty() {
        return PartitionPlan::single(local.node_id);
    }
    let local_score = if local.score > 0.0 { local.score } else { LOCAL_SCORE_FLOOR };
    let total: f64 = local_score + eligible.iter().map(|s| s.score).sum::<f64>();
    let mut plan = PartitionPlan::new();
    plan.shares.insert(local.node_id, local_score / total * 100.0);
    for s in eligible {
        plan.shares.insert(s.node_id.clone(), s.score / total * 100.0);
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn cloudlet() -> NodeProfile {
        NodeProfile::fixed("cloudlet", NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0)
    }

    fn mobile_small(battery: f64, charging: bool) -> NodeProfile {
        NodeProfile::mobile("mobile_small", 1.09, 1.3, 2, 1.0, battery, charging)
    }

    fn score_of(profile: &NodeProfile, rtt_s: f64) -> f64 {
        let rtt = RttEstimate { node_id: profile.node_id.clone(), rtt_s };
        offloading_score(profile, &rtt, &ScoreWeights::default()).unwrap().score
    }

    #[test]
    fn cloudlet_score_is_plain_sum() {
        // 2.56 + 2.5 + 16 = 21.06
        let s = offloading_score(
            &cloudlet(),
            &RttEstimate::zero(NodeId::new("cloudlet")),
            &ScoreWeights::default(),
        )
        .unwrap();
        assert!((s.score - 21.06).abs() < 1e-9);
        assert!(s.eligible);
    }

    #[test]
    fn full_battery_mobile_has_no_penalty() {
        // 1.09 + 1.3 + 1 = 3.39; (100 - 100) penalty is zero.
        let s = score_of(&mobile_small(100.0, false), 0.0);
        assert!((s - 3.39).abs() < 1e-9);
    }

    #[test]
    fn drained_battery_and_rtt_push_score_negative() {
        // 3.39 - 2.0 - (100 - 40) = -58.61
        let profile = mobile_small(40.0, false);
        let rtt = RttEstimate { node_id: profile.node_id.clone(), rtt_s: 2.0 };
        let s = offloading_score(&profile, &rtt, &ScoreWeights::default()).unwrap();
        assert!((s.score - (-58.61)).abs() < 1e-9);
        assert!(!s.eligible);
    }

    #[test]
    fn charging_mobile_skips_battery_penalty() {
        let s = score_of(&mobile_small(40.0, true), 0.0);
        assert!((s - 3.39).abs() < 1e-9);
    }

    #[test]
    fn mismatched_rtt_node_rejected() {
        let rtt = RttEstimate::zero(NodeId::new("other"));
        let err = offloading_score(&cloudlet(), &rtt, &ScoreWeights::default()).unwrap_err();
        assert!(matches!(err, DecisionError::ProfileMismatch { .. }));
    }

    #[test]
    fn scoring_is_pure() {
        let profile = mobile_small(73.0, false);
        let rtt = RttEstimate { node_id: profile.node_id.clone(), rtt_s: 0.4 };
        let a = offloading_score(&profile, &rtt, &ScoreWeights::default()).unwrap();
        let b = offloading_score(&profile, &rtt, &ScoreWeights::default()).unwrap();
        assert_eq!(a, b);
    }

    fn scores_fixture(pairs: &[(&str, f64)]) -> NodeScores {
        let mut scores = IndexMap::new();
        for (id, score) in pairs {
            let node_id = NodeId::new(*id);
            scores.insert(
                node_id.clone(),
                OffloadingScore { node_id, score: *score, eligible: *score > 0.0 },
            );
        }
        NodeScores { scores, self_id: NodeId::new(pairs[0].0) }
    }

    #[test]
    fn total_sums_absolute_values() {
        let total = total_offloading_score(&scores_fixture(&[("a", 3.39), ("b", 21.06)]));
        assert!((total - 24.45).abs() < 1e-9);
        let total = total_offloading_score(&scores_fixture(&[("a", -58.61), ("b", 21.06)]));
        assert!((total - 79.67).abs() < 1e-9);
        let total = total_offloading_score(&scores_fixture(&[("a", -5.0)]));
        assert!((total - 5.0).abs() < 1e-12);
    }

    #[test]
    fn collect_scores_local_first() {
        let cloudlet = cloudlet();
        let rtt = RttEstimate { node_id: cloudlet.node_id.clone(), rtt_s: 0.5 };
        let scores = collect_node_scores(
            &mobile_small(100.0, false),
            &[(cloudlet, rtt)],
            &ScoreWeights::default(),
        )
        .unwrap();
        let ids: Vec<&NodeId> = scores.scores.keys().collect();
        assert_eq!(ids[0].as_str(), "mobile_small");
        assert_eq!(ids[1].as_str(), "cloudlet");
        assert!((scores.local().score - 3.39).abs() < 1e-9);
        assert!((scores.scores[&NodeId::new("cloudlet")].score - 20.56).abs() < 1e-9);
    }

    #[test]
    fn collect_scores_self_only() {
        let scores =
            collect_node_scores(&mobile_small(100.0, false), &[], &ScoreWeights::default()).unwrap();
        assert_eq!(scores.scores.len(), 1);
        assert!((scores.local().score - 3.39).abs() < 1e-9);
    }

    #[test]
    fn identical_offloadees_score_identically() {
        let a = NodeProfile::fixed("c1", NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0);
        let b = NodeProfile::fixed("c2", NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0);
        let pairs = vec![
            (a.clone(), RttEstimate { node_id: a.node_id, rtt_s: 0.1 }),
            (b.clone(), RttEstimate { node_id: b.node_id, rtt_s: 0.1 }),
        ];
        let scores =
            collect_node_scores(&mobile_small(100.0, false), &pairs, &ScoreWeights::default())
                .unwrap();
        let vals: Vec<f64> = scores.offloadees().map(|s| s.score).collect();
        assert_eq!(vals[0], vals[1]);
    }

    #[test]
    fn partition_two_nodes() {
        let plan = partition_task(&scores_fixture(&[("local", 3.39), ("cloudlet", 21.06)]));
        let local = plan.shares[&NodeId::new("local")];
        let cloudlet = plan.shares[&NodeId::new("cloudlet")];
        assert!((local - 13.865030674846626).abs() < 1e-9);
        assert!((cloudlet - 86.13496932515338).abs() < 1e-9);
        assert!((plan.total_pct() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn partition_single_node() {
        let plan = partition_task(&scores_fixture(&[("local", 3.39)]));
        assert_eq!(plan.shares[&NodeId::new("local")], 100.0);
    }

    #[test]
    fn partition_excludes_negative_offloadee() {
        let plan = partition_task(&scores_fixture(&[
            ("local", 3.39),
            ("mobile", -58.61),
            ("cloudlet", 21.06),
        ]));
        assert!(!plan.shares.contains_key(&NodeId::new("mobile")));
        assert!((plan.shares[&NodeId::new("local")] - 13.865030674846626).abs() < 1e-9);
        assert!((plan.shares[&NodeId::new("cloudlet")] - 86.13496932515338).abs() < 1e-9);
    }

    #[test]
    fn partition_excludes_zero_score_offloadee() {
        let plan = partition_task(&scores_fixture(&[("local", 5.0), ("dead", 0.0)]));
        assert!(!plan.shares.contains_key(&NodeId::new("dead")));
        assert_eq!(plan.shares[&NodeId::new("local")], 100.0);
    }

    #[test]
    fn negative_local_still_coordinates() {
        let plan = partition_task(&scores_fixture(&[("local", -4.0), ("cloudlet", 21.06)]));
        let local = plan.shares[&NodeId::new("local")];
        assert!(local > 0.0);
        assert!((local - LOCAL_SCORE_FLOOR / (LOCAL_SCORE_FLOOR + 21.06) * 100.0).abs() < 1e-9);
        assert!((plan.total_pct() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn negative_local_without_offloadees_takes_all() {
        let plan = partition_task(&scores_fixture(&[("local", -4.0)]));
        assert_eq!(plan.shares[&NodeId::new("local")], 100.0);
    }

    #[test]
    fn random_plans_sum_to_100_and_respect_eligibility() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..500 {
            let n = 1 + rng.next_below(8) as usize;
            let pairs: Vec<(String, f64)> = (0..n)
                .map(|i| (format!("n{i}"), rng.next_f64() * 80.0 - 30.0))
                .collect();
            let refs: Vec<(&str, f64)> = pairs.iter().map(|(s, v)| (s.as_str(), *v)).collect();
            let scores = scores_fixture(&refs);
            let plan = partition_task(&scores);
            assert!((plan.total_pct() - 100.0).abs() < 1e-9);
            for (node, share) in &plan.shares {
                assert!(*share > 0.0, "share for {node} not positive");
                let s = &scores.scores[node];
                assert!(s.eligible || *node == scores.self_id);
            }
        }
    }

    #[test]
    fn share_monotone_in_own_score() {
        let base = partition_task(&scores_fixture(&[("local", 3.0), ("a", 10.0), ("b", 7.0)]));
        let bumped = partition_task(&scores_fixture(&[("local", 3.0), ("a", 12.0), ("b", 7.0)]));
        assert!(bumped.shares[&NodeId::new("a")] >= base.shares[&NodeId::new("a")]);
    }

    #[test]
    fn shares_invariant_under_uniform_scaling() {
        let a = partition_task(&scores_fixture(&[("local", 3.39), ("c", 21.06), ("d", 5.72)]));
        let b = partition_task(&scores_fixture(&[("local", 6.78), ("c", 42.12), ("d", 11.44)]));
        for (node, share) in &a.shares {
            assert!((share - b.shares[node]).abs() < 1e-9);
        }
    }

    #[test]
    fn default_weights_reproduce_table_sums() {
        // All six testbed rows, zero rtt, full battery for mobiles.
        let rows: Vec<(NodeProfile, f64)> = vec![
            (NodeProfile::mobile("mobile_small", 1.09, 1.3, 2, 1.0, 100.0, false), 3.39),
            (NodeProfile::mobile("mobile_medium", 1.24, 1.4, 2, 1.0, 100.0, false), 3.64),
            (NodeProfile::fixed("cloudlet", NodeClass::Cloudlet, 2.56, 2.5, 4, 16.0), 21.06),
            (NodeProfile::fixed("cloud_small", NodeClass::RemoteCloud, 2.32, 2.4, 1, 1.0), 5.72),
            (NodeProfile::fixed("cloud_medium", NodeClass::RemoteCloud, 2.94, 2.8, 4, 7.5), 13.24),
            (NodeProfile::fixed("cloud_large", NodeClass::RemoteCloud, 3.02, 2.8, 8, 15.0), 20.82),
        ];
        for (profile, expected) in rows {
            assert!(
                (score_of(&profile, 0.0) - expected).abs() < 1e-9,
                "{}",
                profile.node_id
            );
        }
    }
}
