//! Outcome-, relation- and path-level scoring of predictions.
//!
//! * SR-P/R/F1: the answer set against the ground-truth top-level obstructors.
//! * OP/OR/F1_rel: `(obstructed, obstructor)` pairs taken from reasoning paths.
//! * MP_NED: normalized edit distance between path sets, matched one-to-one by
//!   minimum total cost, with unit-cost dummies padding the smaller side.

mod edit;
mod hungarian;
mod report;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use edit::{levenshtein, ned};
pub use hungarian::{hungarian, Assignment};
pub use report::{evaluate_dataset, DatasetEvaluation, StratifiedReport, StratumSummary};

use crate::graph::{Difficulty, GraphRecord};
use crate::scene::ObjectId;
use crate::trace::ResolvedTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfScores {
    pub const ZERO: PrfScores = PrfScores {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    pub const PERFECT: PrfScores = PrfScores {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };

    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PrfScores {
            precision,
            recall,
            f1,
        }
    }
}

/// Set precision/recall/F1. An empty side scores 0 on its ratio, except that
/// two empty sets agree perfectly.
pub fn set_prf<T: Ord>(pred: &BTreeSet<T>, gt: &BTreeSet<T>) -> PrfScores {
    if pred.is_empty() && gt.is_empty() {
        return PrfScores::PERFECT;
    }
    let hits = pred.intersection(gt).count() as f64;
    let ratio = |n: usize| if n == 0 { 0.0 } else { hits / n as f64 };
    PrfScores::new(ratio(pred.len()), ratio(gt.len()))
}

/// `(obstructed, obstructor)` pairs along top-first paths.
pub fn triplets(paths: &[Vec<ObjectId>]) -> BTreeSet<(ObjectId, ObjectId)> {
    paths
        .iter()
        .flat_map(|p| p.windows(2).map(|w| (w[1], w[0])))
        .collect()
}

/// Mean matched NED between two path sets, padding the smaller set with
/// dummies that cost 1 against anything. 0 when both sets are empty.
pub fn mp_ned(pred: &[Vec<ObjectId>], gt: &[Vec<ObjectId>]) -> f64 {
    let k = pred.len().max(gt.len());
    if k == 0 {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| match (pred.get(i), gt.get(j)) {
                    (Some(p), Some(g)) => ned(p, g),
                    _ => 1.0,
                })
                .collect()
        })
        .collect();
    let matched = hungarian(&cost).expect("NED costs are finite and nonnegative");
    matched.cost / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample_id: String,
    pub difficulty: Difficulty,
    pub sr: PrfScores,
    pub triplet: PrfScores,
    pub mp_ned: f64,
    pub format_ok: bool,
}

impl SampleReport {
    /// Zero credit for a sample whose output is missing or malformed.
    pub fn format_failure(sample_id: &str, gt: &GraphRecord) -> Self {
        SampleReport {
            sample_id: sample_id.to_string(),
            difficulty: gt.new_difficulty,
            sr: PrfScores::ZERO,
            triplet: PrfScores::ZERO,
            mp_ned: 1.0,
            format_ok: false,
        }
    }
}

/// Scores one resolved prediction against its ground-truth record.
pub fn evaluate_sample(sample_id: &str, pred: &ResolvedTrace, gt: &GraphRecord) -> SampleReport {
    if !pred.format_ok {
        return SampleReport::format_failure(sample_id, gt);
    }
    let gt_paths = &gt.obstruction_paths;
    SampleReport {
        sample_id: sample_id.to_string(),
        difficulty: gt.new_difficulty,
        sr: set_prf(&pred.answer, &gt.answer_set()),
        triplet: set_prf(&triplets(&pred.think_paths), &triplets(gt_paths)),
        mp_ned: mp_ned(&pred.think_paths, gt_paths),
        format_ok: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TargetGraph;
    use crate::trace::{parse_som, ResolvedTrace};

    fn set(xs: &[ObjectId]) -> BTreeSet<ObjectId> {
        xs.iter().copied().collect()
    }

    #[test]
    fn prf_hand_values() {
        assert_eq!(set_prf(&set(&[1, 3]), &set(&[1, 3])), PrfScores::PERFECT);
        assert_eq!(set_prf(&set(&[1, 2]), &set(&[1, 3])), PrfScores::new(0.5, 0.5));
        assert_eq!(set_prf(&set(&[1, 2]), &set(&[1, 3])).f1, 0.5);
        assert_eq!(set_prf(&set(&[]), &set(&[1, 3])), PrfScores::ZERO);
        assert_eq!(set_prf(&set(&[1]), &set(&[])), PrfScores::ZERO);
    }

    #[test]
    fn triplet_extraction() {
        assert_eq!(
            triplets(&[vec![1, 4], vec![3, 4]]),
            BTreeSet::from([(4, 1), (4, 3)])
        );
        assert_eq!(triplets(&[vec![5, 4, 2]]), BTreeSet::from([(2, 4), (4, 5)]));
        assert!(triplets(&[]).is_empty());
    }

    #[test]
    fn mp_ned_hand_values() {
        let gt = vec![vec![1, 4], vec![3, 4]];
        assert_eq!(mp_ned(&gt, &gt), 0.0);
        assert_eq!(mp_ned(&[vec![1, 4]], &gt), 0.5);
        assert_eq!(mp_ned(&[], &[vec![1, 4]]), 1.0);
        assert_eq!(mp_ned(&[], &[]), 0.0);
        // Order within the set does not matter.
        assert_eq!(mp_ned(&[vec![3, 4], vec![1, 4]], &gt), 0.0);
    }

    fn record(target: ObjectId, paths: Vec<Vec<ObjectId>>) -> GraphRecord {
        GraphRecord::new("s", "0", &TargetGraph::from_paths(target, &paths), 64).unwrap()
    }

    #[test]
    fn composed_sample() {
        let gt = record(4, vec![vec![1, 4], vec![3, 4]]);
        let text = "<think>\nPath1: Object 4 is obstructed by object 1\n</think>\n<answer>[1]</answer>";
        let r = evaluate_sample("x", &parse_som(text).into(), &gt);
        assert_eq!(r.sr.precision, 1.0);
        assert_eq!(r.sr.recall, 0.5);
        assert!((r.sr.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.mp_ned, 0.5);
        assert_eq!(r.triplet, PrfScores::new(1.0, 0.5));
    }

    #[test]
    fn unobstructed_targets() {
        let gt = record(9, vec![]);
        let ok: ResolvedTrace = parse_som("<think></think><answer>[9]</answer>").into();
        let r = evaluate_sample("x", &ok, &gt);
        assert_eq!(
            (r.sr, r.triplet, r.mp_ned),
            (PrfScores::PERFECT, PrfScores::PERFECT, 0.0)
        );
        let hallucinated: ResolvedTrace =
            parse_som("<think>Path1: 9 obstructed by 2</think><answer>[2]</answer>").into();
        let r = evaluate_sample("x", &hallucinated, &gt);
        assert_eq!(r.sr, PrfScores::ZERO);
        assert_eq!(r.triplet, PrfScores::ZERO);
        assert_eq!(r.mp_ned, 1.0);
    }

    #[test]
    fn answer_and_reasoning_are_scored_independently() {
        let gt = record(4, vec![vec![1, 4], vec![3, 4]]);
        let right_answer_wrong_think: ResolvedTrace =
            parse_som("<think>Path1: 4 obstructed by 2</think><answer>[1, 3]</answer>").into();
        let r = evaluate_sample("x", &right_answer_wrong_think, &gt);
        assert_eq!(r.sr, PrfScores::PERFECT);
        assert_eq!(r.triplet, PrfScores::ZERO);
        let wrong_answer_right_think: ResolvedTrace = parse_som(
            "<think>Path1: 4 obstructed by 1\nPath2: 4 obstructed by 3</think><answer>[2]</answer>",
        )
        .into();
        let r = evaluate_sample("x", &wrong_answer_right_think, &gt);
        assert_eq!(r.sr, PrfScores::ZERO);
        assert_eq!((r.triplet, r.mp_ned), (PrfScores::PERFECT, 0.0));
    }

    #[test]
    fn broken_format_scores_zero() {
        let gt = record(4, vec![vec![1, 4]]);
        let r = evaluate_sample("x", &parse_som("<think></think><answer>[1]").into(), &gt);
        assert!(!r.format_ok);
        assert_eq!((r.sr, r.mp_ned), (PrfScores::ZERO, 1.0));
    }
}
