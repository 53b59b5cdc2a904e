//! Turning raw query outputs into groups with concrete members.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::costs::member_point_cost;
use crate::error::{Error, Result};
use crate::types::{GroupPrediction, IndividualPrediction};

/// Members selected for one predicted group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupMembership {
    pub group_index: usize,
    /// Individual prediction chosen for each of the first member points.
    pub member_pred_indices: Vec<usize>,
    pub decoded_size: usize,
    /// Set when the decoded size exceeded the number of individual
    /// predictions; every individual is then a member.
    pub truncated: bool,
}

/// `round(M × ŝ)` with halves rounded away from zero, clamped to `[0, M]`.
pub fn decode_group_size(s_hat: f64, m: usize) -> usize {
    let v = (m as f64 * s_hat).round();
    if v.is_nan() || v <= 0.0 {
        0
    } else {
        (v as usize).min(m)
    }
}

/// Assigns each of the first `decoded size` member points of `group` to a
/// distinct individual prediction, minimizing the total distance-over-score.
pub fn identify_members(
    group_index: usize,
    group: &GroupPrediction,
    individuals: &[IndividualPrediction],
    m: usize,
) -> Result<GroupMembership> {
    let decoded_size = decode_group_size(group.size_norm, m);
    let truncated = decoded_size > individuals.len();
    let n = decoded_size.min(individuals.len());
    if n > group.member_points.len() {
        return Err(Error::LengthMismatch {
            what: "member points",
            expected: n,
            got: group.member_points.len(),
        });
    }
    let costs = CostMatrix::from_fn(n, individuals.len(), |r, c| {
        member_point_cost(&group.member_points[r], &individuals[c])
    });
    let assignment = solve_assignment(&costs)?;
    Ok(GroupMembership {
        group_index,
        member_pred_indices: assignment.map,
        decoded_size,
        truncated,
    })
}

/// `(query, class)` of the largest activity probability over all queries and
/// classes; the lowest query, then the lowest class, wins ties.
pub fn select_top_group(preds: &[GroupPrediction]) -> Result<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (q, pred) in preds.iter().enumerate() {
        if let Some((k, p)) = pred.top_activity() {
            if best.is_none_or(|(_, _, bp)| p > bp) {
                best = Some((q, k, p));
            }
        }
    }
    best.map(|(q, k, _)| (q, k))
        .ok_or(Error::Empty("group predictions"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::brute_force_assignment;
    use crate::types::{BBox, Point2};
    use proptest::prelude::*;

    fn person(cx: f64, cy: f64, score: f64) -> IndividualPrediction {
        IndividualPrediction {
            score,
            bbox: BBox::new(cx, cy, 0.1, 0.2),
            action_probs: vec![0.5],
        }
    }

    fn group(size_norm: f64, points: &[(f64, f64)]) -> GroupPrediction {
        GroupPrediction {
            activity_probs: vec![0.5, 0.5],
            size_norm,
            member_points: points.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        }
    }

    #[test]
    fn size_decoding() {
        assert_eq!(decode_group_size(0.25, 12), 3);
        assert_eq!(decode_group_size(0.26, 12), 3);
        assert_eq!(decode_group_size(0.29167, 12), 4);
        assert_eq!(decode_group_size(3.5 / 12.0, 12), 4);
        assert_eq!(decode_group_size(1.0, 12), 12);
        assert_eq!(decode_group_size(0.0, 12), 0);
        for m in 1..=12 {
            for s in 0..=m {
                assert_eq!(decode_group_size(s as f64 / m as f64, m), s);
            }
        }
    }

    #[test]
    fn zero_size_gives_empty_membership() {
        let g = group(0.01, &[(0.5, 0.5); 4]);
        let r = identify_members(0, &g, &[person(0.5, 0.5, 1.0)], 4).unwrap();
        assert!(r.member_pred_indices.is_empty());
        assert_eq!(r.decoded_size, 0);
        assert!(!r.truncated);
    }

    #[test]
    fn point_on_a_center_selects_that_person() {
        let g = group(0.25, &[(0.3, 0.4), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let inds = [person(0.9, 0.9, 1.0), person(0.3, 0.4, 1.0), person(0.1, 0.9, 1.0)];
        let r = identify_members(3, &g, &inds, 4).unwrap();
        assert_eq!(r.member_pred_indices, vec![1]);
        assert_eq!(r.group_index, 3);
    }

    #[test]
    fn crafted_two_by_three_matches_enumeration() {
        // Greedy would give point 0 person 1 (distance 0.05) and leave point 1
        // with a long trip; the optimum swaps them.
        let g = group(0.5, &[(0.5, 0.5), (0.56, 0.5), (0.0, 0.0), (0.0, 0.0)]);
        let inds = [person(0.3, 0.5, 1.0), person(0.55, 0.5, 1.0), person(0.9, 0.5, 0.5)];
        let r = identify_members(0, &g, &inds, 4).unwrap();
        let m = CostMatrix::from_fn(2, 3, |i, j| member_point_cost(&g.member_points[i], &inds[j]));
        let oracle = brute_force_assignment(&m).unwrap();
        assert_eq!(r.member_pred_indices, oracle.map);
        assert_eq!(r.member_pred_indices, vec![0, 1]);
    }

    #[test]
    fn oversized_group_is_truncated() {
        let g = group(1.0, &[(0.1, 0.1), (0.2, 0.2), (0.3, 0.3), (0.4, 0.4)]);
        let inds = [person(0.2, 0.2, 1.0), person(0.4, 0.4, 1.0)];
        let r = identify_members(0, &g, &inds, 4).unwrap();
        assert!(r.truncated);
        assert_eq!(r.decoded_size, 4);
        let mut idx = r.member_pred_indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1]);
    }

    #[test]
    fn top_group_selection() {
        let mk = |p: &[f64]| GroupPrediction {
            activity_probs: p.to_vec(),
            size_norm: 0.5,
            member_points: vec![],
        };
        assert_eq!(select_top_group(&[mk(&[0.1, 0.9])]).unwrap(), (0, 1));
        assert_eq!(select_top_group(&[mk(&[0.7, 0.1]), mk(&[0.2, 0.8])]).unwrap(), (1, 1));
        assert_eq!(select_top_group(&[mk(&[0.3, 0.6]), mk(&[0.6, 0.6])]).unwrap(), (0, 1));
        assert_eq!(select_top_group(&[mk(&[0.6, 0.6])]).unwrap(), (0, 0));
        assert!(select_top_group(&[]).is_err());
    }

    fn instance() -> impl Strategy<Value = (GroupPrediction, Vec<IndividualPrediction>)> {
        let pt = (0.0..1.0f64, 0.0..1.0f64);
        (
            1usize..=6,
            prop::collection::vec(pt.clone(), 6),
            prop::collection::vec((pt, 0.0..1.0f64), 1..8),
        )
            .prop_map(|(n, points, inds)| {
                let g = group(n as f64 / 6.0, &points);
                let inds = inds.into_iter().map(|((x, y), s)| person(x, y, s)).collect();
                (g, inds)
            })
    }

    proptest! {
        #[test]
        fn membership_is_injective((g, inds) in instance()) {
            let r = identify_members(0, &g, &inds, 6).unwrap();
            let mut idx = r.member_pred_indices.clone();
            idx.sort();
            idx.dedup();
            prop_assert_eq!(idx.len(), r.member_pred_indices.len());
            prop_assert_eq!(r.member_pred_indices.len(), r.decoded_size.min(inds.len()));
        }

        #[test]
        fn positive_scaling_keeps_members((g, inds) in instance(), k in 0.1..10.0f64) {
            // Scaling every score by 1/k scales every cost by k.
            let scaled: Vec<_> = inds
                .iter()
                .map(|p| IndividualPrediction { score: p.score.max(1e-4) / k, ..p.clone() })
                .collect();
            let clamped: Vec<_> = inds
                .iter()
                .map(|p| IndividualPrediction { score: p.score.max(1e-4), ..p.clone() })
                .collect();
            prop_assume!(scaled.iter().all(|p| p.score >= 1e-4));
            let a = identify_members(0, &g, &clamped, 6).unwrap();
            let b = identify_members(0, &g, &scaled, 6).unwrap();
            prop_assert_eq!(a.member_pred_indices, b.member_pred_indices);
        }
    }
}
