//! Set-prediction training losses and their gradients with respect to every
//! prediction component.
//!
//! Each loss term is averaged over the number of real ground-truth elements
//! (at least one). Class terms run over every prediction, with unmatched
//! predictions pushed toward the all-zero target; regression terms run over
//! matched pairs only.

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::costs::giou_with_grad;
use crate::error::{Error, Result};
use crate::types::{
    GroundTruthGroup, GroundTruthPerson, GroupPrediction, HyperParams, IndividualPrediction,
};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// focal loss.
pub const PROB_CLAMP: f64 = 1e-7;

/// Penalty-reduced focal loss with focusing power 2 for a binary target.
///
/// Returns the value and its derivative with respect to `p`. The derivative
/// is zero where the clamp is active.
pub fn focal_loss(y: u8, p: f64) -> (f64, f64) {
    let clamped = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let active = clamped == p;
    let p = clamped;
    let (value, grad) = if y == 1 {
        let q = 1.0 - p;
        (-q * q * p.ln(), 2.0 * q * p.ln() - q * q / p)
    } else {
        let q = 1.0 - p;
        (-p * p * q.ln(), -2.0 * p * q.ln() + p * p / q)
    };
    (value, if active { grad } else { 0.0 })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupPredGrad {
    pub activity_probs: Vec<f64>,
    pub size_norm: f64,
    /// `(d/dx, d/dy)` per member point.
    pub member_points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndividualPredGrad {
    pub score: f64,
    /// Gradient with respect to `(cx, cy, w, h)`.
    pub bbox: [f64; 4],
    pub action_probs: Vec<f64>,
}

/// Loss components, their weighted total, and the gradient of the total with
/// respect to each prediction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_v: f64,
    pub l_s: f64,
    pub l_u: f64,
    pub l_c: f64,
    pub l_b: f64,
    pub l_o: f64,
    pub l_a: f64,
    pub total: f64,
    pub group_grads: Vec<GroupPredGrad>,
    pub individual_grads: Vec<IndividualPredGrad>,
}

impl LossBreakdown {
    /// Joins a group-only and an individual-only breakdown.
    pub fn combine(group: LossBreakdown, individual: LossBreakdown) -> Self {
        Self {
            l_v: group.l_v,
            l_s: group.l_s,
            l_u: group.l_u,
            l_c: individual.l_c,
            l_b: individual.l_b,
            l_o: individual.l_o,
            l_a: individual.l_a,
            total: group.total + individual.total,
            group_grads: group.group_grads,
            individual_grads: individual.individual_grads,
        }
    }

    pub fn components(&self) -> [f64; 7] {
        [
            self.l_v, self.l_s, self.l_u, self.l_c, self.l_b, self.l_o, self.l_a,
        ]
    }

    pub fn weighted_total(&self, hp: &HyperParams) -> f64 {
        hp.lambda_v * self.l_v
            + hp.lambda_s * self.l_s
            + hp.lambda_u * self.l_u
            + hp.lambda_c * self.l_c
            + hp.lambda_b * self.l_b
            + hp.lambda_o * self.l_o
            + hp.lambda_a * self.l_a
    }
}

fn check_assignment(assignment: &Assignment, gts: usize, preds: usize) -> Result<()> {
    if assignment.map.len() != gts {
        return Err(Error::InconsistentAssignment(format!(
            "{} rows for {gts} ground truths",
            assignment.map.len()
        )));
    }
    let mut seen = vec![false; preds];
    for &c in &assignment.map {
        if c >= preds {
            return Err(Error::InconsistentAssignment(format!(
                "column {c} out of range for {preds} predictions"
            )));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InconsistentAssignment(format!(
                "column {c} assigned twice"
            )));
        }
    }
    Ok(())
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            got,
        })
    }
}

/// Activity, size and member-point losses for one scene.
pub fn group_loss(
    gts: &[GroundTruthGroup],
    preds: &[GroupPrediction],
    assignment: &Assignment,
    hp: &HyperParams,
) -> Result<LossBreakdown> {
    check_assignment(assignment, gts.len(), preds.len())?;
    let owners = assignment.column_owners(preds.len());
    let denom = gts.len().max(1) as f64;
    let mut out = LossBreakdown {
        group_grads: Vec::with_capacity(preds.len()),
        ..Default::default()
    };

    for (j, pred) in preds.iter().enumerate() {
        check_len("activity probabilities", hp.n_v, pred.activity_probs.len())?;
        let target = owners[j].map(|i| &gts[i]);
        let mut grad = GroupPredGrad {
            activity_probs: vec![0.0; hp.n_v],
            size_norm: 0.0,
            member_points: vec![[0.0; 2]; pred.member_points.len()],
        };
        for (k, &p) in pred.activity_probs.iter().enumerate() {
            let y = match target {
                Some(gt) => {
                    check_len("activity label", hp.n_v, gt.activity.len())?;
                    gt.activity[k]
                }
                None => 0,
            };
            let (f, df) = focal_loss(y, p);
            out.l_v += f;
            grad.activity_probs[k] = hp.lambda_v * df / denom;
        }
        if let Some(gt) = target {
            if gt.size == 0 || gt.size > pred.member_points.len() || gt.member_points.len() != gt.size {
                return Err(Error::InvalidGroupSize {
                    size: gt.size,
                    max: pred.member_points.len(),
                });
            }
            let diff = pred.size_norm - gt.size_norm(hp.m);
            out.l_s += diff.abs();
            grad.size_norm = hp.lambda_s * sign(diff) / denom;

            let scale = if hp.normalize_lu {
                1.0 / gt.size as f64
            } else {
                1.0
            };
            for (k, (u, u_hat)) in gt.member_points.iter().zip(&pred.member_points).enumerate() {
                let dx = u_hat.x - u.x;
                let dy = u_hat.y - u.y;
                out.l_u += scale * (dx.abs() + dy.abs());
                grad.member_points[k] = [
                    hp.lambda_u * scale * sign(dx) / denom,
                    hp.lambda_u * scale * sign(dy) / denom,
                ];
            }
        }
        out.group_grads.push(grad);
    }
    out.l_v /= denom;
    out.l_s /= denom;
    out.l_u /= denom;
    out.total = hp.lambda_v * out.l_v + hp.lambda_s * out.l_s + hp.lambda_u * out.l_u;
    Ok(out)
}

/// Person-class, box L1, GIoU and action losses for one scene.
pub fn individual_loss(
    gts: &[GroundTruthPerson],
    preds: &[IndividualPrediction],
    assignment: &Assignment,
    hp: &HyperParams,
) -> Result<LossBreakdown> {
    check_assignment(assignment, gts.len(), preds.len())?;
    let owners = assignment.column_owners(preds.len());
    let denom = gts.len().max(1) as f64;
    let mut out = LossBreakdown {
        individual_grads: Vec::with_capacity(preds.len()),
        ..Default::default()
    };

    for (j, pred) in preds.iter().enumerate() {
        check_len("action probabilities", hp.n_a, pred.action_probs.len())?;
        let target = owners[j].map(|i| &gts[i]);
        let mut grad = IndividualPredGrad {
            score: 0.0,
            bbox: [0.0; 4],
            action_probs: vec![0.0; hp.n_a],
        };
        let (f, df) = focal_loss(u8::from(target.is_some()), pred.score);
        out.l_c += f;
        grad.score = hp.lambda_c * df / denom;

        if let Some(gt) = target {
            check_len("action label", hp.n_a, gt.action.len())?;
            let b = gt.bbox.to_array();
            let b_hat = pred.bbox.to_array();
            for k in 0..4 {
                let d = b_hat[k] - b[k];
                out.l_b += d.abs();
                grad.bbox[k] += hp.lambda_b * sign(d) / denom;
            }
            let (g, dg) = giou_with_grad(&gt.bbox, &pred.bbox);
            out.l_o += 1.0 - g;
            for k in 0..4 {
                grad.bbox[k] -= hp.lambda_o * dg[k] / denom;
            }
            for (k, (&y, &p)) in gt.action.iter().zip(&pred.action_probs).enumerate() {
                let (f, df) = focal_loss(y, p);
                out.l_a += f;
                grad.action_probs[k] = hp.lambda_a * df / denom;
            }
        }
        out.individual_grads.push(grad);
    }
    out.l_c /= denom;
    out.l_b /= denom;
    out.l_o /= denom;
    out.l_a /= denom;
    out.total = hp.lambda_c * out.l_c
        + hp.lambda_b * out.l_b
        + hp.lambda_o * out.l_o
        + hp.lambda_a * out.l_a;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BBox, Point2};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_hot(n: usize, k: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i == k)).collect()
    }

    fn small_hp() -> HyperParams {
        HyperParams {
            n_v: 3,
            n_a: 3,
            n_q: 4,
            m: 4,
            ..HyperParams::desk()
        }
    }

    #[test]
    fn focal_examples() {
        let (v, _) = focal_loss(1, 1.0 - 1e-6);
        assert!(v < 1e-17);
        let (v1, _) = focal_loss(1, 0.5);
        let (v0, _) = focal_loss(0, 0.5);
        assert_abs_diff_eq!(v1, 0.25 * std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(v0, 0.25 * std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(v1, 0.173287, epsilon = 1e-6);
    }

    #[test]
    fn focal_derivative_matches_central_difference() {
        let h = 1e-6;
        for &y in &[0u8, 1] {
            for i in 1..100 {
                let p = i as f64 / 100.0;
                let (_, d) = focal_loss(y, p);
                let fd = (focal_loss(y, p + h).0 - focal_loss(y, p - h).0) / (2.0 * h);
                assert!((d - fd).abs() <= 1e-6 * d.abs().max(1.0), "y={y} p={p}");
            }
        }
    }

    #[test]
    fn focal_clamps_extremes() {
        let (v, d) = focal_loss(1, 0.0);
        assert!(v.is_finite());
        assert_eq!(d, 0.0);
        let (v, d) = focal_loss(0, 1.0);
        assert!(v.is_finite());
        assert_eq!(d, 0.0);
    }

    fn perfect_scene(hp: &HyperParams) -> (Vec<GroundTruthGroup>, Vec<GroupPrediction>) {
        let gt = GroundTruthGroup {
            activity: one_hot(hp.n_v, 1),
            size: 2,
            member_indices: vec![0, 1],
            member_points: vec![Point2::new(0.2, 0.5), Point2::new(0.4, 0.5)],
        };
        let mut points = gt.member_points.clone();
        points.resize(hp.m, Point2::new(0.5, 0.5));
        let matched = GroupPrediction {
            activity_probs: gt.activity.iter().map(|&a| f64::from(a)).collect(),
            size_norm: gt.size_norm(hp.m),
            member_points: points,
        };
        let idle = GroupPrediction {
            activity_probs: vec![0.0; hp.n_v],
            size_norm: 0.3,
            member_points: vec![Point2::new(0.1, 0.1); hp.m],
        };
        (vec![gt], vec![idle.clone(), matched, idle])
    }

    #[test]
    fn perfect_group_predictions() {
        let hp = small_hp();
        let (gts, preds) = perfect_scene(&hp);
        let a = Assignment {
            map: vec![1],
            total_cost: 0.0,
        };
        let loss = group_loss(&gts, &preds, &a, &hp).unwrap();
        assert!(loss.l_v > 0.0 && loss.l_v < 1e-12);
        assert_eq!(loss.l_s, 0.0);
        assert_eq!(loss.l_u, 0.0);
    }

    #[test]
    fn single_size_offset() {
        let hp = HyperParams {
            n_v: 2,
            m: 4,
            ..HyperParams::desk()
        };
        let gt = GroundTruthGroup {
            activity: one_hot(2, 0),
            size: 1,
            member_indices: vec![0],
            member_points: vec![Point2::new(0.5, 0.5)],
        };
        let pred = GroupPrediction {
            activity_probs: vec![0.5, 0.5],
            size_norm: 0.25 + 0.05,
            member_points: vec![Point2::new(0.5, 0.5); 4],
        };
        let a = Assignment {
            map: vec![0],
            total_cost: 0.0,
        };
        let loss = group_loss(&[gt], &[pred], &a, &hp).unwrap();
        assert_abs_diff_eq!(loss.l_s, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn point_loss_is_not_size_normalized_by_default() {
        let mut hp = small_hp();
        let (gts, mut preds) = perfect_scene(&hp);
        preds[1].member_points[0].x += 0.1;
        preds[1].member_points[1].y -= 0.2;
        let a = Assignment {
            map: vec![1],
            total_cost: 0.0,
        };
        let loss = group_loss(&gts, &preds, &a, &hp).unwrap();
        assert_abs_diff_eq!(loss.l_u, 0.3, epsilon = 1e-12);
        hp.normalize_lu = true;
        let loss = group_loss(&gts, &preds, &a, &hp).unwrap();
        assert_abs_diff_eq!(loss.l_u, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn empty_scene_keeps_only_class_term() {
        let hp = small_hp();
        let preds = vec![
            GroupPrediction {
                activity_probs: vec![0.3, 0.6, 0.1],
                size_norm: 0.5,
                member_points: vec![Point2::new(0.5, 0.5); hp.m],
            };
            2
        ];
        let loss = group_loss(&[], &preds, &Assignment::empty(), &hp).unwrap();
        let expected: f64 = 2.0 * [0.3, 0.6, 0.1].iter().map(|&p| focal_loss(0, p).0).sum::<f64>();
        assert_abs_diff_eq!(loss.l_v, expected, epsilon = 1e-12);
        assert_eq!((loss.l_s, loss.l_u), (0.0, 0.0));
        assert!(loss.total.is_finite());
    }

    #[test]
    fn inconsistent_assignment_rejected() {
        let hp = small_hp();
        let (gts, preds) = perfect_scene(&hp);
        let wrong_rows = Assignment::empty();
        assert!(matches!(
            group_loss(&gts, &preds, &wrong_rows, &hp),
            Err(Error::InconsistentAssignment(_))
        ));
        let out_of_range = Assignment {
            map: vec![9],
            total_cost: 0.0,
        };
        assert!(group_loss(&gts, &preds, &out_of_range, &hp).is_err());
    }

    fn person_scene(hp: &HyperParams) -> (Vec<GroundTruthPerson>, Vec<IndividualPrediction>) {
        let gt = GroundTruthPerson {
            bbox: BBox::new(0.3, 0.4, 0.1, 0.2),
            action: one_hot(hp.n_a, 2),
        };
        let pred = IndividualPrediction {
            score: 0.9,
            bbox: gt.bbox,
            action_probs: gt.action.iter().map(|&a| f64::from(a)).collect(),
        };
        (vec![gt], vec![pred])
    }

    #[test]
    fn perfect_boxes_have_zero_regression_loss() {
        let hp = small_hp();
        let (gts, preds) = person_scene(&hp);
        let a = Assignment {
            map: vec![0],
            total_cost: 0.0,
        };
        let loss = individual_loss(&gts, &preds, &a, &hp).unwrap();
        assert_eq!(loss.l_b, 0.0);
        assert_abs_diff_eq!(loss.l_o, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn shifted_box_l1() {
        let hp = small_hp();
        let (gts, mut preds) = person_scene(&hp);
        preds[0].bbox.cx += 0.1;
        let a = Assignment {
            map: vec![0],
            total_cost: 0.0,
        };
        let loss = individual_loss(&gts, &preds, &a, &hp).unwrap();
        assert_abs_diff_eq!(loss.l_b, 0.1, epsilon = 1e-12);
    }

    /// Random group/individual configuration kept away from kinks and clamps.
    fn random_config(
        rng: &mut ChaCha8Rng,
        hp: &HyperParams,
    ) -> (
        Vec<GroundTruthGroup>,
        Vec<GroupPrediction>,
        Vec<GroundTruthPerson>,
        Vec<IndividualPrediction>,
        Assignment,
        Assignment,
    ) {
        let n_gt = rng.random_range(0..=2);
        let gts: Vec<GroundTruthGroup> = (0..n_gt)
            .map(|_| {
                let size = rng.random_range(1..=hp.m);
                GroundTruthGroup {
                    activity: one_hot(hp.n_v, rng.random_range(0..hp.n_v)),
                    size,
                    member_indices: (0..size).collect(),
                    member_points: (0..size)
                        .map(|_| Point2::new(rng.random(), rng.random()))
                        .collect(),
                }
            })
            .collect();
        let preds: Vec<GroupPrediction> = (0..hp.n_q)
            .map(|_| GroupPrediction {
                activity_probs: (0..hp.n_v).map(|_| rng.random_range(0.01..0.99)).collect(),
                size_norm: rng.random_range(0.01..0.99),
                member_points: (0..hp.m)
                    .map(|_| Point2::new(rng.random(), rng.random()))
                    .collect(),
            })
            .collect();
        let persons: Vec<GroundTruthPerson> = (0..rng.random_range(0..=3))
            .map(|_| GroundTruthPerson {
                bbox: BBox::new(
                    rng.random_range(0.3..0.7),
                    rng.random_range(0.3..0.7),
                    rng.random_range(0.1..0.3),
                    rng.random_range(0.1..0.3),
                ),
                action: one_hot(hp.n_a, rng.random_range(0..hp.n_a)),
            })
            .collect();
        let ipreds: Vec<IndividualPrediction> = (0..hp.n_q)
            .map(|_| IndividualPrediction {
                score: rng.random_range(0.01..0.99),
                bbox: BBox::new(
                    rng.random_range(0.3..0.7),
                    rng.random_range(0.3..0.7),
                    rng.random_range(0.1..0.3),
                    rng.random_range(0.1..0.3),
                ),
                action_probs: (0..hp.n_a).map(|_| rng.random_range(0.01..0.99)).collect(),
            })
            .collect();
        let mut cols: Vec<usize> = (0..hp.n_q).collect();
        for i in (1..cols.len()).rev() {
            cols.swap(i, rng.random_range(0..=i));
        }
        let ga = Assignment {
            map: cols[..gts.len()].to_vec(),
            total_cost: 0.0,
        };
        let ia = Assignment {
            map: cols[..persons.len()].to_vec(),
            total_cost: 0.0,
        };
        (gts, preds, persons, ipreds, ga, ia)
    }

    #[test]
    fn group_gradients_match_finite_differences() {
        let hp = small_hp();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-6;
        for _ in 0..30 {
            let (gts, preds, _, _, ga, _) = random_config(&mut rng, &hp);
            let base = group_loss(&gts, &preds, &ga, &hp).unwrap();
            let eval = |p: &[GroupPrediction]| group_loss(&gts, p, &ga, &hp).unwrap().total;
            for j in 0..preds.len() {
                let mut plus = preds.clone();
                let mut minus = preds.clone();
                plus[j].size_norm += h;
                minus[j].size_norm -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let an = base.group_grads[j].size_norm;
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "size {fd} vs {an}");
                for k in 0..hp.n_v {
                    let mut plus = preds.clone();
                    let mut minus = preds.clone();
                    plus[j].activity_probs[k] += h;
                    minus[j].activity_probs[k] -= h;
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = base.group_grads[j].activity_probs[k];
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "activity {fd} vs {an}");
                }
                for k in 0..hp.m {
                    let mut plus = preds.clone();
                    let mut minus = preds.clone();
                    plus[j].member_points[k].x += h;
                    minus[j].member_points[k].x -= h;
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = base.group_grads[j].member_points[k][0];
                    assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "point {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn individual_gradients_match_finite_differences() {
        let hp = small_hp();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = 1e-6;
        for _ in 0..30 {
            let (_, _, persons, ipreds, _, ia) = random_config(&mut rng, &hp);
            let base = individual_loss(&persons, &ipreds, &ia, &hp).unwrap();
            let eval = |p: &[IndividualPrediction]| individual_loss(&persons, p, &ia, &hp).unwrap().total;
            for j in 0..ipreds.len() {
                let mut plus = ipreds.clone();
                let mut minus = ipreds.clone();
                plus[j].score += h;
                minus[j].score -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let an = base.individual_grads[j].score;
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0));
                for k in 0..4 {
                    let bump = |p: &mut IndividualPrediction, d: f64| {
                        let mut arr = p.bbox.to_array();
                        arr[k] += d;
                        p.bbox = BBox::from_array(arr);
                    };
                    let mut plus = ipreds.clone();
                    let mut minus = ipreds.clone();
                    bump(&mut plus[j], h);
                    bump(&mut minus[j], -h);
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = base.individual_grads[j].bbox[k];
                    assert!((fd - an).abs() <= 1e-5 * an.abs().max(1.0), "box {k}: {fd} vs {an}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn losses_are_nonnegative_and_totals_consistent(seed in any::<u64>()) {
            let hp = small_hp();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gts, preds, persons, ipreds, ga, ia) = random_config(&mut rng, &hp);
            let g = group_loss(&gts, &preds, &ga, &hp).unwrap();
            let i = individual_loss(&persons, &ipreds, &ia, &hp).unwrap();
            let all = LossBreakdown::combine(g, i);
            for c in all.components() {
                prop_assert!(c >= 0.0 && c.is_finite());
            }
            prop_assert!((all.weighted_total(&hp) - all.total).abs() < 1e-9);
        }

        #[test]
        fn permuting_ground_truth_rows_leaves_loss(seed in any::<u64>()) {
            let hp = small_hp();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (gts, preds, persons, ipreds, ga, ia) = random_config(&mut rng, &hp);
            let g1 = group_loss(&gts, &preds, &ga, &hp).unwrap();
            let rev_gts: Vec<_> = gts.iter().rev().cloned().collect();
            let rev_ga = Assignment { map: ga.map.iter().rev().copied().collect(), total_cost: 0.0 };
            let g2 = group_loss(&rev_gts, &preds, &rev_ga, &hp).unwrap();
            prop_assert!((g1.total - g2.total).abs() < 1e-12);
            let i1 = individual_loss(&persons, &ipreds, &ia, &hp).unwrap();
            let rev_p: Vec<_> = persons.iter().rev().cloned().collect();
            let rev_ia = Assignment { map: ia.map.iter().rev().copied().collect(), total_cost: 0.0 };
            let i2 = individual_loss(&rev_p, &ipreds, &rev_ia, &hp).unwrap();
            prop_assert!((i1.total - i2.total).abs() < 1e-12);
        }
    }
}
