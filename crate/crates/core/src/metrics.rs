//! Scene-level evaluation: activity accuracy, group identification accuracy,
//! social-group mAP, and the stability of member-point orderings.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, CostMatrix};
use crate::costs::iou;
use crate::error::{Error, Result};
use crate::inference::{identify_members, select_top_group, GroupMembership};
use crate::types::{
    BBox, GroundTruthGroup, GroupPrediction, IndividualPrediction, Point2, PointOrder, Scene,
};

pub const IOU_THRESHOLD: f64 = 0.5;

/// Model output for one scene next to its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneResult<'a> {
    pub scene: &'a Scene,
    pub groups: Vec<GroupPrediction>,
    pub individuals: Vec<IndividualPrediction>,
}

fn first_group<'a>(index: usize, r: &'a SceneResult<'_>) -> Result<&'a GroundTruthGroup> {
    r.scene.groups.first().ok_or_else(|| Error::InvalidScene {
        index,
        violations: "no ground-truth group".into(),
    })
}

fn check_nonempty(results: &[SceneResult<'_>]) -> Result<()> {
    if results.is_empty() {
        Err(Error::Empty("evaluation results"))
    } else {
        Ok(())
    }
}

/// True when the boxes can be paired one-to-one with every pair's IoU above
/// `threshold`, using the pairing that minimizes total `1 − IoU`.
pub fn boxes_match(pred: &[BBox], gt: &[BBox], threshold: f64) -> bool {
    if pred.len() != gt.len() {
        return false;
    }
    if gt.is_empty() {
        return true;
    }
    let costs = CostMatrix::from_fn(gt.len(), pred.len(), |r, c| 1.0 - iou(&gt[r], &pred[c]));
    match solve_assignment(&costs) {
        Ok(a) => a.pairs().all(|(r, c)| iou(&gt[r], &pred[c]) > threshold),
        Err(_) => false,
    }
}

fn membership_matches(
    membership: &GroupMembership,
    individuals: &[IndividualPrediction],
    scene: &Scene,
    gt: &GroundTruthGroup,
    threshold: f64,
) -> bool {
    if membership.truncated || membership.decoded_size != gt.size {
        return false;
    }
    let pred: Vec<BBox> = membership
        .member_pred_indices
        .iter()
        .map(|&i| individuals[i].bbox)
        .collect();
    let truth: Vec<BBox> = gt
        .member_indices
        .iter()
        .map(|&i| scene.persons[i].bbox)
        .collect();
    boxes_match(&pred, &truth, threshold)
}

/// Fraction of scenes whose top-scoring activity equals the first
/// ground-truth group's activity.
pub fn group_activity_accuracy(results: &[SceneResult<'_>]) -> Result<f64> {
    check_nonempty(results)?;
    let mut correct = 0usize;
    for (i, r) in results.iter().enumerate() {
        let gt = first_group(i, r)?;
        let (_, class) = select_top_group(&r.groups)?;
        if gt.activity_class() == Some(class) {
            correct += 1;
        }
    }
    Ok(correct as f64 / results.len() as f64)
}

/// Fraction of scenes where the top group has the right activity, the right
/// size, and member boxes that all overlap the ground truth by more than
/// `threshold` IoU.
pub fn group_identification_accuracy(
    results: &[SceneResult<'_>],
    m: usize,
    threshold: f64,
) -> Result<f64> {
    check_nonempty(results)?;
    let mut correct = 0usize;
    for (i, r) in results.iter().enumerate() {
        let gt = first_group(i, r)?;
        let (q, class) = select_top_group(&r.groups)?;
        if gt.activity_class() != Some(class) {
            continue;
        }
        let membership = identify_members(q, &r.groups[q], &r.individuals, m)?;
        if membership_matches(&membership, &r.individuals, r.scene, gt, threshold) {
            correct += 1;
        }
    }
    Ok(correct as f64 / results.len() as f64)
}

/// Area under the precision-recall curve after making precision
/// monotonically non-increasing in recall.
pub fn average_precision(tp: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (k, &t) in tp.iter().enumerate() {
        if t {
            hits += 1;
        }
        precision.push(hits as f64 / (k + 1) as f64);
        recall.push(hits as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    ap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    /// AP per activity class; `None` for classes without ground truth.
    pub per_class: Vec<Option<f64>>,
}

struct Detection {
    scene: usize,
    query: usize,
    score: f64,
}

/// Mean over activity classes of the AP of group detections. Every query is
/// a detection of its most probable class, scored by that probability. A
/// detection is a true positive when it can be paired with a not yet matched
/// ground-truth group of its class in the same scene: equal size and all
/// member boxes above `threshold` IoU.
pub fn social_group_map(
    results: &[SceneResult<'_>],
    n_classes: usize,
    m: usize,
    threshold: f64,
) -> Result<MapReport> {
    let mut n_gt = vec![0usize; n_classes];
    for r in results {
        for g in &r.scene.groups {
            if let Some(c) = g.activity_class().filter(|&c| c < n_classes) {
                n_gt[c] += 1;
            }
        }
    }
    if n_gt.iter().all(|&n| n == 0) {
        return Err(Error::Empty("ground-truth groups"));
    }

    let mut detections: Vec<Vec<Detection>> = (0..n_classes).map(|_| Vec::new()).collect();
    let mut memberships = Vec::with_capacity(results.len());
    for (s, r) in results.iter().enumerate() {
        let mut scene_members = Vec::with_capacity(r.groups.len());
        for (q, g) in r.groups.iter().enumerate() {
            if let Some((c, score)) = g.top_activity().filter(|&(c, _)| c < n_classes) {
                detections[c].push(Detection {
                    scene: s,
                    query: q,
                    score,
                });
            }
            scene_members.push(identify_members(q, g, &r.individuals, m)?);
        }
        memberships.push(scene_members);
    }

    let mut per_class = vec![None; n_classes];
    for (c, dets) in detections.iter_mut().enumerate() {
        if n_gt[c] == 0 {
            continue;
        }
        dets.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.scene.cmp(&b.scene))
                .then(a.query.cmp(&b.query))
        });
        let mut used: Vec<Vec<bool>> = results
            .iter()
            .map(|r| vec![false; r.scene.groups.len()])
            .collect();
        let tp: Vec<bool> = dets
            .iter()
            .map(|d| {
                let r = &results[d.scene];
                let membership = &memberships[d.scene][d.query];
                let hit = r.scene.groups.iter().enumerate().position(|(gi, gt)| {
                    !used[d.scene][gi]
                        && gt.activity_class() == Some(c)
                        && membership_matches(membership, &r.individuals, r.scene, gt, threshold)
                });
                if let Some(gi) = hit {
                    used[d.scene][gi] = true;
                }
                hit.is_some()
            })
            .collect();
        per_class[c] = Some(average_precision(&tp, n_gt[c]));
    }
    let aps: Vec<f64> = per_class.iter().flatten().copied().collect();
    Ok(MapReport {
        map: aps.iter().sum::<f64>() / aps.len() as f64,
        per_class,
    })
}

fn sorted_order(points: &[Point2], order: PointOrder) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| order.compare(&points[a], &points[b]).then(Ordering::Equal));
    idx
}

/// Fraction of perturbation trials in which adding `N(0, σ²)` noise to each
/// member-box center coordinate changes the sorted order of a group's
/// members. Groups with fewer than two members are skipped.
pub fn order_change_ratio(
    scenes: &[Scene],
    order: PointOrder,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut changed, mut total) = (0usize, 0usize);
    for scene in scenes {
        for g in scene.groups.iter().filter(|g| g.member_indices.len() >= 2) {
            let centers: Vec<Point2> = g
                .member_indices
                .iter()
                .map(|&i| scene.persons[i].bbox.center())
                .collect();
            let base = sorted_order(&centers, order);
            for _ in 0..trials {
                let noisy: Vec<Point2> = centers
                    .iter()
                    .map(|p| Point2::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
                    .collect();
                if sorted_order(&noisy, order) != base {
                    changed += 1;
                }
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Empty("groups with at least two members"));
    }
    Ok(changed as f64 / total as f64)
}
