//! Pairwise matching costs between ground truth and predictions, and the box
//! geometry they rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    BBox, GroundTruthGroup, GroundTruthPerson, GroupPrediction, HyperParams,
    IndividualPrediction, Point2,
};

/// Lower bound applied to a person score before it divides a distance.
pub const MIN_SCORE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCostWeights {
    pub eta_v: f64,
    pub eta_s: f64,
    pub eta_u: f64,
}

impl Default for GroupCostWeights {
    fn default() -> Self {
        Self {
            eta_v: 2.0,
            eta_s: 1.0,
            eta_u: 5.0,
        }
    }
}

impl From<&HyperParams> for GroupCostWeights {
    fn from(hp: &HyperParams) -> Self {
        Self {
            eta_v: hp.eta_v,
            eta_s: hp.eta_s,
            eta_u: hp.eta_u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualCostWeights {
    pub eta_c: f64,
    pub eta_b: f64,
    pub eta_o: f64,
    pub eta_a: f64,
}

impl Default for IndividualCostWeights {
    fn default() -> Self {
        Self {
            eta_c: 1.0,
            eta_b: 5.0,
            eta_o: 2.0,
            eta_a: 2.0,
        }
    }
}

impl From<&HyperParams> for IndividualCostWeights {
    fn from(hp: &HyperParams) -> Self {
        Self {
            eta_c: hp.eta_c,
            eta_b: hp.eta_b,
            eta_o: hp.eta_o,
            eta_a: hp.eta_a,
        }
    }
}

/// Negated mean agreement between a binary label and class probabilities.
/// Ranges over [-1, 0].
pub fn activity_cost(v: &[u8], v_hat: &[f64]) -> Result<f64> {
    if v.len() != v_hat.len() {
        return Err(Error::LengthMismatch {
            what: "class probabilities",
            expected: v.len(),
            got: v_hat.len(),
        });
    }
    if v.is_empty() {
        return Err(Error::Empty("class vector"));
    }
    let agreement: f64 = v
        .iter()
        .zip(v_hat)
        .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
        .sum();
    Ok(-agreement / v.len() as f64)
}

pub fn size_cost(s: f64, s_hat: f64) -> Result<f64> {
    check_unit("group size", s)?;
    check_unit("predicted group size", s_hat)?;
    Ok((s - s_hat).abs())
}

/// Mean L1 distance between the `S` ground-truth points and the first `S`
/// predicted points.
pub fn points_cost(u: &[Point2], u_hat: &[Point2]) -> Result<f64> {
    let s = u.len();
    if s == 0 || s > u_hat.len() {
        return Err(Error::InvalidGroupSize {
            size: s,
            max: u_hat.len(),
        });
    }
    let sum: f64 = u.iter().zip(u_hat).map(|(a, b)| a.l1(b)).sum();
    Ok(sum / s as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCostBreakdown {
    pub activity: f64,
    pub size: f64,
    pub points: f64,
    pub total: f64,
}

pub fn group_pair_cost_breakdown(
    gt: &GroundTruthGroup,
    pred: &GroupPrediction,
    w: &GroupCostWeights,
    max_group_size: usize,
) -> Result<GroupCostBreakdown> {
    if gt.size == 0 || gt.size > max_group_size {
        return Err(Error::InvalidGroupSize {
            size: gt.size,
            max: max_group_size,
        });
    }
    let activity = activity_cost(&gt.activity, &pred.activity_probs)?;
    let size = size_cost(gt.size_norm(max_group_size), pred.size_norm)?;
    let points = points_cost(&gt.member_points, &pred.member_points)?;
    Ok(GroupCostBreakdown {
        activity,
        size,
        points,
        total: w.eta_v * activity + w.eta_s * size + w.eta_u * points,
    })
}

/// Matching cost between a real ground-truth group and a group prediction.
pub fn group_pair_cost(
    gt: &GroundTruthGroup,
    pred: &GroupPrediction,
    w: &GroupCostWeights,
    max_group_size: usize,
) -> Result<f64> {
    group_pair_cost_breakdown(gt, pred, w, max_group_size).map(|b| b.total)
}

pub fn box_center(b: &BBox) -> Point2 {
    Point2::new(b.cx, b.cy)
}

fn area(c: &[f64; 4]) -> f64 {
    (c[2] - c[0]).max(0.0) * (c[3] - c[1]).max(0.0)
}

fn intersection(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    iw * ih
}

/// Intersection over union on corners clipped to the unit square.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (ca, cb) = (a.clipped_corners(), b.clipped_corners());
    let inter = intersection(&ca, &cb);
    let union = area(&ca) + area(&cb) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Generalized IoU on corners clipped to the unit square.
pub fn giou(a: &BBox, b: &BBox) -> f64 {
    giou_with_grad(a, b).0
}

/// Generalized IoU and its gradient with respect to `pred` as
/// `(cx, cy, w, h)`.
pub fn giou_with_grad(gt: &BBox, pred: &BBox) -> (f64, [f64; 4]) {
    let a = gt.clipped_corners();
    let raw = pred.corners();
    let b = pred.clipped_corners();

    let area_a = area(&a);
    let area_b = area(&b);
    let ix1 = a[0].max(b[0]);
    let iy1 = a[1].max(b[1]);
    let ix2 = a[2].min(b[2]);
    let iy2 = a[3].min(b[3]);
    let iw = (ix2 - ix1).max(0.0);
    let ih = (iy2 - iy1).max(0.0);
    let inter = iw * ih;
    let union = area_a + area_b - inter;
    let ex1 = a[0].min(b[0]);
    let ey1 = a[1].min(b[1]);
    let ex2 = a[2].max(b[2]);
    let ey2 = a[3].max(b[3]);
    let ew = ex2 - ex1;
    let eh = ey2 - ey1;
    let enclosure = ew * eh;

    let mut value = 0.0;
    let mut d_inter = 0.0;
    let mut d_area_b = 0.0;
    let mut d_encl = 0.0;
    if union > 0.0 {
        value += inter / union;
        d_inter += (union + inter) / (union * union);
        d_area_b += -inter / (union * union);
    }
    if enclosure > 0.0 {
        value += union / enclosure - 1.0;
        d_inter += -1.0 / enclosure;
        d_area_b += 1.0 / enclosure;
        d_encl += -union / (enclosure * enclosure);
    }

    // Gradient with respect to the clipped corners of `pred`.
    let mut db = [0.0f64; 4];
    if iw > 0.0 && ih > 0.0 {
        let d_iw = d_inter * ih;
        let d_ih = d_inter * iw;
        if b[2] < a[2] {
            db[2] += d_iw;
        }
        if b[0] > a[0] {
            db[0] -= d_iw;
        }
        if b[3] < a[3] {
            db[3] += d_ih;
        }
        if b[1] > a[1] {
            db[1] -= d_ih;
        }
    }
    if b[2] > b[0] && b[3] > b[1] {
        let bw = b[2] - b[0];
        let bh = b[3] - b[1];
        db[2] += d_area_b * bh;
        db[0] -= d_area_b * bh;
        db[3] += d_area_b * bw;
        db[1] -= d_area_b * bw;
    }
    if enclosure > 0.0 {
        let d_ew = d_encl * eh;
        let d_eh = d_encl * ew;
        if b[2] > a[2] {
            db[2] += d_ew;
        }
        if b[0] < a[0] {
            db[0] -= d_ew;
        }
        if b[3] > a[3] {
            db[3] += d_eh;
        }
        if b[1] < a[1] {
            db[1] -= d_eh;
        }
    }
    // Clipping passes gradient only strictly inside the unit interval.
    for (g, r) in db.iter_mut().zip(raw) {
        if !(r > 0.0 && r < 1.0) {
            *g = 0.0;
        }
    }
    let grad = [
        db[0] + db[2],
        db[1] + db[3],
        0.5 * (db[2] - db[0]),
        0.5 * (db[3] - db[1]),
    ];
    (value, grad)
}

/// L1 distance between two boxes as `(cx, cy, w, h)` vectors.
pub fn box_l1(a: &BBox, b: &BBox) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndividualCostBreakdown {
    pub class: f64,
    pub bbox: f64,
    pub giou: f64,
    pub action: f64,
    pub total: f64,
}

pub fn individual_pair_cost_breakdown(
    gt: &GroundTruthPerson,
    pred: &IndividualPrediction,
    w: &IndividualCostWeights,
) -> Result<IndividualCostBreakdown> {
    let class = -pred.score;
    let bbox = box_l1(&gt.bbox, &pred.bbox);
    let giou = -giou(&gt.bbox, &pred.bbox);
    let action = activity_cost(&gt.action, &pred.action_probs)?;
    Ok(IndividualCostBreakdown {
        class,
        bbox,
        giou,
        action,
        total: w.eta_c * class + w.eta_b * bbox + w.eta_o * giou + w.eta_a * action,
    })
}

pub fn individual_pair_cost(
    gt: &GroundTruthPerson,
    pred: &IndividualPrediction,
    w: &IndividualCostWeights,
) -> Result<f64> {
    individual_pair_cost_breakdown(gt, pred, w).map(|b| b.total)
}

/// Distance from a predicted member point to a predicted person's box center,
/// divided by the person score (clamped to [`MIN_SCORE`]).
pub fn member_point_cost(u_hat: &Point2, pred: &IndividualPrediction) -> f64 {
    u_hat.l2(&box_center(&pred.bbox)) / pred.score.max(MIN_SCORE)
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn one_hot(n: usize, k: usize) -> Vec<u8> {
        (0..n).map(|i| u8::from(i == k)).collect()
    }

    fn as_probs(v: &[u8]) -> Vec<f64> {
        v.iter().map(|&x| f64::from(x)).collect()
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    /// Corner-form area computed independently of the module's helpers.
    fn hand_iou_giou(a: [f64; 4], b: [f64; 4]) -> (f64, f64) {
        let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
        let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
        let inter = ix * iy;
        let aa = (a[2] - a[0]) * (a[3] - a[1]);
        let ab = (b[2] - b[0]) * (b[3] - b[1]);
        let union = aa + ab - inter;
        let enc = (a[2].max(b[2]) - a[0].min(b[0])) * (a[3].max(b[3]) - a[1].min(b[1]));
        (inter / union, inter / union - (enc - union) / enc)
    }

    #[test]
    fn activity_cost_examples() {
        let v = one_hot(8, 3);
        assert_eq!(activity_cost(&v, &as_probs(&v)).unwrap(), -1.0);
        let flipped: Vec<f64> = v.iter().map(|&x| 1.0 - f64::from(x)).collect();
        assert_eq!(activity_cost(&v, &flipped).unwrap(), 0.0);
        // -(0.5 + 3 * 0.5) / 4
        let c = activity_cost(&[1, 0, 0, 0], &[0.5; 4]).unwrap();
        assert_abs_diff_eq!(c, -0.5, epsilon = 1e-12);
        assert!(activity_cost(&[1, 0], &[0.5]).is_err());
    }

    #[test]
    fn size_cost_examples() {
        assert_eq!(size_cost(0.25, 0.25).unwrap(), 0.0);
        assert_abs_diff_eq!(size_cost(0.25, 0.30).unwrap(), 0.05, epsilon = 1e-12);
        assert_eq!(size_cost(0.0, 1.0).unwrap(), 1.0);
        assert!(size_cost(1.5, 0.0).is_err());
        assert!(size_cost(0.5, -0.1).is_err());
    }

    #[test]
    fn points_cost_examples() {
        let u_hat = pts(&[(0.2, 0.2), (0.3, 0.1), (0.9, 0.9)]);
        assert_eq!(points_cost(&u_hat[..2], &u_hat).unwrap(), 0.0);
        let u = pts(&[(0.1, 0.2), (0.3, 0.4)]);
        // |0.1-0.2| + 0 = 0.1 ; 0 + |0.4-0.1| = 0.3 ; mean 0.2
        assert_abs_diff_eq!(points_cost(&u, &u_hat).unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(
            points_cost(&pts(&[(0.0, 0.0)]), &pts(&[(1.0, 1.0), (0.5, 0.5)])).unwrap(),
            2.0
        );
        assert!(points_cost(&[], &u_hat).is_err());
        assert!(points_cost(&pts(&[(0.0, 0.0); 4]), &u_hat).is_err());
    }

    fn group(size: usize, class: usize, m: usize) -> (GroundTruthGroup, GroupPrediction) {
        let points: Vec<Point2> = (0..size)
            .map(|k| Point2::new(0.1 + 0.1 * k as f64, 0.5))
            .collect();
        let gt = GroundTruthGroup {
            activity: one_hot(8, class),
            size,
            member_indices: (0..size).collect(),
            member_points: points.clone(),
        };
        let mut pred_points = points;
        pred_points.resize(m, Point2::new(0.5, 0.5));
        let pred = GroupPrediction {
            activity_probs: as_probs(&gt.activity),
            size_norm: size as f64 / m as f64,
            member_points: pred_points,
        };
        (gt, pred)
    }

    #[test]
    fn group_pair_cost_examples() {
        let w = GroupCostWeights::default();
        let (gt, pred) = group(3, 2, 12);
        assert_abs_diff_eq!(group_pair_cost(&gt, &pred, &w, 12).unwrap(), -2.0, epsilon = 1e-12);

        // Worst case: flipped probabilities, size gap 1, L1 gap 2 per point.
        let gt = GroundTruthGroup {
            activity: one_hot(8, 0),
            size: 12,
            member_indices: (0..12).collect(),
            member_points: vec![Point2::new(0.0, 0.0); 12],
        };
        let pred = GroupPrediction {
            activity_probs: gt.activity.iter().map(|&x| 1.0 - f64::from(x)).collect(),
            size_norm: 0.0,
            member_points: vec![Point2::new(1.0, 1.0); 12],
        };
        assert_abs_diff_eq!(group_pair_cost(&gt, &pred, &w, 12).unwrap(), 11.0, epsilon = 1e-12);

        let zero = GroupCostWeights {
            eta_v: 0.0,
            eta_s: 0.0,
            eta_u: 0.0,
        };
        assert_eq!(group_pair_cost(&gt, &pred, &zero, 12).unwrap(), 0.0);
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.5, 0.5, 1.0, 1.0);
        assert_eq!(iou(&a, &a), 1.0);
        let small = BBox::new(0.2, 0.2, 0.1, 0.1);
        let far = BBox::new(0.8, 0.8, 0.1, 0.1);
        assert_eq!(iou(&small, &far), 0.0);
        // B spans [0.5, 1.5] in x and clips to [0.5, 1]: overlap 0.5, union 1.
        let b = BBox::new(1.0, 0.5, 1.0, 1.0);
        let (hand, _) = hand_iou_giou([0.0, 0.0, 1.0, 1.0], [0.5, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(iou(&a, &b), hand, epsilon = 1e-12);
        assert_abs_diff_eq!(hand, 0.5, epsilon = 1e-12);
        // Clipped enclosure is A itself, which equals the union.
        assert_abs_diff_eq!(giou(&a, &b), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iou_unclipped_half_overlap_is_one_third() {
        // Corner oracle without clipping: [0,0,1,1] vs [.5,0,1.5,1].
        let (i, g) = hand_iou_giou([0.0, 0.0, 1.0, 1.0], [0.5, 0.0, 1.5, 1.0]);
        assert_abs_diff_eq!(i, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g, 1.0 / 3.0, epsilon = 1e-12);
        // The same layout shrunk into the unit square is unaffected by clipping.
        let a = BBox::from_corners(0.0, 0.0, 0.4, 0.4);
        let b = BBox::from_corners(0.2, 0.0, 0.6, 0.4);
        assert_abs_diff_eq!(iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(giou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn giou_examples() {
        let a = BBox::new(0.4, 0.3, 0.2, 0.3);
        assert_abs_diff_eq!(giou(&a, &a), 1.0, epsilon = 1e-12);
        // Abutting squares: IoU 0, enclosure equals union, so GIoU 0.
        let left = BBox::from_corners(0.0, 0.0, 0.5, 0.5);
        let right = BBox::from_corners(0.5, 0.0, 1.0, 0.5);
        let (_, hand) = hand_iou_giou([0.0, 0.0, 1.0, 1.0], [1.0, 0.0, 2.0, 1.0]);
        assert_eq!(hand, 0.0);
        assert_abs_diff_eq!(giou(&left, &right), 0.0, epsilon = 1e-12);
        // Separated boxes go negative.
        let far = BBox::from_corners(0.8, 0.8, 1.0, 1.0);
        let near = BBox::from_corners(0.0, 0.0, 0.2, 0.2);
        let (_, hand) = hand_iou_giou([0.0, 0.0, 0.2, 0.2], [0.8, 0.8, 1.0, 1.0]);
        assert_abs_diff_eq!(giou(&near, &far), hand, epsilon = 1e-12);
        assert!(hand < 0.0);
    }

    #[test]
    fn degenerate_boxes() {
        let a = BBox::new(0.5, 0.5, 0.2, 0.2);
        let line = BBox::new(0.5, 0.5, 0.0, 0.2);
        assert_eq!(iou(&a, &line), 0.0);
        // Union is the larger area and the enclosure is `a`, so GIoU is 0.
        assert_abs_diff_eq!(giou(&a, &line), 0.0, epsilon = 1e-12);
        let dot = BBox::new(0.5, 0.5, 0.0, 0.0);
        assert_eq!(iou(&dot, &dot), 0.0);
        assert_eq!(giou(&dot, &dot), 0.0);
    }

    #[test]
    fn box_center_examples() {
        assert_eq!(box_center(&BBox::new(0.5, 0.5, 0.2, 0.1)), Point2::new(0.5, 0.5));
        assert_eq!(box_center(&BBox::new(0.1, 0.9, 0.05, 0.05)), Point2::new(0.1, 0.9));
        let b = BBox::new(0.3, 0.6, 0.2, 0.4);
        let [x1, y1, x2, y2] = b.corners();
        let back = BBox::from_corners(x1, y1, x2, y2);
        assert_abs_diff_eq!(box_center(&back).x, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(box_center(&back).y, 0.6, epsilon = 1e-15);
    }

    fn person(n_a: usize) -> (GroundTruthPerson, IndividualPrediction) {
        let gt = GroundTruthPerson {
            bbox: BBox::new(0.4, 0.5, 0.1, 0.3),
            action: one_hot(n_a, 1),
        };
        let pred = IndividualPrediction {
            score: 1.0,
            bbox: gt.bbox,
            action_probs: as_probs(&gt.action),
        };
        (gt, pred)
    }

    #[test]
    fn individual_pair_cost_examples() {
        let w = IndividualCostWeights::default();
        let (gt, mut pred) = person(9);
        assert_abs_diff_eq!(individual_pair_cost(&gt, &pred, &w).unwrap(), -5.0, epsilon = 1e-12);
        pred.score = 0.0;
        assert_abs_diff_eq!(individual_pair_cost(&gt, &pred, &w).unwrap(), -4.0, epsilon = 1e-12);
        let zero = IndividualCostWeights {
            eta_c: 0.0,
            eta_b: 0.0,
            eta_o: 0.0,
            eta_a: 0.0,
        };
        assert_eq!(individual_pair_cost(&gt, &pred, &zero).unwrap(), 0.0);
        pred.action_probs.pop();
        assert!(individual_pair_cost(&gt, &pred, &w).is_err());
    }

    #[test]
    fn member_point_cost_examples() {
        let mut pred = IndividualPrediction {
            score: 0.8,
            bbox: BBox::new(0.5, 0.5, 0.1, 0.1),
            action_probs: vec![0.5],
        };
        assert_eq!(member_point_cost(&Point2::new(0.5, 0.5), &pred), 0.0);
        pred.bbox = BBox::new(0.5, 0.6, 0.1, 0.1);
        pred.score = 0.5;
        // 3-4-5 triangle scaled by 0.1.
        assert_abs_diff_eq!(
            member_point_cost(&Point2::new(0.2, 0.2), &pred),
            1.0,
            epsilon = 1e-12
        );
        pred.score = 0.0;
        assert_abs_diff_eq!(
            member_point_cost(&Point2::new(0.2, 0.2), &pred),
            0.5 / MIN_SCORE,
            epsilon = 1e-9
        );
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.1f64..0.9, 0.1f64..0.9, 0.02f64..0.4, 0.02f64..0.4)
            .prop_map(|(cx, cy, w, h)| BBox::new(cx, cy, w, h))
    }

    proptest! {
        #[test]
        fn activity_cost_bounds_and_complement_symmetry(
            class in 0usize..6,
            probs in proptest::collection::vec(0.0f64..=1.0, 6),
        ) {
            let v = one_hot(6, class);
            let c = activity_cost(&v, &probs).unwrap();
            prop_assert!((-1.0..=0.0).contains(&c));
            let v_c: Vec<u8> = v.iter().map(|&x| 1 - x).collect();
            let p_c: Vec<f64> = probs.iter().map(|p| 1.0 - p).collect();
            prop_assert!((activity_cost(&v_c, &p_c).unwrap() - c).abs() < 1e-12);
        }

        #[test]
        fn giou_symmetric_and_below_iou(a in arb_box(), b in arb_box()) {
            let g = giou(&a, &b);
            prop_assert!((g - giou(&b, &a)).abs() < 1e-12);
            prop_assert!(g <= iou(&a, &b) + 1e-12);
            prop_assert!(g > -1.0 && g <= 1.0);
        }

        #[test]
        fn points_cost_translation_covariant(
            raw in proptest::collection::vec((0.2f64..0.8, 0.2f64..0.8), 1..6),
            dx in -0.15f64..0.15,
            dy in -0.15f64..0.15,
        ) {
            let s = raw.len() / 2 + 1;
            let u = pts(&raw[..s]);
            let mut u_hat = pts(&raw);
            u_hat.resize(6, Point2::new(0.5, 0.5));
            let shift = |p: &Point2| Point2::new(p.x + dx, p.y + dy);
            let u2: Vec<Point2> = u.iter().map(shift).collect();
            let mut u_hat2 = u_hat.clone();
            for p in &mut u_hat2[..s] {
                *p = shift(p);
            }
            let a = points_cost(&u, &u_hat).unwrap();
            let b = points_cost(&u2, &u_hat2).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn member_point_cost_decreases_with_score(
            x in 0.0f64..1.0,
            lo in 0.01f64..0.5,
            gap in 0.01f64..0.5,
        ) {
            let mut pred = IndividualPrediction {
                score: lo,
                bbox: BBox::new(0.5, 0.5, 0.1, 0.1),
                action_probs: vec![],
            };
            let u = Point2::new(x, 0.1);
            let c_lo = member_point_cost(&u, &pred);
            pred.score = lo + gap;
            prop_assert!(member_point_cost(&u, &pred) < c_lo);
        }
    }
}
