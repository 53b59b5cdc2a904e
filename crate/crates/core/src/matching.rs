//! Ground truth ↔ prediction matching for groups and individuals.
//!
//! Predictions left unassigned are the "no activity" / "no person" padding.
//! Padding rows cost zero against every prediction, so they never enter the
//! matrix: a real-rows × predictions problem is solved directly.
//! [`padded_square_assignment`] solves the explicitly padded form for
//! comparison.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment, Assignment, CostMatrix};
use crate::costs::{
    group_pair_cost, group_pair_cost_breakdown, individual_pair_cost,
    individual_pair_cost_breakdown, GroupCostBreakdown, GroupCostWeights,
    IndividualCostBreakdown, IndividualCostWeights,
};
use crate::error::{Error, Result};
use crate::types::{GroundTruthGroup, GroundTruthPerson, GroupPrediction, IndividualPrediction};

fn check_counts(gts: usize, preds: usize) -> Result<()> {
    if gts > preds {
        Err(Error::TooManyGroundTruths {
            gts,
            queries: preds,
        })
    } else {
        Ok(())
    }
}

fn build_matrix(
    rows: usize,
    cols: usize,
    mut cost: impl FnMut(usize, usize) -> Result<f64>,
) -> Result<CostMatrix> {
    let mut entries = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            entries.push(cost(r, c)?);
        }
    }
    CostMatrix::new(rows, cols, entries)
}

pub fn group_cost_matrix(
    gts: &[GroundTruthGroup],
    preds: &[GroupPrediction],
    w: &GroupCostWeights,
    max_group_size: usize,
) -> Result<CostMatrix> {
    build_matrix(gts.len(), preds.len(), |r, c| {
        group_pair_cost(&gts[r], &preds[c], w, max_group_size)
    })
}

pub fn individual_cost_matrix(
    gts: &[GroundTruthPerson],
    preds: &[IndividualPrediction],
    w: &IndividualCostWeights,
) -> Result<CostMatrix> {
    build_matrix(gts.len(), preds.len(), |r, c| {
        individual_pair_cost(&gts[r], &preds[c], w)
    })
}

/// Optimal assignment of ground-truth groups to group predictions.
pub fn match_groups(
    gts: &[GroundTruthGroup],
    preds: &[GroupPrediction],
    w: &GroupCostWeights,
    max_group_size: usize,
) -> Result<Assignment> {
    check_counts(gts.len(), preds.len())?;
    if gts.is_empty() {
        return Ok(Assignment::empty());
    }
    solve_assignment(&group_cost_matrix(gts, preds, w, max_group_size)?)
}

/// Optimal assignment of ground-truth persons to individual predictions.
pub fn match_individuals(
    gts: &[GroundTruthPerson],
    preds: &[IndividualPrediction],
    w: &IndividualCostWeights,
) -> Result<Assignment> {
    check_counts(gts.len(), preds.len())?;
    if gts.is_empty() {
        return Ok(Assignment::empty());
    }
    solve_assignment(&individual_cost_matrix(gts, preds, w)?)
}

/// Pads `m` with zero-cost rows up to a square matrix, solves it, and keeps
/// the real rows.
pub fn padded_square_assignment(m: &CostMatrix) -> Result<Assignment> {
    check_counts(m.rows(), m.cols())?;
    let n = m.cols();
    let square = CostMatrix::from_fn(n, n, |r, c| if r < m.rows() { m.get(r, c) } else { 0.0 });
    let full = solve_assignment(&square)?;
    let map = full.map[..m.rows()].to_vec();
    let total_cost = m.cost_of(&map);
    Ok(Assignment { map, total_cost })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMatchReport {
    pub gt: usize,
    pub pred: usize,
    pub cost: GroupCostBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualMatchReport {
    pub gt: usize,
    pub pred: usize,
    pub cost: IndividualCostBreakdown,
}

/// Matched pairs with per-component costs, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub group_total_cost: f64,
    pub groups: Vec<GroupMatchReport>,
    pub individual_total_cost: f64,
    pub individuals: Vec<IndividualMatchReport>,
}

pub fn match_report(
    groups: &[GroundTruthGroup],
    group_preds: &[GroupPrediction],
    persons: &[GroundTruthPerson],
    individual_preds: &[IndividualPrediction],
    gw: &GroupCostWeights,
    iw: &IndividualCostWeights,
    max_group_size: usize,
) -> Result<MatchReport> {
    let ga = match_groups(groups, group_preds, gw, max_group_size)?;
    let ia = match_individuals(persons, individual_preds, iw)?;
    let group_rows = ga
        .pairs()
        .map(|(g, p)| {
            Ok(GroupMatchReport {
                gt: g,
                pred: p,
                cost: group_pair_cost_breakdown(&groups[g], &group_preds[p], gw, max_group_size)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let individual_rows = ia
        .pairs()
        .map(|(g, p)| {
            Ok(IndividualMatchReport {
                gt: g,
                pred: p,
                cost: individual_pair_cost_breakdown(&persons[g], &individual_preds[p], iw)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MatchReport {
        group_total_cost: ga.total_cost,
        groups: group_rows,
        individual_total_cost: ia.total_cost,
        individuals: individual_rows,
    })
}
