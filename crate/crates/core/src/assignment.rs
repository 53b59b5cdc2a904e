//! Minimum-cost bipartite assignment on rectangular cost matrices.
//!
//! [`solve_assignment`] runs the O(R²·C) shortest-augmenting-path form of the
//! Hungarian method and then walks the equality subgraph of the resulting
//! dual solution to pick the lexicographically smallest optimal map, so
//! equal-cost optima resolve the same way as [`brute_force_assignment`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "cost matrix entries",
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::LengthMismatch {
                    what: "cost matrix row",
                    expected: cols,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    /// Sum of the entries selected by `map` (row `i` → column `map[i]`).
    pub fn cost_of(&self, map: &[usize]) -> f64 {
        map.iter().enumerate().map(|(r, &c)| self.get(r, c)).sum()
    }

    fn check(&self) -> Result<()> {
        if self.rows > self.cols {
            return Err(Error::MoreRowsThanColumns {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if let Some(pos) = self.entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCost {
                row: pos / self.cols,
                col: pos % self.cols,
            });
        }
        Ok(())
    }

    /// Two costs closer than this are treated as equal when breaking ties.
    fn tie_tolerance(&self) -> f64 {
        let scale = self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-10 * (1.0 + scale)
    }
}

/// Injective row → column map with its total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// `map[row]` is the column assigned to `row`.
    pub map: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    pub fn empty() -> Self {
        Self {
            map: Vec::new(),
            total_cost: 0.0,
        }
    }

    /// Inverse view: for each of `cols` columns, the row assigned to it.
    pub fn column_owners(&self, cols: usize) -> Vec<Option<usize>> {
        let mut owners = vec![None; cols];
        for (r, &c) in self.map.iter().enumerate() {
            if c < cols {
                owners[c] = Some(r);
            }
        }
        owners
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map.iter().copied().enumerate()
    }
}

/// Optimal assignment of every row to a distinct column (rows ≤ cols).
///
/// Among equal-cost optima the lexicographically smallest map (compared row
/// by row) is returned.
pub fn solve_assignment(m: &CostMatrix) -> Result<Assignment> {
    m.check()?;
    if m.rows == 0 {
        return Ok(Assignment::empty());
    }
    let duals = shortest_augmenting_path(m);
    let map = lexicographic_refinement(m, &duals);
    let total_cost = m.cost_of(&map);
    Ok(Assignment { map, total_cost })
}

struct Duals {
    /// Row potentials, 1-based (index 0 unused).
    u: Vec<f64>,
    /// Column potentials, 1-based; never positive.
    v: Vec<f64>,
    /// `owner[j]` is the 1-based row matched to 1-based column `j`, 0 if free.
    owner: Vec<usize>,
}

fn shortest_augmenting_path(m: &CostMatrix) -> Duals {
    let (n, cols) = (m.rows, m.cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0.0; cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = m.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    Duals { u, v, owner }
}

/// Picks the lexicographically smallest perfect matching in the equality
/// subgraph of the square problem obtained by padding with zero-cost rows.
/// Every such matching is optimal, and every optimum lies in the subgraph.
fn lexicographic_refinement(m: &CostMatrix, duals: &Duals) -> Vec<usize> {
    let (n, cols) = (m.rows, m.cols);
    let tol = m.tie_tolerance();

    // Padded rows have potential 0; their tight columns are those with v ≈ 0.
    let pad_tight: Vec<usize> = (0..cols).filter(|&j| -duals.v[j + 1] <= tol).collect();
    let real_tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let row = m.row(i);
            (0..cols)
                .filter(|&j| row[j] - duals.u[i + 1] - duals.v[j + 1] <= tol)
                .collect()
        })
        .collect();
    let tight = |r: usize| -> &[usize] {
        if r < n {
            &real_tight[r]
        } else {
            &pad_tight
        }
    };

    // Rows n..cols are padding; give each a free column.
    let mut row_col = vec![usize::MAX; cols];
    let mut col_row = vec![usize::MAX; cols];
    for j in 1..=cols {
        if duals.owner[j] != 0 {
            row_col[duals.owner[j] - 1] = j - 1;
            col_row[j - 1] = duals.owner[j] - 1;
        }
    }
    let mut next_pad = n;
    for j in 0..cols {
        if col_row[j] == usize::MAX {
            row_col[next_pad] = j;
            col_row[j] = next_pad;
            next_pad += 1;
        }
    }

    let mut col_fixed = vec![false; cols];
    let mut prev_row = vec![usize::MAX; cols];
    let mut visited_col = vec![false; cols];
    let mut queue = std::collections::VecDeque::new();

    for i in 0..n {
        let current = row_col[i];
        for &j in tight(i) {
            if j >= current {
                break;
            }
            if col_fixed[j] {
                continue;
            }
            // Move i onto j; the row k that held j must reach the column i
            // frees, through alternating paths over unfixed rows and columns.
            let k = col_row[j];
            visited_col.fill(false);
            visited_col[j] = true;
            queue.clear();
            queue.push_back(k);
            let mut found = false;
            'bfs: while let Some(r) = queue.pop_front() {
                for &c in tight(r) {
                    if col_fixed[c] || visited_col[c] {
                        continue;
                    }
                    visited_col[c] = true;
                    prev_row[c] = r;
                    if c == current {
                        found = true;
                        break 'bfs;
                    }
                    queue.push_back(col_row[c]);
                }
            }
            if !found {
                continue;
            }
            // Augment back from `current` to k.
            let mut c = current;
            loop {
                let r = prev_row[c];
                let old = row_col[r];
                row_col[r] = c;
                col_row[c] = r;
                if r == k {
                    break;
                }
                c = old;
            }
            row_col[i] = j;
            col_row[j] = i;
            break;
        }
        col_fixed[row_col[i]] = true;
    }
    row_col.truncate(n);
    row_col
}

/// Exhaustive minimum over all injective maps, in lexicographic order so the
/// first optimum found is the lexicographically smallest. Limited to 9 columns.
pub fn brute_force_assignment(m: &CostMatrix) -> Result<Assignment> {
    if m.cols > 9 {
        return Err(Error::OracleSizeLimit { cols: m.cols });
    }
    m.check()?;
    let tol = m.tie_tolerance();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(m.rows);
    let mut used = vec![false; m.cols];
    enumerate(m, 0, &mut current, &mut used, &mut best, tol);
    let (_, map) = best.unwrap_or((0.0, Vec::new()));
    let total_cost = m.cost_of(&map);
    Ok(Assignment { map, total_cost })
}

fn enumerate(
    m: &CostMatrix,
    row: usize,
    current: &mut Vec<usize>,
    used: &mut [bool],
    best: &mut Option<(f64, Vec<usize>)>,
    tol: f64,
) {
    if row == m.rows {
        let cost = m.cost_of(current);
        if best.as_ref().is_none_or(|(b, _)| cost < *b - tol) {
            *best = Some((cost, current.clone()));
        }
        return;
    }
    for c in 0..m.cols {
        if used[c] {
            continue;
        }
        used[c] = true;
        current.push(c);
        enumerate(m, row + 1, current, used, best, tol);
        current.pop();
        used[c] = false;
    }
}
