//! Synthetic scenes on a grid of person slots.
//!
//! The image is divided into `grid_rows × grid_cols` cells. Each group fills
//! the leftmost cells of its own row, so members stand side by side at the
//! same height; distractors (persons outside any group) take random free
//! cells. Every cell yields one token: persons first, in shuffled person
//! order, then the empty cells.
//!
//! Token layout, before additive Gaussian noise:
//!
//! | slice            | content                                        |
//! |------------------|------------------------------------------------|
//! | `0..4`           | box `(cx, cy, w, h)`, zeros for empty cells    |
//! | `4..4+N_a`       | action one-hot                                 |
//! | next `N_v`       | group activity one-hot × `group_feature_scale`, |
//! |                  | zeros outside groups                           |
//! | next 1           | group size / M × `group_feature_scale`, zero   |
//! |                  | outside groups                                 |
//! | next `grid_rows` | row one-hot × `position_scale`                 |
//! | next `grid_cols` | column one-hot × `position_scale`              |
//! | rest             | zeros                                          |

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    sort_member_points, validate_scene, write_scenes_jsonl, BBox, GroundTruthGroup,
    GroundTruthPerson, HyperParams, PointOrder, Scene,
};

pub const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Inclusive range for the number of groups per scene.
    pub n_groups_range: (usize, usize),
    /// Inclusive range for the number of members per group.
    pub group_size_range: (usize, usize),
    /// Inclusive range for the number of persons outside any group.
    pub n_distractors_range: (usize, usize),
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N_a")]
    pub n_a: usize,
    #[serde(rename = "D_tok")]
    pub d_tok: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub noise_sigma: f64,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Maximum center offset from the cell center, as a fraction of the cell.
    pub jitter: f64,
    /// Value written into the row and column one-hots.
    pub position_scale: f64,
    /// Value written into the activity one-hot of group members; also
    /// multiplies their size fraction.
    pub group_feature_scale: f64,
    pub point_order: PointOrder,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_groups_range: (1, 1),
            group_size_range: (2, 4),
            n_distractors_range: (0, 3),
            n_v: 4,
            n_a: 4,
            d_tok: 24,
            m: 6,
            noise_sigma: 0.01,
            grid_rows: 3,
            grid_cols: 4,
            jitter: 0.08,
            position_scale: 4.0,
            group_feature_scale: 8.0,
            point_order: PointOrder::AscX,
        }
    }
}

impl SynthConfig {
    /// Generator settings consistent with `hp`.
    pub fn for_hyper_params(hp: &HyperParams) -> Self {
        Self {
            n_v: hp.n_v,
            n_a: hp.n_a,
            d_tok: hp.d_tok,
            m: hp.m,
            point_order: hp.point_order,
            ..Self::default()
        }
    }

    pub fn cells(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Length of the meaningful prefix of each token.
    pub fn token_features(&self) -> usize {
        4 + self.n_a + self.n_v + 1 + self.grid_rows + self.grid_cols
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, (lo, hi)) in [
            ("n_groups_range", self.n_groups_range),
            ("group_size_range", self.group_size_range),
            ("n_distractors_range", self.n_distractors_range),
        ] {
            if lo > hi {
                return bad(format!("{name} has min {lo} > max {hi}"));
            }
        }
        if self.group_size_range.0 == 0 {
            return bad("group sizes must be at least 1".into());
        }
        if self.group_size_range.1 > self.m {
            return Err(Error::InvalidGroupSize {
                size: self.group_size_range.1,
                max: self.m,
            });
        }
        if self.n_v == 0 || self.n_a == 0 || self.grid_rows == 0 || self.grid_cols == 0 {
            return bad("N_v, N_a and grid dimensions must be positive".into());
        }
        if self.d_tok < self.token_features() {
            return bad(format!(
                "D_tok = {} is smaller than the {} token features",
                self.d_tok,
                self.token_features()
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be finite and nonnegative".into());
        }
        if !(self.position_scale.is_finite() && self.group_feature_scale.is_finite()) {
            return bad("feature scales must be finite".into());
        }
        if !(0.0..0.25).contains(&self.jitter) {
            return bad("jitter must be in [0, 0.25)".into());
        }
        Ok(())
    }
}

fn draw_range<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

fn one_hot(n: usize, k: usize) -> Vec<u8> {
    let mut v = vec![0; n];
    v[k] = 1;
    v
}

struct Layout {
    /// Sizes of the groups, one per occupied row.
    group_sizes: Vec<usize>,
    n_distractors: usize,
}

fn draw_layout<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig) -> Result<Layout> {
    let mut reason = String::new();
    for _ in 0..MAX_RETRIES {
        let n_groups = draw_range(rng, cfg.n_groups_range);
        let group_sizes: Vec<usize> = (0..n_groups)
            .map(|_| draw_range(rng, cfg.group_size_range))
            .collect();
        let n_distractors = draw_range(rng, cfg.n_distractors_range);
        let members: usize = group_sizes.iter().sum();
        if n_groups > cfg.grid_rows {
            reason = format!("{n_groups} groups for {} rows", cfg.grid_rows);
        } else if let Some(s) = group_sizes.iter().find(|&&s| s > cfg.grid_cols) {
            reason = format!("group of {s} for {} columns", cfg.grid_cols);
        } else if members + n_distractors > cfg.cells() {
            reason = format!("{} persons for {} cells", members + n_distractors, cfg.cells());
        } else {
            return Ok(Layout {
                group_sizes,
                n_distractors,
            });
        }
    }
    Err(Error::InfeasiblePlacement {
        retries: MAX_RETRIES,
        reason,
    })
}

struct Slot {
    row: usize,
    col: usize,
    group: Option<usize>,
}

/// Draws one scene.
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, cfg: &SynthConfig) -> Result<Scene> {
    cfg.validate()?;
    let layout = draw_layout(rng, cfg)?;
    let (rows, cols) = (cfg.grid_rows, cfg.grid_cols);
    let (cell_w, cell_h) = (1.0 / cols as f64, 1.0 / rows as f64);

    let mut group_rows: Vec<usize> = (0..rows).collect();
    group_rows.shuffle(rng);
    group_rows.truncate(layout.group_sizes.len());

    let mut occupied = vec![false; rows * cols];
    let mut slots = Vec::new();
    for (g, (&row, &size)) in group_rows.iter().zip(&layout.group_sizes).enumerate() {
        for col in 0..size {
            occupied[row * cols + col] = true;
            slots.push(Slot {
                row,
                col,
                group: Some(g),
            });
        }
    }
    let mut free: Vec<usize> = (0..rows * cols).filter(|&c| !occupied[c]).collect();
    free.shuffle(rng);
    for &cell in free.iter().take(layout.n_distractors) {
        occupied[cell] = true;
        slots.push(Slot {
            row: cell / cols,
            col: cell % cols,
            group: None,
        });
    }
    slots.shuffle(rng);

    let activities: Vec<usize> = layout
        .group_sizes
        .iter()
        .map(|_| rng.random_range(0..cfg.n_v))
        .collect();

    let noise = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(format!("noise_sigma: {e}")))?;
    let add_noise = |token: &mut Vec<f64>, rng: &mut R| {
        if cfg.noise_sigma > 0.0 {
            for v in token.iter_mut() {
                *v += noise.sample(rng);
            }
        }
    };

    let position = |token: &mut [f64], row: usize, col: usize| {
        let base = 4 + cfg.n_a + cfg.n_v + 1;
        token[base + row] = cfg.position_scale;
        token[base + rows + col] = cfg.position_scale;
    };

    let mut persons = Vec::with_capacity(slots.len());
    let mut tokens = Vec::with_capacity(rows * cols);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); layout.group_sizes.len()];
    for (p, slot) in slots.iter().enumerate() {
        let cx = (slot.col as f64 + 0.5 + rng.random_range(-cfg.jitter..=cfg.jitter)) * cell_w;
        let cy = (slot.row as f64 + 0.5 + rng.random_range(-cfg.jitter..=cfg.jitter)) * cell_h;
        let w = rng.random_range(0.6..=0.9) * cell_w;
        let h = rng.random_range(0.6..=0.9) * cell_h;
        let action = rng.random_range(0..cfg.n_a);

        let mut token = vec![0.0; cfg.d_tok];
        token[..4].copy_from_slice(&[cx, cy, w, h]);
        token[4 + action] = 1.0;
        if let Some(g) = slot.group {
            token[4 + cfg.n_a + activities[g]] = cfg.group_feature_scale;
            token[4 + cfg.n_a + cfg.n_v] = cfg.group_feature_scale * layout.group_sizes[g] as f64 / cfg.m as f64;
            members[g].push(p);
        }
        position(&mut token, slot.row, slot.col);
        add_noise(&mut token, rng);
        tokens.push(token);

        persons.push(GroundTruthPerson {
            bbox: BBox::new(cx, cy, w, h),
            action: one_hot(cfg.n_a, action),
        });
    }
    for cell in (0..rows * cols).filter(|&c| !occupied[c]) {
        let mut token = vec![0.0; cfg.d_tok];
        position(&mut token, cell / cols, cell % cols);
        add_noise(&mut token, rng);
        tokens.push(token);
    }

    let mut groups = Vec::with_capacity(members.len());
    for (g, mut idx) in members.into_iter().enumerate() {
        let order = cfg.point_order;
        idx.sort_by(|&a, &b| order.compare(&persons[a].bbox.center(), &persons[b].bbox.center()));
        let centers: Vec<_> = idx.iter().map(|&i| persons[i].bbox.center()).collect();
        groups.push(GroundTruthGroup {
            activity: one_hot(cfg.n_v, activities[g]),
            size: idx.len(),
            member_points: sort_member_points(&centers, order)?,
            member_indices: idx,
        });
    }

    Ok(Scene {
        persons,
        groups,
        tokens,
    })
}

/// Generates `n_scenes` scenes and splits them into train and eval sets;
/// the first `round(n_scenes × split_ratio)` scenes go to train.
pub fn generate_dataset<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &SynthConfig,
    n_scenes: usize,
    split_ratio: f64,
) -> Result<(Vec<Scene>, Vec<Scene>)> {
    if n_scenes < 2 {
        return Err(Error::Config("a dataset needs at least 2 scenes".into()));
    }
    if !(0.0..=1.0).contains(&split_ratio) {
        return Err(Error::OutOfRange {
            what: "split_ratio",
            value: split_ratio,
        });
    }
    let mut scenes = (0..n_scenes)
        .map(|_| generate_scene(rng, cfg))
        .collect::<Result<Vec<_>>>()?;
    let n_train = (n_scenes as f64 * split_ratio).round() as usize;
    let eval = scenes.split_off(n_train);
    Ok((scenes, eval))
}

/// Hyper-parameters whose dimensions match `cfg`, for validating its scenes.
pub fn matching_hyper_params(cfg: &SynthConfig) -> HyperParams {
    HyperParams {
        n_v: cfg.n_v,
        n_a: cfg.n_a,
        d_tok: cfg.d_tok,
        m: cfg.m,
        point_order: cfg.point_order,
        ..HyperParams::desk()
    }
}

/// Checks every scene against the validator and writes the JSONL file.
pub fn write_dataset(path: &Path, scenes: &[Scene], cfg: &SynthConfig) -> Result<()> {
    let hp = matching_hyper_params(cfg);
    for (index, scene) in scenes.iter().enumerate() {
        let v = validate_scene(scene, &hp);
        if !v.is_empty() {
            let violations = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ");
            return Err(Error::InvalidScene { index, violations });
        }
    }
    write_scenes_jsonl(path, scenes)
}
