//! Central finite-difference checks of every hand-written gradient.
//!
//! Each component draws random inputs, picks one coordinate, and compares the
//! analytic derivative with `(f(x + h) − f(x − h)) / 2h`. Points where the
//! one-sided differences disagree by more than the observed error straddle a
//! kink (ReLU, L1, box clipping, probability clamp) and are redrawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::costs::giou_with_grad;
use crate::error::{Error, Result};
use crate::losses::{focal_loss, group_loss, individual_loss};
use crate::model::{backward, forward, GradientBuffer, ModelParams};
use crate::synth::{generate_scene, SynthConfig};
use crate::train::{match_scene, scene_loss, SceneMatch};
use crate::types::{
    BBox, GroundTruthGroup, GroundTruthPerson, GroupPrediction, HyperParams,
    IndividualPrediction, Point2, PointOrder, Scene,
};

pub const REL_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error, so that vanishing gradients are
/// compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-5;
pub const STEP: f64 = 1e-5;
const MAX_REDRAWS_PER_POINT: usize = 50;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub name: String,
    pub points: usize,
    pub max_rel_error: f64,
    /// Draws rejected for straddling a non-differentiable point.
    pub redrawn: usize,
}

impl ComponentReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub components: Vec<ComponentReport>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.components.iter().all(ComponentReport::passed)
    }
}

enum Outcome {
    Error(f64),
    Kink,
}

/// Compares `analytic` with the central difference of `f` around `x`.
fn probe(analytic: f64, x: f64, f: &mut dyn FnMut(f64) -> f64) -> Outcome {
    let (fm, f0, fp) = (f(x - STEP), f(x), f(x + STEP));
    let numeric = (fp - fm) / (2.0 * STEP);
    let err = relative_error(analytic, numeric);
    if err < REL_TOLERANCE {
        return Outcome::Error(err);
    }
    let forward_diff = (fp - f0) / STEP;
    let backward_diff = (f0 - fm) / STEP;
    if (forward_diff - backward_diff).abs() >= (analytic - numeric).abs() {
        Outcome::Kink
    } else {
        Outcome::Error(err)
    }
}

/// One random draw: the analytic derivative, the coordinate value, and the
/// function of that coordinate.
type Draw = (f64, f64, Box<dyn FnMut(f64) -> f64>);

fn run_component(
    name: &str,
    points: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> Result<Draw>,
) -> Result<ComponentReport> {
    let mut report = ComponentReport {
        name: name.to_string(),
        points,
        max_rel_error: 0.0,
        redrawn: 0,
    };
    for _ in 0..points {
        let mut attempts = 0;
        loop {
            let (analytic, x, mut f) = draw(rng)?;
            match probe(analytic, x, &mut *f) {
                Outcome::Error(e) => {
                    report.max_rel_error = report.max_rel_error.max(e);
                    break;
                }
                Outcome::Kink => {
                    report.redrawn += 1;
                    attempts += 1;
                    if attempts >= MAX_REDRAWS_PER_POINT {
                        return Err(Error::Diverged(format!(
                            "{name}: no smooth point found in {attempts} draws"
                        )));
                    }
                }
            }
        }
    }
    Ok(report)
}

fn unit<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(0.05..0.95)
}

fn random_box<R: Rng>(rng: &mut R) -> BBox {
    BBox::new(
        unit(rng),
        unit(rng),
        rng.random_range(0.05..0.6),
        rng.random_range(0.05..0.6),
    )
}

fn random_one_hot<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    let k = rng.random_range(0..n);
    (0..n).map(|i| u8::from(i == k)).collect()
}

fn only(hp: &HyperParams, keep: &str) -> HyperParams {
    let mut h = hp.clone();
    for (name, w) in [
        ("v", &mut h.lambda_v),
        ("s", &mut h.lambda_s),
        ("u", &mut h.lambda_u),
        ("c", &mut h.lambda_c),
        ("b", &mut h.lambda_b),
        ("o", &mut h.lambda_o),
        ("a", &mut h.lambda_a),
    ] {
        if name != keep {
            *w = 0.0;
        }
    }
    h
}

fn single_pair() -> Assignment {
    Assignment {
        map: vec![0],
        total_cost: 0.0,
    }
}

fn focal_draw(rng: &mut ChaCha8Rng) -> Result<Draw> {
    let y = rng.random_range(0..2u8);
    let p = rng.random_range(0.01..0.99);
    let (_, d) = focal_loss(y, p);
    Ok((d, p, Box::new(move |q| focal_loss(y, q).0)))
}

fn l1_draw(rng: &mut ChaCha8Rng) -> Result<Draw> {
    let hp = only(&HyperParams::desk(), "b");
    let gt = vec![GroundTruthPerson {
        bbox: random_box(rng),
        action: random_one_hot(rng, hp.n_a),
    }];
    let pred = IndividualPrediction {
        score: unit(rng),
        bbox: random_box(rng),
        action_probs: (0..hp.n_a).map(|_| unit(rng)).collect(),
    };
    let k = rng.random_range(0..4);
    let loss = individual_loss(&gt, std::slice::from_ref(&pred), &single_pair(), &hp)?;
    let analytic = loss.individual_grads[0].bbox[k];
    let x = pred.bbox.to_array()[k];
    Ok((
        analytic,
        x,
        Box::new(move |v| {
            let mut b = pred.bbox.to_array();
            b[k] = v;
            let p = IndividualPrediction {
                bbox: BBox::from_array(b),
                ..pred.clone()
            };
            individual_loss(&gt, &[p], &single_pair(), &hp).map_or(f64::NAN, |l| l.total)
        }),
    ))
}

fn giou_draw(rng: &mut ChaCha8Rng) -> Result<Draw> {
    let gt = random_box(rng);
    // Let predictions reach past the image border so clipping is exercised.
    let pred = BBox::new(
        rng.random_range(-0.1..1.1),
        rng.random_range(-0.1..1.1),
        rng.random_range(0.05..0.8),
        rng.random_range(0.05..0.8),
    );
    let k = rng.random_range(0..4);
    let (_, grad) = giou_with_grad(&gt, &pred);
    Ok((
        grad[k],
        pred.to_array()[k],
        Box::new(move |v| {
            let mut b = pred.to_array();
            b[k] = v;
            giou_with_grad(&gt, &BBox::from_array(b)).0
        }),
    ))
}

fn points_draw(rng: &mut ChaCha8Rng) -> Result<Draw> {
    let hp = only(&HyperParams::desk(), "u");
    let size = rng.random_range(1..=hp.m);
    let mut pts: Vec<Point2> = (0..size).map(|_| Point2::new(unit(rng), unit(rng))).collect();
    pts.sort_by(|a, b| PointOrder::AscX.compare(a, b));
    let gt = vec![GroundTruthGroup {
        activity: random_one_hot(rng, hp.n_v),
        size,
        member_indices: (0..size).collect(),
        member_points: pts,
    }];
    let pred = GroupPrediction {
        activity_probs: (0..hp.n_v).map(|_| unit(rng)).collect(),
        size_norm: unit(rng),
        member_points: (0..hp.m).map(|_| Point2::new(unit(rng), unit(rng))).collect(),
    };
    let (i, axis) = (rng.random_range(0..hp.m), rng.random_range(0..2));
    let loss = group_loss(&gt, std::slice::from_ref(&pred), &single_pair(), &hp)?;
    let analytic = loss.group_grads[0].member_points[i][axis];
    let p = pred.member_points[i];
    let x = if axis == 0 { p.x } else { p.y };
    Ok((
        analytic,
        x,
        Box::new(move |v| {
            let mut q = pred.clone();
            if axis == 0 {
                q.member_points[i].x = v;
            } else {
                q.member_points[i].y = v;
            }
            group_loss(&gt, &[q], &single_pair(), &hp).map_or(f64::NAN, |l| l.total)
        }),
    ))
}

/// Small model and generator settings for model-level checks.
pub fn small_setup() -> (HyperParams, SynthConfig) {
    let synth = SynthConfig {
        n_groups_range: (1, 1),
        group_size_range: (1, 2),
        n_distractors_range: (0, 1),
        n_v: 3,
        n_a: 3,
        m: 3,
        d_tok: 16,
        grid_rows: 2,
        grid_cols: 2,
        noise_sigma: 0.05,
        ..SynthConfig::default()
    };
    let hp = HyperParams {
        n_v: 3,
        n_a: 3,
        n_q: 4,
        m: 3,
        d_tok: 16,
        d_emb: 8,
        ..HyperParams::desk()
    };
    (hp, synth)
}

/// Mean total loss over `scenes` under fixed assignments.
pub fn batch_loss(params: &ModelParams, scenes: &[Scene], matches: &[SceneMatch]) -> Result<f64> {
    let mut total = 0.0;
    for (scene, m) in scenes.iter().zip(matches) {
        let fwd = forward(params, &scene.tokens)?;
        total += scene_loss(scene, &fwd, m, &params.hp)?.total;
    }
    Ok(total / scenes.len() as f64)
}

/// Analytic gradient of [`batch_loss`], with assignments taken at `params`.
pub fn batch_gradient_fixed(
    params: &ModelParams,
    scenes: &[Scene],
) -> Result<(GradientBuffer, Vec<SceneMatch>)> {
    let mut grads = GradientBuffer::zeros_like(params);
    let mut matches = Vec::with_capacity(scenes.len());
    for scene in scenes {
        let fwd = forward(params, &scene.tokens)?;
        let m = match_scene(scene, &fwd, &params.hp)?;
        let loss = scene_loss(scene, &fwd, &m, &params.hp)?;
        backward(params, &fwd, &loss, 1.0 / scenes.len() as f64, &mut grads)?;
        matches.push(m);
    }
    Ok((grads, matches))
}

/// Parameter indices whose tensor name satisfies `select`.
pub fn parameter_indices(params: &ModelParams, select: impl Fn(&str) -> bool) -> Vec<usize> {
    params
        .layout
        .tensors
        .iter()
        .filter(|t| select(&t.name))
        .flat_map(|t| t.offset..t.offset + t.len)
        .collect()
}

fn model_draw(
    rng: &mut ChaCha8Rng,
    n_scenes: usize,
    select: &dyn Fn(&str) -> bool,
) -> Result<Draw> {
    let (hp, synth) = small_setup();
    let params = ModelParams::init(&hp, rng);
    let scenes = (0..n_scenes)
        .map(|_| generate_scene(rng, &synth))
        .collect::<Result<Vec<_>>>()?;
    let candidates = parameter_indices(&params, select);
    let idx = candidates[rng.random_range(0..candidates.len())];
    let (grads, matches) = batch_gradient_fixed(&params, &scenes)?;
    let x = params.values[idx];
    let mut probe_params = params;
    Ok((
        grads.values[idx],
        x,
        Box::new(move |v| {
            probe_params.values[idx] = v;
            batch_loss(&probe_params, &scenes, &matches).unwrap_or(f64::NAN)
        }),
    ))
}

pub const COMPONENTS: [&str; 7] = [
    "focal",
    "l1",
    "giou",
    "points",
    "attention",
    "heads",
    "full_model",
];

/// Checks one named component at `points` random points.
pub fn check_component(name: &str, points: usize, seed: u64) -> Result<ComponentReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attention = |n: &str| n.starts_with("attn.") || n == "query_embeddings";
    let heads = |n: &str| n.starts_with("head.") || n == "reference_logits";
    match name {
        "focal" => run_component(name, points, &mut rng, focal_draw),
        "l1" => run_component(name, points, &mut rng, l1_draw),
        "giou" => run_component(name, points, &mut rng, giou_draw),
        "points" => run_component(name, points, &mut rng, points_draw),
        "attention" => run_component(name, points, &mut rng, |r| model_draw(r, 1, &attention)),
        "heads" => run_component(name, points, &mut rng, |r| model_draw(r, 1, &heads)),
        "full_model" => run_component(name, points, &mut rng, |r| model_draw(r, 2, &|_| true)),
        other => Err(Error::Config(format!("unknown gradient component '{other}'"))),
    }
}

/// Runs every component.
pub fn run_gradcheck(points: usize, seed: u64) -> Result<GradCheckReport> {
    let components = COMPONENTS
        .iter()
        .enumerate()
        .map(|(i, name)| check_component(name, points, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport { components })
}
