//! Training loop and evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::costs::{GroupCostWeights, IndividualCostWeights};
use crate::error::{Error, Result};
use crate::inference::decode_group_size;
use crate::losses::{group_loss, individual_loss, LossBreakdown};
use crate::matching::{match_groups, match_individuals};
use crate::metrics::{
    group_activity_accuracy, group_identification_accuracy, order_change_ratio,
    social_group_map, SceneResult, IOU_THRESHOLD,
};
use crate::model::{
    backward, forward, optimizer_step, AdamWConfig, AdamWState, GradientBuffer, ModelParams,
    SceneForward,
};
use crate::types::{HyperParams, PointOrder, Scene};

/// RNG stream reserved for parameter initialization; step `k` uses stream `k`.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hyper_params: HyperParams,
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    /// Step at which the learning rate is multiplied by `lr_decay_factor`.
    pub lr_decay_step: u64,
    pub lr_decay_factor: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Write a checkpoint every this many steps (0 disables).
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper_params: HyperParams::desk(),
            steps: 3000,
            batch_size: 8,
            lr: 1e-3,
            lr_decay_step: 2500,
            lr_decay_factor: 0.1,
            weight_decay: 1e-4,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper_params.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        for (name, v) in [
            ("lr", self.lr),
            ("lr_decay_factor", self.lr_decay_factor),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    pub fn lr_at(&self, step: u64) -> f64 {
        if step >= self.lr_decay_step {
            self.lr * self.lr_decay_factor
        } else {
            self.lr
        }
    }

    fn adamw(&self, step: u64) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr_at(step),
            weight_decay: self.weight_decay,
            ..AdamWConfig::default()
        }
    }
}

/// Mean loss components over one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub l_v: f64,
    pub l_s: f64,
    pub l_u: f64,
    pub l_c: f64,
    pub l_b: f64,
    pub l_o: f64,
    pub l_a: f64,
    pub total: f64,
}

impl StepRecord {
    pub const CSV_HEADER: [&'static str; 9] =
        ["step", "l_v", "l_s", "l_u", "l_c", "l_b", "l_o", "l_a", "total"];
}

/// Parameters, optimizer moments and the number of completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub optimizer: AdamWState,
    pub step: u64,
}

impl TrainState {
    /// Freshly initialized parameters for `cfg`.
    pub fn initial(cfg: &TrainConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(INIT_STREAM);
        let params = ModelParams::init(&cfg.hyper_params, &mut rng);
        let optimizer = AdamWState::new(params.len());
        Self {
            params,
            optimizer,
            step: 0,
        }
    }
}

/// Training-time assignments for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneMatch {
    pub groups: Assignment,
    pub individuals: Assignment,
}

pub fn match_scene(scene: &Scene, fwd: &SceneForward, hp: &HyperParams) -> Result<SceneMatch> {
    Ok(SceneMatch {
        groups: match_groups(&scene.groups, &fwd.groups, &GroupCostWeights::from(hp), hp.m)?,
        individuals: match_individuals(
            &scene.persons,
            &fwd.individuals,
            &IndividualCostWeights::from(hp),
        )?,
    })
}

/// All seven loss terms for one scene under fixed assignments.
pub fn scene_loss(
    scene: &Scene,
    fwd: &SceneForward,
    matched: &SceneMatch,
    hp: &HyperParams,
) -> Result<LossBreakdown> {
    let g = group_loss(&scene.groups, &fwd.groups, &matched.groups, hp)?;
    let i = individual_loss(&scene.persons, &fwd.individuals, &matched.individuals, hp)?;
    Ok(LossBreakdown::combine(g, i))
}

/// Forward, match, loss and backward for a batch; accumulates the mean
/// gradient into `grads` and returns the mean loss terms.
pub fn batch_gradient(
    params: &ModelParams,
    batch: &[&Scene],
    grads: &mut GradientBuffer,
) -> Result<LossBreakdown> {
    let hp = &params.hp;
    let scale = 1.0 / batch.len() as f64;
    let mut mean = LossBreakdown::default();
    for scene in batch {
        let fwd = forward(params, &scene.tokens)?;
        let matched = match_scene(scene, &fwd, hp)?;
        let loss = scene_loss(scene, &fwd, &matched, hp)?;
        backward(params, &fwd, &loss, scale, grads)?;
        mean.l_v += scale * loss.l_v;
        mean.l_s += scale * loss.l_s;
        mean.l_u += scale * loss.l_u;
        mean.l_c += scale * loss.l_c;
        mean.l_b += scale * loss.l_b;
        mean.l_o += scale * loss.l_o;
        mean.l_a += scale * loss.l_a;
        mean.total += scale * loss.total;
    }
    Ok(mean)
}

/// Runs steps `state.step .. cfg.steps`. `observer` sees every step after
/// the update and may abort training by returning an error.
pub fn train_with<F>(
    cfg: &TrainConfig,
    dataset: &[Scene],
    mut state: TrainState,
    mut observer: F,
) -> Result<(TrainState, Vec<StepRecord>)>
where
    F: FnMut(&StepRecord, &TrainState) -> Result<()>,
{
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if state.params.hp != cfg.hyper_params {
        return Err(Error::Config(
            "initial parameters were built for different hyper-parameters".into(),
        ));
    }
    let mut history = Vec::with_capacity(cfg.steps.saturating_sub(state.step) as usize);
    let mut grads = GradientBuffer::zeros_like(&state.params);
    while state.step < cfg.steps {
        let step = state.step;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(step);
        let batch: Vec<&Scene> = (0..cfg.batch_size)
            .map(|_| &dataset[rng.random_range(0..dataset.len())])
            .collect();

        grads.zero();
        let loss = batch_gradient(&state.params, &batch, &mut grads)?;
        if !loss.total.is_finite() {
            return Err(Error::Diverged(format!("non-finite loss at step {step}")));
        }
        optimizer_step(
            &mut state.params.values,
            &grads.values,
            &mut state.optimizer,
            &cfg.adamw(step),
        )
        .map_err(|e| match e {
            Error::Diverged(msg) => Error::Diverged(format!("step {step}: {msg}")),
            other => other,
        })?;
        state.step += 1;

        let record = StepRecord {
            step,
            l_v: loss.l_v,
            l_s: loss.l_s,
            l_u: loss.l_u,
            l_c: loss.l_c,
            l_b: loss.l_b,
            l_o: loss.l_o,
            l_a: loss.l_a,
            total: loss.total,
        };
        observer(&record, &state)?;
        history.push(record);
    }
    Ok((state, history))
}

/// Trains from `initial` (or fresh parameters) and returns the final state
/// with the per-step loss history.
pub fn train(
    cfg: &TrainConfig,
    dataset: &[Scene],
    initial: Option<TrainState>,
) -> Result<(TrainState, Vec<StepRecord>)> {
    let state = initial.unwrap_or_else(|| TrainState::initial(cfg));
    train_with(cfg, dataset, state, |_, _| Ok(()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderRatios {
    pub asc_x: f64,
    pub asc_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenes: usize,
    pub accuracy: f64,
    pub identification_accuracy: f64,
    pub map: f64,
    pub per_class: Vec<Option<f64>>,
    /// Fraction of ground-truth groups whose matched query decodes to the
    /// exact size.
    pub size_accuracy: f64,
    /// Member-order instability of the ground truth under center noise;
    /// `None` when no group has two or more members.
    pub order_ratios: Option<OrderRatios>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for OrderStudy {
    fn default() -> Self {
        Self {
            sigma: 0.02,
            trials: 1000,
            seed: 0,
        }
    }
}

/// Metrics for predictions already computed; `results` must cover scenes
/// that each contain at least one group.
pub fn evaluate_results(
    results: &[SceneResult<'_>],
    hp: &HyperParams,
    order: &OrderStudy,
) -> Result<EvalReport> {
    let accuracy = group_activity_accuracy(results)?;
    let identification_accuracy = group_identification_accuracy(results, hp.m, IOU_THRESHOLD)?;
    let map = social_group_map(results, hp.n_v, hp.m, IOU_THRESHOLD)?;

    let weights = GroupCostWeights::from(hp);
    let (mut sized, mut total) = (0usize, 0usize);
    for r in results {
        let a = match_groups(&r.scene.groups, &r.groups, &weights, hp.m)?;
        for (g, q) in a.pairs() {
            total += 1;
            if decode_group_size(r.groups[q].size_norm, hp.m) == r.scene.groups[g].size {
                sized += 1;
            }
        }
    }

    let scenes: Vec<Scene> = results.iter().map(|r| r.scene.clone()).collect();
    let ratio = |o| order_change_ratio(&scenes, o, order.sigma, order.trials, order.seed);
    let order_ratios = match (ratio(PointOrder::AscX), ratio(PointOrder::AscY)) {
        (Ok(asc_x), Ok(asc_y)) => Some(OrderRatios { asc_x, asc_y }),
        (Err(Error::Empty(_)), _) | (_, Err(Error::Empty(_))) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };

    Ok(EvalReport {
        scenes: results.len(),
        accuracy,
        identification_accuracy,
        map: map.map,
        per_class: map.per_class,
        size_accuracy: sized as f64 / total.max(1) as f64,
        order_ratios,
    })
}

/// Runs the model on every scene and computes all metrics.
pub fn evaluate(params: &ModelParams, dataset: &[Scene]) -> Result<EvalReport> {
    let results = dataset
        .iter()
        .map(|scene| {
            let fwd = forward(params, &scene.tokens)?;
            Ok(SceneResult {
                scene,
                groups: fwd.groups,
                individuals: fwd.individuals,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_results(&results, &params.hp, &OrderStudy::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_dataset, SynthConfig};
    use crate::types::{GroupPrediction, IndividualPrediction};

    fn data(seed: u64, n: usize) -> Vec<Scene> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_dataset(&mut rng, &SynthConfig::default(), n, 1.0).unwrap().0
    }

    fn short(steps: u64) -> TrainConfig {
        TrainConfig {
            steps,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_leave_parameters_unchanged() {
        let cfg = short(0);
        let (state, history) = train(&cfg, &data(1, 8), None).unwrap();
        assert_eq!(state.params, TrainState::initial(&cfg).params);
        assert!(history.is_empty());
    }

    #[test]
    fn loss_decreases_over_two_hundred_steps() {
        let cfg = short(201);
        let (_, history) = train(&cfg, &data(2, 64), None).unwrap();
        let first = history[0].total;
        let last = history[200].total;
        assert!(history.iter().all(|r| r.total.is_finite()));
        assert!(last < first, "loss {first} -> {last}");
    }

    #[test]
    fn resume_is_bit_exact() {
        let ds = data(3, 32);
        let full = train(&short(30), &ds, None).unwrap();
        let half = train(&short(12), &ds, None).unwrap();
        let resumed = train(&short(30), &ds, Some(half.0)).unwrap();
        assert_eq!(full.0, resumed.0);
        assert_eq!(full.1[12..], resumed.1[..]);
    }

    #[test]
    fn untrained_accuracy_is_near_chance() {
        // Chance is 1/N_v = 0.25; 400 scenes keep the estimate within a
        // loose band around it.
        let ds = data(4, 400);
        let accs: Vec<f64> = (0..3)
            .map(|seed| {
                let cfg = TrainConfig {
                    seed,
                    ..short(0)
                };
                evaluate(&TrainState::initial(&cfg).params, &ds).unwrap().accuracy
            })
            .collect();
        let mean = accs.iter().sum::<f64>() / 3.0;
        assert!(mean < 0.5, "accuracies {accs:?}");
    }

    #[test]
    fn oracle_predictions_score_perfectly() {
        let hp = HyperParams::desk();
        let ds = data(5, 20);
        let results: Vec<SceneResult<'_>> = ds
            .iter()
            .map(|scene| {
                let mut individuals: Vec<IndividualPrediction> = scene
                    .persons
                    .iter()
                    .map(|p| IndividualPrediction {
                        score: 1.0,
                        bbox: p.bbox,
                        action_probs: p.action.iter().map(|&a| a as f64).collect(),
                    })
                    .collect();
                let mut groups: Vec<GroupPrediction> = scene
                    .groups
                    .iter()
                    .map(|g| {
                        let mut pts = g.member_points.clone();
                        pts.resize(hp.m, pts[0]);
                        GroupPrediction {
                            activity_probs: g.activity.iter().map(|&a| a as f64).collect(),
                            size_norm: g.size_norm(hp.m),
                            member_points: pts,
                        }
                    })
                    .collect();
                groups.resize(
                    hp.n_q,
                    GroupPrediction {
                        activity_probs: vec![0.0; hp.n_v],
                        size_norm: 0.0,
                        member_points: vec![crate::types::Point2::new(0.5, 0.5); hp.m],
                    },
                );
                individuals.resize(
                    hp.n_q,
                    IndividualPrediction {
                        score: 0.0,
                        bbox: crate::types::BBox::new(0.5, 0.5, 0.01, 0.01),
                        action_probs: vec![0.0; hp.n_a],
                    },
                );
                SceneResult {
                    scene,
                    groups,
                    individuals,
                }
            })
            .collect();
        let r = evaluate_results(&results, &hp, &OrderStudy::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.identification_accuracy, 1.0);
        assert_eq!(r.map, 1.0);
        assert_eq!(r.size_accuracy, 1.0);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let ds = data(6, 30);
        let p = TrainState::initial(&short(0)).params;
        assert_eq!(evaluate(&p, &ds).unwrap(), evaluate(&p, &ds).unwrap());
    }
}
