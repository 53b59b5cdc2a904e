//! Toy query decoder and detection heads with hand-written backpropagation.
//!
//! A single cross-attention layer lets each learnable query aggregate scene
//! tokens; a two-layer FFN turns the aggregate into the query's embedding,
//! which feeds both the group heads (activity, size, member points) and the
//! individual heads (person class, box, action). Location heads add the
//! query's reference logit to their raw outputs before the sigmoid.

mod checkpoint;
mod optim;
mod params;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointHeader};
pub use optim::{optimizer_step, AdamWConfig, AdamWState};
pub use params::{GradientBuffer, Layout, LinearSlot, MlpSlots, ModelParams, TensorSpec};

use crate::error::{Error, Result};
use crate::losses::LossBreakdown;
use crate::types::{BBox, GroupPrediction, IndividualPrediction, Point2};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct MlpCache {
    pre1: Vec<f64>,
    pre2: Vec<f64>,
    act1: Vec<f64>,
    act2: Vec<f64>,
    out: Vec<f64>,
}

fn mlp_forward(params: &[f64], slots: &MlpSlots, x: &[f64]) -> MlpCache {
    let [l1, l2, l3] = slots.0;
    let mut pre1 = vec![0.0; l1.n_out];
    l1.forward(params, x, &mut pre1);
    let mut act1 = pre1.clone();
    relu_inplace(&mut act1);
    let mut pre2 = vec![0.0; l2.n_out];
    l2.forward(params, &act1, &mut pre2);
    let mut act2 = pre2.clone();
    relu_inplace(&mut act2);
    let mut out = vec![0.0; l3.n_out];
    l3.forward(params, &act2, &mut out);
    MlpCache {
        pre1,
        pre2,
        act1,
        act2,
        out,
    }
}

fn mlp_backward(
    params: &[f64],
    slots: &MlpSlots,
    x: &[f64],
    cache: &MlpCache,
    d_out: &[f64],
    grads: &mut [f64],
    dx: &mut [f64],
) {
    let [l1, l2, l3] = slots.0;
    let mut d_act2 = vec![0.0; l3.n_in];
    l3.backward(params, &cache.act2, d_out, grads, Some(&mut d_act2));
    for (d, &z) in d_act2.iter_mut().zip(&cache.pre2) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    let mut d_act1 = vec![0.0; l2.n_in];
    l2.backward(params, &cache.act1, &d_act2, grads, Some(&mut d_act1));
    for (d, &z) in d_act1.iter_mut().zip(&cache.pre1) {
        if z <= 0.0 {
            *d = 0.0;
        }
    }
    l1.backward(params, x, &d_act1, grads, Some(dx));
}

/// Intermediate values of the decoder needed for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderCache {
    tokens: Vec<Vec<f64>>,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    projected_queries: Vec<Vec<f64>>,
    attention: Vec<Vec<f64>>,
    context: Vec<Vec<f64>>,
    ffn_pre: Vec<Vec<f64>>,
    ffn_act: Vec<Vec<f64>>,
    embeddings: Vec<Vec<f64>>,
}

impl DecoderCache {
    /// Attention weights, one row per query over the scene tokens.
    pub fn attention(&self) -> &[Vec<f64>] {
        &self.attention
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }
}

/// Cross-attention of every query over `tokens`, followed by the FFN.
/// Returns one embedding per query.
pub fn decoder_forward(
    params: &ModelParams,
    tokens: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, DecoderCache)> {
    let l = &params.layout;
    if tokens.is_empty() {
        return Err(Error::Empty("scene tokens"));
    }
    if let Some(bad) = tokens.iter().find(|t| t.len() != l.d_tok) {
        return Err(Error::Dimension(format!(
            "token of length {} for D_tok = {}",
            bad.len(),
            l.d_tok
        )));
    }
    let p = &params.values;
    let d = l.d_emb;
    let scale = 1.0 / (d as f64).sqrt();

    let project = |slot: &LinearSlot, x: &[f64]| {
        let mut out = vec![0.0; slot.n_out];
        slot.forward(p, x, &mut out);
        out
    };
    let keys: Vec<Vec<f64>> = tokens.iter().map(|t| project(&l.attn_k, t)).collect();
    let values: Vec<Vec<f64>> = tokens.iter().map(|t| project(&l.attn_v, t)).collect();

    let mut cache = DecoderCache {
        tokens: tokens.to_vec(),
        keys,
        values,
        projected_queries: Vec::with_capacity(l.n_q),
        attention: Vec::with_capacity(l.n_q),
        context: Vec::with_capacity(l.n_q),
        ffn_pre: Vec::with_capacity(l.n_q),
        ffn_act: Vec::with_capacity(l.n_q),
        embeddings: Vec::with_capacity(l.n_q),
    };

    for i in 0..l.n_q {
        let q = project(&l.attn_q, params.query(i));
        let scores: Vec<f64> = cache
            .keys
            .iter()
            .map(|k| scale * q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let norm: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= norm;
        }
        let mut ctx = vec![0.0; d];
        for (w, v) in weights.iter().zip(&cache.values) {
            for (c, x) in ctx.iter_mut().zip(v) {
                *c += w * x;
            }
        }
        let pre = project(&l.ffn1, &ctx);
        let mut act = pre.clone();
        relu_inplace(&mut act);
        let h = project(&l.ffn2, &act);

        cache.projected_queries.push(q);
        cache.attention.push(weights);
        cache.context.push(ctx);
        cache.ffn_pre.push(pre);
        cache.ffn_act.push(act);
        cache.embeddings.push(h);
    }
    Ok((cache.embeddings.clone(), cache))
}

#[derive(Debug, Clone, PartialEq)]
struct GroupHeadCache {
    size: MlpCache,
    points: MlpCache,
}

#[derive(Debug, Clone, PartialEq)]
struct IndividualHeadCache {
    bbox: MlpCache,
}

fn group_heads_cached(params: &ModelParams, h: &[f64], i: usize) -> (GroupPrediction, GroupHeadCache) {
    let l = &params.layout;
    let p = &params.values;
    let mut act = vec![0.0; l.n_v];
    l.activity.forward(p, h, &mut act);
    let size = mlp_forward(p, &l.size, h);
    let points = mlp_forward(p, &l.points, h);
    let r = params.reference_logit(i);
    let member_points = points
        .out
        .chunks_exact(2)
        .map(|xy| Point2::new(sigmoid(xy[0] + r[0]), sigmoid(xy[1] + r[1])))
        .collect();
    let pred = GroupPrediction {
        activity_probs: act.into_iter().map(sigmoid).collect(),
        size_norm: sigmoid(size.out[0]),
        member_points,
    };
    (pred, GroupHeadCache { size, points })
}

fn individual_heads_cached(
    params: &ModelParams,
    h: &[f64],
    i: usize,
) -> (IndividualPrediction, IndividualHeadCache) {
    let l = &params.layout;
    let p = &params.values;
    let mut class = [0.0];
    l.class.forward(p, h, &mut class);
    let bbox = mlp_forward(p, &l.bbox, h);
    let r = params.reference_logit(i);
    let o = &bbox.out;
    let b = BBox::new(
        sigmoid(o[0] + r[0]),
        sigmoid(o[1] + r[1]),
        sigmoid(o[2]),
        sigmoid(o[3]),
    );
    let mut action = vec![0.0; l.n_a];
    l.action.forward(p, h, &mut action);
    let pred = IndividualPrediction {
        score: sigmoid(class[0]),
        bbox: b,
        action_probs: action.into_iter().map(sigmoid).collect(),
    };
    (pred, IndividualHeadCache { bbox })
}

/// Activity, size and member-point heads for query `i`.
pub fn group_heads_forward(params: &ModelParams, h: &[f64], i: usize) -> GroupPrediction {
    group_heads_cached(params, h, i).0
}

/// Person-class, box and action heads for query `i`.
pub fn individual_heads_forward(params: &ModelParams, h: &[f64], i: usize) -> IndividualPrediction {
    individual_heads_cached(params, h, i).0
}

/// Predictions of every query for one scene, with the caches needed by
/// [`backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneForward {
    pub groups: Vec<GroupPrediction>,
    pub individuals: Vec<IndividualPrediction>,
    decoder: DecoderCache,
    group_caches: Vec<GroupHeadCache>,
    individual_caches: Vec<IndividualHeadCache>,
}

impl SceneForward {
    pub fn decoder(&self) -> &DecoderCache {
        &self.decoder
    }
}

pub fn forward(params: &ModelParams, tokens: &[Vec<f64>]) -> Result<SceneForward> {
    let (embeddings, decoder) = decoder_forward(params, tokens)?;
    let mut out = SceneForward {
        groups: Vec::with_capacity(embeddings.len()),
        individuals: Vec::with_capacity(embeddings.len()),
        decoder,
        group_caches: Vec::with_capacity(embeddings.len()),
        individual_caches: Vec::with_capacity(embeddings.len()),
    };
    for (i, h) in embeddings.iter().enumerate() {
        let (g, gc) = group_heads_cached(params, h, i);
        let (ind, ic) = individual_heads_cached(params, h, i);
        out.groups.push(g);
        out.group_caches.push(gc);
        out.individuals.push(ind);
        out.individual_caches.push(ic);
    }
    Ok(out)
}

/// Reverse-mode gradient of `scale × loss.total` with respect to every
/// parameter, accumulated into `grads`.
///
/// `loss` carries the gradient of the total with respect to each prediction;
/// an empty `group_grads` or `individual_grads` contributes nothing.
pub fn backward(
    params: &ModelParams,
    fwd: &SceneForward,
    loss: &LossBreakdown,
    scale: f64,
    grads: &mut GradientBuffer,
) -> Result<()> {
    let l = &params.layout;
    let n_q = l.n_q;
    let dec = &fwd.decoder;
    if grads.values.len() != params.len() {
        return Err(Error::Dimension("gradient buffer does not match parameters".into()));
    }
    if dec.embeddings.len() != n_q || fwd.groups.len() != n_q || fwd.individuals.len() != n_q {
        return Err(Error::Dimension("forward cache does not match query count".into()));
    }
    let has_group = !loss.group_grads.is_empty();
    let has_individual = !loss.individual_grads.is_empty();
    if (has_group && loss.group_grads.len() != n_q)
        || (has_individual && loss.individual_grads.len() != n_q)
    {
        return Err(Error::Dimension("loss gradients do not match query count".into()));
    }

    let p = &params.values;
    let g = &mut grads.values;
    let d = l.d_emb;
    let att_scale = 1.0 / (d as f64).sqrt();
    let n_t = dec.tokens.len();
    let mut d_keys = vec![vec![0.0; d]; n_t];
    let mut d_values = vec![vec![0.0; d]; n_t];

    for i in 0..n_q {
        let h = &dec.embeddings[i];
        let mut dh = vec![0.0; d];
        let ref_base = l.reference_logits + 2 * i;

        if has_group {
            let gg = &loss.group_grads[i];
            let pred = &fwd.groups[i];
            let cache = &fwd.group_caches[i];
            let dz: Vec<f64> = pred
                .activity_probs
                .iter()
                .zip(&gg.activity_probs)
                .map(|(&s, &dp)| scale * dp * s * (1.0 - s))
                .collect();
            l.activity.backward(p, h, &dz, g, Some(&mut dh));

            let s = pred.size_norm;
            let dz = [scale * gg.size_norm * s * (1.0 - s)];
            mlp_backward(p, &l.size, h, &cache.size, &dz, g, &mut dh);

            let mut dz = vec![0.0; 2 * l.m];
            for (k, (pt, dp)) in pred.member_points.iter().zip(&gg.member_points).enumerate() {
                dz[2 * k] = scale * dp[0] * pt.x * (1.0 - pt.x);
                dz[2 * k + 1] = scale * dp[1] * pt.y * (1.0 - pt.y);
            }
            g[ref_base] += dz.iter().step_by(2).sum::<f64>();
            g[ref_base + 1] += dz.iter().skip(1).step_by(2).sum::<f64>();
            mlp_backward(p, &l.points, h, &cache.points, &dz, g, &mut dh);
        }

        if has_individual {
            let ig = &loss.individual_grads[i];
            let pred = &fwd.individuals[i];
            let cache = &fwd.individual_caches[i];
            let c = pred.score;
            let dz = [scale * ig.score * c * (1.0 - c)];
            l.class.backward(p, h, &dz, g, Some(&mut dh));

            let b = pred.bbox.to_array();
            let dz: Vec<f64> = (0..4)
                .map(|k| scale * ig.bbox[k] * b[k] * (1.0 - b[k]))
                .collect();
            g[ref_base] += dz[0];
            g[ref_base + 1] += dz[1];
            mlp_backward(p, &l.bbox, h, &cache.bbox, &dz, g, &mut dh);

            let dz: Vec<f64> = pred
                .action_probs
                .iter()
                .zip(&ig.action_probs)
                .map(|(&s, &dp)| scale * dp * s * (1.0 - s))
                .collect();
            l.action.backward(p, h, &dz, g, Some(&mut dh));
        }

        // FFN.
        let mut d_act = vec![0.0; l.d_ffn];
        l.ffn2.backward(p, &dec.ffn_act[i], &dh, g, Some(&mut d_act));
        for (da, &z) in d_act.iter_mut().zip(&dec.ffn_pre[i]) {
            if z <= 0.0 {
                *da = 0.0;
            }
        }
        let mut d_ctx = vec![0.0; d];
        l.ffn1.backward(p, &dec.context[i], &d_act, g, Some(&mut d_ctx));

        // Attention.
        let weights = &dec.attention[i];
        let d_weights: Vec<f64> = dec
            .values
            .iter()
            .map(|v| v.iter().zip(&d_ctx).map(|(a, b)| a * b).sum())
            .collect();
        for (dv, &w) in d_values.iter_mut().zip(weights) {
            for (x, &dc) in dv.iter_mut().zip(&d_ctx) {
                *x += w * dc;
            }
        }
        let mean: f64 = weights.iter().zip(&d_weights).map(|(w, dw)| w * dw).sum();
        let q = &dec.projected_queries[i];
        let mut d_q = vec![0.0; d];
        for j in 0..n_t {
            let ds = weights[j] * (d_weights[j] - mean) * att_scale;
            if ds == 0.0 {
                continue;
            }
            for (dqk, &k) in d_q.iter_mut().zip(&dec.keys[j]) {
                *dqk += ds * k;
            }
            for (dk, &qk) in d_keys[j].iter_mut().zip(q) {
                *dk += ds * qk;
            }
        }
        let mut d_query = vec![0.0; d];
        l.attn_q.backward(p, params.query(i), &d_q, g, Some(&mut d_query));
        let qo = l.queries + i * d;
        for (gq, dq) in g[qo..qo + d].iter_mut().zip(&d_query) {
            *gq += dq;
        }
    }

    for (j, token) in dec.tokens.iter().enumerate() {
        l.attn_k.backward(p, token, &d_keys[j], g, None);
        l.attn_v.backward(p, token, &d_values[j], g, None);
    }
    Ok(())
}
