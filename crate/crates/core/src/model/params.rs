//! Flat parameter storage with a named tensor layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::HyperParams;

/// Position of one linear layer inside the flat parameter vector.
/// The weight is stored row-major as `n_out × n_in`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearSlot {
    pub weight: usize,
    pub bias: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl LinearSlot {
    pub fn weight_len(&self) -> usize {
        self.n_in * self.n_out
    }

    pub fn forward(&self, params: &[f64], x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(out.len(), self.n_out);
        let w = &params[self.weight..self.weight + self.weight_len()];
        let b = &params[self.bias..self.bias + self.n_out];
        for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(self.n_in).zip(b)) {
            *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients for `dy` at input `x`, and adds the
    /// input gradient to `dx` when given.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        dy: &[f64],
        grads: &mut [f64],
        dx: Option<&mut [f64]>,
    ) {
        let n_in = self.n_in;
        {
            let gw = &mut grads[self.weight..self.weight + self.weight_len()];
            for (row, &g) in gw.chunks_exact_mut(n_in).zip(dy) {
                if g != 0.0 {
                    for (r, &xi) in row.iter_mut().zip(x) {
                        *r += g * xi;
                    }
                }
            }
        }
        for (gb, &g) in grads[self.bias..self.bias + self.n_out].iter_mut().zip(dy) {
            *gb += g;
        }
        if let Some(dx) = dx {
            let w = &params[self.weight..self.weight + self.weight_len()];
            for (row, &g) in w.chunks_exact(n_in).zip(dy) {
                if g != 0.0 {
                    for (d, &wi) in dx.iter_mut().zip(row) {
                        *d += g * wi;
                    }
                }
            }
        }
    }
}

/// Three linear layers with ReLU between them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpSlots(pub [LinearSlot; 3]);

/// One named tensor in the flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Offsets of every tensor. Tensors appear in the flat vector in this order:
/// query embeddings, reference logits, attention query/key/value projections,
/// the two FFN layers, then the activity, size, member-point, person-class,
/// box and action heads. Each linear layer stores its weight then its bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub n_q: usize,
    pub d_tok: usize,
    pub d_emb: usize,
    pub d_ffn: usize,
    pub m: usize,
    pub n_v: usize,
    pub n_a: usize,
    pub queries: usize,
    pub reference_logits: usize,
    pub attn_q: LinearSlot,
    pub attn_k: LinearSlot,
    pub attn_v: LinearSlot,
    pub ffn1: LinearSlot,
    pub ffn2: LinearSlot,
    pub activity: LinearSlot,
    pub size: MlpSlots,
    pub points: MlpSlots,
    pub class: LinearSlot,
    pub bbox: MlpSlots,
    pub action: LinearSlot,
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
}

struct Builder {
    offset: usize,
    tensors: Vec<TensorSpec>,
}

impl Builder {
    fn tensor(&mut self, name: &str, len: usize) -> usize {
        let offset = self.offset;
        self.tensors.push(TensorSpec {
            name: name.to_string(),
            offset,
            len,
        });
        self.offset += len;
        offset
    }

    fn linear(&mut self, name: &str, n_in: usize, n_out: usize) -> LinearSlot {
        let weight = self.tensor(&format!("{name}.weight"), n_in * n_out);
        let bias = self.tensor(&format!("{name}.bias"), n_out);
        LinearSlot {
            weight,
            bias,
            n_in,
            n_out,
        }
    }

    fn mlp(&mut self, name: &str, n_in: usize, hidden: usize, n_out: usize) -> MlpSlots {
        MlpSlots([
            self.linear(&format!("{name}.0"), n_in, hidden),
            self.linear(&format!("{name}.1"), hidden, hidden),
            self.linear(&format!("{name}.2"), hidden, n_out),
        ])
    }
}

impl Layout {
    pub fn new(hp: &HyperParams) -> Self {
        let (d, d_ffn) = (hp.d_emb, hp.d_emb);
        let mut b = Builder {
            offset: 0,
            tensors: Vec::new(),
        };
        let queries = b.tensor("query_embeddings", hp.n_q * d);
        let reference_logits = b.tensor("reference_logits", hp.n_q * 2);
        let attn_q = b.linear("attn.query", d, d);
        let attn_k = b.linear("attn.key", hp.d_tok, d);
        let attn_v = b.linear("attn.value", hp.d_tok, d);
        let ffn1 = b.linear("ffn.0", d, d_ffn);
        let ffn2 = b.linear("ffn.1", d_ffn, d);
        let activity = b.linear("head.activity", d, hp.n_v);
        let size = b.mlp("head.size", d, d, 1);
        let points = b.mlp("head.points", d, d, 2 * hp.m);
        let class = b.linear("head.class", d, 1);
        let bbox = b.mlp("head.box", d, d, 4);
        let action = b.linear("head.action", d, hp.n_a);
        Self {
            n_q: hp.n_q,
            d_tok: hp.d_tok,
            d_emb: d,
            d_ffn,
            m: hp.m,
            n_v: hp.n_v,
            n_a: hp.n_a,
            queries,
            reference_logits,
            attn_q,
            attn_k,
            attn_v,
            ffn1,
            ffn2,
            activity,
            size,
            points,
            class,
            bbox,
            action,
            total: b.offset,
            tensors: b.tensors,
        }
    }

    pub fn linear_slots(&self) -> Vec<LinearSlot> {
        let mut v = vec![
            self.attn_q,
            self.attn_k,
            self.attn_v,
            self.ffn1,
            self.ffn2,
            self.activity,
        ];
        v.extend(self.size.0);
        v.extend(self.points.0);
        v.push(self.class);
        v.extend(self.bbox.0);
        v.push(self.action);
        v
    }
}

/// All trainable weights of the decoder and heads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hp: HyperParams,
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(hp: &HyperParams) -> Self {
        let layout = Layout::new(hp);
        Self {
            hp: hp.clone(),
            values: vec![0.0; layout.total],
            layout,
        }
    }

    /// Weights uniform in ±1/√fan_in, biases zero, query embeddings uniform
    /// in ±1, reference logits uniform in ±2.
    pub fn init<R: Rng + ?Sized>(hp: &HyperParams, rng: &mut R) -> Self {
        let mut p = Self::zeros(hp);
        let l = &p.layout;
        for v in &mut p.values[l.queries..l.queries + hp.n_q * hp.d_emb] {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in &mut p.values[l.reference_logits..l.reference_logits + 2 * hp.n_q] {
            *v = rng.random_range(-2.0..2.0);
        }
        for slot in l.linear_slots() {
            let bound = 1.0 / (slot.n_in as f64).sqrt();
            for v in &mut p.values[slot.weight..slot.weight + slot.weight_len()] {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn from_values(hp: &HyperParams, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(hp);
        if values.len() != layout.total {
            return Err(Error::LengthMismatch {
                what: "parameter vector",
                expected: layout.total,
                got: values.len(),
            });
        }
        Ok(Self {
            hp: hp.clone(),
            layout,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn query(&self, i: usize) -> &[f64] {
        let d = self.layout.d_emb;
        let start = self.layout.queries + i * d;
        &self.values[start..start + d]
    }

    /// Unconstrained reference point of query `i`; the point itself is its
    /// sigmoid.
    pub fn reference_logit(&self, i: usize) -> [f64; 2] {
        let o = self.layout.reference_logits + 2 * i;
        [self.values[o], self.values[o + 1]]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gradient of a scalar loss with respect to every entry of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub values: Vec<f64>,
}

impl GradientBuffer {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            values: vec![0.0; params.len()],
        }
    }

    pub fn zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
