//! AdamW: Adam moments with weight decay applied directly to the parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the number of steps taken.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamWState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One update: `θ ← θ·(1 − lr·wd) − lr·m̂/(√v̂ + ε)`.
///
/// Fails without touching `params` or `state` if any gradient is non-finite.
pub fn optimizer_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamWState,
    cfg: &AdamWConfig,
) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::LengthMismatch {
            what: "optimizer buffers",
            expected: n,
            got: grads.len().min(state.m.len()).min(state.v.len()),
        });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Diverged(format!("non-finite gradient at parameter {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p * decay - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut p = vec![1.5, -2.0, 0.25];
        let before = p.clone();
        let mut s = AdamWState::new(3);
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        for _ in 0..10 {
            optimizer_step(&mut p, &[0.0; 3], &mut s, &cfg).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn zero_gradient_with_decay_scales_parameters() {
        let mut p = vec![1.5, -2.0, 0.25];
        let mut s = AdamWState::new(3);
        let cfg = AdamWConfig {
            lr: 0.01,
            weight_decay: 0.1,
            ..Default::default()
        };
        optimizer_step(&mut p, &[0.0; 3], &mut s, &cfg).unwrap();
        let f = 1.0 - 0.01 * 0.1;
        for (a, b) in p.iter().zip([1.5, -2.0, 0.25]) {
            assert!((a - b * f).abs() < 1e-15);
        }
    }

    #[test]
    fn scalar_quadratic_converges() {
        // f(x) = (x - 3)^2, simulated against a plain scalar Adam recurrence.
        let cfg = AdamWConfig {
            lr: 0.01,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut p = vec![-1.0];
        let mut s = AdamWState::new(1);
        let (mut x, mut m, mut v) = (-1.0f64, 0.0f64, 0.0f64);
        for t in 1..=2000 {
            let g = 2.0 * (p[0] - 3.0);
            optimizer_step(&mut p, &[g], &mut s, &cfg).unwrap();
            let gx = 2.0 * (x - 3.0);
            m = 0.9 * m + 0.1 * gx;
            v = 0.999 * v + 0.001 * gx * gx;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "x = {}", p[0]);
        assert!((p[0] - x).abs() < 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamWState::new(2);
        let err = optimizer_step(&mut p, &[0.1, f64::NAN], &mut s, &AdamWConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("diverged"));
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step, 0);
    }
}
