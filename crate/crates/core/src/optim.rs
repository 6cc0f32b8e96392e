//! Optimizers: plain SGD and bias-corrected Adam with dense state.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{EncoderParams, Grads};
use crate::{CoreError, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 1e-5;
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// Optimizer with per-tensor state following `EncoderParams::tensors` order.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    /// Completed Adam steps (for bias correction).
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: &EncoderParams) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        let state = || shapes.iter().map(|&n| vec![0.0; n]).collect::<Vec<_>>();
        let (m, v) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (state(), state()),
        };
        Optimizer { kind, t: 0, m, v }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Apply one update in place. SGD is exactly `p −= lr·g`.
    pub fn step(&mut self, params: &mut EncoderParams, grads: &Grads, lr: f64) -> Result<()> {
        let mut p_tensors = params.tensors_mut();
        let g_tensors = grads.tensors();
        if p_tensors.len() != g_tensors.len()
            || p_tensors
                .iter()
                .zip(&g_tensors)
                .any(|(p, g)| p.len() != g.len())
        {
            return Err(CoreError::Invalid(
                "gradient shape does not match parameters".into(),
            ));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in p_tensors.iter_mut().zip(&g_tensors) {
                    for (pv, gv) in p.iter_mut().zip(g.iter()) {
                        *pv -= lr * gv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.m.len() != p_tensors.len()
                    || self
                        .m
                        .iter()
                        .zip(&p_tensors)
                        .any(|(m, p)| m.len() != p.len())
                {
                    return Err(CoreError::Invalid(
                        "optimizer state does not match parameters".into(),
                    ));
                }
                self.t += 1;
                let bc1 = 1.0 - libm::pow(beta1, self.t as f64);
                let bc2 = 1.0 - libm::pow(beta2, self.t as f64);
                for ((p, g), (m, v)) in p_tensors
                    .iter_mut()
                    .zip(&g_tensors)
                    .zip(self.m.iter_mut().zip(self.v.iter_mut()))
                {
                    for (((pv, gv), mv), vv) in
                        p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mv = beta1 * *mv + (1.0 - beta1) * gv;
                        *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                        let m_hat = *mv / bc1;
                        let v_hat = *vv / bc2;
                        *pv -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                    }
                }
            }
        }
        drop(p_tensors);
        params.assert_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderConfig, Mode, Pooler};

    fn tiny_params(seed: u64) -> EncoderParams {
        EncoderParams::init(
            EncoderConfig {
                mode: Mode::Tied,
                pooler: Pooler::Mean,
                vocab_size: 5,
                d_embed: 3,
                d_out: 2,
            },
            seed,
        )
    }

    fn unit_grads(params: &EncoderParams, fill: f64) -> Grads {
        let mut g = Grads::zeros_like(params);
        for t in g.tensors_mut() {
            for x in t.iter_mut() {
                *x = fill;
            }
        }
        g
    }

    #[test]
    fn sgd_is_exact_subtraction() {
        let mut p = tiny_params(1);
        let before = p.clone();
        let g = unit_grads(&p, 0.25);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, &p);
        opt.step(&mut p, &g, 0.1).unwrap();
        for (pt, bt) in p.tensors().iter().zip(before.tensors()) {
            for (pv, bv) in pt.iter().zip(bt.iter()) {
                assert_eq!(*pv, bv - 0.1 * 0.25);
            }
        }
    }

    #[test]
    fn adam_zero_grads_leave_params_unchanged() {
        let mut p = tiny_params(2);
        let before = p.clone();
        let g = Grads::zeros_like(&p);
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), &p);
        opt.step(&mut p, &g, 1e-3).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn adam_matches_hand_rolled_oracle() {
        let (b1, b2, eps, lr) = (0.9, 0.999, 1e-8, 1e-2);
        let mut p = tiny_params(3);
        let mut opt = Optimizer::new(OptimizerKind::Adam { beta1: b1, beta2: b2, eps }, &p);

        // Oracle state mirrors the flattened parameter vector.
        let flat = |p: &EncoderParams| -> alloc::vec::Vec<f64> {
            p.tensors().iter().flat_map(|t| t.iter().copied()).collect()
        };
        let mut oracle = flat(&p);
        let n = oracle.len();
        let mut m = alloc::vec![0.0; n];
        let mut v = alloc::vec![0.0; n];

        for step in 1..=4u64 {
            let fill = 0.1 * step as f64;
            let g = unit_grads(&p, fill);
            opt.step(&mut p, &g, lr).unwrap();

            for i in 0..n {
                m[i] = b1 * m[i] + (1.0 - b1) * fill;
                v[i] = b2 * v[i] + (1.0 - b2) * fill * fill;
                let mh = m[i] / (1.0 - libm::pow(b1, step as f64));
                let vh = v[i] / (1.0 - libm::pow(b2, step as f64));
                oracle[i] -= lr * mh / (libm::sqrt(vh) + eps);
            }
            let now = flat(&p);
            for (a, b) in now.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-15, "step {step}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = tiny_params(4);
        let other = EncoderParams::init(
            EncoderConfig {
                mode: Mode::Dual,
                pooler: Pooler::Mean,
                vocab_size: 5,
                d_embed: 3,
                d_out: 2,
            },
            4,
        );
        let g = Grads::zeros_like(&other);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, &p);
        assert!(opt.step(&mut p, &g, 0.1).is_err());
    }
}
