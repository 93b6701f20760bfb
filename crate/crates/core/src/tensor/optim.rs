use super::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moments per parameter plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
    pub step: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(params: &[Tensor<S>]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<S: Scalar>(params: &mut [Tensor<S>], grads: &[Tensor<S>], state: &mut AdamState<S>, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "one gradient per parameter");
    assert_eq!(params.len(), state.m.len(), "optimizer state does not match parameters");
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let (b1s, b2s) = (S::lit(b1), S::lit(b2));
    let (ob1, ob2) = (S::lit(1.0 - b1), S::lit(1.0 - b2));
    let step_size = S::lit(cfg.lr / c1);
    let c2_sqrt = S::lit(c2.sqrt());
    let eps = S::lit(cfg.eps);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        assert_eq!(p.shape(), g.shape(), "gradient shape");
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mv = b1s * *mv + ob1 * gv;
            *vv = b2s * *vv + ob2 * gv * gv;
            // lr * m_hat / (sqrt(v_hat) + eps)
            *pv -= step_size * *mv / (vv.sqrt() / c2_sqrt + eps);
        }
    }
}

/// Step decay by `gamma` at the given fractions of the iteration budget.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiStepLr {
    pub base: f64,
    pub gamma: f64,
    pub milestones: Vec<u64>,
}

impl MultiStepLr {
    /// Two decays, at 60% and 90% of `iterations`, whose product is 0.3
    /// (1e-4 ends at 3e-5).
    pub fn standard(base: f64, iterations: u64) -> Self {
        Self {
            base,
            gamma: 0.3f64.sqrt(),
            milestones: vec![iterations * 6 / 10, iterations * 9 / 10],
        }
    }

    pub fn at(&self, iteration: u64) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| iteration >= m).count();
        self.base * self.gamma.powi(passed as i32)
    }
}
