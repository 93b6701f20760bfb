use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LightingInput, LinearNet, Result, FEATURE_CHANNELS, SPLAT_HEIGHT, SPLAT_WIDTH};
use crate::tensor::{Checkpoint, Graph, Tensor};

/// Outcome of [`audit_linear`].
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    /// Lighting-branch records that are not convolution kernels.
    pub bias_tensors: Vec<String>,
    /// Worst relative superposition error of the probe.
    pub max_violation: f64,
    /// Largest output magnitude for an all-zero lighting input.
    pub zero_response: f64,
    pub tolerance: f64,
}

impl AuditReport {
    pub fn structural_ok(&self) -> bool {
        self.bias_tensors.is_empty()
    }

    pub fn probe_ok(&self) -> bool {
        self.max_violation <= self.tolerance && self.zero_response == 0.0
    }

    pub fn passed(&self) -> bool {
        self.structural_ok() && self.probe_ok()
    }
}

/// Checks that a checkpoint's lighting branch is linear: a name scan for
/// anything other than `lin.*.weight` kernels, then a superposition probe
/// `f(a x + b y)` vs `a f(x) + b f(y)` with signed coefficients on random
/// inputs and a fixed random conditioning.
pub fn audit_linear(ckpt: &Checkpoint, trials: usize, seed: u64) -> Result<AuditReport> {
    let bias_tensors = ckpt
        .records
        .iter()
        .filter(|(name, t)| name.starts_with("lin.") && (!name.ends_with(".weight") || t.rank() != 4))
        .map(|(name, _)| name.clone())
        .collect();
    let net = LinearNet::<f32>::from_checkpoint(ckpt)?;
    let cfg = &net.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = cfg.res;
    let splat = cfg.mode == super::LinearMode::MlpLinear;
    let input_shape = if splat {
        vec![3, SPLAT_HEIGHT, SPLAT_WIDTH]
    } else {
        vec![FEATURE_CHANNELS, r, r]
    };
    let random = |rng: &mut ChaCha8Rng, shape: &[usize], lo: f32, hi: f32| {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).expect("shape")
    };
    let tex = random(&mut rng, &[3, r, r], 0.0, 1.0);
    let pose: Vec<f32> = (0..cfg.pose_dim).map(|_| rng.gen_range(-0.5..0.5)).collect();

    let g = Graph::<f32>::new();
    let p = net.bind(&g, false);
    let nl = net.nonlinear_forward(&p, g.constant(tex), net.pose_input(&g, &pose)?)?;
    let eval = |x: Tensor<f32>| -> Result<Vec<f32>> {
        let x = g.constant(x);
        let input = if splat {
            LightingInput::Splat(x)
        } else {
            LightingInput::Features(x)
        };
        let out = net.linear_forward(&p, input, &nl)?;
        let mut v = out.gain.value().data().to_vec();
        v.extend_from_slice(out.bias.value().data());
        Ok(v)
    };

    let zero_response = eval(Tensor::zeros(&input_shape))?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs() as f64));
    let mut max_violation = 0.0f64;
    for _ in 0..trials {
        let x = random(&mut rng, &input_shape, 0.0, 1.0);
        let y = random(&mut rng, &input_shape, 0.0, 1.0);
        let a: f32 = rng.gen_range(-2.0..2.0);
        let b: f32 = rng.gen_range(-2.0..2.0);
        let mixed = x.zip_map(&y, |u, v| a * u + b * v);
        let (fx, fy, fm) = (eval(x)?, eval(y)?, eval(mixed)?);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for ((u, v), m) in fx.iter().zip(&fy).zip(&fm) {
            let expect = a as f64 * *u as f64 + b as f64 * *v as f64;
            num = num.max((*m as f64 - expect).abs());
            den = den.max(expect.abs());
        }
        max_violation = max_violation.max(num / den.max(f64::MIN_POSITIVE));
    }
    Ok(AuditReport {
        bias_tensors,
        max_violation,
        zero_response,
        tolerance: 1e-4,
    })
}
