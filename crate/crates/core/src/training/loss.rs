use std::sync::atomic::{AtomicUsize, Ordering};

use crate::linearnet::{Bound, LightingInput, LinearNet, NetError};
use crate::scalar::Scalar;
use crate::tensor::{concat_channels, Graph, Result, Tensor, TensorError, Var};

/// Levels of the image pyramid in [`loss_reconstruction`], full resolution
/// included.
pub const PYRAMID_LEVELS: usize = 3;

static EMPTY_MASK_WARNINGS: AtomicUsize = AtomicUsize::new(0);

/// How many losses or metrics were evaluated on an empty mask.
pub fn empty_mask_warnings() -> usize {
    EMPTY_MASK_WARNINGS.load(Ordering::Relaxed)
}

pub(crate) fn warn_empty_mask(what: &str) {
    EMPTY_MASK_WARNINGS.fetch_add(1, Ordering::Relaxed);
    log::warn!("{what}: empty mask, returning 0");
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub img: f64,
    pub gan: f64,
    pub reg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            img: 1.0,
            gan: 0.01,
            reg: 0.01,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [("img", self.img), ("gan", self.gan), ("reg", self.reg)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("loss weight {name} = {v} must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Loss terms of one generator step; absent terms count as zero.
pub struct LossParts<'g, S: Scalar> {
    pub img: Var<'g, S>,
    pub gan: Option<Var<'g, S>>,
    pub reg: Option<Var<'g, S>>,
}

pub fn total_loss<'g, S: Scalar>(parts: &LossParts<'g, S>, w: &LossWeights) -> Var<'g, S> {
    let mut total = parts.img.scale(S::lit(w.img));
    for (term, weight) in [(parts.gan, w.gan), (parts.reg, w.reg)] {
        if let Some(t) = term {
            total = total.add(t.scale(S::lit(weight))).expect("scalar losses");
        }
    }
    total
}

pub struct ReconLoss<'g, S: Scalar> {
    /// Masked mean absolute error.
    pub mae: Var<'g, S>,
    /// Mean over pyramid levels of the masked L1 of average-pooled images.
    pub pyramid: Var<'g, S>,
    pub total: Var<'g, S>,
}

fn zero<'g, S: Scalar>(g: &'g Graph<S>) -> Var<'g, S> {
    g.constant(Tensor::scalar(S::zero()))
}

/// `Σ |a − b| / (C Σ m)` where `a`, `b` are already masked.
fn normalized_l1<'g, S: Scalar>(a: Var<'g, S>, b: Var<'g, S>, mask_sum: f64, channels: usize) -> Result<Var<'g, S>> {
    Ok(a.sub(b)?.abs().sum().scale(S::lit(1.0 / (mask_sum * channels as f64))))
}

/// Masked L1 plus a multi-scale L1 over a [`PYRAMID_LEVELS`]-level pyramid.
/// `mask` is `[1, H, W]` with values in {0, 1}; images are `[C, H, W]`.
pub fn loss_reconstruction<'g, S: Scalar>(pred: Var<'g, S>, gt: Var<'g, S>, mask: Var<'g, S>) -> Result<ReconLoss<'g, S>> {
    let shape = pred.shape();
    if gt.shape() != shape || shape.len() != 3 {
        return Err(TensorError::Invalid {
            op: "loss_reconstruction",
            msg: format!("prediction {shape:?} vs target {:?}", gt.shape()),
        });
    }
    if mask.shape() != [1, shape[1], shape[2]] {
        return Err(TensorError::Invalid {
            op: "loss_reconstruction",
            msg: format!("mask {:?} for images {shape:?}", mask.shape()),
        });
    }
    let g = pred.graph();
    let c = shape[0];
    let mask_sum = mask.value().sum().to_f64().unwrap_or(0.0);
    if mask_sum <= 0.0 {
        warn_empty_mask("loss_reconstruction");
        return Ok(ReconLoss {
            mae: zero(g),
            pyramid: zero(g),
            total: zero(g),
        });
    }
    let (mut p, mut t) = (pred.mul(mask)?, gt.mul(mask)?);
    let mae = normalized_l1(p, t, mask_sum, c)?;
    let mut pyramid = mae;
    let mut m_sum = mask_sum;
    let (mut h, mut w) = (shape[1], shape[2]);
    for _ in 1..PYRAMID_LEVELS {
        if h % 2 != 0 || w % 2 != 0 {
            return Err(TensorError::Invalid {
                op: "loss_reconstruction",
                msg: format!("pyramid needs even extents, got {h}x{w}"),
            });
        }
        p = p.avg_pool2x()?;
        t = t.avg_pool2x()?;
        m_sum /= 4.0;
        h /= 2;
        w /= 2;
        pyramid = pyramid.add(normalized_l1(p, t, m_sum, c)?)?;
    }
    let pyramid = pyramid.scale(S::lit(1.0 / PYRAMID_LEVELS as f64));
    Ok(ReconLoss {
        mae,
        pyramid,
        total: mae.add(pyramid)?,
    })
}

/// Hinge discriminator loss, averaged over scales:
/// `mean(max(0, 1 − D(real))) + mean(max(0, 1 + D(fake)))`.
pub fn hinge_d_loss<'g, S: Scalar>(real: &[Var<'g, S>], fake: &[Var<'g, S>]) -> Result<Var<'g, S>> {
    assert_eq!(real.len(), fake.len(), "one score map per scale");
    assert!(!real.is_empty(), "at least one scale");
    let mut acc: Option<Var<'g, S>> = None;
    for (r, f) in real.iter().zip(fake) {
        let term = r.neg().add_scalar(S::one()).relu().mean().add(f.add_scalar(S::one()).relu().mean())?;
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    Ok(acc.expect("nonempty").scale(S::lit(1.0 / real.len() as f64)))
}

/// Generator hinge loss `−mean(D(fake))`, averaged over scales.
pub fn hinge_g_loss<'g, S: Scalar>(fake: &[Var<'g, S>]) -> Result<Var<'g, S>> {
    assert!(!fake.is_empty(), "at least one scale");
    let mut acc = fake[0].mean();
    for f in &fake[1..] {
        acc = acc.add(f.mean())?;
    }
    Ok(acc.scale(S::lit(-1.0 / fake.len() as f64)))
}

/// `Σ_j mean |e_j|` over the lighting encoder activations.
pub fn loss_l1reg<'g, S: Scalar>(graph: &'g Graph<S>, activations: &[Var<'g, S>]) -> Result<Var<'g, S>> {
    let mut acc = zero(graph);
    for a in activations {
        acc = acc.add(a.abs().mean())?;
    }
    Ok(acc)
}

/// `‖α₁ f(F₁) + α₂ f(F₂) − f(α₁F₁ + α₂F₂)‖₂` over the gain and bias maps,
/// with the conditioning features `nl` held fixed.
pub fn linearity_consistency_loss<'g, S: Scalar>(
    net: &LinearNet<S>,
    params: &Bound<'g, S>,
    f1: Var<'g, S>,
    f2: Var<'g, S>,
    a1: f64,
    a2: f64,
    nl: &[Var<'g, S>],
) -> std::result::Result<Var<'g, S>, NetError> {
    let f = |x: Var<'g, S>| -> std::result::Result<Var<'g, S>, NetError> {
        let out = net.linear_forward(params, LightingInput::Features(x), nl)?;
        Ok(concat_channels(&[out.gain, out.bias])?)
    };
    let (a1, a2) = (S::lit(a1), S::lit(a2));
    let separate = f(f1)?.scale(a1).add(f(f2)?.scale(a2))?;
    let joint = f(f1.scale(a1).add(f2.scale(a2))?)?;
    Ok(separate.sub(joint)?.square().sum().add_scalar(S::lit(1e-12)).sqrt())
}
