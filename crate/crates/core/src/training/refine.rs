use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::FrameFilter;
use super::loss::loss_reconstruction;
use super::trainer::TrainData;
use super::TrainError;
use crate::pipeline::physical_render;
use crate::tensor::{adam_step, AdamConfig, AdamState, Graph, Tensor, Var};

/// Inverse rendering of one identity's materials through the physical
/// branch: per-texel albedo, a coarse roughness grid upsampled bilinearly to
/// texel resolution, and a bounded displacement map.
#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    pub iterations: u64,
    pub lr: f64,
    pub beta_init: f64,
    /// Texels per roughness grid cell along each axis; a power of two.
    pub beta_cell: usize,
    pub albedo_init: f64,
    pub optimize_displacement: bool,
    pub frames: FrameFilter,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            lr: 0.01,
            beta_init: 0.8,
            beta_cell: 8,
            albedo_init: 0.5,
            optimize_displacement: true,
            frames: FrameFilter::All,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    /// `[3, R, R]`.
    pub albedo: Tensor<f32>,
    /// `[1, R, R]`, unclamped.
    pub roughness: Tensor<f32>,
    /// `[1, R, R]` in mm.
    pub displacement: Tensor<f32>,
    /// Texels seen by at least one of the identity's frames.
    pub observed: Vec<bool>,
    pub losses: Vec<f64>,
}

impl RefineResult {
    /// Mean |β − β*| over observed texels.
    pub fn roughness_mae(&self, truth: &[f64]) -> f64 {
        let (mut s, mut n) = (0.0, 0usize);
        for (t, (&b, &seen)) in self.roughness.data().iter().zip(&self.observed).enumerate() {
            if seen {
                s += (b as f64 - truth[t]).abs();
                n += 1;
            }
        }
        if n == 0 {
            f64::NAN
        } else {
            s / n as f64
        }
    }
}

fn upsample<'g>(mut x: Var<'g, f32>, times: u32) -> Result<Var<'g, f32>, TrainError> {
    for _ in 0..times {
        x = x.upsample_bilinear2x()?;
    }
    Ok(x)
}

/// Refines the materials of `identity` against its frames. With zero
/// iterations the initial maps are returned.
pub fn refine_identity(
    data: &TrainData<'_>,
    identity: usize,
    cfg: &RefineConfig,
    init_raw_displacement: Option<Tensor<f32>>,
) -> Result<RefineResult, TrainError> {
    let ds = data.dataset;
    let r = ds.config.res;
    if identity >= ds.identities.len() {
        return Err(TrainError::Invalid(format!("identity {identity} out of range")));
    }
    if !cfg.beta_cell.is_power_of_two() || r % cfg.beta_cell != 0 {
        return Err(TrainError::Invalid(format!(
            "roughness cell {} must be a power of two dividing {r}",
            cfg.beta_cell
        )));
    }
    let frames: Vec<usize> = (0..ds.frames.len())
        .filter(|&i| ds.frames[i].identity == identity && cfg.frames.accepts(&ds.frames[i]))
        .collect();
    if frames.is_empty() {
        return Err(TrainError::NoFrames);
    }
    let grid = r / cfg.beta_cell;
    let levels = cfg.beta_cell.trailing_zeros();
    let raw_disp = match init_raw_displacement {
        Some(t) if t.shape() == [1, r, r] => t,
        Some(t) => return Err(TrainError::Invalid(format!("initial displacement shape {:?}", t.shape()))),
        None => Tensor::zeros(&[1, r, r]),
    };
    let mut params = vec![
        Tensor::full(&[3, r, r], cfg.albedo_init as f32),
        Tensor::full(&[1, grid, grid], cfg.beta_init as f32),
        raw_disp,
    ];
    let mut opt = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.iterations as usize);
    for it in 0..cfg.iterations {
        let fi = frames[rng.gen_range(0..frames.len())];
        let f = &ds.frames[fi];
        let scene = data.scene(fi);
        let g = Graph::<f32>::new();
        let albedo = g.param(params[0].clone());
        let beta = g.param(params[1].clone());
        let raw = g.leaf(params[2].clone(), cfg.optimize_displacement);
        let (_, image) = physical_render(&data.geometry[f.pose], &scene, raw.displacement(), upsample(beta, levels)?, albedo)?;
        let loss = loss_reconstruction(image, g.constant(ds.images[fi].clone()), g.constant(data.mask(fi)))?.total;
        let value = loss.value().data()[0] as f64;
        if !value.is_finite() {
            log::warn!("refine iteration {it}: non-finite loss, step skipped");
            continue;
        }
        losses.push(value);
        let grads = g.backward(loss)?;
        let grads: Vec<Tensor<f32>> = [albedo, beta, raw].iter().map(|&v| grads.get_or_zeros(v)).collect();
        adam_step(&mut params, &grads, &mut opt, &AdamConfig { lr: cfg.lr, ..AdamConfig::default() });
        if (it + 1) % 250 == 0 {
            log::info!("refine iteration {}: loss {value:.5}", it + 1);
        }
    }
    let g = Graph::<f32>::new();
    let roughness = (*upsample(g.constant(params[1].clone()), levels)?.value()).clone();
    let displacement = (*g.constant(params[2].clone()).displacement().value()).clone();
    let mut observed = vec![false; r * r];
    for &fi in &frames {
        let seen = data.scene(fi).raster.render_adjoint(&data.mask(fi));
        for (o, &v) in observed.iter_mut().zip(seen.data()) {
            *o |= v > 0.0;
        }
    }
    let [albedo, _, _] = <[Tensor<f32>; 3]>::try_from(params).expect("three parameter groups");
    Ok(RefineResult {
        albedo,
        roughness,
        displacement,
        observed,
        losses,
    })
}
