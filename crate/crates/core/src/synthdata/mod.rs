//! Synthetic stand-in for a light-stage capture: procedural identities, an
//! oracle renderer whose light transport exceeds the physical branch by a
//! wrap-diffuse subsurface term, and dataset emission with fully lit and
//! grouped-light frames.

mod dataset;
mod noise;

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use thiserror::Error;

pub use dataset::{
    camera_to_text, make_dataset, parse_camera, parse_pose, pose_to_text, rig_lights, unwrap_image, Dataset, DatasetConfig,
    FrameKind, FrameRecord,
};
use noise::ValueNoise;

use crate::config::ConfigError;
use crate::geometry::{Camera, GeometryError, HandRig, Pose, RasterLookup, MAX_DISPLACEMENT_MM};
use crate::image_io::ImageError;
use crate::math::V3;
use crate::pipeline::PoseGeometry;
use crate::scalar::Scalar;
use crate::shading::{ShadingContext, ShadingError};
use crate::tensor::Tensor;

/// Wrap width of the subsurface surrogate.
pub const WRAP: f64 = 0.5;
pub const SUBSURFACE_MAX: f64 = 0.5;
pub const ROUGHNESS_RANGE: (f64, f64) = (0.05, 0.9);
/// Taps of the albedo blur feeding the subsurface term.
pub const BLUR_TAPS: usize = 9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Shading(#[from] ShadingError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
}

/// Knobs for [`SyntheticIdentity::generate`]; `None` draws at random.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityParams {
    /// Constant roughness instead of a noise field.
    pub roughness: Option<f64>,
    /// Displacement amplitude in mm; 0 gives a flat surface.
    pub displacement_amp: f64,
    pub subsurface: Option<f64>,
}

impl Default for IdentityParams {
    fn default() -> Self {
        Self {
            roughness: None,
            displacement_amp: 0.6,
            subsurface: None,
        }
    }
}

/// Ground-truth materials of one synthetic subject, texel-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticIdentity {
    pub name: String,
    pub res: usize,
    pub albedo: Vec<[f64; 3]>,
    pub roughness: Vec<f64>,
    /// mm along the coarse normal.
    pub displacement: Vec<f64>,
    pub subsurface: f64,
}

fn band(phase: f64, width: f64) -> f64 {
    let d = phase - phase.round();
    (-(d * d) / (2.0 * width * width)).exp()
}

impl SyntheticIdentity {
    /// Skin-toned value-noise albedo with vein and wrinkle bands, plus
    /// matching roughness and displacement fields.
    pub fn generate(name: impl Into<String>, res: usize, params: &IdentityParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tone: f64 = rng.gen();
        let light = [0.80, 0.60, 0.50];
        let dark = [0.42, 0.28, 0.20];
        let base: [f64; 3] = std::array::from_fn(|k| light[k] + (dark[k] - light[k]) * tone);
        let subsurface = params
            .subsurface
            .unwrap_or_else(|| rng.gen_range(0.0..=SUBSURFACE_MAX))
            .clamp(0.0, SUBSURFACE_MAX);
        let beta0 = rng.gen_range(0.25..0.6);
        let (n_tone, n_warp, n_field) = (ValueNoise::new(&mut rng), ValueNoise::new(&mut rng), ValueNoise::new(&mut rng));
        let amp = params.displacement_amp.abs();
        let bound = MAX_DISPLACEMENT_MM * 0.95;
        let n = res * res;
        let (mut albedo, mut roughness, mut displacement) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for row in 0..res {
            for col in 0..res {
                let u = (col as f64 + 0.5) / res as f64;
                let v = (row as f64 + 0.5) / res as f64;
                let mottle = 0.85 + 0.3 * n_tone.fbm(8.0 * u, 8.0 * v, 4);
                let vein = band(5.0 * u + 1.5 * n_warp.fbm(3.0 * u, 3.0 * v, 3), 0.03);
                let wrinkle = band(24.0 * v + 0.8 * n_warp.fbm(6.0 * u + 11.0, 6.0 * v, 2), 0.05);
                let tint = [1.0 - 0.3 * vein, 1.0 - 0.2 * vein, 1.0 - 0.05 * vein];
                albedo.push(std::array::from_fn(|k| {
                    (base[k] * mottle * tint[k] * (1.0 - 0.12 * wrinkle)).clamp(0.02, 0.95)
                }));
                let field = n_field.fbm(16.0 * u, 16.0 * v, 3);
                roughness.push(match params.roughness {
                    Some(b) => b,
                    None => (beta0 + 0.5 * (field - 0.5) + 0.15 * wrinkle).clamp(ROUGHNESS_RANGE.0, ROUGHNESS_RANGE.1),
                });
                displacement.push((amp * (0.6 * (2.0 * field - 1.0) - 0.5 * wrinkle + 0.3 * vein)).clamp(-bound, bound));
            }
        }
        Self {
            name: name.into(),
            res,
            albedo,
            roughness,
            displacement,
            subsurface,
        }
    }

    pub fn albedo_tensor<S: Scalar>(&self) -> Tensor<S> {
        planar3(&self.albedo, self.res)
    }

    pub fn roughness_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor::from_vec(&[1, self.res, self.res], self.roughness.iter().map(|&v| S::lit(v)).collect()).expect("shape")
    }

    pub fn displacement_tensor<S: Scalar>(&self) -> Tensor<S> {
        Tensor::from_vec(&[1, self.res, self.res], self.displacement.iter().map(|&v| S::lit(v)).collect()).expect("shape")
    }

    /// Separable Gaussian blur (σ = 2 texels) with clamped borders.
    pub fn blurred_albedo(&self) -> Vec<[f64; 3]> {
        let r = self.res as isize;
        let half = (BLUR_TAPS / 2) as isize;
        let w: Vec<f64> = (-half..=half).map(|i| (-(i * i) as f64 / 8.0).exp()).collect();
        let norm: f64 = w.iter().sum();
        let pass = |src: &[[f64; 3]], horizontal: bool| -> Vec<[f64; 3]> {
            let mut out = vec![[0.0; 3]; src.len()];
            for row in 0..r {
                for col in 0..r {
                    let mut acc = [0.0; 3];
                    for (k, wk) in w.iter().enumerate() {
                        let o = k as isize - half;
                        let (rr, cc) = if horizontal {
                            (row, (col + o).clamp(0, r - 1))
                        } else {
                            ((row + o).clamp(0, r - 1), col)
                        };
                        let s = src[(rr * r + cc) as usize];
                        for c in 0..3 {
                            acc[c] += wk * s[c];
                        }
                    }
                    out[(row * r + col) as usize] = acc.map(|v| v / norm);
                }
            }
            out
        };
        pass(&pass(&self.albedo, true), false)
    }
}

fn planar3<S: Scalar>(field: &[[f64; 3]], res: usize) -> Tensor<S> {
    let n = res * res;
    let mut data = vec![S::zero(); 3 * n];
    for (t, v) in field.iter().enumerate() {
        for c in 0..3 {
            data[c * n + t] = S::lit(v[c]);
        }
    }
    Tensor::from_vec(&[3, res, res], data).expect("shape")
}

fn through<S: Scalar>(v: f64) -> f64 {
    S::lit(v).to_f64().unwrap_or(f64::NAN)
}

/// `Σ L V max((ω·n + w) / (1 + w), 0)` per texel; zero outside the mask.
pub fn wrap_irradiance(ctx: &ShadingContext, normals: &[V3]) -> Vec<[f64; 3]> {
    (0..normals.len())
        .map(|t| {
            let mut acc = [0.0; 3];
            if !ctx.mask[t] {
                return acc;
            }
            for (l, &vis) in ctx.lights.lights.iter().zip(ctx.visibility.row(t)) {
                let w = ((l.dir.dot(normals[t]) + WRAP) / (1.0 + WRAP)).max(0.0);
                if vis && w > 0.0 {
                    for c in 0..3 {
                        acc[c] += l.rgb[c] * w;
                    }
                }
            }
            acc
        })
        .collect()
}

/// Refined normals of the identity's displacement, rounded through `S`
/// exactly as the differentiable path sees them.
fn refined<S: Scalar>(identity: &SyntheticIdentity, geo: &PoseGeometry) -> Vec<V3> {
    let disp: Vec<f64> = identity.displacement.iter().map(|&d| through::<S>(d)).collect();
    geo.refine
        .forward(&disp)
        .into_iter()
        .map(|n| V3::new(through::<S>(n.x), through::<S>(n.y), through::<S>(n.z)))
        .collect()
}

/// `C^d ⊙ albedo + C^s` with the identity's true roughness and displacement.
pub fn physical_texture<S: Scalar>(identity: &SyntheticIdentity, geo: &PoseGeometry, ctx: &ShadingContext) -> Tensor<S> {
    let normals = refined::<S>(identity, geo);
    let beta: Vec<f64> = identity.roughness.iter().map(|&b| through::<S>(b)).collect();
    let feats = ctx.features(&normals, &beta).to_tensor::<S>();
    let diffuse = feats.channels(0, 3).expect("6 channels");
    let specular = feats.channels(3, 6).expect("6 channels");
    diffuse
        .zip_map(&identity.albedo_tensor(), |d, a| d * a)
        .zip_map(&specular, |x, s| x + s)
}

/// Physical texture plus `s* Σ L V wrap(ω·n̂) ⊙ blur(albedo)`.
pub fn oracle_texture<S: Scalar>(identity: &SyntheticIdentity, geo: &PoseGeometry, ctx: &ShadingContext) -> Tensor<S> {
    let mut tex = physical_texture::<S>(identity, geo, ctx);
    if identity.subsurface > 0.0 {
        let wrap = wrap_irradiance(ctx, &refined::<S>(identity, geo));
        let blur = identity.blurred_albedo();
        let n = identity.res * identity.res;
        let data = tex.data_mut();
        for t in 0..n {
            for c in 0..3 {
                data[c * n + t] += S::lit(identity.subsurface * wrap[t][c] * blur[t][c]);
            }
        }
    }
    tex
}

/// Ground-truth image `[3, H, W]`.
pub fn oracle_render<S: Scalar>(
    identity: &SyntheticIdentity,
    geo: &PoseGeometry,
    raster: &RasterLookup,
    ctx: &ShadingContext,
) -> Tensor<S> {
    raster.render(&oracle_texture::<S>(identity, geo, ctx)).expect("texture matches raster resolution")
}

/// Finger curls in `[-0.1, flex]` rad about each joint's x axis, small
/// abduction at finger roots and a small wrist rotation.
pub fn random_pose(rig: &HandRig, rng: &mut impl Rng, flex: f64) -> Pose {
    let mut pose = Pose::rest(rig.n_joints());
    pose.angles[0] = std::array::from_fn(|_| rng.gen_range(-0.25..0.25));
    for j in 1..rig.n_joints() {
        let curl = rng.gen_range(-0.1..flex.max(-0.1 + 1e-9));
        let spread = if (j - 1) % 3 == 0 { rng.gen_range(-0.12..0.12) } else { 0.0 };
        pose.angles[j] = [curl, 0.0, spread];
    }
    pose
}

/// Cameras looking at the hand from either side of the palm, at a fixed
/// distance, framing a 240 mm field.
pub fn camera_rig(n: usize, image_size: usize, rng: &mut impl Rng) -> Vec<Camera> {
    let target = V3::new(0.0, 95.0, 0.0);
    let dist = 420.0;
    let focal = 0.9 * image_size as f64 * dist / 240.0;
    (0..n)
        .map(|i| {
            let side = if i % 2 == 0 { 0.0 } else { PI };
            let az = side + rng.gen_range(-0.8..0.8);
            let el: f64 = rng.gen_range(-0.5..0.5);
            let dir = V3::new(az.sin() * el.cos(), el.sin(), az.cos() * el.cos());
            Camera::look_at(target + dir * dist, target, V3::new(0.0, 1.0, 0.0), focal, image_size, image_size)
        })
        .collect()
}

#[cfg(test)]
mod tests;
