//! The neural branch: a geometry U-Net predicting displacement and roughness,
//! a biased non-linear conditioning branch driven by the mean texture and
//! pose, and a bias-free lighting branch whose decoder is modulated by the
//! conditioning features.
//!
//! With the conditioning features held fixed, the lighting branch is an
//! exactly linear map from shading features to the gain/bias maps, so the
//! final texture `C = g ⊙ T + b σ_T` is linear in light intensities.

mod audit;
pub(crate) mod params;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use audit::{audit_linear, AuditReport};
pub use params::{Bound, ParamStore};
use params::{Conv, ConvT};

use crate::scalar::Scalar;
use crate::shading::LightSet;
use crate::tensor::{concat_channels, Checkpoint, Graph, Tensor, TensorError, Var};

/// Texture standard deviation in 8-bit units.
pub const SIGMA_T_8BIT: f64 = 64.0;
pub const LEAKY_SLOPE: f64 = 0.2;
/// Decoder channels from the bottleneck to the gain/bias output. Shallower
/// networks use a suffix of this list.
pub const DECODER_CHANNELS: [usize; 8] = [128, 256, 128, 128, 64, 32, 16, 4];
pub const FEATURE_CHANNELS: usize = 6;
pub const POSE_CHANNELS: usize = 16;
pub const MAX_LINEAR_LEVELS: usize = 7;
pub const MAX_GEOMETRY_LEVELS: usize = 6;
/// Lat-long light splat fed to the MLP variant.
pub const SPLAT_HEIGHT: usize = 16;
pub const SPLAT_WIDTH: usize = 32;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, NetError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LinearMode {
    /// Bias-free, activation-free lighting branch.
    #[default]
    Linear,
    /// LeakyReLU after every hidden lighting layer.
    Nonlinear,
    /// `Nonlinear` trained with an additional linearity penalty.
    LinearityConsistency,
    /// Lights splatted into a lat-long grid and mapped to the bottleneck by
    /// one bias-free fully connected layer; no shading-feature encoder.
    MlpLinear,
}

impl LinearMode {
    pub const ALL: [LinearMode; 4] = [Self::Linear, Self::Nonlinear, Self::LinearityConsistency, Self::MlpLinear];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Nonlinear => "nonlinear",
            Self::LinearityConsistency => "linearity-consistency",
            Self::MlpLinear => "mlp-linear",
        }
    }

    pub fn has_activations(self) -> bool {
        matches!(self, Self::Nonlinear | Self::LinearityConsistency)
    }
}

impl fmt::Display for LinearMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinearMode {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| NetError::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    /// Texture resolution R.
    pub res: usize,
    pub mode: LinearMode,
    /// Length of the flattened pose vector.
    pub pose_dim: usize,
    /// Channel width of the geometry U-Net.
    pub geo_width: usize,
    /// Texture standard deviation in the units of the mean texture.
    pub sigma_t: f64,
}

impl NetConfig {
    /// Defaults for textures in linear `[0, 1]` units.
    pub fn new(res: usize, mode: LinearMode, pose_dim: usize) -> Self {
        Self {
            res,
            mode,
            pose_dim,
            geo_width: 64,
            sigma_t: SIGMA_T_8BIT / 255.0,
        }
    }

    fn pow2_levels(&self, max: usize) -> usize {
        (self.res.trailing_zeros() as usize).min(max)
    }

    /// Number of stride-2 stages of the lighting and conditioning branches.
    pub fn lin_levels(&self) -> usize {
        self.pow2_levels(MAX_LINEAR_LEVELS)
    }

    pub fn geo_levels(&self) -> usize {
        self.pow2_levels(MAX_GEOMETRY_LEVELS)
    }

    /// Decoder channels `d_0 .. d_L`.
    pub fn decoder_channels(&self) -> &'static [usize] {
        &DECODER_CHANNELS[DECODER_CHANNELS.len() - self.lin_levels() - 1..]
    }

    pub fn bottleneck(&self) -> usize {
        self.res >> self.lin_levels()
    }

    pub fn validate(&self) -> Result<()> {
        if self.res < 4 || self.lin_levels() < 2 {
            return Err(NetError::Config(format!(
                "resolution {} must be at least 4 and divisible by 4",
                self.res
            )));
        }
        if self.pose_dim == 0 || self.geo_width == 0 {
            return Err(NetError::Config("pose_dim and geo_width must be positive".into()));
        }
        if !(self.sigma_t.is_finite() && self.sigma_t >= 0.0) {
            return Err(NetError::Config(format!("sigma_t {} must be finite and nonnegative", self.sigma_t)));
        }
        Ok(())
    }

    pub fn header(&self) -> Vec<(String, String)> {
        vec![
            ("res".into(), self.res.to_string()),
            ("mode".into(), self.mode.to_string()),
            ("pose_dim".into(), self.pose_dim.to_string()),
            ("geo_width".into(), self.geo_width.to_string()),
            ("sigma_t".into(), format!("{:e}", self.sigma_t)),
            ("lin_levels".into(), self.lin_levels().to_string()),
        ]
    }

    pub fn from_header(ckpt: &Checkpoint) -> Result<Self> {
        fn field<T: FromStr>(ckpt: &Checkpoint, key: &str) -> Result<T> {
            let v = ckpt
                .header_value(key)
                .ok_or_else(|| NetError::Checkpoint(format!("header lacks {key}")))?;
            v.parse()
                .map_err(|_| NetError::Checkpoint(format!("header {key} = {v:?} is malformed")))
        }
        let cfg = Self {
            res: field(ckpt, "res")?,
            mode: ckpt
                .header_value("mode")
                .ok_or_else(|| NetError::Checkpoint("header lacks mode".into()))?
                .parse()?,
            pose_dim: field(ckpt, "pose_dim")?,
            geo_width: field(ckpt, "geo_width")?,
            sigma_t: field(ckpt, "sigma_t")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Lighting input of the lighting branch.
#[derive(Clone, Copy, Debug)]
pub enum LightingInput<'g, S: Scalar> {
    /// `[6, R, R]` diffuse and specular shading features.
    Features(Var<'g, S>),
    /// `[3, SPLAT_HEIGHT, SPLAT_WIDTH]` light splat (MLP variant).
    Splat(Var<'g, S>),
}

pub struct GeometryOut<'g, S: Scalar> {
    /// `[1, R, R]`, before the displacement activation.
    pub raw_displacement: Var<'g, S>,
    /// `[1, R, R]` in `(0, 1)`; the shading clamp is applied downstream.
    pub roughness: Var<'g, S>,
}

pub struct LinearOut<'g, S: Scalar> {
    /// `[3, R, R]`
    pub gain: Var<'g, S>,
    /// `[1, R, R]`
    pub bias: Var<'g, S>,
    /// Encoder activations `F_l-enc^1 .. F_l-enc^L` (empty for the MLP variant).
    pub encoder: Vec<Var<'g, S>>,
}

/// One decoder stage: `(1/√2) ConvT(enc + dec) ⊙ nl`.
#[allow(clippy::too_many_arguments)]
pub fn fuse<'g, S: Scalar>(
    enc: Var<'g, S>,
    dec: Var<'g, S>,
    nl: Var<'g, S>,
    kernel: Var<'g, S>,
    stride: usize,
    pad: usize,
    out_size: Option<(usize, usize)>,
) -> std::result::Result<Var<'g, S>, TensorError> {
    let (es, ds) = (enc.shape(), dec.shape());
    if es != ds {
        let dim = es.iter().zip(&ds).position(|(a, b)| a != b).unwrap_or(0);
        return Err(TensorError::ShapeMismatch {
            op: "fuse",
            dim: format!("encoder/decoder dimension {dim}"),
            expected: es.get(dim).copied().unwrap_or(0),
            got: ds.get(dim).copied().unwrap_or(0),
        });
    }
    enc.add(dec)?
        .conv_transpose2d(kernel, None, stride, pad, out_size)?
        .mul(nl)
        .map(|v| v.scale(S::lit(FRAC_1_SQRT_2)))
}

/// `C = g ⊙ T + b σ_T`.
pub fn compose_texture<'g, S: Scalar>(
    gain: Var<'g, S>,
    bias: Var<'g, S>,
    texture: Var<'g, S>,
    sigma_t: f64,
) -> std::result::Result<Var<'g, S>, TensorError> {
    gain.mul(texture)?.add(bias.scale(S::lit(sigma_t)))
}

/// Accumulates light intensities into lat-long bins (`θ` from +y, `φ`
/// from +x towards +z), linear in intensities.
pub fn splat_lights<S: Scalar>(lights: &LightSet) -> Tensor<S> {
    let (h, w) = (SPLAT_HEIGHT, SPLAT_WIDTH);
    let mut data = vec![0.0f64; 3 * h * w];
    for l in &lights.lights {
        let d = l.dir.normalized();
        let theta = d.y.clamp(-1.0, 1.0).acos();
        let phi = d.z.atan2(d.x).rem_euclid(2.0 * PI);
        let row = ((theta / PI * h as f64) as usize).min(h - 1);
        let col = ((phi / (2.0 * PI) * w as f64) as usize).min(w - 1);
        for c in 0..3 {
            data[(c * h + row) * w + col] += l.rgb[c];
        }
    }
    Tensor::from_vec(&[3, h, w], data.into_iter().map(S::lit).collect()).expect("splat shape")
}

fn lrelu<S: Scalar>(v: Var<'_, S>) -> Var<'_, S> {
    v.leaky_relu(S::lit(LEAKY_SLOPE))
}

fn spatial<S: Scalar>(v: &Var<'_, S>) -> (usize, usize) {
    let s = v.shape();
    (s[1], s[2])
}

struct GeometryNet {
    enc: Vec<Conv>,
    dec: Vec<ConvT>,
    out: ConvT,
}

impl GeometryNet {
    fn new<S: Scalar>(store: &mut ParamStore<S>, rng: &mut ChaCha8Rng, cfg: &NetConfig) -> Self {
        let (w, levels) = (cfg.geo_width, cfg.geo_levels());
        let enc = (0..levels)
            .map(|k| Conv::new(store, rng, &format!("geo.enc.{k}"), if k == 0 { 3 } else { w }, w, 3, 2, Some(0.0)))
            .collect();
        let dec = (0..levels)
            .map(|i| {
                let c_in = if i == 0 { w + cfg.pose_dim } else { 2 * w };
                ConvT::new(store, rng, &format!("geo.dec.{i}"), c_in, w, 3, 1, Some(0.0))
            })
            .collect();
        let out = ConvT::new(store, rng, "geo.out", w + 3, 2, 3, 1, Some(0.0));
        Self { enc, dec, out }
    }

    fn forward<'g, S: Scalar>(&self, p: &Bound<'g, S>, tex: Var<'g, S>, pose: Var<'g, S>) -> Result<GeometryOut<'g, S>> {
        let mut skips = vec![tex];
        for conv in &self.enc {
            let x = lrelu(conv.forward(p, *skips.last().expect("nonempty"))?);
            skips.push(x);
        }
        let bottom = skips.pop().expect("levels > 0");
        let (h, w) = spatial(&bottom);
        let mut y = concat_channels(&[bottom, pose.expand_spatial(h, w)?])?;
        for layer in &self.dec {
            let u = lrelu(layer.forward(p, y, spatial(&y))?).upsample_bilinear2x()?;
            y = concat_channels(&[u, skips.pop().expect("one skip per level")])?;
        }
        let out = self.out.forward(p, y, spatial(&y))?;
        Ok(GeometryOut {
            raw_displacement: out.slice_channels(0, 1)?,
            roughness: out.slice_channels(1, 2)?.sigmoid(),
        })
    }
}

struct NonlinearBranch {
    enc: Vec<Conv>,
    pose: Conv,
    dec: Vec<ConvT>,
}

impl NonlinearBranch {
    fn new<S: Scalar>(store: &mut ParamStore<S>, rng: &mut ChaCha8Rng, cfg: &NetConfig) -> Self {
        let ch = cfg.decoder_channels();
        let levels = cfg.lin_levels();
        let enc = (1..=levels)
            .map(|k| {
                let c_in = if k == 1 { 3 } else { ch[levels - k + 1] };
                Conv::new(store, rng, &format!("nl.enc.{k}"), c_in, ch[levels - k], 3, 2, Some(0.0))
            })
            .collect();
        let pose = Conv::new(store, rng, "nl.pose", cfg.pose_dim, POSE_CHANNELS, 1, 1, Some(0.0));
        // Output biases start at 1 so the modulation starts near identity.
        let dec = (0..levels)
            .map(|j| {
                let c_in = ch[j] + if j == 0 { POSE_CHANNELS } else { 0 };
                ConvT::new(store, rng, &format!("nl.dec.{j}"), c_in, ch[j + 1], 3, 2, Some(1.0))
            })
            .collect();
        Self { enc, pose, dec }
    }

    fn forward<'g, S: Scalar>(&self, p: &Bound<'g, S>, tex: Var<'g, S>, pose: Var<'g, S>) -> Result<Vec<Var<'g, S>>> {
        let mut x = tex;
        for conv in &self.enc {
            x = lrelu(conv.forward(p, x)?);
        }
        let (h, w) = spatial(&x);
        let theta = lrelu(self.pose.forward(p, pose)?).expand_spatial(h, w)?;
        let mut y = concat_channels(&[x, theta])?;
        let mut out = Vec::with_capacity(self.dec.len());
        for layer in &self.dec {
            let (h, w) = spatial(&y);
            y = lrelu(layer.forward(p, y, (2 * h, 2 * w))?);
            out.push(y);
        }
        Ok(out)
    }
}

struct LinearBranch {
    enc: Vec<Conv>,
    dec: Vec<ConvT>,
    mlp: Option<usize>,
}

impl LinearBranch {
    fn new<S: Scalar>(store: &mut ParamStore<S>, rng: &mut ChaCha8Rng, cfg: &NetConfig) -> Self {
        let ch = cfg.decoder_channels();
        let levels = cfg.lin_levels();
        let (enc, mlp) = if cfg.mode == LinearMode::MlpLinear {
            let n_in = 3 * SPLAT_HEIGHT * SPLAT_WIDTH;
            let n_out = ch[0] * cfg.bottleneck() * cfg.bottleneck();
            let w = crate::tensor::uniform_init(&[n_out, n_in, 1, 1], crate::tensor::fan_in_bound(n_in, 1), rng);
            (Vec::new(), Some(store.add("lin.mlp.weight", w)))
        } else {
            let enc = (1..=levels)
                .map(|k| {
                    let c_in = if k == 1 { FEATURE_CHANNELS } else { ch[levels - k + 1] };
                    Conv::new(store, rng, &format!("lin.enc.{k}"), c_in, ch[levels - k], 3, 2, None)
                })
                .collect();
            (enc, None)
        };
        let dec = (0..levels)
            .map(|j| ConvT::new(store, rng, &format!("lin.dec.{j}"), ch[j], ch[j + 1], 3, 2, None))
            .collect();
        Self { enc, dec, mlp }
    }
}

/// The full neural branch with its parameters.
pub struct LinearNet<S: Scalar> {
    pub config: NetConfig,
    pub store: ParamStore<S>,
    geo: GeometryNet,
    nl: NonlinearBranch,
    lin: LinearBranch,
}

impl<S: Scalar> LinearNet<S> {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let geo = GeometryNet::new(&mut store, &mut rng, &config);
        let nl = NonlinearBranch::new(&mut store, &mut rng, &config);
        let lin = LinearBranch::new(&mut store, &mut rng, &config);
        Ok(Self {
            config,
            store,
            geo,
            nl,
            lin,
        })
    }

    pub fn bind<'g>(&self, graph: &'g Graph<S>, trainable: bool) -> Bound<'g, S> {
        self.store.bind(graph, trainable)
    }

    /// Pose vector as a `[P, 1, 1]` constant.
    pub fn pose_input<'g>(&self, graph: &'g Graph<S>, pose: &[f32]) -> Result<Var<'g, S>> {
        if pose.len() != self.config.pose_dim {
            return Err(NetError::Config(format!(
                "pose has {} entries, network expects {}",
                pose.len(),
                self.config.pose_dim
            )));
        }
        Ok(graph.constant(Tensor::from_f32(&[pose.len(), 1, 1], pose)?))
    }

    fn check_texture(&self, tex: &Var<'_, S>) -> Result<()> {
        let r = self.config.res;
        if tex.shape() != [3, r, r] {
            return Err(NetError::Config(format!("texture shape {:?}, expected [3, {r}, {r}]", tex.shape())));
        }
        Ok(())
    }

    /// Displacement (raw) and roughness maps from the mean texture and pose.
    pub fn geometry_forward<'g>(&self, p: &Bound<'g, S>, tex: Var<'g, S>, pose: Var<'g, S>) -> Result<GeometryOut<'g, S>> {
        self.check_texture(&tex)?;
        self.geo.forward(p, tex, pose)
    }

    /// Conditioning features `F_nl^0 .. F_nl^{L-1}`, one per decoder stage.
    pub fn nonlinear_forward<'g>(&self, p: &Bound<'g, S>, tex: Var<'g, S>, pose: Var<'g, S>) -> Result<Vec<Var<'g, S>>> {
        self.check_texture(&tex)?;
        self.nl.forward(p, tex, pose)
    }

    /// The lighting input matching this network's mode.
    pub fn lighting_input<'g>(&self, features: Var<'g, S>, lights: &LightSet) -> LightingInput<'g, S> {
        match self.config.mode {
            LinearMode::MlpLinear => LightingInput::Splat(features.graph().constant(splat_lights(lights))),
            _ => LightingInput::Features(features),
        }
    }

    /// Gain and bias maps. `nl` are the conditioning features of the same
    /// texture and pose.
    pub fn linear_forward<'g>(&self, p: &Bound<'g, S>, input: LightingInput<'g, S>, nl: &[Var<'g, S>]) -> Result<LinearOut<'g, S>> {
        let levels = self.config.lin_levels();
        if nl.len() != levels {
            return Err(NetError::Config(format!("{} conditioning maps for {levels} stages", nl.len())));
        }
        let act = |v: Var<'g, S>| if self.config.mode.has_activations() { lrelu(v) } else { v };
        let r = self.config.res;
        let mut encoder = Vec::with_capacity(levels);
        let mut d = match input {
            LightingInput::Features(f) => {
                if f.shape() != [FEATURE_CHANNELS, r, r] {
                    return Err(NetError::Config(format!("features shape {:?}", f.shape())));
                }
                if self.lin.enc.is_empty() {
                    return Err(NetError::Config("this network takes a light splat".into()));
                }
                let mut x = f;
                for conv in &self.lin.enc {
                    x = act(conv.forward(p, x)?);
                    encoder.push(x);
                }
                x
            }
            LightingInput::Splat(s) => {
                let w = self
                    .lin
                    .mlp
                    .ok_or_else(|| NetError::Config("this network takes shading features".into()))?;
                let (c0, b) = (self.config.decoder_channels()[0], self.config.bottleneck());
                s.reshape(&[s.value().len(), 1, 1])?
                    .conv2d(p.var(w), None, 1, 0)?
                    .reshape(&[c0, b, b])?
            }
        };
        for (j, layer) in self.lin.dec.iter().enumerate() {
            let (h, w) = spatial(&d);
            let out = Some((2 * h, 2 * w));
            d = if encoder.is_empty() {
                d.conv_transpose2d(p.var(layer.weight), None, layer.stride, layer.pad, out)?
                    .mul(nl[j])?
                    .scale(S::lit(FRAC_1_SQRT_2))
            } else {
                let e = encoder[levels - 1 - j];
                fuse(e, d, nl[j], p.var(layer.weight), layer.stride, layer.pad, out)?
            };
            if j + 1 < levels {
                d = act(d);
            }
        }
        Ok(LinearOut {
            gain: d.slice_channels(0, 3)?,
            bias: d.slice_channels(3, 4)?,
            encoder,
        })
    }

    /// Names of the lighting-branch parameters.
    pub fn lighting_parameters(&self) -> impl Iterator<Item = &str> {
        self.store.names().iter().map(String::as_str).filter(|n| n.starts_with("lin."))
    }

    pub fn to_checkpoint(&self, extra_header: &[(String, String)]) -> Checkpoint {
        let mut header = vec![("format".to_string(), "linlight-net".to_string())];
        header.extend(self.config.header());
        header.extend(extra_header.iter().cloned());
        Checkpoint {
            header,
            records: self.store.to_records(),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config = NetConfig::from_header(ckpt)?;
        let mut net = Self::new(config, 0)?;
        net.store.load_records(&ckpt.records, "").map_err(NetError::Checkpoint)?;
        Ok(net)
    }
}
