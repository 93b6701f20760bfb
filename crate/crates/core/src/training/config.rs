use std::fmt;
use std::str::FromStr;

use super::loss::LossWeights;
use crate::config::{parse_pairs, parse_value, ConfigError};
use crate::linearnet::LinearMode;
use crate::synthdata::{FrameKind, FrameRecord};

/// Subsets of a dataset's frames given the hold-out counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    /// Held-out poses of training identities.
    HeldoutPose,
    /// Every frame of the held-out identities.
    UnseenIdentity,
    All,
}

impl Split {
    pub const ALL: [Split; 4] = [Self::Train, Self::HeldoutPose, Self::UnseenIdentity, Self::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::HeldoutPose => "heldout-pose",
            Self::UnseenIdentity => "unseen-identity",
            Self::All => "all",
        }
    }

    /// Whether a frame of `identity` in `pose` belongs to this split when
    /// the last `holdout_poses` of `n_poses` and the last
    /// `holdout_identities` of `n_identities` are held out.
    pub fn contains(self, frame: &FrameRecord, n_poses: usize, n_identities: usize, holdout_poses: usize, holdout_identities: usize) -> bool {
        let seen_id = frame.identity < n_identities.saturating_sub(holdout_identities);
        let seen_pose = frame.pose < n_poses.saturating_sub(holdout_poses);
        match self {
            Self::Train => seen_id && seen_pose,
            Self::HeldoutPose => seen_id && !seen_pose,
            Self::UnseenIdentity => !seen_id,
            Self::All => true,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown split {s:?}"))
    }
}

/// Which dataset frames feed the optimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FrameFilter {
    All,
    /// Grouped-light frames only.
    #[default]
    Group,
    Full,
}

impl FrameFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::All => "all",
            Self::Group => "group",
            Self::Full => "full",
        }
    }

    pub fn accepts(self, frame: &FrameRecord) -> bool {
        match self {
            Self::All => true,
            Self::Group => frame.kind == FrameKind::Group,
            Self::Full => frame.kind == FrameKind::Full,
        }
    }
}

impl fmt::Display for FrameFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FrameFilter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        [Self::All, Self::Group, Self::Full]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown frame filter {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Initial learning rate; decayed to 0.3× over the run.
    pub lr: f64,
    pub iterations: u64,
    pub batch: usize,
    pub seed: u64,
    pub use_gan: bool,
    pub use_l1reg: bool,
    pub mode: LinearMode,
    pub frames: FrameFilter,
    /// The last `holdout_poses` poses are excluded from training and
    /// provide the probe frames.
    pub holdout_poses: usize,
    /// The last `holdout_identities` identities are never trained on.
    pub holdout_identities: usize,
    pub geo_width: usize,
    pub weights: LossWeights,
    /// Weight of the linearity-consistency penalty (that mode only).
    pub lc_weight: f64,
    /// Probe evaluation period; 0 evaluates only at the end.
    pub eval_every: u64,
    pub probe_frames: usize,
    /// Checkpoint period; 0 writes only at the end.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            iterations: 2000,
            batch: 1,
            seed: 0,
            use_gan: true,
            use_l1reg: true,
            mode: LinearMode::Linear,
            frames: FrameFilter::Group,
            holdout_poses: 1,
            holdout_identities: 0,
            geo_width: 64,
            weights: LossWeights::default(),
            lc_weight: 0.1,
            eval_every: 100,
            probe_frames: 4,
            checkpoint_every: 0,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        }),
    }
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        match key {
            "lr" => self.lr = parse_value(key, value)?,
            "iterations" => self.iterations = parse_value(key, value)?,
            "batch" => self.batch = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "use_gan" => self.use_gan = parse_bool(key, value)?,
            "use_l1reg" => self.use_l1reg = parse_bool(key, value)?,
            "mode" => self.mode = value.parse().map_err(|_| bad())?,
            "frames" => self.frames = value.parse().map_err(|_| bad())?,
            "holdout_poses" => self.holdout_poses = parse_value(key, value)?,
            "holdout_identities" => self.holdout_identities = parse_value(key, value)?,
            "geo_width" => self.geo_width = parse_value(key, value)?,
            "lambda_img" => self.weights.img = parse_value(key, value)?,
            "lambda_gan" => self.weights.gan = parse_value(key, value)?,
            "lambda_reg" => self.weights.reg = parse_value(key, value)?,
            "lc_weight" => self.lc_weight = parse_value(key, value)?,
            "eval_every" => self.eval_every = parse_value(key, value)?,
            "probe_frames" => self.probe_frames = parse_value(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in parse_pairs(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key: &str, msg: &str| ConfigError::Invalid {
            key: key.into(),
            msg: msg.into(),
        };
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(invalid("lr", "must be positive"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be positive"));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be positive"));
        }
        if self.geo_width == 0 {
            return Err(invalid("geo_width", "must be positive"));
        }
        self.weights.validate().map_err(|m| invalid("lambda", &m))?;
        if !(self.lc_weight >= 0.0) {
            return Err(invalid("lc_weight", "must be nonnegative"));
        }
        Ok(())
    }

    /// Parsable by [`TrainConfig::parse`].
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        [
            ("lr", self.lr.to_string()),
            ("iterations", self.iterations.to_string()),
            ("batch", self.batch.to_string()),
            ("seed", self.seed.to_string()),
            ("use_gan", self.use_gan.to_string()),
            ("use_l1reg", self.use_l1reg.to_string()),
            ("mode", self.mode.to_string()),
            ("frames", self.frames.to_string()),
            ("holdout_poses", self.holdout_poses.to_string()),
            ("holdout_identities", self.holdout_identities.to_string()),
            ("geo_width", self.geo_width.to_string()),
            ("lambda_img", self.weights.img.to_string()),
            ("lambda_gan", self.weights.gan.to_string()),
            ("lambda_reg", self.weights.reg.to_string()),
            ("lc_weight", self.lc_weight.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("probe_frames", self.probe_frames.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Discriminator updates run only when they can influence the generator.
    pub fn gan_active(&self) -> bool {
        self.use_gan && self.weights.gan > 0.0
    }
}
