use std::fs::{File, OpenOptions};
use std::io::BufWriter;
use std::path::Path;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Split, TrainConfig};
use super::disc::Discriminator;
use super::loss::{
    hinge_d_loss, hinge_g_loss, linearity_consistency_loss, loss_l1reg, loss_reconstruction, total_loss, LossParts,
};
use super::metrics::{psnr, ssim};
use super::TrainError;
use crate::geometry::RasterLookup;
use crate::linearnet::{LinearMode, LinearNet, NetConfig, ParamStore};
use crate::math::V3;
use crate::pipeline::{forward_frame, FrameScene, PoseGeometry};
use crate::shading::{LightSet, Visibility};
use crate::synthdata::{physical_texture, Dataset, FrameKind};
use crate::tensor::{adam_step, write_checkpoint, AdamConfig, AdamState, Checkpoint, Graph, MultiStepLr, Tensor, Var};

/// Geometry, visibility and raster caches for every pose and camera of a
/// dataset.
pub struct TrainData<'d> {
    pub dataset: &'d Dataset,
    pub geometry: Vec<PoseGeometry>,
    full_visibility: Vec<Visibility>,
    rasters: Vec<Vec<Rc<RasterLookup>>>,
    pub pose_vectors: Vec<Vec<f32>>,
}

impl<'d> TrainData<'d> {
    pub fn new(dataset: &'d Dataset) -> Result<Self, TrainError> {
        let res = dataset.config.res;
        let all = LightSet::new(
            (0..dataset.light_dirs.len())
                .map(|i| crate::shading::Light {
                    dir: dataset.light_dirs[i],
                    rgb: [1.0; 3],
                })
                .collect(),
        );
        let mut geometry = Vec::new();
        let mut full_visibility = Vec::new();
        let mut rasters = Vec::new();
        for (pi, pose) in dataset.poses.iter().enumerate() {
            let geo = PoseGeometry::new(&dataset.rig, pose, res)?;
            log::info!("pose {pi}: caching visibility of {} rig lights", all.len());
            full_visibility.push(geo.visibility(&all));
            rasters.push(dataset.cameras.iter().map(|c| Rc::new(geo.raster(&dataset.rig, c))).collect());
            geometry.push(geo);
        }
        Ok(Self {
            dataset,
            geometry,
            full_visibility,
            rasters,
            pose_vectors: dataset.poses.iter().map(|p| p.to_vec()).collect(),
        })
    }

    pub fn scene(&self, frame: usize) -> FrameScene {
        let f = &self.dataset.frames[frame];
        let geo = &self.geometry[f.pose];
        let vis = self.full_visibility[f.pose].select(&f.light_indices);
        FrameScene {
            ctx: Rc::new(geo.context(&self.dataset.cameras[f.camera], f.lights.clone(), vis)),
            raster: Rc::clone(&self.rasters[f.pose][f.camera]),
        }
    }

    /// A scene of the frame's pose and camera under a subset of its lights.
    pub fn scene_with_lights(&self, frame: usize, subset: &[usize]) -> FrameScene {
        let f = &self.dataset.frames[frame];
        let geo = &self.geometry[f.pose];
        let rig_idx: Vec<usize> = subset.iter().map(|&i| f.light_indices[i]).collect();
        let lights = LightSet::new(subset.iter().map(|&i| f.lights.lights[i]).collect());
        FrameScene {
            ctx: Rc::new(geo.context(&self.dataset.cameras[f.camera], lights, self.full_visibility[f.pose].select(&rig_idx))),
            raster: Rc::clone(&self.rasters[f.pose][f.camera]),
        }
    }

    pub fn mask(&self, frame: usize) -> Tensor<f32> {
        let f = &self.dataset.frames[frame];
        self.rasters[f.pose][f.camera].mask()
    }

    /// Diffuse and specular Phong maps `[6, H, W]` of the coarse surface,
    /// in image space.
    pub fn phong_conditioning(&self, frame: usize, scene: &FrameScene) -> Result<Tensor<f32>, TrainError> {
        let f = &self.dataset.frames[frame];
        let (a, s) = scene.ctx.phong(&self.geometry[f.pose].maps.normal);
        let n = a.len();
        let r = scene.ctx.res;
        let mut data = vec![0.0f32; 6 * n];
        for t in 0..n {
            for c in 0..3 {
                data[c * n + t] = a[t][c] as f32;
                data[(3 + c) * n + t] = s[t][c] as f32;
            }
        }
        Ok(scene.raster.render(&Tensor::from_vec(&[6, r, r], data)?)?)
    }

    /// Frame indices of a split, in dataset order.
    pub fn split(&self, split: Split, holdout_poses: usize, holdout_identities: usize) -> Vec<usize> {
        let ds = self.dataset;
        (0..ds.frames.len())
            .filter(|&i| split.contains(&ds.frames[i], ds.poses.len(), ds.identities.len(), holdout_poses, holdout_identities))
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub iteration: u64,
    pub lr: f64,
    pub loss: f64,
    pub recon_physical: f64,
    pub recon_neural: f64,
    pub gan_g: f64,
    pub gan_d: f64,
    pub reg: f64,
    pub lc: f64,
    /// Set when the step was skipped because of a non-finite value.
    pub aborted: Option<String>,
}

/// Masked metrics of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub frame: usize,
    pub name: String,
    pub identity: usize,
    pub pose: usize,
    pub camera: usize,
    pub kind: FrameKind,
    pub psnr: f64,
    pub ssim: f64,
    /// Physical branch with the network's geometry.
    pub psnr_physical: f64,
    /// Physical branch with the identity's true materials.
    pub psnr_physical_true: f64,
}

/// Neural and physical renders of each frame against its ground truth.
pub fn evaluate(net: &LinearNet<f32>, data: &TrainData<'_>, frames: &[usize]) -> Result<Vec<EvalRow>, TrainError> {
    let ds = data.dataset;
    let mut rows = Vec::with_capacity(frames.len());
    for &fi in frames {
        let f = &ds.frames[fi];
        let scene = data.scene(fi);
        let g = Graph::new();
        let p = net.bind(&g, false);
        let tex = g.constant(ds.mean_textures[f.identity].clone());
        let out = forward_frame(net, &p, &data.geometry[f.pose], &scene, tex, &data.pose_vectors[f.pose])?;
        let gt = &ds.images[fi];
        let mask = data.mask(fi);
        let neural = out.neural_image.value();
        let physical = out.physical_image.value();
        let truth = scene
            .raster
            .render(&physical_texture::<f32>(&ds.identities[f.identity], &data.geometry[f.pose], &scene.ctx))?;
        rows.push(EvalRow {
            frame: fi,
            name: f.name.clone(),
            identity: f.identity,
            pose: f.pose,
            camera: f.camera,
            kind: f.kind,
            psnr: psnr(&neural, gt, &mask),
            ssim: ssim(&neural, gt, &mask),
            psnr_physical: psnr(&physical, gt, &mask),
            psnr_physical_true: psnr(&truth, gt, &mask),
        });
    }
    Ok(rows)
}

pub fn write_eval_csv(path: &Path, rows: &[EvalRow]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["frame", "identity", "pose", "camera", "kind", "psnr", "ssim", "psnr_physical", "psnr_physical_true"])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            r.identity.to_string(),
            r.pose.to_string(),
            r.camera.to_string(),
            match r.kind {
                FrameKind::Full => "full".into(),
                FrameKind::Group => "group".into(),
            },
            format!("{:.6}", r.psnr),
            format!("{:.6}", r.ssim),
            format!("{:.6}", r.psnr_physical),
            format!("{:.6}", r.psnr_physical_true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Probe averages logged to the metrics CSV.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeMetrics {
    pub psnr: f64,
    pub ssim: f64,
    pub psnr_physical: f64,
}

impl ProbeMetrics {
    pub fn from_rows(rows: &[EvalRow]) -> Self {
        Self {
            psnr: mean(rows.iter().map(|r| r.psnr)),
            ssim: mean(rows.iter().map(|r| r.ssim)),
            psnr_physical: mean(rows.iter().map(|r| r.psnr_physical)),
        }
    }
}

const METRICS_HEADER: [&str; 13] = [
    "iteration",
    "lr",
    "loss",
    "recon_physical",
    "recon_neural",
    "gan_g",
    "gan_d",
    "reg",
    "lc",
    "aborted",
    "probe_psnr",
    "probe_ssim",
    "probe_psnr_physical",
];

fn all_finite(ts: &[Tensor<f32>]) -> bool {
    ts.iter().all(|t| t.all_finite())
}

fn opt_records(prefix: &str, store: &ParamStore<f32>, st: &AdamState<f32>) -> Vec<(String, Tensor<f32>)> {
    let mut out = Vec::new();
    for (name, m) in store.names().iter().zip(&st.m) {
        out.push((format!("{prefix}.m.{name}"), m.clone()));
    }
    for (name, v) in store.names().iter().zip(&st.v) {
        out.push((format!("{prefix}.v.{name}"), v.clone()));
    }
    out
}

fn load_opt(prefix: &str, store: &ParamStore<f32>, ckpt: &Checkpoint, step_key: &str) -> Result<Option<AdamState<f32>>, TrainError> {
    let Some(step) = ckpt.header_value(step_key) else { return Ok(None) };
    let step = step.parse().map_err(|_| TrainError::Checkpoint(format!("bad {step_key} {step:?}")))?;
    let mut st = AdamState::new(store.values());
    for (i, name) in store.names().iter().enumerate() {
        for (which, slot) in [("m", &mut st.m[i]), ("v", &mut st.v[i])] {
            let key = format!("{prefix}.{which}.{name}");
            let t = ckpt.record(&key).ok_or_else(|| TrainError::Checkpoint(format!("missing {key}")))?;
            if t.shape() != slot.shape() {
                return Err(TrainError::Checkpoint(format!("{key}: shape {:?}", t.shape())));
            }
            *slot = t.clone();
        }
    }
    st.step = step;
    Ok(Some(st))
}

/// Optimizer loop over a dataset: both branches are supervised by the
/// reconstruction loss, the neural branch additionally by the hinge GAN
/// and the encoder L1 penalty, with alternating discriminator updates.
pub struct Trainer<'d> {
    pub config: TrainConfig,
    pub net: LinearNet<f32>,
    pub disc: Discriminator<f32>,
    pub iteration: u64,
    pub aborted_steps: u64,
    opt: AdamState<f32>,
    disc_opt: AdamState<f32>,
    schedule: MultiStepLr,
    data: TrainData<'d>,
    train_frames: Vec<usize>,
    probe: Vec<usize>,
}

impl<'d> Trainer<'d> {
    pub fn new(config: TrainConfig, dataset: &'d Dataset) -> Result<Self, TrainError> {
        config.validate()?;
        let pose_dim = dataset.poses.first().map_or(0, |p| p.to_vec().len());
        let mut net_cfg = NetConfig::new(dataset.config.res, config.mode, pose_dim);
        net_cfg.geo_width = config.geo_width;
        let net = LinearNet::new(net_cfg, config.seed)?;
        let disc = Discriminator::new(config.seed.wrapping_add(1));
        Self::assemble(config, dataset, net, disc, None, None, 0)
    }

    /// Continues from a checkpoint written by [`Trainer::checkpoint`]; the
    /// iteration counter and optimizer moments are restored.
    pub fn resume(config: TrainConfig, dataset: &'d Dataset, ckpt: &Checkpoint) -> Result<Self, TrainError> {
        config.validate()?;
        let net = LinearNet::from_checkpoint(ckpt)?;
        if net.config.mode != config.mode {
            return Err(TrainError::Checkpoint(format!(
                "checkpoint mode {} differs from configured mode {}",
                net.config.mode, config.mode
            )));
        }
        let mut disc = Discriminator::new(config.seed.wrapping_add(1));
        if ckpt.records.iter().any(|(n, _)| n.starts_with("disc.")) {
            disc.load_checkpoint(ckpt).map_err(TrainError::Checkpoint)?;
        }
        let iteration = match ckpt.header_value("iteration") {
            Some(v) => v.parse().map_err(|_| TrainError::Checkpoint(format!("bad iteration {v:?}")))?,
            None => 0,
        };
        let opt = load_opt("opt", &net.store, ckpt, "opt_step")?;
        let disc_opt = load_opt("opt.disc", &disc.store, ckpt, "disc_opt_step")?;
        Self::assemble(config, dataset, net, disc, opt, disc_opt, iteration)
    }

    fn assemble(
        config: TrainConfig,
        dataset: &'d Dataset,
        net: LinearNet<f32>,
        disc: Discriminator<f32>,
        opt: Option<AdamState<f32>>,
        disc_opt: Option<AdamState<f32>>,
        iteration: u64,
    ) -> Result<Self, TrainError> {
        if net.config.res != dataset.config.res {
            return Err(TrainError::Checkpoint(format!(
                "network resolution {} differs from dataset resolution {}",
                net.config.res, dataset.config.res
            )));
        }
        if dataset.config.image_size % 4 != 0 {
            return Err(TrainError::Config(crate::config::ConfigError::Invalid {
                key: "image_size".into(),
                msg: "must be divisible by 4 for training".into(),
            }));
        }
        let data = TrainData::new(dataset)?;
        let (hp, hi) = (config.holdout_poses, config.holdout_identities);
        let train_frames: Vec<usize> = data
            .split(Split::Train, hp, hi)
            .into_iter()
            .filter(|&i| config.frames.accepts(&dataset.frames[i]))
            .collect();
        if train_frames.is_empty() {
            return Err(TrainError::NoFrames);
        }
        let held = data.split(Split::HeldoutPose, hp, hi);
        let unseen = data.split(Split::UnseenIdentity, hp, hi);
        let pool = [&held, &unseen, &train_frames].into_iter().find(|v| !v.is_empty()).expect("train frames");
        let k = config.probe_frames.min(pool.len());
        let probe = (0..k).map(|i| pool[i * pool.len() / k]).collect();
        Ok(Self {
            schedule: MultiStepLr::standard(config.lr, config.iterations),
            opt: opt.unwrap_or_else(|| AdamState::new(net.store.values())),
            disc_opt: disc_opt.unwrap_or_else(|| AdamState::new(disc.store.values())),
            config,
            net,
            disc,
            iteration,
            aborted_steps: 0,
            data,
            train_frames,
            probe,
        })
    }

    pub fn data(&self) -> &TrainData<'d> {
        &self.data
    }

    pub fn train_frames(&self) -> &[usize] {
        &self.train_frames
    }

    pub fn probe_frames(&self) -> &[usize] {
        &self.probe
    }

    fn step_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ self.iteration)
    }

    /// One generator update on a batch of the given frames, followed by a
    /// discriminator update when the GAN term is active.
    pub fn step_on(&mut self, batch: &[usize]) -> Result<StepReport, TrainError> {
        let mut rng = self.step_rng();
        let lr = self.schedule.at(self.iteration);
        let mut report = StepReport {
            iteration: self.iteration,
            lr,
            ..Default::default()
        };
        let cfg = self.config.clone();
        let ds = self.data.dataset;
        let inv_b = 1.0 / batch.len() as f64;
        let g = Graph::<f32>::new();
        let p = self.net.bind(&g, true);
        let dp = self.disc.bind(&g, false);
        let mut loss: Option<Var<'_, f32>> = None;
        let mut fakes = Vec::new();
        for &fi in batch {
            let f = &ds.frames[fi];
            let scene = self.data.scene(fi);
            let geo = &self.data.geometry[f.pose];
            let tex = g.constant(ds.mean_textures[f.identity].clone());
            let out = forward_frame(&self.net, &p, geo, &scene, tex, &self.data.pose_vectors[f.pose])?;
            let gt = g.constant(ds.images[fi].clone());
            let mask = g.constant(self.data.mask(fi));
            let rp = loss_reconstruction(out.physical_image, gt, mask)?;
            let rn = loss_reconstruction(out.neural_image, gt, mask)?;
            report.recon_physical += to_f64(rp.total) * inv_b;
            report.recon_neural += to_f64(rn.total) * inv_b;
            let img = rp.total.add(rn.total)?;
            let gan = if cfg.gan_active() {
                let cond = self.data.phong_conditioning(fi, &scene)?;
                let scores = self.disc.forward(&dp, out.neural_image, g.constant(cond.clone()))?;
                fakes.push(((*out.neural_image.value()).clone(), fi, cond));
                let gl = hinge_g_loss(&scores)?;
                report.gan_g += to_f64(gl) * inv_b;
                Some(gl)
            } else {
                None
            };
            let reg = if cfg.use_l1reg {
                let r = loss_l1reg(&g, &out.linear.encoder)?;
                report.reg += to_f64(r) * inv_b;
                Some(r)
            } else {
                None
            };
            let mut sample = total_loss(&LossParts { img, gan, reg }, &cfg.weights);
            if cfg.mode == LinearMode::LinearityConsistency && f.lights.len() >= 2 && cfg.lc_weight > 0.0 {
                let lc = self.consistency_term(&g, &p, fi, &out, &mut rng)?;
                report.lc += to_f64(lc) * inv_b;
                sample = sample.add(lc.scale(cfg.lc_weight as f32))?;
            }
            let sample = sample.scale(inv_b as f32);
            loss = Some(match loss {
                Some(l) => l.add(sample)?,
                None => sample,
            });
        }
        let loss = loss.ok_or(TrainError::NoFrames)?;
        report.loss = to_f64(loss);
        if !report.loss.is_finite() {
            return Ok(self.abort(report, "non-finite loss"));
        }
        let grads = g.backward(loss)?;
        let grads = self.net.store.gradients(&p, &grads);
        if !all_finite(&grads) {
            return Ok(self.abort(report, "non-finite gradient"));
        }
        if !fakes.is_empty() {
            match self.discriminator_step(&fakes, lr)? {
                Some(d) => report.gan_d = d,
                None => return Ok(self.abort(report, "non-finite discriminator loss")),
            }
        }
        let adam = AdamConfig { lr, ..AdamConfig::default() };
        adam_step(self.net.store.values_mut(), &grads, &mut self.opt, &adam);
        self.iteration += 1;
        Ok(report)
    }

    fn consistency_term<'g>(
        &self,
        g: &'g Graph<f32>,
        p: &crate::linearnet::Bound<'g, f32>,
        fi: usize,
        out: &crate::pipeline::FrameOutputs<'g, f32>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Var<'g, f32>, TrainError> {
        let f = &self.data.dataset.frames[fi];
        let geo = &self.data.geometry[f.pose];
        let disp: Vec<f64> = out.displacement.value().data().iter().map(|&v| v as f64).collect();
        let normals: Vec<V3> = geo.refine.forward(&disp);
        let beta: Vec<f64> = out.geometry.roughness.value().data().iter().map(|&v| v as f64).collect();
        let mut order: Vec<usize> = (0..f.lights.len()).collect();
        order.shuffle(rng);
        let half = order.len() / 2;
        let feats = |subset: &[usize]| -> Tensor<f32> {
            self.data.scene_with_lights(fi, subset).ctx.features(&normals, &beta).to_tensor()
        };
        let f1 = g.constant(feats(&order[..half]));
        let f2 = g.constant(feats(&order[half..]));
        let (a1, a2) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
        Ok(linearity_consistency_loss(&self.net, p, f1, f2, a1, a2, &out.conditioning)?)
    }

    /// Returns the discriminator loss, or `None` when it was not finite.
    fn discriminator_step(&mut self, fakes: &[(Tensor<f32>, usize, Tensor<f32>)], lr: f64) -> Result<Option<f64>, TrainError> {
        let g = Graph::<f32>::new();
        let dp = self.disc.bind(&g, true);
        let inv = 1.0 / fakes.len() as f32;
        let mut loss: Option<Var<'_, f32>> = None;
        for (fake, fi, cond) in fakes {
            let cond = g.constant(cond.clone());
            let real = self.disc.forward(&dp, g.constant(self.data.dataset.images[*fi].clone()), cond)?;
            let fake = self.disc.forward(&dp, g.constant(fake.clone()), cond)?;
            let d = hinge_d_loss(&real, &fake)?.scale(inv);
            loss = Some(match loss {
                Some(l) => l.add(d)?,
                None => d,
            });
        }
        let loss = loss.expect("nonempty");
        let value = to_f64(loss);
        if !value.is_finite() {
            return Ok(None);
        }
        let grads = g.backward(loss)?;
        let grads = self.disc.store.gradients(&dp, &grads);
        if !all_finite(&grads) {
            return Ok(None);
        }
        let adam = AdamConfig { lr, ..AdamConfig::default() };
        adam_step(self.disc.store.values_mut(), &grads, &mut self.disc_opt, &adam);
        Ok(Some(value))
    }

    fn abort(&mut self, mut report: StepReport, why: &str) -> StepReport {
        log::warn!("iteration {}: {why}; step skipped, parameters kept", self.iteration);
        report.aborted = Some(why.to_string());
        self.aborted_steps += 1;
        self.iteration += 1;
        report
    }

    /// Samples a batch of training frames (deterministic in seed and
    /// iteration) and steps on it.
    pub fn step(&mut self) -> Result<StepReport, TrainError> {
        let mut rng = self.step_rng();
        let batch: Vec<usize> = (0..self.config.batch)
            .map(|_| self.train_frames[rng.gen_range(0..self.train_frames.len())])
            .collect();
        self.step_on(&batch)
    }

    pub fn probe_metrics(&self) -> Result<ProbeMetrics, TrainError> {
        Ok(ProbeMetrics::from_rows(&evaluate(&self.net, &self.data, &self.probe)?))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut extra = vec![
            ("iteration".to_string(), self.iteration.to_string()),
            ("opt_step".to_string(), self.opt.step.to_string()),
            ("disc_opt_step".to_string(), self.disc_opt.step.to_string()),
        ];
        extra.extend(self.config.pairs().into_iter().map(|(k, v)| (format!("train.{k}"), v)));
        let mut ckpt = self.net.to_checkpoint(&extra);
        ckpt.records.extend(self.disc.store.to_records());
        ckpt.records.extend(opt_records("opt", &self.net.store, &self.opt));
        ckpt.records.extend(opt_records("opt.disc", &self.disc.store, &self.disc_opt));
        ckpt
    }

    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = BufWriter::new(File::create(path)?);
        write_checkpoint(&mut w, &self.checkpoint())?;
        Ok(())
    }

    /// Runs until `config.iterations`, appending to the metrics CSV and
    /// writing checkpoints as configured. Returns the last step report.
    pub fn run(&mut self, checkpoint: Option<&Path>, metrics: Option<&Path>) -> Result<Option<StepReport>, TrainError> {
        let mut writer = match metrics {
            Some(path) => {
                let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
                let file = OpenOptions::new().create(true).append(true).open(path)?;
                let mut w = csv::Writer::from_writer(file);
                if fresh {
                    w.write_record(METRICS_HEADER)?;
                }
                Some(w)
            }
            None => None,
        };
        let mut last = None;
        while self.iteration < self.config.iterations {
            let report = self.step()?;
            let done = self.iteration;
            let probe = if (self.config.eval_every > 0 && done % self.config.eval_every == 0) || done == self.config.iterations {
                Some(self.probe_metrics()?)
            } else {
                None
            };
            if let Some(w) = writer.as_mut() {
                let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
                w.write_record([
                    report.iteration.to_string(),
                    format!("{:e}", report.lr),
                    format!("{:.6}", report.loss),
                    format!("{:.6}", report.recon_physical),
                    format!("{:.6}", report.recon_neural),
                    format!("{:.6}", report.gan_g),
                    format!("{:.6}", report.gan_d),
                    format!("{:.6}", report.reg),
                    format!("{:.6}", report.lc),
                    report.aborted.clone().unwrap_or_default(),
                    opt(probe.map(|p| p.psnr)),
                    opt(probe.map(|p| p.ssim)),
                    opt(probe.map(|p| p.psnr_physical)),
                ])?;
                w.flush()?;
            }
            if let Some(p) = probe {
                log::info!(
                    "iter {done}: loss {:.4}, probe PSNR {:.2} dB (physical {:.2} dB), SSIM {:.4}",
                    report.loss,
                    p.psnr,
                    p.psnr_physical,
                    p.ssim
                );
            }
            if let Some(path) = checkpoint {
                if self.config.checkpoint_every > 0 && done % self.config.checkpoint_every == 0 {
                    self.save(path)?;
                }
            }
            last = Some(report);
        }
        if let Some(path) = checkpoint {
            self.save(path)?;
        }
        Ok(last)
    }
}

fn to_f64(v: Var<'_, f32>) -> f64 {
    v.value().data()[0] as f64
}
