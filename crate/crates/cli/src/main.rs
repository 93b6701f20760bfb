//! `linlight`: dataset generation, training, relighting, refinement,
//! evaluation, benchmarking and linearity audits.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use linlight::geometry::{procedural_hand, HandParams, Pose};
use linlight::image_io::{read_pfm, write_image, write_pfm};
use linlight::linearnet::{audit_linear, LinearMode, LinearNet, NetConfig};
use linlight::pipeline::{relight_env, relight_env_by_sum, PoseGeometry, Relighter, StageTimes};
use linlight::shading::{sphere_directions, EnvironmentMap, LightSet};
use linlight::synthdata::{
    camera_rig, make_dataset, parse_camera, parse_pose, physical_texture, rig_lights, Dataset, DatasetConfig,
};
use linlight::tensor::{max_rel_diff, read_checkpoint, Checkpoint, Tensor};
use linlight::training::{
    evaluate, psnr, refine_identity, ssim, write_eval_csv, EvalRow, RefineConfig, Split, TrainConfig, TrainData,
    Trainer,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "linlight", version, about = "Hybrid neural-physical hand relighting")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. Each can also be set through the
/// environment variable shown.
#[derive(Args, Clone, Debug)]
struct Global {
    /// key = value configuration file (dataset config for gen-data, training
    /// config for train)
    #[arg(long, global = true, env = "LL_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "LL_SEED")]
    seed: Option<u64>,
    /// Texture resolution
    #[arg(long, global = true, env = "LL_RES")]
    res: Option<usize>,
    #[arg(long, global = true, env = "LL_MODE")]
    mode: Option<String>,
    /// Single-threaded execution for bit-reproducible outputs
    #[arg(long, global = true, env = "LL_DETERMINISTIC")]
    deterministic: bool,
    #[arg(long, global = true, env = "LL_THREADS")]
    threads: Option<usize>,
}

impl Global {
    fn mode(&self) -> Result<Option<LinearMode>> {
        self.mode.as_deref().map(|m| m.parse().map_err(|e| anyhow!("{e}"))).transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    GenData {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a network on a dataset
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Output checkpoint
        #[arg(long)]
        out: PathBuf,
        /// Metrics CSV (appended to when resuming)
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Continue from this checkpoint
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<u64>,
    },
    /// Render one dataset frame
    Render {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        identity: usize,
        /// Frame name, e.g. p000_c00_group
        #[arg(long)]
        frame: String,
        /// Replace the frame's lights with a light file
        #[arg(long)]
        lights: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Branch::Neural)]
        branch: Branch,
        /// .png (tone-mapped) or .pfm (linear)
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        exposure: f32,
    },
    /// Relight under an environment map reduced to N directional lights
    RelightEnv {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Equirectangular environment map (.pfm)
        #[arg(long)]
        env: PathBuf,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        identity: usize,
        #[arg(long, default_value_t = 0)]
        pose: usize,
        #[arg(long, default_value_t = 0)]
        camera: usize,
        /// Pose file overriding --pose
        #[arg(long)]
        pose_file: Option<PathBuf>,
        /// Camera file overriding --camera
        #[arg(long)]
        camera_file: Option<PathBuf>,
        /// Also render the sum of N single-light renders and compare
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        exposure: f32,
    },
    /// Recover an identity's materials by inverse rendering
    Refine {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        identity: usize,
        /// Initialize displacement from this network's geometry branch
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        /// Output directory for albedo, roughness and displacement maps
        #[arg(long)]
        out: PathBuf,
    },
    /// PSNR/SSIM table of a dataset split
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "heldout-pose")]
        split: String,
        /// Defaults to the value the checkpoint was trained with
        #[arg(long)]
        holdout_poses: Option<usize>,
        #[arg(long)]
        holdout_identities: Option<usize>,
        /// Evaluate a seeded random sample of this many frames
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value_t = Predict::Neural)]
        predict: Predict,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-stage timings of neural relighting
    Bench {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        lights: usize,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
    },
    /// Structural and numerical linearity audit of a checkpoint
    AuditLinear {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::GenData { .. } => "gen-data",
            Self::Train { .. } => "train",
            Self::Render { .. } => "render",
            Self::RelightEnv { .. } => "relight-env",
            Self::Refine { .. } => "refine",
            Self::Eval { .. } => "eval",
            Self::Bench { .. } => "bench",
            Self::AuditLinear { .. } => "audit-linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Branch {
    Neural,
    Physical,
    /// Ground-truth renderer with the identity's true materials
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Predict {
    Neural,
    /// Score the ground truth against itself
    GroundTruth,
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    read_checkpoint(&mut r).with_context(|| format!("reading checkpoint {}", path.display()))
}

fn load_net(path: &Path) -> Result<LinearNet<f32>> {
    Ok(LinearNet::from_checkpoint(&load_checkpoint(path)?)?)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn setup_threads(g: &Global) -> Result<()> {
    let threads = if g.deterministic { Some(1) } else { g.threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn gen_data(g: &Global, out: &Path) -> Result<()> {
    let mut cfg = match &g.config {
        Some(p) => DatasetConfig::parse(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => DatasetConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = g.res {
        cfg.res = r;
    }
    cfg.validate()?;
    let t = Instant::now();
    let ds = make_dataset(&cfg)?;
    ds.write(out)?;
    let full = ds.frames.iter().filter(|f| f.kind == linlight::synthdata::FrameKind::Full).count();
    println!(
        "gen-data: {} frames ({} fully lit, {} grouped), {} mean textures in {:.1}s -> {}",
        ds.frames.len(),
        full,
        ds.frames.len() - full,
        ds.mean_textures.len(),
        t.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn train(g: &Global, data: &Path, out: &Path, metrics: Option<&Path>, resume: Option<&Path>, iterations: Option<u64>) -> Result<()> {
    let mut cfg = match &g.config {
        Some(p) => TrainConfig::parse(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(m) = g.mode()? {
        cfg.mode = m;
    }
    if let Some(n) = iterations {
        cfg.iterations = n;
    }
    cfg.validate()?;
    let ds = load_dataset(data)?;
    if let Some(r) = g.res {
        if r != ds.config.res {
            bail!("--res {r} does not match the dataset resolution {}", ds.config.res);
        }
    }
    let mut trainer = match resume {
        Some(p) => Trainer::resume(cfg, &ds, &load_checkpoint(p)?)?,
        None => Trainer::new(cfg, &ds)?,
    };
    let start = trainer.iteration;
    let t = Instant::now();
    let last = trainer.run(Some(out), metrics)?;
    let probe = trainer.probe_metrics()?;
    println!(
        "train: mode {}, iterations {}..{} in {:.1}s, last loss {}, aborted steps {}, probe PSNR {:.3} dB, SSIM {:.4} -> {}",
        trainer.net.config.mode,
        start,
        trainer.iteration,
        t.elapsed().as_secs_f64(),
        last.map_or_else(|| "n/a".into(), |r| format!("{:.5}", r.loss)),
        trainer.aborted_steps,
        probe.psnr,
        probe.ssim,
        out.display()
    );
    Ok(())
}

fn find_frame(ds: &Dataset, identity: usize, name: &str) -> Result<usize> {
    ds.frames
        .iter()
        .position(|f| f.identity == identity && f.name == name)
        .ok_or_else(|| anyhow!("no frame {name:?} for identity {identity}"))
}

#[allow(clippy::too_many_arguments)]
fn render(
    checkpoint: Option<&Path>,
    data: &Path,
    identity: usize,
    frame: &str,
    lights: Option<&Path>,
    branch: Branch,
    out: &Path,
    exposure: f32,
) -> Result<()> {
    let ds = load_dataset(data)?;
    let fi = find_frame(&ds, identity, frame)?;
    let f = &ds.frames[fi];
    let lights = match lights {
        Some(p) => LightSet::read(p)?,
        None => f.lights.clone(),
    };
    let geo = PoseGeometry::new(&ds.rig, &ds.poses[f.pose], ds.config.res)?;
    let cam = &ds.cameras[f.camera];
    let vis = geo.visibility(&lights);
    let image = match branch {
        Branch::Oracle => {
            let ctx = geo.context(cam, lights, vis);
            let raster = geo.raster(&ds.rig, cam);
            linlight::synthdata::oracle_render::<f32>(&ds.identities[identity], &geo, &raster, &ctx)
        }
        Branch::Neural | Branch::Physical => {
            let path = checkpoint.ok_or_else(|| anyhow!("--checkpoint is required for the {branch:?} branch"))?;
            let net = load_net(path)?;
            let relighter = Relighter::new(&net, &ds.rig, &geo, cam, &ds.mean_textures[identity], &ds.poses[f.pose].to_vec())?;
            if branch == Branch::Neural {
                relighter.render(&lights, Some(vis))?
            } else {
                relighter.render_physical(&lights, vis)?
            }
        }
    };
    write_image(out, &image, exposure)?;
    println!("render: {} lights, {:?} branch -> {}", f.lights.len(), branch, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn relight(
    checkpoint: &Path,
    data: &Path,
    env: &Path,
    n: usize,
    identity: usize,
    pose: usize,
    camera: usize,
    pose_file: Option<&Path>,
    camera_file: Option<&Path>,
    verify: bool,
    out: &Path,
    exposure: f32,
) -> Result<()> {
    if n == 0 {
        bail!("--n must be positive");
    }
    let ds = load_dataset(data)?;
    if identity >= ds.identities.len() {
        bail!("identity {identity} out of range");
    }
    let net = load_net(checkpoint)?;
    let pose: Pose = match pose_file {
        Some(p) => parse_pose(&fs::read_to_string(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => ds.poses.get(pose).cloned().ok_or_else(|| anyhow!("pose {pose} out of range"))?,
    };
    let cam = match camera_file {
        Some(p) => parse_camera(&fs::read_to_string(p)?).map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => ds.cameras.get(camera).cloned().ok_or_else(|| anyhow!("camera {camera} out of range"))?,
    };
    let env = EnvironmentMap::from_tensor(&read_pfm(env)?)?;
    let geo = PoseGeometry::new(&ds.rig, &pose, ds.config.res)?;
    let relighter = Relighter::new(&net, &ds.rig, &geo, &cam, &ds.mean_textures[identity], &pose.to_vec())?;
    let t = Instant::now();
    let image = relight_env(&relighter, &env, n)?;
    let elapsed = t.elapsed().as_secs_f64();
    write_image(out, &image, exposure)?;
    let mut line = format!("relight-env: {n} lights in {elapsed:.2}s -> {}", out.display());
    if verify {
        let summed = relight_env_by_sum(&relighter, &env, n)?;
        let err = max_rel_diff(summed.data(), image.data());
        line.push_str(&format!(", sum-of-lights relative error {err:.3e}"));
        if !(err < 1e-4) {
            bail!("sum of {n} single-light renders differs from the environment render by {err:.3e}");
        }
    }
    println!("{line}");
    Ok(())
}

fn refine(data: &Path, identity: usize, checkpoint: Option<&Path>, iterations: Option<u64>, lr: Option<f64>, out: &Path, seed: Option<u64>) -> Result<()> {
    let ds = load_dataset(data)?;
    let td = TrainData::new(&ds)?;
    let mut cfg = RefineConfig::default();
    if let Some(n) = iterations {
        cfg.iterations = n;
    }
    if let Some(l) = lr {
        cfg.lr = l;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let init = match checkpoint {
        Some(p) => {
            let net = load_net(p)?;
            let f = ds
                .frames
                .iter()
                .find(|f| f.identity == identity)
                .ok_or_else(|| anyhow!("identity {identity} has no frames"))?;
            let g = linlight::tensor::Graph::new();
            let params = net.bind(&g, false);
            let pose = net.pose_input(&g, &ds.poses[f.pose].to_vec())?;
            let tex = g.constant(ds.mean_textures[identity].clone());
            Some((*net.geometry_forward(&params, tex, pose)?.raw_displacement.value()).clone())
        }
        None => None,
    };
    let t = Instant::now();
    let result = refine_identity(&td, identity, &cfg, init)?;
    fs::create_dir_all(out)?;
    write_pfm(&out.join("albedo.pfm"), &result.albedo)?;
    write_pfm(&out.join("roughness.pfm"), &result.roughness)?;
    write_pfm(&out.join("displacement.pfm"), &result.displacement)?;
    let mae = result.roughness_mae(&ds.identities[identity].roughness);
    println!(
        "refine: identity {identity}, {} iterations in {:.1}s, final loss {}, roughness MAE {mae:.4} -> {}",
        cfg.iterations,
        t.elapsed().as_secs_f64(),
        result.losses.last().map_or_else(|| "n/a".into(), |l| format!("{l:.5}")),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    checkpoint: Option<&Path>,
    data: &Path,
    split: &str,
    holdout_poses: Option<usize>,
    holdout_identities: Option<usize>,
    samples: Option<usize>,
    predict: Predict,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let split: Split = split.parse().map_err(|e: String| anyhow!(e))?;
    let ds = load_dataset(data)?;
    let ckpt = checkpoint.map(load_checkpoint).transpose()?;
    let header_count = |key: &str| -> Result<Option<usize>> {
        match ckpt.as_ref().and_then(|c| c.header_value(key)) {
            Some(v) => Ok(Some(v.parse().with_context(|| format!("checkpoint header {key}"))?)),
            None => Ok(None),
        }
    };
    let hp = match holdout_poses {
        Some(v) => v,
        None => header_count("train.holdout_poses")?.unwrap_or(1),
    };
    let hi = match holdout_identities {
        Some(v) => v,
        None => header_count("train.holdout_identities")?.unwrap_or(0),
    };
    let td = TrainData::new(&ds)?;
    let mut frames = td.split(split, hp, hi);
    if let Some(k) = samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        frames.shuffle(&mut rng);
        frames.truncate(k);
        frames.sort_unstable();
    }
    if frames.is_empty() {
        bail!("split {split} is empty");
    }
    let rows: Vec<EvalRow> = match predict {
        Predict::Neural => {
            let ckpt = ckpt.ok_or_else(|| anyhow!("--checkpoint is required to evaluate the network"))?;
            evaluate(&LinearNet::from_checkpoint(&ckpt)?, &td, &frames)?
        }
        Predict::GroundTruth => frames
            .iter()
            .map(|&fi| {
                let f = &ds.frames[fi];
                let mask = td.mask(fi);
                let gt = &ds.images[fi];
                let scene = td.scene(fi);
                let truth = scene
                    .raster
                    .render(&physical_texture::<f32>(&ds.identities[f.identity], &td.geometry[f.pose], &scene.ctx))?;
                Ok(EvalRow {
                    frame: fi,
                    name: f.name.clone(),
                    identity: f.identity,
                    pose: f.pose,
                    camera: f.camera,
                    kind: f.kind,
                    psnr: psnr(gt, gt, &mask),
                    ssim: ssim(gt, gt, &mask),
                    psnr_physical: psnr(gt, gt, &mask),
                    psnr_physical_true: psnr(&truth, gt, &mask),
                })
            })
            .collect::<Result<_>>()?,
    };
    write_eval_csv(out, &rows)?;
    let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    println!(
        "eval: split {split}, {} frames, PSNR {:.3} dB, SSIM {:.4}, physical PSNR {:.3} dB, true-material physical PSNR {:.3} dB -> {}",
        rows.len(),
        mean(|r| r.psnr),
        mean(|r| r.ssim),
        mean(|r| r.psnr_physical),
        mean(|r| r.psnr_physical_true),
        out.display()
    );
    Ok(())
}

fn bench(g: &Global, checkpoint: Option<&Path>, lights: usize, image_size: usize, repeats: usize, seed: u64) -> Result<()> {
    if lights == 0 || repeats == 0 {
        bail!("--lights and --repeats must be positive");
    }
    let rig = procedural_hand(&HandParams::default());
    let net = match checkpoint {
        Some(p) => load_net(p)?,
        None => {
            let mode = g.mode()?.unwrap_or_default();
            LinearNet::new(NetConfig::new(g.res.unwrap_or(128), mode, 3 * rig.n_joints()), seed)?
        }
    };
    let res = net.config.res;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = linlight::synthdata::random_pose(&rig, &mut rng, 0.6);
    let cam = camera_rig(1, image_size, &mut rng).remove(0);
    let geo = PoseGeometry::new(&rig, &pose, res)?;
    let mut tex = Tensor::<f32>::full(&[3, res, res], 0.5);
    tex.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = 0.3 + 0.4 * ((i % 97) as f32 / 97.0));
    let relighter = Relighter::new(&net, &rig, &geo, &cam, &tex, &pose.to_vec())?;
    let idx: Vec<usize> = (0..lights).collect();
    let set = rig_lights(&sphere_directions(lights), &idx, 1.0);
    relighter.render_timed(&set, None)?;
    let mut total = StageTimes::default();
    for _ in 0..repeats {
        let (_, t) = relighter.render_timed(&set, None)?;
        total.visibility_ms += t.visibility_ms;
        total.features_ms += t.features_ms;
        total.network_ms += t.network_ms;
        total.raster_ms += t.raster_ms;
    }
    let k = repeats as f64;
    println!("stage,ms");
    println!("visibility,{:.3}", total.visibility_ms / k);
    println!("features,{:.3}", total.features_ms / k);
    println!("network,{:.3}", total.network_ms / k);
    println!("rasterize,{:.3}", total.raster_ms / k);
    println!(
        "frame_without_visibility,{:.3}",
        (total.features_ms + total.network_ms + total.raster_ms) / k
    );
    eprintln!(
        "bench: R = {res}, {lights} lights, {image_size}x{image_size} image, {} threads, mode {}",
        rayon::current_num_threads(),
        net.config.mode
    );
    Ok(())
}

fn audit(checkpoint: &Path, trials: usize, seed: u64) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let report = audit_linear(&ckpt, trials, seed)?;
    println!(
        "audit-linear: bias tensors in lighting branch: {}",
        if report.bias_tensors.is_empty() { "none".to_string() } else { report.bias_tensors.join(", ") }
    );
    println!(
        "audit-linear: superposition probe over {trials} trials: max violation {:.3e} (tolerance {:.0e}), zero response {:.3e}",
        report.max_violation, report.tolerance, report.zero_response
    );
    if !report.passed() {
        bail!(
            "linearity audit failed: structural {}, probe {} (max violation {:.3e})",
            if report.structural_ok() { "ok" } else { "failed" },
            if report.probe_ok() { "ok" } else { "failed" },
            report.max_violation
        );
    }
    println!("audit-linear: PASS");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    setup_threads(&cli.global)?;
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    match &cli.command {
        Command::GenData { out } => gen_data(g, out),
        Command::Train {
            data,
            out,
            metrics,
            resume,
            iterations,
        } => train(g, data, out, metrics.as_deref(), resume.as_deref(), *iterations),
        Command::Render {
            checkpoint,
            data,
            identity,
            frame,
            lights,
            branch,
            out,
            exposure,
        } => render(checkpoint.as_deref(), data, *identity, frame, lights.as_deref(), *branch, out, *exposure),
        Command::RelightEnv {
            checkpoint,
            data,
            env,
            n,
            identity,
            pose,
            camera,
            pose_file,
            camera_file,
            verify,
            out,
            exposure,
        } => relight(
            checkpoint,
            data,
            env,
            *n,
            *identity,
            *pose,
            *camera,
            pose_file.as_deref(),
            camera_file.as_deref(),
            *verify,
            out,
            *exposure,
        ),
        Command::Refine {
            data,
            identity,
            checkpoint,
            iterations,
            lr,
            out,
        } => refine(data, *identity, checkpoint.as_deref(), *iterations, *lr, out, g.seed),
        Command::Eval {
            checkpoint,
            data,
            split,
            holdout_poses,
            holdout_identities,
            samples,
            predict,
            out,
        } => eval(
            checkpoint.as_deref(),
            data,
            split,
            *holdout_poses,
            *holdout_identities,
            *samples,
            *predict,
            out,
            seed,
        ),
        Command::Bench {
            checkpoint,
            lights,
            image_size,
            repeats,
        } => bench(g, checkpoint.as_deref(), *lights, *image_size, *repeats, seed),
        Command::AuditLinear { checkpoint, trials } => audit(checkpoint, *trials, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: command={name} message={msg:?}");
            ExitCode::FAILURE
        }
    }
}
