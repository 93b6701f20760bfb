use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{camera_rig, oracle_render, random_pose, IdentityParams, SynthError, SyntheticIdentity};
use crate::config::{format_optional, parse_optional, parse_pairs, parse_value, ConfigError};
use crate::geometry::{procedural_hand, read_rig, write_rig, Camera, HandParams, HandRig, Pose, RasterLookup};
use crate::image_io::{read_pfm, write_pfm};
use crate::math::{Mat3, Rigid, V3};
use crate::pipeline::PoseGeometry;
use crate::shading::{sphere_directions, Light, LightSet};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub res: usize,
    pub image_size: usize,
    pub identities: usize,
    pub poses: usize,
    pub cameras: usize,
    /// Directions of the virtual light rig.
    pub rig_lights: usize,
    pub group_size: usize,
    /// Summed intensity of a fully lit frame.
    pub full_intensity: f64,
    /// Intensity of each light of a group.
    pub group_intensity: f64,
    pub flex: f64,
    pub identity: IdentityParams,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            res: 128,
            image_size: 128,
            identities: 4,
            poses: 8,
            cameras: 2,
            rig_lights: 350,
            group_size: 5,
            full_intensity: 4.0,
            group_intensity: 0.3,
            flex: 0.9,
            identity: IdentityParams::default(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "res" => self.res = parse_value(key, value)?,
            "image_size" => self.image_size = parse_value(key, value)?,
            "identities" => self.identities = parse_value(key, value)?,
            "poses" => self.poses = parse_value(key, value)?,
            "cameras" => self.cameras = parse_value(key, value)?,
            "rig_lights" => self.rig_lights = parse_value(key, value)?,
            "group_size" => self.group_size = parse_value(key, value)?,
            "full_intensity" => self.full_intensity = parse_value(key, value)?,
            "group_intensity" => self.group_intensity = parse_value(key, value)?,
            "flex" => self.flex = parse_value(key, value)?,
            "roughness" => self.identity.roughness = parse_optional(key, value)?,
            "displacement_amp" => self.identity.displacement_amp = parse_value(key, value)?,
            "subsurface" => self.identity.subsurface = parse_optional(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
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
        let positive = [
            ("res", self.res),
            ("image_size", self.image_size),
            ("identities", self.identities),
            ("poses", self.poses),
            ("cameras", self.cameras),
            ("rig_lights", self.rig_lights),
            ("group_size", self.group_size),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid {
                    key: key.into(),
                    msg: "must be positive".into(),
                });
            }
        }
        if self.group_size > self.rig_lights {
            return Err(ConfigError::Invalid {
                key: "group_size".into(),
                msg: format!("exceeds rig_lights = {}", self.rig_lights),
            });
        }
        if let Some(s) = self.identity.subsurface {
            if !(0.0..=super::SUBSURFACE_MAX).contains(&s) {
                return Err(ConfigError::Invalid {
                    key: "subsurface".into(),
                    msg: format!("{s} outside [0, {}]", super::SUBSURFACE_MAX),
                });
            }
        }
        if let Some(b) = self.identity.roughness {
            let (lo, hi) = super::ROUGHNESS_RANGE;
            if !(lo..=hi).contains(&b) {
                return Err(ConfigError::Invalid {
                    key: "roughness".into(),
                    msg: format!("{b} outside [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "res = {}\nimage_size = {}\nidentities = {}\nposes = {}\ncameras = {}\nrig_lights = {}\ngroup_size = {}\n\
             full_intensity = {}\ngroup_intensity = {}\nflex = {}\nroughness = {}\ndisplacement_amp = {}\n\
             subsurface = {}\nseed = {}\n",
            self.res,
            self.image_size,
            self.identities,
            self.poses,
            self.cameras,
            self.rig_lights,
            self.group_size,
            self.full_intensity,
            self.group_intensity,
            self.flex,
            format_optional(&self.identity.roughness),
            self.identity.displacement_amp,
            format_optional(&self.identity.subsurface),
            self.seed
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    /// Every rig light at `full_intensity / rig_lights`.
    Full,
    /// `group_size` distinct rig lights at `group_intensity`.
    Group,
}

impl FrameKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Group => "group",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub name: String,
    pub identity: usize,
    pub pose: usize,
    pub camera: usize,
    pub kind: FrameKind,
    /// Indices into the light rig.
    pub light_indices: Vec<usize>,
    pub lights: LightSet,
}

/// A generated (or loaded) dataset held in memory.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub rig: HandRig,
    pub identities: Vec<SyntheticIdentity>,
    pub poses: Vec<Pose>,
    pub cameras: Vec<Camera>,
    pub light_dirs: Vec<V3>,
    pub frames: Vec<FrameRecord>,
    /// `[3, H, W]`, parallel to `frames`.
    pub images: Vec<Tensor<f32>>,
    /// `[3, R, R]` per identity.
    pub mean_textures: Vec<Tensor<f32>>,
}

/// Lights of the rig at the given indices, each at `intensity`.
pub fn rig_lights(dirs: &[V3], indices: &[usize], intensity: f64) -> LightSet {
    LightSet::new(
        indices
            .iter()
            .map(|&i| Light {
                dir: dirs[i],
                rgb: [intensity; 3],
            })
            .collect(),
    )
}

/// Observed colour per texel, by projecting each valid texel into the
/// camera, rejecting back-facing and depth-occluded texels, and reading
/// the nearest pixel.
pub fn unwrap_image(geo: &PoseGeometry, cam: &Camera, raster: &RasterLookup, image: &Tensor<f32>) -> Vec<Option<[f64; 3]>> {
    const DEPTH_TOLERANCE_MM: f64 = 3.0;
    let (w, h) = (cam.width, cam.height);
    let plane = w * h;
    let eye = cam.center();
    let data = image.data();
    (0..geo.maps.len())
        .map(|t| {
            if !geo.maps.mask[t] {
                return None;
            }
            let p = geo.maps.position[t];
            if geo.maps.normal[t].dot(eye - p) <= 0.0 {
                return None;
            }
            let (x, y, z) = cam.project(p)?;
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                return None;
            }
            let pix = y as usize * w + x as usize;
            if !raster.covered(pix) || (raster.depth[pix] - z).abs() > DEPTH_TOLERANCE_MM {
                return None;
            }
            Some(std::array::from_fn(|c| data[c * plane + pix] as f64))
        })
        .collect()
}

/// Average of the observations; unobserved valid texels take the mean of
/// all observed texels, invalid texels are zero.
fn average_texture(sums: &[[f64; 3]], counts: &[u32], mask: &[bool], res: usize) -> Tensor<f32> {
    let observed: Vec<[f64; 3]> = sums
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s.map(|v| v / c as f64))
        .collect();
    let fill: [f64; 3] = if observed.is_empty() {
        [0.0; 3]
    } else {
        std::array::from_fn(|k| observed.iter().map(|o| o[k]).sum::<f64>() / observed.len() as f64)
    };
    let n = res * res;
    let mut data = vec![0.0f32; 3 * n];
    for t in 0..n {
        if !mask[t] {
            continue;
        }
        let v = if counts[t] > 0 { sums[t].map(|s| s / counts[t] as f64) } else { fill };
        for c in 0..3 {
            data[c * n + t] = v[c] as f32;
        }
    }
    Tensor::from_vec(&[3, res, res], data).expect("shape")
}

/// Renders every (identity, pose, camera) as one fully lit frame followed
/// by one grouped-light frame, and derives each identity's mean texture
/// from its fully lit frames.
pub fn make_dataset(cfg: &DatasetConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let rig = procedural_hand(&HandParams::default());
    let mut pose_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(4).wrapping_add(1));
    let mut cam_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(4).wrapping_add(2));
    let mut group_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(4).wrapping_add(3));
    let poses: Vec<Pose> = (0..cfg.poses).map(|_| random_pose(&rig, &mut pose_rng, cfg.flex)).collect();
    let cameras = camera_rig(cfg.cameras, cfg.image_size, &mut cam_rng);
    let identities: Vec<SyntheticIdentity> = (0..cfg.identities)
        .map(|i| {
            let seed = cfg.seed.wrapping_mul(1000).wrapping_add(100 + i as u64);
            SyntheticIdentity::generate(format!("id{i:02}"), cfg.res, &cfg.identity, seed)
        })
        .collect();
    let light_dirs = sphere_directions(cfg.rig_lights);
    let all: Vec<usize> = (0..cfg.rig_lights).collect();
    let full_lights = rig_lights(&light_dirs, &all, cfg.full_intensity / cfg.rig_lights as f64);

    let n = cfg.res * cfg.res;
    let mut sums = vec![vec![[0.0f64; 3]; n]; cfg.identities];
    let mut counts = vec![vec![0u32; n]; cfg.identities];
    let mut mask = vec![false; n];
    let mut frames = Vec::new();
    let mut images = Vec::new();
    for (pi, pose) in poses.iter().enumerate() {
        let geo = PoseGeometry::new(&rig, pose, cfg.res)?;
        for (m, &v) in mask.iter_mut().zip(&geo.maps.mask) {
            *m |= v;
        }
        let vis_full = geo.visibility(&full_lights);
        log::info!("pose {pi}: visibility for {} lights", full_lights.len());
        for (ci, cam) in cameras.iter().enumerate() {
            let raster = geo.raster(&rig, cam);
            for (ii, identity) in identities.iter().enumerate() {
                let ctx = geo.context(cam, full_lights.clone(), vis_full.clone());
                let img = oracle_render::<f32>(identity, &geo, &raster, &ctx);
                for (t, obs) in unwrap_image(&geo, cam, &raster, &img).into_iter().enumerate() {
                    if let Some(c) = obs {
                        for k in 0..3 {
                            sums[ii][t][k] += c[k];
                        }
                        counts[ii][t] += 1;
                    }
                }
                frames.push(FrameRecord {
                    name: format!("p{pi:03}_c{ci:02}_full"),
                    identity: ii,
                    pose: pi,
                    camera: ci,
                    kind: FrameKind::Full,
                    light_indices: all.clone(),
                    lights: full_lights.clone(),
                });
                images.push(img);

                let mut group = sample(&mut group_rng, cfg.rig_lights, cfg.group_size).into_vec();
                group.sort_unstable();
                let lights = rig_lights(&light_dirs, &group, cfg.group_intensity);
                let ctx = geo.context(cam, lights.clone(), vis_full.select(&group));
                images.push(oracle_render::<f32>(identity, &geo, &raster, &ctx));
                frames.push(FrameRecord {
                    name: format!("p{pi:03}_c{ci:02}_group"),
                    identity: ii,
                    pose: pi,
                    camera: ci,
                    kind: FrameKind::Group,
                    light_indices: group,
                    lights,
                });
            }
        }
    }
    let mean_textures = (0..cfg.identities)
        .map(|i| average_texture(&sums[i], &counts[i], &mask, cfg.res))
        .collect();
    Ok(Dataset {
        config: cfg.clone(),
        rig,
        identities,
        poses,
        cameras,
        light_dirs,
        frames,
        images,
        mean_textures,
    })
}

fn rigid_to_text(r: &Rigid) -> String {
    let m = r.rot.0;
    let mut parts: Vec<String> = m.iter().flatten().map(|v| format!("{v:?}")).collect();
    parts.extend([r.trans.x, r.trans.y, r.trans.z].iter().map(|v| format!("{v:?}")));
    parts.join(" ")
}

fn parse_rigid(fields: &[&str]) -> Option<Rigid> {
    if fields.len() != 12 {
        return None;
    }
    let v: Vec<f64> = fields.iter().map(|s| s.parse().ok()).collect::<Option<_>>()?;
    let rot = Mat3([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]);
    Some(Rigid::new(rot, V3::new(v[9], v[10], v[11])))
}

/// One `joint a b c` line per joint, then `global <3x3 row-major> <t>`.
pub fn pose_to_text(pose: &Pose) -> String {
    let mut s = String::new();
    for a in &pose.angles {
        s.push_str(&format!("joint {:?} {:?} {:?}\n", a[0], a[1], a[2]));
    }
    s.push_str(&format!("global {}\n", rigid_to_text(&pose.global)));
    s
}

pub fn parse_pose(text: &str) -> Result<Pose, String> {
    let mut angles = Vec::new();
    let mut global = Rigid::IDENTITY;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f[0] {
            "joint" if f.len() == 4 => {
                let a: Option<Vec<f64>> = f[1..].iter().map(|s| s.parse().ok()).collect();
                let a = a.ok_or_else(|| format!("line {}: bad angles", i + 1))?;
                angles.push([a[0], a[1], a[2]]);
            }
            "global" => global = parse_rigid(&f[1..]).ok_or_else(|| format!("line {}: bad global transform", i + 1))?,
            _ => return Err(format!("line {}: unexpected {line:?}", i + 1)),
        }
    }
    if angles.is_empty() {
        return Err("no joints".into());
    }
    Ok(Pose { angles, global })
}

/// `intrinsics focal cx cy width height` and `world_to_cam <3x3> <t>`.
pub fn camera_to_text(cam: &Camera) -> String {
    format!(
        "intrinsics {:?} {:?} {:?} {} {}\nworld_to_cam {}\n",
        cam.focal,
        cam.cx,
        cam.cy,
        cam.width,
        cam.height,
        rigid_to_text(&cam.world_to_cam)
    )
}

pub fn parse_camera(text: &str) -> Result<Camera, String> {
    let mut intr = None;
    let mut ext = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f[0] {
            "intrinsics" if f.len() == 6 => {
                let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number {s:?}"));
                let size = |s: &str| s.parse::<usize>().map_err(|_| format!("bad size {s:?}"));
                intr = Some((num(f[1])?, num(f[2])?, num(f[3])?, size(f[4])?, size(f[5])?));
            }
            "world_to_cam" => ext = Some(parse_rigid(&f[1..]).ok_or("bad world_to_cam")?),
            _ => return Err(format!("unexpected {line:?}")),
        }
    }
    let (focal, cx, cy, width, height) = intr.ok_or("missing intrinsics")?;
    let cam = Camera {
        focal,
        cx,
        cy,
        width,
        height,
        world_to_cam: ext.ok_or("missing world_to_cam")?,
    };
    cam.validate()?;
    Ok(cam)
}

fn scalar_map(values: &[f64], res: usize) -> Tensor<f32> {
    Tensor::from_vec(&[1, res, res], values.iter().map(|&v| v as f32).collect()).expect("shape")
}

const MANIFEST_COLUMNS: [&str; 7] = ["identity", "frame", "pose", "camera", "kind", "lights", "image"];

fn format_err(path: &Path, msg: impl Into<String>) -> SynthError {
    SynthError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String, SynthError> {
    fs::read_to_string(path).map_err(|e| format_err(path, e.to_string()))
}

impl Dataset {
    pub fn frame_lights(&self, frame: usize) -> &LightSet {
        &self.frames[frame].lights
    }

    /// Indices of frames matching `pred`.
    pub fn select(&self, pred: impl Fn(&FrameRecord) -> bool) -> Vec<usize> {
        (0..self.frames.len()).filter(|&i| pred(&self.frames[i])).collect()
    }

    /// Writes `<dir>/dataset.txt`, the rig, a manifest CSV, and per identity
    /// its ground-truth maps, mean texture and frames (image, lights, pose,
    /// camera).
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("dataset.txt"), self.config.to_text())?;
        write_rig(&self.rig, dir, "rig")?;
        for (identity, mean) in self.identities.iter().zip(&self.mean_textures) {
            let idir = dir.join(&identity.name);
            fs::create_dir_all(&idir)?;
            write_pfm(&idir.join("albedo.pfm"), &identity.albedo_tensor())?;
            write_pfm(&idir.join("roughness.pfm"), &scalar_map(&identity.roughness, identity.res))?;
            write_pfm(&idir.join("displacement.pfm"), &scalar_map(&identity.displacement, identity.res))?;
            write_pfm(&idir.join("mean_texture.pfm"), mean)?;
            fs::write(
                idir.join("identity.txt"),
                format!("name = {}\nsubsurface = {:?}\n", identity.name, identity.subsurface),
            )?;
        }
        let mut manifest = csv::Writer::from_path(dir.join("manifest.csv"))?;
        manifest.write_record(MANIFEST_COLUMNS)?;
        for (frame, image) in self.frames.iter().zip(&self.images) {
            let identity = &self.identities[frame.identity].name;
            let stem = dir.join(identity).join(&frame.name);
            let with_ext = |ext: &str| PathBuf::from(format!("{}{ext}", stem.display()));
            write_pfm(&with_ext(".pfm"), image)?;
            frame.lights.write(&with_ext(".lights.txt"))?;
            fs::write(with_ext(".pose.txt"), pose_to_text(&self.poses[frame.pose]))?;
            fs::write(with_ext(".cam.txt"), camera_to_text(&self.cameras[frame.camera]))?;
            let lights = match frame.kind {
                FrameKind::Full => "all".to_string(),
                FrameKind::Group => frame.light_indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";"),
            };
            manifest.write_record([
                identity.as_str(),
                frame.name.as_str(),
                &frame.pose.to_string(),
                &frame.camera.to_string(),
                frame.kind.as_str(),
                &lights,
                &format!("{identity}/{}.pfm", frame.name),
            ])?;
        }
        manifest.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SynthError> {
        let config = DatasetConfig::parse(&read_text(&dir.join("dataset.txt"))?)?;
        let rig = read_rig(&read_text(&dir.join("rig.obj"))?, &read_text(&dir.join("rig.rig"))?)?;
        let res = config.res;
        let mut identities = Vec::with_capacity(config.identities);
        let mut mean_textures = Vec::with_capacity(config.identities);
        for i in 0..config.identities {
            let name = format!("id{i:02}");
            let idir = dir.join(&name);
            let map = |file: &str, channels: usize| -> Result<Tensor<f32>, SynthError> {
                let path = idir.join(file);
                let t = read_pfm(&path)?;
                if t.shape() != [channels, res, res] {
                    return Err(format_err(&path, format!("shape {:?}, expected [{channels}, {res}, {res}]", t.shape())));
                }
                Ok(t)
            };
            let albedo = map("albedo.pfm", 3)?;
            let n = res * res;
            let a = albedo.data();
            let info_path = idir.join("identity.txt");
            let info = parse_pairs(&read_text(&info_path)?)?;
            let subsurface = info
                .iter()
                .find(|(k, _)| k == "subsurface")
                .ok_or_else(|| format_err(&info_path, "missing subsurface"))
                .and_then(|(k, v)| Ok(parse_value::<f64>(k, v)?))?;
            identities.push(SyntheticIdentity {
                name,
                res,
                albedo: (0..n).map(|t| std::array::from_fn(|c| a[c * n + t] as f64)).collect(),
                roughness: map("roughness.pfm", 1)?.data().iter().map(|&v| v as f64).collect(),
                displacement: map("displacement.pfm", 1)?.data().iter().map(|&v| v as f64).collect(),
                subsurface,
            });
            mean_textures.push(map("mean_texture.pfm", 3)?);
        }

        let light_dirs = sphere_directions(config.rig_lights);
        let mut poses: Vec<Option<Pose>> = vec![None; config.poses];
        let mut cameras: Vec<Option<Camera>> = vec![None; config.cameras];
        let mut frames = Vec::new();
        let mut images = Vec::new();
        let manifest_path = dir.join("manifest.csv");
        let mut reader = csv::Reader::from_path(&manifest_path)?;
        for row in reader.records() {
            let row = row?;
            let bad = |msg: String| format_err(&manifest_path, msg);
            let field = |i: usize| row.get(i).ok_or_else(|| bad(format!("row has no column {}", MANIFEST_COLUMNS[i])));
            let identity = identities
                .iter()
                .position(|id| id.name == field(0).unwrap_or_default())
                .ok_or_else(|| bad(format!("unknown identity {:?}", field(0).unwrap_or_default())))?;
            let name = field(1)?.to_string();
            let pose: usize = field(2)?.parse().map_err(|_| bad(format!("{name}: bad pose index")))?;
            let camera: usize = field(3)?.parse().map_err(|_| bad(format!("{name}: bad camera index")))?;
            if pose >= config.poses || camera >= config.cameras {
                return Err(bad(format!("{name}: pose/camera index out of range")));
            }
            let kind = match field(4)? {
                "full" => FrameKind::Full,
                "group" => FrameKind::Group,
                other => return Err(bad(format!("{name}: unknown kind {other:?}"))),
            };
            let light_indices: Vec<usize> = match field(5)? {
                "all" => (0..config.rig_lights).collect(),
                list => list
                    .split(';')
                    .map(|s| s.parse().map_err(|_| bad(format!("{name}: bad light index {s:?}"))))
                    .collect::<Result<_, _>>()?,
            };
            let stem = dir.join(&identities[identity].name).join(&name);
            let with_ext = |ext: &str| PathBuf::from(format!("{}{ext}", stem.display()));
            let pose_path = with_ext(".pose.txt");
            let p = parse_pose(&read_text(&pose_path)?).map_err(|m| format_err(&pose_path, m))?;
            poses[pose].get_or_insert(p);
            let cam_path = with_ext(".cam.txt");
            let c = parse_camera(&read_text(&cam_path)?).map_err(|m| format_err(&cam_path, m))?;
            cameras[camera].get_or_insert(c);
            let lights = LightSet::read(&with_ext(".lights.txt"))?;
            images.push(read_pfm(&dir.join(field(6)?))?);
            frames.push(FrameRecord {
                name,
                identity,
                pose,
                camera,
                kind,
                light_indices,
                lights,
            });
        }
        let poses = poses
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| format_err(&manifest_path, format!("no frame uses pose {i}"))))
            .collect::<Result<_, _>>()?;
        let cameras = cameras
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.ok_or_else(|| format_err(&manifest_path, format!("no frame uses camera {i}"))))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            config,
            rig,
            identities,
            poses,
            cameras,
            light_dirs,
            frames,
            images,
            mean_textures,
        })
    }
}
