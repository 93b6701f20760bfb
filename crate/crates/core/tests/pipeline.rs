use std::f64::consts::PI;

use linlight::geometry::{procedural_hand, HandParams, HandRig, Pose};
use linlight::linearnet::{LinearMode, LinearNet, NetConfig};
use linlight::math::V3;
use linlight::pipeline::{relight_env, relight_env_by_sum, PoseGeometry, Relighter};
use linlight::shading::{EnvironmentMap, Light, LightSet};
use linlight::synthdata::camera_rig;
use linlight::tensor::{max_rel_diff, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Scene {
    rig: HandRig,
    geo: PoseGeometry,
    pose: Vec<f32>,
}

fn scene() -> Scene {
    let rig = procedural_hand(&HandParams::default());
    let mut pose = Pose::rest(rig.n_joints());
    pose.angles[10] = [0.4, 0.0, 0.0];
    let geo = PoseGeometry::new(&rig, &pose, 16).unwrap();
    Scene {
        rig,
        geo,
        pose: pose.to_vec(),
    }
}

fn texture(rng: &mut impl Rng) -> Tensor<f32> {
    Tensor::from_vec(&[3, 16, 16], (0..768).map(|_| rng.gen_range(0.2..0.8)).collect()).unwrap()
}

fn textured_env(w: usize, h: usize, rng: &mut impl Rng) -> EnvironmentMap {
    let mut env = EnvironmentMap::uniform(w, h, [0.0; 3]);
    for (i, px) in env.radiance.iter_mut().enumerate() {
        let bright = if i % 7 == 0 { 4.0 } else { 0.3 };
        *px = [bright * rng.gen_range(0.5..1.0), bright * rng.gen_range(0.5..1.0), bright * rng.gen_range(0.5..1.0)];
    }
    env
}

#[test]
fn env_relight_equals_sum_of_single_light_renders() {
    let s = scene();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cam = camera_rig(1, 32, &mut rng).remove(0);
    let tex = texture(&mut rng);
    let env = textured_env(64, 32, &mut rng);
    for mode in [LinearMode::Linear, LinearMode::MlpLinear] {
        let net = LinearNet::<f32>::new(NetConfig::new(16, mode, s.pose.len()), 3).unwrap();
        let relighter = Relighter::new(&net, &s.rig, &s.geo, &cam, &tex, &s.pose).unwrap();
        let once = relight_env(&relighter, &env, 256).unwrap();
        let summed = relight_env_by_sum(&relighter, &env, 256).unwrap();
        assert!(once.max_abs() > 0.0);
        let err = max_rel_diff(summed.data(), once.data());
        assert!(err < 1e-4, "{mode}: {err}");
    }
}

#[test]
fn one_pixel_environment_is_one_directional_light() {
    let s = scene();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cam = camera_rig(1, 32, &mut rng).remove(0);
    let tex = texture(&mut rng);
    let net = LinearNet::<f32>::new(NetConfig::new(16, LinearMode::Linear, s.pose.len()), 4).unwrap();
    let relighter = Relighter::new(&net, &s.rig, &s.geo, &cam, &tex, &s.pose).unwrap();
    let env = EnvironmentMap::uniform(1, 1, [0.2, 0.3, 0.4]);
    let from_env = relight_env(&relighter, &env, 1).unwrap();
    let light = LightSet::new(vec![Light {
        dir: V3::new(-1.0, 0.0, 0.0),
        rgb: [0.2, 0.3, 0.4].map(|v| v * 4.0 * PI),
    }]);
    let direct = relighter.render(&light, None).unwrap();
    assert!(max_rel_diff(from_env.data(), direct.data()) < 1e-5);
}

#[test]
fn black_environment_renders_black() {
    let s = scene();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cam = camera_rig(1, 32, &mut rng).remove(0);
    let tex = texture(&mut rng);
    let net = LinearNet::<f32>::new(NetConfig::new(16, LinearMode::Linear, s.pose.len()), 5).unwrap();
    let relighter = Relighter::new(&net, &s.rig, &s.geo, &cam, &tex, &s.pose).unwrap();
    let img = relight_env(&relighter, &EnvironmentMap::uniform(16, 8, [0.0; 3]), 64).unwrap();
    assert!(img.data().iter().all(|&v| v == 0.0));
    assert!(relighter.raster().coverage_count() > 0);
}

#[test]
fn stage_timings_are_reported() {
    let s = scene();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cam = camera_rig(1, 32, &mut rng).remove(0);
    let tex = texture(&mut rng);
    let net = LinearNet::<f32>::new(NetConfig::new(16, LinearMode::Linear, s.pose.len()), 6).unwrap();
    let relighter = Relighter::new(&net, &s.rig, &s.geo, &cam, &tex, &s.pose).unwrap();
    let lights = LightSet::new(vec![Light {
        dir: V3::new(0.0, 0.0, 1.0),
        rgb: [1.0; 3],
    }]);
    let (img, t) = relighter.render_timed(&lights, None).unwrap();
    assert_eq!(img.shape(), [3, 32, 32]);
    assert!(t.features_ms >= 0.0 && t.network_ms > 0.0 && t.raster_ms >= 0.0);
    let phys = relighter.render_physical(&lights, relighter.visibility(&lights)).unwrap();
    assert_eq!(phys.shape(), [3, 32, 32]);
}
