mod common;

use std::rc::Rc;

use common::{gradcheck, rng};
use linlight::geometry::{procedural_hand, skin, unwrap, Bvh, HandParams, Pose};
use linlight::math::V3;
use linlight::shading::{
    env_to_lights, ggx_d, shade_features, sphere_directions, EnvironmentMap, Light, LightSet, ShadingContext, Visibility,
};
use linlight::tensor::Tensor;
use rand::Rng;

fn random_lights(n: usize, r: &mut impl Rng) -> LightSet {
    LightSet::new(
        (0..n)
            .map(|_| Light {
                dir: V3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)).normalized(),
                rgb: [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)],
            })
            .collect(),
    )
}

fn hand_context(lights: LightSet) -> (ShadingContext, Vec<V3>) {
    let rig = procedural_hand(&HandParams::default());
    let mut pose = Pose::rest(rig.n_joints());
    pose.angles[4] = [0.6, 0.0, 0.0];
    let posed = skin(&rig, &pose).unwrap();
    let maps = unwrap(&rig, &posed, 32);
    let bvh = Bvh::new(&posed, &rig.faces);
    let vis = Visibility::compute(&maps, &bvh, &lights);
    let ctx = ShadingContext::new(&maps, Some(V3::new(80.0, 150.0, 350.0)), lights, vis);
    (ctx, maps.normal)
}

#[test]
fn shade_gradients_match_finite_differences() {
    let mut r = rng(21);
    let lights = random_lights(6, &mut r);
    let res = 6;
    let n = res * res;
    let view: Vec<V3> = (0..n).map(|_| V3::new(r.gen_range(-0.5..0.5), r.gen_range(-0.5..0.5), 1.0).normalized()).collect();
    let ctx = Rc::new(ShadingContext {
        res,
        mask: (0..n).map(|t| t % 7 != 3).collect(),
        view,
        visibility: Visibility::all_visible(n, lights.len()),
        lights,
    });
    let mut normals = vec![0.0; 3 * n];
    for t in 0..n {
        let v = V3::new(r.gen_range(-0.6..0.6), r.gen_range(-0.6..0.6), 1.0).normalized();
        normals[t] = v.x;
        normals[n + t] = v.y;
        normals[2 * n + t] = v.z;
    }
    let normals = Tensor::from_vec(&[3, res, res], normals).unwrap();
    let beta = Tensor::from_vec(&[1, res, res], (0..n).map(|_| r.gen_range(0.15..0.95)).collect()).unwrap();
    let w = Tensor::from_vec(&[6, res, res], (0..6 * n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let err = gradcheck(&[normals, beta, w], 1e-5, 1e-6, |_, v| {
        shade_features(&ctx, v[0], v[1]).unwrap().mul(v[2]).unwrap().sum()
    });
    assert!(err < 1e-3, "{err}");
}

#[test]
fn features_are_linear_in_lights() {
    let mut r = rng(22);
    let l1 = random_lights(5, &mut r);
    let l2 = random_lights(7, &mut r);
    let (a, b) = (0.7, 2.3);
    let mixed = l1.scaled(a).union(&l2.scaled(b));
    let (ctx1, normals) = hand_context(l1);
    let (ctx2, _) = hand_context(l2);
    let (ctxm, _) = hand_context(mixed);
    let beta = vec![0.4; normals.len()];
    let (f1, f2, fm) = (ctx1.features(&normals, &beta), ctx2.features(&normals, &beta), ctxm.features(&normals, &beta));
    let mut worst = 0.0f64;
    for t in 0..normals.len() {
        for k in 0..3 {
            for (x, y, z) in [
                (f1.diffuse[t][k], f2.diffuse[t][k], fm.diffuse[t][k]),
                (f1.specular[t][k], f2.specular[t][k], fm.specular[t][k]),
            ] {
                let expect = a * x + b * y;
                worst = worst.max((z - expect).abs() / expect.abs().max(1e-12));
            }
        }
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn features_nonnegative_and_masked() {
    let mut r = rng(23);
    let (ctx, normals) = hand_context(random_lights(12, &mut r));
    let f = ctx.features(&normals, &vec![0.3; normals.len()]);
    let mut lit = 0;
    for t in 0..normals.len() {
        let all = f.diffuse[t].iter().chain(&f.specular[t]);
        if !ctx.mask[t] {
            assert!(all.clone().all(|&v| v == 0.0));
        }
        assert!(all.clone().all(|&v| v >= 0.0));
        lit += usize::from(f.diffuse[t][0] > 0.0);
    }
    assert!(lit > 50);
}

#[test]
fn ggx_lobe_is_normalized() {
    // ∫ D(h·n) (h·n) dω_h = 2π ∫₀¹ D(μ) μ dμ, sampled stratified in t with μ = 1 − t⁴
    // so the peak at μ = 1 is resolved for small β.
    let mut r = rng(24);
    let samples = 200_000;
    for beta in [0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0] {
        let mut acc = 0.0;
        for i in 0..samples {
            let t = (i as f64 + r.gen::<f64>()) / samples as f64;
            let mu = 1.0 - t.powi(4);
            let jac = 4.0 * t.powi(3);
            acc += ggx_d(mu, beta) * mu * jac;
        }
        let integral = std::f64::consts::TAU * acc / samples as f64;
        assert!((integral - 1.0).abs() < 0.05, "β={beta}: {integral}");
    }
}

fn specular_total(ctx: &ShadingContext, normals: &[V3], beta: f64) -> f64 {
    let f = ctx.features(normals, &vec![beta; normals.len()]);
    f.specular.iter().map(|s| s[0] + s[1] + s[2]).sum()
}

#[test]
fn specular_is_continuous_in_roughness() {
    let mut r = rng(25);
    let (ctx, normals) = hand_context(random_lights(10, &mut r));
    for b in [0.05, 0.1, 0.3, 0.6, 0.9, 0.9999, 1.0] {
        let (a, c) = (specular_total(&ctx, &normals, b), specular_total(&ctx, &normals, b + 1e-4));
        assert!((a - c).abs() <= 1e-2 * a.abs(), "β={b}: {a} vs {c}");
    }
}

#[test]
fn roughness_clamp_has_no_jump() {
    let mut r = rng(26);
    let (ctx, normals) = hand_context(random_lights(10, &mut r));
    let at = specular_total(&ctx, &normals, 0.02);
    assert_eq!(specular_total(&ctx, &normals, 0.015), at);
    assert_eq!(specular_total(&ctx, &normals, 1.5), specular_total(&ctx, &normals, 1.0));
    // Above the lower clamp the response is differentiable: the change shrinks with the step.
    let d1 = (specular_total(&ctx, &normals, 0.02 + 1e-4) - at).abs();
    let d2 = (specular_total(&ctx, &normals, 0.02 + 1e-5) - at).abs();
    assert!(d1 > 0.0 && (d1 / d2 - 10.0).abs() < 1.0, "{d1} {d2}");
    assert!(d2 < 1e-2 * at);
}

#[test]
fn uniform_env_irradiance_on_up_facing_texel() {
    let env = EnvironmentMap::uniform(512, 256, [1.0; 3]);
    for n in [256, 512] {
        let lights = env_to_lights(&env, n);
        let up = V3::new(0.0, 1.0, 0.0);
        let e: f64 = lights.lights.iter().map(|l| l.rgb[0] * l.dir.dot(up).max(0.0)).sum();
        assert!((e / std::f64::consts::PI - 1.0).abs() < 0.02, "n={n}: {e}");
    }
}

#[test]
fn fibonacci_light_rig_covers_sphere() {
    let dirs = sphere_directions(350);
    assert!(dirs.iter().any(|d| d.y > 0.99) && dirs.iter().any(|d| d.y < -0.99));
}
