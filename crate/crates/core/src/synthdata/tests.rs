use super::*;
use crate::shading::{Light, LightSet, Visibility};

#[test]
fn identity_fields_respect_bounds_and_seed() {
    let p = IdentityParams::default();
    let a = SyntheticIdentity::generate("a", 32, &p, 7);
    assert_eq!(a, SyntheticIdentity::generate("a", 32, &p, 7));
    assert_ne!(a.albedo, SyntheticIdentity::generate("a", 32, &p, 8).albedo);
    assert!(a.roughness.iter().all(|&b| (0.05..=0.9).contains(&b)));
    assert!(a.displacement.iter().all(|d| d.abs() < MAX_DISPLACEMENT_MM));
    assert!((0.0..=SUBSURFACE_MAX).contains(&a.subsurface));
    assert!(a.albedo.iter().flatten().all(|&c| c > 0.0 && c < 1.0));

    let flat = SyntheticIdentity::generate(
        "b",
        16,
        &IdentityParams {
            roughness: Some(0.5),
            displacement_amp: 0.0,
            subsurface: Some(0.4),
        },
        1,
    );
    assert!(flat.roughness.iter().all(|&b| b == 0.5));
    assert!(flat.displacement.iter().all(|&d| d == 0.0));
    assert_eq!(flat.subsurface, 0.4);
}

#[test]
fn blur_keeps_constants() {
    let mut id = SyntheticIdentity::generate("c", 16, &IdentityParams::default(), 2);
    id.albedo = vec![[0.3, 0.5, 0.7]; 256];
    for v in id.blurred_albedo() {
        for (x, y) in v.iter().zip([0.3, 0.5, 0.7]) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn grazing_light_gets_a_third_through_the_wrap() {
    let n = V3::new(0.0, 0.0, 1.0);
    let ctx = ShadingContext {
        res: 1,
        mask: vec![true],
        view: vec![n],
        lights: LightSet::new(vec![Light {
            dir: V3::new(1.0, 0.0, 0.0),
            rgb: [2.0; 3],
        }]),
        visibility: Visibility::all_visible(1, 1),
    };
    let wrap = wrap_irradiance(&ctx, &[n]);
    assert!((wrap[0][0] - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(ctx.diffuse(&[n])[0], [0.0; 3]);
    // light well below the wrapped horizon
    let mut below = ctx;
    below.lights.lights[0].dir = V3::new(0.0, 0.8, -0.6);
    assert_eq!(wrap_irradiance(&below, &[n])[0], [0.0; 3]);
}

#[test]
fn dataset_config_text_round_trips_and_names_bad_keys() {
    let mut cfg = DatasetConfig::default();
    cfg.identity.subsurface = Some(0.25);
    cfg.seed = 99;
    assert_eq!(DatasetConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let err = DatasetConfig::parse("res = 32\nbogus_key = 1\n").unwrap_err();
    assert!(err.to_string().contains("bogus_key"));
    assert!(DatasetConfig::parse("subsurface = 0.9\n").is_err());
}

#[test]
fn pose_and_camera_text_round_trip() {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rig = crate::geometry::procedural_hand(&Default::default());
    let pose = random_pose(&rig, &mut rng, 0.9);
    assert_eq!(parse_pose(&pose_to_text(&pose)).unwrap(), pose);
    for cam in camera_rig(3, 64, &mut rng) {
        assert_eq!(parse_camera(&camera_to_text(&cam)).unwrap(), cam);
    }
    assert!(parse_pose("joint 1 2\n").is_err());
}
