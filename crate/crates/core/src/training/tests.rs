use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linearnet::{LightingInput, LinearMode, LinearNet, NetConfig};
use crate::tensor::{Graph, Tensor};

fn rand_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

fn scalar(v: crate::tensor::Var<'_, f64>) -> f64 {
    v.value().data()[0]
}

#[test]
fn reconstruction_unit_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = Graph::<f64>::new();
    let a = rand_tensor(&[3, 16, 16], 0.0, 1.0, &mut rng);
    let full = g.constant(Tensor::ones(&[1, 16, 16]));
    let same = loss_reconstruction(g.constant(a.clone()), g.constant(a.clone()), full).unwrap();
    assert_eq!(scalar(same.total), 0.0);

    let shifted = a.map(|v| v + 0.1);
    let off = loss_reconstruction(g.constant(shifted), g.constant(a.clone()), full).unwrap();
    assert!((scalar(off.mae) - 0.1).abs() < 1e-12);
    assert!((scalar(off.pyramid) - 0.1).abs() < 1e-12);

    let before = empty_mask_warnings();
    let empty = g.constant(Tensor::zeros(&[1, 16, 16]));
    let e = loss_reconstruction(g.constant(a.map(|v| v + 1.0)), g.constant(a), empty).unwrap();
    assert_eq!(scalar(e.total), 0.0);
    assert!(empty_mask_warnings() > before);
}

#[test]
fn reconstruction_ignores_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = Graph::<f64>::new();
    let (a, b) = (rand_tensor(&[3, 8, 8], 0.0, 1.0, &mut rng), rand_tensor(&[3, 8, 8], 0.0, 1.0, &mut rng));
    let m: Vec<f64> = (0..64).map(|i| if (i / 8 + i % 8) % 3 == 0 { 0.0 } else { 1.0 }).collect();
    let mask = Tensor::from_vec(&[1, 8, 8], m.clone()).unwrap();
    let mut corrupted = a.clone();
    for c in 0..3 {
        for (i, &mv) in m.iter().enumerate() {
            if mv == 0.0 {
                corrupted.data_mut()[c * 64 + i] = 50.0;
            }
        }
    }
    let l = |x: &Tensor<f64>| scalar(loss_reconstruction(g.constant(x.clone()), g.constant(b.clone()), g.constant(mask.clone())).unwrap().total);
    assert_eq!(l(&a), l(&corrupted));
}

#[test]
fn hinge_losses_unit_values() {
    let g = Graph::<f64>::new();
    let real = [g.constant(Tensor::full(&[1, 4, 4], 1.5)), g.constant(Tensor::full(&[1, 2, 2], 1.0))];
    let fake = [g.constant(Tensor::full(&[1, 4, 4], -1.0)), g.constant(Tensor::full(&[1, 2, 2], -3.0))];
    assert_eq!(scalar(hinge_d_loss(&real, &fake).unwrap()), 0.0);
    let zeros = [g.constant(Tensor::zeros(&[1, 4, 4])), g.constant(Tensor::zeros(&[1, 2, 2]))];
    assert_eq!(scalar(hinge_d_loss(&zeros, &zeros).unwrap()), 2.0);
    assert_eq!(scalar(hinge_g_loss(&zeros).unwrap()), 0.0);
}

#[test]
fn generator_gradient_matches_finite_differences() {
    let disc = Discriminator::<f64>::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let fake = rand_tensor(&[3, 16, 16], 0.0, 1.0, &mut rng);
    let cond = rand_tensor(&[6, 16, 16], 0.0, 1.0, &mut rng);
    let eval = |x: &Tensor<f64>, with_grad: bool| {
        let g = Graph::new();
        let p = disc.bind(&g, false);
        let v = g.leaf(x.clone(), with_grad);
        let loss = hinge_g_loss(&disc.forward(&p, v, g.constant(cond.clone())).unwrap()).unwrap();
        let grad = with_grad.then(|| g.backward(loss).unwrap().get_or_zeros(v));
        (scalar(loss), grad)
    };
    let (_, grad) = eval(&fake, true);
    let grad = grad.unwrap();
    assert!(grad.max_abs() > 0.0);
    let h = 1e-4;
    for i in (0..fake.len()).step_by(37) {
        let mut plus = fake.clone();
        plus.data_mut()[i] += h;
        let mut minus = fake.clone();
        minus.data_mut()[i] -= h;
        let num = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * h);
        let ana = grad.data()[i];
        assert!((num - ana).abs() <= 1e-3 * num.abs().max(ana.abs()).max(1e-6), "{i}: {num} vs {ana}");
    }
}

#[test]
fn discriminator_conditioning_is_live() {
    let disc = Discriminator::<f64>::new(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let img = rand_tensor(&[3, 16, 16], 0.0, 1.0, &mut rng);
    let (c1, c2) = (rand_tensor(&[6, 16, 16], 0.0, 1.0, &mut rng), rand_tensor(&[6, 16, 16], 0.0, 1.0, &mut rng));
    let g = Graph::new();
    let p = disc.bind(&g, false);
    let s1 = disc.forward(&p, g.constant(img.clone()), g.constant(c1)).unwrap();
    let s2 = disc.forward(&p, g.constant(img), g.constant(c2)).unwrap();
    assert_eq!(s1.len(), DISC_SCALES);
    assert_eq!(s1[0].shape(), [1, 2, 2]);
    let diff: f64 = s1.iter().zip(&s2).map(|(a, b)| a.value().zip_map(&b.value(), |x, y| (x - y).abs()).sum()).sum();
    assert!(diff > 1e-6);
}

fn features_and_nl<'g>(net: &LinearNet<f64>, g: &'g Graph<f64>, p: &crate::linearnet::Bound<'g, f64>, rng: &mut impl Rng) -> (crate::tensor::Var<'g, f64>, Vec<crate::tensor::Var<'g, f64>>) {
    let r = net.config.res;
    let tex = g.constant(rand_tensor(&[3, r, r], 0.0, 1.0, rng));
    let pose = g.constant(rand_tensor(&[net.config.pose_dim, 1, 1], -0.5, 0.5, rng));
    let nl = net.nonlinear_forward(p, tex, pose).unwrap();
    (g.constant(rand_tensor(&[6, r, r], 0.0, 1.0, rng)), nl)
}

#[test]
fn l1_regularizer_properties() {
    let net = LinearNet::<f64>::new(NetConfig::new(16, LinearMode::Linear, 4), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = Graph::new();
    let p = net.bind(&g, false);
    let (f, nl) = features_and_nl(&net, &g, &p, &mut rng);
    let reg = |x| scalar(loss_l1reg(&g, &net.linear_forward(&p, LightingInput::Features(x), &nl).unwrap().encoder).unwrap());
    assert_eq!(reg(f.scale(0.0)), 0.0);
    let (one, two) = (reg(f), reg(f.scale(2.0)));
    assert!(one > 0.0);
    assert!((two - 2.0 * one).abs() <= 1e-12 * two);
    let ones = g.constant(Tensor::ones(&[4, 5, 5]));
    assert_eq!(scalar(loss_l1reg(&g, &[ones]).unwrap()), 1.0);
}

#[test]
fn total_loss_weights() {
    let g = Graph::<f64>::new();
    let w = LossWeights::default();
    let c = |v: f64| g.constant(Tensor::scalar(v));
    let zero = LossParts { img: c(0.0), gan: Some(c(0.0)), reg: Some(c(0.0)) };
    assert_eq!(scalar(total_loss(&zero, &w)), 0.0);
    let unit = LossParts { img: c(1.0), gan: Some(c(1.0)), reg: Some(c(1.0)) };
    assert!((scalar(total_loss(&unit, &w)) - 1.02).abs() < 1e-12);
    let no_gan = LossParts { img: c(1.0), gan: None, reg: Some(c(1.0)) };
    assert!((scalar(total_loss(&no_gan, &w)) - 1.01).abs() < 1e-12);
}

#[test]
fn linearity_consistency_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let linear = LinearNet::<f64>::new(NetConfig::new(16, LinearMode::Linear, 4), 1).unwrap();
    let g = Graph::new();
    let p = linear.bind(&g, false);
    let (f1, nl) = features_and_nl(&linear, &g, &p, &mut rng);
    let f2 = g.constant(rand_tensor(&[6, 16, 16], 0.0, 1.0, &mut rng));
    let lc = linearity_consistency_loss(&linear, &p, f1, f2, 0.7, 1.3, &nl).unwrap();
    assert!(scalar(lc) < 1e-5, "{}", scalar(lc));
    let same = linearity_consistency_loss(&linear, &p, f1, f2, 1.0, 0.0, &nl).unwrap();
    assert!(scalar(same) < 1e-5);

    let nonlinear = LinearNet::<f64>::new(NetConfig::new(16, LinearMode::Nonlinear, 4), 1).unwrap();
    let g = Graph::new();
    let p = nonlinear.bind(&g, false);
    let (f1, nl) = features_and_nl(&nonlinear, &g, &p, &mut rng);
    let lc = linearity_consistency_loss(&nonlinear, &p, f1, f1.neg(), 1.0, 1.0, &nl).unwrap();
    assert!(scalar(lc) > 1e-3, "{}", scalar(lc));
}

fn image_pair(rng: &mut impl Rng) -> (Tensor<f32>, Tensor<f32>, Tensor<f32>) {
    let a: Tensor<f32> = rand_tensor(&[3, 24, 24], 0.0, 0.8, rng).cast();
    let noise: Tensor<f32> = rand_tensor(&[3, 24, 24], -0.1, 0.1, rng).cast();
    let b = a.zip_map(&noise, |v, n| (v + n).max(0.0));
    let mask = Tensor::from_vec(&[1, 24, 24], (0..576).map(|i| if i % 24 > 4 && i / 24 < 20 { 1.0 } else { 0.0 }).collect()).unwrap();
    (a, b, mask)
}

#[test]
fn metric_unit_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (a, b, mask) = image_pair(&mut rng);
    let ones = Tensor::ones(&[1, 24, 24]);
    assert_eq!(psnr(&a, &a, &ones), PSNR_CAP_DB);
    assert!((ssim(&a, &a, &ones) - 1.0).abs() < 1e-6);
    let shifted = a.map(|v| v + 0.1);
    assert!((psnr(&shifted, &a, &ones) - 20.0).abs() < 0.01);
    assert!((ssim(&a, &b, &mask) - ssim(&b, &a, &mask)).abs() < 1e-9);
    let s = ssim(&a, &b, &mask);
    assert!(s > 0.0 && s < 1.0);
}

#[test]
fn metrics_ignore_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (a, b, mask) = image_pair(&mut rng);
    let mut corrupted = a.clone();
    for c in 0..3 {
        for i in 0..576 {
            if mask.data()[i] == 0.0 {
                corrupted.data_mut()[c * 576 + i] = rng.gen_range(-5.0..5.0);
            }
        }
    }
    assert_eq!(psnr(&a, &b, &mask), psnr(&corrupted, &b, &mask));
    assert_eq!(ssim(&a, &b, &mask), ssim(&corrupted, &b, &mask));
}

#[test]
fn train_config_round_trip() {
    let cfg = TrainConfig {
        lr: 3e-4,
        iterations: 17,
        use_gan: false,
        mode: LinearMode::MlpLinear,
        frames: FrameFilter::All,
        ..TrainConfig::default()
    };
    assert_eq!(TrainConfig::parse(&cfg.to_text()).unwrap(), cfg);
    let err = TrainConfig::parse("lr = 1e-4\nlearning_rate = 2\n").unwrap_err();
    assert!(err.to_string().contains("learning_rate"));
    assert!(TrainConfig::parse("iterations = 0\n").is_err());
    assert!(!TrainConfig { weights: LossWeights { gan: 0.0, ..LossWeights::default() }, ..cfg }.gan_active());
}
