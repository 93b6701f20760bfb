mod common;

use common::{gradcheck, random_tensor, rng};
use linlight::tensor::{concat_channels, Graph, Tensor};
use proptest::prelude::*;

const H: f64 = 1e-3;
const TOL: f64 = 1e-3;
// gradients smaller than this are compared in absolute terms
const FLOOR: f64 = 1e-4;

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut r = rng(1);
    let x = random_tensor(&[2, 6, 6], &mut r);
    let k = random_tensor(&[3, 2, 3, 3], &mut r);
    let b = random_tensor(&[3], &mut r);
    let w = random_tensor(&[3, 3, 3], &mut r);
    let err = gradcheck(&[x, k, b, w], H, FLOOR, |_, v| {
        let y = v[0].conv2d(v[1], Some(v[2]), 2, 1).unwrap();
        y.mul(v[3]).unwrap().sum()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn conv_transpose2d_gradients_match_finite_differences() {
    let mut r = rng(2);
    let y = random_tensor(&[3, 3, 3], &mut r);
    let k = random_tensor(&[3, 2, 3, 3], &mut r);
    let b = random_tensor(&[2], &mut r);
    let w = random_tensor(&[2, 6, 6], &mut r);
    let err = gradcheck(&[y, k, b, w], H, FLOOR, |_, v| {
        let z = v[0].conv_transpose2d(v[1], Some(v[2]), 2, 1, Some((6, 6))).unwrap();
        z.mul(v[3]).unwrap().sum()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn pointwise_and_resampling_gradients() {
    let mut r = rng(3);
    let x = random_tensor(&[2, 4, 4], &mut r);
    let w = random_tensor(&[2, 8, 8], &mut r);
    let err = gradcheck(&[x, w], H, FLOOR, |_, v| {
        let s = v[0].sigmoid().upsample_bilinear2x().unwrap();
        let p = s.mul(v[1]).unwrap().avg_pool2x().unwrap();
        p.square().sum()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn composite_conv_mul_convt_sum() {
    let mut r = rng(4);
    let x = random_tensor(&[2, 8, 8], &mut r);
    let k1 = random_tensor(&[4, 2, 3, 3], &mut r);
    let m = random_tensor(&[4, 4, 4], &mut r);
    let k2 = random_tensor(&[4, 3, 3, 3], &mut r);
    let err = gradcheck(&[x, k1, m, k2], H, FLOOR, |_, v| {
        let a = v[0].conv2d(v[1], None, 2, 1).unwrap();
        let b = a.mul(v[2]).unwrap();
        let c = b.conv_transpose2d(v[3], None, 2, 1, Some((8, 8))).unwrap();
        c.square().sum()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn concat_slice_broadcast_gradients() {
    let mut r = rng(5);
    let a = random_tensor(&[2, 3, 3], &mut r);
    let b = random_tensor(&[1, 3, 3], &mut r);
    let p = random_tensor(&[4, 1, 1], &mut r);
    let err = gradcheck(&[a, b, p], H, FLOOR, |_, v| {
        let e = v[2].expand_spatial(3, 3).unwrap();
        let c = concat_channels(&[v[0].mul(v[1]).unwrap(), e]).unwrap();
        c.slice_channels(1, 5).unwrap().leaky_relu(0.2).abs().add(v[1]).unwrap().square().mean()
    });
    assert!(err < TOL, "{err}");
}

fn inner(a: &Tensor<f32>, b: &Tensor<f32>) -> f64 {
    a.data().iter().zip(b.data()).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[test]
fn adjoint_identity_small_example() {
    let mut r = rng(6);
    let x = random_tensor(&[1, 4, 4], &mut r).cast::<f32>();
    let y = random_tensor(&[1, 3, 3], &mut r).cast::<f32>();
    let k = random_tensor(&[1, 1, 2, 2], &mut r).cast::<f32>();
    let g = Graph::<f32>::new();
    let (xv, yv, kv) = (g.constant(x.clone()), g.constant(y.clone()), g.constant(k));
    let cx = xv.conv2d(kv, None, 1, 0).unwrap().value();
    let ty = yv.conv_transpose2d(kv, None, 1, 0, Some((4, 4))).unwrap().value();
    let (lhs, rhs) = (inner(&cx, &y), inner(&x, &ty));
    assert!((lhs - rhs).abs() <= 1e-6 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_transpose_is_adjoint(
        seed in any::<u64>(),
        c_in in 1usize..4, c_out in 1usize..4,
        h in 3usize..9, w in 3usize..9,
        k in prop::sample::select(vec![1usize, 3, 5]),
        stride in 1usize..3,
    ) {
        let pad = k / 2;
        let mut r = rng(seed);
        let x = random_tensor(&[c_in, h, w], &mut r).cast::<f32>();
        let kern = random_tensor(&[c_out, c_in, k, k], &mut r).cast::<f32>();
        let g = Graph::<f32>::new();
        let (xv, kv) = (g.constant(x.clone()), g.constant(kern));
        let cx = xv.conv2d(kv, None, stride, pad).unwrap().value();
        let y = random_tensor(cx.shape(), &mut r).cast::<f32>();
        let ty = g.constant(y.clone()).conv_transpose2d(kv, None, stride, pad, Some((h, w))).unwrap().value();
        let (lhs, rhs) = (inner(&cx, &y), inner(&x, &ty));
        // inner products of O(1) values; compare against the magnitude of the summands
        let scale = cx.data().iter().zip(y.data()).map(|(&a, &b)| (a as f64 * b as f64).abs()).sum::<f64>().max(1e-12);
        prop_assert!((lhs - rhs).abs() <= 1e-6 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn bias_free_chains_are_homogeneous(seed in any::<u64>(), alpha in -4.0f32..4.0) {
        let mut r = rng(seed);
        let x = random_tensor(&[2, 8, 8], &mut r).cast::<f32>();
        let k1 = random_tensor(&[3, 2, 3, 3], &mut r).cast::<f32>();
        let k2 = random_tensor(&[3, 2, 3, 3], &mut r).cast::<f32>();
        let run = |input: Tensor<f32>| {
            let g = Graph::<f32>::new();
            let xv = g.constant(input);
            let a = xv.conv2d(g.constant(k1.clone()), None, 2, 1).unwrap();
            let b = a.upsample_bilinear2x().unwrap().scale(0.7);
            let c = b.conv_transpose2d(g.constant(k2.clone()), None, 2, 1, Some((16, 16))).unwrap();
            let d = a.conv_transpose2d(g.constant(k2.clone()), None, 1, 1, None).unwrap();
            let e = c.avg_pool2x().unwrap().avg_pool2x().unwrap().add(d).unwrap();
            (*e.value()).clone()
        };
        let fx = run(x.clone());
        let fax = run(x.map(|v| v * alpha));
        let scaled = fx.map(|v| v * alpha);
        let rel = linlight::tensor::max_rel_diff(fax.data(), scaled.data());
        prop_assert!(rel <= 1e-5 || fx.max_abs() == 0.0, "rel {}", rel);
    }
}

#[test]
fn forward_and_backward_are_deterministic() {
    let run = || {
        let mut r = rng(9);
        let x = random_tensor(&[3, 8, 8], &mut r).cast::<f32>();
        let k = random_tensor(&[5, 3, 3, 3], &mut r).cast::<f32>();
        let g = Graph::<f32>::new();
        let kv = g.param(k);
        let y = g.constant(x).conv2d(kv, None, 1, 1).unwrap().sigmoid().sum();
        let grads = g.backward(y).unwrap();
        (y.value().data()[0].to_bits(), grads.get(kv).unwrap().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}
