use super::loss::warn_empty_mask;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn check<S: Scalar>(pred: &Tensor<S>, gt: &Tensor<S>, mask: &Tensor<S>) -> (usize, usize, usize) {
    let (c, h, w) = pred.chw().expect("[C, H, W] image");
    assert_eq!(pred.shape(), gt.shape(), "image shapes differ");
    assert_eq!(mask.shape(), [1, h, w], "mask must be [1, H, W]");
    (c, h, w)
}

fn inside<S: Scalar>(mask: &Tensor<S>) -> Vec<bool> {
    mask.data().iter().map(|&m| m > S::zero()).collect()
}

/// Mean squared error over masked pixels and all channels.
pub fn masked_mse<S: Scalar>(pred: &Tensor<S>, gt: &Tensor<S>, mask: &Tensor<S>) -> Option<f64> {
    let (c, h, w) = check(pred, gt, mask);
    let m = inside(mask);
    let n = m.iter().filter(|&&v| v).count();
    if n == 0 {
        return None;
    }
    let (p, g) = (pred.data(), gt.data());
    let mut acc = 0.0;
    for ch in 0..c {
        for (i, _) in m.iter().enumerate().filter(|(_, &v)| v) {
            let d = p[ch * h * w + i].to_f64().unwrap_or(f64::NAN) - g[ch * h * w + i].to_f64().unwrap_or(f64::NAN);
            acc += d * d;
        }
    }
    Some(acc / (n * c) as f64)
}

/// `10 log10(1 / MSE)` in linear [0, 1] units, capped at 100 dB. An empty
/// mask compares nothing and scores the cap.
pub fn psnr<S: Scalar>(pred: &Tensor<S>, gt: &Tensor<S>, mask: &Tensor<S>) -> f64 {
    match masked_mse(pred, gt, mask) {
        None => {
            warn_empty_mask("psnr");
            PSNR_CAP_DB
        }
        Some(mse) if mse <= 0.0 => PSNR_CAP_DB,
        Some(mse) => (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB),
    }
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - half;
            (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filtering with zero padding.
fn filter(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let xx = x as isize + i as isize - half;
                if xx >= 0 && (xx as usize) < w {
                    acc += kv * src[y * w + xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                let yy = y as isize + i as isize - half;
                if yy >= 0 && (yy as usize) < h {
                    acc += kv * tmp[yy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// SSIM with an 11×11 Gaussian window (σ = 1.5) and the standard constants
/// for unit dynamic range. Window statistics are weighted by the mask and
/// the SSIM map is averaged over masked pixels and channels, so background
/// pixels never enter. An empty mask scores 1.
pub fn ssim<S: Scalar>(pred: &Tensor<S>, gt: &Tensor<S>, mask: &Tensor<S>) -> f64 {
    let (c, h, w) = check(pred, gt, mask);
    let m: Vec<f64> = inside(mask).iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
    let n = m.iter().filter(|&&v| v > 0.0).count();
    if n == 0 {
        warn_empty_mask("ssim");
        return 1.0;
    }
    let k = gaussian_window();
    let wm = filter(&m, h, w, &k);
    let plane = h * w;
    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = pred.data()[ch * plane..(ch + 1) * plane].iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        let y: Vec<f64> = gt.data()[ch * plane..(ch + 1) * plane].iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        let weighted = |f: &dyn Fn(usize) -> f64| filter(&(0..plane).map(|i| m[i] * f(i)).collect::<Vec<_>>(), h, w, &k);
        let sx = weighted(&|i| x[i]);
        let sy = weighted(&|i| y[i]);
        let sxx = weighted(&|i| x[i] * x[i]);
        let syy = weighted(&|i| y[i] * y[i]);
        let sxy = weighted(&|i| x[i] * y[i]);
        for i in (0..plane).filter(|&i| m[i] > 0.0) {
            let norm = wm[i];
            let (mx, my) = (sx[i] / norm, sy[i] / norm);
            let vx = sxx[i] / norm - mx * mx;
            let vy = syy[i] / norm - my * my;
            let cov = sxy[i] / norm - mx * my;
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
        }
    }
    total / (n * c) as f64
}
