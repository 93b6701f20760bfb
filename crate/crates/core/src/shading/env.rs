//! Equirectangular environment maps and their reduction to directional lights.
//!
//! Pixel `(row, col)` of an `H x W` map looks along polar angle
//! `θ = π (row + ½) / H` from +y and azimuth `φ = 2π (col + ½) / W`, i.e.
//! direction `(sin θ cos φ, cos θ, sin θ sin φ)`.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use super::{Light, LightSet, ShadingError};
use crate::image_io::read_pfm;
use crate::math::V3;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentMap {
    pub width: usize,
    pub height: usize,
    /// Linear RGB, row-major.
    pub radiance: Vec<[f64; 3]>,
}

impl EnvironmentMap {
    pub fn uniform(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self {
            width,
            height,
            radiance: vec![rgb; width * height],
        }
    }

    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self, ShadingError> {
        let (c, h, w) = t.chw().map_err(|e| ShadingError::Invalid(e.to_string()))?;
        let d = t.data();
        let radiance: Vec<[f64; 3]> = (0..h * w)
            .map(|p| {
                let ch = |k: usize| d[if c == 1 { 0 } else { k } * h * w + p] as f64;
                [ch(0), ch(1), ch(2)]
            })
            .collect();
        if radiance.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ShadingError::Invalid("environment map must be finite and nonnegative".into()));
        }
        Ok(Self {
            width: w,
            height: h,
            radiance,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ShadingError> {
        Self::from_tensor(&read_pfm(path)?)
    }

    pub fn to_tensor(&self) -> Tensor<f32> {
        let n = self.width * self.height;
        let mut data = vec![0f32; 3 * n];
        for (p, rgb) in self.radiance.iter().enumerate() {
            for c in 0..3 {
                data[c * n + p] = rgb[c] as f32;
            }
        }
        Tensor::from_vec(&[3, self.height, self.width], data).expect("env shape")
    }

    pub fn direction(&self, row: usize, col: usize) -> V3 {
        let theta = PI * (row as f64 + 0.5) / self.height as f64;
        let phi = TAU * (col as f64 + 0.5) / self.width as f64;
        V3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin())
    }

    pub fn solid_angle(&self, row: usize) -> f64 {
        let t0 = PI * row as f64 / self.height as f64;
        let t1 = PI * (row + 1) as f64 / self.height as f64;
        TAU / self.width as f64 * (t0.cos() - t1.cos())
    }

    /// Radiance of the pixel containing `dir`.
    pub fn lookup(&self, dir: V3) -> [f64; 3] {
        let d = dir.normalized();
        let theta = d.y.clamp(-1.0, 1.0).acos();
        let phi = d.z.atan2(d.x).rem_euclid(TAU);
        let row = ((theta / PI * self.height as f64) as usize).min(self.height - 1);
        let col = ((phi / TAU * self.width as f64) as usize).min(self.width - 1);
        self.radiance[row * self.width + col]
    }
}

/// `(rows, cols)` with `rows * cols = n`, preferring an even number of rows
/// (so the equator is a bin boundary) and bins that are as square as possible.
pub fn equal_area_grid(n: usize) -> (usize, usize) {
    assert!(n >= 1, "need at least one bin");
    let divisors: Vec<usize> = (1..=n).filter(|r| n % r == 0).collect();
    let even: Vec<usize> = divisors.iter().copied().filter(|r| r % 2 == 0).collect();
    let pool = if even.is_empty() { divisors } else { even };
    // square bins: cols / rows ≈ π (band height 2/rows vs width 2π/cols on the equator)
    let badness = |r: usize| ((n / r) as f64 / (PI * r as f64)).ln().abs();
    let rows = pool
        .into_iter()
        .min_by(|&a, &b| badness(a).total_cmp(&badness(b)))
        .expect("nonempty");
    (rows, n / rows)
}

/// Mean of `sqrt(1 - y²)` over `[y0, y1]`.
fn mean_radius(y0: f64, y1: f64) -> f64 {
    let f = |y: f64| 0.5 * (y * (1.0 - y * y).max(0.0).sqrt() + y.clamp(-1.0, 1.0).asin());
    (f(y1) - f(y0)) / (y1 - y0)
}

fn sinc_mean(f: fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (f(b) - f(a)) / (b - a)
}

/// Reduces `env` to `n` directional lights over equal-area bins (bands
/// uniform in `y`, uniform in azimuth). Each light carries the solid-angle
/// weighted mean radiance of its bin times the bin's solid angle `4π / n`,
/// and points at the bin's luminance-weighted centroid (the geometric
/// centroid for dark bins). Bins containing no pixel centre sample the
/// pixel at their centroid.
pub fn env_to_lights(env: &EnvironmentMap, n: usize) -> LightSet {
    let (rows, cols) = equal_area_grid(n);
    let mut rad_sum = vec![[0.0f64; 3]; n];
    let mut omega_sum = vec![0.0f64; n];
    let mut dir_sum = vec![V3::zero(); n];
    for row in 0..env.height {
        let omega = env.solid_angle(row);
        for col in 0..env.width {
            let d = env.direction(row, col);
            let band = (((1.0 - d.y) * 0.5 * rows as f64) as usize).min(rows - 1);
            let phi = d.z.atan2(d.x).rem_euclid(TAU);
            let sector = ((phi / TAU * cols as f64) as usize).min(cols - 1);
            let b = band * cols + sector;
            let rgb = env.radiance[row * env.width + col];
            for c in 0..3 {
                rad_sum[b][c] += omega * rgb[c];
            }
            omega_sum[b] += omega;
            let lum = 0.2126 * rgb[0] + 0.7152 * rgb[1] + 0.0722 * rgb[2];
            dir_sum[b] += d * (lum * omega);
        }
    }
    let bin_omega = 4.0 * PI / n as f64;
    let lights = (0..n)
        .map(|b| {
            let (band, sector) = (b / cols, b % cols);
            let y1 = 1.0 - 2.0 * band as f64 / rows as f64;
            let y0 = 1.0 - 2.0 * (band + 1) as f64 / rows as f64;
            let p0 = TAU * sector as f64 / cols as f64;
            let p1 = TAU * (sector + 1) as f64 / cols as f64;
            let r = mean_radius(y0, y1);
            let centroid = V3::new(r * sinc_mean(f64::sin, p0, p1), 0.5 * (y0 + y1), -r * sinc_mean(f64::cos, p0, p1));
            let geometric = if centroid.norm() > 1e-12 {
                centroid.normalized()
            } else {
                V3::new(0.0, 1.0, 0.0)
            };
            let (rgb, dir) = if omega_sum[b] > 0.0 {
                let dir = if dir_sum[b].norm() > 1e-12 * omega_sum[b] {
                    dir_sum[b].normalized()
                } else {
                    geometric
                };
                (rad_sum[b].map(|s| s / omega_sum[b] * bin_omega), dir)
            } else {
                (env.lookup(geometric).map(|v| v * bin_omega), geometric)
            };
            Light { dir, rgb }
        })
        .collect();
    LightSet::new(lights)
}
