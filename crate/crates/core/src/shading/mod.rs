//! GGX/Schlick/Smith shading, light sets, environment-map reduction and the
//! texel-aligned diffuse and specular features.

mod env;
mod features;

pub use env::{env_to_lights, equal_area_grid, EnvironmentMap};
pub use features::{compose_pbr, shade_features, ShadingContext, ShadingFeatures, Visibility};

use std::fmt::Write as _;
use std::path::Path;

use crate::math::V3;
use crate::scalar::Scalar;

pub const F0: f64 = 0.04;
pub const LAMBDA_F1: f64 = -5.55473;
pub const LAMBDA_F2: f64 = -6.98316;
pub const BETA_MIN: f64 = 0.02;
pub const BETA_MAX: f64 = 1.0;
pub const PHONG_EXPONENT: i32 = 32;

#[derive(Debug, thiserror::Error)]
pub enum ShadingError {
    #[error("light {index}: {msg}")]
    Light { index: usize, msg: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] crate::image_io::ImageError),
    #[error("{0}")]
    Invalid(String),
}

pub fn clamp_beta<S: Scalar>(beta: S) -> S {
    beta.max(S::lit(BETA_MIN)).min(S::lit(BETA_MAX))
}

/// GGX normal distribution `β⁴ / (π ((h·n)² (β⁴ − 1) + 1)²)`.
pub fn ggx_d<S: Scalar>(n_dot_h: S, beta: S) -> S {
    let a = beta.powi(4);
    let den = n_dot_h * n_dot_h * (a - S::one()) + S::one();
    a / (S::PI() * den * den)
}

/// Schlick Fresnel with the spherical-Gaussian exponent.
pub fn schlick_f<S: Scalar>(d_dot_h: S) -> S {
    let f0 = S::lit(F0);
    let e = (S::lit(LAMBDA_F1) * d_dot_h + S::lit(LAMBDA_F2)) * d_dot_h;
    f0 + (S::one() - f0) * S::lit(2.0).powf(e)
}

/// `K = (β + 1)² / 8`.
pub fn smith_k<S: Scalar>(beta: S) -> S {
    (beta + S::one()).powi(2) / S::lit(8.0)
}

/// Visibility term including the `1/4` of the microfacet denominator.
pub fn smith_g<S: Scalar>(n_dot_d: S, n_dot_l: S, beta: S) -> S {
    let k = smith_k(beta);
    let g1 = n_dot_d * (S::one() - k) + k;
    let g2 = n_dot_l * (S::one() - k) + k;
    S::one() / (S::lit(4.0) * g1 * g2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Light {
    /// Unit direction towards the light.
    pub dir: V3,
    pub rgb: [f64; 3],
}

/// Distant directional lights.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LightSet {
    pub lights: Vec<Light>,
}

impl LightSet {
    pub fn new(lights: Vec<Light>) -> Self {
        Self { lights }
    }

    pub fn len(&self) -> usize {
        self.lights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lights.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.lights
                .iter()
                .map(|l| Light {
                    dir: l.dir,
                    rgb: l.rgb.map(|c| c * s),
                })
                .collect(),
        )
    }

    /// Concatenation of two light sets.
    pub fn union(&self, o: &LightSet) -> Self {
        Self::new(self.lights.iter().chain(&o.lights).copied().collect())
    }

    pub fn validate(&self) -> Result<(), ShadingError> {
        for (index, l) in self.lights.iter().enumerate() {
            if (l.dir.norm() - 1.0).abs() > 1e-6 {
                return Err(ShadingError::Light {
                    index,
                    msg: format!("direction norm {}", l.dir.norm()),
                });
            }
            if l.rgb.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(ShadingError::Light {
                    index,
                    msg: format!("intensity {:?}", l.rgb),
                });
            }
        }
        Ok(())
    }

    /// One `dx dy dz r g b` line per light.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for l in &self.lights {
            let _ = writeln!(s, "{} {} {} {} {} {}", l.dir.x, l.dir.y, l.dir.z, l.rgb[0], l.rgb[1], l.rgb[2]);
        }
        s
    }

    /// Parses `dx dy dz r g b` lines; directions are normalized, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ShadingError> {
        let mut lights = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| ShadingError::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            if vals.len() != 6 {
                return Err(ShadingError::Parse {
                    line: i + 1,
                    msg: format!("expected 6 numbers, got {}", vals.len()),
                });
            }
            let dir = V3::new(vals[0], vals[1], vals[2]);
            if dir.norm() == 0.0 {
                return Err(ShadingError::Parse {
                    line: i + 1,
                    msg: "zero direction".into(),
                });
            }
            lights.push(Light {
                dir: dir.normalized(),
                rgb: [vals[3], vals[4], vals[5]],
            });
        }
        let set = Self::new(lights);
        set.validate()?;
        Ok(set)
    }

    pub fn read(path: &Path) -> Result<Self, ShadingError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<(), ShadingError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// `n` roughly uniform directions on the unit sphere (Fibonacci lattice).
pub fn sphere_directions(n: usize) -> Vec<V3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let phi = golden * i as f64;
            V3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ggx_values() {
        for nh in [0.0, 0.3, 1.0] {
            assert!((ggx_d(nh, 1.0f64) - 1.0 / PI).abs() < 1e-12);
        }
        assert!((ggx_d(1.0, 0.5f64) - 1.0 / (PI * 0.0625)).abs() < 1e-9);
        assert!((ggx_d(1.0, 0.5f64) - 5.09296).abs() < 1e-5);
        assert!(ggx_d(1.0, 0.3f64) > ggx_d(1.0, 0.6f64));
    }

    #[test]
    fn fresnel_values() {
        assert!((schlick_f(0.0f64) - 1.0).abs() < 1e-15);
        let expect = 0.04 + 0.96 * 2f64.powf(LAMBDA_F1 + LAMBDA_F2);
        assert!((schlick_f(1.0f64) - expect).abs() < 1e-15);
        assert!((schlick_f(1.0f64) - 0.0401614).abs() < 1e-6);
        for i in 0..=100 {
            let f = schlick_f(i as f64 / 100.0);
            assert!((F0..=1.0).contains(&f));
        }
    }

    #[test]
    fn smith_values() {
        for b in [0.1, 0.5, 1.0] {
            assert!((smith_g(1.0, 1.0, b) - 0.25f64).abs() < 1e-15);
            let k = smith_k(b);
            let limit = 1.0 / (4.0 * k * (0.7 * (1.0 - k) + k));
            assert!((smith_g(0.7, 1e-12, b) - limit).abs() < 1e-9);
            assert!(smith_g(0.01, 0.02, b) > 0.0);
        }
    }

    #[test]
    fn light_text_roundtrip() {
        let set = LightSet::new(vec![
            Light { dir: V3::new(0.0, 1.0, 0.0), rgb: [1.0, 0.5, 0.25] },
            Light { dir: V3::new(0.6, 0.0, 0.8), rgb: [0.0, 0.0, 2.0] },
        ]);
        assert_eq!(LightSet::parse(&set.to_text()).unwrap(), set);
        assert!(LightSet::parse("0 1 0 1 1").is_err());
        assert!(LightSet::parse("0 1 0 1 -1 1").is_err());
    }

    #[test]
    fn fibonacci_directions_are_unit_and_balanced() {
        let d = sphere_directions(350);
        let mean = d.iter().fold(V3::zero(), |s, &v| s + v) * (1.0 / 350.0);
        assert!(mean.norm() < 1e-2);
        assert!(d.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }
}
