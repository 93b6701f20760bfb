//! Texel-aligned shading features and their analytic derivatives.
//!
//! `C^d = Σ L V max(ω·n, 0)` and `C^s = Σ D F G L V max(ω·n, 0)` per texel,
//! with the view direction `d` from the texel towards the camera. Sums run in
//! light index order so results do not depend on threading.

use std::rc::Rc;

use rayon::prelude::*;

use super::{clamp_beta, ggx_d, schlick_f, smith_g, smith_k, LightSet, BETA_MAX, BETA_MIN, PHONG_EXPONENT};
use crate::geometry::{Bvh, UvGeometryMaps};
use crate::math::V3;
use crate::scalar::Scalar;
use crate::tensor::{Backward, Result, Tensor, TensorError, Var};

/// Binary light visibility per (texel, light), texel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Visibility {
    pub n_lights: usize,
    bits: Vec<bool>,
}

impl Visibility {
    pub fn all_visible(n_texels: usize, n_lights: usize) -> Self {
        Self {
            n_lights,
            bits: vec![true; n_texels * n_lights],
        }
    }

    /// Shadow rays from every valid texel of the (coarse) maps.
    pub fn compute(maps: &UvGeometryMaps, bvh: &Bvh, lights: &LightSet) -> Self {
        let nl = lights.len();
        let bits = (0..maps.len())
            .into_par_iter()
            .flat_map_iter(|t| {
                let (p, n, valid) = (maps.position[t], maps.normal[t], maps.mask[t]);
                lights.lights.iter().map(move |l| valid && bvh.visibility(p, n, l.dir))
            })
            .collect();
        Self { n_lights: nl, bits }
    }

    pub fn get(&self, texel: usize, light: usize) -> bool {
        self.bits[texel * self.n_lights + light]
    }

    pub fn row(&self, texel: usize) -> &[bool] {
        &self.bits[texel * self.n_lights..(texel + 1) * self.n_lights]
    }

    /// Visibility restricted to the given light indices, in that order.
    pub fn select(&self, lights: &[usize]) -> Self {
        let n_texels = self.bits.len() / self.n_lights.max(1);
        let bits = (0..n_texels)
            .flat_map(|t| lights.iter().map(move |&l| (t, l)))
            .map(|(t, l)| self.get(t, l))
            .collect();
        Self {
            n_lights: lights.len(),
            bits,
        }
    }

    pub fn concat(&self, o: &Visibility) -> Self {
        let n_texels = self.bits.len() / self.n_lights.max(1);
        let mut bits = Vec::with_capacity(self.bits.len() + o.bits.len());
        for t in 0..n_texels {
            bits.extend_from_slice(self.row(t));
            bits.extend_from_slice(o.row(t));
        }
        Self {
            n_lights: self.n_lights + o.n_lights,
            bits,
        }
    }
}

/// Everything the features need besides normals and roughness.
#[derive(Clone, Debug)]
pub struct ShadingContext {
    pub res: usize,
    pub mask: Vec<bool>,
    /// Unit direction from each texel towards the camera; zero when unknown.
    pub view: Vec<V3>,
    pub lights: LightSet,
    pub visibility: Visibility,
}

/// Diffuse and specular feature maps, RGB per texel.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadingFeatures {
    pub res: usize,
    pub diffuse: Vec<[f64; 3]>,
    pub specular: Vec<[f64; 3]>,
}

impl ShadingFeatures {
    /// `[6, R, R]`: diffuse RGB then specular RGB.
    pub fn to_tensor<S: Scalar>(&self) -> Tensor<S> {
        let n = self.res * self.res;
        let mut data = vec![S::zero(); 6 * n];
        for t in 0..n {
            for c in 0..3 {
                data[c * n + t] = S::lit(self.diffuse[t][c]);
                data[(3 + c) * n + t] = S::lit(self.specular[t][c]);
            }
        }
        Tensor::from_vec(&[6, self.res, self.res], data).expect("feature shape")
    }
}

struct TexelGrad {
    normal: V3,
    beta: f64,
}

impl ShadingContext {
    pub fn new(maps: &UvGeometryMaps, camera_center: Option<V3>, lights: LightSet, visibility: Visibility) -> Self {
        assert_eq!(visibility.n_lights, lights.len(), "visibility/light count");
        let view = maps
            .position
            .iter()
            .zip(&maps.mask)
            .map(|(&p, &m)| match camera_center {
                Some(c) if m => (c - p).normalized(),
                _ => V3::zero(),
            })
            .collect();
        Self {
            res: maps.res,
            mask: maps.mask.clone(),
            view,
            lights,
            visibility,
        }
    }

    fn texel(&self, t: usize, n: V3, beta: f64) -> ([f64; 3], [f64; 3]) {
        let mut diff = [0.0; 3];
        let mut spec = [0.0; 3];
        if !self.mask[t] {
            return (diff, spec);
        }
        let d = self.view[t];
        let cv = n.dot(d);
        let b = clamp_beta(beta);
        for (l, vis) in self.lights.lights.iter().zip(self.visibility.row(t)) {
            let c = l.dir.dot(n);
            if !vis || c <= 0.0 {
                continue;
            }
            for k in 0..3 {
                diff[k] += l.rgb[k] * c;
            }
            if cv > 0.0 {
                let h = (l.dir + d).normalized();
                let f = ggx_d(h.dot(n), b) * schlick_f(d.dot(h)) * smith_g(cv, c, b) * c;
                for k in 0..3 {
                    spec[k] += l.rgb[k] * f;
                }
            }
        }
        (diff, spec)
    }

    fn texel_grad(&self, t: usize, n: V3, beta: f64, gd: [f64; 3], gs: [f64; 3]) -> TexelGrad {
        let mut gn = V3::zero();
        let mut gb = 0.0;
        if !self.mask[t] {
            return TexelGrad { normal: gn, beta: gb };
        }
        let d = self.view[t];
        let cv = n.dot(d);
        let clamped = !(BETA_MIN..=BETA_MAX).contains(&beta);
        let b = clamp_beta(beta);
        let a = b.powi(4);
        let k = smith_k(b);
        for (l, vis) in self.lights.lights.iter().zip(self.visibility.row(t)) {
            let c = l.dir.dot(n);
            if !vis || c <= 0.0 {
                continue;
            }
            let wd: f64 = (0..3).map(|i| gd[i] * l.rgb[i]).sum();
            gn += l.dir * wd;
            if cv <= 0.0 {
                continue;
            }
            let ws: f64 = (0..3).map(|i| gs[i] * l.rgb[i]).sum();
            if ws == 0.0 {
                continue;
            }
            let h = (l.dir + d).normalized();
            let nh = h.dot(n);
            let f = schlick_f(d.dot(h));
            let den = nh * nh * (a - 1.0) + 1.0;
            let dd = a / (std::f64::consts::PI * den * den);
            let dd_nh = -4.0 * a * nh * (a - 1.0) / (std::f64::consts::PI * den.powi(3));
            let dd_a = (den - 2.0 * a * nh * nh) / (std::f64::consts::PI * den.powi(3));
            let g1 = cv * (1.0 - k) + k;
            let g2 = c * (1.0 - k) + k;
            let g = 1.0 / (4.0 * g1 * g2);
            let g_cv = -g * (1.0 - k) / g1;
            let g_c = -g * (1.0 - k) / g2;
            let g_k = -g * ((1.0 - cv) / g1 + (1.0 - c) / g2);
            // f = D F G c
            let grad_n = h * (dd_nh * g * c) + d * (dd * g_cv * c) + l.dir * (dd * (g_c * c + g));
            gn += grad_n * (f * ws);
            if !clamped {
                let d_beta = dd_a * 4.0 * b.powi(3) * g + dd * g_k * (b + 1.0) / 4.0;
                gb += f * c * d_beta * ws;
            }
        }
        TexelGrad { normal: gn, beta: gb }
    }

    /// Features for per-texel normals and roughness.
    pub fn features(&self, normals: &[V3], beta: &[f64]) -> ShadingFeatures {
        let (diffuse, specular): (Vec<_>, Vec<_>) = (0..self.res * self.res)
            .into_par_iter()
            .map(|t| self.texel(t, normals[t], beta[t]))
            .unzip();
        ShadingFeatures {
            res: self.res,
            diffuse,
            specular,
        }
    }

    pub fn diffuse(&self, normals: &[V3]) -> Vec<[f64; 3]> {
        let beta = vec![1.0; normals.len()];
        self.features(normals, &beta).diffuse
    }

    /// Phong conditioning features `(A, S)`: `A` is the diffuse feature and
    /// `S = Σ L V max(r·d, 0)^p` with the mirrored light direction `r`.
    pub fn phong(&self, normals: &[V3]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
        let a = self.diffuse(normals);
        let s = (0..self.res * self.res)
            .into_par_iter()
            .map(|t| {
                let mut s = [0.0; 3];
                if !self.mask[t] {
                    return s;
                }
                let n = normals[t];
                for (l, vis) in self.lights.lights.iter().zip(self.visibility.row(t)) {
                    if !vis || l.dir.dot(n) <= 0.0 {
                        continue;
                    }
                    let r = l.dir.reflect(n);
                    let lobe = r.dot(self.view[t]).max(0.0).powi(PHONG_EXPONENT);
                    for k in 0..3 {
                        s[k] += l.rgb[k] * lobe;
                    }
                }
                s
            })
            .collect();
        (a, s)
    }
}

fn read_vectors<S: Scalar>(t: &Tensor<S>, n: usize) -> Vec<V3> {
    let d = t.data();
    (0..n)
        .map(|i| V3::new(d[i].to_f64().unwrap(), d[n + i].to_f64().unwrap(), d[2 * n + i].to_f64().unwrap()))
        .collect()
}

fn read_scalars<S: Scalar>(t: &Tensor<S>) -> Vec<f64> {
    t.data().iter().map(|v| v.to_f64().unwrap()).collect()
}

/// Differentiable features `[6, R, R]` from normals `[3, R, R]` and
/// unclamped roughness `[1, R, R]`.
pub fn shade_features<'g, S: Scalar>(ctx: &Rc<ShadingContext>, normals: Var<'g, S>, beta: Var<'g, S>) -> Result<Var<'g, S>> {
    let r = ctx.res;
    if normals.shape() != [3, r, r] || beta.shape() != [1, r, r] {
        return Err(TensorError::Invalid {
            op: "shade_features",
            msg: format!("normals {:?} / roughness {:?} for resolution {r}", normals.shape(), beta.shape()),
        });
    }
    let n = read_vectors(&normals.value(), r * r);
    let out = ctx.features(&n, &read_scalars(&beta.value())).to_tensor();
    Ok(normals.graph().record(&[normals, beta], out, ShadeRule { ctx: Rc::clone(ctx) }))
}

struct ShadeRule {
    ctx: Rc<ShadingContext>,
}

impl<S: Scalar> Backward<S> for ShadeRule {
    fn name(&self) -> &'static str {
        "shade_features"
    }

    fn backward(&self, inputs: &[&Tensor<S>], _: &Tensor<S>, grad: &Tensor<S>, needs: &[bool]) -> Vec<Option<Tensor<S>>> {
        let r = self.ctx.res;
        let m = r * r;
        let normals = read_vectors(inputs[0], m);
        let beta = read_scalars(inputs[1]);
        let g = read_scalars(grad);
        let ctx: &ShadingContext = &self.ctx;
        let per: Vec<TexelGrad> = (0..m)
            .into_par_iter()
            .map(|t| {
                let gd = [g[t], g[m + t], g[2 * m + t]];
                let gs = [g[3 * m + t], g[4 * m + t], g[5 * m + t]];
                ctx.texel_grad(t, normals[t], beta[t], gd, gs)
            })
            .collect();
        let gn = needs[0].then(|| {
            let mut data = vec![S::zero(); 3 * m];
            for (t, p) in per.iter().enumerate() {
                data[t] = S::lit(p.normal.x);
                data[m + t] = S::lit(p.normal.y);
                data[2 * m + t] = S::lit(p.normal.z);
            }
            Tensor::from_vec(&[3, r, r], data).expect("shape")
        });
        let gb = needs[1].then(|| Tensor::from_vec(&[1, r, r], per.iter().map(|p| S::lit(p.beta)).collect()).expect("shape"));
        vec![gn, gb]
    }
}

/// `C_pb = C^d ⊙ T + C^s` from `[6, R, R]` features and a `[3, R, R]` texture.
pub fn compose_pbr<'g, S: Scalar>(features: Var<'g, S>, texture: Var<'g, S>) -> Result<Var<'g, S>> {
    features.slice_channels(0, 3)?.mul(texture)?.add(features.slice_channels(3, 6)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shading::Light;
    use crate::tensor::Graph;

    fn single_texel(view: V3, lights: Vec<Light>) -> ShadingContext {
        let nl = lights.len();
        ShadingContext {
            res: 1,
            mask: vec![true],
            view: vec![view],
            lights: LightSet::new(lights),
            visibility: Visibility::all_visible(1, nl),
        }
    }

    const UP: V3 = V3::new(0.0, 0.0, 1.0);

    #[test]
    fn unit_light_along_normal() {
        let ctx = single_texel(UP, vec![Light { dir: UP, rgb: [1.0; 3] }]);
        let f = ctx.features(&[UP], &[0.5]);
        assert_eq!(f.diffuse[0], [1.0; 3]);
        let expect = 5.09296 * 0.0401614 * 0.25;
        assert!((f.specular[0][0] - expect).abs() < 1e-4, "{:?}", f.specular[0]);
    }

    #[test]
    fn light_below_horizon_and_shadowed_give_zero() {
        let down = Light { dir: -UP, rgb: [1.0; 3] };
        let ctx = single_texel(UP, vec![down]);
        let f = ctx.features(&[UP], &[0.5]);
        assert_eq!((f.diffuse[0], f.specular[0]), ([0.0; 3], [0.0; 3]));
        let mut ctx = single_texel(UP, vec![Light { dir: UP, rgb: [1.0; 3] }]);
        ctx.visibility = Visibility { n_lights: 1, bits: vec![false] };
        let f = ctx.features(&[UP], &[0.5]);
        assert_eq!((f.diffuse[0], f.specular[0]), ([0.0; 3], [0.0; 3]));
    }

    #[test]
    fn backfacing_texel_has_no_specular() {
        let ctx = single_texel(-UP, vec![Light { dir: UP, rgb: [1.0; 3] }]);
        let f = ctx.features(&[UP], &[0.5]);
        assert_eq!(f.specular[0], [0.0; 3]);
        assert_eq!(f.diffuse[0], [1.0; 3]);
    }

    #[test]
    fn phong_mirror_and_perpendicular() {
        let l = V3::new(0.6, 0.0, 0.8);
        let mirror = l.reflect(UP);
        let ctx = single_texel(mirror, vec![Light { dir: l, rgb: [0.7, 0.2, 0.1] }]);
        let (a, s) = ctx.phong(&[UP]);
        for k in 0..3 {
            assert!((s[0][k] - [0.7, 0.2, 0.1][k]).abs() < 1e-12);
        }
        assert_eq!(a, ctx.features(&[UP], &[0.3]).diffuse);
        let perp = mirror.cross(V3::new(0.0, 1.0, 0.0)).normalized();
        let ctx = single_texel(perp, vec![Light { dir: l, rgb: [1.0; 3] }]);
        assert_eq!(ctx.phong(&[UP]).1[0], [0.0; 3]);
    }

    #[test]
    fn compose_identities() {
        let g = Graph::<f64>::new();
        let t = g.constant(Tensor::from_vec(&[3, 1, 2], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap());
        let zero = g.constant(Tensor::zeros(&[6, 1, 2]));
        assert_eq!(compose_pbr(zero, t).unwrap().value().max_abs(), 0.0);
        let mut f = Tensor::zeros(&[6, 1, 2]);
        f.data_mut()[..6].fill(1.0);
        let out = compose_pbr(g.constant(f), t).unwrap();
        assert_eq!(out.value().data(), t.value().data());
    }
}
