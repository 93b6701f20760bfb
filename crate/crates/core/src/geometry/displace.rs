//! Displacement along the coarse normal and normal re-estimation from the
//! refined position map.
//!
//! The refined normal of a texel is `normalize(n + m(x̂) - m(x))`, where `n`
//! is the interpolated coarse normal and `m(·)` the unit normal estimated by
//! central differences of a position map within the texel's chart. With zero
//! displacement this returns `n` exactly; on flat regions it is the
//! finite-difference normal of the refined surface.

use std::rc::Rc;

use super::uvmaps::UvGeometryMaps;
use crate::math::V3;
use crate::scalar::Scalar;
use crate::tensor::{Backward, Result, Tensor, TensorError, Var};

pub const MAX_DISPLACEMENT_MM: f64 = 3.0;

/// `3 (2 sigmoid(raw) - 1)` millimetres, kept strictly inside `(-3, 3)`.
pub fn displacement_activation<S: Scalar>(raw: S) -> S {
    let three = S::lit(MAX_DISPLACEMENT_MM);
    let bound = three * (S::one() - S::epsilon());
    (three * (raw * S::lit(0.5)).tanh()).max(-bound).min(bound)
}

fn displacement_derivative<S: Scalar>(raw: S, out: S) -> S {
    let three = S::lit(MAX_DISPLACEMENT_MM);
    if out.abs() >= three * (S::one() - S::epsilon()) {
        return S::zero();
    }
    let t = (raw * S::lit(0.5)).tanh();
    three * S::lit(0.5) * (S::one() - t * t)
}

impl<'g, S: Scalar> Var<'g, S> {
    /// Elementwise [`displacement_activation`].
    pub fn displacement(&self) -> Var<'g, S> {
        self.unary("displacement", displacement_activation, displacement_derivative)
    }
}

/// Precomputed finite-difference stencils of a coarse map.
#[derive(Debug)]
pub struct RefineNormals {
    res: usize,
    position: Vec<V3>,
    normal: Vec<V3>,
    mask: Vec<bool>,
    /// `[right, left, down, up]` texels, or `None` to keep the coarse normal.
    stencil: Vec<Option<[u32; 4]>>,
    /// Orientation making `m` agree with the coarse normal.
    sign: Vec<f64>,
    coarse_m: Vec<V3>,
}

impl RefineNormals {
    pub fn new(maps: &UvGeometryMaps) -> Self {
        let r = maps.res;
        let same = |t: usize, o: usize| maps.mask[o] && maps.chart[o] == maps.chart[t];
        let mut stencil = vec![None; r * r];
        for row in 0..r {
            for col in 0..r {
                let t = row * r + col;
                if !maps.mask[t] {
                    continue;
                }
                let pick = |plus: Option<usize>, minus: Option<usize>| -> Option<(usize, usize)> {
                    let p = plus.filter(|&o| same(t, o));
                    let m = minus.filter(|&o| same(t, o));
                    match (p, m) {
                        (None, None) => None,
                        (p, m) => Some((p.unwrap_or(t), m.unwrap_or(t))),
                    }
                };
                let right = (col + 1 < r).then(|| t + 1);
                let left = (col > 0).then(|| t - 1);
                let down = (row + 1 < r).then(|| t + r);
                let up = (row > 0).then(|| t - r);
                if let (Some((a, b)), Some((c, d))) = (pick(right, left), pick(down, up)) {
                    stencil[t] = Some([a as u32, b as u32, c as u32, d as u32]);
                }
            }
        }
        let mut rn = Self {
            res: r,
            position: maps.position.clone(),
            normal: maps.normal.clone(),
            mask: maps.mask.clone(),
            stencil,
            sign: vec![1.0; r * r],
            coarse_m: vec![V3::zero(); r * r],
        };
        for t in 0..r * r {
            if let Some(s) = rn.stencil[t] {
                let c = rn.cross_at(&rn.position, s);
                if c.norm() < 1e-12 {
                    rn.stencil[t] = None;
                    continue;
                }
                rn.sign[t] = if c.dot(rn.normal[t]) < 0.0 { -1.0 } else { 1.0 };
                rn.coarse_m[t] = (c * rn.sign[t]).normalized();
            }
        }
        rn
    }

    pub fn res(&self) -> usize {
        self.res
    }

    fn cross_at(&self, x: &[V3], s: [u32; 4]) -> V3 {
        let [r, l, d, u] = s.map(|i| x[i as usize]);
        (r - l).cross(d - u)
    }

    fn displaced(&self, disp: &[f64]) -> Vec<V3> {
        self.position
            .iter()
            .zip(&self.normal)
            .zip(disp)
            .map(|((&x, &n), &d)| x + n * d)
            .collect()
    }

    /// Refined normals for per-texel displacements (mm); zero off the mask.
    pub fn forward(&self, disp: &[f64]) -> Vec<V3> {
        let x = self.displaced(disp);
        (0..self.res * self.res)
            .map(|t| {
                if !self.mask[t] {
                    return V3::zero();
                }
                match self.stencil[t] {
                    None => self.normal[t],
                    Some(s) => {
                        let m = (self.cross_at(&x, s) * self.sign[t]).normalized();
                        (self.normal[t] - self.coarse_m[t] + m).normalized()
                    }
                }
            })
            .collect()
    }

    /// Vector-Jacobian product: gradient w.r.t. the displacement map given
    /// the gradient w.r.t. the refined normals.
    pub fn backward(&self, disp: &[f64], grad: &[V3]) -> Vec<f64> {
        let x = self.displaced(disp);
        let mut out = vec![0.0; disp.len()];
        for t in 0..self.res * self.res {
            let Some(s) = self.stencil[t] else { continue };
            if !self.mask[t] {
                continue;
            }
            let [r, l, d, u] = s.map(|i| i as usize);
            let a = x[r] - x[l];
            let b = x[d] - x[u];
            let c = a.cross(b) * self.sign[t];
            let cn = c.norm();
            if cn == 0.0 {
                continue;
            }
            let m = c * (1.0 / cn);
            let v = self.normal[t] - self.coarse_m[t] + m;
            let vn = v.norm();
            let nh = v * (1.0 / vn);
            let g = grad[t];
            let gv = (g - nh * nh.dot(g)) * (1.0 / vn);
            let gc = (gv - m * m.dot(gv)) * (self.sign[t] / cn);
            let ga = b.cross(gc);
            let gb = gc.cross(a);
            out[r] += ga.dot(self.normal[r]);
            out[l] -= ga.dot(self.normal[l]);
            out[d] += gb.dot(self.normal[d]);
            out[u] -= gb.dot(self.normal[u]);
        }
        out
    }
}

/// Differentiable refined normals `[3, R, R]` from a displacement map `[1, R, R]` (mm).
pub fn refined_normals<'g, S: Scalar>(rn: &Rc<RefineNormals>, disp: Var<'g, S>) -> Result<Var<'g, S>> {
    let r = rn.res;
    if disp.shape() != [1, r, r] {
        return Err(TensorError::Invalid {
            op: "refined_normals",
            msg: format!("displacement shape {:?}, expected [1, {r}, {r}]", disp.shape()),
        });
    }
    let d: Vec<f64> = disp.value().data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
    let out = to_planar::<S>(&rn.forward(&d), r);
    Ok(disp.graph().record(&[disp], out, RefineRule { rn: Rc::clone(rn) }))
}

struct RefineRule {
    rn: Rc<RefineNormals>,
}

impl<S: Scalar> Backward<S> for RefineRule {
    fn name(&self) -> &'static str {
        "refined_normals"
    }

    fn backward(&self, inputs: &[&Tensor<S>], _: &Tensor<S>, grad: &Tensor<S>, _: &[bool]) -> Vec<Option<Tensor<S>>> {
        let n = self.rn.res * self.rn.res;
        let d: Vec<f64> = inputs[0].data().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        let g = grad.data();
        let gv: Vec<V3> = (0..n)
            .map(|t| V3::new(g[t].to_f64().unwrap(), g[n + t].to_f64().unwrap(), g[2 * n + t].to_f64().unwrap()))
            .collect();
        let out = self.rn.backward(&d, &gv).into_iter().map(S::lit).collect();
        vec![Some(Tensor::from_vec(inputs[0].shape(), out).expect("shape"))]
    }
}

pub(crate) fn to_planar<S: Scalar>(field: &[V3], r: usize) -> Tensor<S> {
    let n = r * r;
    let mut data = vec![S::zero(); 3 * n];
    for (t, v) in field.iter().enumerate() {
        data[t] = S::lit(v.x);
        data[n + t] = S::lit(v.y);
        data[2 * n + t] = S::lit(v.z);
    }
    Tensor::from_vec(&[3, r, r], data).expect("planar shape")
}

/// Non-differentiable refinement: `x̂ = x + δd n` with `δd` from the raw map,
/// and normals re-estimated from `x̂`.
pub fn apply_displacement<S: Scalar>(maps: &UvGeometryMaps, raw: &Tensor<S>) -> UvGeometryMaps {
    assert_eq!(raw.len(), maps.len(), "displacement map size");
    let disp: Vec<f64> = raw
        .data()
        .iter()
        .zip(&maps.mask)
        .map(|(&v, &m)| if m { displacement_activation(v.to_f64().unwrap_or(0.0)) } else { 0.0 })
        .collect();
    let rn = RefineNormals::new(maps);
    let mut out = maps.clone();
    out.normal = rn.forward(&disp);
    for ((p, n), d) in out.position.iter_mut().zip(&maps.normal).zip(&disp) {
        *p += *n * *d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{procedural_hand, unwrap, HandParams, HandRig, Joint};
    use crate::math::Rigid;
    use std::f64::consts::TAU;

    fn plane(size: f64) -> HandRig {
        let uv = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        HandRig {
            vertices: uv.iter().map(|t: &[f64; 2]| V3::new(t[0] * size, t[1] * size, 0.0)).collect(),
            faces: vec![[0, 1, 2], [0, 2, 3]],
            face_chart: vec![0, 0],
            uv,
            joints: vec![Joint { parent: None, rest: Rigid::IDENTITY }],
            weights: vec![1.0; 4],
            weld: vec![0, 1, 2, 3],
        }
    }

    fn logit_of_disp(d: f64) -> f64 {
        let p = (d / 3.0 + 1.0) / 2.0;
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn activation_is_bounded_and_centered() {
        assert_eq!(displacement_activation(0.0f64), 0.0);
        let hi = displacement_activation(1e4f32);
        assert!(hi < 3.0 && hi > 2.9999);
        assert!(displacement_activation(-1e4f64) > -3.0);
        assert!(displacement_activation(1.0f64) < displacement_activation(2.0f64));
    }

    #[test]
    fn zero_raw_keeps_maps() {
        let rig = procedural_hand(&HandParams::default());
        let maps = unwrap(&rig, &rig.vertices, 64);
        let out = apply_displacement(&maps, &Tensor::<f32>::zeros(&[1, 64, 64]));
        for (a, b) in out.normal.iter().zip(&maps.normal) {
            assert!((*a - *b).norm() < 1e-4);
        }
        assert_eq!(out.position, maps.position);
    }

    #[test]
    fn sine_displacement_matches_analytic_normals() {
        let (size, amp, res) = (100.0, 1.0, 256);
        let rig = plane(size);
        let maps = unwrap(&rig, &rig.vertices, res);
        let raw: Vec<f64> = (0..res * res)
            .map(|t| {
                let u = ((t % res) as f64 + 0.5) / res as f64;
                logit_of_disp(amp * (TAU * u).sin())
            })
            .collect();
        let out = apply_displacement(&maps, &Tensor::from_vec(&[1, res, res], raw).unwrap());
        let mut worst = 0.0f64;
        for t in 0..res * res {
            let u = ((t % res) as f64 + 0.5) / res as f64;
            let slope = amp * TAU / size * (TAU * u).cos();
            let analytic = V3::new(-slope, 0.0, 1.0).normalized();
            worst = worst.max((out.normal[t] - analytic).norm());
        }
        assert!(worst < 0.02, "{worst}");
    }

    #[test]
    fn refined_normals_are_unit() {
        let rig = procedural_hand(&HandParams::default());
        let maps = unwrap(&rig, &rig.vertices, 64);
        let raw: Vec<f32> = (0..64 * 64).map(|t| ((t * 7919) % 13) as f32 / 3.0 - 2.0).collect();
        let out = apply_displacement(&maps, &Tensor::from_vec(&[1, 64, 64], raw).unwrap());
        for (n, &m) in out.normal.iter().zip(&out.mask) {
            if m {
                assert!((n.norm() - 1.0).abs() < 1e-3);
            }
        }
    }
}
