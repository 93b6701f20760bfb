//! Pinhole camera and a z-buffered rasterizer that maps camera pixels to
//! bilinear texel taps. The lookup depends only on geometry and camera, so
//! the rendered image is a fixed linear function of the texture.

use std::rc::Rc;

use super::uvmaps::UvGeometryMaps;
use super::HandRig;
use crate::math::{Mat3, Rigid, V3};
use crate::scalar::Scalar;
use crate::tensor::{Backward, Result, Tensor, TensorError, Var};

/// Camera looking down its +z axis, +x right, +y down in the image.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_cam: Rigid,
}

pub const NEAR_PLANE_MM: f64 = 1.0;

impl Camera {
    pub fn look_at(eye: V3, target: V3, up: V3, focal: f64, width: usize, height: usize) -> Self {
        let z = (target - eye).normalized();
        let x = z.cross(up).normalized();
        let y = z.cross(x);
        let rot = Mat3([x.to_array(), y.to_array(), z.to_array()]);
        Self {
            focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            world_to_cam: Rigid::new(rot, -rot.apply(eye)),
        }
    }

    pub fn center(&self) -> V3 {
        self.world_to_cam.inverse().trans
    }

    /// Pixel coordinates and depth, or `None` in front of the near plane.
    pub fn project(&self, p: V3) -> Option<(f64, f64, f64)> {
        let c = self.world_to_cam.point(p);
        (c.z > NEAR_PLANE_MM).then(|| (self.focal * c.x / c.z + self.cx, self.focal * c.y / c.z + self.cy, c.z))
    }

    /// Unit direction from `p` towards the camera centre.
    pub fn view_dir(&self, p: V3) -> V3 {
        (self.center() - p).normalized()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.focal > 0.0) || self.width == 0 || self.height == 0 {
            return Err(format!("invalid camera: focal {} size {}x{}", self.focal, self.width, self.height));
        }
        Ok(())
    }
}

/// Per-pixel texel taps and depth for one (posed mesh, camera) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterLookup {
    pub width: usize,
    pub height: usize,
    pub res: usize,
    /// `offsets[p]..offsets[p + 1]` index `taps`.
    offsets: Vec<u32>,
    taps: Vec<(u32, f64)>,
    pub depth: Vec<f64>,
}

impl RasterLookup {
    pub fn build(rig: &HandRig, posed: &[V3], maps: &UvGeometryMaps, cam: &Camera) -> Self {
        let (w, h) = (cam.width, cam.height);
        let mut depth = vec![f64::INFINITY; w * h];
        let mut hit: Vec<Option<(u32, [f64; 3])>> = vec![None; w * h];
        let proj: Vec<Option<(f64, f64, f64)>> = posed.iter().map(|&p| cam.project(p)).collect();
        for (fi, f) in rig.faces.iter().enumerate() {
            let Some([a, b, c]) = f.iter().map(|&i| proj[i as usize]).collect::<Option<Vec<_>>>().map(|v| [v[0], v[1], v[2]]) else {
                continue;
            };
            let area = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
            if area.abs() < 1e-12 {
                continue;
            }
            let x0 = (a.0.min(b.0).min(c.0) - 0.5).floor().max(0.0) as usize;
            let x1 = ((a.0.max(b.0).max(c.0) - 0.5).ceil().max(0.0) as usize).min(w - 1);
            let y0 = (a.1.min(b.1).min(c.1) - 0.5).floor().max(0.0) as usize;
            let y1 = ((a.1.max(b.1).max(c.1) - 0.5).ceil().max(0.0) as usize).min(h - 1);
            for py in y0..=y1 {
                let sy = py as f64 + 0.5;
                for px in x0..=x1 {
                    let sx = px as f64 + 0.5;
                    let l1 = ((sx - a.0) * (c.1 - a.1) - (c.0 - a.0) * (sy - a.1)) / area;
                    let l2 = ((b.0 - a.0) * (sy - a.1) - (sx - a.0) * (b.1 - a.1)) / area;
                    let l0 = 1.0 - l1 - l2;
                    if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                        continue;
                    }
                    // perspective-correct barycentrics
                    let q = [l0 / a.2, l1 / b.2, l2 / c.2];
                    let inv_z = q[0] + q[1] + q[2];
                    let z = 1.0 / inv_z;
                    let p = py * w + px;
                    if z < depth[p] {
                        depth[p] = z;
                        hit[p] = Some((fi as u32, q.map(|v| v * z)));
                    }
                }
            }
        }

        let r = maps.res;
        let mut offsets = Vec::with_capacity(w * h + 1);
        let mut taps = Vec::new();
        offsets.push(0);
        for p in 0..w * h {
            if let Some((fi, bary)) = hit[p] {
                let f = rig.faces[fi as usize];
                let chart = rig.face_chart[fi as usize];
                let uv = (0..2).map(|k| (0..3).map(|i| bary[i] * rig.uv[f[i] as usize][k]).sum::<f64>()).collect::<Vec<_>>();
                if !push_taps(&mut taps, maps, chart, uv[0] * r as f64 - 0.5, uv[1] * r as f64 - 0.5) {
                    depth[p] = f64::INFINITY;
                }
            }
            offsets.push(taps.len() as u32);
        }
        Self {
            width: w,
            height: h,
            res: r,
            offsets,
            taps,
            depth,
        }
    }

    pub fn pixel_taps(&self, p: usize) -> &[(u32, f64)] {
        &self.taps[self.offsets[p] as usize..self.offsets[p + 1] as usize]
    }

    pub fn covered(&self, p: usize) -> bool {
        self.offsets[p + 1] > self.offsets[p]
    }

    pub fn coverage_count(&self) -> usize {
        (0..self.width * self.height).filter(|&p| self.covered(p)).count()
    }

    /// `[1, H, W]` 0/1 coverage mask.
    pub fn mask<S: Scalar>(&self) -> Tensor<S> {
        let data = (0..self.width * self.height)
            .map(|p| if self.covered(p) { S::one() } else { S::zero() })
            .collect();
        Tensor::from_vec(&[1, self.height, self.width], data).expect("mask shape")
    }

    /// Image `[C, H, W]` from a texture `[C, R, R]`; background is zero.
    pub fn render<S: Scalar>(&self, texture: &Tensor<S>) -> Result<Tensor<S>> {
        let (c, rh, rw) = texture.chw()?;
        if rh != self.res || rw != self.res {
            return Err(TensorError::ShapeMismatch {
                op: "rasterize",
                dim: "texture resolution".into(),
                expected: self.res,
                got: rh.max(rw),
            });
        }
        let (n, m) = (self.width * self.height, self.res * self.res);
        let src = texture.data();
        let mut out = vec![S::zero(); c * n];
        for p in 0..n {
            for &(t, w) in self.pixel_taps(p) {
                let w = S::lit(w);
                for ch in 0..c {
                    out[ch * n + p] += w * src[ch * m + t as usize];
                }
            }
        }
        Tensor::from_vec(&[c, self.height, self.width], out)
    }

    /// Adjoint of [`render`](Self::render).
    pub fn render_adjoint<S: Scalar>(&self, image: &Tensor<S>) -> Tensor<S> {
        let c = image.shape()[0];
        let (n, m) = (self.width * self.height, self.res * self.res);
        let src = image.data();
        let mut out = vec![S::zero(); c * m];
        for p in 0..n {
            for &(t, w) in self.pixel_taps(p) {
                let w = S::lit(w);
                for ch in 0..c {
                    out[ch * m + t as usize] += w * src[ch * n + p];
                }
            }
        }
        Tensor::from_vec(&[c, self.res, self.res], out).expect("texture shape")
    }
}

/// Bilinear taps at continuous texel coordinates restricted to valid texels
/// of `chart`, renormalized; falls back to the nearest such texel within two
/// texels. Returns false when nothing usable is found.
fn push_taps(taps: &mut Vec<(u32, f64)>, maps: &UvGeometryMaps, chart: u32, x: f64, y: f64) -> bool {
    let r = maps.res as i64;
    let ok = |c: i64, rr: i64| -> Option<usize> {
        if c < 0 || rr < 0 || c >= r || rr >= r {
            return None;
        }
        let t = (rr * r + c) as usize;
        (maps.mask[t] && maps.chart[t] == chart).then_some(t)
    };
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let start = taps.len();
    let mut total = 0.0;
    for (dx, dy, w) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        if let Some(t) = ok(x0 + dx, y0 + dy) {
            if w > 0.0 {
                taps.push((t as u32, w));
                total += w;
            }
        }
    }
    if total > 0.0 {
        for tap in &mut taps[start..] {
            tap.1 /= total;
        }
        return true;
    }
    taps.truncate(start);
    let (cx, cy) = (x.round() as i64, y.round() as i64);
    let mut best: Option<(f64, usize)> = None;
    for dy in -2..=2 {
        for dx in -2..=2 {
            if let Some(t) = ok(cx + dx, cy + dy) {
                let d = ((cx + dx) as f64 - x).powi(2) + ((cy + dy) as f64 - y).powi(2);
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, t));
                }
            }
        }
    }
    match best {
        Some((_, t)) => {
            taps.push((t as u32, 1.0));
            true
        }
        None => false,
    }
}

/// Differentiable rasterization of a `[C, R, R]` texture.
pub fn rasterize<'g, S: Scalar>(lookup: &Rc<RasterLookup>, texture: Var<'g, S>) -> Result<Var<'g, S>> {
    let out = lookup.render(&texture.value())?;
    Ok(texture.graph().record(&[texture], out, RasterRule { lookup: Rc::clone(lookup) }))
}

struct RasterRule {
    lookup: Rc<RasterLookup>,
}

impl<S: Scalar> Backward<S> for RasterRule {
    fn name(&self) -> &'static str {
        "rasterize"
    }

    fn backward(&self, _: &[&Tensor<S>], _: &Tensor<S>, grad: &Tensor<S>, _: &[bool]) -> Vec<Option<Tensor<S>>> {
        vec![Some(self.lookup.render_adjoint(grad))]
    }
}
