use super::{vertex_normals, HandRig};
use crate::math::V3;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const NO_CHART: u32 = u32::MAX;

/// Texel-aligned position and normal maps of a posed mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct UvGeometryMaps {
    pub res: usize,
    pub position: Vec<V3>,
    pub normal: Vec<V3>,
    pub mask: Vec<bool>,
    /// Chart id per texel, [`NO_CHART`] where invalid.
    pub chart: Vec<u32>,
    pub face: Vec<u32>,
    /// Faces skipped because their UV triangle has (near) zero area.
    pub degenerate_faces: usize,
}

impl UvGeometryMaps {
    pub fn len(&self) -> usize {
        self.res * self.res
    }

    pub fn is_empty(&self) -> bool {
        self.res == 0
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `[1, R, R]` mask as 0/1 values.
    pub fn mask_tensor<S: Scalar>(&self) -> Tensor<S> {
        let data = self.mask.iter().map(|&m| if m { S::one() } else { S::zero() }).collect();
        Tensor::from_vec(&[1, self.res, self.res], data).expect("mask shape")
    }

    /// `[3, R, R]` planar copy of a per-texel vector field.
    pub fn planar<S: Scalar>(&self, field: &[V3]) -> Tensor<S> {
        let n = self.len();
        let mut data = vec![S::zero(); 3 * n];
        for (t, v) in field.iter().enumerate() {
            for c in 0..3 {
                data[c * n + t] = S::lit(v.axis(c));
            }
        }
        Tensor::from_vec(&[3, self.res, self.res], data).expect("planar shape")
    }
}

/// Rasterizes every face into UV space at resolution `res`, interpolating
/// posed positions and area-weighted vertex normals barycentrically.
pub fn unwrap(rig: &HandRig, posed: &[V3], res: usize) -> UvGeometryMaps {
    let normals = vertex_normals(rig, posed);
    let n = res * res;
    let mut maps = UvGeometryMaps {
        res,
        position: vec![V3::zero(); n],
        normal: vec![V3::zero(); n],
        mask: vec![false; n],
        chart: vec![NO_CHART; n],
        face: vec![NO_CHART; n],
        degenerate_faces: 0,
    };
    let r = res as f64;
    for (fi, f) in rig.faces.iter().enumerate() {
        let [a, b, c] = f.map(|i| rig.uv[i as usize]);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if area.abs() < 1e-14 {
            maps.degenerate_faces += 1;
            continue;
        }
        let lo = |k: usize| ((a[k].min(b[k]).min(c[k]) * r - 0.5).floor().max(0.0)) as usize;
        let hi = |k: usize| ((a[k].max(b[k]).max(c[k]) * r - 0.5).ceil().min(r - 1.0)) as usize;
        for row in lo(1)..=hi(1) {
            let v = (row as f64 + 0.5) / r;
            for col in lo(0)..=hi(0) {
                let u = (col as f64 + 0.5) / r;
                let w1 = ((u - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (v - a[1])) / area;
                let w2 = ((b[0] - a[0]) * (v - a[1]) - (u - a[0]) * (b[1] - a[1])) / area;
                let w0 = 1.0 - w1 - w2;
                const EPS: f64 = -1e-9;
                if w0 < EPS || w1 < EPS || w2 < EPS {
                    continue;
                }
                let t = row * res + col;
                if maps.mask[t] {
                    continue;
                }
                let [i0, i1, i2] = f.map(|i| i as usize);
                maps.position[t] = posed[i0] * w0 + posed[i1] * w1 + posed[i2] * w2;
                maps.normal[t] = (normals[i0] * w0 + normals[i1] * w1 + normals[i2] * w2).normalized();
                maps.mask[t] = true;
                maps.chart[t] = rig.face_chart[fi];
                maps.face[t] = fi as u32;
            }
        }
    }
    if maps.degenerate_faces > 0 {
        log::warn!("unwrap: skipped {} faces with zero UV area", maps.degenerate_faces);
    }
    maps
}
