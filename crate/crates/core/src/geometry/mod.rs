//! Articulated hand geometry: skinning, UV-space maps, displacement,
//! shadow-ray visibility and rasterization.
//!
//! Mesh-side quantities are `f64` millimetres. Texture-space maps are
//! indexed `row * R + col` with texel centres at `((col + 0.5) / R, (row + 0.5) / R)`
//! in UV.

mod bvh;
mod displace;
mod io;
mod procedural;
mod raster;
mod uvmaps;

pub use bvh::{Bvh, ray_triangle, SHADOW_EPSILON};
pub use displace::{MAX_DISPLACEMENT_MM, apply_displacement, displacement_activation, refined_normals, RefineNormals};
pub use io::{read_obj, read_rig, read_rig_sidecar, write_obj, write_rig, write_rig_sidecar, ObjMesh, Sidecar};
pub use procedural::{procedural_hand, uv_sphere, HandParams};
pub use raster::{rasterize, Camera, RasterLookup};
pub use uvmaps::{unwrap, UvGeometryMaps};

use crate::math::{Affine, Mat3, Rigid, V3};

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("pose has {got} joints, rig has {expected}")]
    JointCount { expected: usize, got: usize },
    #[error("invalid rig: {0}")]
    InvalidRig(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    /// `None` only for joint 0.
    pub parent: Option<usize>,
    /// Joint frame in world space at rest.
    pub rest: Rigid,
}

/// Template mesh with skeleton and dense skinning weights.
///
/// Vertices on UV seams are duplicated, so positions and UVs share one index
/// space; `weld` groups duplicates that must share a shading normal.
#[derive(Clone, Debug, PartialEq)]
pub struct HandRig {
    pub vertices: Vec<V3>,
    pub faces: Vec<[u32; 3]>,
    pub uv: Vec<[f64; 2]>,
    pub joints: Vec<Joint>,
    /// `n_V x J`, row-major.
    pub weights: Vec<f64>,
    /// Representative vertex of each vertex's position group.
    pub weld: Vec<u32>,
    /// UV chart id per face.
    pub face_chart: Vec<u32>,
}

impl HandRig {
    pub fn n_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn weight_row(&self, v: usize) -> &[f64] {
        let j = self.joints.len();
        &self.weights[v * j..(v + 1) * j]
    }

    /// Checks index ranges, UV bounds, weight normalization and the skeleton tree.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        let nj = self.joints.len();
        let bad = |m: String| Err(GeometryError::InvalidRig(m));
        if nj == 0 {
            return bad("no joints".into());
        }
        if self.uv.len() != nv || self.weights.len() != nv * nj || self.weld.len() != nv {
            return bad("per-vertex array lengths disagree".into());
        }
        if self.face_chart.len() != self.faces.len() {
            return bad("face chart ids missing".into());
        }
        if let Some(f) = self.faces.iter().find(|f| f.iter().any(|&i| i as usize >= nv)) {
            return bad(format!("face {f:?} indexes past {nv} vertices"));
        }
        if let Some(t) = self.uv.iter().find(|t| t.iter().any(|c| !(0.0..=1.0).contains(c))) {
            return bad(format!("uv {t:?} outside the unit square"));
        }
        for v in 0..nv {
            let row = self.weight_row(v);
            let s: f64 = row.iter().sum();
            if row.iter().any(|&w| w < 0.0) || (s - 1.0).abs() > 1e-6 {
                return bad(format!("weight row {v} sums to {s}"));
            }
        }
        if self.joints[0].parent.is_some() {
            return bad("joint 0 must be the root".into());
        }
        for (j, joint) in self.joints.iter().enumerate().skip(1) {
            match joint.parent {
                Some(p) if p < j => {}
                _ => return bad(format!("joint {j} parent must precede it")),
            }
        }
        Ok(())
    }
}

/// Per-joint Euler rotations (local frame, radians) and a global rigid transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub angles: Vec<[f64; 3]>,
    pub global: Rigid,
}

impl Pose {
    pub fn rest(n_joints: usize) -> Self {
        Self {
            angles: vec![[0.0; 3]; n_joints],
            global: Rigid::IDENTITY,
        }
    }

    /// Flattened angles, the network's pose input.
    pub fn to_vec(&self) -> Vec<f32> {
        self.angles.iter().flatten().map(|&a| a as f32).collect()
    }
}

/// World transforms of each joint relative to its rest frame.
pub fn skinning_transforms(rig: &HandRig, pose: &Pose) -> Result<Vec<Rigid>> {
    let nj = rig.n_joints();
    if pose.angles.len() != nj {
        return Err(GeometryError::JointCount {
            expected: nj,
            got: pose.angles.len(),
        });
    }
    let mut world: Vec<Rigid> = Vec::with_capacity(nj);
    for (j, joint) in rig.joints.iter().enumerate() {
        let local_rest = match joint.parent {
            Some(p) => rig.joints[p].rest.inverse().compose(&joint.rest),
            None => joint.rest,
        };
        let local = local_rest.compose(&Rigid::new(Mat3::from_euler(pose.angles[j]), V3::zero()));
        let w = match joint.parent {
            Some(p) => world[p].compose(&local),
            None => local,
        };
        world.push(w);
    }
    Ok(world
        .iter()
        .zip(&rig.joints)
        .map(|(w, joint)| pose.global.compose(&w.compose(&joint.rest.inverse())))
        .collect())
}

/// Linear blend skinning: `v' = sum_j w_j T_j v`.
pub fn blend(vertices: &[V3], weights: &[f64], transforms: &[Rigid]) -> Vec<V3> {
    let nj = transforms.len();
    let mats: Vec<Affine> = transforms.iter().map(Affine::from_rigid).collect();
    vertices
        .iter()
        .enumerate()
        .map(|(v, &p)| {
            let mut m = Affine::default();
            for (j, mat) in mats.iter().enumerate() {
                let w = weights[v * nj + j];
                if w != 0.0 {
                    m.add_scaled(mat, w);
                }
            }
            m.point(p)
        })
        .collect()
}

pub fn skin(rig: &HandRig, pose: &Pose) -> Result<Vec<V3>> {
    let t = skinning_transforms(rig, pose)?;
    Ok(blend(&rig.vertices, &rig.weights, &t))
}

/// Area-weighted vertex normals, averaged over weld groups.
pub fn vertex_normals(rig: &HandRig, positions: &[V3]) -> Vec<V3> {
    let mut acc = vec![V3::zero(); positions.len()];
    for f in &rig.faces {
        let [a, b, c] = f.map(|i| positions[i as usize]);
        // cross product length is twice the area
        let n = (b - a).cross(c - a);
        for &i in f {
            acc[rig.weld[i as usize] as usize] += n;
        }
    }
    rig.weld.iter().map(|&g| acc[g as usize].normalized()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn two_joint_rig(vertices: Vec<V3>, weights: Vec<f64>) -> HandRig {
        let n = vertices.len();
        HandRig {
            uv: vec![[0.5, 0.5]; n],
            weld: (0..n as u32).collect(),
            vertices,
            faces: vec![],
            face_chart: vec![],
            joints: vec![
                Joint { parent: None, rest: Rigid::IDENTITY },
                Joint {
                    parent: Some(0),
                    rest: Rigid::translation(V3::new(0.0, 10.0, 0.0)),
                },
            ],
            weights,
        }
    }

    #[test]
    fn rest_pose_is_identity() {
        let rig = procedural_hand(&HandParams::default());
        let posed = skin(&rig, &Pose::rest(rig.n_joints())).unwrap();
        for (a, b) in posed.iter().zip(&rig.vertices) {
            assert!((*a - *b).norm() < 1e-9);
        }
    }

    #[test]
    fn one_hot_vertex_follows_joint_rotation() {
        let rig = two_joint_rig(vec![V3::new(1.0, 0.0, 0.0)], vec![1.0, 0.0]);
        let mut pose = Pose::rest(2);
        pose.angles[0] = [0.0, 0.0, FRAC_PI_2];
        let p = skin(&rig, &pose).unwrap()[0];
        assert!((p - V3::new(0.0, 1.0, 0.0)).norm() < 1e-12, "{p:?}");
    }

    #[test]
    fn half_weights_blend_translation() {
        let v = V3::new(3.0, 1.0, -2.0);
        let out = blend(&[v], &[0.5, 0.5], &[Rigid::IDENTITY, Rigid::translation(V3::new(2.0, 0.0, 0.0))]);
        assert!((out[0] - (v + V3::new(1.0, 0.0, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn joint_count_mismatch_is_rejected() {
        let rig = two_joint_rig(vec![V3::zero()], vec![1.0, 0.0]);
        assert!(matches!(skin(&rig, &Pose::rest(3)), Err(GeometryError::JointCount { expected: 2, got: 3 })));
    }

    #[test]
    fn one_hot_subsets_move_rigidly() {
        let rig = procedural_hand(&HandParams::default());
        let mut pose = Pose::rest(rig.n_joints());
        for (j, a) in pose.angles.iter_mut().enumerate() {
            *a = [0.3 * (j as f64).sin(), 0.1, -0.2 * (j as f64).cos()];
        }
        let t = skinning_transforms(&rig, &pose).unwrap();
        let posed = skin(&rig, &pose).unwrap();
        let nj = rig.n_joints();
        for v in 0..rig.vertices.len() {
            let row = rig.weight_row(v);
            if let Some(j) = (0..nj).find(|&j| row[j] == 1.0) {
                assert!((posed[v] - t[j].point(rig.vertices[v])).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn procedural_rig_is_valid() {
        let rig = procedural_hand(&HandParams::default());
        rig.validate().unwrap();
        assert_eq!(rig.n_joints(), 16);
        assert!(rig.vertices.len() > 1500 && rig.vertices.len() < 4000, "{}", rig.vertices.len());
    }
}
