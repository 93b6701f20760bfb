//! A procedural 16-joint hand: a flattened palm tube plus five
//! three-segment finger tubes, each closed by domed caps, with one UV chart
//! per tube and per cap.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};

use super::{HandRig, Joint};
use crate::math::{Mat3, Rigid, V3};

#[derive(Clone, Debug, PartialEq)]
pub struct HandParams {
    pub palm_segments: usize,
    pub palm_rings: usize,
    pub finger_segments: usize,
    pub finger_rings: usize,
    pub cap_rings: usize,
    /// Half-width of the linear weight blend around each joint, mm.
    pub blend: f64,
}

impl Default for HandParams {
    fn default() -> Self {
        Self {
            palm_segments: 40,
            palm_rings: 12,
            finger_segments: 20,
            finger_rings: 16,
            cap_rings: 3,
            blend: 4.0,
        }
    }
}

struct Finger {
    base: V3,
    dir: V3,
    segments: [f64; 3],
    radius: f64,
}

fn fingers() -> [Finger; 5] {
    let up = V3::new(0.0, 1.0, 0.0);
    let f = |x: f64, segments: [f64; 3], radius: f64| Finger {
        base: V3::new(x, 92.0, 0.0),
        dir: up,
        segments,
        radius,
    };
    [
        Finger {
            base: V3::new(36.0, 24.0, 2.0),
            dir: V3::new(0.55, 0.8, 0.15).normalized(),
            segments: [36.0, 30.0, 26.0],
            radius: 10.5,
        },
        f(27.0, [42.0, 26.0, 20.0], 9.0),
        f(9.0, [46.0, 29.0, 21.0], 9.3),
        f(-9.0, [43.0, 27.0, 20.0], 8.8),
        f(-26.0, [34.0, 21.0, 18.0], 7.8),
    ]
}

const FINGER_OVERLAP: f64 = 10.0;

/// Accumulates vertices, faces and per-vertex weights.
struct Builder {
    n_joints: usize,
    vertices: Vec<V3>,
    uv: Vec<[f64; 2]>,
    weights: Vec<f64>,
    faces: Vec<[u32; 3]>,
    face_chart: Vec<u32>,
}

impl Builder {
    fn vertex(&mut self, p: V3, uv: [f64; 2], w: &[(usize, f64)]) -> u32 {
        self.vertices.push(p);
        self.uv.push(uv);
        let mut row = vec![0.0; self.n_joints];
        for &(j, x) in w {
            row[j] += x;
        }
        self.weights.extend(row);
        (self.vertices.len() - 1) as u32
    }

    /// Adds a triangle, flipped if needed so its normal points away from `inside`.
    fn tri(&mut self, mut f: [u32; 3], inside: V3, chart: u32) {
        let [a, b, c] = f.map(|i| self.vertices[i as usize]);
        let n = (b - a).cross(c - a);
        let centroid = (a + b + c) * (1.0 / 3.0);
        if n.dot(centroid - inside) < 0.0 {
            f.swap(1, 2);
        }
        self.faces.push(f);
        self.face_chart.push(chart);
    }
}

/// Straight elliptic tube from `start` along `dir`.
struct Tube {
    start: V3,
    dir: V3,
    e1: V3,
    e2: V3,
    length: f64,
    radius: Box<dyn Fn(f64) -> (f64, f64)>,
}

impl Tube {
    fn new(start: V3, dir: V3, length: f64, radius: Box<dyn Fn(f64) -> (f64, f64)>) -> Self {
        let rot = Mat3::align_y(dir);
        let e1 = rot.apply(V3::new(1.0, 0.0, 0.0));
        let e2 = dir.cross(e1);
        Self {
            start,
            dir,
            e1,
            e2,
            length,
            radius,
        }
    }

    fn ring_point(&self, t: f64, a: f64, scale: f64, lift: f64) -> V3 {
        let (rx, rz) = (self.radius)(t);
        self.start + self.dir * (t * self.length + lift) + self.e1 * (rx * scale * a.cos()) + self.e2 * (rz * scale * a.sin())
    }
}

struct Chart {
    id: u32,
    rect: [f64; 4],
}

#[allow(clippy::too_many_arguments)]
fn build_tube(
    b: &mut Builder,
    tube: &Tube,
    segments: usize,
    rings: usize,
    cap_rings: usize,
    body: Chart,
    caps: [Chart; 2],
    weight_at: &dyn Fn(f64) -> Vec<(usize, f64)>,
) {
    let [u0, v0, u1, v1] = body.rect;
    let mut grid = Vec::with_capacity((rings + 1) * (segments + 1));
    for k in 0..=rings {
        let t = k as f64 / rings as f64;
        let w = weight_at(t * tube.length);
        for i in 0..=segments {
            let a = TAU * i as f64 / segments as f64;
            let uv = [u0 + (u1 - u0) * i as f64 / segments as f64, v0 + (v1 - v0) * t];
            grid.push(b.vertex(tube.ring_point(t, a, 1.0, 0.0), uv, &w));
        }
    }
    let idx = |k: usize, i: usize| grid[k * (segments + 1) + i];
    for k in 0..rings {
        let inside = tube.start + tube.dir * (tube.length * (k as f64 + 0.5) / rings as f64);
        for i in 0..segments {
            b.tri([idx(k, i), idx(k, i + 1), idx(k + 1, i)], inside, body.id);
            b.tri([idx(k, i + 1), idx(k + 1, i + 1), idx(k + 1, i)], inside, body.id);
        }
    }

    for (end, chart) in caps.iter().enumerate() {
        let t = end as f64;
        let sign = if end == 0 { -1.0 } else { 1.0 };
        let (rx, rz) = (tube.radius)(t);
        let height = 0.5 * (rx + rz);
        let w = weight_at(t * tube.length);
        let [cu, cv, cr, _] = chart.rect;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for m in 0..cap_rings {
            let psi = FRAC_PI_2 * m as f64 / cap_rings as f64;
            let frac = 1.0 - m as f64 / cap_rings as f64;
            let row = (0..=segments)
                .map(|i| {
                    let a = TAU * i as f64 / segments as f64;
                    let p = tube.ring_point(t, a, psi.cos(), sign * height * psi.sin());
                    b.vertex(p, [cu + cr * frac * a.cos(), cv + cr * frac * a.sin()], &w)
                })
                .collect();
            rows.push(row);
        }
        let apex = b.vertex(tube.start + tube.dir * (t * tube.length + sign * height), [cu, cv], &w);
        let inside = tube.start + tube.dir * (t * tube.length);
        for m in 0..cap_rings - 1 {
            for i in 0..segments {
                let (r0, r1) = (&rows[m], &rows[m + 1]);
                b.tri([r0[i], r0[i + 1], r1[i]], inside, chart.id);
                b.tri([r0[i + 1], r1[i + 1], r1[i]], inside, chart.id);
            }
        }
        let last = &rows[cap_rings - 1];
        for i in 0..segments {
            b.tri([last[i], last[i + 1], apex], inside, chart.id);
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Builds the template hand at rest: palm along +y from the wrist at the
/// origin, palm face towards +z, thumb on the +x side.
pub fn procedural_hand(p: &HandParams) -> HandRig {
    let n_joints = 16;
    let mut b = Builder {
        n_joints,
        vertices: Vec::new(),
        uv: Vec::new(),
        weights: Vec::new(),
        faces: Vec::new(),
        face_chart: Vec::new(),
    };
    let mut joints = vec![Joint {
        parent: None,
        rest: Rigid::IDENTITY,
    }];

    let cap_chart = |k: u32| Chart {
        id: 6 + k,
        rect: [0.02 + (k as f64 + 0.5) * (0.96 / 12.0), 0.92, 0.035, 0.0],
    };

    let palm = Tube::new(
        V3::zero(),
        V3::new(0.0, 1.0, 0.0),
        90.0,
        Box::new(|t| (38.0 + 4.0 * t, 13.0 - 2.0 * t)),
    );
    build_tube(
        &mut b,
        &palm,
        p.palm_segments,
        p.palm_rings,
        p.cap_rings,
        Chart {
            id: 0,
            rect: [0.02, 0.02, 0.98, 0.38],
        },
        [cap_chart(0), cap_chart(1)],
        &|_| vec![(0, 1.0)],
    );

    for (f, finger) in fingers().iter().enumerate() {
        let first = joints.len();
        let rot = Mat3::align_y(finger.dir);
        let mut along = [0.0; 3];
        for (s, along_s) in along.iter_mut().enumerate() {
            *along_s = FINGER_OVERLAP + finger.segments[..s].iter().sum::<f64>();
            joints.push(Joint {
                parent: Some(if s == 0 { 0 } else { first + s - 1 }),
                rest: Rigid::new(rot, finger.base + finger.dir * finger.segments[..s].iter().sum::<f64>()),
            });
        }
        let length = FINGER_OVERLAP + finger.segments.iter().sum::<f64>();
        let r = finger.radius;
        let tube = Tube::new(
            finger.base - finger.dir * FINGER_OVERLAP,
            finger.dir,
            length,
            Box::new(move |t| {
                let rr = r * (1.0 - 0.2 * t);
                (rr, 0.85 * rr)
            }),
        );
        let blend = p.blend;
        let weight_at = move |s: f64| -> Vec<(usize, f64)> {
            // bone chain: root, then the three finger joints
            let chain = [0, first, first + 1, first + 2];
            let mut w = vec![(chain[0], 1.0)];
            for (i, &a) in along.iter().enumerate() {
                let x = smoothstep((s - (a - blend)) / (2.0 * blend));
                let prev = w.last().unwrap().1;
                let last = w.len() - 1;
                w[last].1 = prev * (1.0 - x);
                w.push((chain[i + 1], prev * x));
            }
            w.retain(|&(_, x)| x > 0.0);
            w
        };
        let u0 = 0.02 + f as f64 * 0.196;
        build_tube(
            &mut b,
            &tube,
            p.finger_segments,
            p.finger_rings,
            p.cap_rings,
            Chart {
                id: 1 + f as u32,
                rect: [u0, 0.42, u0 + 0.176, 0.84],
            },
            [cap_chart(2 + 2 * f as u32), cap_chart(3 + 2 * f as u32)],
            &weight_at,
        );
    }

    let weld = weld_groups(&b.vertices);
    HandRig {
        vertices: b.vertices,
        faces: b.faces,
        uv: b.uv,
        joints,
        weights: b.weights,
        weld,
        face_chart: b.face_chart,
    }
}

/// Maps every vertex to the first vertex at the same position (1e-6 mm grid).
pub(crate) fn weld_groups(vertices: &[V3]) -> Vec<u32> {
    let mut first: HashMap<[i64; 3], u32> = HashMap::new();
    vertices
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let key = v.to_array().map(|c| (c * 1e6).round() as i64);
            *first.entry(key).or_insert(i as u32)
        })
        .collect()
}


/// Single-joint latitude/longitude sphere with one UV chart.
pub fn uv_sphere(center: V3, radius: f64, segments: usize, rings: usize) -> HandRig {
    let mut vertices = Vec::new();
    let mut uv = Vec::new();
    for k in 0..=rings {
        let theta = std::f64::consts::PI * k as f64 / rings as f64;
        for i in 0..=segments {
            let phi = TAU * i as f64 / segments as f64;
            let d = V3::new(theta.sin() * phi.cos(), theta.cos(), theta.sin() * phi.sin());
            vertices.push(center + d * radius);
            uv.push([i as f64 / segments as f64, k as f64 / rings as f64]);
        }
    }
    let idx = |k: usize, i: usize| (k * (segments + 1) + i) as u32;
    let mut faces = Vec::new();
    for k in 0..rings {
        for i in 0..segments {
            let quad = [idx(k, i), idx(k, i + 1), idx(k + 1, i + 1), idx(k + 1, i)];
            for f in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                let [a, b, c] = f.map(|v| vertices[v as usize]);
                if (b - a).cross(c - a).norm() > 1e-12 {
                    faces.push(f);
                }
            }
        }
    }
    let n = vertices.len();
    HandRig {
        weld: weld_groups(&vertices),
        face_chart: vec![0; faces.len()],
        vertices,
        faces,
        uv,
        joints: vec![Joint {
            parent: None,
            rest: Rigid::IDENTITY,
        }],
        weights: vec![1.0; n],
    }
}
