//! Bounding-volume hierarchy for any-hit shadow rays.

use crate::math::V3;

/// Offset of shadow-ray origins along the surface normal, mm.
pub const SHADOW_EPSILON: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    lo: V3,
    hi: V3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            lo: V3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            hi: V3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: V3) {
        self.lo = self.lo.min(p);
        self.hi = self.hi.max(p);
    }

    fn union(&mut self, o: &Aabb) {
        self.grow(o.lo);
        self.grow(o.hi);
    }

    /// Slab test against a ray with precomputed inverse direction.
    fn hit(&self, o: V3, inv: V3, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let ta = (self.lo.axis(a) - o.axis(a)) * inv.axis(a);
            let tb = (self.hi.axis(a) - o.axis(a)) * inv.axis(a);
            let (n, f) = if ta < tb { (ta, tb) } else { (tb, ta) };
            // NaN from 0 * inf leaves the bound unchanged
            if n > t0 {
                t0 = n;
            }
            if f < t1 {
                t1 = f;
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: `first..first + count` into `order`; inner: children `left`, `left + 1`.
    first: u32,
    count: u32,
    left: u32,
}

/// Static triangle BVH with median splits.
#[derive(Clone, Debug)]
pub struct Bvh {
    tris: Vec<[V3; 3]>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

/// Möller–Trumbore intersection distance along `dir`, if positive.
pub fn ray_triangle(o: V3, dir: V3, tri: &[V3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > 1e-9).then_some(t)
}

impl Bvh {
    pub fn new(positions: &[V3], faces: &[[u32; 3]]) -> Self {
        let tris: Vec<[V3; 3]> = faces.iter().map(|f| f.map(|i| positions[i as usize])).collect();
        let mut bvh = Self {
            order: (0..tris.len() as u32).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            bvh.nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: bvh.tris.len() as u32,
                left: 0,
            });
            bvh.build(0);
        }
        bvh
    }

    fn centroid(&self, t: u32) -> V3 {
        let [a, b, c] = self.tris[t as usize];
        (a + b + c) * (1.0 / 3.0)
    }

    fn build(&mut self, node: usize) {
        let (first, count) = (self.nodes[node].first as usize, self.nodes[node].count as usize);
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[first..first + count] {
            for p in self.tris[t as usize] {
                bounds.grow(p);
            }
            cbounds.grow(self.centroid(t));
        }
        self.nodes[node].bounds = bounds;
        if count <= LEAF_SIZE {
            return;
        }
        let ext = cbounds.hi - cbounds.lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = count / 2;
        let mut slice: Vec<u32> = self.order[first..first + count].to_vec();
        // total order so construction is deterministic
        slice.sort_by(|&a, &b| {
            self.centroid(a)
                .axis(axis)
                .total_cmp(&self.centroid(b).axis(axis))
                .then(a.cmp(&b))
        });
        self.order[first..first + count].copy_from_slice(&slice);
        let left = self.nodes.len();
        for (f, c) in [(first, mid), (first + mid, count - mid)] {
            self.nodes.push(Node {
                bounds: Aabb::empty(),
                first: f as u32,
                count: c as u32,
                left: 0,
            });
        }
        self.nodes[node].left = left as u32;
        self.nodes[node].count = 0;
        self.build(left);
        self.build(left + 1);
        let (a, b) = (self.nodes[left].bounds, self.nodes[left + 1].bounds);
        let mut u = a;
        u.union(&b);
        self.nodes[node].bounds = u;
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// True if the ray `origin + t dir`, `t > 0`, hits any triangle.
    pub fn occluded(&self, origin: V3, dir: V3) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = V3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !node.bounds.hit(origin, inv, f64::INFINITY) {
                continue;
            }
            if node.count > 0 {
                let (f, c) = (node.first as usize, node.count as usize);
                if self.order[f..f + c]
                    .iter()
                    .any(|&t| ray_triangle(origin, dir, &self.tris[t as usize]).is_some())
                {
                    return true;
                }
            } else {
                stack[top] = node.left;
                stack[top + 1] = node.left + 1;
                top += 2;
            }
        }
        false
    }

    /// Binary light visibility of a surface point with normal `n`.
    pub fn visibility(&self, point: V3, normal: V3, dir: V3) -> bool {
        !self.occluded(point + normal * SHADOW_EPSILON, dir)
    }
}
