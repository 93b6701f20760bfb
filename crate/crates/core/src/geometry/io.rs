//! Wavefront OBJ and the rig sidecar.
//!
//! The sidecar is line-oriented text, `#` starts a comment:
//!
//! ```text
//! joints <J>
//! joint <index> <parent or -1> <r00 r01 r02 r10 r11 r12 r20 r21 r22> <tx ty tz>
//! weights <n_V>
//! w <vertex> <joint>:<weight> [<joint>:<weight> ...]
//! charts <n_F>
//! c <chart id> [<chart id> ...]
//! ```
//!
//! Joint transforms are rest frames in world space. Vertex indices refer to
//! OBJ position indices (0-based); chart ids follow OBJ face order.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::procedural::weld_groups;
use super::{GeometryError, HandRig, Joint, Result};
use crate::math::{Mat3, Rigid, V3};

fn parse_err(line: usize, msg: impl Into<String>) -> GeometryError {
    GeometryError::Parse { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

/// Raw OBJ content: positions, texture coordinates and `(v, vt)` index triples.
pub struct ObjMesh {
    pub positions: Vec<V3>,
    pub texcoords: Vec<[f64; 2]>,
    pub faces: Vec<[(u32, u32); 3]>,
}

pub fn read_obj(text: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh {
        positions: Vec::new(),
        texcoords: Vec::new(),
        faces: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let p = [num(it.next(), ln, "x")?, num(it.next(), ln, "y")?, num(it.next(), ln, "z")?];
                mesh.positions.push(V3::from_array(p));
            }
            Some("vt") => mesh.texcoords.push([num(it.next(), ln, "u")?, num(it.next(), ln, "v")?]),
            Some("f") => {
                let corners: Vec<&str> = it.collect();
                if corners.len() < 3 {
                    return Err(parse_err(ln, "face needs at least 3 corners"));
                }
                let parse = |c: &str| -> Result<(u32, u32)> {
                    let mut parts = c.split('/');
                    let v: u32 = num(parts.next(), ln, "vertex index")?;
                    let t: u32 = num(parts.next(), ln, "texture index")?;
                    if v == 0 || t == 0 {
                        return Err(parse_err(ln, "OBJ indices are 1-based"));
                    }
                    Ok((v - 1, t - 1))
                };
                let idx = corners.iter().map(|c| parse(c)).collect::<Result<Vec<_>>>()?;
                // fan triangulation
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    for f in &mesh.faces {
        for &(v, t) in f {
            if v as usize >= mesh.positions.len() || t as usize >= mesh.texcoords.len() {
                return Err(parse_err(0, format!("face index {v}/{t} out of range")));
            }
        }
    }
    Ok(mesh)
}

pub fn write_obj(rig: &HandRig, positions: &[V3], out: &mut impl Write) -> std::io::Result<()> {
    for p in positions {
        writeln!(out, "v {} {} {}", p.x, p.y, p.z)?;
    }
    for t in &rig.uv {
        writeln!(out, "vt {} {}", t[0], t[1])?;
    }
    for f in &rig.faces {
        let [a, b, c] = f.map(|i| i + 1);
        writeln!(out, "f {a}/{a} {b}/{b} {c}/{c}")?;
    }
    Ok(())
}

pub fn write_rig_sidecar(rig: &HandRig, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "joints {}", rig.joints.len())?;
    for (j, joint) in rig.joints.iter().enumerate() {
        let parent = joint.parent.map_or(-1, |p| p as i64);
        let r = joint.rest.rot.0;
        let t = joint.rest.trans;
        write!(out, "joint {j} {parent}")?;
        for v in r.iter().flatten() {
            write!(out, " {v}")?;
        }
        writeln!(out, " {} {} {}", t.x, t.y, t.z)?;
    }
    writeln!(out, "weights {}", rig.vertices.len())?;
    for v in 0..rig.vertices.len() {
        write!(out, "w {v}")?;
        for (j, &w) in rig.weight_row(v).iter().enumerate() {
            if w != 0.0 {
                write!(out, " {j}:{w}")?;
            }
        }
        writeln!(out)?;
    }
    writeln!(out, "charts {}", rig.faces.len())?;
    for chunk in rig.face_chart.chunks(32) {
        let ids: Vec<String> = chunk.iter().map(|c| c.to_string()).collect();
        writeln!(out, "c {}", ids.join(" "))?;
    }
    Ok(())
}

pub struct Sidecar {
    pub joints: Vec<Joint>,
    /// Sparse rows indexed by OBJ position index.
    pub weights: Vec<Vec<(usize, f64)>>,
    pub face_chart: Vec<u32>,
}

pub fn read_rig_sidecar(text: &str) -> Result<Sidecar> {
    let mut sc = Sidecar {
        joints: Vec::new(),
        weights: Vec::new(),
        face_chart: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let line = line.split('#').next().unwrap_or("");
        let mut it = line.split_whitespace();
        match it.next() {
            None | Some("joints") | Some("charts") => {}
            Some("weights") => {
                let n: usize = num(it.next(), ln, "vertex count")?;
                sc.weights = vec![Vec::new(); n];
            }
            Some("joint") => {
                let j: usize = num(it.next(), ln, "joint index")?;
                if j != sc.joints.len() {
                    return Err(parse_err(ln, format!("joint {j} out of order")));
                }
                let parent: i64 = num(it.next(), ln, "parent")?;
                let vals = (0..12).map(|_| num::<f64>(it.next(), ln, "transform")).collect::<Result<Vec<_>>>()?;
                let rot = Mat3([[vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]], [vals[6], vals[7], vals[8]]]);
                sc.joints.push(Joint {
                    parent: (parent >= 0).then_some(parent as usize),
                    rest: Rigid::new(rot, V3::new(vals[9], vals[10], vals[11])),
                });
            }
            Some("w") => {
                let v: usize = num(it.next(), ln, "vertex")?;
                let row = sc.weights.get_mut(v).ok_or_else(|| parse_err(ln, format!("vertex {v} beyond declared count")))?;
                for tok in it {
                    let (j, w) = tok.split_once(':').ok_or_else(|| parse_err(ln, format!("bad weight {tok:?}")))?;
                    row.push((num(Some(j), ln, "joint")?, num(Some(w), ln, "weight")?));
                }
            }
            Some("c") => {
                for tok in it {
                    sc.face_chart.push(num(Some(tok), ln, "chart id")?);
                }
            }
            Some(other) => return Err(parse_err(ln, format!("unknown record {other:?}"))),
        }
    }
    Ok(sc)
}

/// Assembles a rig from OBJ and sidecar text, splitting vertices whose
/// position is used with several texture coordinates.
pub fn read_rig(obj: &str, sidecar: &str) -> Result<HandRig> {
    let mesh = read_obj(obj)?;
    let sc = read_rig_sidecar(sidecar)?;
    let nj = sc.joints.len();
    if sc.weights.len() != mesh.positions.len() {
        return Err(GeometryError::InvalidRig(format!(
            "sidecar has weights for {} vertices, OBJ has {}",
            sc.weights.len(),
            mesh.positions.len()
        )));
    }
    if sc.face_chart.len() != mesh.faces.len() {
        return Err(GeometryError::InvalidRig(format!(
            "sidecar has {} chart ids, OBJ has {} triangles",
            sc.face_chart.len(),
            mesh.faces.len()
        )));
    }
    let mut index: HashMap<(u32, u32), u32> = HashMap::new();
    let (mut vertices, mut uv, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let mut faces = Vec::with_capacity(mesh.faces.len());
    for f in &mesh.faces {
        let tri = f.map(|key| {
            *index.entry(key).or_insert_with(|| {
                vertices.push(mesh.positions[key.0 as usize]);
                uv.push(mesh.texcoords[key.1 as usize]);
                let mut row = vec![0.0; nj];
                for &(j, w) in &sc.weights[key.0 as usize] {
                    if j < nj {
                        row[j] += w;
                    }
                }
                weights.extend(row);
                (vertices.len() - 1) as u32
            })
        });
        faces.push(tri);
    }
    let rig = HandRig {
        weld: weld_groups(&vertices),
        vertices,
        faces,
        uv,
        joints: sc.joints,
        weights,
        face_chart: sc.face_chart,
    };
    rig.validate()?;
    Ok(rig)
}

/// Writes `<stem>.obj` and `<stem>.rig`.
pub fn write_rig(rig: &HandRig, dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut obj = Vec::new();
    write_obj(rig, &rig.vertices, &mut obj)?;
    fs::write(dir.join(format!("{stem}.obj")), obj)?;
    let mut sc = Vec::new();
    write_rig_sidecar(rig, &mut sc)?;
    fs::write(dir.join(format!("{stem}.rig")), sc)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{procedural_hand, HandParams};

    #[test]
    fn rig_roundtrip_through_text() {
        let rig = procedural_hand(&HandParams::default());
        let dir = tempfile::tempdir().unwrap();
        write_rig(&rig, dir.path(), "hand").unwrap();
        let back = read_rig(
            &fs::read_to_string(dir.path().join("hand.obj")).unwrap(),
            &fs::read_to_string(dir.path().join("hand.rig")).unwrap(),
        )
        .unwrap();
        assert_eq!(back.face_chart, rig.face_chart);
        assert_eq!(back.joints, rig.joints);
        assert_eq!(back.vertices.len(), rig.vertices.len());
        for (fa, fb) in back.faces.iter().zip(&rig.faces) {
            for (&a, &b) in fa.iter().zip(fb) {
                let (a, b) = (a as usize, b as usize);
                assert_eq!(back.vertices[a], rig.vertices[b]);
                assert_eq!(back.uv[a], rig.uv[b]);
                assert_eq!(back.weight_row(a), rig.weight_row(b));
            }
        }
    }

    #[test]
    fn shared_position_with_two_uvs_is_split() {
        let obj = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvt 0.5 0.5\nf 1/1 2/2 3/3\nf 1/4 3/3 2/2\n";
        let sc = "joints 1\njoint 0 -1 1 0 0 0 1 0 0 0 1 0 0 0\nweights 3\nw 0 0:1\nw 1 0:1\nw 2 0:1\ncharts 2\nc 0 1\n";
        let rig = read_rig(obj, sc).unwrap();
        assert_eq!(rig.vertices.len(), 4);
        assert_eq!(rig.weld[3], rig.weld[0]);
    }

    #[test]
    fn bad_sidecar_names_the_line() {
        let err = read_rig_sidecar("joints 1\nbogus 3\n").err().unwrap();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
