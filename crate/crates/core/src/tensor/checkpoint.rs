//! Little-endian binary checkpoint.
//!
//! ```text
//! "LLM1"
//! u32 header length, header bytes (UTF-8 "key = value" lines)
//! u32 record count
//! per record: u32 name length, UTF-8 name, u32 rank, rank x u32 extents,
//!             product(extents) x f32 payload
//! ```
//!
//! The header makes a checkpoint self-describing (architecture, mode,
//! iteration). Payloads are stored bit-exactly.

use std::io::{self, Read, Write};

use super::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LLM1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub header: Vec<(String, String)>,
    pub records: Vec<(String, Tensor<f32>)>,
}

impl Checkpoint {
    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn record(&self, name: &str) -> Option<&Tensor<f32>> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn write_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "value exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

fn read_u32(r: &mut impl Read) -> io::Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    let mut header = String::new();
    for (k, v) in &ckpt.header {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("bad header entry {k:?}")));
        }
        header.push_str(&format!("{k} = {v}\n"));
    }
    write_u32(w, header.len())?;
    w.write_all(header.as_bytes())?;
    write_u32(w, ckpt.records.len())?;
    for (name, t) in &ckpt.records {
        write_u32(w, name.len())?;
        w.write_all(name.as_bytes())?;
        write_u32(w, t.rank())?;
        for &d in t.shape() {
            write_u32(w, d)?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> io::Result<Checkpoint> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(invalid(format!("bad magic {magic:?}")));
    }
    let hlen = read_u32(r)?;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes)?;
    let htext = String::from_utf8(hbytes).map_err(|e| invalid(e.to_string()))?;
    let mut header = Vec::new();
    for line in htext.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| invalid(format!("bad header line {line:?}")))?;
        header.push((k.trim().to_string(), v.trim().to_string()));
    }
    let n = read_u32(r)?;
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let nlen = read_u32(r)?;
        let mut nb = vec![0u8; nlen];
        r.read_exact(&mut nb)?;
        let name = String::from_utf8(nb).map_err(|e| invalid(e.to_string()))?;
        let rank = read_u32(r)?;
        if rank > 8 {
            return Err(invalid(format!("{name}: rank {rank} too large")));
        }
        let shape = (0..rank).map(|_| read_u32(r)).collect::<io::Result<Vec<_>>>()?;
        let count: usize = shape.iter().product();
        let mut payload = vec![0u8; count * 4];
        r.read_exact(&mut payload)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let t = Tensor::from_vec(&shape, data).map_err(|e| invalid(format!("{name}: {e}")))?;
        records.push((name, t));
    }
    Ok(Checkpoint { header, records })
}
