//! PFM (linear float) and PNG (tone-mapped preview) images as `[C, H, W]` tensors.
//!
//! PFM stores rows bottom-to-top; tensors are top-to-bottom. Files are written
//! little-endian (negative scale) and read in either byte order.

use std::fs;
use std::io::{self, BufWriter};
use std::path::Path;

use crate::tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("png: {0}")]
    Png(#[from] png::EncodingError),
}

fn bad(path: &Path, msg: impl Into<String>) -> ImageError {
    ImageError::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

pub fn encode_pfm(img: &Tensor<f32>) -> Vec<u8> {
    let (c, h, w) = img.chw().expect("image must be [C, H, W]");
    assert!(c == 1 || c == 3, "PFM holds 1 or 3 channels, got {c}");
    let mut out = format!("{}\n{w} {h}\n-1.0\n", if c == 3 { "PF" } else { "Pf" }).into_bytes();
    let d = img.data();
    out.reserve(c * h * w * 4);
    for row in (0..h).rev() {
        for col in 0..w {
            for ch in 0..c {
                out.extend_from_slice(&d[ch * h * w + row * w + col].to_le_bytes());
            }
        }
    }
    out
}

pub fn write_pfm(path: &Path, img: &Tensor<f32>) -> Result<(), ImageError> {
    fs::write(path, encode_pfm(img))?;
    Ok(())
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<Tensor<f32>, ImageError> {
    // header: three whitespace-separated tokens after the magic
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1; // single whitespace byte before the raster
    let c = match fields[0].as_str() {
        "PF" => 3,
        "Pf" => 1,
        m => return Err(bad(path, format!("bad magic {m:?}"))),
    };
    let parse = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(path, format!("bad {what} {s:?}")));
    let w = parse(&fields[1], "width")? as usize;
    let h = parse(&fields[2], "height")? as usize;
    let scale = parse(&fields[3], "scale")?;
    if w == 0 || h == 0 {
        return Err(bad(path, "zero extent"));
    }
    let need = c * w * h * 4;
    let raster = bytes.get(pos..pos + need).ok_or_else(|| bad(path, "truncated raster"))?;
    let little = scale < 0.0;
    let mut data = vec![0f32; c * h * w];
    for (i, chunk) in raster.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (pix, ch) = (i / c, i % c);
        let (row, col) = (h - 1 - pix / w, pix % w);
        data[ch * h * w + row * w + col] = v;
    }
    Tensor::from_vec(&[c, h, w], data).map_err(|e| bad(path, e.to_string()))
}

pub fn read_pfm(path: &Path) -> Result<Tensor<f32>, ImageError> {
    decode_pfm(&fs::read(path)?, path)
}

/// Linear value to an 8-bit display code with gamma 2.2.
pub fn encode_gamma(v: f32, exposure: f32) -> u8 {
    let x = (v * exposure).clamp(0.0, 1.0);
    (x.powf(1.0 / 2.2) * 255.0).round() as u8
}

/// 8-bit RGB preview of a linear `[1 or 3, H, W]` image.
pub fn write_png(path: &Path, img: &Tensor<f32>, exposure: f32) -> Result<(), ImageError> {
    let (c, h, w) = img.chw().map_err(|e| bad(path, e.to_string()))?;
    if c != 1 && c != 3 {
        return Err(bad(path, format!("cannot preview {c} channels")));
    }
    let d = img.data();
    let mut rgb = Vec::with_capacity(3 * h * w);
    for p in 0..h * w {
        for ch in 0..3 {
            let src = if c == 1 { 0 } else { ch };
            rgb.push(encode_gamma(d[src * h * w + p], exposure));
        }
    }
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_source_gamma(png::ScaledFloat::new(1.0 / 2.2));
    let mut writer = enc.write_header()?;
    writer.write_image_data(&rgb)?;
    writer.finish()?;
    Ok(())
}

/// Writes `img` as PFM or PNG according to the file extension.
pub fn write_image(path: &Path, img: &Tensor<f32>, exposure: f32) -> Result<(), ImageError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("png") => write_png(path, img, exposure),
        Some("pfm") => write_pfm(path, img),
        _ => Err(bad(path, "expected a .pfm or .png extension")),
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pfm_roundtrip(w in 1usize..7, h in 1usize..7, gray in any::<bool>(), seed in any::<u32>()) {
            let c = if gray { 1 } else { 3 };
            let data: Vec<f32> = (0..c * w * h).map(|i| ((i as u32).wrapping_mul(2654435761) ^ seed) as f32 * 1e-6).collect();
            let img = Tensor::from_vec(&[c, h, w], data).unwrap();
            let back = decode_pfm(&encode_pfm(&img), Path::new("mem")).unwrap();
            prop_assert_eq!(back, img);
        }
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        let img = decode_pfm(&bytes, Path::new("mem")).unwrap();
        assert_eq!(img.data(), &[1.5, -2.0]);
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let img = Tensor::from_vec(&[1, 2, 1], vec![1.0f32, 2.0]).unwrap();
        let bytes = encode_pfm(&img);
        let raster = &bytes[bytes.len() - 8..];
        assert_eq!(&raster[..4], &2.0f32.to_le_bytes());
    }

    #[test]
    fn gamma_endpoints() {
        assert_eq!(encode_gamma(0.0, 1.0), 0);
        assert_eq!(encode_gamma(1.0, 1.0), 255);
        assert_eq!(encode_gamma(5.0, 1.0), 255);
        assert_eq!(encode_gamma(0.218, 1.0), 128);
    }

    #[test]
    fn png_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        write_image(&p, &Tensor::full(&[3, 4, 5], 0.5f32), 1.0).unwrap();
        assert!(fs::read(&p).unwrap().starts_with(b"\x89PNG"));
    }
}
