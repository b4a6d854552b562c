//! WTNS binary tensors, PNG images and JSON helpers.
//!
//! WTNS layout: magic `WTNS`, version byte `1`, dtype byte `0` (f32), ndim
//! byte, `ndim` little-endian u32 dimensions, then the little-endian payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::tensor::{ImageU8, Tensor3};

pub const WTNS_MAGIC: &[u8; 4] = b"WTNS";
pub const WTNS_VERSION: u8 = 1;
const DTYPE_F32: u8 = 0;

/// Serializes an arbitrary-rank f32 array.
pub fn encode_wtns(dims: &[usize], values: &[f32]) -> Result<Vec<u8>> {
    if dims.is_empty() || dims.len() > u8::MAX as usize {
        return Err(Error::Format(format!("unsupported rank {}", dims.len())));
    }
    let mut count: usize = 1;
    for &d in dims {
        if d > u32::MAX as usize {
            return Err(Error::Capacity(format!("dimension {d} exceeds u32")));
        }
        count = count
            .checked_mul(d)
            .ok_or_else(|| Error::Capacity("element count overflows".into()))?;
    }
    if count != values.len() {
        return Err(Error::Shape(format!(
            "dims {dims:?} describe {count} values, got {}",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(7 + 4 * dims.len() + 4 * values.len());
    out.extend_from_slice(WTNS_MAGIC);
    out.push(WTNS_VERSION);
    out.push(DTYPE_F32);
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses a WTNS buffer into its dimensions and values.
pub fn decode_wtns(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f32>)> {
    if bytes.len() < 7 || &bytes[..4] != WTNS_MAGIC {
        return Err(Error::Format("missing WTNS magic".into()));
    }
    if bytes[4] != WTNS_VERSION {
        return Err(Error::Format(format!("unsupported version {}", bytes[4])));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {}", bytes[5])));
    }
    let ndim = bytes[6] as usize;
    if ndim == 0 {
        return Err(Error::Format("rank 0".into()));
    }
    let header = 7 + 4 * ndim;
    if bytes.len() < header {
        return Err(Error::Format("truncated header".into()));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut count: usize = 1;
    for i in 0..ndim {
        let off = 7 + 4 * i;
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        count = count
            .checked_mul(d)
            .ok_or_else(|| Error::Capacity(format!("dims overflow at axis {i}")))?;
        dims.push(d);
    }
    let payload = count
        .checked_mul(4)
        .ok_or_else(|| Error::Capacity("payload size overflows".into()))?;
    if bytes.len() - header != payload {
        return Err(Error::Format(format!(
            "payload is {} bytes, dims need {payload}",
            bytes.len() - header
        )));
    }
    let values = bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, values))
}

pub fn tensor_write(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_wtns(&[t.channels(), t.height(), t.width()], t.data())?;
    write_atomic(path.as_ref(), &bytes)
}

/// Reads a WTNS file of rank 1–3 as a tensor; lower ranks get leading unit axes.
pub fn tensor_read(path: impl AsRef<Path>) -> Result<Tensor3> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dims, values) = decode_wtns(&bytes)?;
    let (c, h, w) = match dims[..] {
        [n] => (1, 1, n),
        [h, w] => (1, h, w),
        [c, h, w] => (c, h, w),
        _ => return Err(Error::Format(format!("rank {} is not a Tensor3", dims.len()))),
    };
    Tensor3::from_vec(c, h, w, values).map_err(|e| match e {
        Error::Param(m) => Error::Format(m),
        other => other,
    })
}

/// Writes a rank-1 WTNS file (used for embedding vectors).
pub fn vector_write(values: &[f32], path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_wtns(&[values.len()], values)?;
    write_atomic(path.as_ref(), &bytes)
}

/// Reads any WTNS file flattened to a vector.
pub fn vector_read(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_wtns(&bytes)?.1)
}

pub fn png_read(path: impl AsRef<Path>) -> Result<ImageU8> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageU8::new(h as usize, w as usize, rgb.into_raw())
}

pub fn png_write(img: &ImageU8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.rgb().to_vec())
        .ok_or_else(|| Error::Shape("rgb buffer does not match dimensions".into()))?;
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    write_atomic(path, &bytes)
}

pub fn image_read(path: impl AsRef<Path>) -> Result<Tensor3> {
    Ok(png_read(path)?.to_tensor())
}

pub fn image_write(t: &Tensor3, path: impl AsRef<Path>) -> Result<()> {
    png_write(&ImageU8::from_tensor(t)?, path)
}

/// Mask PNGs: any pixel whose luma is at least 128 counts as set.
pub fn mask_read(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = png_read(path)?;
    let bits = img
        .rgb()
        .chunks_exact(3)
        .map(|p| 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32 >= 128_000)
        .collect();
    BinaryMask::from_bits(img.height(), img.width(), bits)
}

pub fn mask_write(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let rgb = mask
        .bits()
        .iter()
        .flat_map(|&b| if b { [255u8; 3] } else { [0u8; 3] })
        .collect();
    png_write(&ImageU8::new(mask.height(), mask.width(), rgb)?, path)
}

pub fn json_read<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn json_write<T: serde::Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Writes through a sibling temporary file so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = match path.file_name() {
        Some(name) => path.with_file_name(format!(".{}.tmp", name.to_string_lossy())),
        None => return Err(Error::io(path, std::io::ErrorKind::InvalidInput.into())),
    };
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
