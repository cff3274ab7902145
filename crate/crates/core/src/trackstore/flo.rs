//! Middlebury `.flo` optical flow files.
//!
//! Layout: little-endian `f32` magic 202021.25, `i32` width, `i32` height,
//! then `height` rows of `width` interleaved `(u, v)` `f32` pairs.

use super::{FlowField, FlowVolume, StoreError};
use std::fs;
use std::path::{Path, PathBuf};

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;

/// Decodes a `.flo` byte buffer. `path` is only used for error messages.
pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField, StoreError> {
    let truncated = |expected: usize| StoreError::TruncatedFile {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(StoreError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(StoreError::SchemaViolation(format!(
            "{}: invalid flow dimensions {width}x{height}",
            path.display()
        )));
    }
    let (width, height) = (width as usize, height as usize);
    let expected = HEADER_LEN + width * height * 8;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    let mut data = Vec::with_capacity(width * height);
    for (i, px) in bytes[HEADER_LEN..expected].chunks_exact(8).enumerate() {
        let u = f32::from_le_bytes([px[0], px[1], px[2], px[3]]);
        let v = f32::from_le_bytes([px[4], px[5], px[6], px[7]]);
        if !u.is_finite() || !v.is_finite() {
            return Err(StoreError::NonFiniteValue {
                path: path.to_path_buf(),
                index: i,
            });
        }
        data.push([u, v]);
    }
    Ok(FlowField {
        width,
        height,
        data,
    })
}

pub fn encode_flo(field: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + field.data.len() * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(field.width as i32).to_le_bytes());
    out.extend_from_slice(&(field.height as i32).to_le_bytes());
    for [u, v] in &field.data {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_flo(&bytes, path)
}

pub fn write_flo(field: &FlowField, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    fs::write(path, encode_flo(field)).map_err(|e| StoreError::io(path, e))
}

fn flo_name(t: usize) -> String {
    format!("{t:05}.flo")
}

/// Writes `fields[t]` to `dir/{t:05}.flo`, creating `dir` if needed.
pub fn write_flow_dir(volume: &FlowVolume, dir: impl AsRef<Path>) -> Result<(), StoreError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    for (t, f) in volume.fields.iter().enumerate() {
        write_flo(f, dir.join(flo_name(t)))?;
    }
    Ok(())
}

/// Reads every `.flo` file in `dir`, in file-name order.
pub fn read_flow_dir(dir: impl AsRef<Path>) -> Result<FlowVolume, StoreError> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| StoreError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "flo"))
        .collect();
    files.sort();
    let fields = files
        .iter()
        .map(read_flo)
        .collect::<Result<Vec<_>, _>>()?;
    FlowVolume::new(fields)
}
