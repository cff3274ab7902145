//! `TAPD` depth files: magic `b"TAPD"`, little-endian `u32` width and height,
//! then `width * height` row-major `f32` depths.

use super::{DepthMap, StoreError};
use std::fs;
use std::path::Path;

pub const DEPTH_MAGIC: &[u8; 4] = b"TAPD";

pub fn encode_depth(map: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + map.depth.len() * 4);
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for &d in &map.depth {
        out.extend_from_slice(&(d as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth(bytes: &[u8], path: &Path) -> Result<DepthMap, StoreError> {
    if bytes.len() < 4 || &bytes[..4] != DEPTH_MAGIC {
        return Err(StoreError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < 12 {
        return Err(StoreError::TruncatedFile {
            path: path.to_path_buf(),
            expected: 12,
            found: bytes.len(),
        });
    }
    let width = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
    let height = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let expected = 12 + width * height * 4;
    if bytes.len() < expected {
        return Err(StoreError::TruncatedFile {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let depth = bytes[12..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(DepthMap {
        width,
        height,
        depth,
    })
}

pub fn read_depth(path: impl AsRef<Path>) -> Result<DepthMap, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| StoreError::io(path, e))?;
    decode_depth(&bytes, path)
}

/// Depths are narrowed to `f32` on disk.
pub fn write_depth(map: &DepthMap, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    fs::write(path, encode_depth(map)).map_err(|e| StoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_infinity_and_bytes() {
        let map = DepthMap {
            width: 3,
            height: 2,
            depth: vec![1.5, 2.0, f64::INFINITY, 0.25, 10.0, 3.0],
        };
        let bytes = encode_depth(&map);
        let back = decode_depth(&bytes, Path::new("d")).unwrap();
        assert_eq!(back, map);
        assert_eq!(encode_depth(&back), bytes);
    }

    #[test]
    fn rejects_wrong_magic_and_truncation() {
        assert!(matches!(
            decode_depth(b"TAPX\0\0\0\0\0\0\0\0", Path::new("d")),
            Err(StoreError::BadMagic { .. })
        ));
        let mut b = encode_depth(&DepthMap::filled(2, 2, 1.0));
        b.pop();
        assert!(matches!(
            decode_depth(&b, Path::new("d")),
            Err(StoreError::TruncatedFile { .. })
        ));
    }
}
