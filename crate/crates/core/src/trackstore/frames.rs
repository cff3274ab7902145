use super::StoreError;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ImageEncoder, RgbImage};
use std::fs;
use std::path::Path;

/// Writes a binary PPM (P6, maxval 255).
pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    PnmEncoder::new(&mut buf)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| StoreError::Image {
            path: path.to_path_buf(),
            source,
        })?;
    fs::write(path, buf).map_err(|e| StoreError::io(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, StoreError> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| StoreError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| StoreError::io(path, e))?
        .decode()
        .map_err(|source| StoreError::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(img.to_rgb8())
}
