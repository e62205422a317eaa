use std::path::Path;

use image::{ColorType, GrayImage, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::grid::AnnotatedMask;

/// Reads an 8-bit single-channel PNG of class indices, each below `classes`.
pub fn read_mask(path: &Path, classes: usize) -> Result<AnnotatedMask> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(e) => Error::io(path, e),
        e => Error::Format(format!("{}: {e}", path.display())),
    })?;
    if decoded.color() != ColorType::L8 {
        return Err(Error::Format(format!(
            "{}: expected 8-bit grayscale, found {:?}",
            path.display(),
            decoded.color()
        )));
    }
    let gray = decoded.into_luma8();
    let (w, h) = gray.dimensions();
    let mask = AnnotatedMask::new(h as usize, w as usize, gray.into_raw())?;
    mask.check_classes(classes)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok(mask)
}

pub fn write_mask(path: &Path, mask: &AnnotatedMask) -> Result<()> {
    write_gray_png(path, mask.width(), mask.height(), mask.as_slice().to_vec())
}

pub(super) fn write_gray_png(path: &Path, width: usize, height: usize, data: Vec<u8>) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Error::Shape(format!("buffer does not fill {width}x{height}")))?;
    let mut encoded = std::io::Cursor::new(Vec::new());
    img.write_to(&mut encoded, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    super::write_atomic(path, |w| w.write_all(encoded.get_ref()))
}
