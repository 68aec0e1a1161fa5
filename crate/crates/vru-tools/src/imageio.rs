//! Bridges between on-disk image files and the in-memory RGB pixel buffer.
//! Grayscale (thermal) inputs are replicated to three channels on load.

use std::path::Path;

use image::{ImageBuffer as RasterBuffer, Rgb};
use vru_core::augment::ImageBuffer;

use crate::error::{Result, ToolError};

/// Decodes a PNG or JPEG file into an 8-bit RGB buffer.
pub fn load_image(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path)
        .map_err(|e| ToolError::validation(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (width, height) = img.dimensions();
    ImageBuffer::from_raw(width, height, img.into_raw())
        .map_err(|e| ToolError::validation(format!("{}: {e}", path.display())))
}

/// Encodes a pixel buffer as PNG.
pub fn save_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| ToolError::io(parent, e))?;
    }
    let raster: RasterBuffer<Rgb<u8>, Vec<u8>> =
        RasterBuffer::from_raw(img.width, img.height, img.data.clone())
            .expect("buffer length matches dimensions");
    raster
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| ToolError::io(path, std::io::Error::other(e)))
}

/// Reads image dimensions from the file header without decoding pixels.
pub fn image_dims(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path)
        .map_err(|e| ToolError::validation(format!("{}: {e}", path.display())))
}
