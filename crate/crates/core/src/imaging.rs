//! Minimal raster helpers: format sniffing, decode checks, PNG transcoding.

use std::io::Cursor;

use image::{ImageFormat, ImageReader};

pub fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    image::guess_format(bytes).ok()
}

pub fn mime_type(bytes: &[u8]) -> &'static str {
    match sniff_format(bytes) {
        Some(ImageFormat::Jpeg) => "image/jpeg",
        Some(ImageFormat::WebP) => "image/webp",
        Some(ImageFormat::Gif) => "image/gif",
        _ => "image/png",
    }
}

pub fn extension(bytes: &[u8]) -> &'static str {
    match sniff_format(bytes) {
        Some(ImageFormat::Jpeg) => "jpg",
        Some(ImageFormat::WebP) => "webp",
        Some(ImageFormat::Gif) => "gif",
        _ => "png",
    }
}

/// Fully decodes the bytes; returns (width, height) on success.
pub fn decode_check(bytes: &[u8]) -> Result<(u32, u32), String> {
    let img = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .decode()
        .map_err(|e| e.to_string())?;
    Ok((img.width(), img.height()))
}

/// Cheap readability check: format is recognised and the header parses.
pub fn header_readable(bytes: &[u8]) -> bool {
    ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .ok()
        .and_then(|r| r.into_dimensions().ok())
        .is_some()
}

/// Returns PNG bytes unchanged, otherwise decodes and re-encodes as PNG.
pub fn to_png(bytes: &[u8]) -> Result<Vec<u8>, String> {
    if sniff_format(bytes) == Some(ImageFormat::Png) {
        decode_check(bytes)?;
        return Ok(bytes.to_vec());
    }
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .map_err(|e| e.to_string())?;
    Ok(out)
}

pub fn encode_png(img: &image::RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)
        .expect("in-memory PNG encoding");
    out
}
