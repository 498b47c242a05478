//! The bundled offline dataset: two categories (one per group) with three
//! synthetic images each. Images are drawn in code so the bytes are identical
//! everywhere.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::dataset;
use crate::imaging;
use crate::model::SeedSample;

const SIZE: u32 = 48;

fn color_image(i: u32) -> RgbImage {
    let palette = [[200, 40, 40], [40, 160, 60], [50, 70, 210]];
    let [r, g, b] = palette[i as usize % palette.len()];
    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([240, 240, 235]));
    let (lo, hi) = (8 + 4 * i, 40 - 4 * i);
    for y in lo..hi {
        for x in lo..hi {
            img.put_pixel(x, y, Rgb([r, g, b]));
        }
    }
    img
}

/// Rows of dark "glyph" blocks on a light page, varying per image.
fn text_image(i: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(SIZE, SIZE, Rgb([250, 250, 250]));
    for line in 0..5u32 {
        let y0 = 4 + line * 9;
        let mut x = 3;
        let mut k = line * 7 + i * 13;
        while x + 3 < SIZE - 3 {
            let w = 2 + k % 4;
            for y in y0..y0 + 5 {
                for dx in 0..w.min(SIZE - 3 - x) {
                    img.put_pixel(x + dx, y, Rgb([20, 20, 30]));
                }
            }
            x += w + 1 + (k % 3);
            k = k.wrapping_mul(31).wrapping_add(17 + i);
        }
    }
    img
}

/// `(category, file stem, PNG bytes)` for the six fixture images.
pub fn fixture_images() -> Vec<(&'static str, String, Vec<u8>)> {
    let mut out = Vec::new();
    for i in 0..3 {
        out.push(("color", format!("{:04}", i + 1), imaging::encode_png(&color_image(i))));
    }
    for i in 0..3 {
        out.push(("ocr", format!("{:04}", i + 1), imaging::encode_png(&text_image(i))));
    }
    out
}

/// Writes the fixture dataset under `dir` and returns its samples.
pub fn write_fixture_dataset(dir: &Path) -> std::io::Result<Vec<SeedSample>> {
    for (category, stem, bytes) in fixture_images() {
        let cat_dir = dir.join(category);
        fs::create_dir_all(&cat_dir)?;
        let path = cat_dir.join(format!("{stem}.png"));
        if fs::read(&path).ok().as_deref() != Some(bytes.as_slice()) {
            fs::write(&path, &bytes)?;
        }
    }
    dataset::load_dir(dir).map_err(std::io::Error::other)
}
