use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::Image;
use crate::error::{Error, Result};

/// On-disk encodings supported for writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormatKind {
    /// Binary 8-bit graymap (P5).
    Pgm,
    /// 8-bit PNG, gray or RGB.
    Png,
}

impl ImageFormatKind {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("pgm") => Ok(Self::Pgm),
            Some("png") => Ok(Self::Png),
            _ => Err(Error::format(path, "unsupported extension (expected .pgm or .png)")),
        }
    }
}

/// Reads a PGM or PNG file, mapping 8-bit samples to `[0, 1]`.
///
/// Alpha is dropped; gray+alpha loads as gray and RGBA as RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if decoded.color().has_color() {
        let rgb = decoded.to_rgb8();
        let mut data = vec![0.0; 3 * w * h];
        for (i, px) in rgb.pixels().enumerate() {
            for p in 0..3 {
                data[p * w * h + i] = f64::from(px[p]) / 255.0;
            }
        }
        Image::new(h, w, 3, data)
    } else {
        let gray = decoded.to_luma8();
        let data = gray.as_raw().iter().map(|&v| f64::from(v) / 255.0).collect();
        Image::new(h, w, 1, data)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Encodes an image into memory.
pub fn save_image_to(img: &Image, format: ImageFormatKind) -> Result<Vec<u8>> {
    let (h, w) = (img.height(), img.width());
    match format {
        ImageFormatKind::Pgm => {
            if img.planes() != 1 {
                return Err(Error::param("format", "PGM output needs a gray image"));
            }
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(img.data().iter().map(|&v| quantize(v)));
            Ok(out)
        }
        ImageFormatKind::Png => {
            let dynamic = if img.planes() == 1 {
                let buf = img.data().iter().map(|&v| quantize(v)).collect();
                DynamicImage::ImageLuma8(image::GrayImage::from_raw(w as u32, h as u32, buf).expect("buffer size"))
            } else {
                let n = h * w;
                let mut buf = Vec::with_capacity(3 * n);
                for i in 0..n {
                    for p in 0..3 {
                        buf.push(quantize(img.data()[p * n + i]));
                    }
                }
                DynamicImage::ImageRgb8(image::RgbImage::from_raw(w as u32, h as u32, buf).expect("buffer size"))
            };
            let mut cursor = Cursor::new(Vec::new());
            dynamic
                .write_to(&mut cursor, ImageFormat::Png)
                .map_err(|e| Error::format("<png>", e.to_string()))?;
            Ok(cursor.into_inner())
        }
    }
}

/// Writes `img` with the encoding implied by the extension.
pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    let bytes = save_image_to(img, ImageFormatKind::from_path(path)?)?;
    write_atomic(path, &bytes)
}

/// Writes to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
