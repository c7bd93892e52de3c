//! Images, patch grids and the synthetic multi-focus corpus.

mod io;
mod patches;
mod synth;

pub(crate) use io::write_atomic;
pub use io::{load_image, save_image, save_image_to, ImageFormatKind};
pub use patches::{
    anchor_positions, extract_patches, preprocess, reconstruct_overlap_average, PatchGrid, DEGENERATE_NORM,
};
pub use synth::{
    gaussian_blur, generate_multifocus, generate_series, synthetic_scene, LabelMap, MultiFocusSet, RegionSpec,
};

use crate::error::{Error, Result};

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// A 1-plane (gray) or 3-plane (RGB) image with intensities in `[0, 1]`.
///
/// Storage is plane-major, row-major within each plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    planes: usize,
    data: Vec<f64>,
}

impl Image {
    /// Wraps raw samples, checking shape, finiteness and range.
    pub fn new(height: usize, width: usize, planes: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::param("shape", "image dimensions must be positive"));
        }
        if planes != 1 && planes != 3 {
            return Err(Error::param("planes", format!("expected 1 or 3, got {planes}")));
        }
        if data.len() != height * width * planes {
            return Err(Error::DimensionMismatch {
                expected: height * width * planes,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image data"));
        }
        if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::param("data", "intensities must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            planes,
            data,
        })
    }

    /// Like [`Image::new`] but clips every sample into `[0, 1]` first.
    pub fn from_clipped(height: usize, width: usize, planes: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self::new(height, width, planes, data)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, 1, vec![value; height * width])
    }

    /// Builds a gray image from a per-pixel function; values are clipped.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::from_clipped(height, width, 1, data)
    }

    /// Stacks gray planes into a multi-plane image.
    pub fn from_planes(planes: &[Image]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::param("planes", "no planes given"))?;
        let mut data = Vec::with_capacity(first.len() * planes.len());
        for p in planes {
            if p.planes != 1 || p.height != first.height || p.width != first.width {
                return Err(Error::ShapeMismatch("planes must be equally sized gray images".into()));
            }
            data.extend_from_slice(&p.data);
        }
        Self::new(first.height, first.width, planes.len(), data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    /// Pixels per plane.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, p: usize) -> &[f64] {
        let n = self.len();
        &self.data[p * n..(p + 1) * n]
    }

    /// Copies plane `p` out as a gray image.
    pub fn plane_image(&self, p: usize) -> Image {
        Image {
            height: self.height,
            width: self.width,
            planes: 1,
            data: self.plane(p).to_vec(),
        }
    }

    #[inline]
    pub fn get(&self, plane: usize, row: usize, col: usize) -> f64 {
        self.data[plane * self.len() + row * self.width + col]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.planes == other.planes
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.planes, other.height, other.width, other.planes
            )))
        }
    }
}

/// Converts to a single luma plane. Gray input is returned unchanged.
pub fn to_grayscale(img: &Image) -> Image {
    if img.planes == 1 {
        return img.clone();
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| (LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b).clamp(0.0, 1.0))
        .collect();
    Image {
        height: img.height,
        width: img.width,
        planes: 1,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_input_is_identity() {
        let img = Image::from_fn(4, 5, |r, c| (r * 5 + c) as f64 / 20.0).unwrap();
        assert_eq!(to_grayscale(&img), img);
    }

    #[test]
    fn equal_channels_stay_put() {
        let plane = Image::filled(3, 3, 0.5).unwrap();
        let rgb = Image::from_planes(&[plane.clone(), plane.clone(), plane]).unwrap();
        let gray = to_grayscale(&rgb);
        assert_eq!(gray.planes(), 1);
        for &v in gray.data() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn pure_red_maps_to_red_weight() {
        let one = Image::filled(2, 2, 1.0).unwrap();
        let zero = Image::filled(2, 2, 0.0).unwrap();
        let gray = to_grayscale(&Image::from_planes(&[one, zero.clone(), zero]).unwrap());
        for &v in gray.data() {
            assert!((v - 0.299).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_out_of_range_and_bad_planes() {
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
    }
}
