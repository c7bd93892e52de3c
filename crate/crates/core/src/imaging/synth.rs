use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Image;
use crate::error::{Error, Result};

/// Per-pixel region labels in `0..num_labels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub num_labels: usize,
    pub labels: Vec<usize>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_labels: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                found: labels.len(),
            });
        }
        if labels.iter().any(|&l| l >= num_labels) {
            return Err(Error::param("labels", format!("label out of range 0..{num_labels}")));
        }
        Ok(Self {
            height,
            width,
            num_labels,
            labels,
        })
    }

    /// Binary region: `true` pixels get label 0, the rest label 1.
    pub fn from_region(height: usize, width: usize, region: &[bool]) -> Result<Self> {
        let labels = region.iter().map(|&inside| usize::from(!inside)).collect();
        Self::new(height, width, 2, labels)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }

    /// The label shared by every pixel of a window, if there is one.
    pub fn uniform_label(&self, row: usize, col: usize, h: usize, w: usize) -> Option<usize> {
        let first = self.get(row, col);
        for r in row..row + h {
            let line = &self.labels[r * self.width + col..r * self.width + col + w];
            if line.iter().any(|&l| l != first) {
                return None;
            }
        }
        Some(first)
    }

    /// Renders labels as an image, label `k` mapped to `k * floor(255 / (K - 1))`.
    pub fn to_image(&self) -> Image {
        let step = if self.num_labels > 1 {
            (255 / (self.num_labels - 1)) as f64 / 255.0
        } else {
            0.0
        };
        let data = self.labels.iter().map(|&l| (l as f64 * step).min(1.0)).collect();
        Image::new(self.height, self.width, 1, data).expect("label image is in range")
    }

    /// Inverse of [`LabelMap::to_image`] for a known label count.
    pub fn from_image(img: &Image, num_labels: usize) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::param("num_labels", "need at least two labels"));
        }
        let step = (255 / (num_labels - 1)) as f64;
        let labels = img
            .plane(0)
            .iter()
            .map(|v| (((v * 255.0) / step).round() as usize).min(num_labels - 1))
            .collect();
        Self::new(img.height(), img.width(), num_labels, labels)
    }
}

/// Region layouts for synthetic multi-focus sets.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionSpec {
    /// Left half is label 0, right half label 1.
    HalfPlane,
    /// Disc of the given radius (fraction of the shorter side) centred in the
    /// image is label 0, the rest label 1.
    Circle { radius: f64 },
    /// `k` equal angular sectors around the image centre.
    Wedges(usize),
    /// Explicit labels.
    Labels(LabelMap),
}

impl RegionSpec {
    pub fn labels(&self, height: usize, width: usize) -> Result<LabelMap> {
        let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
        match self {
            RegionSpec::HalfPlane => {
                let labels = (0..height * width)
                    .map(|i| usize::from(i % width >= width / 2))
                    .collect();
                LabelMap::new(height, width, 2, labels)
            }
            RegionSpec::Circle { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::param("radius", "must be positive"));
                }
                let rad = radius * height.min(width) as f64;
                let labels = (0..height * width)
                    .map(|i| {
                        let (dy, dx) = ((i / width) as f64 - cy, (i % width) as f64 - cx);
                        usize::from(dy.hypot(dx) > rad)
                    })
                    .collect();
                LabelMap::new(height, width, 2, labels)
            }
            RegionSpec::Wedges(k) => {
                if *k < 2 {
                    return Err(Error::param("wedges", "need at least two sectors"));
                }
                let labels = (0..height * width)
                    .map(|i| {
                        let (dy, dx) = ((i / width) as f64 - cy, (i % width) as f64 - cx);
                        let angle = dy.atan2(dx).rem_euclid(2.0 * PI);
                        ((angle / (2.0 * PI) * *k as f64) as usize).min(k - 1)
                    })
                    .collect();
                LabelMap::new(height, width, *k, labels)
            }
            RegionSpec::Labels(map) => {
                if map.height != height || map.width != width {
                    return Err(Error::ShapeMismatch("label map does not match image".into()));
                }
                Ok(map.clone())
            }
        }
    }
}

/// Sources, ground truth and labels of one synthetic multi-focus set.
#[derive(Debug, Clone)]
pub struct MultiFocusSet {
    pub sources: Vec<Image>,
    pub truth: LabelMap,
    pub sharp: Image,
}

// Half-sample symmetric reflection, valid for any offset.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur truncated at 3 sigma with reflective borders.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::param("blur_sigma", format!("must be positive, got {sigma}")));
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (h, w) = (img.height(), img.width());
    let mut out = Vec::with_capacity(img.data().len());
    let mut tmp = vec![0.0; h * w];
    for p in 0..img.planes() {
        let src = img.plane(p);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let cc = reflect(c as isize + t as isize - radius, w);
                    acc += kv * src[r * w + cc];
                }
                tmp[r * w + c] = acc;
            }
        }
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let rr = reflect(r as isize + t as isize - radius, h);
                    acc += kv * tmp[rr * w + c];
                }
                out.push(acc);
            }
        }
    }
    Image::from_clipped(h, w, img.planes(), out)
}

/// One source per label: source `k` is sharp where the label is `k` and
/// blurred elsewhere.
pub fn generate_series(sharp: &Image, blur_sigma: f64, labels: &LabelMap) -> Result<MultiFocusSet> {
    if labels.height != sharp.height() || labels.width != sharp.width() {
        return Err(Error::ShapeMismatch("region does not match image".into()));
    }
    let blurred = gaussian_blur(sharp, blur_sigma)?;
    let n = sharp.len();
    let sources = (0..labels.num_labels)
        .map(|k| {
            let data = (0..sharp.data().len())
                .map(|i| {
                    if labels.labels[i % n] == k {
                        sharp.data()[i]
                    } else {
                        blurred.data()[i]
                    }
                })
                .collect();
            Image::new(sharp.height(), sharp.width(), sharp.planes(), data)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiFocusSet {
        sources,
        truth: labels.clone(),
        sharp: sharp.clone(),
    })
}

/// Two-source set: the first source is sharp inside `region`, the second
/// outside. `truth` labels the region 0 and its complement 1.
pub fn generate_multifocus(sharp: &Image, blur_sigma: f64, region: &[bool]) -> Result<MultiFocusSet> {
    let labels = LabelMap::from_region(sharp.height(), sharp.width(), region)?;
    generate_series(sharp, blur_sigma, &labels)
}

/// Deterministic textured gray scene for training and evaluation.
///
/// A few flat shapes on a gradient background, overlaid with oriented
/// gratings of varying frequency and fine-grained noise, so that every
/// window carries high-frequency content that defocus removes.
pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; height * width];
    let (hf, wf) = (height as f64, width as f64);

    let (gy, gx) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    for (i, v) in data.iter_mut().enumerate() {
        let (r, c) = ((i / width) as f64 / hf, (i % width) as f64 / wf);
        *v = 0.5 + gy * (r - 0.5) + gx * (c - 0.5);
    }

    for _ in 0..rng.random_range(4..9) {
        let level = rng.random_range(-0.3..0.3);
        let (r0, c0) = (rng.random_range(0.0..hf), rng.random_range(0.0..wf));
        let (rh, rw) = (rng.random_range(0.1..0.4) * hf, rng.random_range(0.1..0.4) * wf);
        let disc = rng.random_bool(0.5);
        for (i, v) in data.iter_mut().enumerate() {
            let (r, c) = ((i / width) as f64, (i % width) as f64);
            let inside = if disc {
                ((r - r0) / rh).powi(2) + ((c - c0) / rw).powi(2) <= 1.0
            } else {
                (r - r0).abs() <= rh / 2.0 && (c - c0).abs() <= rw / 2.0
            };
            if inside {
                *v += level;
            }
        }
    }

    for _ in 0..6 {
        let period = rng.random_range(2.5..14.0);
        let theta = rng.random_range(0.0..PI);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = rng.random_range(0.03..0.09);
        let (s, c) = theta.sin_cos();
        let freq = 2.0 * PI / period;
        for (i, v) in data.iter_mut().enumerate() {
            let (y, x) = ((i / width) as f64, (i % width) as f64);
            *v += amp * (freq * (x * c + y * s) + phase).sin();
        }
    }

    for v in &mut data {
        *v += rng.random_range(-0.06..0.06);
    }

    let (lo, hi) = data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = (hi - lo).max(1e-12);
    for v in &mut data {
        *v = 0.05 + 0.9 * (*v - lo) / span;
    }
    Image::from_clipped(height, width, 1, data)
}
