use rayon::prelude::*;

use super::Image;
use crate::error::{Error, Result};

/// Mean-removed patches with a norm below this are treated as constant.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Vectorised `d x d` patches taken on a sliding-window lattice.
///
/// Vectors are stored back to back; each is the patch read row by row.
/// Anchors run from the top-left to the bottom-right corner in row-major
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patch_side: usize,
    pub stride: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Distinct anchor rows, ascending.
    pub rows: Vec<usize>,
    /// Distinct anchor columns, ascending.
    pub cols: Vec<usize>,
    pub anchors: Vec<(usize, usize)>,
    pub vectors: Vec<f64>,
    /// Removed means, present once the grid is preprocessed.
    pub means: Option<Vec<f64>>,
    /// Pre-normalisation norms of the mean-removed vectors.
    pub norms: Option<Vec<f64>>,
    pub degenerate: Vec<bool>,
}

impl PatchGrid {
    pub fn dim(&self) -> usize {
        self.patch_side * self.patch_side
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        let d2 = self.dim();
        &self.vectors[i * d2..(i + 1) * d2]
    }

    pub fn is_preprocessed(&self) -> bool {
        self.means.is_some()
    }

    /// Anchor-grid shape as (rows, cols).
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }
}

/// Anchor offsets along one axis: the stride lattice plus a clamped final
/// position so the last window ends on the image edge.
pub fn anchor_positions(extent: usize, side: usize, stride: usize) -> Vec<usize> {
    let last = extent - side;
    let mut out: Vec<usize> = (0..=last).step_by(stride).collect();
    if *out.last().unwrap() != last {
        out.push(last);
    }
    out
}

/// Collects raw patches of a gray image at stride `d - overlap`.
pub fn extract_patches(img: &Image, d: usize, overlap: usize) -> Result<PatchGrid> {
    if img.planes() != 1 {
        return Err(Error::param("planes", "patch extraction needs a gray image"));
    }
    if d == 0 {
        return Err(Error::param("patch_side", "must be positive"));
    }
    if overlap >= d {
        return Err(Error::param(
            "overlap",
            format!("overlap {overlap} must be smaller than patch side {d}"),
        ));
    }
    let (h, w) = (img.height(), img.width());
    if d > h.min(w) {
        return Err(Error::param(
            "patch_side",
            format!("patch side {d} exceeds image size {h}x{w}"),
        ));
    }
    let stride = d - overlap;
    let rows = anchor_positions(h, d, stride);
    let cols = anchor_positions(w, d, stride);
    let anchors: Vec<(usize, usize)> = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();

    let data = img.data();
    let mut vectors = Vec::with_capacity(anchors.len() * d * d);
    for &(r, c) in &anchors {
        for dr in 0..d {
            let start = (r + dr) * w + c;
            vectors.extend_from_slice(&data[start..start + d]);
        }
    }
    let n = anchors.len();
    Ok(PatchGrid {
        patch_side: d,
        stride,
        image_height: h,
        image_width: w,
        rows,
        cols,
        anchors,
        vectors,
        means: None,
        norms: None,
        degenerate: vec![false; n],
    })
}

/// Removes each patch's mean and scales it to unit norm.
///
/// Constant patches become zero vectors and are flagged as degenerate.
pub fn preprocess(mut grid: PatchGrid) -> PatchGrid {
    let d2 = grid.dim();
    let stats: Vec<(f64, f64, bool)> = grid
        .vectors
        .par_chunks_mut(d2)
        .map(|v| {
            let mean = v.iter().sum::<f64>() / d2 as f64;
            v.iter_mut().for_each(|x| *x -= mean);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < DEGENERATE_NORM {
                v.iter_mut().for_each(|x| *x = 0.0);
                (mean, norm, true)
            } else {
                v.iter_mut().for_each(|x| *x /= norm);
                (mean, norm, false)
            }
        })
        .collect();
    grid.means = Some(stats.iter().map(|s| s.0).collect());
    grid.norms = Some(stats.iter().map(|s| s.1).collect());
    grid.degenerate = stats.iter().map(|s| s.2).collect();
    grid
}

/// Places raw-intensity patches at their anchors and averages overlaps.
pub fn reconstruct_overlap_average(
    anchors: &[(usize, usize)],
    patches: &[Vec<f64>],
    height: usize,
    width: usize,
) -> Result<Image> {
    if anchors.len() != patches.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            found: patches.len(),
        });
    }
    let Some(first) = patches.first() else {
        return Err(Error::Uncovered { row: 0, col: 0 });
    };
    let d = (first.len() as f64).sqrt().round() as usize;
    if d * d != first.len() || d == 0 {
        return Err(Error::param("patches", "patch length is not a perfect square"));
    }
    let mut sum = vec![0.0; height * width];
    let mut count = vec![0u32; height * width];
    for (&(r, c), p) in anchors.iter().zip(patches) {
        if p.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: p.len(),
            });
        }
        if r + d > height || c + d > width {
            return Err(Error::param(
                "anchors",
                format!("patch at ({r}, {c}) leaves the canvas"),
            ));
        }
        for dr in 0..d {
            let row = (r + dr) * width + c;
            for dc in 0..d {
                sum[row + dc] += p[dr * d + dc];
                count[row + dc] += 1;
            }
        }
    }
    if let Some(i) = count.iter().position(|&n| n == 0) {
        return Err(Error::Uncovered {
            row: i / width,
            col: i % width,
        });
    }
    let data = sum.iter().zip(&count).map(|(s, &n)| s / f64::from(n)).collect();
    Image::from_clipped(height, width, 1, data)
}
