//! Patch selection over a coupled dictionary and the full fusion pipeline.

use rayon::prelude::*;

use crate::dictionary_learning::CoupledDictionary;
use crate::error::{Error, Result};
use crate::imaging::{
    extract_patches, preprocess, reconstruct_overlap_average, to_grayscale, Image, LabelMap, PatchGrid,
};
use crate::sparse_coding::{batch_encode, Dictionary, SparseCode};
use crate::tv::{tv_admm, TvParams};

/// Fusion settings. Defaults follow the reference experimental setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight of the focused-subspace l1 norm, in `[0.5, 1)`.
    pub omega: f64,
    pub eps: f64,
    pub patch_side: usize,
    pub overlap: usize,
    pub max_atoms: usize,
    pub tv_enabled: bool,
    pub tv: TvParams,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            omega: 0.54,
            eps: 0.1,
            patch_side: 8,
            overlap: 7,
            max_atoms: 16,
            tv_enabled: false,
            tv: TvParams::default(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        check_omega(self.omega)?;
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        if self.patch_side == 0 || self.overlap >= self.patch_side {
            return Err(Error::param("overlap", "need 0 <= overlap < patch side"));
        }
        if self.max_atoms == 0 {
            return Err(Error::param("max_atoms", "must be positive"));
        }
        if self.tv_enabled {
            self.tv.validate()?;
        }
        Ok(())
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(0.5..1.0).contains(&omega) {
        return Err(Error::param("omega", format!("must lie in [0.5, 1), got {omega}")));
    }
    Ok(())
}

/// Winning source per patch anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMask {
    pub rows: usize,
    pub cols: usize,
    pub sources: usize,
    /// Zero-based source index per anchor, row-major.
    pub winner: Vec<usize>,
    /// `scores[a * sources + k]` is the weighted l1 score of source `k` at anchor `a`.
    pub scores: Vec<f64>,
    /// Anchors decided by the variance fallback (all codes zero).
    pub fallback: Vec<bool>,
    pub anchors: Vec<(usize, usize)>,
    pub patch_side: usize,
}

impl DecisionMask {
    pub fn scores_at(&self, anchor: usize) -> &[f64] {
        &self.scores[anchor * self.sources..(anchor + 1) * self.sources]
    }

    /// Fraction of anchors agreeing with `truth`, counting only anchors
    /// whose window, grown by `band` pixels on every side, has one label.
    ///
    /// Returns `(accuracy, anchors counted)`.
    pub fn accuracy(&self, truth: &LabelMap, band: usize) -> (f64, usize) {
        let d = self.patch_side;
        let (mut hit, mut total) = (0usize, 0usize);
        for (a, &(r, c)) in self.anchors.iter().enumerate() {
            let (r0, c0) = (r.saturating_sub(band), c.saturating_sub(band));
            let r1 = (r + d + band).min(truth.height);
            let c1 = (c + d + band).min(truth.width);
            if let Some(label) = truth.uniform_label(r0, c0, r1 - r0, c1 - c0) {
                total += 1;
                hit += usize::from(self.winner[a] == label);
            }
        }
        (hit as f64 / total.max(1) as f64, total)
    }

    /// Pixel-resolution rendering: every pixel takes the winner of the anchor
    /// whose window centre is nearest, scaled to `index * floor(255/(K-1))`.
    pub fn to_image(&self, height: usize, width: usize) -> Image {
        let labels = self.pixel_labels(height, width);
        labels.to_image()
    }

    pub fn pixel_labels(&self, height: usize, width: usize) -> LabelMap {
        let half = self.patch_side as f64 / 2.0 - 0.5;
        let row_pos: Vec<usize> = self.anchors.iter().step_by(self.cols).map(|a| a.0).collect();
        let col_pos: Vec<usize> = self.anchors[..self.cols].iter().map(|a| a.1).collect();
        let nearest = |positions: &[usize], x: usize| -> usize {
            let mut best = 0;
            let mut dist = f64::INFINITY;
            for (i, &p) in positions.iter().enumerate() {
                let dd = (p as f64 + half - x as f64).abs();
                if dd < dist {
                    dist = dd;
                    best = i;
                }
            }
            best
        };
        let ri: Vec<usize> = (0..height).map(|r| nearest(&row_pos, r)).collect();
        let ci: Vec<usize> = (0..width).map(|c| nearest(&col_pos, c)).collect();
        let labels = (0..height * width)
            .map(|i| self.winner[ri[i / width] * self.cols + ci[i % width]])
            .collect();
        LabelMap::new(height, width, self.sources.max(2), labels).expect("winner indices are valid")
    }
}

/// Weighted max-l1 selection.
///
/// Each code is split into its focused part (first half of the atoms) and
/// blurred part (second half); the score is
/// `omega * |alpha_F|_1 + (1 - omega) * |alpha_B|_1`. Returns the zero-based
/// index of the highest score (lowest index on ties) and all scores.
pub fn select(codes: &[SparseCode], omega: f64) -> Result<(usize, Vec<f64>)> {
    check_omega(omega)?;
    if codes.len() < 2 {
        return Err(Error::param("codes", "selection needs at least two sources"));
    }
    let len = codes[0].length;
    if !len.is_multiple_of(2) {
        return Err(Error::param("codes", "coupled codes must have even length"));
    }
    if let Some(c) = codes.iter().find(|c| c.length != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            found: c.length,
        });
    }
    let m = len / 2;
    let scores: Vec<f64> = codes
        .iter()
        .map(|c| omega * c.l1_in(0..m) + (1.0 - omega) * c.l1_in(m..len))
        .collect();
    Ok((argmax_first(&scores), scores))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Returns the chosen source patch verbatim.
pub fn apply_mask<'a>(winner: usize, patches: &[&'a [f64]]) -> Result<&'a [f64]> {
    patches.get(winner).copied().ok_or(Error::IndexOutOfRange {
        index: winner,
        len: patches.len(),
    })
}

fn variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
}

/// Fused image, the decision mask, and whether TV refinement converged.
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub fused: Image,
    /// Overlap-averaged estimate before any TV refinement.
    pub initial: Image,
    pub mask: DecisionMask,
    /// `false` when TV ran and at least one plane hit its iteration cap.
    pub tv_converged: bool,
}

/// Dictionary used to code source patches.
#[derive(Debug, Clone, Copy)]
pub enum CodingDictionary<'a> {
    /// `[D^F, D^B]` with the weighted selection rule.
    Coupled(&'a CoupledDictionary),
    /// A single dictionary; codes are padded with an unused blurred half so
    /// selection at `omega = 0.5` is the plain max-l1 rule.
    Single(&'a Dictionary),
}

/// Fuses `K >= 2` aligned multi-focus images.
pub fn fuse_images(sources: &[Image], dict: &CoupledDictionary, cfg: &FusionConfig) -> Result<FusionOutput> {
    fuse_with(sources, CodingDictionary::Coupled(dict), cfg)
}

/// Max-l1 baseline over a single dictionary.
pub fn fuse_images_single(sources: &[Image], dict: &Dictionary, cfg: &FusionConfig) -> Result<FusionOutput> {
    let cfg = FusionConfig { omega: 0.5, ..*cfg };
    fuse_with(sources, CodingDictionary::Single(dict), &cfg)
}

pub fn fuse_with(sources: &[Image], dict: CodingDictionary<'_>, cfg: &FusionConfig) -> Result<FusionOutput> {
    encode_sources(sources, dict, cfg)?.fuse(cfg.omega)
}

/// Sources after patch extraction and sparse coding, ready for selection.
///
/// Codes do not depend on `omega`, so one encoding serves a whole sweep.
#[derive(Debug, Clone)]
pub struct EncodedSources {
    sources: Vec<Image>,
    grids: Vec<PatchGrid>,
    /// `codes[k][a]`: code of source `k` at anchor `a`.
    pub codes: Vec<Vec<SparseCode>>,
    cfg: FusionConfig,
}

/// Extracts, preprocesses and codes the patches of every source.
pub fn encode_sources(sources: &[Image], dict: CodingDictionary<'_>, cfg: &FusionConfig) -> Result<EncodedSources> {
    cfg.validate()?;
    if sources.len() < 2 {
        return Err(Error::param("sources", "fusion needs at least two images"));
    }
    for s in &sources[1..] {
        sources[0].check_same_shape(s, "source images")?;
    }
    let d = cfg.patch_side;
    let (joint, padded_len) = match dict {
        CodingDictionary::Coupled(cd) => (cd.concatenated(), None),
        CodingDictionary::Single(sd) => (sd.clone(), Some(2 * sd.len())),
    };
    if joint.dim() != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            found: joint.dim(),
        });
    }
    let max_atoms = cfg.max_atoms.min(joint.dim()).min(joint.len());

    let grids: Vec<PatchGrid> = sources
        .iter()
        .map(|s| extract_patches(&to_grayscale(s), d, cfg.overlap))
        .collect::<Result<_>>()?;
    let mut codes = Vec::with_capacity(sources.len());
    for g in &grids {
        let pre = preprocess(g.clone());
        let mut c = batch_encode(&pre, &joint, cfg.eps, max_atoms)?;
        if let Some(len) = padded_len {
            c = c.iter().map(|x| x.padded(len)).collect();
        }
        codes.push(c);
    }
    Ok(EncodedSources {
        sources: sources.to_vec(),
        grids,
        codes,
        cfg: *cfg,
    })
}

impl EncodedSources {
    pub fn config(&self) -> &FusionConfig {
        &self.cfg
    }

    /// Decision mask for a given `omega`.
    pub fn decide(&self, omega: f64) -> Result<DecisionMask> {
        check_omega(omega)?;
        let anchors = &self.grids[0].anchors;
        let decisions: Vec<(usize, Vec<f64>, bool)> = (0..anchors.len())
            .into_par_iter()
            .map(|a| {
                let set: Vec<SparseCode> = self.codes.iter().map(|c| c[a].clone()).collect();
                let (win, scores) = select(&set, omega)?;
                if set.iter().all(SparseCode::is_zero) {
                    let vars: Vec<f64> = self.grids.iter().map(|g| variance(g.vector(a))).collect();
                    Ok((argmax_first(&vars), scores, true))
                } else {
                    Ok((win, scores, false))
                }
            })
            .collect::<Result<_>>()?;
        let (rows, cols) = self.grids[0].grid_shape();
        Ok(DecisionMask {
            rows,
            cols,
            sources: self.sources.len(),
            winner: decisions.iter().map(|x| x.0).collect(),
            scores: decisions.iter().flat_map(|x| x.1.iter().copied()).collect(),
            fallback: decisions.iter().map(|x| x.2).collect(),
            anchors: anchors.clone(),
            patch_side: self.cfg.patch_side,
        })
    }

    /// Selects patches with weight `omega`, overlap-averages them and, when
    /// configured, refines each plane by TV.
    pub fn fuse(&self, omega: f64) -> Result<FusionOutput> {
        let mask = self.decide(omega)?;
        let first = &self.sources[0];
        let (h, w, planes) = (first.height(), first.width(), first.planes());
        let anchors = &mask.anchors;
        let mut initial_planes = Vec::with_capacity(planes);
        for p in 0..planes {
            let plane_grids: Vec<PatchGrid> = if planes == 1 {
                self.grids.clone()
            } else {
                self.sources
                    .iter()
                    .map(|s| extract_patches(&s.plane_image(p), self.cfg.patch_side, self.cfg.overlap))
                    .collect::<Result<_>>()?
            };
            let chosen: Vec<Vec<f64>> = (0..anchors.len())
                .map(|a| {
                    let candidates: Vec<&[f64]> = plane_grids.iter().map(|g| g.vector(a)).collect();
                    apply_mask(mask.winner[a], &candidates).map(<[f64]>::to_vec)
                })
                .collect::<Result<_>>()?;
            initial_planes.push(reconstruct_overlap_average(anchors, &chosen, h, w)?);
        }
        let initial = Image::from_planes(&initial_planes)?;

        let (fused, tv_converged) = if self.cfg.tv_enabled {
            let mut refined = Vec::with_capacity(planes);
            let mut converged = true;
            for plane in &initial_planes {
                let out = tv_admm(plane, &self.cfg.tv)?;
                converged &= out.converged;
                refined.push(out.image);
            }
            (Image::from_planes(&refined)?, converged)
        } else {
            (initial.clone(), true)
        };

        Ok(FusionOutput {
            fused,
            initial,
            mask,
            tv_converged,
        })
    }
}
