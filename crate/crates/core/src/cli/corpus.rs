//! Multi-focus corpora on disk and in memory, plus corpus-level evaluation.
//!
//! A corpus directory holds one sub-directory per scene containing
//! `source_1.png` .. `source_K.png`, and optionally `sharp.png` (ground
//! truth) and `truth.png` (region labels, label `k` stored as
//! `k * floor(255 / (K - 1))`).

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fusion::{
    encode_sources, fuse_images, fuse_images_single, CodingDictionary, EncodedSources, FusionConfig, FusionOutput,
};
use crate::imaging::{
    generate_series, load_image, save_image, synthetic_scene, Image, LabelMap, MultiFocusSet, RegionSpec,
};
use crate::metrics::{evaluate, MetricReport};

use super::dictfile::DictionaryFile;

#[derive(Debug, Clone)]
pub struct Scene {
    pub id: String,
    pub sources: Vec<Image>,
    pub reference: Option<Image>,
    pub truth: Option<LabelMap>,
}

impl Scene {
    pub fn from_set(id: impl Into<String>, set: MultiFocusSet) -> Self {
        Self {
            id: id.into(),
            sources: set.sources,
            reference: Some(set.sharp),
            truth: Some(set.truth),
        }
    }
}

/// `count` generated two-source scenes of `side x side` pixels. Layouts
/// cycle through a half plane, a centred disc and two wedges; scene `i`
/// uses seed `seed + i`.
pub fn synthetic_corpus(count: usize, side: usize, sigma: f64, seed: u64) -> Result<Vec<Scene>> {
    let layouts = [
        RegionSpec::HalfPlane,
        RegionSpec::Circle { radius: 0.3 },
        RegionSpec::Wedges(2),
    ];
    (0..count)
        .map(|i| {
            let sharp = synthetic_scene(side, side, seed.wrapping_add(i as u64))?;
            let labels = layouts[i % layouts.len()].labels(side, side)?;
            let set = generate_series(&sharp, sigma, &labels)?;
            Ok(Scene::from_set(format!("scene_{i:03}"), set))
        })
        .collect()
}

pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    let sub = dir.join(&scene.id);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    for (k, s) in scene.sources.iter().enumerate() {
        save_image(sub.join(format!("source_{}.png", k + 1)), s)?;
    }
    if let Some(r) = &scene.reference {
        save_image(sub.join("sharp.png"), r)?;
    }
    if let Some(t) = &scene.truth {
        save_image(sub.join("truth.png"), &t.to_image())?;
    }
    Ok(())
}

fn source_index(path: &Path) -> Option<usize> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix("source_")?.parse().ok()
}

pub fn load_scene(dir: &Path) -> Result<Scene> {
    let mut sources: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| source_index(&p).map(|k| (k, p)))
        .collect();
    sources.sort();
    if sources.len() < 2 {
        return Err(Error::format(dir, "scene needs at least two source_<k> images"));
    }
    let images = sources.iter().map(|(_, p)| load_image(p)).collect::<Result<Vec<_>>>()?;
    let sharp = dir.join("sharp.png");
    let reference = if sharp.exists() {
        Some(load_image(&sharp)?)
    } else {
        None
    };
    let truth_path = dir.join("truth.png");
    let truth = if truth_path.exists() {
        Some(LabelMap::from_image(&load_image(&truth_path)?, images.len())?)
    } else {
        None
    };
    Ok(Scene {
        id: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sources: images,
        reference,
        truth,
    })
}

/// Loads every scene directory below `dir`, sorted by name.
pub fn load_corpus(dir: &Path) -> Result<Vec<Scene>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::format(dir, "corpus contains no scene directories"));
    }
    dirs.iter().map(|d| load_scene(d)).collect()
}

pub fn fuse_with_file(sources: &[Image], dict: &DictionaryFile, cfg: &FusionConfig) -> Result<FusionOutput> {
    match dict {
        DictionaryFile::Pair(cd) => fuse_images(sources, cd, cfg),
        DictionaryFile::Single(d) => fuse_images_single(sources, d, cfg),
    }
}

/// Metrics and mask agreement for one fused scene.
#[derive(Debug, Clone)]
pub struct SceneResult {
    pub id: String,
    pub metrics: MetricReport,
    /// Decision-mask accuracy on anchors whose window lies inside one region.
    pub mask_accuracy: Option<f64>,
}

pub fn coding_dictionary(dict: &DictionaryFile) -> CodingDictionary<'_> {
    match dict {
        DictionaryFile::Pair(cd) => CodingDictionary::Coupled(cd),
        DictionaryFile::Single(d) => CodingDictionary::Single(d),
    }
}

pub fn evaluate_scene(scene: &Scene, dict: &DictionaryFile, cfg: &FusionConfig) -> Result<SceneResult> {
    let out = fuse_with_file(&scene.sources, dict, cfg)?;
    score_output(scene, &out)
}

fn score_output(scene: &Scene, out: &FusionOutput) -> Result<SceneResult> {
    let metrics = evaluate(&scene.sources, &out.fused, scene.reference.as_ref())?;
    let mask_accuracy = scene.truth.as_ref().map(|t| out.mask.accuracy(t, 0).0);
    Ok(SceneResult {
        id: scene.id.clone(),
        metrics,
        mask_accuracy,
    })
}

/// Averages of [`SceneResult`] fields over a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusAverage {
    pub nmi: f64,
    pub qabf: f64,
    pub mask_accuracy: Option<f64>,
    pub scenes: usize,
}

pub fn average(results: &[SceneResult]) -> CorpusAverage {
    let n = results.len().max(1) as f64;
    let accs: Vec<f64> = results.iter().filter_map(|r| r.mask_accuracy).collect();
    CorpusAverage {
        nmi: results.iter().map(|r| r.metrics.nmi).sum::<f64>() / n,
        qabf: results.iter().map(|r| r.metrics.qabf).sum::<f64>() / n,
        mask_accuracy: if accs.is_empty() {
            None
        } else {
            Some(accs.iter().sum::<f64>() / accs.len() as f64)
        },
        scenes: results.len(),
    }
}

pub fn evaluate_corpus(scenes: &[Scene], dict: &DictionaryFile, cfg: &FusionConfig) -> Result<CorpusAverage> {
    let results = scenes
        .iter()
        .map(|s| evaluate_scene(s, dict, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(average(&results))
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepParam {
    Omega,
    Eps,
    Patch,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Omega => "omega",
            SweepParam::Eps => "eps",
            SweepParam::Patch => "patch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub average: CorpusAverage,
}

/// Fuses the corpus once per value and averages the metrics.
///
/// Patch sweeps pick, for each side `d`, the first dictionary of dimension
/// `d^2`; the overlap is kept at `d - 1`. Omega sweeps code each scene once.
/// Single dictionaries always select at `omega = 0.5`.
pub fn sweep(
    scenes: &[Scene],
    dicts: &[DictionaryFile],
    base: &FusionConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(values.len());
    if param == SweepParam::Omega {
        return sweep_omega(scenes, dicts, base, values);
    }
    for &value in values {
        let mut cfg = *base;
        match param {
            SweepParam::Omega => cfg.omega = value,
            SweepParam::Eps => cfg.eps = value,
            SweepParam::Patch => {
                if value.fract() != 0.0 || value < 2.0 {
                    return Err(Error::param(
                        "range",
                        format!("patch side {value} is not an integer >= 2"),
                    ));
                }
                cfg.patch_side = value as usize;
                cfg.overlap = cfg.patch_side - 1;
            }
        }
        cfg.validate()?;
        let dim = cfg.patch_side * cfg.patch_side;
        let dict = dicts
            .iter()
            .find(|d| d.dim() == dim)
            .ok_or_else(|| Error::param("dict", format!("no dictionary with dimension {dim}")))?;
        rows.push(SweepRow {
            value,
            average: evaluate_corpus(scenes, dict, &cfg)?,
        });
    }
    Ok(rows)
}

fn sweep_omega(
    scenes: &[Scene],
    dicts: &[DictionaryFile],
    base: &FusionConfig,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let dim = base.patch_side * base.patch_side;
    let dict = dicts
        .iter()
        .find(|d| d.dim() == dim)
        .ok_or_else(|| Error::param("dict", format!("no dictionary with dimension {dim}")))?;
    let single = matches!(dict, DictionaryFile::Single(_));
    let encoded: Vec<EncodedSources> = scenes
        .iter()
        .map(|s| encode_sources(&s.sources, coding_dictionary(dict), base))
        .collect::<Result<_>>()?;
    values
        .iter()
        .map(|&value| {
            let omega = if single { 0.5 } else { value };
            let results = scenes
                .iter()
                .zip(&encoded)
                .map(|(scene, enc)| score_output(scene, &enc.fuse(omega)?))
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow {
                value,
                average: average(&results),
            })
        })
        .collect()
}
