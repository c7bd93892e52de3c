//! Command-line front end: argument types, the `learn`, `fuse`, `eval`,
//! `sweep` and `synth` commands, and their file formats.
//!
//! Every command is an ordinary library function taking its argument
//! struct, so experiments can be scripted without spawning processes.

pub mod annotations;
pub mod corpus;
pub mod dictfile;
pub mod range;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dictionary_learning::{coupled_learn, ksvd_learn_detailed, learn_separate, KsvdParams, TrainingSet};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::imaging::{generate_series, load_image, save_image, synthetic_scene, write_atomic, LabelMap, RegionSpec};
use crate::metrics::{evaluate, MetricReport};
use crate::sparse_coding::DictionaryLabel;
use crate::tv::TvParams;

use self::corpus::{load_corpus, write_scene, Scene, SweepParam, SweepRow};
use self::dictfile::DictionaryFile;
use self::range::ParamRange;

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "CDL_FUSION_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "cdl-fusion",
    version,
    about = "Multi-focus image fusion over coupled sparse dictionaries"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a dictionary from annotated training images.
    Learn(LearnArgs),
    /// Fuse aligned multi-focus images.
    Fuse(FuseArgs),
    /// Score a fused image.
    Eval(EvalArgs),
    /// Average metrics over a corpus while varying one parameter.
    Sweep(SweepArgs),
    /// Generate a synthetic multi-focus corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnModeArg {
    Coupled,
    Separate,
    Single,
}

#[derive(Debug, Clone, Args)]
pub struct LearnArgs {
    /// Rectangle annotation file (`path x y w h focused|blurred` per line).
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "coupled")]
    pub mode: LearnModeArg,
    /// Atoms per sub-dictionary.
    #[arg(long, default_value_t = 256)]
    pub atoms: usize,
    #[arg(long, default_value_t = 10)]
    pub cycles: usize,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 16)]
    pub max_atoms: usize,
    /// Number of training patch pairs sampled.
    #[arg(long, default_value_t = 30_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Fusion and TV options shared by `fuse` and `sweep`.
#[derive(Debug, Clone, Args)]
pub struct FusionArgs {
    #[arg(long, default_value_t = 0.54)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 8)]
    pub patch: usize,
    #[arg(long, default_value_t = 7)]
    pub overlap: usize,
    #[arg(long, default_value_t = 16)]
    pub max_atoms: usize,
    /// Run the TV global reconstruction after patch fusion.
    #[arg(long)]
    pub tv: bool,
    #[arg(long, default_value_t = 1e-5)]
    pub tv_eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tv_rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub tv_gamma: f64,
    #[arg(long, default_value_t = 200)]
    pub tv_max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tv_tol: f64,
}

impl Default for FusionArgs {
    fn default() -> Self {
        let cfg = FusionConfig::default();
        Self {
            omega: cfg.omega,
            eps: cfg.eps,
            patch: cfg.patch_side,
            overlap: cfg.overlap,
            max_atoms: cfg.max_atoms,
            tv: cfg.tv_enabled,
            tv_eta: cfg.tv.eta,
            tv_rho: cfg.tv.rho,
            tv_gamma: cfg.tv.gamma,
            tv_max_iters: cfg.tv.max_iters,
            tv_tol: cfg.tv.tol,
        }
    }
}

impl FusionArgs {
    pub fn config(&self) -> Result<FusionConfig> {
        let cfg = FusionConfig {
            omega: self.omega,
            eps: self.eps,
            patch_side: self.patch,
            overlap: self.overlap,
            max_atoms: self.max_atoms,
            tv_enabled: self.tv,
            tv: TvParams {
                eta: self.tv_eta,
                rho: self.tv_rho,
                gamma: self.tv_gamma,
                max_iters: self.tv_max_iters,
                tol: self.tv_tol,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct FuseArgs {
    /// Aligned source images (at least two).
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Decision-mask PNG; defaults to `<out stem>_mask.png`.
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    /// Treat TV non-convergence as a failure.
    #[arg(long)]
    pub strict_convergence: bool,
    #[command(flatten)]
    pub fusion: FusionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub fused: PathBuf,
    /// Source images, in order.
    #[arg(long = "source", required = true, num_args = 1..)]
    pub sources: Vec<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Identifier written in the first column; defaults to the fused file stem.
    #[arg(long)]
    pub id: Option<String>,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Dictionary files; patch sweeps need one per patch size.
    #[arg(long, required = true, num_args = 1..)]
    pub dict: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// `start:stop:step`, inclusive.
    #[arg(long)]
    pub range: String,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub fusion: FusionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Sharp source images; synthetic scenes are generated when omitted.
    #[arg(long = "source", num_args = 1..)]
    pub sources: Vec<PathBuf>,
    /// Number of generated scenes when no sources are given.
    #[arg(long, default_value_t = 6)]
    pub scenes: usize,
    /// Generated scene size, `HxW`.
    #[arg(long, default_value = "256x256")]
    pub size: String,
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    /// `half`, `circle[:radius]`, `wedges:K` or `mask:PATH`.
    #[arg(long, default_value = "half")]
    pub region: String,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// What `learn` produced.
#[derive(Debug, Clone)]
pub struct LearnSummary {
    pub dictionary: DictionaryFile,
    pub pairs_used: usize,
}

pub fn cmd_learn(args: &LearnArgs) -> Result<LearnSummary> {
    if args.patch < 2 {
        return Err(Error::param("patch", "patch side must be at least 2"));
    }
    let annotations = annotations::load_annotations(&args.annotations)?;
    let pairs = annotations::pair_annotations(&annotations)?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("annotation file lists no rectangles".into()));
    }
    let crops = annotations::load_training_crops(&pairs)?;
    let ts = TrainingSet::from_image_pairs(&crops, args.patch, args.pairs, args.seed)?;
    let params = KsvdParams {
        atoms: args.atoms,
        cycles: args.cycles,
        eps: args.eps,
        max_atoms: args.max_atoms,
        seed: args.seed,
    };
    log::info!("learning {:?} dictionary from {} patch pairs", args.mode, ts.len());
    let dictionary = match args.mode {
        LearnModeArg::Coupled => DictionaryFile::Pair(coupled_learn(&ts, &params)?),
        LearnModeArg::Separate => DictionaryFile::Pair(learn_separate(&ts, &params)?),
        LearnModeArg::Single => {
            DictionaryFile::Single(ksvd_learn_detailed(&ts.focused, &params, DictionaryLabel::Single)?.dictionary)
        }
    };
    dictionary.save(&args.out)?;
    Ok(LearnSummary {
        dictionary,
        pairs_used: ts.len(),
    })
}

/// What `fuse` wrote.
#[derive(Debug, Clone)]
pub struct FuseSummary {
    pub fused_path: PathBuf,
    pub mask_path: PathBuf,
    pub tv_converged: bool,
}

fn default_mask_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}_mask.png"))
}

pub fn cmd_fuse(args: &FuseArgs) -> Result<FuseSummary> {
    let cfg = args.fusion.config()?;
    let dict = DictionaryFile::load(&args.dict)?;
    let sources = args.inputs.iter().map(load_image).collect::<Result<Vec<_>>>()?;
    let out = corpus::fuse_with_file(&sources, &dict, &cfg)?;
    if !out.tv_converged && args.strict_convergence {
        return Err(Error::NotConverged(format!(
            "TV refinement did not reach tolerance {:e} in {} iterations",
            cfg.tv.tol, cfg.tv.max_iters
        )));
    }
    save_image(&args.out, &out.fused)?;
    let mask_path = args.mask_out.clone().unwrap_or_else(|| default_mask_path(&args.out));
    let (h, w) = (sources[0].height(), sources[0].width());
    save_image(&mask_path, &out.mask.to_image(h, w))?;
    Ok(FuseSummary {
        fused_path: args.out.clone(),
        mask_path,
        tv_converged: out.tv_converged,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::format("<csv>", e.to_string());
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::format("<csv>", e.to_string()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::io("<stdout>", e)),
    }
}

pub const EVAL_HEADER: [&str; 5] = ["id", "nmi", "qabf", "ssim", "mse"];

pub fn eval_row(id: &str, m: &MetricReport) -> Vec<String> {
    vec![
        id.to_string(),
        format!("{:.6}", m.nmi),
        format!("{:.6}", m.qabf),
        fmt_opt(m.ssim),
        fmt_opt(m.mse),
    ]
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<u8>> {
    let fused = load_image(&args.fused)?;
    let sources = args.sources.iter().map(load_image).collect::<Result<Vec<_>>>()?;
    let reference = args.reference.as_ref().map(load_image).transpose()?;
    let report = evaluate(&sources, &fused, reference.as_ref())?;
    let id = args.id.clone().unwrap_or_else(|| {
        args.fused
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let bytes = csv_bytes(&EVAL_HEADER, &[eval_row(&id, &report)])?;
    emit(args.out.as_deref(), &bytes)?;
    Ok(bytes)
}

pub const SWEEP_HEADER: [&str; 6] = ["param", "value", "nmi", "qabf", "mask_accuracy", "scenes"];

pub fn sweep_csv(param: SweepParam, rows: &[SweepRow]) -> Result<Vec<u8>> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                param.name().to_string(),
                format!("{}", r.value),
                format!("{:.6}", r.average.nmi),
                format!("{:.6}", r.average.qabf),
                fmt_opt(r.average.mask_accuracy),
                r.average.scenes.to_string(),
            ]
        })
        .collect();
    csv_bytes(&SWEEP_HEADER, &rows)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let range: ParamRange = args.range.parse()?;
    let base = args.fusion.config()?;
    let dicts = args.dict.iter().map(DictionaryFile::load).collect::<Result<Vec<_>>>()?;
    let scenes = load_corpus(&args.corpus)?;
    let rows = corpus::sweep(&scenes, &dicts, &base, args.param, &range.values())?;
    emit(args.out.as_deref(), &sweep_csv(args.param, &rows)?)?;
    Ok(rows)
}

/// Parses `half`, `circle[:r]`, `wedges:K` or `mask:PATH`.
pub fn parse_region(spec: &str) -> Result<RegionSpec> {
    let (kind, arg) = match spec.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (spec, None),
    };
    let bad = || Error::param("region", format!("unrecognised region `{spec}`"));
    match (kind, arg) {
        ("half", None) => Ok(RegionSpec::HalfPlane),
        ("circle", None) => Ok(RegionSpec::Circle { radius: 0.3 }),
        ("circle", Some(r)) => {
            let radius: f64 = r.parse().map_err(|_| bad())?;
            if !(radius > 0.0) {
                return Err(bad());
            }
            Ok(RegionSpec::Circle { radius })
        }
        ("wedges", Some(k)) => {
            let k: usize = k.parse().map_err(|_| bad())?;
            if k < 2 {
                return Err(bad());
            }
            Ok(RegionSpec::Wedges(k))
        }
        ("mask", Some(p)) => {
            let img = load_image(p)?;
            let region: Vec<bool> = img.plane(0).iter().map(|&v| v >= 0.5).collect();
            Ok(RegionSpec::Labels(LabelMap::from_region(
                img.height(),
                img.width(),
                &region,
            )?))
        }
        _ => Err(bad()),
    }
}

fn parse_size(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::param("size", format!("expected HxW, got `{s}`"));
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let h: usize = h.parse().map_err(|_| bad())?;
    let w: usize = w.parse().map_err(|_| bad())?;
    if h == 0 || w == 0 {
        return Err(bad());
    }
    Ok((h, w))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<Scene>> {
    if !(args.sigma > 0.0) {
        return Err(Error::param("sigma", "blur sigma must be positive"));
    }
    let region = parse_region(&args.region)?;
    let sharp_images: Vec<(String, crate::imaging::Image)> = if args.sources.is_empty() {
        let (h, w) = parse_size(&args.size)?;
        (0..args.scenes)
            .map(|i| {
                let seed = args.seed.wrapping_add(i as u64);
                Ok((format!("scene_{i:03}"), synthetic_scene(h, w, seed)?))
            })
            .collect::<Result<_>>()?
    } else {
        args.sources
            .iter()
            .map(|p| {
                let id = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok((id, load_image(p)?))
            })
            .collect::<Result<_>>()?
    };
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut scenes = Vec::with_capacity(sharp_images.len());
    for (id, sharp) in sharp_images {
        let labels = region.labels(sharp.height(), sharp.width())?;
        let set = generate_series(&sharp, args.sigma, &labels)?;
        let scene = Scene::from_set(id, set);
        write_scene(&args.out, &scene)?;
        scenes.push(scene);
    }
    Ok(scenes)
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Learn(a) => {
            let s = cmd_learn(a)?;
            log::info!("wrote {} ({} pairs)", a.out.display(), s.pairs_used);
        }
        Command::Fuse(a) => {
            let s = cmd_fuse(a)?;
            if !s.tv_converged {
                log::warn!("TV refinement did not converge; wrote best iterate");
            }
            log::info!("wrote {} and {}", s.fused_path.display(), s.mask_path.display());
        }
        Command::Eval(a) => {
            cmd_eval(a)?;
        }
        Command::Sweep(a) => {
            cmd_sweep(a)?;
        }
        Command::Synth(a) => {
            let scenes = cmd_synth(a)?;
            log::info!("wrote {} scenes to {}", scenes.len(), a.out.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults_match_fusion_config() {
        let cli =
            Cli::try_parse_from(["cdl-fusion", "fuse", "a.png", "b.png", "--dict", "d.cdl", "-o", "f.png"]).unwrap();
        let Command::Fuse(f) = cli.command else { panic!() };
        assert_eq!(f.fusion.config().unwrap(), FusionConfig::default());
    }

    #[test]
    fn region_specs() {
        assert_eq!(parse_region("half").unwrap(), RegionSpec::HalfPlane);
        assert_eq!(parse_region("wedges:3").unwrap(), RegionSpec::Wedges(3));
        assert_eq!(
            parse_region("circle:0.25").unwrap(),
            RegionSpec::Circle { radius: 0.25 }
        );
        for bad in ["wedges:1", "circle:-1", "disc", "half:2"] {
            assert!(parse_region(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn mask_path_default() {
        assert_eq!(
            default_mask_path(Path::new("/x/fused.png")),
            Path::new("/x/fused_mask.png")
        );
    }

    #[test]
    fn omega_out_of_range_is_usage_error() {
        let args = FusionArgs {
            omega: 1.2,
            ..FusionArgs::default()
        };
        assert_eq!(args.config().unwrap_err().exit_code(), 1);
    }
}
