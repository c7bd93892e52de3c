//! Generate a synthetic multi-focus corpus on disk in the layout read by
//! `cdl-fusion sweep`: one directory per scene holding `source_<k>.png`,
//! `sharp.png` and `truth.png`.
//!
//! `cargo run --release --example synth_corpus -- <out_dir> [scenes] [side] [sigma]`

use std::path::PathBuf;

use cdl_fusion::cli::corpus::{load_corpus, synthetic_corpus, write_scene};
use cdl_fusion::metrics::mse;
use cdl_fusion::Result;

pub struct Options {
    pub out_dir: PathBuf,
    pub scenes: usize,
    pub side: usize,
    pub sigma: f64,
}

/// Writes the corpus, reads it back and returns the number of scenes.
pub fn run(opts: &Options) -> Result<usize> {
    let corpus = synthetic_corpus(opts.scenes, opts.side, opts.sigma, 0)?;
    for scene in &corpus {
        write_scene(&opts.out_dir, scene)?;
    }
    let loaded = load_corpus(&opts.out_dir)?;
    for scene in &loaded {
        let reference = scene.reference.as_ref().expect("sharp.png is written");
        let errors: Vec<String> = scene
            .sources
            .iter()
            .map(|s| mse(reference, s).map(|e| format!("{e:.1}")))
            .collect::<Result<_>>()?;
        println!(
            "{}: {} sources, MSE to sharp [{}]",
            scene.id,
            scene.sources.len(),
            errors.join(", ")
        );
    }
    Ok(loaded.len())
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let opts = Options {
        out_dir: PathBuf::from(args.first().map(String::as_str).unwrap_or("corpus")),
        scenes: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(6),
        side: args.get(2).and_then(|s| s.parse().ok()).unwrap_or(128),
        sigma: args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2.0),
    };
    let n = run(&opts)?;
    println!("{n} scenes in {}", opts.out_dir.display());
    Ok(())
}
