//! Learn a coupled focused/blurred dictionary, inspect the K-SVD objective
//! and the atom pairs, and store it as a CDL1 file.
//!
//! `cargo run --release --example learn_coupled -- [out.cdl] [pairs] [atoms] [cycles]`

use std::path::PathBuf;

use cdl_fusion::cli::dictfile::DictionaryFile;
use cdl_fusion::dictionary_learning::coupled_learn_detailed;
use cdl_fusion::{KsvdParams, Result, TrainingSet};

pub struct Options {
    pub out: PathBuf,
    pub pairs: usize,
    pub ksvd: KsvdParams,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Returns the per-cycle objective.
pub fn run(opts: &Options) -> Result<Vec<f64>> {
    let ts = TrainingSet::synthetic(4, 128, 2.0, 8, opts.pairs, 1000)?;
    println!("{} training pairs of dimension {}", ts.len(), ts.dim());
    let out = coupled_learn_detailed(&ts, &opts.ksvd)?;
    for (cycle, obj) in out.objective.iter().enumerate() {
        println!("cycle {:>2}: objective {obj:.4}", cycle + 1);
    }

    let dict = &out.dictionary;
    let mean_support =
        out.shared_codes.iter().map(|c| c.support.len()).sum::<usize>() as f64 / out.shared_codes.len() as f64;
    let pair_corr = (0..dict.atoms())
        .map(|j| dot(dict.focused.atom(j), dict.blurred.atom(j)).abs())
        .sum::<f64>()
        / dict.atoms() as f64;
    println!("mean atoms per shared code {mean_support:.2}");
    println!("mean |<focused_j, blurred_j>| over atom pairs {pair_corr:.3}");

    let file = DictionaryFile::Pair(dict.clone());
    file.save(&opts.out)?;
    let reloaded = DictionaryFile::load(&opts.out)?;
    assert_eq!(reloaded, file, "CDL1 round trip must be exact");
    println!("wrote {}", opts.out.display());
    Ok(out.objective)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parse = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let opts = Options {
        out: PathBuf::from(args.first().map(String::as_str).unwrap_or("coupled.cdl")),
        pairs: parse(1, 20_000),
        ksvd: KsvdParams {
            atoms: parse(2, 256),
            cycles: parse(3, 10),
            ..KsvdParams::default()
        },
    };
    run(&opts).map(|_| ())
}
