//! Sweep the focused-subspace weight omega over a synthetic corpus and
//! print the averaged metrics as CSV.
//!
//! `cargo run --release --example omega_sweep -- [scenes] [side] [pairs] [range]`

use cdl_fusion::cli::corpus::{sweep, synthetic_corpus, SweepParam, SweepRow};
use cdl_fusion::cli::dictfile::DictionaryFile;
use cdl_fusion::cli::range::ParamRange;
use cdl_fusion::cli::sweep_csv;
use cdl_fusion::{coupled_learn, FusionConfig, KsvdParams, Result, TrainingSet};

pub struct Options {
    pub scenes: usize,
    pub side: usize,
    pub pairs: usize,
    pub ksvd: KsvdParams,
    pub range: String,
}

pub fn run(opts: &Options) -> Result<Vec<SweepRow>> {
    let ts = TrainingSet::synthetic(4, 128, 2.0, 8, opts.pairs, 1000)?;
    let dict = DictionaryFile::Pair(coupled_learn(&ts, &opts.ksvd)?);
    let corpus = synthetic_corpus(opts.scenes, opts.side, 2.0, 0)?;
    let values = opts.range.parse::<ParamRange>()?.values();
    let rows = sweep(&corpus, &[dict], &FusionConfig::default(), SweepParam::Omega, &values)?;
    print!("{}", String::from_utf8_lossy(&sweep_csv(SweepParam::Omega, &rows)?));
    Ok(rows)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parse = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let opts = Options {
        scenes: parse(0, 6),
        side: parse(1, 128),
        pairs: parse(2, 20_000),
        ksvd: KsvdParams::default(),
        range: args.get(3).cloned().unwrap_or_else(|| "0.5:0.98:0.04".into()),
    };
    run(&opts).map(|_| ())
}
