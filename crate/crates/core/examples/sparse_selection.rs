//! Code a sharp patch and its blurred counterpart over `[D^F, D^B]` and
//! show how the weighted l1 rule picks the sharp one.
//!
//! `cargo run --release --example sparse_selection -- [pairs] [atoms]`

use cdl_fusion::fusion::select;
use cdl_fusion::imaging::{extract_patches, gaussian_blur, preprocess, synthetic_scene};
use cdl_fusion::{coupled_learn, omp_encode, KsvdParams, Result, TrainingSet};

pub struct Options {
    pub pairs: usize,
    pub ksvd: KsvdParams,
    /// Number of test positions.
    pub probes: usize,
}

/// Returns the fraction of probes where the sharp patch wins at the default
/// weight.
pub fn run(opts: &Options) -> Result<f64> {
    let ts = TrainingSet::synthetic(4, 128, 2.0, 8, opts.pairs, 1000)?;
    let dict = coupled_learn(&ts, &opts.ksvd)?;
    let joint = dict.concatenated();
    let m = dict.atoms();

    let sharp = synthetic_scene(64, 64, 42)?;
    let blurred = gaussian_blur(&sharp, 2.0)?;
    let gs = preprocess(extract_patches(&sharp, 8, 7)?);
    let gb = preprocess(extract_patches(&blurred, 8, 7)?);

    let (mut wins, mut total) = (0, 0);
    let step = (gs.len() / opts.probes.max(1)).max(1);
    for i in (0..gs.len()).step_by(step).take(opts.probes) {
        if gs.degenerate[i] || gb.degenerate[i] {
            continue;
        }
        let cs = omp_encode(gs.vector(i), &joint, 0.1, 16)?;
        let cb = omp_encode(gb.vector(i), &joint, 0.1, 16)?;
        let (winner, scores) = select(&[cs.clone(), cb.clone()], 0.54)?;
        if total < 5 {
            println!(
                "anchor {:?}: sharp |aF|={:.2} |aB|={:.2}; blurred |aF|={:.2} |aB|={:.2}; scores {:.3} vs {:.3} -> source {}",
                gs.anchors[i],
                cs.l1_in(0..m),
                cs.l1_in(m..2 * m),
                cb.l1_in(0..m),
                cb.l1_in(m..2 * m),
                scores[0],
                scores[1],
                winner + 1
            );
        }
        wins += usize::from(winner == 0);
        total += 1;
    }
    let rate = wins as f64 / total.max(1) as f64;
    println!(
        "sharp patch selected at {wins} of {total} positions ({:.1}%)",
        100.0 * rate
    );
    Ok(rate)
}

fn main() -> Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let opts = Options {
        pairs: args.first().copied().unwrap_or(20_000),
        ksvd: KsvdParams {
            atoms: args.get(1).copied().unwrap_or(256),
            ..KsvdParams::default()
        },
        probes: 400,
    };
    run(&opts).map(|_| ())
}
