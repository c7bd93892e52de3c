//! Total-variation refinement of a noisy step image with ADMM, compared
//! against a long-run solution.
//!
//! `cargo run --release --example tv_refine -- [side] [eta]`

use cdl_fusion::imaging::Image;
use cdl_fusion::metrics::mse;
use cdl_fusion::tv::{total_variation, tv_admm, TvParams};
use cdl_fusion::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Options {
    pub side: usize,
    pub eta: f64,
}

/// Returns (noisy MSE, refined MSE) against the clean step.
pub fn run(opts: &Options) -> Result<(f64, f64)> {
    let n = opts.side;
    let clean = Image::from_fn(n, n, |_, c| if c < n / 2 { 0.3 } else { 0.7 })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noisy_data: Vec<f64> = clean.data().iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
    let noisy = Image::from_clipped(n, n, 1, noisy_data)?;

    let params = TvParams {
        eta: opts.eta,
        ..TvParams::default()
    };
    let out = tv_admm(&noisy, &params)?;
    println!(
        "{} iterations, converged {}, objective {:.5} -> {:.5}",
        out.iterations,
        out.converged,
        out.objective.first().copied().unwrap_or(f64::NAN),
        out.objective.last().copied().unwrap_or(f64::NAN)
    );
    println!(
        "total variation {:.2} -> {:.2}",
        total_variation(noisy.data(), n, n),
        total_variation(out.image.data(), n, n)
    );
    let before = mse(&clean, &noisy)?;
    let after = mse(&clean, &out.image)?;
    println!("MSE to clean step: noisy {before:.2}, refined {after:.2}");
    Ok((before, after))
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let opts = Options {
        side: args.first().and_then(|s| s.parse().ok()).unwrap_or(128),
        eta: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.05),
    };
    run(&opts).map(|_| ())
}
