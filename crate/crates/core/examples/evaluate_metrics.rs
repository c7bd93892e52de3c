//! Fusion metrics on simple cases: a perfect fusion, each source alone, and
//! a naive average.
//!
//! `cargo run --release --example evaluate_metrics -- [side]`

use cdl_fusion::imaging::{generate_multifocus, synthetic_scene, Image};
use cdl_fusion::metrics::{evaluate, MetricReport};
use cdl_fusion::Result;

/// Returns the reports in the order printed.
pub fn run(side: usize) -> Result<Vec<(String, MetricReport)>> {
    let sharp = synthetic_scene(side, side, 11)?;
    let region: Vec<bool> = (0..side * side).map(|i| i % side < side / 2).collect();
    let set = generate_multifocus(&sharp, 2.0, &region)?;
    let average = Image::new(
        side,
        side,
        1,
        set.sources[0]
            .data()
            .iter()
            .zip(set.sources[1].data())
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
    )?;
    let candidates = [
        ("ground truth", &set.sharp),
        ("source 1", &set.sources[0]),
        ("source 2", &set.sources[1]),
        ("average", &average),
    ];
    println!(
        "{:<14} {:>8} {:>8} {:>8} {:>9}",
        "fused", "NMI", "Q_AB/F", "SSIM", "MSE"
    );
    let mut reports = Vec::new();
    for (name, img) in candidates {
        let r = evaluate(&set.sources, img, Some(&set.sharp))?;
        println!(
            "{name:<14} {:>8.4} {:>8.4} {:>8.4} {:>9.3}",
            r.nmi,
            r.qabf,
            r.ssim.unwrap_or(f64::NAN),
            r.mse.unwrap_or(f64::NAN)
        );
        reports.push((name.to_string(), r));
    }
    Ok(reports)
}

fn main() -> Result<()> {
    let side = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(128);
    run(side).map(|_| ())
}
