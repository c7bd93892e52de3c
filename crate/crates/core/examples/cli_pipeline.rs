//! The full command-line workflow driven through the library: synthesize
//! scenes, annotate them, learn a dictionary, fuse, evaluate and sweep.
//! Each step mirrors one `cdl-fusion` subcommand.
//!
//! `cargo run --release --example cli_pipeline -- [work_dir] [side] [pairs] [atoms]`

use std::fmt::Write as _;
use std::path::PathBuf;

use cdl_fusion::cli::corpus::SweepParam;
use cdl_fusion::cli::{
    cmd_eval, cmd_fuse, cmd_learn, cmd_sweep, cmd_synth, EvalArgs, FuseArgs, FusionArgs, LearnArgs, LearnModeArg,
    SweepArgs, SynthArgs,
};
use cdl_fusion::{Error, Result};

pub struct Options {
    pub work_dir: PathBuf,
    pub side: usize,
    pub train_scenes: usize,
    pub pairs: usize,
    pub atoms: usize,
    pub cycles: usize,
}

/// Returns the `eval` CSV.
pub fn run(opts: &Options) -> Result<String> {
    let dir = &opts.work_dir;
    let n = opts.side;

    // cdl-fusion synth --scenes T --size NxN --out train --seed 1000
    let train = dir.join("train");
    cmd_synth(&SynthArgs {
        sources: vec![],
        scenes: opts.train_scenes,
        size: format!("{n}x{n}"),
        sigma: 2.0,
        region: "half".into(),
        out: train.clone(),
        seed: 1000,
    })?;

    // With the half-plane layout source_1 is sharp on the left half and
    // source_2 on the right half.
    let mut text = String::from("# path x y w h label\n");
    let half = n / 2;
    for i in 0..opts.train_scenes {
        let scene = format!("scene_{i:03}");
        for (x, sharp, soft) in [(0, 1, 2), (half, 2, 1)] {
            writeln!(text, "{scene}/source_{sharp}.png {x} 0 {half} {n} focused").unwrap();
            writeln!(text, "{scene}/source_{soft}.png {x} 0 {half} {n} blurred").unwrap();
        }
    }
    let annotations = train.join("annotations.txt");
    std::fs::write(&annotations, text).map_err(|e| Error::io(&annotations, e))?;

    // cdl-fusion learn --annotations train/annotations.txt --out coupled.cdl
    let dict = dir.join("coupled.cdl");
    let learned = cmd_learn(&LearnArgs {
        annotations,
        out: dict.clone(),
        mode: LearnModeArg::Coupled,
        atoms: opts.atoms,
        cycles: opts.cycles,
        eps: 0.1,
        max_atoms: 16,
        pairs: opts.pairs,
        patch: 8,
        seed: 0,
    })?;
    println!("learned from {} patch pairs -> {}", learned.pairs_used, dict.display());

    // cdl-fusion synth --scenes 2 --size NxN --out test
    let test = dir.join("test");
    cmd_synth(&SynthArgs {
        sources: vec![],
        scenes: 2,
        size: format!("{n}x{n}"),
        sigma: 2.0,
        region: "half".into(),
        out: test.clone(),
        seed: 0,
    })?;

    // cdl-fusion fuse test/scene_000/source_1.png test/scene_000/source_2.png --dict coupled.cdl --out fused.png
    let scene = test.join("scene_000");
    let inputs = vec![scene.join("source_1.png"), scene.join("source_2.png")];
    let fused = dir.join("fused.png");
    let summary = cmd_fuse(&FuseArgs {
        inputs: inputs.clone(),
        dict: dict.clone(),
        out: fused.clone(),
        mask_out: None,
        strict_convergence: false,
        fusion: FusionArgs::default(),
    })?;
    println!(
        "fused -> {}, mask -> {}",
        summary.fused_path.display(),
        summary.mask_path.display()
    );

    // cdl-fusion eval --fused fused.png --source ... --reference test/scene_000/sharp.png
    // (prints the CSV row to stdout)
    let csv = cmd_eval(&EvalArgs {
        fused,
        sources: inputs,
        reference: Some(scene.join("sharp.png")),
        id: Some("scene_000".into()),
        out: None,
    })?;
    let csv = String::from_utf8_lossy(&csv).into_owned();

    // cdl-fusion sweep --corpus test --dict coupled.cdl --param omega --range 0.5:0.7:0.1 --out sweep.csv
    let sweep_out = dir.join("sweep.csv");
    cmd_sweep(&SweepArgs {
        corpus: test,
        dict: vec![dict],
        param: SweepParam::Omega,
        range: "0.5:0.7:0.1".into(),
        out: Some(sweep_out.clone()),
        fusion: FusionArgs::default(),
    })?;
    let table = std::fs::read_to_string(&sweep_out).map_err(|e| Error::io(&sweep_out, e))?;
    print!("{table}");
    Ok(csv)
}

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parse = |i: usize, default: usize| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let opts = Options {
        work_dir: PathBuf::from(args.first().map(String::as_str).unwrap_or("cli_pipeline_out")),
        side: parse(1, 128),
        train_scenes: 4,
        pairs: parse(2, 20_000),
        atoms: parse(3, 256),
        cycles: 10,
    };
    run(&opts).map(|_| ())
}
