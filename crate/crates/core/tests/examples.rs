//! Runs every example at reduced size.

#[path = "../examples/cli_pipeline.rs"]
#[allow(dead_code)]
mod cli_pipeline;
#[path = "../examples/coupled_vs_separate.rs"]
#[allow(dead_code)]
mod coupled_vs_separate;
#[path = "../examples/evaluate_metrics.rs"]
#[allow(dead_code)]
mod evaluate_metrics;
#[path = "../examples/fuse_pair.rs"]
#[allow(dead_code)]
mod fuse_pair;
#[path = "../examples/learn_coupled.rs"]
#[allow(dead_code)]
mod learn_coupled;
#[path = "../examples/omega_sweep.rs"]
#[allow(dead_code)]
mod omega_sweep;
#[path = "../examples/sparse_selection.rs"]
#[allow(dead_code)]
mod sparse_selection;
#[path = "../examples/synth_corpus.rs"]
#[allow(dead_code)]
mod synth_corpus;
#[path = "../examples/tv_refine.rs"]
#[allow(dead_code)]
mod tv_refine;

use cdl_fusion::KsvdParams;

fn small_ksvd() -> KsvdParams {
    KsvdParams {
        atoms: 64,
        cycles: 3,
        ..KsvdParams::default()
    }
}

#[test]
fn synth_corpus_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let opts = synth_corpus::Options {
        out_dir: dir.path().join("corpus"),
        scenes: 3,
        side: 48,
        sigma: 2.0,
    };
    assert_eq!(synth_corpus::run(&opts).unwrap(), 3);
}

#[test]
fn learn_coupled_objective_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let opts = learn_coupled::Options {
        out: dir.path().join("d.cdl"),
        pairs: 2000,
        ksvd: small_ksvd(),
    };
    let objective = learn_coupled::run(&opts).unwrap();
    assert_eq!(objective.len(), 3);
    assert!(objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)));
    assert!(opts.out.exists());
}

#[test]
fn sparse_selection_prefers_sharp_patches() {
    let opts = sparse_selection::Options {
        pairs: 2000,
        ksvd: small_ksvd(),
        probes: 100,
    };
    assert!(sparse_selection::run(&opts).unwrap() > 0.8);
}

#[test]
fn fuse_pair_recovers_mask() {
    let dir = tempfile::tempdir().unwrap();
    let opts = fuse_pair::Options {
        side: 64,
        train_pairs: 2000,
        ksvd: small_ksvd(),
        out_dir: Some(dir.path().join("out")),
    };
    let s = fuse_pair::run(&opts).unwrap();
    assert!(s.mask_accuracy > 0.9, "mask accuracy {}", s.mask_accuracy);
    assert!(s.fused_mse < s.best_source_mse);
    assert!(std::fs::read_dir(dir.path().join("out")).unwrap().count() > 0);
}

#[test]
fn tv_refine_reduces_error() {
    let (before, after) = tv_refine::run(&tv_refine::Options { side: 32, eta: 0.05 }).unwrap();
    assert!(after < before);
}

#[test]
fn evaluate_metrics_ranks_ground_truth_first_on_reference_metrics() {
    let reports = evaluate_metrics::run(48).unwrap();
    let truth = &reports[0].1;
    assert_eq!(truth.mse, Some(0.0));
    for (_, r) in &reports[1..] {
        assert!(r.mse.unwrap() > 0.0);
        assert!(r.ssim.unwrap() < truth.ssim.unwrap());
    }
}

#[test]
fn coupled_vs_separate_runs_all_three() {
    let opts = coupled_vs_separate::Options {
        scenes: 1,
        side: 48,
        pairs: 2000,
        ksvd: small_ksvd(),
    };
    let rows = coupled_vs_separate::run(&opts).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.0).collect();
    assert_eq!(names, ["coupled", "separate", "single"]);
}

#[test]
fn omega_sweep_emits_one_row_per_value() {
    let opts = omega_sweep::Options {
        scenes: 1,
        side: 48,
        pairs: 2000,
        ksvd: small_ksvd(),
        range: "0.5:0.7:0.1".into(),
    };
    let rows = omega_sweep::run(&opts).unwrap();
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    assert_eq!(values.len(), 3);
    assert!((values[2] - 0.7).abs() < 1e-12);
}

#[test]
fn cli_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let opts = cli_pipeline::Options {
        work_dir: dir.path().to_path_buf(),
        side: 48,
        train_scenes: 2,
        pairs: 2000,
        atoms: 64,
        cycles: 3,
    };
    let csv = cli_pipeline::run(&opts).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("id,nmi,qabf,ssim,mse"));
    assert!(lines.next().unwrap().starts_with("scene_000,"));
    for f in ["coupled.cdl", "fused.png", "fused_mask.png", "sweep.csv"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}
