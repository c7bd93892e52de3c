//! End-to-end fusion properties with a small learned dictionary.

use std::sync::OnceLock;

use cdl_fusion::fusion::{fuse_images_single, fuse_with};
use cdl_fusion::imaging::{generate_multifocus, generate_series, synthetic_scene, Image, RegionSpec};
use cdl_fusion::{
    coupled_learn, encode_sources, fuse_images, CodingDictionary, CoupledDictionary, Error, FusionConfig, KsvdParams,
    TrainingSet,
};

fn dict() -> &'static CoupledDictionary {
    static DICT: OnceLock<CoupledDictionary> = OnceLock::new();
    DICT.get_or_init(|| {
        let ts = TrainingSet::synthetic(3, 96, 2.0, 8, 3000, 1000).unwrap();
        coupled_learn(
            &ts,
            &KsvdParams {
                atoms: 64,
                cycles: 4,
                ..KsvdParams::default()
            },
        )
        .unwrap()
    })
}

fn half_pair(side: usize, seed: u64) -> cdl_fusion::imaging::MultiFocusSet {
    let sharp = synthetic_scene(side, side, seed).unwrap();
    let left: Vec<bool> = (0..side * side).map(|i| i % side < side / 2).collect();
    generate_multifocus(&sharp, 2.0, &left).unwrap()
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn identical_sources_reproduce_the_input() {
    let img = synthetic_scene(40, 40, 3).unwrap();
    let out = fuse_images(&[img.clone(), img.clone()], dict(), &FusionConfig::default()).unwrap();
    assert!(max_abs_diff(&out.fused, &img) < 1e-12);
    assert!(out.mask.winner.iter().all(|&w| w == 0), "ties go to the first source");
}

#[test]
fn fused_pixels_are_convex_combinations_of_sources() {
    let set = half_pair(48, 4);
    let out = fuse_images(&set.sources, dict(), &FusionConfig::default()).unwrap();
    let (a, b) = (set.sources[0].data(), set.sources[1].data());
    for (i, &f) in out.fused.data().iter().enumerate() {
        let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
        assert!(f >= lo - 1e-12 && f <= hi + 1e-12, "pixel {i}: {f} not in [{lo}, {hi}]");
    }
    assert_eq!(out.fused, out.initial);
}

#[test]
fn swapping_sources_permutes_decisions() {
    let set = half_pair(48, 5);
    let cfg = FusionConfig::default();
    let fwd = fuse_images(&set.sources, dict(), &cfg).unwrap();
    let rev = fuse_images(&[set.sources[1].clone(), set.sources[0].clone()], dict(), &cfg).unwrap();
    let mut compared = 0;
    for a in 0..fwd.mask.winner.len() {
        let s = fwd.mask.scores_at(a);
        if s[0] != s[1] && !fwd.mask.fallback[a] {
            assert_eq!(fwd.mask.winner[a], 1 - rev.mask.winner[a], "anchor {a}");
            compared += 1;
        }
    }
    assert!(compared > fwd.mask.winner.len() / 2);
}

#[test]
fn half_focused_pair_is_fused_toward_the_sharp_scene() {
    let set = half_pair(64, 6);
    let cfg = FusionConfig::default();
    let out = fuse_images(&set.sources, dict(), &cfg).unwrap();
    let (acc, n) = out.mask.accuracy(&set.truth, cfg.patch_side);
    assert!(n > 0);
    assert!(acc > 0.9, "mask accuracy {acc}");
    let err = |img: &Image| cdl_fusion::metrics::mse(&set.sharp, img).unwrap();
    assert!(err(&out.fused) < 0.5 * err(&set.sources[0]).min(err(&set.sources[1])));
}

#[test]
fn three_sources_are_supported() {
    let sharp = synthetic_scene(64, 64, 8).unwrap();
    let labels = RegionSpec::Wedges(3).labels(64, 64).unwrap();
    let set = generate_series(&sharp, 2.0, &labels).unwrap();
    assert_eq!(set.sources.len(), 3);
    let out = fuse_images(&set.sources, dict(), &FusionConfig::default()).unwrap();
    assert_eq!(out.mask.sources, 3);
    assert!(out.mask.winner.iter().all(|&w| w < 3));
    for k in 0..3 {
        assert!(out.mask.winner.contains(&k), "source {k} never selected");
    }
}

#[test]
fn color_sources_fuse_per_plane_with_one_mask() {
    let set = half_pair(40, 9);
    let to_rgb = |g: &Image| {
        let r = Image::from_clipped(40, 40, 1, g.data().iter().map(|v| v * 0.9).collect()).unwrap();
        let b = Image::from_clipped(40, 40, 1, g.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        Image::from_planes(&[r, g.clone(), b]).unwrap()
    };
    let rgb: Vec<Image> = set.sources.iter().map(to_rgb).collect();
    let cfg = FusionConfig::default();
    let out = fuse_images(&rgb, dict(), &cfg).unwrap();
    assert_eq!(out.fused.planes(), 3);
    // one decision per anchor drives every plane
    let green = &out.fused.data()[40 * 40..2 * 40 * 40];
    let (a, b) = (set.sources[0].data(), set.sources[1].data());
    for (i, &g) in green.iter().enumerate() {
        assert!(g >= a[i].min(b[i]) - 1e-12 && g <= a[i].max(b[i]) + 1e-12);
    }
}

#[test]
fn encode_once_then_reselect_matches_direct_fusion() {
    let set = half_pair(40, 10);
    let cfg = FusionConfig::default();
    let enc = encode_sources(&set.sources, CodingDictionary::Coupled(dict()), &cfg).unwrap();
    for omega in [0.5, 0.54, 0.8] {
        let direct = fuse_images(&set.sources, dict(), &FusionConfig { omega, ..cfg }).unwrap();
        let again = enc.fuse(omega).unwrap();
        assert_eq!(direct.fused, again.fused);
        assert_eq!(direct.mask, again.mask);
    }
}

#[test]
fn single_dictionary_fusion_runs() {
    let set = half_pair(40, 11);
    let cfg = FusionConfig::default();
    let a = fuse_images_single(&set.sources, &dict().focused, &cfg).unwrap();
    let b = fuse_with(&set.sources, CodingDictionary::Single(&dict().focused), &cfg).unwrap();
    assert_eq!(a.fused, b.fused);
}

#[test]
fn tv_refinement_changes_the_estimate_and_reports_convergence() {
    let set = half_pair(32, 12);
    let mut cfg = FusionConfig {
        tv_enabled: true,
        ..FusionConfig::default()
    };
    cfg.tv.eta = 0.05;
    let out = fuse_images(&set.sources, dict(), &cfg).unwrap();
    assert_ne!(out.fused, out.initial);
    cfg.tv.max_iters = 1;
    cfg.tv.tol = 1e-30;
    assert!(!fuse_images(&set.sources, dict(), &cfg).unwrap().tv_converged);
}

#[test]
fn invalid_inputs_are_rejected() {
    let a = synthetic_scene(32, 32, 1).unwrap();
    let b = synthetic_scene(32, 40, 1).unwrap();
    let cfg = FusionConfig::default();
    assert!(fuse_images(&[a.clone(), b], dict(), &cfg).is_err());
    assert!(fuse_images(std::slice::from_ref(&a), dict(), &cfg).is_err());
    let err = fuse_images(&[a.clone(), a.clone()], dict(), &FusionConfig { omega: 1.0, ..cfg }).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter { name: "omega", .. }));
    assert_eq!(err.exit_code(), 1);
    let small = synthetic_scene(4, 4, 1).unwrap();
    assert!(fuse_images(&[small.clone(), small], dict(), &cfg).is_err());
}
