//! K-SVD and coupled/separate learning at the public API.

use cdl_fusion::dictionary_learning::{coupled_learn_detailed, discrimination_rates, ksvd_learn_detailed};
use cdl_fusion::{coupled_learn, learn_separate, DictionaryLabel, Error, KsvdParams, LearningMode, TrainingSet};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn params() -> KsvdParams {
    KsvdParams {
        atoms: 32,
        cycles: 3,
        ..KsvdParams::default()
    }
}

fn random_unit_columns(dim: usize, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(dim, n, |_, _| StandardNormal.sample(&mut rng));
    for mut c in m.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    m
}

fn column_norms_are_unit(m: &DMatrix<f64>) -> bool {
    m.column_iter().all(|c| (c.norm() - 1.0).abs() < 1e-9)
}

#[test]
fn learning_is_deterministic_for_a_seed() {
    let ts = TrainingSet::synthetic(2, 64, 2.0, 8, 1000, 1000).unwrap();
    let a = coupled_learn(&ts, &params()).unwrap();
    let b = coupled_learn(&ts, &params()).unwrap();
    assert_eq!(a, b);
    let c = coupled_learn(&ts, &KsvdParams { seed: 99, ..params() }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn coupled_halves_have_unit_atoms_and_monotone_objective() {
    let ts = TrainingSet::synthetic(2, 64, 2.0, 8, 1500, 1000).unwrap();
    let out = coupled_learn_detailed(&ts, &params()).unwrap();
    let d = &out.dictionary;
    assert_eq!(d.mode, LearningMode::Coupled);
    assert_eq!(d.focused.label(), DictionaryLabel::Focused);
    assert_eq!(d.blurred.label(), DictionaryLabel::Blurred);
    assert!(column_norms_are_unit(d.focused.matrix()));
    assert!(column_norms_are_unit(d.blurred.matrix()));
    assert_eq!(out.shared_codes.len(), ts.len());
    assert!(out.objective.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6)));
}

#[test]
fn identical_halves_give_identical_sub_dictionaries() {
    let x = random_unit_columns(16, 400, 4);
    let ts = TrainingSet::new(x.clone(), x).unwrap();
    let d = coupled_learn(&ts, &KsvdParams { atoms: 20, ..params() }).unwrap();
    let diff = (d.focused.matrix() - d.blurred.matrix()).abs().max();
    assert!(diff < 1e-12, "max difference {diff}");
}

#[test]
fn zero_blurred_half_is_degenerate() {
    let x = random_unit_columns(16, 200, 5);
    let ts = TrainingSet::new(x, DMatrix::zeros(16, 200)).unwrap();
    let err = coupled_learn(&ts, &KsvdParams { atoms: 10, ..params() }).unwrap_err();
    assert!(matches!(err, Error::DegenerateSubspace(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn separate_learning_matches_independent_ksvd_runs() {
    let ts = TrainingSet::synthetic(2, 64, 2.0, 8, 1000, 1000).unwrap();
    let p = params();
    let sep = learn_separate(&ts, &p).unwrap();
    assert_eq!(sep.mode, LearningMode::Separate);
    let f = ksvd_learn_detailed(&ts.focused, &p, DictionaryLabel::Focused).unwrap();
    assert_eq!(sep.focused.matrix(), f.dictionary.matrix());
}

#[test]
fn discrimination_rates_are_fractions() {
    let ts = TrainingSet::synthetic(2, 64, 2.0, 8, 1000, 1000).unwrap();
    let d = coupled_learn(&ts, &params()).unwrap();
    let (f, b) = discrimination_rates(&d, &ts);
    assert!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&b));
}

#[test]
fn too_few_samples_is_insufficient_data() {
    let x = random_unit_columns(16, 10, 6);
    let ts = TrainingSet::new(x.clone(), x).unwrap();
    let err = coupled_learn(&ts, &KsvdParams { atoms: 32, ..params() }).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}
