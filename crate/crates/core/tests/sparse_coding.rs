//! OMP against an independent exhaustive least-squares oracle, plus
//! property checks of the coding contract.

use cdl_fusion::imaging::{extract_patches, preprocess, synthetic_scene};
use cdl_fusion::sparse_coding::{batch_encode_with, omp_encode_traced, Execution};
use cdl_fusion::{omp_encode, Dictionary, DictionaryLabel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian_dictionary(dim: usize, atoms: usize, seed: u64) -> Dictionary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(dim, atoms, |_, _| StandardNormal.sample(&mut rng));
    Dictionary::normalized(m, DictionaryLabel::Single).unwrap()
}

fn unit_signal(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Least-squares residual of `x` on the columns `cols`, via SVD.
fn ls_residual_sq(dict: &Dictionary, cols: &[usize], x: &[f64]) -> f64 {
    let a = DMatrix::from_fn(dict.dim(), cols.len(), |r, c| dict.atom(cols[c])[r]);
    let b = DVector::from_column_slice(x);
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    (b - a * coef).norm_squared()
}

fn residual(dict: &Dictionary, code: &cdl_fusion::SparseCode, x: &[f64]) -> Vec<f64> {
    let s = dict.synthesize(code);
    x.iter().zip(&s).map(|(a, b)| a - b).collect()
}

#[test]
fn exact_support_recovered_on_orthonormal_basis() {
    // Columns of a random orthogonal matrix: OMP must find any support exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = DMatrix::from_fn(12, 12, |_, _| StandardNormal.sample(&mut rng));
    let q = g.qr().q();
    let dict = Dictionary::new(q, DictionaryLabel::Single).unwrap();
    let x: Vec<f64> = (0..12)
        .map(|r| 0.6 * dict.atom(2)[r] - 0.5 * dict.atom(9)[r] + 0.3 * dict.atom(4)[r])
        .collect();
    let code = omp_encode(&x, &dict, 1e-20, 12).unwrap();
    let mut support = code.support.clone();
    support.sort_unstable();
    assert_eq!(support, vec![2, 4, 9]);
    let dense = code.to_dense();
    assert!((dense[2] - 0.6).abs() < 1e-12);
    assert!((dense[9] + 0.5).abs() < 1e-12);
    assert!((dense[4] - 0.3).abs() < 1e-12);
}

#[test]
fn refit_residual_equals_least_squares_on_support() {
    let dict = gaussian_dictionary(16, 24, 11);
    for seed in 0..50 {
        let x = unit_signal(16, 100 + seed);
        let code = omp_encode(&x, &dict, 1e-6, 5).unwrap();
        let oracle = ls_residual_sq(&dict, &code.support, &x);
        assert!((code.residual_norm_sq - oracle).abs() < 1e-10, "seed {seed}");
    }
}

#[test]
fn trace_is_non_increasing_and_ends_at_reported_residual() {
    let dict = gaussian_dictionary(16, 32, 5);
    let x = unit_signal(16, 9);
    let (code, trace) = omp_encode_traced(&x, &dict, 1e-4, 10).unwrap();
    assert_eq!(trace.len(), code.support.len() + 1);
    assert!((trace[0] - 1.0).abs() < 1e-12);
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!((trace.last().unwrap() - code.residual_norm_sq).abs() < 1e-12);
}

#[test]
fn serial_and_parallel_batch_coding_agree_bitwise() {
    let img = synthetic_scene(40, 40, 2).unwrap();
    let grid = preprocess(extract_patches(&img, 8, 7).unwrap());
    let dict = gaussian_dictionary(64, 96, 8);
    let a = batch_encode_with(&grid, &dict, 0.1, 16, Execution::Serial).unwrap();
    let b = batch_encode_with(&grid, &dict, 0.1, 16, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn batch_coding_rejects_raw_patches() {
    let img = synthetic_scene(16, 16, 2).unwrap();
    let grid = extract_patches(&img, 8, 7).unwrap();
    let dict = gaussian_dictionary(64, 70, 8);
    assert!(batch_encode_with(&grid, &dict, 0.1, 16, Execution::Serial).is_err());
}

#[test]
fn over_unit_norm_input_rejected() {
    let dict = gaussian_dictionary(8, 10, 1);
    assert!(omp_encode(&[1.0; 8], &dict, 0.1, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn omp_contract(dseed in 0u64..10_000, xseed in 0u64..10_000, atoms in 8usize..40,
                    eps in 1e-6f64..0.5, max_atoms in 1usize..12) {
        let max_atoms = max_atoms.min(atoms);
        let dict = gaussian_dictionary(12, atoms, dseed);
        let x = unit_signal(12, xseed);
        let code = omp_encode(&x, &dict, eps, max_atoms).unwrap();

        // stopping rule
        prop_assert!(code.support.len() <= max_atoms);
        prop_assert!(code.residual_norm_sq <= eps || code.support.len() == max_atoms);
        // distinct indices
        let mut s = code.support.clone();
        s.sort_unstable();
        s.dedup();
        prop_assert_eq!(s.len(), code.support.len());
        // reported residual matches the synthesized one
        let r = residual(&dict, &code, &x);
        let rn: f64 = r.iter().map(|v| v * v).sum();
        prop_assert!((rn - code.residual_norm_sq).abs() < 1e-10);
        // least-squares optimality: residual orthogonal to every selected atom
        for &j in &code.support {
            let c: f64 = dict.atom(j).iter().zip(&r).map(|(a, b)| a * b).sum();
            prop_assert!(c.abs() < 1e-8);
        }
        // residual never exceeds the signal
        prop_assert!(code.residual_norm_sq <= 1.0 + 1e-12);
    }

    #[test]
    fn omp_is_homogeneous(dseed in 0u64..1000, xseed in 0u64..1000, c in 0.1f64..1.0) {
        // Scaling the signal scales the code when the stopping rule is max_atoms.
        let dict = gaussian_dictionary(10, 20, dseed);
        let x = unit_signal(10, xseed);
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = omp_encode(&x, &dict, 1e-30, 4).unwrap();
        let b = omp_encode(&xs, &dict, 1e-30, 4).unwrap();
        prop_assert_eq!(&a.support, &b.support);
        for (u, v) in a.values.iter().zip(&b.values) {
            prop_assert!((u * c - v).abs() < 1e-9);
        }
    }
}
