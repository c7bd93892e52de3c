//! Dictionaries and greedy sparse approximation by orthogonal matching pursuit.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::PatchGrid;

/// Column norms must be within this of one.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// Correlations at or below this magnitude cannot extend the support.
const MIN_CORRELATION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryLabel {
    Focused,
    Blurred,
    /// Focused atoms followed by the same number of blurred atoms.
    Coupled,
    Single,
}

/// Column dictionary with unit-norm atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    label: DictionaryLabel,
}

impl Dictionary {
    /// Wraps a `dim x M` matrix whose columns are already unit norm.
    pub fn new(atoms: DMatrix<f64>, label: DictionaryLabel) -> Result<Self> {
        Self::validate(&atoms, label, UNIT_NORM_TOL)?;
        Ok(Self { atoms, label })
    }

    /// Like [`Dictionary::new`] with a caller-chosen norm tolerance.
    pub fn with_tolerance(atoms: DMatrix<f64>, label: DictionaryLabel, tol: f64) -> Result<Self> {
        Self::validate(&atoms, label, tol)?;
        Ok(Self { atoms, label })
    }

    /// Scales every column to unit norm first. Zero columns are rejected.
    pub fn normalized(mut atoms: DMatrix<f64>, label: DictionaryLabel) -> Result<Self> {
        for mut col in atoms.column_iter_mut() {
            let n = col.norm();
            if n < 1e-300 || !n.is_finite() {
                return Err(Error::param("atoms", "cannot normalise a zero or non-finite column"));
            }
            col /= n;
        }
        Self::new(atoms, label)
    }

    fn validate(atoms: &DMatrix<f64>, label: DictionaryLabel, tol: f64) -> Result<()> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return Err(Error::param("atoms", "dictionary must have at least one atom"));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dictionary"));
        }
        if label == DictionaryLabel::Coupled && !atoms.ncols().is_multiple_of(2) {
            return Err(Error::param("atoms", "coupled dictionary needs an even atom count"));
        }
        for (j, col) in atoms.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > tol {
                return Err(Error::param("atoms", format!("atom {j} has norm {n}")));
            }
        }
        Ok(())
    }

    /// Horizontal concatenation `[focused, blurred]` as a coupled dictionary.
    pub fn concat(focused: &Dictionary, blurred: &Dictionary) -> Result<Self> {
        if focused.dim() != blurred.dim() {
            return Err(Error::DimensionMismatch {
                expected: focused.dim(),
                found: blurred.dim(),
            });
        }
        if focused.len() != blurred.len() {
            return Err(Error::DimensionMismatch {
                expected: focused.len(),
                found: blurred.len(),
            });
        }
        let m = focused.len();
        let mut atoms = DMatrix::zeros(focused.dim(), 2 * m);
        atoms.columns_mut(0, m).copy_from(&focused.atoms);
        atoms.columns_mut(m, m).copy_from(&blurred.atoms);
        Ok(Self {
            atoms,
            label: DictionaryLabel::Coupled,
        })
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn label(&self) -> DictionaryLabel {
        self.label
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.atoms
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[f64] {
        let d = self.dim();
        &self.atoms.as_slice()[j * d..(j + 1) * d]
    }

    /// `D * alpha` for a sparse code over this dictionary.
    pub fn synthesize(&self, code: &SparseCode) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (&j, &a) in code.support.iter().zip(&code.values) {
            for (o, &x) in out.iter_mut().zip(self.atom(j)) {
                *o += a * x;
            }
        }
        out
    }

    /// Largest absolute inner product between distinct atoms.
    pub fn mutual_coherence(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(dot(self.atom(i), self.atom(j)).abs());
            }
        }
        best
    }
}

/// Sparse coefficient vector over a dictionary of `length` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub length: usize,
    /// Atom indices in selection order.
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    pub residual_norm_sq: f64,
}

impl SparseCode {
    pub fn zero(length: usize) -> Self {
        Self {
            length,
            support: Vec::new(),
            values: Vec::new(),
            residual_norm_sq: 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.length];
        for (&j, &a) in self.support.iter().zip(&self.values) {
            out[j] = a;
        }
        out
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// l1 norm of the coefficients whose atom index lies in `range`.
    pub fn l1_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.support
            .iter()
            .zip(&self.values)
            .filter(|(j, _)| range.contains(j))
            .fold(0.0, |acc, (_, v)| acc + v.abs())
    }

    /// Multiplies all coefficients by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Re-expresses the code over a longer dictionary whose extra atoms are
    /// never used.
    pub fn padded(&self, length: usize) -> Self {
        assert!(length >= self.length, "padding cannot shrink a code");
        Self { length, ..self.clone() }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// OMP without the unit-norm input check; shared with dictionary learning.
pub(crate) fn omp_core(
    signal: &[f64],
    dict: &Dictionary,
    eps: f64,
    max_atoms: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> SparseCode {
    let dim = dict.dim();
    let m = dict.len();
    let mut residual = signal.to_vec();
    let mut res_sq = dot(&residual, &residual);
    if let Some(t) = trace.as_deref_mut() {
        t.push(res_sq);
    }
    let mut support: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let target = DVector::from_column_slice(signal);

    while res_sq > eps && support.len() < max_atoms {
        let mut best = None;
        let mut best_abs = MIN_CORRELATION;
        for j in 0..m {
            let c = dot(dict.atom(j), &residual).abs();
            // strict comparison keeps the lowest index on ties
            if c > best_abs && !support.contains(&j) {
                best_abs = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        support.push(j);

        let mut sub = DMatrix::zeros(dim, support.len());
        for (k, &s) in support.iter().enumerate() {
            sub.column_mut(k).copy_from_slice(dict.atom(s));
        }
        let (q, r) = sub.clone().qr().unpack();
        let qty = q.tr_mul(&target);
        let Some(coef) = r.solve_upper_triangular(&qty) else {
            support.pop();
            break;
        };
        if coef.iter().any(|v| !v.is_finite()) {
            support.pop();
            break;
        }
        let approx = &sub * &coef;
        for (i, r) in residual.iter_mut().enumerate() {
            *r = signal[i] - approx[i];
        }
        res_sq = dot(&residual, &residual);
        values = coef.iter().copied().collect();
        if let Some(t) = trace.as_deref_mut() {
            t.push(res_sq);
        }
    }
    SparseCode {
        length: m,
        support,
        values,
        residual_norm_sq: res_sq,
    }
}

fn check_encode_args(dict: &Dictionary, eps: f64, max_atoms: usize) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    let cap = dict.dim().min(dict.len());
    if max_atoms == 0 || max_atoms > cap {
        return Err(Error::param(
            "max_atoms",
            format!("must lie in 1..={cap}, got {max_atoms}"),
        ));
    }
    Ok(())
}

fn check_signal(patch: &[f64], dict: &Dictionary) -> Result<()> {
    if patch.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: patch.len(),
        });
    }
    if patch.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("patch"));
    }
    Ok(())
}

/// Sparse-codes a preprocessed patch.
///
/// Atoms are added greedily by largest absolute correlation with the
/// residual (lowest index on ties) and all coefficients are re-fitted by
/// least squares after every addition. Stops once the squared residual norm
/// is at most `eps` or `max_atoms` atoms are in use.
pub fn omp_encode(patch: &[f64], dict: &Dictionary, eps: f64, max_atoms: usize) -> Result<SparseCode> {
    check_encode_args(dict, eps, max_atoms)?;
    check_signal(patch, dict)?;
    let norm = dot(patch, patch).sqrt();
    if norm > 1.0 + 1e-9 {
        return Err(Error::param("patch", format!("expected norm <= 1, got {norm}")));
    }
    Ok(omp_core(patch, dict, eps, max_atoms, None))
}

/// [`omp_encode`] that also returns the squared residual norm before the
/// first and after every iteration.
pub fn omp_encode_traced(
    patch: &[f64],
    dict: &Dictionary,
    eps: f64,
    max_atoms: usize,
) -> Result<(SparseCode, Vec<f64>)> {
    let code = omp_encode(patch, dict, eps, max_atoms)?;
    let mut trace = Vec::new();
    omp_core(patch, dict, eps, max_atoms, Some(&mut trace));
    Ok((code, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Codes every patch of a preprocessed grid in anchor order.
///
/// Degenerate patches get all-zero codes.
pub fn batch_encode(grid: &PatchGrid, dict: &Dictionary, eps: f64, max_atoms: usize) -> Result<Vec<SparseCode>> {
    batch_encode_with(grid, dict, eps, max_atoms, Execution::Parallel)
}

pub fn batch_encode_with(
    grid: &PatchGrid,
    dict: &Dictionary,
    eps: f64,
    max_atoms: usize,
    execution: Execution,
) -> Result<Vec<SparseCode>> {
    if !grid.is_preprocessed() {
        return Err(Error::param("grid", "patches must be preprocessed before coding"));
    }
    if grid.dim() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.dim(),
            found: grid.dim(),
        });
    }
    check_encode_args(dict, eps, max_atoms)?;
    let encode_one = |i: usize| -> Result<SparseCode> {
        if grid.degenerate[i] {
            return Ok(SparseCode::zero(dict.len()));
        }
        omp_encode(grid.vector(i), dict, eps, max_atoms).map_err(|e| Error::Patch {
            index: i,
            source: Box::new(e),
        })
    };
    match execution {
        Execution::Parallel => (0..grid.len()).into_par_iter().map(encode_one).collect(),
        Execution::Serial => (0..grid.len()).map(encode_one).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Dictionary {
        Dictionary::new(DMatrix::identity(n, n), DictionaryLabel::Single).unwrap()
    }

    #[test]
    fn atom_self_match() {
        let atoms = DMatrix::from_fn(4, 6, |r, c| ((r * 3 + c * 5) % 7) as f64 - 3.0);
        let dict = Dictionary::normalized(atoms, DictionaryLabel::Single).unwrap();
        let code = omp_encode(dict.atom(4), &dict, 1e-6, 4).unwrap();
        assert_eq!(code.support, vec![4]);
        assert!((code.values[0] - 1.0).abs() < 1e-12);
        assert!(code.residual_norm_sq < 1e-20);
    }

    #[test]
    fn tolerance_already_met() {
        let patch = [0.5, 0.0, 0.0, 0.0];
        let code = omp_encode(&patch, &identity(4), 0.25, 4).unwrap();
        assert!(code.support.is_empty());
        assert!(code.is_zero());
        assert_eq!(code.residual_norm_sq, 0.25);
    }

    #[test]
    fn two_term_recovery_on_identity() {
        let patch = [0.8, 0.6, 0.0, 0.0];
        let code = omp_encode(&patch, &identity(4), 1e-8, 4).unwrap();
        assert_eq!(code.support, vec![0, 1]);
        assert!((code.values[0] - 0.8).abs() < 1e-15);
        assert!((code.values[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn ties_pick_lowest_index() {
        let patch = [0.6, 0.6, 0.0, 0.0];
        let code = omp_encode(&patch, &identity(4), 0.5, 1).unwrap();
        assert_eq!(code.support, vec![0]);
    }

    #[test]
    fn rejects_bad_input() {
        let d = identity(4);
        assert!(omp_encode(&[f64::NAN, 0.0, 0.0, 0.0], &d, 0.1, 2).is_err());
        assert!(omp_encode(&[1.0, 0.0, 0.0], &d, 0.1, 2).is_err());
        assert!(omp_encode(&[1.0, 1.0, 0.0, 0.0], &d, 0.1, 2).is_err());
        assert!(omp_encode(&[1.0, 0.0, 0.0, 0.0], &d, 0.0, 2).is_err());
        assert!(omp_encode(&[1.0, 0.0, 0.0, 0.0], &d, 0.1, 5).is_err());
    }

    #[test]
    fn concat_and_padding() {
        let f = identity(3);
        let b = identity(3);
        let c = Dictionary::concat(&f, &b).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.label(), DictionaryLabel::Coupled);
        let code = SparseCode {
            length: 3,
            support: vec![2],
            values: vec![-0.5],
            residual_norm_sq: 0.0,
        };
        assert_eq!(code.padded(6).to_dense(), vec![0.0, 0.0, -0.5, 0.0, 0.0, 0.0]);
        assert_eq!(code.l1_in(0..3), 0.5);
        assert_eq!(code.l1_in(3..6), 0.0);
    }

    #[test]
    fn dictionary_rejects_non_unit_columns() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 0)] = 2.0;
        assert!(Dictionary::new(m, DictionaryLabel::Single).is_err());
        assert!(Dictionary::new(DMatrix::identity(3, 3), DictionaryLabel::Coupled).is_err());
    }
}
