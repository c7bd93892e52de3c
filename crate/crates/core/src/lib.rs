//! Multi-focus image fusion by sparse coding over a coupled dictionary.
//!
//! A coupled dictionary holds two sub-dictionaries learned with shared sparse
//! codes: one describing in-focus image structure and one describing the same
//! structure after defocus blur. Each source patch is coded over the
//! concatenation of both, and the source whose code carries the most weighted
//! focused-subspace activity supplies the fused patch. Overlapping patches are
//! averaged into an initial all-in-focus estimate, which can optionally be
//! refined by total-variation regularisation solved with ADMM.
//!
//! Pipeline stages live in their own modules:
//!
//! * [`imaging`]: images, patch grids, overlap averaging, synthetic corpora, file I/O
//! * [`sparse_coding`]: dictionaries and orthogonal matching pursuit
//! * [`dictionary_learning`]: K-SVD, coupled and separate learning
//! * [`fusion`]: weighted-l1 selection and the full fusion pipeline
//! * [`tv`]: isotropic TV refinement by ADMM
//! * [`metrics`]: NMI, Q_AB/F, SSIM and MSE
//! * [`cli`]: dictionary file format, experiment commands and CSV reports

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dictionary_learning;
mod error;
pub mod fusion;
pub mod imaging;
pub mod metrics;
pub mod sparse_coding;
pub mod tv;

pub use dictionary_learning::{
    coupled_learn, ksvd_learn, learn_separate, CoupledDictionary, KsvdParams, LearningMode, TrainingSet,
};
pub use error::{Error, Result};
pub use fusion::{
    encode_sources, fuse_images, CodingDictionary, DecisionMask, EncodedSources, FusionConfig, FusionOutput,
};
pub use imaging::{Image, PatchGrid};
pub use sparse_coding::{batch_encode, omp_encode, Dictionary, DictionaryLabel, SparseCode};
pub use tv::TvParams;
