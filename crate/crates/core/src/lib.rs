//! Domain adaptive dictionary learning.
//!
//! Faces observed across subjects, poses and illuminations are modeled with a
//! single base dictionary and three sparse codes per image, one for each
//! factor. The crate provides the block-matrix machinery ([`multiarray`]),
//! sparse coding and dictionary learning ([`pursuit`], [`ksvd`]), the
//! trilinear learner and decomposer ([`dadl`]), an N-mode SVD baseline
//! ([`tensorfaces`]), evaluation metrics ([`eval`]), a synthetic data
//! generator ([`synthgen`]) and file formats ([`io`]).

pub mod dadl;
pub mod error;
pub mod eval;
pub mod io;
pub mod ksvd;
pub mod linalg;
pub mod multiarray;
pub mod pursuit;
pub mod synthgen;
pub mod tensorfaces;

pub use dadl::{
    compose, learn_base_dictionary, marginalize_illum, marginalize_pose, subject_code, Coder, DadlConfig, DadlModel,
    Decomposition, Labels, Preset, Selector,
};
pub use error::{DadlError, ErrorClass, Result};
pub use multiarray::{synthesize, BaseDictionary, CellIndex, DomainGrid, FormId, ModeKind, ModeLabel, Role};
pub use pursuit::{omp, SparseCode};
