//! Dense 3D facial deformation analysis: elastic (SRVF) shape comparison of
//! radial curve fans, Eulerian spatio-temporal magnification of the
//! resulting deformation fields, and expression classification with SVM and
//! HMM models.
//!
//! Pipeline stages:
//!
//! 1. **surface parameterization** — load mesh frames, rigidly align them to
//!    the first frame ([`align`]), crop around the nose tip ([`mesh`]), and
//!    extract the fan of radial curves ([`curves`]).
//! 2. **deformation fields** — represent curves on the SRVF hypersphere
//!    ([`srvf`]) and collect shooting-vector magnitudes into dense scalar
//!    fields per frame ([`dsf`]).
//! 3. **magnification** — amplify subtle temporal variation of the fields in
//!    a frequency band of interest ([`magnify`], [`pyramid`], [`bandpass`]).
//! 4. **classification** — time-mean SVM and per-class Gaussian HMM
//!    pipelines with stratified subject-grouped cross-validation
//!    ([`classify`], [`svm`], [`hmm`], [`features`]).
//!
//! The [`synth`] module generates labeled synthetic mesh sequences for
//! benchmarking, and [`pipeline`] orchestrates the stages end to end.

pub mod align;
pub mod bandpass;
pub mod classify;
pub mod config;
pub mod curves;
pub mod dsf;
pub mod error;
pub mod features;
pub mod grid;
pub mod hmm;
pub mod io;
pub mod kdtree;
pub mod magnify;
pub mod mesh;
pub mod pipeline;
pub mod pyramid;
pub mod report;
pub mod srvf;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
