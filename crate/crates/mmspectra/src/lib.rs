//! # mmspectra
//!
//! Rho-Laplacian spectra of finite metric measure spaces (mm-spaces), used
//! as shape signatures.
//!
//! An mm-space is a finite point set with a symmetric distance matrix and a
//! strictly positive mass per point. For a threshold `rho > 0` the auxiliary
//! graph connects the pairs closer than `rho` with weight `mass_i * mass_j`;
//! the spectrum of its Laplacian, swept over all distinct thresholds, is a
//! piecewise-constant curve `rho -> eigenvalues` that can discriminate
//! between spaces that distribution-of-distance signatures cannot tell
//! apart.
//!
//! | Module | Provides |
//! |--------|----------|
//! | [`mmspace`] | construction and validation of spaces |
//! | [`laplacian`] | auxiliary graph, `L = Deg - W`, edge events |
//! | [`spectrum`] | eigensolves, the rho-sweep, CDFs, bound checks |
//! | [`signatures`] | spectral distances, DoD baselines, classical MDS |
//! | [`harmonics`] | Fiedler analysis and the Euclidean embedding |
//! | [`ssl`] | mass-aware semi-supervised label propagation |
//! | [`inference`] | mean spectra, confidence bands, bootstrap test |
//! | [`io`] | JSON/CSV file formats |

mod error;
pub mod harmonics;
pub mod inference;
pub mod io;
pub mod laplacian;
pub mod mmspace;
pub mod signatures;
pub mod spectrum;
pub mod ssl;
mod symeig;
mod unionfind;

pub use error::{Error, Result};
pub use laplacian::{AuxiliaryGraph, EdgeEvent, RhoLaplacian};
pub use mmspace::{MassPolicy, MmSpace, Violation};
pub use signatures::{QuantileGrid, SignatureDistanceMatrix};
pub use spectrum::{SpectralCurve, Spectrum};
