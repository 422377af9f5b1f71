//! Kronecker-core decomposition of covariance matrices and separability tests
//! that are invariant to the separable component.

pub mod error;
pub mod generators;
pub mod kcd;
pub mod matcore;
pub mod montecarlo;
pub mod stats;

pub use error::{Error, Result};
pub use kcd::{FlipFlopConfig, FlipFlopFit, FlipFlopInit, KcdResult, RootKind, SeparableFactor};
pub use matcore::{RectMatrix, Shape, Spectrum, SymMatrix};
pub use stats::{StatKind, TestReport};
