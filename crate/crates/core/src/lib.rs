//! Spectral workbench for the Hilbert-Brunn-Minkowski operator `L_K` of
//! smooth convex bodies in `R^2` and `R^3`.
//!
//! Bodies are support functions expanded in a Fourier or spherical-harmonic
//! basis ([`basis`], [`body`]). [`spectrum`] assembles `-L_K` as a generalized
//! eigenproblem, [`inequality`] evaluates both sides of the local
//! Brunn-Minkowski family and its stability forms, and [`solver`] treats the
//! isotropic equation `h^{1-p} det(D^2 h) = 1`.
//!
//! ```
//! use hbm::{make_domain, SupportField};
//! use hbm::spectrum::lambda2;
//!
//! let disk = SupportField::ball(&make_domain(2, 16)?, 1.0)?;
//! assert!((lambda2(&disk)? - 4.0).abs() < 1e-10);
//! # Ok::<(), hbm::HbmError>(())
//! ```

pub mod basis;
pub mod body;
pub mod corpus;
pub mod error;
pub mod field;
pub mod inequality;
pub mod solver;
pub mod spectrum;
pub mod tangent;

pub use basis::{differentiate, integrate, make_domain, ScalarField, SphericalDomain, TangentData};
pub use body::json::BodyDefinition;
pub use body::{SupportField, SupportFunction};
pub use error::{HbmError, Result};
pub use field::NodalField;
pub use inequality::{InequalityReport, Lab, Verdict};

// Book chapters double as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/bodies.md")]
    mod bodies {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/inequalities.md")]
    mod inequalities {}
    #[doc = include_str!("../../../book/src/equation.md")]
    mod equation {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
}
