//! Numerical free probability for large random matrices.
//!
//! Spectral measures are added (`⊞`) and multiplied (`⊠`) through the
//! functional inverses of their Cauchy transforms:
//!
//! * addition: `λ₁(w) + λ₂(w) = λ(w) + 1/w`, where `λᵢ` inverts `Gᵢ`;
//! * multiplication: `λ₁(h) λ₂(h) = λ(h) · h/(h−1)`, where `λᵢ` inverts
//!   `hᵢ(λ) = λ Gᵢ(λ)`.
//!
//! Every numerical result can be checked against two independent routes:
//! a truncated power-series oracle built on free cumulants and the
//! S-transform ([`series`]), and Monte Carlo experiments on Haar-rotated
//! random matrices ([`rmt`]).

pub mod acceptance;
pub mod error;
pub mod free_arithmetic;
pub mod measure;
pub mod par;
pub mod report;
pub mod rmt;
pub mod series;
pub mod stieltjes;

pub use error::{Error, Result};
pub use measure::{make_law, Atom, LawSpec, MomentVector, Segment, SpectralMeasure};
pub use num_complex::Complex64;
