//! Computational toolkit for the elliptic quadric Q⁻(5,q), the Hermitian
//! surface H(3,q²), the Klein correspondence between them, a five-class
//! association scheme on the generators disjoint from a fixed generator, and
//! pseudo-oval feasibility search.
//!
//! Everything is exact: finite-field arithmetic is table driven and the
//! association-scheme algebra uses integer and rational arithmetic only.

pub mod geometry;
pub mod gf;
pub mod hermitian;
pub mod klein;
pub mod linalg;
pub mod oval;
pub mod rational;
pub mod report;
pub mod scheme;
pub mod search;
pub mod usets;

pub use gf::{Fq, Fq2, GaloisField, GfError, PrimeField, QPoly};
