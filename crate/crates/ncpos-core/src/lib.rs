#![no_std]
//! Positivity certificates for operator-valued noncommutative polynomials on
//! free spectrahedra, moment-based counterexamples, and Fejér–Riesz
//! factorization over free products of finite cyclic groups.

extern crate alloc;

pub mod certify;
pub mod error;
pub mod fejer;
pub mod linalg;
pub mod fock;
pub mod groupfree;
pub mod ncpoly;
pub mod pencil;
pub mod sdp;

pub use error::{Error, Result};
pub use ncpoly::{enumerate_words, gram_to_poly, NcPoly, Word, WordBasis, WordImages};
