//! Finite-precision semilinear algebra over 𝔖 = W(k)\[\[u\]\].
//!
//! The crate implements, at hard precision (p^N, u^M):
//!
//! - [`coeffs`]: W(k') arithmetic with exact Teichmüller lifts and Frobenius;
//! - [`series`]: truncated 𝔖-arithmetic, the Frobenius u ↦ u^p, Weierstrass
//!   division by an Eisenstein polynomial and P-adic factorization;
//! - [`sring`]: the divided-power ring S = W(k)[u, u^(ei)/i!]^, with Fil¹S,
//!   φ₁ = φ/p, N = -u d/du and the unit c₁ = φ(P)/p;
//! - [`phimod`]: φ-modules of finite height, Verschiebung and duality,
//!   étale/multiplicative/nilpotent/unipotent classification, connected-étale
//!   and multiplicative-unipotent decompositions, trivialization of étale
//!   modules, torsion modules as cokernels of isogenies;
//! - [`breuil`]: the base-change functor to strongly divisible S-modules with
//!   Fil¹, φ₁, the monodromy operator and exactness transport;
//! - [`galois`]: unramified representations from étale modules, σ-conjugacy
//!   testing, mod-p Hom counting over Laurent-series rings, and the 2-adic
//!   mod-2/mod-4 discrepancy certificate for the multiplicative rank-1 module.

#![allow(clippy::needless_range_loop)] // indexed loops mirror the matrix algebra

pub mod breuil;
pub mod coeffs;
pub mod error;
pub mod galois;
pub mod oklin;
pub mod phimod;
pub mod series;
pub mod sring;
pub mod zplin;

pub use error::{Error, Result};
