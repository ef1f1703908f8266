//! Exact truncated formal-group-law calculus.
//!
//! The crate builds the p-typical formal group law over a truncated BP*, its
//! reductions to `E(n)` and `K_{p^r}(n)`, l-series, Morava Euler classes of
//! weighted line-bundle sums, module presentations of `E*(Bμ_l)`, the
//! effective Atiyah-Bott bounds for BP, and a fixed-point assembler for
//! Hamiltonian torus spaces. Every computation is carried out at an explicit
//! truncation order and is exact.

pub mod bounds;
pub mod cli;
pub mod cyclic;
pub mod error;
pub mod euler;
pub mod fgl;
pub mod linalg;
pub mod modseries;
pub mod morse;
pub mod ringcore;
pub mod series;
