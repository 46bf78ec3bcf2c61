//! Numerical laboratory for Pohozaev-type identities.
//!
//! Computes positive solutions of `Δu + f(x,u) = 0` and of Hamiltonian pairs
//! `Δu + f(x,v) = 0`, `Δv + g(x,u) = 0` with zero Dirichlet data (radially
//! on balls by shooting, on centered rectangles by Newton finite
//! differences), evaluates both sides of the associated integral and
//! differential identities on those solutions, and decides the sign
//! conditions that rule out positive solutions on star-shaped domains.

// `!(x > 0.0)` style comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod defaults;
pub mod expr;
pub mod grid;
pub mod identity;
pub mod ode;
pub mod quadrature;
pub mod radial;
pub mod sweep;
