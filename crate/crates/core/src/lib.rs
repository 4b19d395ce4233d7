//! Heat kernels of non-symmetric Lévy-type operators by the parametrix method.
//!
//! The operator acts on functions of `x ∈ ℝ^d` as
//! `L f(x) = b(x)·∇f(x) + ∫ (f(x+z) − f(x) − 1_{|z|<1} z·∇f(x)) κ(x,z) J(z) dz`.
//! Its heat kernel is built as `p = p₀ + p₀ ⊛ q` from the frozen-coefficient
//! kernel `p₀(t,x,y) = p^{K_y}(t,x,y)` and the Volterra series `q = Σ q_n`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod assumptions;
pub mod bounds;
pub mod catalog;
pub mod coefficients;
pub mod engine;
pub mod error;
pub mod frozen;
pub mod oracles;
pub mod profile;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod spline;
pub mod symbol;

pub use error::{Error, Result};
