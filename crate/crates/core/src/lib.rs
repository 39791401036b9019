//! Numerical laboratory for value distribution of holomorphic maps into
//! projective space.
//!
//! The crate computes characteristic functions `t_j`, `T_j` of a map
//! `φ: X → ℙᵐ` relative to a plurisubharmonic exhaustion of `X`, the `d`- and
//! `dd^c`-mass ratios built from them, discretized Ahlfors currents with their
//! derivative pairings, and the counting/proximity/defect quantities of the
//! First Main Theorem. Every quantity is produced together with an error
//! estimate so inequalities can be checked numerically.
//!
//! Conventions used throughout:
//!
//! * `dd^c u = (i/π) ∂∂̄u`, so `dd^c log|z|` is the unit Dirac mass in ℂ and
//!   `∫_{ℙᵐ} ωᵐ = 1` for the Fubini–Study form `ω`.
//! * A Hermitian coefficient matrix `A` stores `A[p][q] = ∂²u/∂z̄_p∂z_q`; with
//!   this layout pullbacks read `Jᴴ A J`.
//! * The canonical radius variable is `u = log σ` (equal to `τ` for the
//!   logarithmic exhaustions); all `ds/s` averages are taken in `u`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod currents;
pub mod error;
pub mod forms;
pub mod maps;
pub mod nevanlinna;
pub mod quad;
pub mod scenario;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
