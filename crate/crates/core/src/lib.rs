//! Schottky-type Fuchsian groups in the upper half-plane: exact Möbius
//! algebra, visual boundary metrics, the `x_j = 2^(j^2)`, `r_j = 2^(-|j|-2)`
//! generator family, reduced-word covering sums and limit-set dimension
//! estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod boundary;
pub mod dimension;
pub mod error;
pub mod hyperbolic;
pub mod num;
pub mod schottky;
pub mod words;

pub use error::{Error, Result};
pub use num::{BigNum, BigReal, Precision};
