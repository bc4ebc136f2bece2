//! Risk-sensitive controller synthesis for linear quantum stochastic plants.
//!
//! A quantum plant (an open quantum harmonic oscillator) is closed by a
//! classical linear controller `dξ = a ξ dt + b dZ, U = c ξ` driven by a
//! nondemolition measurement `Z`. The crate evaluates the infinite-horizon
//! growth rate `Υ` of the quadratic-exponential functional through a
//! frequency-domain integral, computes its Frechet derivatives with respect
//! to `(a, b, c)`, and descends on it starting from the classical LQG
//! controller. A time-domain finite-horizon evaluator is provided as an
//! independent check of the frequency-domain formula.
//!
//! Module map:
//! - [`matfun`]: matrix exponential, trigonometric functions, Gateaux derivatives
//! - [`model`]: plant construction, realizability checks, closed-loop assembly
//! - [`gramians`]: Lyapunov solver, Gramians, LQG cost and its gradient matrix
//! - [`freq`]: transfer functions, spectral pair, admissibility, growth rate
//! - [`grad`]: the gradient matrix `χ` and the controller derivatives
//! - [`oracle`]: finite-horizon evaluation via discretized integral operators
//! - [`synth`]: LQG initializer and gradient descent

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod freq;
pub mod grad;
pub mod gramians;
pub mod instances;
pub mod matfun;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod riccati;
pub mod synth;

pub use error::{Category, Error, Result};

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense real matrix.
pub type RMat = DMatrix<f64>;
/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

pub(crate) fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}
