//! Curve shortening flow on the round sphere, tracked in graph coordinates over
//! the equator chart `(x, z) ↦ (cos x, sin x, z)/√(1+z²)`.
//!
//! Curves are 2π-periodic height functions sampled on a uniform grid and
//! differentiated spectrally. Beyond the nonlinear flow the crate carries the
//! linearized and second-order variation equations, Fourier diagnostics for
//! antipodally symmetric variations, two-parameter families of curves, and the
//! time change that turns the infinite-time flow into a homotopy on `[0, 1]`.

// negated comparisons below reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod csf_solver;
pub mod error;
pub mod experiment;
pub mod family;
pub mod io;
pub mod profile;
pub mod quadrature;
pub mod rk4;
pub mod spectral;
pub mod spectral_analysis;
pub mod sphere_chart;
pub mod variation_flows;

pub use error::{CsfError, Result};
pub use profile::{Harmonics, PeriodicProfile};
pub use sphere_chart::{ChartConfig, GreatCircleFit};
