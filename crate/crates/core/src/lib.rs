//! Two-branch equilibrium income distribution.
//!
//! A Fokker-Planck description of household income with drift `A(m)` that switches
//! at a threshold `m1` and diffusion `B(m) = b (m0^2 + m^2)` has an equilibrium density
//! made of two branches, each a Boltzmann-Gibbs/Pareto crossover:
//!
//! ```text
//! P(m) = c'  exp(-(m0/T)  atan(m/m0)) / (1 + (m/m0)^2)^((alpha + 1)/2)    m <  m1
//! P(m) = c'' exp(-(m0/T1) atan(m/m0)) / (1 + (m/m0)^2)^((alpha1 + 1)/2)   m >= m1
//! ```
//!
//! The crate evaluates this density ([`model`]), integrates it ([`quadrature`]),
//! simulates the underlying Langevin dynamics ([`langevin`]), ingests income
//! microdata ([`data`]), fits the six parameters to empirical CCDFs ([`fit`]) and
//! produces reports ([`report`], [`cli`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod fit;
pub mod langevin;
pub mod model;
pub mod params;
pub mod quadrature;
pub mod report;

pub use error::{Error, Result};
pub use model::{normalize, NormalizedModel};
pub use params::{from_fp_coefficients, FpCoefficients, Params};
pub use quadrature::{branch_mass, integrate_adaptive, Branch, QuadResult};
