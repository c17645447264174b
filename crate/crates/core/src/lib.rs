//! Viscosity solutions of `u_t + ½ A∇u·∇u = 0` through the Hopf formula.
//!
//! The crate evaluates the solution and all of its minimizers, builds the
//! superdifferential from them, and follows generalized characteristics along
//! which the minimal energy `min F(τ,p) = τ + H(p)` over D⁺u is dissipated.
//! A negative minimal energy marks a singular point, and the dissipation bound
//! keeps it negative along the arc.
//!
//! ```
//! use hj_core::analytic::{eps_solution, EpsExample};
//! use hj_core::hopf::{hopf_value, HopfOptions};
//!
//! let example = EpsExample::new(0.1)?;
//! let (problem, form) = example.problem()?;
//! let u = hopf_value(&problem, &form, 0.9, &[0.0], &HopfOptions::default())?;
//! assert!((u.value - eps_solution(0.1, 0.9, 0.0)).abs() < 1e-9);
//! assert_eq!(u.minimizers.len(), 2);
//! # Ok::<(), hj_core::Error>(())
//! ```

pub mod analytic;
pub mod characteristics;
pub mod data;
pub mod domain;
mod error;
pub mod hopf;
pub mod problem;
pub mod quadform;
pub mod superdiff;

pub use error::{Error, Result};
pub use problem::Problem;
pub use quadform::SpdForm;
