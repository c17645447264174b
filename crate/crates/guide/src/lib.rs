//! The book under `book/src`, one module per chapter, so that `cargo test`
//! runs every snippet as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/quadratic-forms.md")]
pub mod quadratic_forms {}
#[doc = include_str!("../../../book/src/hopf-formula.md")]
pub mod hopf_formula {}
#[doc = include_str!("../../../book/src/superdifferential.md")]
pub mod superdifferential {}
#[doc = include_str!("../../../book/src/characteristics.md")]
pub mod characteristics {}
#[doc = include_str!("../../../book/src/two-well-example.md")]
pub mod two_well_example {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}
