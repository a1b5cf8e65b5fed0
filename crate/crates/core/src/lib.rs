// Negated comparisons are used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod entropy_flows;
pub mod error;
pub mod gamma_calculus;
pub mod io;
pub mod model_space;
pub mod reporting;
pub mod sobolev;
pub mod variational;

pub use error::{Error, Result};
pub use model_space::{ModelSpace, ScalarField, SpaceKind};
