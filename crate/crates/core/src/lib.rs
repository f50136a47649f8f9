// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constitutive;
mod quadrature;
pub mod torus_fields;
pub mod augmented_solver;
pub mod entropy_diag;
pub mod linear_hypo;
pub mod runner_io;
