//! Interpretable credit-risk scoring: binarization, a two-layer additive
//! risk model, risk factors, consistent rules and similar cases.

pub mod binarize;
pub mod cases;
pub mod data;
pub mod error;
pub mod explain;
pub mod eval;
pub mod factors;
pub mod optim;
pub mod riskmodel;
pub mod rules;
pub mod synth;

pub use error::{Error, Result};
