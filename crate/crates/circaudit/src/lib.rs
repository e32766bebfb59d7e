//! Detection of circular features in tabular ML data and black-box models.
//!
//! A feature is *circular* when the target label is deterministically defined
//! on it, so a model trained with it merely reconstructs a known rule. The
//! toolkit fits penalized-spline GAMs over candidate feature subsets, ranks
//! them by deviance explained and effective degrees of freedom, and verifies
//! that every non-defining feature's shape collapses to the zero function.
//!
//! Black-box models are audited through distillation: a student GAM is fitted
//! to the model's predictions on test data, then subjected to the same test.

pub mod circularity;
pub mod data;
pub mod error;
pub mod gam;
pub mod linalg;
pub mod mlp;
pub mod report;
pub mod spline;
pub mod synth;

pub use data::Dataset;
pub use error::CircError;
