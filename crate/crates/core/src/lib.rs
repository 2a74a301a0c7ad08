//! Bounded-memory fitting of generalized linear models.
//!
//! Data are streamed through a [`ChunkSource`] in fixed-size chunks and
//! reduced into the upper-triangular factor of a weighted QR decomposition,
//! so memory use depends on the chunk size and the number of coefficients
//! but not on the number of observations. Besides maximum likelihood, the
//! fitter solves the mean bias-reducing and the Jeffreys'-prior penalized
//! estimating equations, which give finite estimates in logistic regression
//! even under complete separation.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chunk;
pub mod cli;
pub mod error;
pub mod family;
pub mod fit;
pub mod incremental_qr;
pub mod sim;
pub mod special;

pub use chunk::{ChunkSchema, ChunkSource, CsvSource, DataTable, MemorySource, DEFAULT_CHUNK_SIZE};
pub use error::{Error, Result};
pub use family::{Family, FamilyLink, Link};
pub use fit::{fit, DispersionRule, Estimator, FitConfig, FitResult, Variant, WarmStart};
pub use incremental_qr::TriangularAccumulator;
pub use sim::{SimSetting, SimSummary};
