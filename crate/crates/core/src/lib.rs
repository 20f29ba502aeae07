//! Option-pricing analytics and data pipeline.
//!
//! With the default `parallel` feature, Monte Carlo chunks, per-ticker
//! volatility tables, feature construction and baseline pricing run on the
//! rayon pool. Results do not depend on the thread count.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bs;
pub mod evaluation;
pub mod market_data;
pub mod seed;
pub mod vol;
