//! Sequential testing of a series system with subadditive batch costs.
//!
//! Tests are run in batches until one fails. [`greedy::modified_greedy`]
//! builds a batch sequence from a ratio oracle and a value oracle supplied by
//! a [`costs::CostModel`]; [`exact`] holds the brute-force solvers used to
//! check it.

pub mod cmp;
pub mod costs;
pub mod error;
pub mod exact;
pub mod gen;
pub mod greedy;
pub mod hardness;
pub mod instance;
pub mod io;
pub mod mssc;
pub mod quota;
pub mod set;

pub use error::{Result, SstError};
pub use instance::{BatchFamily, BatchSequence, Instance};
pub use set::TestSet;
