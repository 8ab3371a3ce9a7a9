//! Multiplicatively repeated non-binary LDPC codes over GF(2^p) for
//! reconciliation at very low signal-to-noise ratios.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
pub mod channel;
pub mod code;
pub mod decoder;
pub mod error;
pub mod gf;
mod quad;
pub mod sim;
pub mod skr;

pub use code::{Edge, MotherCode, RepCode};
pub use error::{Error, Result};
pub use gf::{Field, Symbol};
