//! Rewriting codes for multi-level flash cells.
//!
//! A group of `n` cells with `q` charge levels stores one `k`-symbol value
//! over an alphabet of size `l`. Every rewrite raises the charge of at most
//! one cell by one level; once the chosen cell is already at `q - 1`, the
//! whole block has to be erased. Two codes are provided:
//!
//! * [`codes::SelfRandomized`] uses `n = l^k` cells and spreads writes
//!   uniformly over the cells using the running write count.
//! * [`codes::LoadBalancing`] uses `n = l^(k+1)` cells. The redundant symbol
//!   yields `l` candidate cells per write, and the least charged one is
//!   picked ("power of two choices").
//!
//! [`ballsbins`] holds the random-loading oracles and the analytic max-load
//! predictions used to reason about how many rewrites fit between erasures.
//! [`sim`] drives the codes through erasure cycles and reports the loss
//! factor and storage efficiency. [`cli`] is the command-line front end.

pub mod ballsbins;
pub mod cell;
pub mod cli;
pub mod codes;
pub mod field;
pub mod sim;

pub use cell::{CellState, CodeKind, CodeParams, ParamsError, WriteOutcome};
pub use codes::{Code, LoadBalancing, ModulationCode, SelfRandomized};
pub use field::{FieldElem, FieldError, FieldSpec};
