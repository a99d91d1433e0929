//! Directed walk counting and s–t reachability on a catalytic tape.
//!
//! The engine computes `N_ℓ(s, t)`, the number of length-`ℓ` walks from `s`
//! to `t`, using a small clean workspace plus a large "catalytic" tape of
//! registers whose initial contents are arbitrary and must be returned
//! bit-for-bit. Every operation is a reversible `V[·] ± U[·] (mod q)`, and
//! the result is read off as the difference of two runs, so the unknown
//! tape contents cancel.
//!
//! Layers, bottom up:
//!
//! - [`graph`]: digraphs, the edge-list format, residue decomposition.
//! - [`catalyst`]: register tapes, plain and packed into one integer.
//! - [`engine`]: the iterative program with an explicit control stack and
//!   a space meter.
//! - [`extract`]: the two-run difference, `N_ℓ(s, t) mod q`.
//! - [`crt`]: exact counts from several primes and reachability.
//! - [`oracle`]: brute-force reference counts.
//! - [`cli`]: the `catsav` command line.
//!
//! ```
//! use catalytic_savitch::crt::{count_walks_exact_catalytic, ExactOptions, WalkQuery};
//! use catalytic_savitch::graph::corpus;
//!
//! let query = WalkQuery { source: 0, target: 3, length: 2, k: 2, seed: 7 };
//! let count = count_walks_exact_catalytic(&corpus::diamond(), &query, ExactOptions::default())?;
//! assert_eq!(count.value, 2u32.into());
//! # Ok::<(), catalytic_savitch::extract::RunError>(())
//! ```

pub mod arith;
pub mod catalyst;
pub mod cli;
pub mod crt;
pub mod engine;
pub mod extract;
pub mod graph;
pub mod oracle;

pub use catalyst::{CatalyticTape, PackedCatalyticTape, RegisterFile, TapeInit};
pub use crt::{count_walks_exact_catalytic, decide_stcon, ExactOptions, WalkQuery};
pub use extract::{count_walks_mod, Encoding, RunConfig, RunError};
pub use graph::{parse_graph, DirectedGraph};
