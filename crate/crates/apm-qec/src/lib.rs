//! Ultra-high-rate affine-permutation CSS codes co-designed for
//! reconfigurable atom arrays.
//!
//! The crate covers the full desk-scale pipeline around this code family:
//!
//! - [`apm`]: exact arithmetic and group theory for affine permutations of `Z_P`;
//! - [`gf2`]: bit-packed GF(2) linear algebra and the alist interchange format;
//! - [`code`]: the block-circulant CSS check matrices, code parameters,
//!   Tanner-graph girth and logical bases;
//! - [`distance`]: randomized distance upper bounds plus a brute-force oracle;
//! - [`search`]: constrained randomized search over APM tuples;
//! - [`compile`]: compilation of APM transitions into hardware-legal AOD move
//!   schedules (rigid shifts, CRT-separable moves, log-depth fallback);
//! - [`motion`]: kinematic timing of move schedules and syndrome-extraction
//!   rounds;
//! - [`sim`]: memory experiments, CNOT scheduling by edge coloring, and
//!   phenomenological noise sampling;
//! - [`decode`]: the three-tier hierarchical decoder (BP, relay BP, exact MLE),
//!   logical-failure adjudication, throughput arithmetic and rate metrics.

pub mod apm;
pub mod code;
pub mod compile;
pub mod decode;
pub mod distance;
pub mod error;
pub mod gf2;
pub mod motion;
pub mod search;
pub mod sim;

pub use apm::{Apm, ApmGroup, AbelianStructure, OrbitDecomposition};
pub use code::{CodeSpec, CssCode, Girth};
pub use error::{Error, Result};
pub use gf2::{BitMatrix, BitVec, SparseGf2Matrix};
