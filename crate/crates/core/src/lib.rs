//! Straggler-resilient coded map-shuffle-reduce matrix multiplication.
//!
//! A task matrix is encoded with an outer erasure code and replicated onto
//! server subsets by an inner repetition code; any q of the K servers can
//! then finish the product, and the replication doubles as side information
//! for coded multicasting in the shuffle phase. This crate provides:
//!
//! * [`gf`], [`mds`] — GF(2^8)/GF(2^16) arithmetic and the Vandermonde
//!   outer code with erasure decoding;
//! * [`scheme`] — exact-rational feasibility, load and latency formulas,
//!   rate optimization and the latency/load trade-off curve;
//! * [`placement`] — the block-to-subset storage layout and its
//!   divisibility preflight;
//! * [`shuffle`] — construction and execution of the multicast plan;
//! * [`engine`] — the seeded end-to-end simulator with exact verification.

pub mod engine;
pub mod error;
pub mod gf;
pub mod mds;
pub mod placement;
pub mod ratio;
pub mod rng;
pub mod scheme;
pub mod shuffle;
pub mod subsets;

pub use engine::{monte_carlo_latency, run, RunOutcome, RunReport, StragglerModel};
pub use error::{Error, Result};
pub use gf::FieldWidth;
pub use mds::{make_generator, FieldMatrix, GeneratorMatrix};
pub use placement::{divisibility_check, partition_rows, reconstructible, Divisibility, PlacementMap};
pub use ratio::{Frac, Rat};
pub use scheme::{
    baseline_rates, check_feasible, enumerate_feasible, latency, load_breakdown, optimize_rates,
    tradeoff_curve, LoadBreakdown, RatePair, SystemParams,
};
pub use shuffle::{assign_reduce, build_plan, plan_load, ReduceAssignment, ShufflePlan};
