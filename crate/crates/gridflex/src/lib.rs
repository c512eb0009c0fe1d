//! Desk-scale co-simulation of a GPU data center providing power-grid
//! frequency-regulation service.
//!
//! The crate models the full loop between a multi-GPU server fleet and the
//! grid it helps stabilize:
//!
//! - [`signals`] generates and validates 2-second regulation signals and
//!   workload-utilization traces.
//! - [`powermodel`] is the parametric per-GPU power / throughput model
//!   (power cap, core allocation, pause/resume) composed into a server model.
//! - [`controller`] runs the 2-second closed-loop power-reshaping policy that
//!   coordinates caps, core fractions, and pause/resume across best-effort
//!   GPUs while latency-critical GPUs run unobstructed.
//! - [`market`] computes regulation targets, performance scores,
//!   certification, settlements, and optimizes hourly bids (with a
//!   brute-force oracle for verification).
//! - [`grid`] is a small unit-commitment / economic-dispatch model with
//!   regulation-reserve constraints and output-dependent emission rates,
//!   used to derive the marginal carbon emission of regulation reserves.
//! - [`carbon`] does the operational / embodied / exogenous carbon accounting
//!   and the TCO breakdown.
//! - [`config`] and [`pipeline`] bind everything into config-driven scenario
//!   runs; the `gridflex` binary exposes them as `gen`, `simulate`, `grid`,
//!   and `report` subcommands.
//!
//! Every run is deterministic under a fixed root seed: randomness flows from
//! one seed, split per purpose with [`seed_stream`].

// Negated float comparisons in validations are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carbon;
pub mod config;
pub mod controller;
pub mod error;
pub mod grid;
pub mod market;
pub mod pipeline;
pub mod powermodel;
pub mod signals;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a deterministic RNG stream for `label` from the root seed.
///
/// Distinct labels yield independent streams; the same (seed, label) pair
/// always yields the same stream.
pub fn seed_stream(root_seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(root_seed ^ fnv1a(label)))
}

/// Seed value (not a full RNG) for handing to APIs that take `u64` seeds.
pub fn split_seed(root_seed: u64, label: &str) -> u64 {
    splitmix64(root_seed ^ fnv1a(label))
}
