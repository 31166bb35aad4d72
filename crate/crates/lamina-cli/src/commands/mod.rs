//! Subcommand implementations, split into the geometric pipeline (leaf
//! solves, contraction sweeps, central curves, regularity fits) and the
//! symbolic pipeline (word counts, covers, dimensions, ergodic averages).

pub mod geometry;
pub mod symbolic;

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::output::Sink;

/// Everything a subcommand needs: the effective configuration and the
/// output destination.
pub struct Ctx {
    pub config: ExperimentConfig,
    pub out: String,
}

/// Parse a binary pattern argument like "101".
pub fn parse_pattern(text: &str) -> Result<Vec<u8>> {
    anyhow::ensure!(!text.is_empty(), "pattern must be a nonempty string of 0s and 1s");
    text.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => anyhow::bail!("pattern may only contain 0 and 1, found {other:?}"),
        })
        .collect()
}

impl Ctx {
    pub fn sink(&self) -> Result<Sink> {
        Sink::open(&self.out)
    }

    /// A deterministic generator for stream `stream`: reruns are
    /// byte-identical, distinct streams are independent, and parallel workers
    /// can each take their own stream without sharing state.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.config.map.seed.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        )
    }
}
