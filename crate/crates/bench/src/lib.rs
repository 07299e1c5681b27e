//! Shared fixtures for the criterion benchmarks.

use swquad::harness::gen_gaussian_pair;
use swquad::{DiscreteMeasure, Seed};

/// A reproducible Gaussian toy pair.
pub fn toy_pair(d: usize, atoms: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    gen_gaussian_pair(d, atoms, Seed::new(0xbe9c)).expect("valid toy parameters")
}
