//! Seeded uniform sampling of phase points inside a box, away from
//! excluded denominators.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::symexpr::{Compiled, Expr, SymId};

/// Minimum magnitude an excluded denominator may take at a sample.
pub const DENOMINATOR_THRESHOLD: f64 = 0.1;
/// Attempts per point before the sampler gives up.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("sampler starved: {attempts} consecutive draws rejected")]
    Starvation { attempts: usize },
}

/// Stream tags keeping the random sequences of different pipeline stages
/// independent under one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    System = 1,
    Holdout = 2,
    Gram = 3,
    Certificate = 4,
    CertificateHoldout = 5,
    Rank = 6,
    Search = 7,
    Extremals = 8,
    Check = 9,
}

/// Deterministic generator for point `index` of a stage.
pub fn point_rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((stream as u64) << 56));
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct Sampler {
    len: usize,
    bounds: Vec<(usize, f64, f64)>,
    guards: Vec<Compiled>,
    threshold: f64,
}

impl Sampler {
    /// `len` is the length of the symbol-indexed value vectors produced;
    /// unboxed symbols are `NaN`.
    pub fn new(len: usize, bounds: &BTreeMap<SymId, (f64, f64)>, excluded: &[Expr]) -> Self {
        Sampler {
            len,
            bounds: bounds.iter().map(|(s, &(lo, hi))| (s.index(), lo, hi)).collect(),
            guards: excluded.iter().map(Compiled::new).collect(),
            threshold: DENOMINATOR_THRESHOLD,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// True when every excluded denominator is evaluable and at least the
    /// threshold in magnitude.
    pub fn admissible(&self, values: &[f64]) -> bool {
        self.guards.iter().all(|g| matches!(g.eval(values), Ok(v) if v.abs() >= self.threshold))
    }

    /// One admissible point.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, SamplingError> {
        self.draw_with(rng, |_| true)
    }

    /// One point that is admissible and accepted by `accept`.
    pub fn draw_with<F>(&self, rng: &mut ChaCha8Rng, mut accept: F) -> Result<Vec<f64>, SamplingError>
    where
        F: FnMut(&[f64]) -> bool,
    {
        for _ in 0..MAX_ATTEMPTS {
            let mut v = vec![f64::NAN; self.len];
            for &(i, lo, hi) in &self.bounds {
                v[i] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
            if self.admissible(&v) && accept(&v) {
                return Ok(v);
            }
        }
        Err(SamplingError::Starvation { attempts: MAX_ATTEMPTS })
    }

    /// `count` points of a stage, point `k` drawn from its own stream.
    pub fn draw_many(&self, seed: u64, stream: Stream, count: usize) -> Result<Vec<Vec<f64>>, SamplingError> {
        (0..count).map(|k| self.draw(&mut point_rng(seed, stream, k as u64))).collect()
    }
}
