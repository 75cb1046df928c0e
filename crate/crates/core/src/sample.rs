//! Paired Monte Carlo samples `(x_i, z_i)` and their evaluation cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::function::{mixed_point_into, EvalError, Objective};
use crate::subset::{full_mask, IndexError, VariableSubset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error(transparent)]
    Index(#[from] IndexError),
}

/// Which half of the pair a coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    X = 0,
    Z = 1,
}

/// `n` paired uniform points in `[0,1)^s`.
///
/// Coordinate `j` of point `i` in stream `X` or `Z` is the `(i·s + j)`-th draw of
/// a ChaCha8 stream keyed by `seed`, so every value is addressable on its own
/// (see [`SampleBatch::coordinate`]).
///
/// The batch memoizes function values per subset mask: mask `[1:s]` holds
/// `f(x_i)`, the empty mask holds `f(z_i)`, and mask `u` holds
/// `f(x_{i,u}, z_{i,-u})`. A batch's cache belongs to a single function; use
/// [`SampleBatch::fresh`] to reuse the points with another one.
#[derive(Debug)]
pub struct SampleBatch {
    dim: usize,
    n: usize,
    seed: u64,
    x: Vec<f64>,
    z: Vec<f64>,
    cache: Mutex<HashMap<u64, Arc<[f64]>>>,
}

impl SampleBatch {
    pub fn generate(dim: usize, n: usize, seed: u64) -> Result<Self, SampleError> {
        if n == 0 {
            return Err(SampleError::ZeroSamples);
        }
        VariableSubset::full(dim)?;
        let fill = |stream: Stream| {
            let mut rng = stream_rng(seed, stream);
            (0..n * dim)
                .map(|_| rng.random::<f64>())
                .collect::<Vec<f64>>()
        };
        Ok(SampleBatch {
            dim,
            n,
            seed,
            x: fill(Stream::X),
            z: fill(Stream::Z),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Single coordinate, computed directly from its counter position.
    /// `j` is 0-based.
    pub fn coordinate(seed: u64, dim: usize, i: usize, j: usize, stream: Stream) -> f64 {
        let mut rng = stream_rng(seed, stream);
        // each f64 consumes one u64, i.e. two 32-bit words
        rng.set_word_pos(2 * (i * dim + j) as u128);
        rng.random::<f64>()
    }

    /// Same points, empty cache.
    pub fn fresh(&self) -> Self {
        SampleBatch {
            dim: self.dim,
            n: self.n,
            seed: self.seed,
            x: self.x.clone(),
            z: self.z.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn z(&self, i: usize) -> &[f64] {
        &self.z[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_cached(&self, u: VariableSubset) -> bool {
        self.cache.lock().unwrap().contains_key(&u.mask())
    }

    /// Number of cached columns (subset masks).
    pub fn cached_columns(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// `f(x_{i,u}, z_{i,-u})` for every `i`, evaluated once per mask.
    pub fn column<F: Objective + ?Sized>(
        &self,
        f: &F,
        u: VariableSubset,
    ) -> Result<Arc<[f64]>, EvalError> {
        if f.dim() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                got: f.dim(),
            });
        }
        let mask = u.mask() & full_mask(self.dim);
        if let Some(column) = self.cache.lock().unwrap().get(&mask) {
            return Ok(Arc::clone(column));
        }
        let values: Arc<[f64]> = if mask == full_mask(self.dim) {
            f.evaluate_batch(&self.x)?.into()
        } else if mask == 0 {
            f.evaluate_batch(&self.z)?.into()
        } else {
            let u = VariableSubset::from_mask(mask);
            let mut points = Vec::with_capacity(self.x.len());
            for i in 0..self.n {
                mixed_point_into(self.x(i), self.z(i), u, &mut points);
            }
            f.evaluate_batch(&points)?.into()
        };
        // concurrent writers compute identical columns; keep the first
        let mut cache = self.cache.lock().unwrap();
        Ok(Arc::clone(cache.entry(mask).or_insert(values)))
    }
}

/// Free-function form of [`SampleBatch::generate`].
pub fn generate_samples(dim: usize, n: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    SampleBatch::generate(dim, n, seed)
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
