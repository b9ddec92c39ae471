use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Samples per block (one RNG stream per block).
pub const BLOCK_SIZE: u64 = 1000;
/// Stream-index spacing between sub-estimates of one run.
pub const STREAM_STRIDE: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedManifest {
    pub master_seed: u64,
    /// First stream index used.
    pub stream_start: u64,
    /// One past the last stream index used.
    pub stream_end: u64,
    pub block_size: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplingPlan {
    pub master_seed: u64,
    pub stream_base: u64,
    pub samples: u64,
    /// Worker threads; 0 means all available cores.
    pub workers: usize,
}

impl SamplingPlan {
    pub fn new(master_seed: u64, samples: u64) -> Self {
        SamplingPlan { master_seed, stream_base: 0, samples, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_stream_base(mut self, base: u64) -> Self {
        self.stream_base = base;
        self
    }

    /// The same plan moved to the `k`-th disjoint stream range.
    pub fn offset(&self, k: u64) -> Self {
        SamplingPlan { stream_base: self.stream_base + k * STREAM_STRIDE, ..*self }
    }

    pub fn block_count(&self) -> u64 {
        self.samples.div_ceil(BLOCK_SIZE)
    }

    pub fn block_len(&self, block: u64) -> u64 {
        BLOCK_SIZE.min(self.samples - block * BLOCK_SIZE)
    }

    pub fn manifest(&self) -> SeedManifest {
        SeedManifest {
            master_seed: self.master_seed,
            stream_start: self.stream_base,
            stream_end: self.stream_base + self.block_count(),
            block_size: BLOCK_SIZE,
        }
    }

    /// Runs `f(state, rng, count)` on every block and returns the block
    /// results in block order. `init` builds per-worker scratch state.
    pub fn run_blocks<S, T, I, F>(&self, init: I, f: F) -> Vec<T>
    where
        I: Fn() -> S + Sync + Send,
        F: Fn(&mut S, &mut RngStream, u64) -> T + Sync + Send,
        T: Send,
    {
        let blocks = self.block_count();
        let one = |state: &mut S, b: u64| {
            let mut rng = RngStream::new(self.master_seed, self.stream_base + b);
            f(state, &mut rng, self.block_len(b))
        };
        let workers = if self.workers == 0 { rayon::current_num_threads() } else { self.workers };
        if workers <= 1 || blocks <= 1 {
            let mut state = init();
            return (0..blocks).map(|b| one(&mut state, b)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| (0..blocks).into_par_iter().map_init(&init, |s, b| one(s, b)).collect())
    }
}

/// Count, sum and sum of squares; merging is addition.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_samples() {
        let p = SamplingPlan::new(1, 2500);
        assert_eq!(p.block_count(), 3);
        assert_eq!((0..3).map(|b| p.block_len(b)).sum::<u64>(), 2500);
        let m = p.offset(2).manifest();
        assert_eq!(m.stream_start, 2 * STREAM_STRIDE);
        assert_eq!(m.stream_end, 2 * STREAM_STRIDE + 3);
    }

    #[test]
    fn results_independent_of_worker_count() {
        let draw = |w| {
            SamplingPlan::new(5, 10_500)
                .with_workers(w)
                .run_blocks(|| (), |_, rng, n| (0..n).map(|_| rng.direction() as u64).sum::<u64>())
        };
        assert_eq!(draw(1), draw(3));
        assert_eq!(draw(1), draw(0));
    }

    #[test]
    fn tally_merge_equals_concatenation() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 11) as f64).collect();
        let mut whole = Tally::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut merged = Tally::default();
        for chunk in xs.chunks(77) {
            let mut t = Tally::default();
            chunk.iter().for_each(|&x| t.push(x));
            merged.merge(&t);
        }
        assert_eq!(merged, whole);
        assert!((whole.mean() - xs.iter().sum::<f64>() / 1000.0).abs() < 1e-12);
    }
}
