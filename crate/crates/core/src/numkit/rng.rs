use super::matrix::DenseMatrix;
use super::scalar::Scalar;

/// Deterministic seeded generator (SplitMix64).
///
/// The generator is self-contained so identical seeds produce identical
/// sequences on every platform: state advances by a fixed 64-bit increment and
/// each output is a fixed avalanche of the state. Normal deviates come from
/// the Marsaglia polar transform (`ln` + `sqrt` only), with the spare deviate
/// cached so single draws stay part of one reproducible sequence.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            spare_normal: None,
        }
    }

    /// Independent stream for worker `index` under a shared `seed`.
    ///
    /// Used to partition per-sample noise deterministically: results do not
    /// depend on how samples are batched across threads.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = Self::new(
            seed ^ index
                .wrapping_add(1)
                .wrapping_mul(0xA076_1D64_78BD_642F),
        );
        rng.next_u64();
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[low, high)`.
    pub fn next_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.next_f64()
    }

    /// Unbiased-enough index in `[0, n)` via widening multiply.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal deviate (Marsaglia polar method).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(spare) = self.spare_normal.take() {
            return spare;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    /// i.i.d. `N(mean, std^2)` draws filling a `rows x cols` matrix.
    pub fn sample_normal<S: Scalar>(
        &mut self,
        rows: usize,
        cols: usize,
        mean: S,
        std: S,
    ) -> DenseMatrix<S> {
        debug_assert!(std >= S::zero());
        let mut out = DenseMatrix::zeros(rows, cols);
        for v in out.data_mut() {
            *v = mean + std * S::from_f64_lossy(self.next_normal());
        }
        out
    }

    /// i.i.d. uniform draws in `[low, high)` filling a `rows x cols` matrix.
    pub fn sample_uniform<S: Scalar>(
        &mut self,
        rows: usize,
        cols: usize,
        low: S,
        high: S,
    ) -> DenseMatrix<S> {
        let mut out = DenseMatrix::zeros(rows, cols);
        for v in out.data_mut() {
            *v = low + (high - low) * S::from_f64_lossy(self.next_f64());
        }
        out
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }

    /// Random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}
