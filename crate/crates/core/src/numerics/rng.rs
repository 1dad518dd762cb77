//! Counter-based random numbers with splittable substreams.
//!
//! Each draw hashes `(seed, stream, counter)` with a SplitMix64-style
//! finalizer, so the generator carries no hidden state beyond the counter:
//! equal `(seed, stream)` pairs reproduce bitwise-identical sequences on any
//! platform, and per-index substreams (`stream = i`) can be consumed in any
//! order or in parallel without coordination.

/// Golden-ratio increment used by SplitMix64.
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
/// Odd constant decorrelating the stream index from the seed.
const STREAM_MIX: u64 = 0xDA94_2042_E4DD_58B5;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic counter-based generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    key: u64,
    counter: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let key = mix64(seed.wrapping_add(GOLDEN)) ^ mix64(stream.wrapping_mul(STREAM_MIX));
        RandomSource {
            seed,
            stream,
            key,
            counter: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent substream derived from the same seed.
    pub fn substream(&self, stream: u64) -> Self {
        RandomSource::new(self.seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        let x = self.counter.wrapping_mul(GOLDEN).wrapping_add(self.key);
        self.counter = self.counter.wrapping_add(1);
        mix64(mix64(x))
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }
}

/// `n` standard normal draws by the polar (Marsaglia) method.
///
/// Rejection consumes a deterministic counter subsequence, so the output is a
/// pure function of the source's `(seed, stream, counter)` state. When `n` is
/// odd the spare variate of the last accepted pair is discarded.
pub fn standard_normal(src: &mut RandomSource, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (u, v, s) = loop {
            let u = 2.0 * src.next_uniform() - 1.0;
            let v = 2.0 * src.next_uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                break (u, v, s);
            }
        };
        let f = (-2.0 * s.ln() / s).sqrt();
        out.push(u * f);
        if out.len() < n {
            out.push(v * f);
        }
    }
    out
}
