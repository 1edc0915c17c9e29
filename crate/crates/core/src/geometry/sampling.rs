//! Uniform sampling of the parallel shell `K_rho \ K`.
//!
//! Candidates come from a Halton sequence under a Cranley–Patterson random
//! shift, mapped into an axis-aligned box containing `K_rho`, and are kept
//! when `0 < d_K(x) <= rho`. Each shifted point is marginally uniform in the
//! box, so accepted points are uniform in the shell; independent shifts give
//! independent replicates for standard errors. A stream is addressed by
//! absolute index, so splitting it into blocks does not change any point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::body::ConvexBody;
use super::project::{project, ProjectionResult};

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// A randomly shifted Halton stream in `[0,1)^dim`.
#[derive(Debug, Clone)]
pub struct SampleStream {
    dim: usize,
    shift: Vec<f64>,
    next: u64,
}

impl SampleStream {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.gen::<f64>()).collect();
        // skip the origin-heavy start of the sequence
        Self {
            dim,
            shift,
            next: 1,
        }
    }

    /// Stream positioned at absolute index `start`.
    pub fn at(dim: usize, seed: u64, start: u64) -> Self {
        let mut s = Self::new(dim, seed);
        s.next = start + 1;
        s
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let v = radical_inverse(index, PRIMES[k]) + self.shift[k];
                if v >= 1.0 {
                    v - 1.0
                } else {
                    v
                }
            })
            .collect()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let p = self.point(self.next);
        self.next += 1;
        p
    }

    pub fn position(&self) -> u64 {
        self.next - 1
    }
}

/// Deterministic 64-bit seed derivation for sub-streams.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    // splitmix64 over the tag sequence
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &t in tags {
        z = z.wrapping_add(t.wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ 0x94D0_49BB_1331_11EB);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[derive(Debug, Clone)]
pub struct SamplingBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SamplingBox {
    pub fn for_body(body: &ConvexBody, rho: f64) -> Self {
        let (lo, hi) = body.bounding_box(rho);
        Self { lo, hi }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn map(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (a, b))| a + t * (b - a))
            .collect()
    }
}

/// A shell sample: the point and its projection data.
#[derive(Debug, Clone)]
pub struct ShellSample {
    pub x: Vec<f64>,
    pub proj: ProjectionResult,
}

/// Draws the next point of `stream` that lands in `K^rho`, returning it with
/// the number of candidates consumed.
pub fn parallel_shell_sample(
    body: &ConvexBody,
    rho: f64,
    bx: &SamplingBox,
    stream: &mut SampleStream,
) -> Result<(ShellSample, u64)> {
    if !(rho > 0.0) {
        return Err(Error::InvalidBody(format!("shell radius {rho}")));
    }
    // acceptance below 1e-9 means the box or body is broken
    for tries in 1..=1_000_000_000u64 {
        let x = bx.map(&stream.next_point());
        let proj = project(body, &x)?;
        if proj.d > 0.0 && proj.d <= rho {
            return Ok((ShellSample { x, proj }, tries));
        }
        if tries == 10_000_000 && bx.volume() <= 0.0 {
            break;
        }
    }
    Err(Error::DegenerateShell)
}
