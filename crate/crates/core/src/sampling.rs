//! Deterministic low-discrepancy samplers.
//!
//! Points come from a Halton sequence with a Cranley-Patterson rotation
//! drawn from a seeded ChaCha stream, so a seed fixes every sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Rotated Halton sequence in `[0, 1)^dim`, `dim <= 8`.
#[derive(Clone, Debug)]
pub struct Halton {
    index: u64,
    shift: Vec<f64>,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(
            dim >= 1 && dim <= PRIMES.len(),
            "Halton dimension must be in 1..=8"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        // index 0 is the all-zero point; start past it
        Self { index: 1, shift }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let i = self.index;
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| {
                let x = radical_inverse(b, i) + s;
                x - x.floor()
            })
            .collect()
    }
}

/// Uniform low-discrepancy points in the box `(0, u_max] x (0, v_max]`.
#[derive(Clone, Debug)]
pub struct BoxSampler {
    pub u_max: f64,
    pub v_max: f64,
    pub seed: u64,
}

impl BoxSampler {
    pub fn new(u_max: f64, v_max: f64, seed: u64) -> Self {
        Self { u_max, v_max, seed }
    }

    /// The first `count` points of the sequence; a prefix of any longer call.
    pub fn points(&self, count: usize) -> Vec<(f64, f64)> {
        let mut h = Halton::new(2, self.seed);
        (0..count)
            .map(|_| {
                let x = h.next_point();
                // map [0,1) to (0,1] so that no sample sits exactly on an axis
                ((1.0 - x[0]) * self.u_max, (1.0 - x[1]) * self.v_max)
            })
            .collect()
    }

    /// Points accepted by `keep`, drawn from the same stream until `count`
    /// are found or `max_draws` is exhausted.
    pub fn filtered(
        &self,
        count: usize,
        max_draws: usize,
        mut keep: impl FnMut(f64, f64) -> bool,
    ) -> Vec<(f64, f64)> {
        let mut h = Halton::new(2, self.seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..max_draws {
            if out.len() == count {
                break;
            }
            let x = h.next_point();
            let (u, v) = ((1.0 - x[0]) * self.u_max, (1.0 - x[1]) * self.v_max);
            if keep(u, v) {
                out.push((u, v));
            }
        }
        out
    }
}

/// Points on the curve `u^p = v^q`, i.e. `v = u^(p-1)`, with `u` spread
/// over `(0, u_max]` and `v <= v_max`.
pub fn boundary_curve(p: f64, u_max: f64, v_max: f64, count: usize) -> Vec<(f64, f64)> {
    let u_top = u_max.min(v_max.powf(1.0 / (p - 1.0)));
    (1..=count)
        .map(|i| {
            let u = u_top * i as f64 / count as f64;
            (u, u.powf(p - 1.0))
        })
        .collect()
}

/// Deterministic unit vectors in `R^dim` from a seeded normal stream.
pub fn unit_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim)
                .map(|_| rng.sample(rand_distr::StandardNormal))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect()
}
