#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ratetruth_core::prob::LabelSet;
use ratetruth_core::{DistortionMatrix, Distribution, SemanticChannel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive distribution.
pub fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    ratetruth_core::prob::normalize(&w).unwrap()
}

/// Uniform draw from the simplex.
pub fn simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

pub fn distortion(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DistortionMatrix {
    let data = (0..m * n).map(|_| rng.gen_range(0.0..3.0)).collect();
    DistortionMatrix::new(m, n, data).unwrap()
}

/// Truth table with some exact zeros; every column peaks at 1 and every row
/// keeps a positive entry.
pub fn semchan(rng: &mut ChaCha8Rng, m: usize, n: usize, zero_rate: f64) -> SemanticChannel {
    let mut t: Vec<f64> = vec![0.0; m * n];
    for v in t.iter_mut() {
        *v = if rng.gen::<f64>() < zero_rate { 0.0 } else { rng.gen_range(0.01..1.0) };
    }
    for i in 0..m {
        let j = i % n;
        if t[i * n + j] == 0.0 {
            t[i * n + j] = rng.gen_range(0.01..1.0);
        }
    }
    for j in 0..n {
        let top = (0..m).max_by(|&a, &b| t[a * n + j].total_cmp(&t[b * n + j])).unwrap();
        t[top * n + j] = 1.0;
    }
    SemanticChannel::from_row_major(LabelSet::numbered(n), m, t).unwrap()
}
