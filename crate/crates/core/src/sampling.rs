//! Deterministic point sets: Halton sequences and log-uniform grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// `count` Halton points in the box `[lower, upper]`, starting at index 1.
///
/// `seed = 0` gives the plain sequence; any other seed applies a
/// Cranley–Patterson rotation drawn from a ChaCha stream.
pub fn halton_box(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = lower.len();
    assert_eq!(dim, upper.len());
    assert!(dim <= PRIMES.len(), "Halton sequence supports up to 16 dimensions");
    let shift: Vec<f64> = if seed == 0 {
        vec![0.0; dim]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..dim).map(|_| rng.random::<f64>()).collect()
    };
    (1..=count as u64)
        .map(|k| {
            (0..dim)
                .map(|d| {
                    let u = (radical_inverse(k, PRIMES[d]) + shift[d]).fract();
                    lower[d] + u * (upper[d] - lower[d])
                })
                .collect()
        })
        .collect()
}

/// `points` log-spaced values covering `[lower, upper]` inclusive.
pub fn log_space(lower: f64, upper: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lower],
        _ => {
            let (a, b) = (lower.ln(), upper.ln());
            (0..points)
                .map(|i| {
                    if i == 0 {
                        lower
                    } else if i + 1 == points {
                        upper
                    } else {
                        (a + (b - a) * i as f64 / (points - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Cartesian product of one axis per dimension, last axis fastest.
pub fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// `steps` evenly spaced values over `[min, max]` with exact endpoints.
pub fn lin_space(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|i| {
                if i + 1 == steps {
                    max
                } else {
                    min + (max - min) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
    }
}
