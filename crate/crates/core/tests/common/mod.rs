//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use ctc_boxlab::prob::{Alphabet, Channel};
use rand::Rng;

pub fn simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn entropy(v: &[f64]) -> f64 {
    -v.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Block map with `classes` closed classes and `transient` leaking states.
/// Returns the map and the stationary distribution of each class.
pub fn degenerate_map(
    rng: &mut impl Rng,
    classes: &[usize],
    transient: usize,
) -> (Channel, Vec<Vec<f64>>) {
    let recurrent: usize = classes.iter().sum();
    let n = recurrent + transient;
    let mut cols = vec![vec![0.0; n]; n];
    let mut stationary = Vec::new();
    let mut start = 0;
    for &size in classes {
        let mut block = vec![vec![0.0; size]; size];
        for (j, col) in block.iter_mut().enumerate() {
            *col = simplex(rng, size);
            cols[start + j][start..start + size].copy_from_slice(col);
        }
        // power iteration on a strictly positive block
        let mut pi = vec![1.0 / size as f64; size];
        for _ in 0..10_000 {
            let mut next = vec![0.0; size];
            for (j, col) in block.iter().enumerate() {
                for i in 0..size {
                    next[i] += col[i] * pi[j];
                }
            }
            let diff = next
                .iter()
                .zip(&pi)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            pi = next;
            if diff < 1e-15 {
                break;
            }
        }
        let mut full = vec![0.0; n];
        full[start..start + size].copy_from_slice(&pi);
        stationary.push(full);
        start += size;
    }
    for col in cols.iter_mut().skip(recurrent) {
        *col = simplex(rng, n);
        // keep at least half the mass leaving the transient states
        let leak: f64 = col[recurrent..].iter().sum();
        if leak > 0.5 {
            for p in col[recurrent..].iter_mut() {
                *p *= 0.5 / leak;
            }
            let keep: f64 = col[..recurrent].iter().sum();
            for p in col[..recurrent].iter_mut() {
                *p *= 0.5 / keep;
            }
        }
    }
    let alpha = Alphabet::new(n).unwrap();
    (
        Channel::from_columns(alpha.clone(), alpha, cols).unwrap(),
        stationary,
    )
}

/// Convex combination `Σ c_i π_i`.
pub fn mix(pis: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    (0..pis[0].len())
        .map(|k| pis.iter().zip(c).map(|(p, w)| w * p[k]).sum())
        .collect()
}

/// Maximum entropy over mixtures of disjointly supported `π_i`:
/// `H(Σ c_i π_i) = Σ c_i H(π_i) + H(c)` peaks at `c_i ∝ 2^{H(π_i)}`.
pub fn closed_form_max_entropy(pis: &[Vec<f64>]) -> f64 {
    pis.iter().map(|p| entropy(p).exp2()).sum::<f64>().log2()
}
