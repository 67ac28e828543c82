//! Brute-force reference implementations used by the integration and
//! acceptance tests. They work on plain vectors and never call into the
//! library's likelihood code.

#![allow(dead_code)]

use niad::{simulate, Partition, Profile, QMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Attribute vector of a profile index, attribute 1 first.
pub fn bits(index: usize, len: usize) -> Vec<u8> {
    (0..len).map(|k| ((index >> (len - 1 - k)) & 1) as u8).collect()
}

pub fn q_rows(q: &QMatrix) -> Vec<Vec<u8>> {
    q.to_rows()
}

/// Ideal response by the defining products.
pub fn ideal(q: &[Vec<u8>], alpha: &[u8], dino: bool) -> Vec<u8> {
    q.iter()
        .map(|row| {
            if dino {
                let miss: u32 = row.iter().zip(alpha).map(|(&qk, &ak)| u32::from(qk == 1 && ak == 1)).sum();
                u8::from(miss > 0)
            } else {
                let all = row.iter().zip(alpha).all(|(&qk, &ak)| qk == 0 || ak == 1);
                u8::from(all)
            }
        })
        .collect()
}

/// `prod_j P(X_j = x_j | xi_j)` with no clamping.
pub fn response_prob(x: &[u8], xi: &[u8], slip: &[f64], guess: &[f64]) -> f64 {
    x.iter()
        .zip(xi)
        .enumerate()
        .map(|(j, (&xj, &ij))| {
            let p1 = if ij == 1 { 1.0 - slip[j] } else { guess[j] };
            if xj == 1 {
                p1
            } else {
                1.0 - p1
            }
        })
        .product()
}

/// `sum_i log sum_alpha P(x_i | alpha) nu_alpha` over profiles.
pub fn profile_loglik(data: &[Vec<u8>], q: &[Vec<u8>], nu_profile: &[f64], slip: &[f64], guess: &[f64], dino: bool) -> f64 {
    let k = q[0].len();
    let ideals: Vec<Vec<u8>> = (0..1usize << k).map(|a| ideal(q, &bits(a, k), dino)).collect();
    data.iter()
        .map(|x| {
            ideals
                .iter()
                .zip(nu_profile)
                .map(|(xi, nu)| nu * response_prob(x, xi, slip, guess))
                .sum::<f64>()
                .ln()
        })
        .sum()
}

/// Class-level log-likelihood for arbitrary positive `nu`, used for finite differences.
pub fn class_loglik(data: &[Vec<u8>], class_ideals: &[Vec<u8>], nu: &[f64], slip: &[f64], guess: &[f64]) -> f64 {
    data.iter()
        .map(|x| {
            class_ideals
                .iter()
                .zip(nu)
                .map(|(xi, n)| n * response_prob(x, xi, slip, guess))
                .sum::<f64>()
                .ln()
        })
        .sum()
}

/// Dirichlet(1) draw.
pub fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Random Q-matrix with nonzero rows.
pub fn random_q(rng: &mut ChaCha8Rng, j: usize, k: usize) -> QMatrix {
    let rows: Vec<Vec<u8>> = (0..j)
        .map(|_| {
            let mask = rng.random_range(1..(1u32 << k));
            (0..k).map(|a| ((mask >> (k - 1 - a)) & 1) as u8).collect()
        })
        .collect();
    QMatrix::new(&rows).unwrap()
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Profile-level probabilities summed into the partition's classes.
pub fn class_masses(part: &Partition, profile_probs: &[f64]) -> Vec<f64> {
    let mut nu = vec![0.0; part.len()];
    for (p, &w) in profile_probs.iter().enumerate() {
        nu[part.class_of(Profile::new(p as u32, part.n_attributes()))] += w;
    }
    nu
}

/// Normalized simulation-design profile probabilities.
pub fn sim_profile_probs() -> Vec<f64> {
    let total: f64 = simulate::SIM_PROFILE_PROBS.iter().sum();
    simulate::SIM_PROFILE_PROBS.iter().map(|p| p / total).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
