//! Exhaustive-enumeration oracles and random table generators shared by the
//! integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;

use duelbandit::confidence::DuelingSurface;
use duelbandit::policies::ids_p_grid;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Lexicographic minimum of `(value, key)` over all items.
fn lex_min<K: Ord + Copy>(items: impl Iterator<Item = (f64, K)>) -> (f64, K) {
    items
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
        .unwrap()
}

/// Lexicographic "largest value, then smallest key".
fn lex_max<K: Ord + Copy>(items: impl Iterator<Item = (f64, K)>) -> (f64, K) {
    items
        .min_by(|a, b| match b.0.partial_cmp(&a.0).unwrap() {
            Ordering::Equal => a.1.cmp(&b.1),
            o => o,
        })
        .unwrap()
}

pub fn members(mask: &[bool]) -> Vec<usize> {
    (0..mask.len()).filter(|&i| mask[i]).collect()
}

pub fn oracle_maxminlcb(s: &DuelingSurface, mask: &[bool]) -> (usize, usize) {
    let m = members(mask);
    let mut rows = Vec::new();
    for &i in &m {
        let (v, j) = lex_min(m.iter().map(|&j| (s.lcb(i, j), j)));
        rows.push((v, (i, j)));
    }
    lex_max(rows.into_iter()).1
}

pub fn oracle_maxinp(s: &DuelingSurface, mask: &[bool]) -> (usize, usize) {
    let m = members(mask);
    let all = m.iter().flat_map(|&i| m.iter().map(move |&j| (i, j)));
    lex_max(all.map(|(i, j)| (s.sigma(i, j), (i, j)))).1
}

pub fn oracle_response(s: &DuelingSurface, mask: &[bool], reference: usize) -> usize {
    lex_max(members(mask).into_iter().map(|x| (s.ucb(x, reference), x))).1
}

/// `(incumbent, Some((x, p)))` minimizing the information ratio.
pub fn oracle_ids(s: &DuelingSurface, beta_tilde: f64, rho: f64) -> (usize, Option<(usize, f64)>) {
    let n = s.len();
    let incumbent = lex_max((0..n).map(|x| (s.h(x, 0), x))).1;
    let u = (0..n)
        .map(|x| s.h(x, incumbent) + beta_tilde * s.sigma(x, incumbent))
        .fold(f64::NEG_INFINITY, f64::max);
    let ps: Vec<f64> = ids_p_grid().collect();
    let mut cands = Vec::new();
    for x in 0..n {
        let sig = s.sigma(incumbent, x);
        if x == incumbent || sig <= 0.0 {
            continue;
        }
        let gap = u + s.h(incumbent, x);
        for (k, &p) in ps.iter().enumerate() {
            let num = (1.0 - p) * u + p * gap;
            let ratio = num * num / (p * (1.0 + sig * sig / rho).ln());
            cands.push((ratio, (x, k)));
        }
    }
    if cands.is_empty() {
        return (incumbent, None);
    }
    let (_, (x, k)) = lex_min(cands.into_iter());
    (incumbent, Some((x, ps[k])))
}

/// Probabilities on a coarse lattice so that ties actually occur.
pub fn random_prob_surface(rng: &mut ChaCha8Rng, n: usize) -> DuelingSurface {
    let prob = (0..n * n)
        .map(|_| rng.random_range(1..10) as f64 / 10.0)
        .collect();
    let sigma = (0..n * n)
        .map(|_| rng.random_range(0..4) as f64 * 0.05)
        .collect();
    let beta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    DuelingSurface::from_prob_tables(n, prob, sigma, beta)
}

/// Consistent surface from dyadic utilities and a symmetric width table.
pub fn random_utility_surface(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DuelingSurface {
    let u: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-8..8) as f64 / 8.0 + shift)
        .collect();
    let mut sigma = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = rng.random_range(0..5) as f64 * 0.125;
            sigma[i * n + j] = v;
            sigma[j * n + i] = v;
        }
    }
    let h = (0..n * n).map(|k| u[k / n] - u[k % n]).collect();
    DuelingSurface::from_tables(n, h, sigma, 1.0)
}

pub fn random_mask(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    loop {
        let m: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
        if m.iter().any(|&b| b) {
            return m;
        }
    }
}
