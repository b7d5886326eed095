//! Dense-operator reference for the statevector simulator.

use std::collections::BTreeMap;

use csaopt_core::qaoa_sim::{evolve, optimize_angles};
use csaopt_core::{AnglesF64, HuboF64};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random spin model with up to `terms` terms of order 1..=k.
pub fn random_model(rng: &mut ChaCha8Rng, width: usize, terms: usize, k: usize) -> HuboF64 {
    let mut t = BTreeMap::new();
    for _ in 0..terms {
        let order = rng.gen_range(1..=k.min(width));
        let mut vars: Vec<usize> = rand::seq::index::sample(rng, width, order).into_vec();
        vars.sort_unstable();
        t.insert(vars, rng.gen_range(-1.0..1.0));
    }
    HuboF64::from_spin_terms(width, t, rng.gen_range(-0.5..0.5))
}

/// E(z) with z_j = +1 for bit 0 and −1 for bit 1.
pub fn spin_energy(h: &HuboF64, z: usize) -> f64 {
    h.terms.iter().fold(h.constant, |e, (vars, c)| {
        let sign: f64 = vars.iter().map(|&j| if z >> j & 1 == 1 { -1.0 } else { 1.0 }).product();
        e + c * sign
    })
}

type Matrix = Vec<Vec<Complex64>>;

fn mat_vec(m: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Full 2ⁿ × 2ⁿ operator ⊗_j e^{−iβX_j}, entry by entry.
fn dense_mixer(width: usize, beta: f64) -> Matrix {
    let dim = 1 << width;
    let one = [
        [Complex64::new(beta.cos(), 0.0), Complex64::new(0.0, -beta.sin())],
        [Complex64::new(0.0, -beta.sin()), Complex64::new(beta.cos(), 0.0)],
    ];
    (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| (0..width).map(|j| one[a >> j & 1][b >> j & 1]).product())
                .collect()
        })
        .collect()
}

fn dense_phase(h: &HuboF64, gamma: f64) -> Matrix {
    let dim = 1 << h.width;
    (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    if a == b {
                        Complex64::from_polar(1.0, -gamma * spin_energy(h, a))
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn dense_evolve(h: &HuboF64, angles: &AnglesF64) -> Vec<Complex64> {
    let dim = 1 << h.width;
    let mut v = vec![Complex64::new(1.0 / (dim as f64).sqrt(), 0.0); dim];
    for (&g, &b) in angles.gammas.iter().zip(&angles.betas) {
        v = mat_vec(&dense_phase(h, g), &v);
        v = mat_vec(&dense_mixer(h.width, b), &v);
    }
    v
}

/// Largest amplitude difference against the dense reference.
pub fn dense_deviation(h: &HuboF64, angles: &AnglesF64) -> f64 {
    let fast = evolve(h, angles).unwrap();
    let dense = dense_evolve(h, angles);
    fast.amps.iter().zip(&dense).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Number of ten random models (widths 4..=10) on which depth-2 angle
/// search lifts the ground-state probability above its uniform share.
pub fn amplified_count(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .filter(|k| {
            let width = 4 + k % 7;
            let h = random_model(&mut rng, width, 2 * width, 3);
            let search = optimize_angles(&h, 2, 200, None, &mut rng).unwrap();
            let st = evolve(&h, &search.angles).unwrap();
            let dim = 1usize << width;
            let e: Vec<f64> = (0..dim).map(|z| spin_energy(&h, z)).collect();
            let ground = e.iter().cloned().fold(f64::INFINITY, f64::min);
            let hits: Vec<usize> = (0..dim).filter(|&z| e[z] <= ground + 1e-12).collect();
            let p_ground: f64 = hits.iter().map(|&z| st.amps[z].norm_sqr()).sum();
            p_ground > hits.len() as f64 / dim as f64
        })
        .count()
}
