//! Exact statevector simulation of depth-p QAOA with a diagonal
//! higher-order phase operator and the transverse-field X mixer.

use num_complex::Complex;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hubo::Hubo;
use crate::scalar::Scalar;

pub const MAX_WIDTH: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Angles<S> {
    pub gammas: Vec<S>,
    pub betas: Vec<S>,
}

impl<S: Scalar> Angles<S> {
    pub fn zeros(p: usize) -> Angles<S> {
        Angles { gammas: vec![S::zero(); p], betas: vec![S::zero(); p] }
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }

    /// `[γ_1, β_1, γ_2, β_2, …]`
    fn to_flat(&self) -> Vec<f64> {
        self.gammas
            .iter()
            .zip(&self.betas)
            .flat_map(|(g, b)| [g.as_f64(), b.as_f64()])
            .collect()
    }

    fn from_flat(v: &[f64]) -> Angles<S> {
        Angles {
            gammas: v.iter().step_by(2).map(|&x| S::of(x)).collect(),
            betas: v.iter().skip(1).step_by(2).map(|&x| S::of(x)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<S> {
    pub width: usize,
    pub amps: Vec<Complex<S>>,
}

impl<S: Scalar> StateVector<S> {
    /// |+⟩^⊗n
    pub fn uniform(width: usize) -> StateVector<S> {
        let dim = 1usize << width;
        let a = S::one() / S::of(dim as f64).sqrt();
        StateVector { width, amps: vec![Complex::new(a, S::zero()); dim] }
    }

    pub fn norm_sqr(&self) -> S {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<S> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// E(z) for every basis index (bit j of the index ↔ variable j).
pub fn energy_table<S: Scalar>(h: &Hubo<S>) -> Result<Vec<S>> {
    if h.width > MAX_WIDTH {
        return Err(Error::WidthTooLarge { width: h.width, limit: MAX_WIDTH });
    }
    let masks = h.masks();
    Ok((0..1u64 << h.width)
        .map(|idx| {
            masks.iter().fold(h.constant, |e, &(m, c)| {
                if (idx & m).count_ones() % 2 == 1 { e - c } else { e + c }
            })
        })
        .collect())
}

fn apply_phase<S: Scalar>(amps: &mut [Complex<S>], energies: &[S], gamma: S) {
    for (a, &e) in amps.iter_mut().zip(energies) {
        let (s, c) = (gamma * e).sin_cos();
        *a = *a * Complex::new(c, -s);
    }
}

/// Π_j e^{−iβ X_j}
fn apply_mixer<S: Scalar>(amps: &mut [Complex<S>], width: usize, beta: S) {
    let (s, c) = beta.sin_cos();
    let ms = Complex::new(S::zero(), -s);
    let c = Complex::new(c, S::zero());
    for q in 0..width {
        let bit = 1usize << q;
        for base in 0..amps.len() {
            if base & bit == 0 {
                let (a0, a1) = (amps[base], amps[base | bit]);
                amps[base] = c * a0 + ms * a1;
                amps[base | bit] = c * a1 + ms * a0;
            }
        }
    }
}

pub fn evolve_with_energies<S: Scalar>(energies: &[S], width: usize, angles: &Angles<S>) -> StateVector<S> {
    let mut st = StateVector::uniform(width);
    for (&g, &b) in angles.gammas.iter().zip(&angles.betas) {
        apply_phase(&mut st.amps, energies, g);
        apply_mixer(&mut st.amps, width, b);
    }
    st
}

pub fn evolve<S: Scalar>(h: &Hubo<S>, angles: &Angles<S>) -> Result<StateVector<S>> {
    let e = energy_table(h)?;
    Ok(evolve_with_energies(&e, h.width, angles))
}

fn expectation<S: Scalar>(st: &StateVector<S>, energies: &[S]) -> S {
    st.amps.iter().zip(energies).map(|(a, &e)| a.norm_sqr() * e).sum()
}

pub fn expected_energy<S: Scalar>(h: &Hubo<S>, angles: &Angles<S>) -> Result<S> {
    let e = energy_table(h)?;
    Ok(expectation(&evolve_with_energies(&e, h.width, angles), &e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleSearch<S> {
    pub angles: Angles<S>,
    pub energy: S,
    pub evaluations: usize,
}

struct Objective<'a, S> {
    energies: &'a [S],
    width: usize,
    evals: usize,
    limit: usize,
}

impl<S: Scalar> Objective<'_, S> {
    fn eval(&mut self, flat: &[f64]) -> f64 {
        self.evals += 1;
        let a = Angles::from_flat(flat);
        expectation(&evolve_with_energies(self.energies, self.width, &a), self.energies).as_f64()
    }

    fn left(&self) -> usize {
        self.limit.saturating_sub(self.evals)
    }
}

/// Nelder–Mead from `x0` (already evaluated at `f0`) using at most
/// `budget` further evaluations.
fn nelder_mead<S: Scalar, R: Rng>(
    obj: &mut Objective<'_, S>,
    x0: Vec<f64>,
    f0: f64,
    budget: usize,
    step: f64,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let stop = obj.evals + budget;
    let d = x0.len();
    if budget < d + 1 {
        return (x0, f0);
    }
    let mut simplex = vec![(x0.clone(), f0)];
    for k in 0..d {
        let mut x = x0.clone();
        x[k] += if rng.gen::<bool>() { step } else { -step };
        let f = obj.eval(&x);
        simplex.push((x, f));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    while obj.evals < stop {
        order(&mut simplex);
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-10 {
            break;
        }
        let worst = simplex[d].clone();
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(1.0);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            if obj.evals < stop {
                let xe = along(2.0);
                let fe = obj.eval(&xe);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else {
                simplex[d] = (xr, fr);
            }
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            if obj.evals >= stop {
                break;
            }
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let f = obj.eval(&x);
                (x, f)
            } else {
                let x = along(-0.5);
                let f = obj.eval(&x);
                (x, f)
            };
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if obj.evals >= stop {
                        break;
                    }
                    let x: Vec<f64> = best.iter().zip(&v.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let f = obj.eval(&x);
                    *v = (x, f);
                }
            }
        }
    }
    order(&mut simplex);
    simplex.swap_remove(0)
}

/// Layerwise angle search: for layer ℓ = 1..p, a coarse grid over
/// (γ_ℓ, β_ℓ) ∈ [0, π)² with earlier layers fixed (the grid contains
/// (0, 0), so adding a layer never hurts), then Nelder–Mead over all 2ℓ
/// angles. `budget` caps the total number of energy evaluations and is
/// split evenly over the remaining layers. A warm start of depth `p` is
/// evaluated first and kept if nothing beats it.
pub fn optimize_angles<S: Scalar, R: Rng>(
    h: &Hubo<S>,
    p: usize,
    budget: usize,
    warm: Option<&Angles<S>>,
    rng: &mut R,
) -> Result<AngleSearch<S>> {
    assert!(p >= 1 && budget >= 1);
    let energies = energy_table(h)?;
    let mut obj = Objective { energies: &energies, width: h.width, evals: 0, limit: budget };
    let warm = warm.filter(|w| w.depth() == p).map(|w| {
        let x = w.to_flat();
        let f = obj.eval(&x);
        (x, f)
    });
    if let Some((x, f)) = &warm {
        if budget == 1 {
            return Ok(AngleSearch { angles: Angles::from_flat(x), energy: S::of(*f), evaluations: obj.evals });
        }
    }
    let pi = std::f64::consts::PI;
    let mut cur: Vec<f64> = Vec::new();
    let mut cur_f = expectation(&StateVector::<S>::uniform(h.width), &energies).as_f64();
    for layer in 1..=p {
        let allot = obj.left() / (p - layer + 1);
        let stage_end = obj.evals + allot;
        let g = ((allot / 2) as f64).sqrt().floor().max(2.0) as usize;
        let mut best: Option<(Vec<f64>, f64)> = None;
        'grid: for a in 0..g {
            for b in 0..g {
                if obj.evals >= stage_end.max(obj.evals + 1) && best.is_some() {
                    break 'grid;
                }
                let mut x = cur.clone();
                x.extend([pi * a as f64 / g as f64, pi * b as f64 / g as f64]);
                let f = if a == 0 && b == 0 && layer > 1 {
                    cur_f
                } else {
                    obj.eval(&x)
                };
                if best.as_ref().map_or(true, |(_, bf)| f < *bf) {
                    best = Some((x, f));
                }
            }
        }
        if layer > 1 && obj.evals < stage_end {
            // Mixer ramp: repeat the previous γ with half the previous β.
            let mut x = cur.clone();
            x.extend([cur[cur.len() - 2], cur[cur.len() - 1] / 2.0]);
            let f = obj.eval(&x);
            if f < best.as_ref().unwrap().1 {
                best = Some((x, f));
            }
        }
        let (x, f) = best.expect("grid evaluated");
        let left = stage_end.saturating_sub(obj.evals);
        let (x, f) = nelder_mead(&mut obj, x, f, left, pi / (2.0 * g as f64), rng);
        cur = x;
        cur_f = f;
    }
    let (x, f) = match warm {
        Some((wx, wf)) if wf <= cur_f => (wx, wf),
        _ => (cur, cur_f),
    };
    Ok(AngleSearch { angles: Angles::from_flat(&x), energy: S::of(f), evaluations: obj.evals })
}

/// `shots` i.i.d. basis indices drawn from |amp|².
pub fn sample<S: Scalar, R: Rng>(state: &StateVector<S>, shots: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(state.amps.len());
    let mut acc = 0.0f64;
    for a in &state.amps {
        acc += a.norm_sqr().as_f64();
        cdf.push(acc);
    }
    (0..shots)
        .map(|_| {
            let u = rng.gen::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hubo::{evaluate_hubo, bits_of};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    type C = Complex<f64>;

    fn random_model(width: usize, rng: &mut ChaCha8Rng) -> Hubo<f64> {
        let mut terms = BTreeMap::new();
        for _ in 0..(2 * width) {
            let order = rng.gen_range(1..=width.min(3));
            let mut k = rand::seq::index::sample(rng, width, order).into_vec();
            k.sort_unstable();
            terms.insert(k, rng.gen_range(-1.0..1.0));
        }
        Hubo::from_spin_terms(width, terms, 0.0)
    }

    fn single_z(a: f64) -> Hubo<f64> {
        let mut t = BTreeMap::new();
        t.insert(vec![0], a);
        Hubo::from_spin_terms(1, t, 0.0)
    }

    fn angles(g: &[f64], b: &[f64]) -> Angles<f64> {
        Angles { gammas: g.to_vec(), betas: b.to_vec() }
    }

    /// Dense reference: explicit 2^n × 2^n matrices for the phase operator
    /// and for the mixer as a Kronecker product of 2 × 2 rotations.
    fn dense_evolve(h: &Hubo<f64>, a: &Angles<f64>) -> Vec<C> {
        let n = h.width;
        let dim = 1 << n;
        let matmul = |m: &Vec<Vec<C>>, v: &Vec<C>| -> Vec<C> {
            (0..dim).map(|r| (0..dim).map(|c| m[r][c] * v[c]).sum()).collect()
        };
        let kron = |a: &Vec<Vec<C>>, b: &Vec<Vec<C>>| -> Vec<Vec<C>> {
            let (ra, rb) = (a.len(), b.len());
            let mut out = vec![vec![C::new(0.0, 0.0); ra * rb]; ra * rb];
            for i in 0..ra {
                for j in 0..ra {
                    for k in 0..rb {
                        for l in 0..rb {
                            out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                        }
                    }
                }
            }
            out
        };
        let mut v = vec![C::new(1.0 / (dim as f64).sqrt(), 0.0); dim];
        for (&g, &b) in a.gammas.iter().zip(&a.betas) {
            let mut phase = vec![vec![C::new(0.0, 0.0); dim]; dim];
            for z in 0..dim {
                let e = evaluate_hubo(h, &bits_of(z, n));
                phase[z][z] = C::new(0.0, -g * e).exp();
            }
            v = matmul(&phase, &v);
            let rx = vec![
                vec![C::new(b.cos(), 0.0), C::new(0.0, -b.sin())],
                vec![C::new(0.0, -b.sin()), C::new(b.cos(), 0.0)],
            ];
            let mut mixer = vec![vec![C::new(1.0, 0.0)]];
            for _ in 0..n {
                mixer = kron(&mixer, &rx);
            }
            v = matmul(&mixer, &v);
        }
        v
    }

    #[test]
    fn zero_angles_keep_uniform_state() {
        let h = random_model(5, &mut ChaCha8Rng::seed_from_u64(1));
        let st = evolve(&h, &Angles::zeros(2)).unwrap();
        for pr in st.probabilities() {
            assert!((pr - 1.0 / 32.0).abs() < 1e-15);
        }
        let e = energy_table(&h).unwrap();
        let mean = e.iter().sum::<f64>() / 32.0;
        assert!((expected_energy(&h, &Angles::zeros(1)).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn one_qubit_closed_form() {
        // |ψ⟩ = R_x(β) diag(e^{−iγa}, e^{iγa}) |+⟩
        let (a, g, b) = (0.7, 0.9, 0.4);
        let st = evolve(&single_z(a), &angles(&[g], &[b])).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let p0 = C::new(0.0, -g * a).exp() * s;
        let p1 = C::new(0.0, g * a).exp() * s;
        let e0 = C::new(b.cos(), 0.0) * p0 + C::new(0.0, -b.sin()) * p1;
        let e1 = C::new(0.0, -b.sin()) * p0 + C::new(b.cos(), 0.0) * p1;
        assert!((st.amps[0] - e0).norm() < 1e-14);
        assert!((st.amps[1] - e1).norm() < 1e-14);
    }

    #[test]
    fn agrees_with_dense_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for width in 1..=6 {
            let h = random_model(width, &mut rng);
            let a = angles(&[0.3, 1.1, -0.4], &[0.7, 0.2, 1.3]);
            let fast = evolve(&h, &a).unwrap();
            let slow = dense_evolve(&h, &a);
            for (x, y) in fast.amps.iter().zip(&slow) {
                assert!((x - y).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn unitarity_and_pure_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in 1..=4 {
            let h = random_model(7, &mut rng);
            let g: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let st = evolve(&h, &angles(&g, &b)).unwrap();
            assert!((st.norm_sqr() - 1.0).abs() < 1e-10);
            let st = evolve(&h, &angles(&g, &vec![0.0; p])).unwrap();
            let u = 1.0 / 128.0;
            assert!(st.probabilities().iter().all(|&q| (q - u).abs() < 1e-15));
        }
    }

    #[test]
    fn width_limit_is_enforced() {
        let h: Hubo<f64> = Hubo::from_spin_terms(17, BTreeMap::new(), 0.0);
        assert!(matches!(evolve(&h, &Angles::zeros(1)), Err(Error::WidthTooLarge { .. })));
    }

    #[test]
    fn f32_state_is_normalized() {
        let h = random_model(6, &mut ChaCha8Rng::seed_from_u64(9)).cast::<f32>();
        let st = evolve(&h, &Angles { gammas: vec![0.5f32, 0.2], betas: vec![0.3, 0.8] }).unwrap();
        assert!((st.norm_sqr() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn warm_start_with_unit_budget_is_returned() {
        let h = single_z(1.0);
        let w = angles(&[0.3], &[0.2]);
        let r = optimize_angles(&h, 1, 1, Some(&w), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.angles, w);
        assert_eq!(r.evaluations, 1);
    }

    #[test]
    fn one_qubit_optimum_within_one_percent() {
        let h = single_z(1.0);
        let mut dense = f64::INFINITY;
        for a in 0..400 {
            for b in 0..400 {
                let (g, be) = (a as f64 * std::f64::consts::PI / 400.0, b as f64 * std::f64::consts::PI / 400.0);
                dense = dense.min(expected_energy(&h, &angles(&[g], &[be])).unwrap());
            }
        }
        let r = optimize_angles(&h, 1, 200, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((r.energy - dense).abs() <= 0.01 * dense.abs(), "{} vs {dense}", r.energy);
        assert!((expected_energy(&h, &r.angles).unwrap() - r.energy).abs() < 1e-12);
    }

    #[test]
    fn deeper_circuit_is_never_worse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let h = random_model(5, &mut rng);
            let p1 = optimize_angles(&h, 1, 60, None, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
            let p2 = optimize_angles(&h, 2, 120, None, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
            assert!(p2.energy <= p1.energy + 1e-9);
        }
    }

    #[test]
    fn sampling_basis_and_uniform_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut st = StateVector::<f64>::uniform(3);
        st.amps.iter_mut().for_each(|a| *a = C::new(0.0, 0.0));
        st.amps[5] = C::new(0.0, 1.0);
        assert!(sample(&st, 100, &mut rng).iter().all(|&z| z == 5));
        assert_eq!(sample(&st, 1, &mut rng).len(), 1);

        let st = StateVector::<f64>::uniform(4);
        let shots = 1 << 16;
        let draws = sample(&st, shots, &mut rng);
        let mut counts = [0usize; 16];
        draws.iter().for_each(|&z| counts[z] += 1);
        let (mean, sd) = (shots as f64 / 16.0, (shots as f64 * (1.0 / 16.0) * (15.0 / 16.0)).sqrt());
        assert!(counts.iter().all(|&c| (c as f64 - mean).abs() < 5.0 * sd), "{counts:?}");
        let again = sample(&st, 10, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(again, sample(&st, 10, &mut ChaCha8Rng::seed_from_u64(1)));
    }

    #[test]
    fn shot_estimate_matches_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let h = random_model(6, &mut rng);
            let a = angles(&[0.4, 0.9], &[0.6, 0.3]);
            let st = evolve(&h, &a).unwrap();
            let e = energy_table(&h).unwrap();
            let exact = expected_energy(&h, &a).unwrap();
            let var: f64 = st.probabilities().iter().zip(&e).map(|(p, x)| p * (x - exact).powi(2)).sum();
            let shots = 10_000;
            let est = sample(&st, shots, &mut rng).iter().map(|&z| e[z]).sum::<f64>() / shots as f64;
            assert!((est - exact).abs() <= 3.0 * (var / shots as f64).sqrt() + 1e-12);
        }
    }
}
