use rand::Rng;
use serde::{Deserialize, Serialize};

use super::repair::repair;
use super::{TraceEvent, TraceKind};
use crate::objective::j_value;
use crate::problem::Problem;
use crate::requirement::Allocation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub initial_temp: f64,
    pub cooling_factor: f64,
    pub moves_per_temp: u64,
    pub w_add: f64,
    pub w_remove: f64,
    pub w_swap: f64,
}

impl SaParams {
    /// Default schedule: T0 = 2·|J(seed)|·1%, ×0.95 every 50 moves,
    /// add/remove/swap = 0.4/0.3/0.3.
    pub fn for_seed_value(j_seed: f64) -> SaParams {
        SaParams {
            initial_temp: 2.0 * j_seed.abs() * 0.01,
            cooling_factor: 0.95,
            moves_per_temp: 50,
            w_add: 0.4,
            w_remove: 0.3,
            w_swap: 0.3,
        }
    }
}

/// One Metropolis chain; `step` performs a single proposal.
#[derive(Debug, Clone)]
pub struct Annealer {
    pub params: SaParams,
    pub current: Vec<u32>,
    pub current_j: f64,
    pub best: Vec<u32>,
    pub best_j: f64,
    pub temp: f64,
    moves_at_temp: u64,
}

impl Annealer {
    /// `start` must be feasible.
    pub fn new(p: &Problem, start: Vec<u32>, params: SaParams) -> Annealer {
        let j = j_value(p, &start);
        Annealer {
            params,
            current: start.clone(),
            current_j: j,
            best: start,
            best_j: j,
            temp: params.initial_temp,
            moves_at_temp: 0,
        }
    }

    fn propose<R: Rng>(&self, p: &Problem, rng: &mut R) -> Option<Vec<u32>> {
        let n = p.len();
        let up: Vec<usize> = (0..n).filter(|&i| self.current[i] < p.upper[i]).collect();
        let down: Vec<usize> = (0..n).filter(|&i| self.current[i] > 0).collect();
        let w = &self.params;
        let r = rng.gen::<f64>() * (w.w_add + w.w_remove + w.w_swap);
        let mut y = self.current.clone();
        if r < w.w_add {
            y[*pick(&up, rng)?] += 1;
        } else if r < w.w_add + w.w_remove {
            y[*pick(&down, rng)?] -= 1;
        } else {
            let a = *pick(&down, rng)?;
            let targets: Vec<usize> = up.iter().copied().filter(|&b| b != a).collect();
            let b = *pick(&targets, rng)?;
            y[a] -= 1;
            y[b] += 1;
        }
        Some(y)
    }

    /// Propose, repair, then accept by Metropolis on ΔJ. Infeasible repairs
    /// are rejected.
    pub fn step<R: Rng>(&mut self, p: &Problem, rng: &mut R) -> TraceKind {
        let kind = match self.propose(p, rng) {
            None => TraceKind::SaReject,
            Some(y) => {
                let r = repair(&Allocation::new(y), p);
                if !r.feasible {
                    TraceKind::SaReject
                } else {
                    let j = j_value(p, &r.allocation.lots);
                    let dj = j - self.current_j;
                    let accept = dj <= 0.0
                        || (self.temp > 0.0 && rng.gen::<f64>() < (-dj / self.temp).exp());
                    if accept {
                        self.current = r.allocation.lots;
                        self.current_j = j;
                        if j < self.best_j {
                            self.best = self.current.clone();
                            self.best_j = j;
                        }
                        TraceKind::SaAccept
                    } else {
                        TraceKind::SaReject
                    }
                }
            }
        };
        self.moves_at_temp += 1;
        if self.moves_at_temp >= self.params.moves_per_temp {
            self.moves_at_temp = 0;
            self.temp *= self.params.cooling_factor;
        }
        kind
    }

    /// Makes `x` both the current and the best state.
    pub fn reset_to(&mut self, x: Vec<u32>, j: f64) {
        self.current = x.clone();
        self.current_j = j;
        if j < self.best_j {
            self.best = x;
            self.best_j = j;
        }
    }
}

fn pick<'a, T, R: Rng>(items: &'a [T], rng: &mut R) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.gen_range(0..items.len())])
    }
}

/// Runs `iterations` SA steps from `repair(x0)` and returns the best feasible
/// allocation seen (or the repaired start if none is feasible) and the trace.
pub fn anneal<R: Rng>(
    p: &Problem,
    x0: &Allocation,
    params: SaParams,
    iterations: u64,
    rng: &mut R,
) -> (Allocation, Vec<TraceEvent>) {
    let start = repair(x0, p);
    let mut trace = Vec::new();
    if start.changed {
        trace.push(TraceEvent::new(0, j_value(p, &start.allocation.lots), TraceKind::Repair));
    }
    if !start.feasible {
        return (start.allocation, trace);
    }
    let mut sa = Annealer::new(p, start.allocation.lots, params);
    for it in 1..=iterations {
        let kind = sa.step(p, rng);
        trace.push(TraceEvent::new(it, sa.current_j, kind));
    }
    (Allocation::new(sa.best), trace)
}
