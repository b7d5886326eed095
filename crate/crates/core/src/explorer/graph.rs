use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::objective::j_value;
use crate::problem::Problem;
use crate::requirement::Allocation;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphNode {
    pub item: usize,
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEdge {
    /// Positions in `InteractionGraph::nodes`, `a < b`.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

/// One linear row `Σ a_i x_i ≤ b` of the feasible set, with its slack at x.
struct Row {
    coef: Vec<f64>,
    slack: f64,
}

fn rows(p: &Problem, x: &[u32]) -> Vec<Row> {
    let n = p.len();
    let u = p.coverage(x);
    let mut out = vec![Row {
        coef: p.values.iter().map(|v| -v.units()).collect(),
        slack: (u - p.r_eff).units(),
    }];
    if let Some(top) = p.window_top() {
        out.push(Row {
            coef: p.values.iter().map(|v| v.units()).collect(),
            slack: (top - u).units(),
        });
    }
    for cap in &p.caps {
        out.push(Row {
            coef: (0..n).map(|i| cap.coefficient(i, p.values[i])).collect(),
            slack: cap.slack_units(p.group_value(cap, x), u),
        });
    }
    out
}

/// Weighted Pearson correlation of two scenario-loss columns; 0 when either
/// column is constant.
fn loss_correlation(p: &Problem, i: usize, j: usize) -> f64 {
    let w = &p.scenario_weights;
    if w.is_empty() {
        return 0.0;
    }
    let col = |k: usize| -> Vec<f64> { (0..w.len()).map(|s| p.loss_row(s)[k]).collect() };
    let (a, b) = (col(i), col(j));
    let mean = |c: &[f64]| c.iter().zip(w).map(|(x, w)| x * w).sum::<f64>();
    let (ma, mb) = (mean(&a), mean(&b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for s in 0..w.len() {
        let (da, db) = (a[s] - ma, b[s] - mb);
        cov += w[s] * da * db;
        va += w[s] * da * da;
        vb += w[s] * db * db;
    }
    if va <= 1e-300 || vb <= 1e-300 {
        0.0
    } else {
        (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// Nodes are eligible items scored by the finite-difference sensitivity
/// |ΔJ| of a one-lot step (toward coverage when short, away from the cap
/// when over, otherwise the cheaper direction), normalized by the maximum.
///
/// Edge weight = mean of (a) the strongest shared-row binding level
/// clamp(1 − slack / max|a_k|, 0, 1) over coverage, window and cap rows
/// where both items have nonzero coefficients, and (b) the scenario-loss
/// |ρ|. Edges under `eps` are pruned.
pub fn build_interaction_graph(p: &Problem, x: &Allocation, eps: f64) -> InteractionGraph {
    let lots = &x.lots;
    let j0 = j_value(p, lots);
    let u = p.coverage(lots);
    let items: Vec<usize> = (0..p.len()).filter(|&i| p.upper[i] > 0).collect();
    let mut scores: Vec<f64> = items
        .iter()
        .map(|&i| {
            let mut y = lots.clone();
            let up = (lots[i] < p.upper[i]).then(|| {
                y[i] += 1;
                let d = j_value(p, &y) - j0;
                y[i] -= 1;
                d
            });
            let down = (lots[i] > 0).then(|| {
                y[i] -= 1;
                let d = j_value(p, &y) - j0;
                y[i] += 1;
                d
            });
            let d = if u < p.r_eff {
                up.or(down)
            } else if p.window_top().is_some_and(|t| u > t) {
                down.or(up)
            } else {
                match (up, down) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                }
            };
            d.unwrap_or(0.0).abs()
        })
        .collect();
    let max = scores.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        scores.iter_mut().for_each(|s| *s /= max);
    }
    let nodes: Vec<GraphNode> = items
        .iter()
        .zip(&scores)
        .map(|(&i, &score)| GraphNode {
            item: i,
            id: p.item_id(i).to_string(),
            score,
        })
        .collect();

    let rows = rows(p, lots);
    let levels: Vec<f64> = rows
        .iter()
        .map(|r| {
            let norm = items.iter().map(|&i| r.coef[i].abs()).fold(0.0, f64::max);
            if norm <= 0.0 {
                0.0
            } else {
                (1.0 - r.slack / norm).clamp(0.0, 1.0)
            }
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let (i, j) = (items[a], items[b]);
            let shared = rows
                .iter()
                .zip(&levels)
                .filter(|(r, _)| r.coef[i] != 0.0 && r.coef[j] != 0.0)
                .map(|(_, &l)| l)
                .fold(0.0, f64::max);
            let rho = loss_correlation(p, i, j).abs();
            let weight = ((shared + rho) / 2.0).clamp(0.0, 1.0);
            if weight >= eps && weight > 0.0 {
                edges.push(GraphEdge { a, b, weight });
            }
        }
    }
    InteractionGraph { nodes, edges }
}

fn top_by_score(g: &InteractionGraph, pool: &[usize], k: usize) -> Vec<usize> {
    let mut v = pool.to_vec();
    v.sort_by(|&a, &b| {
        g.nodes[b]
            .score
            .total_cmp(&g.nodes[a].score)
            .then_with(|| g.nodes[a].id.cmp(&g.nodes[b].id))
    });
    v.truncate(k);
    v
}

fn component_of(g: &InteractionGraph, start: usize) -> Vec<usize> {
    let n = g.nodes.len();
    let mut adj = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    let mut out = Vec::new();
    while let Some(v) = stack.pop() {
        out.push(v);
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Two-way spectral split of `comp` (normalized Laplacian, eigenvectors of
/// the two smallest nonzero eigenvalues, k-means with k = 2 seeded at the
/// top node and the point farthest from it). Returns the cluster holding
/// `top`, or the whole component when the nonzero spectrum is degenerate.
fn spectral_cluster(g: &InteractionGraph, comp: &[usize], top: usize) -> Vec<usize> {
    let m = comp.len();
    let pos = |v: usize| comp.binary_search(&v).ok();
    let mut w = DMatrix::<f64>::zeros(m, m);
    for e in &g.edges {
        if let (Some(a), Some(b)) = (pos(e.a), pos(e.b)) {
            w[(a, b)] = e.weight;
            w[(b, a)] = e.weight;
        }
    }
    let deg: Vec<f64> = (0..m).map(|i| w.row(i).sum()).collect();
    let mut lap = DMatrix::<f64>::identity(m, m);
    for a in 0..m {
        for b in 0..m {
            if a != b && w[(a, b)] != 0.0 {
                lap[(a, b)] = -w[(a, b)] / (deg[a] * deg[b]).sqrt();
            }
        }
    }
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let nonzero: Vec<f64> = order[1..].iter().map(|&k| eig.eigenvalues[k]).collect();
    let spread = nonzero.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - nonzero.iter().cloned().fold(f64::INFINITY, f64::min);
    if m < 3 || spread < 1e-9 {
        return comp.to_vec();
    }
    let dims: Vec<usize> = order[1..3.min(m)].to_vec();
    // Random-walk coordinates D^{-1/2}u, each axis scaled by 1/sqrt(λ) so
    // the Fiedler direction dominates.
    let point = |a: usize| -> Vec<f64> {
        dims.iter()
            .map(|&k| eig.eigenvectors[(a, k)] / deg[a].sqrt() / eig.eigenvalues[k].max(1e-12).sqrt())
            .collect()
    };
    let pts: Vec<Vec<f64>> = (0..m).map(point).collect();
    let d2 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let t = pos(top).expect("top node in component");
    let far = (0..m)
        .max_by(|&a, &b| d2(&pts[a], &pts[t]).total_cmp(&d2(&pts[b], &pts[t])).then(b.cmp(&a)))
        .unwrap();
    let mut centers = [pts[t].clone(), pts[far].clone()];
    let mut assign = vec![0usize; m];
    for _ in 0..100 {
        let next: Vec<usize> = pts
            .iter()
            .map(|x| usize::from(d2(x, &centers[1]) < d2(x, &centers[0])))
            .collect();
        let done = next == assign;
        assign = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = pts.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(x, _)| x).collect();
            if !members.is_empty() {
                for (d, v) in center.iter_mut().enumerate() {
                    *v = members.iter().map(|x| x[d]).sum::<f64>() / members.len() as f64;
                }
            }
        }
        if done {
            break;
        }
    }
    let side = assign[t];
    (0..m).filter(|&a| assign[a] == side).map(|a| comp[a]).collect()
}

/// Returns item indices (inventory positions) of the selected subset,
/// ordered by descending score.
pub fn spectral_select(g: &InteractionGraph, n_max: usize) -> Vec<usize> {
    let all: Vec<usize> = (0..g.nodes.len()).collect();
    if g.nodes.is_empty() || n_max == 0 {
        return Vec::new();
    }
    let to_items = |v: Vec<usize>| v.into_iter().map(|k| g.nodes[k].item).collect();
    if g.edges.is_empty() {
        return to_items(top_by_score(g, &all, n_max));
    }
    let top = top_by_score(g, &all, 1)[0];
    let comp = component_of(g, top);
    let cluster = if comp.len() <= n_max {
        comp
    } else {
        spectral_cluster(g, &comp, top)
    };
    let mut chosen = top_by_score(g, &cluster, n_max);
    if chosen.len() < 4 {
        let want = n_max.min(8);
        let rest: Vec<usize> = all.iter().copied().filter(|v| !chosen.contains(v)).collect();
        let extra = top_by_score(g, &rest, want.saturating_sub(chosen.len()));
        chosen.extend(extra);
        chosen = top_by_score(g, &chosen, want);
    }
    to_items(chosen)
}
