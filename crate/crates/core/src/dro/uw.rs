//! Discrete unbalanced Wasserstein distance
//!
//! `UW(P‖Q) = min_{γ ≥ 0, γ1 = p} ⟨C, γ⟩ + β KL(γᵀ1 ‖ q)`
//!
//! solved by projected gradient descent over the product of scaled simplices
//! (one per row of the coupling) with backtracking. Convergence is certified
//! by the concave dual
//!
//! `Φ(a) = Σ_i p_i min_j (C_ij + a_j) − β Σ_j q_j (exp(a_j/β) − 1)`
//!
//! evaluated at the prices `a_j = β log(b_j/q_j)` implied by the current
//! column sums `b`; `F(γ) − Φ(a)` bounds the suboptimality.

use crate::distribution::{kl_divergence, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::federation::project_scaled_simplex;
use crate::model::{transport_cost, Sample};

/// Absolute duality-gap target, relative to `max(1, value)`.
pub const UW_TOL: f64 = 1e-12;
pub const UW_MAX_ITERS: usize = 10_000;

/// Floor for column masses inside the KL gradient.
const MASS_FLOOR: f64 = 1e-300;

/// Nonnegative matrix, rows indexed by the transported distribution's atoms
/// and columns by the reference distribution's atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CouplingMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (bj, g) in b.iter_mut().zip(self.row(i)) {
                *bj += g;
            }
        }
        b
    }
}

#[derive(Debug, Clone)]
pub struct UwSolution {
    pub value: f64,
    pub coupling: CouplingMatrix,
    /// Column sums of the coupling, the reweighted reference `P̄`.
    pub pbar: DiscreteDistribution,
    /// Certified bound on `value − UW`.
    pub gap: f64,
    pub iterations: usize,
}

struct Problem<'a> {
    rows: usize,
    cols: usize,
    /// `None` marks label-mismatched pairs, which carry no mass.
    cost: Vec<Option<f64>>,
    p: &'a [f64],
    q: &'a [f64],
    beta: f64,
}

impl Problem<'_> {
    fn col_sums(&self, gamma: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                b[j] += gamma[i * self.cols + j];
            }
        }
        b
    }

    fn objective(&self, gamma: &[f64]) -> f64 {
        let transport: f64 = gamma
            .iter()
            .zip(&self.cost)
            .filter_map(|(g, c)| c.map(|c| g * c))
            .sum();
        transport + self.beta * kl_divergence(&self.col_sums(gamma), self.q)
    }

    fn gradient(&self, gamma: &[f64]) -> Vec<f64> {
        let b = self.col_sums(gamma);
        let kl_grad: Vec<f64> = b
            .iter()
            .zip(self.q)
            .map(|(&bj, &qj)| self.beta * ((bj.max(MASS_FLOOR) / qj).ln() + 1.0))
            .collect();
        let mut g = vec![0.0; gamma.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let k = i * self.cols + j;
                if let Some(c) = self.cost[k] {
                    g[k] = c + kl_grad[j];
                }
            }
        }
        g
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for i in 0..self.rows {
            let idx: Vec<usize> = (0..self.cols)
                .map(|j| i * self.cols + j)
                .filter(|&k| self.cost[k].is_some())
                .collect();
            let row: Vec<f64> = idx.iter().map(|&k| v[k]).collect();
            let proj = project_scaled_simplex(&row, self.p[i]);
            for (&k, x) in idx.iter().zip(proj) {
                out[k] = x;
            }
        }
        out
    }

    /// Lower bound `Φ(a)` at prices implied by the column sums of `gamma`.
    fn dual_bound(&self, gamma: &[f64]) -> f64 {
        let b = self.col_sums(gamma);
        let mut a: Vec<f64> = b
            .iter()
            .zip(self.q)
            .map(|(&bj, &qj)| {
                if bj > 0.0 {
                    self.beta * (bj / qj).ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let row_min = |a: &[f64], i: usize| -> f64 {
            (0..self.cols)
                .filter_map(|j| self.cost[i * self.cols + j].map(|c| c + a[j]))
                .fold(f64::INFINITY, f64::min)
        };
        // Columns without mass get the smallest price that leaves every row
        // minimum unchanged.
        let active_min: Vec<f64> = (0..self.rows).map(|i| row_min(&a, i)).collect();
        for j in 0..self.cols {
            if b[j] > 0.0 {
                continue;
            }
            a[j] = (0..self.rows)
                .filter(|&i| self.p[i] > 0.0)
                .filter_map(|i| self.cost[i * self.cols + j].map(|c| active_min[i] - c))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let assign: f64 = (0..self.rows)
            .filter(|&i| self.p[i] > 0.0)
            .map(|i| self.p[i] * row_min(&a, i))
            .sum();
        let penalty: f64 = a
            .iter()
            .zip(self.q)
            .map(|(&aj, &qj)| qj * ((aj / self.beta).exp() - 1.0))
            .sum();
        assign - self.beta * penalty
    }
}

/// `UW(p ‖ q)` with cost `½‖x − x'‖²` between same-label atoms.
///
/// `q` is the reference whose marginal may be reweighted at KL price `β`;
/// its weights must be strictly positive.
pub fn uw_distance_discrete(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    beta: f64,
) -> Result<UwSolution> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    if q.weights().iter().any(|&w| w <= 0.0) {
        return Err(Error::invalid(
            "reference distribution has a zero weight; KL is undefined there",
        ));
    }
    let (rows, cols) = (p.len(), q.len());
    let mut cost = Vec::with_capacity(rows * cols);
    for a in p.atoms() {
        for b in q.atoms() {
            let c = transport_cost(a, b)?;
            cost.push(c.is_finite().then_some(c));
        }
    }
    let prob = Problem {
        rows,
        cols,
        cost,
        p: p.weights(),
        q: q.weights(),
        beta,
    };

    // Start from the product coupling restricted to feasible pairs.
    let mut gamma = vec![0.0; rows * cols];
    for i in 0..rows {
        let reach: f64 = (0..cols)
            .filter(|&j| prob.cost[i * cols + j].is_some())
            .map(|j| prob.q[j])
            .sum();
        if reach == 0.0 {
            if prob.p[i] > 0.0 {
                return Err(Error::invalid(format!(
                    "atom {i} has no same-label atom in the reference distribution"
                )));
            }
            continue;
        }
        for j in 0..cols {
            if prob.cost[i * cols + j].is_some() {
                gamma[i * cols + j] = prob.p[i] * prob.q[j] / reach;
            }
        }
    }

    let mut value = prob.objective(&gamma);
    let mut gap = value - prob.dual_bound(&gamma);
    let mut step = 1.0 / beta;
    let mut iterations = 0;
    while gap > UW_TOL * value.abs().max(1.0) && iterations < UW_MAX_ITERS {
        let grad = prob.gradient(&gamma);
        loop {
            let trial: Vec<f64> = gamma.iter().zip(&grad).map(|(g, d)| g - step * d).collect();
            let cand = prob.project(&trial);
            let diff: Vec<f64> = cand.iter().zip(&gamma).map(|(a, b)| a - b).collect();
            let lin: f64 = diff.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            let cand_value = prob.objective(&cand);
            if cand_value <= value + lin + quad || quad == 0.0 {
                gamma = cand;
                value = cand_value;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                break;
            }
        }
        step *= 2.0;
        iterations += 1;
        gap = value - prob.dual_bound(&gamma);
    }

    let coupling = CouplingMatrix {
        rows,
        cols,
        entries: gamma,
    };
    let pbar = DiscreteDistribution::from_unnormalized(q.atoms().to_vec(), coupling.col_sums())?;
    Ok(UwSolution {
        value,
        coupling,
        pbar,
        gap: gap.max(0.0),
        iterations,
    })
}

/// Exact `W(p, q)` with cost `½|x − x'|²` for one-dimensional, same-label
/// distributions, via the monotone coupling.
pub fn wasserstein_1d_exact(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.dim() != 1 || q.dim() != 1 {
        return Err(Error::invalid("wasserstein_1d_exact needs one-dimensional atoms"));
    }
    let label = p.atoms()[0].label;
    if p.atoms().iter().chain(q.atoms()).any(|s| s.label != label) {
        return Err(Error::invalid("wasserstein_1d_exact needs a single label"));
    }
    let sorted = |d: &DiscreteDistribution| {
        let mut v: Vec<(f64, f64)> = d
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(s, w)| (s.features[0], w))
            .collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (xs, ys) = (sorted(p), sorted(q));
    let (mut i, mut j) = (0, 0);
    let (mut wi, mut wj) = (xs[0].1, ys[0].1);
    let mut total = 0.0;
    loop {
        let m = wi.min(wj);
        let d = xs[i].0 - ys[j].0;
        total += m * 0.5 * d * d;
        wi -= m;
        wj -= m;
        // Whichever side is exhausted advances; the final atoms absorb
        // rounding residue.
        if wi <= wj {
            if i + 1 == xs.len() {
                break;
            }
            i += 1;
            wi = xs[i].1;
        } else {
            if j + 1 == ys.len() {
                break;
            }
            j += 1;
            wj = ys[j].1;
        }
    }
    Ok(total)
}

/// Both sides of `UW(P*‖P̂) ≤ W(P*, P̄) + β KL(P̄‖P̂)`.
///
/// `p_bar` must be absolutely continuous with respect to `p_hat`: every atom
/// it weights must appear in `p_hat` with positive weight.
pub fn lemma1_check(
    p_star: &DiscreteDistribution,
    p_bar: &DiscreteDistribution,
    p_hat: &DiscreteDistribution,
    beta: f64,
) -> Result<(f64, f64)> {
    let mut matched = vec![0.0; p_hat.len()];
    for (s, w) in p_bar.iter().filter(|(_, w)| *w > 0.0) {
        let idx = position(p_hat.atoms(), s)
            .filter(|&k| p_hat.weights()[k] > 0.0)
            .ok_or_else(|| {
                Error::invalid("p_bar is not absolutely continuous with respect to p_hat")
            })?;
        matched[idx] += w;
    }
    let lhs = uw_distance_discrete(p_star, p_hat, beta)?.value;
    let rhs = wasserstein_1d_exact(p_star, p_bar)? + beta * kl_divergence(&matched, p_hat.weights());
    Ok((lhs, rhs))
}

fn position(atoms: &[Sample], s: &Sample) -> Option<usize> {
    atoms.iter().position(|a| a == s)
}
