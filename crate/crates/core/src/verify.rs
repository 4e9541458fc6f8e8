//! Seeded oracle suites for the dual engine and the server projection.
//!
//! Each check compares a production routine against an independent
//! computation on random small instances and reports the worst discrepancy.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distribution::DiscreteDistribution;
use crate::dro::{
    dual_objective_h, grad_lambda_estimate, grad_theta_estimate, inner_maximize, lemma1_check,
    primal_sup_on_grid, robustness_certificate, HyperParams,
};
use crate::error::Result;
use crate::federation::{project_simplex, MixtureWeights};
use crate::model::{norm, Label, OutlierScore, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub cases: usize,
    /// Largest violation measure seen; the check passes when it is at most
    /// `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:e} (tolerance {:e}, {} cases)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance,
            self.cases
        )
    }
}

fn random_label(rng: &mut ChaCha8Rng) -> Label {
    if rng.random_bool(0.5) {
        Label::Positive
    } else {
        Label::Negative
    }
}

fn random_distribution(
    rng: &mut ChaCha8Rng,
    atoms: usize,
    dim: usize,
    label: Option<Label>,
) -> Result<DiscreteDistribution> {
    let samples = (0..atoms)
        .map(|_| {
            let x = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = label.unwrap_or_else(|| random_label(rng));
            Sample::new(x, y)
        })
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteDistribution::from_unnormalized(samples, weights)
}

fn random_theta(rng: &mut ChaCha8Rng, dim: usize, max_norm: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = norm(&v).max(1e-12);
    let r = rng.random_range(0.0..max_norm);
    v.iter().map(|x| x * r / n).collect()
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Result<MixtureWeights> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    MixtureWeights::new(w.iter().map(|x| x / s).collect())
}

/// `|E_{P*}[L] − (ρ r̂ + dual)| / max(1, |bound|)` over random instances.
pub fn certificate_exactness(seed: u64, cases: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let dim = rng.random_range(1..=5);
        let n_clients = rng.random_range(1..=3);
        let clients = (0..n_clients)
            .map(|_| {
                let atoms = rng.random_range(1..=10 / n_clients);
                random_distribution(&mut rng, atoms, dim, None)
            })
            .collect::<Result<Vec<_>>>()?;
        let rho = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let beta = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let hp = HyperParams {
            rho,
            beta,
            inner_tol: 1e-12,
            inner_max_iters: 100_000,
            ..HyperParams::default()
        };
        // ‖θ‖²/4 stays below the smallest ρ.
        let theta = random_theta(&mut rng, dim, 1.2);
        let score = match rng.random_range(0..3) {
            0 => OutlierScore::None,
            1 => OutlierScore::Quadratic {
                rho2: rng.random_range(0.0..0.5),
                prior_mean: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            },
            _ => OutlierScore::SigmoidThreshold {
                rho2: rng.random_range(0.0..0.2),
                threshold: rng.random_range(-1.0..1.0),
                softness: 1.0,
                feature_index: rng.random_range(0..dim),
            },
        };
        let lambda = random_weights(&mut rng, n_clients)?;
        let c = robustness_certificate(&theta, &lambda, &clients, &hp, &score)?;
        let resid = (c.robust_value - (rho * c.induced_radius + c.dual_value)).abs();
        worst = worst.max(resid / c.bound.abs().max(1.0));
    }
    Ok(CheckOutcome {
        name: "certificate exactness".into(),
        cases,
        worst,
        tolerance: 1e-9,
    })
}

fn grid_1d(n: usize, lo: f64, hi: f64, labels: &[Label]) -> Vec<Sample> {
    labels
        .iter()
        .flat_map(|&y| {
            (0..n).map(move |k| Sample {
                features: vec![lo + (hi - lo) * k as f64 / (n - 1) as f64],
                label: y,
            })
        })
        .collect()
}

fn dual_value(theta: &[f64], p: &DiscreteDistribution, hp: &HyperParams, score: &OutlierScore) -> Result<f64> {
    let t = hp.temperature();
    let m = p.expect(|z| Ok((inner_maximize(theta, z, hp, score)?.value / t).exp()))?;
    Ok(t * m.ln())
}

/// Grid primal against the closed-form dual on three one-dimensional toys.
/// Returns the dual-minus-primal gap and the primal excess over the dual.
pub fn strong_duality() -> Result<Vec<CheckOutcome>> {
    let s = |x: f64, y: Label| Sample::new(vec![x], y);
    let toys: Vec<(DiscreteDistribution, f64, f64, f64, OutlierScore)> = vec![
        (
            DiscreteDistribution::new(
                vec![s(-1.0, Label::Positive)?, s(0.5, Label::Positive)?, s(2.0, Label::Positive)?],
                vec![0.2, 0.5, 0.3],
            )?,
            0.7,
            1.0,
            1.0,
            OutlierScore::None,
        ),
        (
            DiscreteDistribution::new(
                vec![s(-0.5, Label::Positive)?, s(1.0, Label::Negative)?, s(1.5, Label::Negative)?],
                vec![0.4, 0.3, 0.3],
            )?,
            -1.2,
            2.0,
            0.5,
            OutlierScore::None,
        ),
        (
            DiscreteDistribution::new(
                vec![s(0.0, Label::Negative)?, s(3.0, Label::Negative)?, s(-1.0, Label::Positive)?, s(1.0, Label::Positive)?],
                vec![0.3, 0.1, 0.3, 0.3],
            )?,
            1.5,
            1.0,
            2.0,
            OutlierScore::Quadratic {
                rho2: 0.3,
                prior_mean: vec![0.0],
            },
        ),
    ];
    let mut gap: f64 = 0.0;
    let mut excess: f64 = 0.0;
    for (p, theta, rho, beta, score) in &toys {
        let hp = HyperParams {
            rho: *rho,
            beta: *beta,
            inner_tol: 1e-12,
            inner_max_iters: 100_000,
            ..HyperParams::default()
        };
        let grid = grid_1d(201, -5.0, 5.0, &[Label::Positive, Label::Negative]);
        let v = primal_sup_on_grid(&[*theta], p, &hp, score, &grid)?;
        let d = dual_value(&[*theta], p, &hp, score)?;
        gap = gap.max((d - v).abs());
        excess = excess.max(v - d);
    }
    Ok(vec![
        CheckOutcome {
            name: "strong duality |dual - primal|".into(),
            cases: toys.len(),
            worst: gap,
            tolerance: 1e-3,
        },
        CheckOutcome {
            name: "strong duality primal excess".into(),
            cases: toys.len(),
            worst: excess,
            tolerance: 1e-6,
        },
    ])
}

/// `UW(P*‖P̂) ≤ W(P*, P̄) + β KL(P̄‖P̂)` on random one-dimensional instances;
/// the reported violation is `lhs − rhs`.
pub fn lemma1_inequality(seed: u64, cases: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..cases {
        let n_hat = rng.random_range(1..=6);
        let p_hat = random_distribution(&mut rng, n_hat, 1, Some(Label::Positive))?;
        // P̄ reweights a nonempty subset of P̂'s atoms.
        let keep: Vec<bool> = (0..n_hat).map(|k| k == 0 || rng.random_bool(0.7)).collect();
        let atoms: Vec<Sample> = p_hat
            .atoms()
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(a, _)| a.clone())
            .collect();
        let w: Vec<f64> = atoms.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let p_bar = DiscreteDistribution::from_unnormalized(atoms, w)?;
        let n_star = rng.random_range(1..=6);
        let p_star = random_distribution(&mut rng, n_star, 1, Some(Label::Positive))?;
        let beta = rng.random_range(0.1..3.0);
        let (lhs, rhs) = lemma1_check(&p_star, &p_bar, &p_hat, beta)?;
        worst = worst.max(lhs - rhs);
    }
    Ok(CheckOutcome {
        name: "unbalanced transport bound".into(),
        cases,
        worst,
        tolerance: 1e-6,
    })
}

/// Full-batch estimator means against central differences of `H`.
pub fn gradient_fidelity(seed: u64, cases: usize) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_theta: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    for _ in 0..cases {
        let dim = rng.random_range(1..=4);
        let clients = (0..3)
            .map(|_| {
                let n = rng.random_range(2..=6);
                random_distribution(&mut rng, n, dim, None)
            })
            .collect::<Result<Vec<_>>>()?;
        let hp = HyperParams {
            rho: rng.random_range(1.0..2.0),
            beta: rng.random_range(0.5..2.0),
            inner_tol: 1e-10,
            inner_max_iters: 100_000,
            ..HyperParams::default()
        };
        let theta = random_theta(&mut rng, dim, 1.5);
        let score = match rng.random_range(0..3) {
            0 => OutlierScore::None,
            1 => OutlierScore::Quadratic {
                rho2: rng.random_range(0.0..0.5),
                prior_mean: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            },
            _ => OutlierScore::SigmoidThreshold {
                rho2: 0.2,
                threshold: 0.0,
                softness: 1.0,
                feature_index: 0,
            },
        };
        let lambda = random_weights(&mut rng, clients.len())?;
        let l = lambda.as_slice();

        // θ: Σ λ_i mean g^θ against central differences.
        let mut est = vec![0.0; dim];
        let mut g_lambda = Vec::with_capacity(clients.len());
        for (data, &li) in clients.iter().zip(l) {
            let mut gl = 0.0;
            for (z, w) in data.iter() {
                let g = grad_theta_estimate(&theta, z, &hp, &score)?;
                est.iter_mut().zip(&g).for_each(|(e, gk)| *e += li * w * gk);
                gl += w * grad_lambda_estimate(&theta, z, &hp, &score)?;
            }
            g_lambda.push(gl);
        }
        let h = 1e-5;
        let mut fd = vec![0.0; dim];
        for k in 0..dim {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[k] += h;
            down[k] -= h;
            fd[k] = (dual_objective_h(&up, &lambda, &clients, &hp, &score)?
                - dual_objective_h(&down, &lambda, &clients, &hp, &score)?)
                / (2.0 * h);
        }
        let diff: Vec<f64> = est.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst_theta = worst_theta.max(norm(&diff) / norm(&fd).max(1e-12));

        // λ: derivative along e_i − e_j from the interior point.
        let scale = g_lambda.iter().copied().fold(0.0, f64::max);
        let step = 1e-3 * l.iter().copied().fold(1.0, f64::min);
        for i in 0..clients.len() {
            for j in 0..clients.len() {
                if i == j {
                    continue;
                }
                let moved = |sign: f64| {
                    let mut v = l.to_vec();
                    v[i] += sign * step;
                    v[j] -= sign * step;
                    MixtureWeights::new(v)
                };
                let d = (dual_objective_h(&theta, &moved(1.0)?, &clients, &hp, &score)?
                    - dual_objective_h(&theta, &moved(-1.0)?, &clients, &hp, &score)?)
                    / (2.0 * step);
                let e = g_lambda[i] - g_lambda[j];
                worst_lambda = worst_lambda.max((e - d).abs() / scale);
            }
        }
    }
    Ok(vec![
        CheckOutcome {
            name: "theta gradient vs finite differences".into(),
            cases,
            worst: worst_theta,
            tolerance: 1e-4,
        },
        CheckOutcome {
            name: "lambda gradient vs finite differences".into(),
            cases,
            worst: worst_lambda,
            tolerance: 1e-6,
        },
    ])
}

/// Exact Euclidean projection onto the simplex by enumerating supports:
/// on support `S` the minimizer is `v_S − (Σ v_S − 1)/|S|`, and the best
/// nonnegative candidate is the projection.
pub fn simplex_projection_oracle(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    assert!((1..=16).contains(&n), "enumeration oracle supports 1..=16 entries");
    let mut best = (f64::INFINITY, vec![0.0; n]);
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
        let shift = (members.iter().map(|&k| v[k]).sum::<f64>() - 1.0) / members.len() as f64;
        let mut x = vec![0.0; n];
        let mut feasible = true;
        for &k in &members {
            x[k] = v[k] - shift;
            if x[k] < 0.0 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        let d: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best.0 {
            best = (d, x);
        }
    }
    best.1
}

pub fn simplex_projection(seed: u64, cases: usize) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.random_range(1..=8);
        let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let p = project_simplex(&v)?;
        let o = simplex_projection_oracle(&v);
        for (a, b) in p.as_slice().iter().zip(&o) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckOutcome {
        name: "simplex projection vs support enumeration".into(),
        cases,
        worst,
        tolerance: 1e-6,
    })
}

/// Every suite with its acceptance-sized case count.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![certificate_exactness(seed, 50)?];
    out.extend(strong_duality()?);
    out.push(lemma1_inequality(seed, 100)?);
    out.extend(gradient_fidelity(seed, 20)?);
    out.push(simplex_projection(seed, 1000)?);
    Ok(out)
}
