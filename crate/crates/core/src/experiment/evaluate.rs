use crate::datasets::FederatedDataset;
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::{dot, logistic_loss, logistic_loss_grad_theta, Label};

pub const ORACLE_ITERS: usize = 2_000;
pub const ORACLE_STEP: f64 = 0.1;

/// Clean-data metrics of one trained parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub overall_accuracy: f64,
    pub group_accuracy: Vec<f64>,
    pub worst_group_accuracy: f64,
    pub excess_risk: f64,
    pub test_loss: f64,
}

/// `sign(θᵀx)` with ties at zero predicted positive.
pub fn predict(theta: &[f64], x: &[f64]) -> Label {
    if dot(theta, x) >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    }
}

pub fn accuracy(theta: &[f64], data: &DiscreteDistribution) -> Result<f64> {
    if theta.len() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            found: theta.len(),
        });
    }
    data.expect(|s| Ok(if predict(theta, &s.features) == s.label { 1.0 } else { 0.0 }))
}

pub fn mean_loss(theta: &[f64], data: &DiscreteDistribution) -> Result<f64> {
    data.expect(|s| logistic_loss(theta, s))
}

/// Full-batch gradient descent on the mean logistic loss from zero.
pub fn fit_oracle(data: &DiscreteDistribution, iters: usize, step: f64) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; data.dim()];
    for _ in 0..iters {
        let mut grad = vec![0.0; theta.len()];
        for (s, w) in data.iter() {
            let g = logistic_loss_grad_theta(&theta, s)?;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += w * b);
        }
        theta.iter_mut().zip(&grad).for_each(|(t, g)| *t -= step * g);
    }
    Ok(theta)
}

/// Evaluates `theta` on the clean test set. `oracle_loss` is the clean-test
/// loss of the reference parameter from [`fit_oracle`].
pub fn evaluate_with_oracle(
    theta: &[f64],
    dataset: &FederatedDataset,
    oracle_loss: f64,
) -> Result<Evaluation> {
    let overall_accuracy = accuracy(theta, &dataset.clean_test)?;
    let group_accuracy = (0..dataset.group_names.len())
        .map(|g| accuracy(theta, &dataset.test_slice(g)?))
        .collect::<Result<Vec<f64>>>()?;
    let worst_group_accuracy = group_accuracy.iter().copied().fold(f64::INFINITY, f64::min);
    let test_loss = mean_loss(theta, &dataset.clean_test)?;
    Ok(Evaluation {
        overall_accuracy,
        group_accuracy,
        worst_group_accuracy,
        excess_risk: test_loss - oracle_loss,
        test_loss,
    })
}

/// Clean-test loss of the full-batch oracle.
pub fn oracle_loss(dataset: &FederatedDataset) -> Result<f64> {
    let theta = fit_oracle(&dataset.clean_test, ORACLE_ITERS, ORACLE_STEP)?;
    mean_loss(&theta, &dataset.clean_test)
}

pub fn evaluate(theta: &[f64], dataset: &FederatedDataset) -> Result<Evaluation> {
    evaluate_with_oracle(theta, dataset, oracle_loss(dataset)?)
}
