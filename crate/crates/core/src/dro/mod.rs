//! The unbalanced-Wasserstein DRO machinery: per-sample inner maximization,
//! the exponentially tilted dual objective and its gradient estimators, the
//! discrete UW solver, the grid primal oracle and the robustness certificate.

mod certificate;
mod dual;
mod grid;
mod inner;
mod uw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use certificate::{robustness_certificate, CertificateReport};
pub use dual::{
    client_tilt_mean, dual_objective_h, grad_lambda_estimate, grad_theta_estimate,
    mixture_distribution, tilt,
};
pub use grid::{primal_sup_on_grid, GRID_ASCENT_ITERS};
pub use inner::{
    inner_maximize, inner_maximize_objective, AdjustedLossObjective, InnerMaxResult,
    PerturbationObjective,
};
pub use uw::{
    lemma1_check, uw_distance_discrete, wasserstein_1d_exact, CouplingMatrix, UwSolution,
    UW_MAX_ITERS, UW_TOL,
};

/// Penalty, KL weight, step sizes and inner-solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Lagrangian penalty coefficient `ρ`.
    pub rho: f64,
    /// KL weight `β` of the unbalanced distance.
    pub beta: f64,
    pub eta_theta: f64,
    pub eta_lambda: f64,
    /// Distance-to-maximizer tolerance `ε` of the inner maximization.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Number of communication rounds `T`.
    pub rounds: usize,
    /// Samples drawn per client per round.
    pub batch_size: usize,
    /// Radius of the parameter ball `Θ`.
    pub radius: f64,
    /// Record the gap surrogate every this many rounds (0 disables it).
    pub monitor_every: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self::with_rounds(1000)
    }
}

impl HyperParams {
    /// Defaults with `η_θ = η_λ = 1/√T`.
    pub fn with_rounds(rounds: usize) -> Self {
        let eta = 1.0 / (rounds.max(1) as f64).sqrt();
        Self {
            rho: 1.0,
            beta: 1.0,
            eta_theta: eta,
            eta_lambda: eta,
            inner_tol: 1e-6,
            inner_max_iters: 10_000,
            rounds,
            batch_size: 1,
            radius: 10.0,
            monitor_every: 0,
        }
    }

    /// `ρβ`, the temperature of the exponential tilt.
    pub fn temperature(&self) -> f64 {
        self.rho * self.beta
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("beta", self.beta),
            ("eta_theta", self.eta_theta),
            ("eta_lambda", self.eta_lambda),
            ("inner_tol", self.inner_tol),
            ("radius", self.radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.inner_tol > 1.0 {
            return Err(Error::config(format!(
                "inner_tol must not exceed 1, got {}",
                self.inner_tol
            )));
        }
        if self.inner_max_iters == 0 || self.rounds == 0 || self.batch_size == 0 {
            return Err(Error::config(
                "inner_max_iters, rounds and batch_size must be positive",
            ));
        }
        Ok(())
    }
}
