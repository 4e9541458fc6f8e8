use crate::error::{check_dim, Error, Result};
use crate::model::{self, norm, norm_sq, sq_dist, Label, OutlierScore, Sample};

use super::HyperParams;

/// A smooth function of the features that the adversary maximizes, minus
/// the transport penalty `ρ/2 ‖x − x_ζ‖²` added by the solver.
pub trait PerturbationObjective {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn grad(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Upper bound on the largest Hessian eigenvalue.
    fn curvature_upper(&self) -> f64;
    /// Upper bound on the Hessian spectral norm.
    fn curvature_abs(&self) -> f64;
}

/// `x ↦ L(θ, (x, y))` at fixed `θ` and label.
pub struct AdjustedLossObjective<'a> {
    pub theta: &'a [f64],
    pub label: Label,
    pub score: &'a OutlierScore,
}

impl AdjustedLossObjective<'_> {
    fn at(&self, x: &[f64]) -> Sample {
        Sample {
            features: x.to_vec(),
            label: self.label,
        }
    }

    fn loss_curvature(&self) -> f64 {
        0.25 * norm_sq(self.theta)
    }
}

impl PerturbationObjective for AdjustedLossObjective<'_> {
    fn value(&self, x: &[f64]) -> Result<f64> {
        model::adjusted_loss(self.theta, &self.at(x), self.score)
    }

    fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        model::adjusted_loss_grad_xi(self.theta, &self.at(x), self.score)
    }

    fn curvature_upper(&self) -> f64 {
        self.loss_curvature() - self.score.concavity_credit()
    }

    fn curvature_abs(&self) -> f64 {
        self.loss_curvature() + self.score.curvature_magnitude(self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerMaxResult {
    /// Perturbed features with the original label.
    pub maximizer: Sample,
    /// `f(θ, ζ) = L(θ, z) − ρ c(z, ζ)` at the returned point.
    pub value: f64,
    pub iterations: usize,
    pub grad_norm_at_exit: f64,
}

/// Gradient ascent on `x ↦ obj(x) − ρ/2 ‖x − x_ζ‖²` started at `x_ζ`.
///
/// The step is `1/(ρ + curvature_abs)`. Iteration stops once the ascent
/// gradient norm falls below `tol · (ρ − curvature_upper)`, which bounds the
/// distance to the maximizer by `tol`, or after `max_iters` steps.
pub fn inner_maximize_objective<O: PerturbationObjective + ?Sized>(
    obj: &O,
    zeta: &[f64],
    rho: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, f64, usize, f64)> {
    let modulus = rho - obj.curvature_upper();
    if !(modulus > 0.0) {
        return Err(Error::config(format!(
            "rho = {rho} does not make the inner problem strongly concave \
             (needs rho > {})",
            obj.curvature_upper()
        )));
    }
    let step = 1.0 / (rho + obj.curvature_abs());
    let stop = tol * modulus;

    let mut x = zeta.to_vec();
    let mut iterations = 0;
    let mut grad_norm;
    loop {
        let mut g = obj.grad(&x)?;
        check_dim(x.len(), g.len())?;
        for ((gk, xk), zk) in g.iter_mut().zip(&x).zip(zeta) {
            *gk -= rho * (xk - zk);
        }
        grad_norm = norm(&g);
        if !grad_norm.is_finite() {
            return Err(Error::invalid("non-finite gradient in inner maximization"));
        }
        if grad_norm <= stop || iterations >= max_iters {
            break;
        }
        for (xk, gk) in x.iter_mut().zip(&g) {
            *xk += step * gk;
        }
        iterations += 1;
    }
    let value = obj.value(&x)? - 0.5 * rho * sq_dist(&x, zeta);
    Ok((x, value, iterations, grad_norm))
}

/// Approximate maximizer of `L(θ, ξ) − ρ c(ξ, ζ)` over features at `ζ`'s label.
pub fn inner_maximize(
    theta: &[f64],
    zeta: &Sample,
    hp: &HyperParams,
    score: &OutlierScore,
) -> Result<InnerMaxResult> {
    check_dim(theta.len(), zeta.dim())?;
    let obj = AdjustedLossObjective {
        theta,
        label: zeta.label,
        score,
    };
    let (x, value, iterations, grad_norm_at_exit) =
        inner_maximize_objective(&obj, &zeta.features, hp.rho, hp.inner_tol, hp.inner_max_iters)?;
    Ok(InnerMaxResult {
        maximizer: zeta.with_features(x),
        value,
        iterations,
        grad_norm_at_exit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{adjusted_loss, dot, transport_cost};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::cell::RefCell;

    struct Linear(Vec<f64>);

    impl PerturbationObjective for Linear {
        fn value(&self, x: &[f64]) -> Result<f64> {
            Ok(dot(&self.0, x))
        }
        fn grad(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.clone())
        }
        fn curvature_upper(&self) -> f64 {
            0.0
        }
        fn curvature_abs(&self) -> f64 {
            0.0
        }
    }

    /// Wraps an objective and records every value the solver visits.
    struct Recording<'a> {
        inner: AdjustedLossObjective<'a>,
        rho: f64,
        zeta: Vec<f64>,
        trace: RefCell<Vec<f64>>,
    }

    impl PerturbationObjective for Recording<'_> {
        fn value(&self, x: &[f64]) -> Result<f64> {
            self.inner.value(x)
        }
        fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
            let v = self.inner.value(x)? - 0.5 * self.rho * sq_dist(x, &self.zeta);
            self.trace.borrow_mut().push(v);
            self.inner.grad(x)
        }
        fn curvature_upper(&self) -> f64 {
            self.inner.curvature_upper()
        }
        fn curvature_abs(&self) -> f64 {
            self.inner.curvature_abs()
        }
    }

    fn hp(rho: f64, tol: f64) -> HyperParams {
        HyperParams {
            rho,
            inner_tol: tol,
            ..HyperParams::default()
        }
    }

    #[test]
    fn linear_objective_closed_form() {
        let theta = vec![0.3, -1.2, 0.5];
        let zeta = vec![1.0, 2.0, -1.0];
        let rho = 2.5;
        let (x, value, _, _) =
            inner_maximize_objective(&Linear(theta.clone()), &zeta, rho, 1e-12, 1000).unwrap();
        for k in 0..3 {
            assert!((x[k] - (zeta[k] + theta[k] / rho)).abs() < 1e-12);
        }
        let expected = dot(&theta, &zeta) + norm_sq(&theta) / (2.0 * rho);
        assert!((value - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_theta_keeps_sample() {
        let zeta = Sample::new(vec![1.5, -0.5], Label::Negative).unwrap();
        let r = inner_maximize(&[0.0, 0.0], &zeta, &hp(1.0, 1e-10), &OutlierScore::None).unwrap();
        assert_eq!(r.maximizer, zeta);
        assert!((r.value - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn precondition_names_rho() {
        let zeta = Sample::new(vec![1.0, 1.0], Label::Positive).unwrap();
        let err = inner_maximize(&[3.0, 0.0], &zeta, &hp(2.0, 1e-6), &OutlierScore::None)
            .unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("rho = 2"), "{msg}");

        // Quadratic scores add concavity and relax the requirement.
        let quad = OutlierScore::Quadratic {
            rho2: 0.5,
            prior_mean: vec![0.0, 0.0],
        };
        assert!(inner_maximize(&[3.0, 0.0], &zeta, &hp(2.0, 1e-6), &quad).is_ok());
    }

    #[test]
    fn value_dominates_unperturbed_loss_and_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores = [
            OutlierScore::None,
            OutlierScore::Quadratic {
                rho2: 0.4,
                prior_mean: vec![0.5, -0.5, 0.0],
            },
            OutlierScore::SigmoidThreshold {
                rho2: 1.0,
                threshold: 0.2,
                softness: 0.3,
                feature_index: 0,
            },
        ];
        for i in 0..60 {
            let theta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
            let zeta = Sample::new(x, label).unwrap();
            let score = &scores[i % 3];
            let h = hp(1.0, 1e-9);
            let r = inner_maximize(&theta, &zeta, &h, score).unwrap();
            let base = adjusted_loss(&theta, &zeta, score).unwrap();
            assert!(r.value >= base - 1e-15);
            assert!(r.iterations < h.inner_max_iters);
            let modulus = h.rho - 0.25 * norm_sq(&theta) + score.concavity_credit();
            assert!(r.grad_norm_at_exit <= h.inner_tol * modulus);
            let recomputed = adjusted_loss(&theta, &r.maximizer, score).unwrap()
                - h.rho * transport_cost(&r.maximizer, &zeta).unwrap();
            assert!((recomputed - r.value).abs() < 1e-14);
        }
    }

    #[test]
    fn iterates_increase_objective_monotonically() {
        let theta = vec![1.2, -0.8];
        let score = OutlierScore::Quadratic {
            rho2: 0.5,
            prior_mean: vec![0.0, 0.0],
        };
        let zeta = vec![4.0, 3.0];
        let rec = Recording {
            inner: AdjustedLossObjective {
                theta: &theta,
                label: Label::Negative,
                score: &score,
            },
            rho: 1.0,
            zeta: zeta.clone(),
            trace: RefCell::new(Vec::new()),
        };
        let (_, _, iters, _) = inner_maximize_objective(&rec, &zeta, 1.0, 1e-12, 10_000).unwrap();
        let trace = rec.trace.into_inner();
        assert!(iters > 5);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn stops_at_iteration_cap() {
        let zeta = Sample::new(vec![2.0, -2.0], Label::Positive).unwrap();
        let mut h = hp(1.0, 1e-14);
        h.inner_max_iters = 3;
        let r = inner_maximize(&[1.0, 1.0], &zeta, &h, &OutlierScore::None).unwrap();
        assert_eq!(r.iterations, 3);
    }
}
