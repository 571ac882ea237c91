//! Gradient descent and SAM steppers, and the closed-form stability edges.
//!
//! The SAM update is
//! `w' = w − η ∇ℓ(w + ρ ∇ℓ(w)/‖∇ℓ(w)‖)`; with `ρ = 0` it is plain gradient
//! descent. On a quadratic with gradient `g` aligned to the top eigenvector,
//! one step decreases the loss iff `‖H‖ < 2/η` for GD, and iff
//! `‖H‖ < (‖g‖/2ρ)(√(1 + 8ρ/(η‖g‖)) − 1)` for SAM.

use crate::error::{Error, Result};
use crate::objectives::{GradientInfo, Objective};
use crate::params::Params;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig<T> {
    /// Step size η.
    pub eta: T,
    /// SAM radius ρ; zero means gradient descent.
    pub rho: T,
    pub max_steps: usize,
    /// Loss cap; `None` defers to the harness default (a multiple of the
    /// initial loss).
    pub divergence_threshold: Option<T>,
}

impl<T: Scalar> OptimConfig<T> {
    pub fn new(eta: T, rho: T, max_steps: usize) -> Result<Self> {
        let cfg = OptimConfig {
            eta,
            rho,
            max_steps,
            divergence_threshold: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.rho >= T::zero()) || !self.rho.is_finite() {
            return Err(Error::invalid("rho", format!("must be >= 0, got {}", self.rho)));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be positive"));
        }
        if let Some(t) = self.divergence_threshold {
            if !(t > T::zero()) {
                return Err(Error::invalid("divergence_threshold", "must be > 0"));
            }
        }
        Ok(())
    }

    pub fn is_gd(&self) -> bool {
        self.rho == T::zero()
    }
}

/// Everything one SAM step computes, so callers can log it without
/// re-evaluating gradients.
#[derive(Clone, Debug)]
pub struct SamStep<T> {
    pub next: Params<T>,
    /// Gradient at the iterate.
    pub grad: GradientInfo<T>,
    /// Gradient at the uphill point `w + ρ g/‖g‖` (equal to `grad` for ρ = 0).
    pub uphill_grad: GradientInfo<T>,
}

fn descend<T: Scalar>(w: &Params<T>, eta: T, direction: &Params<T>) -> Result<Params<T>> {
    let next = w.add_scaled(-eta, direction);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Diverged)
    }
}

/// `w − η ∇ℓ(w)`; `config.rho` is ignored.
pub fn gd_step<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    config: &OptimConfig<T>,
) -> Result<Params<T>> {
    let g = objective.gradient(w)?;
    descend(w, config.eta, &g.grad)
}

/// The point `w + ρ g/‖g‖` at which SAM evaluates its gradient.
pub fn uphill_point<T: Scalar>(w: &Params<T>, grad: &GradientInfo<T>, rho: T) -> Result<Params<T>> {
    if grad.norm == T::zero() {
        return Err(Error::ZeroGradient);
    }
    Ok(w.add_scaled(rho / grad.norm, &grad.grad))
}

pub fn sam_step<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    config: &OptimConfig<T>,
) -> Result<Params<T>> {
    sam_step_detailed(objective, w, config).map(|s| s.next)
}

pub fn sam_step_detailed<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    w: &Params<T>,
    config: &OptimConfig<T>,
) -> Result<SamStep<T>> {
    let grad = objective.gradient(w)?;
    if config.rho == T::zero() {
        let next = descend(w, config.eta, &grad.grad)?;
        return Ok(SamStep {
            next,
            uphill_grad: grad.clone(),
            grad,
        });
    }
    let up = uphill_point(w, &grad, config.rho)?;
    let uphill_grad = objective.gradient(&up)?;
    let next = descend(w, config.eta, &uphill_grad.grad)?;
    Ok(SamStep {
        next,
        grad,
        uphill_grad,
    })
}

/// `2/η`.
pub fn gd_edge<T: Scalar>(eta: T) -> Result<T> {
    if !(eta > T::zero()) {
        return Err(Error::invalid("eta", "must be > 0"));
    }
    Ok(T::of(2.0) / eta)
}

/// SAM-edge `(‖g‖/2ρ)(√(1 + 8ρ/(η‖g‖)) − 1)`.
///
/// Evaluated in the rationalized form `4 / (η (1 + √(1 + 8ρ/(η‖g‖))))`, which
/// is algebraically identical and has no cancellation. For `ρ = 0` this
/// returns `2/η`, the continuous limit.
pub fn sam_edge<T: Scalar>(eta: T, rho: T, grad_norm: T) -> Result<T> {
    let gd = gd_edge(eta)?;
    if !(rho >= T::zero()) {
        return Err(Error::invalid("rho", "must be >= 0"));
    }
    if rho == T::zero() {
        return Ok(gd);
    }
    if !(grad_norm > T::zero()) {
        return Err(Error::invalid("grad_norm", "must be > 0 when rho > 0"));
    }
    let root = radicand_root(eta, rho, grad_norm);
    Ok(T::of(4.0) / (eta * (T::one() + root)))
}

/// `√(1 + 8ρ/(η‖g‖))`.
pub(crate) fn radicand_root<T: Scalar>(eta: T, rho: T, grad_norm: T) -> T {
    (T::one() + T::of(8.0) * rho / (eta * grad_norm)).sqrt()
}

/// Ratio of the SAM-edge to `2/η` as a function of `α = η‖g‖/(2ρ)`:
/// `(α/2)(√(1 + 4/α) − 1)`, evaluated as `2 / (1 + √(1 + 4/α))`.
/// Tends to 1 as `α → ∞` and behaves like `√α` as `α → 0`.
pub fn edge_ratio<T: Scalar>(alpha: T) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::invalid("alpha", "must be > 0"));
    }
    let root = (T::one() + T::of(4.0) / alpha).sqrt();
    Ok(T::of(2.0) / (T::one() + root))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeReport<T> {
    pub gd_edge: T,
    pub sam_edge: T,
    /// `η‖g‖/(2ρ)`; infinite for ρ = 0.
    pub alpha: T,
    pub ratio: T,
}

impl<T: Scalar> EdgeReport<T> {
    pub fn new(eta: T, rho: T, grad_norm: T) -> Result<Self> {
        let gd = gd_edge(eta)?;
        let sam = sam_edge(eta, rho, grad_norm)?;
        let alpha = if rho == T::zero() {
            T::infinity()
        } else {
            eta * grad_norm / (T::of(2.0) * rho)
        };
        Ok(EdgeReport {
            gd_edge: gd,
            sam_edge: sam,
            alpha,
            ratio: sam / gd,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::Quadratic;

    fn one_d(lambda: f64) -> Quadratic<f64> {
        Quadratic::diagonal(&[lambda]).unwrap()
    }

    fn w1(x: f64) -> Params<f64> {
        Params::new(vec![x]).unwrap()
    }

    fn cfg(eta: f64, rho: f64) -> OptimConfig<f64> {
        OptimConfig {
            eta,
            rho,
            max_steps: 1,
            divergence_threshold: None,
        }
    }

    #[test]
    fn gd_step_one_dimensional() {
        let next = gd_step(&one_d(1.0), &w1(1.0), &cfg(0.1, 0.0)).unwrap();
        assert!((next[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_step_size_keeps_iterate() {
        let w = Params::new(vec![0.3, -2.0]).unwrap();
        let q = Quadratic::diagonal(&[2.0, 5.0]).unwrap();
        assert_eq!(gd_step(&q, &w, &cfg(0.0, 0.0)).unwrap(), w);
    }

    #[test]
    fn gd_beyond_edge_increases_loss() {
        let q = one_d(30.0);
        let w = w1(1.0);
        let next = gd_step(&q, &w, &cfg(0.1, 0.0)).unwrap();
        assert!(q.loss(&next).unwrap() > q.loss(&w).unwrap());
    }

    #[test]
    fn sam_hand_arithmetic() {
        let next = sam_step(&one_d(1.0), &w1(1.0), &cfg(0.1, 0.1)).unwrap();
        assert!((next[0] - 0.89).abs() < 1e-15);
    }

    #[test]
    fn sam_with_zero_radius_is_gd_bitwise() {
        let q = Quadratic::from_dense(2, &[3.0, 0.0, 0.7, 1.5], vec![0.2, -0.1], 0.0).unwrap();
        let w = Params::new(vec![0.31, -1.7]).unwrap();
        let c = cfg(0.13, 0.0);
        assert_eq!(sam_step(&q, &w, &c).unwrap(), gd_step(&q, &w, &c).unwrap());
    }

    #[test]
    fn sam_at_stationary_point_errors() {
        let q = one_d(2.0);
        assert!(matches!(
            sam_step(&q, &w1(0.0), &cfg(0.1, 0.1)),
            Err(Error::ZeroGradient)
        ));
    }

    #[test]
    fn gd_edge_values() {
        assert!((gd_edge::<f64>(0.1).unwrap() - 20.0).abs() < 1e-12);
        assert!((gd_edge::<f64>(0.03).unwrap() - 66.666_666_666_666_67).abs() < 1e-10);
        assert_eq!(gd_edge::<f64>(2.0).unwrap(), 1.0);
        assert!(gd_edge::<f64>(0.0).is_err());
        assert!(gd_edge::<f64>(-1.0).is_err());
    }

    #[test]
    fn sam_edge_values() {
        assert!((sam_edge::<f64>(0.1, 0.1, 1.0).unwrap() - 10.0).abs() < 1e-12);
        let tiny = sam_edge::<f64>(0.1, 1e-9, 1.0).unwrap();
        assert!((tiny - 20.0).abs() / 20.0 < 1e-7);
        assert_eq!(sam_edge::<f64>(0.1, 0.0, 1.0).unwrap(), 20.0);
        assert_eq!(sam_edge::<f64>(0.1, 0.0, 0.0).unwrap(), 20.0);
        assert!(sam_edge::<f64>(0.1, 0.1, 0.0).is_err());
        assert!(sam_edge::<f64>(0.1, -0.1, 1.0).is_err());
    }

    #[test]
    fn sam_edge_matches_direct_formula() {
        for &(eta, rho, g) in &[(0.1f64, 0.1f64, 1.0f64), (0.3, 0.1, 1.0), (0.03, 1.0, 0.2), (1.0, 0.001, 0.5)] {
            let direct: f64 = (g / (2.0 * rho)) * ((1.0 + 8.0 * rho / (eta * g)).sqrt() - 1.0);
            let got = sam_edge::<f64>(eta, rho, g).unwrap();
            assert!((got - direct).abs() / direct < 1e-12);
        }
    }

    #[test]
    fn edge_ratio_values() {
        assert!((edge_ratio::<f64>(0.5).unwrap() - 0.5).abs() < 1e-15);
        let big = edge_ratio::<f64>(1e6).unwrap();
        assert!(big <= 1.0 && big >= 1.0 - 1e-5);
        let small = edge_ratio::<f64>(1e-6).unwrap();
        assert!((small / 1e-3 - 1.0).abs() < 0.01);
        assert!(edge_ratio::<f64>(0.0).is_err());
    }

    #[test]
    fn edge_report_fields() {
        let r = EdgeReport::<f64>::new(0.1, 0.1, 1.0).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-15);
        assert!((r.ratio - 0.5).abs() < 1e-12);
        let gd = EdgeReport::<f64>::new(0.1, 0.0, 1.0).unwrap();
        assert_eq!(gd.ratio, 1.0);
        assert!(gd.alpha.is_infinite());
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig::new(0.1, 0.0, 10).is_ok());
        assert!(OptimConfig::new(0.0, 0.0, 10).is_err());
        assert!(OptimConfig::new(0.1, -0.1, 10).is_err());
        assert!(OptimConfig::new(0.1, 0.1, 0).is_err());
    }

    #[test]
    fn f32_edges() {
        let e: f32 = sam_edge(0.1f32, 0.1, 1.0).unwrap();
        assert!((e - 10.0).abs() < 1e-5);
    }
}
