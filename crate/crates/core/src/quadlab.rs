//! Exact one-step analysis of GD and SAM on quadratic objectives.
//!
//! For `ℓ(w) = ℓ(w_t) + gᵀ(w − w_t) + ½(w − w_t)ᵀH(w − w_t)` with eigenpairs
//! `(λᵢ, vᵢ)` of `H`, one SAM step changes the loss by
//!
//! ```text
//! Δℓ = −η Σᵢ (vᵢ·g)² (1 + ρλᵢ/‖g‖) (1 − η(1 + ρλᵢ/‖g‖)λᵢ/2)
//! ```
//!
//! The randomized verifiers in this module check that identity and the sign
//! laws that follow from it against direct simulation with the steppers.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{log_uniform, random_orthogonal, symmetric_eigen};
use crate::objectives::{GradientInfo, Objective, Quadratic};
use crate::optim::{gd_edge, radicand_root, sam_edge, sam_step_detailed, OptimConfig};
use crate::params::Params;
use crate::scalar::Scalar;

/// Loss changes smaller than this are treated as sitting on the edge and
/// excluded from sign verification.
pub const BOUNDARY_BAND: f64 = 1e-12;

/// Eigenvalues in descending order with orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<Params<T>>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn of(model: &Quadratic<T>) -> Self {
        let d = model.dim();
        let (values, vectors) = symmetric_eigen(&model.dense_hessian(), d);
        EigenDecomposition {
            eigenvalues: values,
            eigenvectors: vectors.into_iter().map(Params::from_vec).collect(),
        }
    }

    /// Sorts the given eigenpairs into descending order. Vectors must be
    /// orthonormal to `1e-10`.
    pub fn from_parts(eigenvalues: Vec<T>, eigenvectors: Vec<Params<T>>) -> Result<Self> {
        let d = eigenvalues.len();
        if d == 0 || eigenvectors.len() != d || eigenvectors.iter().any(|v| v.dim() != d) {
            return Err(Error::invalid("eigenvectors", "expected d vectors of dimension d"));
        }
        let tol = T::of(1e-10);
        for i in 0..d {
            for j in 0..=i {
                let expected = if i == j { T::one() } else { T::zero() };
                if (eigenvectors[i].dot(&eigenvectors[j]) - expected).abs() > tol {
                    return Err(Error::invalid("eigenvectors", "not orthonormal"));
                }
            }
        }
        let mut pairs: Vec<(T, Params<T>)> = eigenvalues.into_iter().zip(eigenvectors).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
        Ok(EigenDecomposition {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ λᵢ vᵢ vᵢᵀ` as a quadratic model with no linear term.
    pub fn reconstruct(&self) -> Result<Quadratic<T>> {
        let vecs: Vec<Vec<T>> = self.eigenvectors.iter().map(|v| v.as_slice().to_vec()).collect();
        Quadratic::from_eigenpairs(&self.eigenvalues, &vecs)
    }
}

/// Per-direction contributions `−η (vᵢ·g)² (1 + ρλᵢ/‖g‖)(1 − η(1 + ρλᵢ/‖g‖)λᵢ/2)`
/// whose sum is the one-step loss change.
pub fn closed_form_terms<T: Scalar>(
    eig: &EigenDecomposition<T>,
    g: &GradientInfo<T>,
    eta: T,
    rho: T,
) -> Result<Vec<T>> {
    if g.grad.dim() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            actual: g.grad.dim(),
        });
    }
    if !(g.norm > T::zero()) {
        return Err(Error::ZeroGradient);
    }
    let half = T::of(0.5);
    Ok(eig
        .eigenvalues
        .iter()
        .zip(&eig.eigenvectors)
        .map(|(&lambda, v)| {
            let proj = v.dot(&g.grad);
            let amp = T::one() + rho * lambda / g.norm;
            -eta * proj * proj * amp * (T::one() - eta * amp * lambda * half)
        })
        .collect())
}

/// Closed-form `ℓ(w_{t+1}) − ℓ(w_t)` for one SAM step (GD when `rho = 0`).
pub fn closed_form_step_delta<T: Scalar>(
    eig: &EigenDecomposition<T>,
    g: &GradientInfo<T>,
    eta: T,
    rho: T,
) -> Result<T> {
    Ok(closed_form_terms(eig, g, eta, rho)?.into_iter().sum())
}

fn check_positive<T: Scalar>(name: &'static str, x: T) -> Result<()> {
    if x > T::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {x}")))
    }
}

/// `(−(‖g‖/2ρ)(√(1 + 8ρ/(η‖g‖)) + 1), (‖g‖/2ρ)(√(1 + 8ρ/(η‖g‖)) − 1))`,
/// the roots of `ηρλ² + ηλ‖g‖ − 2‖g‖`. The upper end is the SAM-edge.
pub fn stable_interval<T: Scalar>(grad_norm: T, eta: T, rho: T) -> Result<(T, T)> {
    check_positive("grad_norm", grad_norm)?;
    check_positive("eta", eta)?;
    check_positive("rho", rho)?;
    let root = radicand_root(eta, rho, grad_norm);
    let lower = -(grad_norm / (T::of(2.0) * rho)) * (root + T::one());
    let upper = sam_edge(eta, rho, grad_norm)?;
    Ok((lower, upper))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermSign {
    Positive,
    Zero,
    Negative,
}

/// Sign of `(1 + ρλ/‖g‖)(1 − η(1 + ρλ/‖g‖)λ/2)`, the factor that decides
/// whether eigendirection `λ` contributes a decrease.
///
/// The first factor vanishes at `λ = −‖g‖/ρ`, the second at the endpoints of
/// [`stable_interval`]. For `λ > −‖g‖/ρ` the product is positive exactly
/// inside the interval; below the lower endpoint both factors are negative
/// and the product is positive again.
pub fn term_sign<T: Scalar>(lambda: T, grad_norm: T, eta: T, rho: T) -> Result<TermSign> {
    check_positive("grad_norm", grad_norm)?;
    check_positive("eta", eta)?;
    if rho == T::zero() {
        // (1)(1 − ηλ/2)
        let edge = gd_edge(eta)?;
        return Ok(sign_of(edge - lambda));
    }
    let (lower, upper) = stable_interval(grad_norm, eta, rho)?;
    let first_root = -(grad_norm / rho);
    let first = sign_of(lambda - first_root);
    let second = if lambda == lower || lambda == upper {
        TermSign::Zero
    } else if lambda > lower && lambda < upper {
        TermSign::Positive
    } else {
        TermSign::Negative
    };
    Ok(match (first, second) {
        (TermSign::Zero, _) | (_, TermSign::Zero) => TermSign::Zero,
        (a, b) if a == b => TermSign::Positive,
        _ => TermSign::Negative,
    })
}

fn sign_of<T: Scalar>(x: T) -> TermSign {
    if x > T::zero() {
        TermSign::Positive
    } else if x < T::zero() {
        TermSign::Negative
    } else {
        TermSign::Zero
    }
}

/// Outcome counts of a randomized sign-law check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SignReport {
    pub trials: usize,
    /// Trials whose observed sign matched the prediction.
    pub matched: usize,
    pub mismatches: usize,
    /// Trials with `|Δℓ| < BOUNDARY_BAND`, not adjudicated.
    pub boundary: usize,
}

impl SignReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }

    fn merge(self, other: Self) -> Self {
        SignReport {
            trials: self.trials + other.trials,
            matched: self.matched + other.matched,
            mismatches: self.mismatches + other.mismatches,
            boundary: self.boundary + other.boundary,
        }
    }

    fn single(delta: f64, predicted_sign: f64) -> Self {
        let mut r = SignReport {
            trials: 1,
            ..Default::default()
        };
        if delta.abs() < BOUNDARY_BAND {
            r.boundary = 1;
        } else if delta.signum() == predicted_sign.signum() && predicted_sign != 0.0 {
            r.matched = 1;
        } else {
            r.mismatches = 1;
        }
        r
    }
}

/// A quadratic with minimizer at the origin whose gradient at `w` is aligned
/// with the principal eigenvector and has the requested norm.
#[derive(Clone, Debug)]
pub struct AlignedProblem {
    pub model: Quadratic<f64>,
    pub w: Params<f64>,
    /// Largest eigenvalue, i.e. `‖H‖` for the PSD spectra used here.
    pub top_eigenvalue: f64,
}

impl AlignedProblem {
    /// `spectrum[0]` must be the largest eigenvalue; `basis[i]` its
    /// eigenvector. `w = s·v₁` with `|s| = grad_norm / λ₁`.
    pub fn new(spectrum: &[f64], basis: &[Vec<f64>], grad_norm: f64, sign: f64) -> Result<Self> {
        let top = spectrum[0];
        if spectrum.iter().any(|&l| l > top) {
            return Err(Error::invalid("spectrum", "first entry must be the largest"));
        }
        check_positive("top eigenvalue", top)?;
        let model = Quadratic::from_eigenpairs(spectrum, basis)?;
        let s = sign.signum() * grad_norm / top;
        let w = Params::new(basis[0].iter().map(|&x| s * x).collect())?;
        Ok(AlignedProblem {
            model,
            w,
            top_eigenvalue: top,
        })
    }

    /// Diagonal model with `v₁ = e₁`.
    pub fn diagonal(spectrum: &[f64], grad_norm: f64) -> Result<Self> {
        let d = spectrum.len();
        let basis: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(spectrum, &basis, grad_norm, 1.0)
    }

    /// `ℓ(step(w)) − ℓ(w)` for one SAM step (GD when `rho = 0`), simulated.
    pub fn step_delta(&self, eta: f64, rho: f64) -> Result<f64> {
        simulated_change(&self.model, &self.w, eta, rho)
    }
}

/// Loss change of one simulated SAM step on a quadratic. With the step
/// `d = −η∇ℓ(w + ρg/‖g‖)` taken from the optimizer, the change is evaluated
/// as `g·d + ½dᵀHd`, which is exact for quadratics and avoids the
/// cancellation in `ℓ(w + d) − ℓ(w)` when `|ℓ| ≫ |Δℓ|`.
pub fn simulated_change(model: &Quadratic<f64>, w: &Params<f64>, eta: f64, rho: f64) -> Result<f64> {
    let cfg = OptimConfig {
        eta,
        rho,
        max_steps: 1,
        divergence_threshold: None,
    };
    let step = sam_step_detailed(model, w, &cfg)?;
    let d = step.uphill_grad.grad.scaled(-eta);
    let hd = model.hvp(w, &d)?;
    Ok(step.grad.grad.dot(&d) + 0.5 * d.dot(&hd))
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Spectrum with `D` log-uniform in `[1e-2, 1e2]`, rescaled so its maximum,
/// placed first, equals `top`.
fn random_psd_spectrum(rng: &mut ChaCha8Rng, dim: usize, top: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..dim).map(|_| log_uniform(rng, 1e-2, 1e2)).collect();
    let max = raw.iter().copied().fold(f64::MIN, f64::max);
    let mut spectrum: Vec<f64> = raw.iter().map(|&x| top * x / max).collect();
    let imax = raw.iter().position(|&x| x == max).unwrap();
    spectrum.swap(0, imax);
    spectrum[0] = top;
    spectrum
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn check_trials(dims: &RangeInclusive<usize>, trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    if *dims.start() == 0 || dims.is_empty() {
        return Err(Error::invalid("dims", "need a nonempty range of positive dimensions"));
    }
    Ok(())
}

/// Randomized check of the SAM sign law: with `g` aligned to the principal
/// eigenvector of a PSD Hessian,
/// `sign(Δℓ) = sign(‖H‖ − sam_edge(η, ρ, ‖g‖))`.
///
/// Each trial draws a dimension from `dims`, `η, ρ, ‖g‖` log-uniform in
/// `[1e-3, 1]`, and places `λ₁` at the SAM-edge times a log-uniform factor in
/// `[1/2, 2]` so both sides of the edge are exercised.
pub fn verify_prop_sign(dims: RangeInclusive<usize>, trials: usize, seed: u64) -> Result<SignReport> {
    check_trials(&dims, trials)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let dim = rng.random_range(dims.clone());
            let eta = log_uniform(&mut rng, 1e-3, 1.0);
            let rho = log_uniform(&mut rng, 1e-3, 1.0);
            let grad_norm = log_uniform(&mut rng, 1e-3, 1.0);
            let top = sam_edge(eta, rho, grad_norm)? * log_uniform(&mut rng, 0.5, 2.0);
            let spectrum = random_psd_spectrum(&mut rng, dim, top);
            let basis = random_orthogonal::<f64, _>(dim, &mut rng);
            let sign = random_sign(&mut rng);
            let problem = AlignedProblem::new(&spectrum, &basis, grad_norm, sign)?;
            let actual_norm = problem.model.gradient(&problem.w)?.norm;
            let delta = problem.step_delta(eta, rho)?;
            let predicted = problem.top_eigenvalue - sam_edge(eta, rho, actual_norm)?;
            Ok(SignReport::single(delta, predicted))
        })
        .try_reduce(SignReport::default, |a, b| Ok(a.merge(b)))
}

/// Randomized check of the GD sign law
/// `sign(Δℓ) = sign(‖H‖ − 2/η)` with `g` aligned to the principal
/// eigenvector; `λ₁ = (2/η)·u` with `u` log-uniform in `[1/2, 2]`.
pub fn verify_gd_prop_sign(dims: RangeInclusive<usize>, trials: usize, seed: u64) -> Result<SignReport> {
    check_trials(&dims, trials)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let dim = rng.random_range(dims.clone());
            let eta = log_uniform(&mut rng, 1e-3, 1.0);
            let grad_norm = log_uniform(&mut rng, 1e-3, 1.0);
            let edge = gd_edge(eta)?;
            let top = edge * log_uniform(&mut rng, 0.5, 2.0);
            let spectrum = random_psd_spectrum(&mut rng, dim, top);
            let basis = random_orthogonal::<f64, _>(dim, &mut rng);
            let sign = random_sign(&mut rng);
            let problem = AlignedProblem::new(&spectrum, &basis, grad_norm, sign)?;
            let delta = problem.step_delta(eta, 0.0)?;
            Ok(SignReport::single(delta, problem.top_eigenvalue - edge))
        })
        .try_reduce(SignReport::default, |a, b| Ok(a.merge(b)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormReport {
    pub trials: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

impl ClosedFormReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Relative tolerance for the closed form against simulation.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// One random closed-form trial: a Gaussian symmetric Hessian (mixed-sign
/// spectrum) with random linear term and iterate. Returns
/// `(closed_form, simulated, scale)` where `scale` is
/// `max(|simulated|, Σ|termᵢ|)`, the magnitude against which the two are
/// compared.
pub fn closed_form_trial(dim: usize, seed: u64, trial: usize) -> Result<(f64, f64, f64)> {
    let mut rng = trial_rng(seed, trial);
    let mut h = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let x: f64 = rng.sample(StandardNormal);
            h[i * dim + j] = x;
            h[j * dim + i] = x;
        }
    }
    let linear: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let model = Quadratic::from_dense(dim, &h, linear, rng.sample(StandardNormal))?;
    let w = Params::new((0..dim).map(|_| rng.sample(StandardNormal)).collect())?;
    let eta = log_uniform(&mut rng, 1e-3, 1e-1);
    let rho = log_uniform(&mut rng, 1e-3, 1.0);
    let g = model.gradient(&w)?;
    let eig = EigenDecomposition::of(&model);
    let terms = closed_form_terms(&eig, &g, eta, rho)?;
    let closed: f64 = terms.iter().sum();
    let simulated = simulated_change(&model, &w, eta, rho)?;
    let scale = terms.iter().map(|t| t.abs()).sum::<f64>().max(simulated.abs());
    Ok((closed, simulated, scale))
}

/// Closed form vs. simulated SAM step over random mixed-sign quadratics.
pub fn verify_closed_form(dims: RangeInclusive<usize>, trials: usize, seed: u64) -> Result<ClosedFormReport> {
    check_trials(&dims, trials)?;
    let errors: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed ^ 0x5eed, t);
            let dim = rng.random_range(dims.clone());
            let (closed, simulated, scale) = closed_form_trial(dim, seed, t)?;
            Ok(if scale == 0.0 { 0.0 } else { (closed - simulated).abs() / scale })
        })
        .collect::<Result<_>>()?;
    Ok(ClosedFormReport {
        trials,
        failures: errors.iter().filter(|&&e| !(e <= CLOSED_FORM_TOL)).count(),
        max_rel_err: errors.iter().copied().fold(0.0, f64::max),
    })
}

/// Locates the SAM-edge numerically: bisects `λ` on the 1-D quadratic
/// `½λw²` (with `w = ‖g‖/λ`, so the gradient has norm `‖g‖`) for the sign flip
/// of the simulated one-step loss change. Independent of the edge formula.
pub fn edge_bisection_oracle(eta: f64, rho: f64, grad_norm: f64, tol: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    check_positive("grad_norm", grad_norm)?;
    check_positive("tol", tol)?;
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho", "must be >= 0"));
    }
    let delta = |lambda: f64| -> Result<f64> {
        AlignedProblem::diagonal(&[lambda], grad_norm)?.step_delta(eta, rho)
    };
    let mut hi = 4.0 / eta;
    let mut grown = 0;
    while delta(hi)? <= 0.0 {
        hi *= 2.0;
        grown += 1;
        if grown > 60 {
            return Err(Error::Bracketing);
        }
    }
    let mut lo = hi;
    let mut shrunk = 0;
    loop {
        lo *= 0.5;
        shrunk += 1;
        if shrunk > 200 || lo == 0.0 {
            return Err(Error::Bracketing);
        }
        if delta(lo)? < 0.0 {
            break;
        }
    }
    // invariant: delta(lo) < 0 < delta(hi)
    for _ in 0..400 {
        if hi - lo <= tol || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if delta(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectionReport {
    pub configs: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

impl BisectionReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Compares [`edge_bisection_oracle`] with [`sam_edge`] on a log-spaced
/// `n × n × n` grid of `(η, ρ, ‖g‖) ∈ [1e-3, 1]³`.
pub fn verify_edge_bisection(n: usize, rel_tol: f64) -> Result<BisectionReport> {
    if n == 0 {
        return Err(Error::invalid("n", "must be >= 1"));
    }
    let axis: Vec<f64> = (0..n)
        .map(|i| {
            let t = if n == 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
            10f64.powf(-3.0 + 3.0 * t)
        })
        .collect();
    let mut configs = Vec::with_capacity(n * n * n);
    for &eta in &axis {
        for &rho in &axis {
            for &g in &axis {
                configs.push((eta, rho, g));
            }
        }
    }
    let errors: Vec<f64> = configs
        .par_iter()
        .map(|&(eta, rho, g)| {
            let tol = 1e-12 * gd_edge(eta)?;
            let found = edge_bisection_oracle(eta, rho, g, tol)?;
            let edge = sam_edge(eta, rho, g)?;
            Ok((found - edge).abs() / edge)
        })
        .collect::<Result<_>>()?;
    Ok(BisectionReport {
        configs: errors.len(),
        failures: errors.iter().filter(|&&e| !(e <= rel_tol)).count(),
        max_rel_err: errors.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aligned_grad(norm: f64) -> GradientInfo<f64> {
        GradientInfo::new(Params::<f64>::new(vec![norm]).unwrap())
    }

    fn one_d_eig(lambda: f64) -> EigenDecomposition<f64> {
        EigenDecomposition::from_parts(vec![lambda], vec![Params::<f64>::new(vec![1.0]).unwrap()]).unwrap()
    }

    #[test]
    fn zero_step_size_gives_zero_change() {
        let d = closed_form_step_delta(&one_d_eig(3.0), &aligned_grad(1.0), 0.0, 0.1).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn change_vanishes_at_the_edge() {
        let d = closed_form_step_delta(&one_d_eig(10.0), &aligned_grad(1.0), 0.1, 0.1).unwrap();
        assert!(d.abs() < 1e-15, "{d}");
    }

    #[test]
    fn gd_reduction_of_closed_form() {
        let eig = one_d_eig(4.0);
        let g = aligned_grad(2.0);
        let d = closed_form_step_delta(&eig, &g, 0.1, 0.0).unwrap();
        assert!((d - (-0.1 * 4.0 * (1.0 - 0.1 * 4.0 / 2.0))).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_rejected() {
        assert!(matches!(
            closed_form_step_delta(&one_d_eig(1.0), &aligned_grad(0.0), 0.1, 0.1),
            Err(Error::ZeroGradient)
        ));
    }

    #[test]
    fn interval_perfect_square_case() {
        let (lo, hi) = stable_interval::<f64>(1.0, 0.1, 0.1).unwrap();
        assert!((lo + 20.0).abs() < 1e-12);
        assert!((hi - 10.0).abs() < 1e-12);
        assert!(stable_interval::<f64>(1.0, 0.1, 0.0).is_err());
        assert!(stable_interval::<f64>(0.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn term_sign_boundaries() {
        let (g, eta, rho) = (1.0, 0.1, 0.1);
        let (lo, hi) = stable_interval::<f64>(g, eta, rho).unwrap();
        assert_eq!(term_sign::<f64>(-(g / rho), g, eta, rho).unwrap(), TermSign::Zero);
        assert_eq!(term_sign::<f64>(hi, g, eta, rho).unwrap(), TermSign::Zero);
        assert_eq!(term_sign::<f64>(lo, g, eta, rho).unwrap(), TermSign::Zero);
        assert_eq!(term_sign::<f64>(5.0, g, eta, rho).unwrap(), TermSign::Positive);
        assert_eq!(term_sign::<f64>(11.0, g, eta, rho).unwrap(), TermSign::Negative);
        assert_eq!(term_sign::<f64>(-15.0, g, eta, rho).unwrap(), TermSign::Negative);
        assert_eq!(term_sign::<f64>(-25.0, g, eta, rho).unwrap(), TermSign::Positive);
    }

    #[test]
    fn hand_checkable_sam_instance_flips_at_ten() {
        let below = AlignedProblem::diagonal(&[9.99], 1.0).unwrap().step_delta(0.1, 0.1).unwrap();
        let above = AlignedProblem::diagonal(&[10.01], 1.0).unwrap().step_delta(0.1, 0.1).unwrap();
        assert!(below < 0.0, "{below}");
        assert!(above > 0.0, "{above}");
    }

    #[test]
    fn hand_checkable_gd_instance_flips_at_twenty() {
        let below = AlignedProblem::diagonal(&[19.9, 1.0], 0.5).unwrap().step_delta(0.1, 0.0).unwrap();
        let above = AlignedProblem::diagonal(&[20.1, 1.0], 0.5).unwrap().step_delta(0.1, 0.0).unwrap();
        assert!(below < 0.0 && above > 0.0);
    }

    #[test]
    fn small_verifier_runs_are_clean() {
        let sam = verify_prop_sign(2..=6, 500, 1).unwrap();
        assert_eq!(sam.trials, 500);
        assert!(sam.passed(), "{sam:?}");
        let gd = verify_gd_prop_sign(2..=6, 500, 1).unwrap();
        assert!(gd.passed(), "{gd:?}");
        assert!(verify_prop_sign(2..=6, 0, 1).is_err());
    }

    #[test]
    fn bisection_examples() {
        let e = edge_bisection_oracle(0.1, 0.1, 1.0, 1e-6).unwrap();
        assert!((e - 10.0).abs() <= 1e-6);
        let e = edge_bisection_oracle(0.3, 0.1, 1.0, 1e-6).unwrap();
        let expected = 5.0 * ((11.0f64 / 3.0).sqrt() - 1.0);
        assert!((e - expected).abs() <= 1e-6);
        let e = edge_bisection_oracle(0.1, 1e-9, 1.0, 1e-9).unwrap();
        assert!((e - 20.0).abs() / 20.0 < 1e-4);
    }

    #[test]
    fn eigendecomposition_reconstructs() {
        let q = Quadratic::<f64>::from_dense(3, &[2.0, 0.0, 0.0, 1.0, -3.0, 0.0, 0.5, 0.2, 1.0], vec![0.0; 3], 0.0)
            .unwrap();
        let eig = EigenDecomposition::of(&q);
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let r = eig.reconstruct().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r.hessian(i, j) - q.hessian(i, j)).abs() < 1e-12);
            }
        }
    }
}
