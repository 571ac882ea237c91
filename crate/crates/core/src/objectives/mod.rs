//! Differentiable objectives: explicit quadratics and small fully connected
//! networks, both exposing exact gradients and Hessian-vector products.

mod init;
mod mlp;
mod quadratic;

pub use init::glorot_init;
pub use mlp::{Activation, Dataset, LayerParams, Mlp};
pub use quadratic::Quadratic;

use crate::error::{Error, Result};
use crate::params::Params;
use crate::scalar::Scalar;

/// Gradient `g` together with its Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientInfo<T> {
    pub grad: Params<T>,
    pub norm: T,
}

impl<T: Scalar> GradientInfo<T> {
    pub fn new(grad: Params<T>) -> Self {
        let norm = grad.norm();
        GradientInfo { grad, norm }
    }
}

/// A twice-differentiable loss `ℓ: R^d -> R`.
///
/// Implementations are immutable after construction, so every method is a
/// pure function of its arguments and may be called from several threads.
pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    fn loss(&self, w: &Params<T>) -> Result<T>;

    /// Exact analytic gradient. Fails with [`Error::Diverged`] when the
    /// gradient is not finite.
    fn gradient(&self, w: &Params<T>) -> Result<GradientInfo<T>>;

    /// Exact `∇²ℓ(w) · v` without materializing the Hessian.
    fn hvp(&self, w: &Params<T>, v: &Params<T>) -> Result<Params<T>>;

    /// Loss and gradient together; implementations that share work between
    /// the two override this.
    fn loss_and_gradient(&self, w: &Params<T>) -> Result<(T, GradientInfo<T>)> {
        Ok((self.loss(w)?, self.gradient(w)?))
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, w: &Params<T>) -> Result<T> {
        (**self).loss(w)
    }
    fn gradient(&self, w: &Params<T>) -> Result<GradientInfo<T>> {
        (**self).gradient(w)
    }
    fn hvp(&self, w: &Params<T>, v: &Params<T>) -> Result<Params<T>> {
        (**self).hvp(w, v)
    }
    fn loss_and_gradient(&self, w: &Params<T>) -> Result<(T, GradientInfo<T>)> {
        (**self).loss_and_gradient(w)
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, w: &Params<T>) -> Result<T> {
        (**self).loss(w)
    }
    fn gradient(&self, w: &Params<T>) -> Result<GradientInfo<T>> {
        (**self).gradient(w)
    }
    fn hvp(&self, w: &Params<T>, v: &Params<T>) -> Result<Params<T>> {
        (**self).hvp(w, v)
    }
    fn loss_and_gradient(&self, w: &Params<T>) -> Result<(T, GradientInfo<T>)> {
        (**self).loss_and_gradient(w)
    }
}

pub(crate) fn finite_gradient<T: Scalar>(grad: Vec<T>) -> Result<GradientInfo<T>> {
    if grad.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged);
    }
    let info = GradientInfo::new(Params::from_vec(grad));
    if !info.norm.is_finite() {
        return Err(Error::Diverged);
    }
    Ok(info)
}
