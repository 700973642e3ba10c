//! Difference-of-convex building blocks and the composite objective
//! `F(x) = f1(x) - f2(x) + h1(x) - h2(x)`.

use crate::error::{check_dim, check_finite, Result};
use crate::linalg::DenseVector;

/// Values and gradients of both convex parts of a smooth DC function at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothEval {
    pub f1: f64,
    pub f2: f64,
    pub grad_f1: DenseVector,
    pub grad_f2: DenseVector,
}

impl SmoothEval {
    pub fn value(&self) -> f64 {
        self.f1 - self.f2
    }

    /// `grad f1 - grad f2`
    pub fn gradient(&self) -> DenseVector {
        crate::linalg::sub(&self.grad_f1, &self.grad_f2)
    }
}

/// Smooth DC function `f = f1 - f2` with both parts convex and `grad f1`
/// Lipschitz continuous.
///
/// Implementations must be pure: the same `x` always yields the same values.
pub trait DcSmooth: Send + Sync {
    fn dim(&self) -> usize;

    /// Value of both parts, `(f1, f2)`.
    fn values(&self, x: &[f64]) -> Result<(f64, f64)>;

    fn evaluate(&self, x: &[f64]) -> Result<SmoothEval>;

    /// Known Lipschitz bound on `grad f1`, if any.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }

    fn value_f1(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values(x)?.0)
    }

    fn value_f2(&self, x: &[f64]) -> Result<f64> {
        Ok(self.values(x)?.1)
    }

    fn grad_f1(&self, x: &[f64]) -> Result<DenseVector> {
        Ok(self.evaluate(x)?.grad_f1)
    }

    fn grad_f2(&self, x: &[f64]) -> Result<DenseVector> {
        Ok(self.evaluate(x)?.grad_f2)
    }
}

/// Nonsmooth DC regularizer `h = h1 - h2` with both parts convex.
pub trait DcNonsmooth: Send + Sync {
    fn value_h1(&self, x: &[f64]) -> f64;

    fn value_h2(&self, x: &[f64]) -> f64;

    /// Deterministic element of the subdifferential of `h2` at `x`.
    fn subgrad_h2(&self, x: &[f64]) -> DenseVector;

    /// `argmin_y 1/(2 step) ||y - u||^2 + h1(y)`.
    fn prox_h1_scalar(&self, u: &[f64], step: f64) -> Result<DenseVector>;

    /// Proximal map of the full (possibly nonconvex) `h`, when it has a
    /// closed form. Needed by GIST.
    fn prox_full(&self, _u: &[f64], _step: f64) -> Option<Result<DenseVector>> {
        None
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_h1(x) - self.value_h2(x)
    }
}

/// `F = f + h`, borrowing its two parts.
#[derive(Clone, Copy)]
pub struct CompositeObjective<'a> {
    pub smooth: &'a dyn DcSmooth,
    pub nonsmooth: &'a dyn DcNonsmooth,
}

impl<'a> CompositeObjective<'a> {
    pub fn new(smooth: &'a dyn DcSmooth, nonsmooth: &'a dyn DcNonsmooth) -> Self {
        Self { smooth, nonsmooth }
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        composite_value(self, x)
    }

    /// `(grad f1, grad f2)` at `x`.
    pub fn smooth_gradient(&self, x: &[f64]) -> Result<(DenseVector, DenseVector)> {
        check_dim(self.dim(), x.len())?;
        let e = self.smooth.evaluate(x)?;
        if !crate::linalg::all_finite(&e.grad_f1) || !crate::linalg::all_finite(&e.grad_f2) {
            return Err(crate::Error::NonFinite("smooth gradient"));
        }
        Ok((e.grad_f1, e.grad_f2))
    }
}

pub fn composite_value(obj: &CompositeObjective<'_>, x: &[f64]) -> Result<f64> {
    check_dim(obj.dim(), x.len())?;
    let (f1, f2) = obj.smooth.values(x)?;
    let h1 = obj.nonsmooth.value_h1(x);
    let h2 = obj.nonsmooth.value_h2(x);
    check_finite(f1, "f1")?;
    check_finite(f2, "f2")?;
    check_finite(h1, "h1")?;
    check_finite(h2, "h2")?;
    check_finite(f1 - f2 + h1 - h2, "objective")
}
