//! Sparsity-inducing regularizers written as differences of convex parts.
//!
//! The capped-l1 penalty is applied coordinate-wise:
//! `h(x) = lambda * sum_i min(|x_i|, theta)`, split into
//! `h1(x) = lambda ||x||_1` and `h2(x) = lambda * sum_i (|x_i| - theta)_+`.
//! An optional unpenalized coordinate (the intercept) is excluded from both.

use crate::error::{Error, Result};
use crate::linalg::DenseVector;
use crate::objective::DcNonsmooth;

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

fn check_step(step: f64) -> Result<()> {
    positive("prox step", step).map(|_| ())
}

/// `sign(u) * max(|u| - thresh, 0)`
pub fn soft_threshold(u: f64, thresh: f64) -> f64 {
    if u > thresh {
        u - thresh
    } else if u < -thresh {
        u + thresh
    } else {
        0.0
    }
}

/// No regularization: `h1 = h2 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPenalty;

impl DcNonsmooth for ZeroPenalty {
    fn value_h1(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn value_h2(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn subgrad_h2(&self, x: &[f64]) -> DenseVector {
        vec![0.0; x.len()]
    }

    fn prox_h1_scalar(&self, u: &[f64], step: f64) -> Result<DenseVector> {
        check_step(step)?;
        Ok(u.to_vec())
    }

    fn prox_full(&self, u: &[f64], step: f64) -> Option<Result<DenseVector>> {
        Some(self.prox_h1_scalar(u, step))
    }
}

/// `lambda ||x||_1`
#[derive(Debug, Clone, Copy)]
pub struct L1Penalty {
    lambda: f64,
    unpenalized: Option<usize>,
}

impl L1Penalty {
    pub fn new(lambda: f64) -> Result<Self> {
        Ok(Self {
            lambda: positive("lambda", lambda)?,
            unpenalized: None,
        })
    }

    /// Leaves coordinate `idx` unregularized.
    pub fn with_unpenalized(mut self, idx: usize) -> Self {
        self.unpenalized = Some(idx);
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn weight(&self, i: usize) -> f64 {
        if self.unpenalized == Some(i) {
            0.0
        } else {
            self.lambda
        }
    }
}

impl DcNonsmooth for L1Penalty {
    fn value_h1(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| self.weight(i) * v.abs()).sum()
    }

    fn value_h2(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn subgrad_h2(&self, x: &[f64]) -> DenseVector {
        vec![0.0; x.len()]
    }

    fn prox_h1_scalar(&self, u: &[f64], step: f64) -> Result<DenseVector> {
        check_step(step)?;
        Ok(u.iter()
            .enumerate()
            .map(|(i, &ui)| soft_threshold(ui, step * self.weight(i)))
            .collect())
    }

    fn prox_full(&self, u: &[f64], step: f64) -> Option<Result<DenseVector>> {
        Some(self.prox_h1_scalar(u, step))
    }
}

/// `lambda * sum_i min(|x_i|, theta)`
#[derive(Debug, Clone, Copy)]
pub struct CappedL1Penalty {
    lambda: f64,
    theta: f64,
    unpenalized: Option<usize>,
}

impl CappedL1Penalty {
    pub fn new(lambda: f64, theta: f64) -> Result<Self> {
        Ok(Self {
            lambda: positive("lambda", lambda)?,
            theta: positive("theta", theta)?,
            unpenalized: None,
        })
    }

    pub fn with_unpenalized(mut self, idx: usize) -> Self {
        self.unpenalized = Some(idx);
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    fn weight(&self, i: usize) -> f64 {
        if self.unpenalized == Some(i) {
            0.0
        } else {
            self.lambda
        }
    }

    /// `(h1, h2)` at `x`.
    pub fn h_values(&self, x: &[f64]) -> (f64, f64) {
        (self.value_h1(x), self.value_h2(x))
    }
}

/// Exact minimizer of `(y - u)^2 / (2 step) + lambda * min(|y|, theta)`.
///
/// Compares the best point on the capped branch (`|y| >= theta`, constant
/// penalty) with the best point on the l1 branch (`|y| <= theta`), ties
/// going to the smaller magnitude.
pub fn prox_capped_l1_scalar(u: f64, lambda: f64, theta: f64, step: f64) -> f64 {
    let s = if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        return 0.0;
    };
    let a = u.abs();
    let y_cap = s * a.max(theta);
    let y_l1 = s * theta.min((a - step * lambda).max(0.0));
    let phi = |y: f64| (y - u) * (y - u) / (2.0 * step) + lambda * y.abs().min(theta);
    let (p_cap, p_l1) = (phi(y_cap), phi(y_l1));
    if p_l1 <= p_cap {
        y_l1
    } else {
        y_cap
    }
}

/// Coordinate-wise prox of the full capped-l1 penalty.
pub fn prox_capped_l1_full(pen: &CappedL1Penalty, u: &[f64], step: f64) -> Result<DenseVector> {
    check_step(step)?;
    Ok(u.iter()
        .enumerate()
        .map(|(i, &ui)| match pen.weight(i) {
            w if w == 0.0 => ui,
            w => prox_capped_l1_scalar(ui, w, pen.theta, step),
        })
        .collect())
}

impl DcNonsmooth for CappedL1Penalty {
    fn value_h1(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| self.weight(i) * v.abs()).sum()
    }

    fn value_h2(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * (v.abs() - self.theta).max(0.0))
            .sum()
    }

    /// `lambda * sign(x_i)` where `|x_i| > theta`, zero elsewhere (including
    /// the kink `|x_i| = theta`).
    fn subgrad_h2(&self, x: &[f64]) -> DenseVector {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                if v.abs() > self.theta {
                    self.weight(i) * v.signum()
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn prox_h1_scalar(&self, u: &[f64], step: f64) -> Result<DenseVector> {
        check_step(step)?;
        Ok(u.iter()
            .enumerate()
            .map(|(i, &ui)| soft_threshold(ui, step * self.weight(i)))
            .collect())
    }

    fn prox_full(&self, u: &[f64], step: f64) -> Option<Result<DenseVector>> {
        Some(prox_capped_l1_full(self, u, step))
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| self.weight(i) * v.abs().min(self.theta))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Grid search of the 1-D prox objective over `[lo, hi]` with spacing `h`.
    fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, h: f64) -> f64 {
        let n = ((hi - lo) / h).ceil() as usize;
        let mut best = (f64::INFINITY, lo);
        for k in 0..=n {
            let y = lo + k as f64 * h;
            let v = f(y);
            if v < best.0 {
                best = (v, y);
            }
        }
        best.1
    }

    #[test]
    fn capped_values() {
        let p = CappedL1Penalty::new(2.0, 0.2).unwrap();
        let (h1, h2) = p.h_values(&[0.5, -0.1]);
        assert!((h1 - 1.2).abs() < 1e-15);
        assert!((h2 - 0.6).abs() < 1e-15);
        assert!((p.value(&[0.5, -0.1]) - 0.6).abs() < 1e-15);
        assert_eq!(p.h_values(&[0.0, 0.0]), (0.0, 0.0));
        let l1 = L1Penalty::new(1.0).unwrap();
        assert_eq!((l1.value_h1(&[2.0, -1.0]), l1.value_h2(&[2.0, -1.0])), (3.0, 0.0));
    }

    #[test]
    fn subgradient_rule() {
        let p = CappedL1Penalty::new(2.0, 0.2).unwrap();
        assert_eq!(p.subgrad_h2(&[0.5, -0.1]), vec![2.0, 0.0]);
        assert_eq!(p.subgrad_h2(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(p.subgrad_h2(&[0.2, -0.2]), vec![0.0, 0.0]);
        assert_eq!(p.subgrad_h2(&[-0.3]), vec![-2.0]);
    }

    #[test]
    fn soft_threshold_cases() {
        let l1 = L1Penalty::new(1.0).unwrap();
        assert_eq!(l1.prox_h1_scalar(&[2.0, -0.5], 1.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(l1.prox_h1_scalar(&[0.0, 0.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(l1.prox_h1_scalar(&[1.0], 0.0).is_err());
        assert!(l1.prox_h1_scalar(&[1.0], -1.0).is_err());
        // vanishing lambda is the identity
        let tiny = L1Penalty::new(1e-300).unwrap();
        assert_eq!(tiny.prox_h1_scalar(&[0.7, -3.0], 1.0).unwrap(), vec![0.7, -3.0]);
    }

    #[test]
    fn soft_threshold_matches_grid_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let u: f64 = rng.random_range(-3.0..3.0);
            let lambda: f64 = rng.random_range(0.01..2.0);
            let step: f64 = rng.random_range(0.05..2.0);
            let pen = L1Penalty::new(lambda).unwrap();
            let got = pen.prox_h1_scalar(&[u], step).unwrap()[0];
            let oracle = grid_min(
                |y| 0.5 * (y - u) * (y - u) / step + lambda * y.abs(),
                -3.5,
                3.5,
                1e-4,
            );
            assert!((got - oracle).abs() <= 1e-4, "u={u} got={got} oracle={oracle}");
        }
    }

    #[test]
    fn capped_full_prox_examples() {
        let p = CappedL1Penalty::new(1.0, 0.2).unwrap();
        assert_eq!(prox_capped_l1_full(&p, &[5.0], 1.0).unwrap(), vec![5.0]);
        assert_eq!(prox_capped_l1_full(&p, &[0.0], 1.0).unwrap(), vec![0.0]);
        let y = prox_capped_l1_full(&p, &[0.15], 0.1).unwrap()[0];
        assert!((y - 0.05).abs() < 1e-15);
        assert!(prox_capped_l1_full(&p, &[0.15], 0.0).is_err());
    }

    #[test]
    fn unpenalized_coordinate_is_free() {
        let p = CappedL1Penalty::new(1.0, 0.5).unwrap().with_unpenalized(1);
        assert_eq!(p.value_h1(&[1.0, 3.0]), 1.0);
        assert_eq!(p.subgrad_h2(&[1.0, 3.0]), vec![1.0, 0.0]);
        assert_eq!(p.prox_h1_scalar(&[1.0, 3.0], 0.5).unwrap(), vec![0.5, 3.0]);
        assert_eq!(prox_capped_l1_full(&p, &[0.1, 0.1], 1.0).unwrap(), vec![0.0, 0.1]);
        let l = L1Penalty::new(1.0).unwrap().with_unpenalized(0);
        assert_eq!(l.prox_h1_scalar(&[0.5, 0.5], 1.0).unwrap(), vec![0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn dc_split_matches_direct(x in proptest::collection::vec(-3.0f64..3.0, 1..8),
                                   lambda in 0.01f64..5.0, theta in 0.01f64..2.0) {
            let p = CappedL1Penalty::new(lambda, theta).unwrap();
            let (h1, h2) = p.h_values(&x);
            let direct: f64 = x.iter().map(|v| lambda * v.abs().min(theta)).sum();
            prop_assert!((h1 - h2 - direct).abs() <= 1e-12 * direct.max(1.0));
            prop_assert!(h1 >= h2 && h2 >= 0.0);
            prop_assert!(h1 - h2 <= lambda * theta * x.len() as f64 + 1e-12);
        }

        #[test]
        fn subgradient_inequality(x in proptest::collection::vec(-2.0f64..2.0, 1..6),
                                  y in proptest::collection::vec(-2.0f64..2.0, 6),
                                  theta in 0.05f64..1.0) {
            let p = CappedL1Penalty::new(1.3, theta).unwrap();
            let y = &y[..x.len()];
            let z = p.subgrad_h2(&x);
            let lin: f64 = z.iter().zip(y.iter().zip(&x)).map(|(zi, (yi, xi))| zi * (yi - xi)).sum();
            prop_assert!(p.value_h2(y) >= p.value_h2(&x) + lin - 1e-10);
        }

        #[test]
        fn soft_threshold_nonexpansive(u in proptest::collection::vec(-3.0f64..3.0, 4),
                                       v in proptest::collection::vec(-3.0f64..3.0, 4),
                                       lambda in 0.01f64..2.0, step in 0.01f64..2.0) {
            let p = L1Penalty::new(lambda).unwrap();
            let pu = p.prox_h1_scalar(&u, step).unwrap();
            let pv = p.prox_h1_scalar(&v, step).unwrap();
            let d_out = crate::linalg::norm2(&crate::linalg::sub(&pu, &pv));
            let d_in = crate::linalg::norm2(&crate::linalg::sub(&u, &v));
            prop_assert!(d_out <= d_in + 1e-12);
        }

        #[test]
        fn capped_prox_matches_grid(u in -2.0f64..2.0, lambda in 0.05f64..2.0,
                                    theta in 0.05f64..1.0, step in 0.05f64..1.5) {
            let got = prox_capped_l1_scalar(u, lambda, theta, step);
            let phi = |y: f64| 0.5 * (y - u) * (y - u) / step + lambda * y.abs().min(theta);
            let oracle = grid_min(phi, -2.5, 2.5, 1e-4);
            // exact ties between branches may resolve to either minimizer
            prop_assert!((got - oracle).abs() <= 1e-4 || (phi(got) - phi(oracle)).abs() <= 1e-8);
        }
    }
}
