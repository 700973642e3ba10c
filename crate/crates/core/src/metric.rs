//! Positive-definite metrics for the search-direction subproblem.
//!
//! [`LbfgsMetric`] keeps the direct (Hessian, not inverse-Hessian) limited
//! memory BFGS approximation
//!
//! ```text
//! B_0     = gamma I
//! B_{i+1} = B_i - (B_i s_i)(B_i s_i)^T / (s_i^T B_i s_i) + y_i y_i^T / (y_i^T s_i)
//! ```
//!
//! The vectors `B_i s_i` are cached after every update, so a product `B v`
//! costs `O(memory * d)`.

use std::collections::VecDeque;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseVector};

/// A symmetric positive-definite operator.
pub trait Metric {
    fn dim(&self) -> usize;

    /// `H v`
    fn apply(&self, v: &[f64]) -> DenseVector;

    /// Positive lower bound on the smallest eigenvalue.
    fn eigen_lower_bound(&self) -> f64;
}

#[derive(Debug, Clone)]
struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    sy: f64,
    /// `B_i s_i` for the matrix before this pair was applied.
    bs: Vec<f64>,
    /// `s_i^T B_i s_i`
    sbs: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsMetric {
    dim: usize,
    memory: usize,
    pairs: VecDeque<CurvaturePair>,
    gamma: f64,
    curvature_eps: f64,
    gamma_min: f64,
    gamma_max: f64,
}

impl LbfgsMetric {
    pub const DEFAULT_MEMORY: usize = 5;
    pub const CURVATURE_EPS: f64 = 1e-10;
    pub const GAMMA_MIN: f64 = 1e-6;
    pub const GAMMA_MAX: f64 = 1e8;

    pub fn new(dim: usize, memory: usize) -> Result<Self> {
        if memory == 0 {
            return Err(Error::InvalidParameter("L-BFGS memory must be >= 1".into()));
        }
        Ok(Self {
            dim,
            memory,
            pairs: VecDeque::with_capacity(memory),
            gamma: 1.0,
            curvature_eps: Self::CURVATURE_EPS,
            gamma_min: Self::GAMMA_MIN,
            gamma_max: Self::GAMMA_MAX,
        })
    }

    /// Starts from `gamma I` instead of the identity.
    pub fn with_initial_scaling(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("scaling must be > 0, got {gamma}")));
        }
        self.gamma = gamma.clamp(self.gamma_min, self.gamma_max);
        self.rebuild();
        Ok(self)
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn scaling(&self) -> f64 {
        self.gamma
    }

    /// Stored `(s, y)` pairs, oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.pairs.iter().map(|p| (p.s.as_slice(), p.y.as_slice()))
    }

    /// Offers a curvature pair `s = x_{k+1} - x_k`, `y = g_{k+1} - g_k`.
    /// Returns `false` (leaving the metric untouched) when
    /// `s^T y <= eps ||s|| ||y||`.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> Result<bool> {
        check_dim(self.dim, s.len())?;
        check_dim(self.dim, y.len())?;
        let sy = dot(s, y);
        let yy = dot(y, y);
        if !sy.is_finite() || !yy.is_finite() || sy <= self.curvature_eps * norm2(s) * yy.sqrt() {
            return Ok(false);
        }
        if self.pairs.len() == self.memory {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair {
            s: s.to_vec(),
            y: y.to_vec(),
            sy,
            bs: Vec::new(),
            sbs: 0.0,
        });
        self.gamma = (yy / sy).clamp(self.gamma_min, self.gamma_max);
        self.rebuild();
        Ok(true)
    }

    /// Recomputes the cached `B_i s_i` after the base scaling or the pair set changed.
    fn rebuild(&mut self) {
        for i in 0..self.pairs.len() {
            let bs = self.apply_prefix(i, &self.pairs[i].s);
            let sbs = dot(&self.pairs[i].s, &bs);
            let p = &mut self.pairs[i];
            p.bs = bs;
            p.sbs = sbs;
        }
    }

    /// `B_k v` using only the first `k` pairs.
    fn apply_prefix(&self, k: usize, v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.gamma * x).collect();
        for p in self.pairs.iter().take(k) {
            axpy(&mut out, -dot(&p.bs, v) / p.sbs, &p.bs);
            axpy(&mut out, dot(&p.y, v) / p.sy, &p.y);
        }
        out
    }

    pub fn apply_h(&self, v: &[f64]) -> Result<DenseVector> {
        check_dim(self.dim, v.len())?;
        Ok(self.apply_prefix(self.pairs.len(), v))
    }

    /// Conservative lower bound on the smallest eigenvalue of `B`.
    ///
    /// Tracks an upper bound on the largest eigenvalue of the inverse
    /// `H = B^{-1}` through the inverse update
    /// `H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T`, using
    /// `||I - rho s y^T|| = ||s|| ||y|| / (s^T y)`.
    pub fn smallest_eigen_lower_bound(&self) -> f64 {
        if self.pairs.is_empty() {
            return self.gamma;
        }
        let mut h_max = 1.0 / self.gamma;
        for p in &self.pairs {
            let ss = dot(&p.s, &p.s);
            let inv_cos = ss.sqrt() * norm2(&p.y) / p.sy;
            h_max = h_max * inv_cos * inv_cos + ss / p.sy;
        }
        let m = 1.0 / h_max;
        if m > 0.0 {
            m
        } else {
            f64::MIN_POSITIVE
        }
    }
}

impl Metric for LbfgsMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> DenseVector {
        self.apply_prefix(self.pairs.len(), v)
    }

    fn eigen_lower_bound(&self) -> f64 {
        self.smallest_eigen_lower_bound()
    }
}

/// `c I`
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity {
    pub dim: usize,
    pub scale: f64,
}

impl Metric for ScaledIdentity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> DenseVector {
        v.iter().map(|x| self.scale * x).collect()
    }

    fn eigen_lower_bound(&self) -> f64 {
        self.scale
    }
}

/// Explicit symmetric matrix, row-major. Meant for small problems and tests.
#[derive(Debug, Clone)]
pub struct DenseMetric {
    dim: usize,
    data: Vec<f64>,
    lower_bound: f64,
}

impl DenseMetric {
    /// `lower_bound` must not exceed the smallest eigenvalue of `data`.
    pub fn new(dim: usize, data: Vec<f64>, lower_bound: f64) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        if !(lower_bound > 0.0) {
            return Err(Error::InvalidParameter("metric must be positive definite".into()));
        }
        Ok(Self {
            dim,
            data,
            lower_bound,
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}

impl Metric for DenseMetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> DenseVector {
        self.data.chunks(self.dim).map(|row| dot(row, v)).collect()
    }

    fn eigen_lower_bound(&self) -> f64 {
        self.lower_bound
    }
}
