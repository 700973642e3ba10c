//! Proximal Newton-type solver for difference-of-convex composite problems
//! `F(x) = f1(x) - f2(x) + h1(x) - h2(x)`, with sparse logistic and
//! transductive logistic losses, l1 and capped-l1 penalties, and GIST / DCA /
//! proximal gradient baselines.

pub mod baselines;
pub mod data;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod losses;
pub mod metric;
pub mod objective;
pub mod prox_newton;
pub mod regularizers;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{Dataset, DenseVector, SparseRowMatrix};
pub use objective::{CompositeObjective, DcNonsmooth, DcSmooth, SmoothEval};
pub use trace::{IterRecord, SolveStatus, SolveTrace};
