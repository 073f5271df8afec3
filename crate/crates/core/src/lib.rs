//! Sparse, differentiable top-k operators.
//!
//! Top-k masks, magnitudes, sorting and ranking are written as linear
//! programs over the permutahedron. Adding a p-norm regularizer turns them
//! into smooth, sparse operators computed by isotonic optimization, with
//! cheap Jacobian products through the resulting block structure.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases cover the common case.

mod scalar;

pub mod autodiff;
pub mod error;
pub mod hard;
pub mod isotonic;
pub mod loss;
pub mod relaxed;

pub use autodiff::{block_jacobian_row, jvp, vjp, JacobianPlan};
pub use error::{Error, Result};
pub use hard::{argsort, lmo, rank, sort_desc, topk, topkmag, topkmask, LmoOutput, Permutation};
pub use isotonic::{
    dual_bca_solve, dykstra_solve, pav_solve, pool_subproblem, Block, DualSolve, IsotonicProblem, IsotonicSolution,
    PhiKind, Regularizer,
};
pub use loss::{fy_topk_loss, FyLoss, LossConfig};
pub use relaxed::{
    f_value, relaxed_apply, reversing, soft_rank, soft_signed_topkmask, soft_sort, soft_topkmag, soft_topkmask,
    OperatorSpec, RelaxedOutput, Solver, Weights,
};
pub use scalar::Scalar;

pub type RegularizerF64 = Regularizer<f64>;
pub type IsotonicProblemF64 = IsotonicProblem<f64>;
pub type IsotonicSolutionF64 = IsotonicSolution<f64>;
pub type OperatorSpecF64 = OperatorSpec<f64>;
pub type RelaxedOutputF64 = RelaxedOutput<f64>;
pub type LossConfigF64 = LossConfig<f64>;

pub type RegularizerF32 = Regularizer<f32>;
pub type OperatorSpecF32 = OperatorSpec<f32>;
pub type RelaxedOutputF32 = RelaxedOutput<f32>;
