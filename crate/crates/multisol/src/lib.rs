//! Finds multiple steady states of coupled semilinear elliptic systems.
//!
//! The pipeline has three stages:
//!
//! 1. a Legendre spectral-Galerkin discretization with boundary-adapted
//!    modal bases turns the system into a nonlinear algebraic map `F(a) = 0`
//!    over expansion coefficients ([`galerkin`], [`legendre`], [`basis`]),
//! 2. a trust-region Levenberg-Marquardt iteration solves the nonlinear
//!    least-squares problem `min ½‖F(a)‖²` using first derivatives only
//!    ([`lm`]),
//! 3. multiplicative deflation of already-found roots lets the same
//!    iteration discover further distinct solutions ([`deflation`],
//!    [`search`]).
//!
//! [`models`] ships ready-made reaction-diffusion and elliptic benchmark
//! systems (Schnakenberg, Gray-Scott, two noncooperative systems, and a
//! two-component Bose-Einstein condensate model). [`config`] and [`report`]
//! provide the file-based run configuration and result persistence used by
//! the CLI.
//!
//! All numerical kernels are generic over the scalar type through
//! [`RealScalar`]; concrete `f64` aliases live at the crate root.

pub mod basis;
pub mod config;
pub mod deflation;
pub mod error;
pub mod galerkin;
pub mod legendre;
pub mod lm;
pub mod models;
pub mod report;
pub mod search;
pub mod validate;

use std::iter::Sum;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use basis::{make_basis, operators_1d, Basis1D, BasisKind, OperatorPair1D};
pub use config::{parse_config, IgPreset, InitialGuess, RunConfig};
pub use deflation::{DeflatedSystem, DeflationMode, DeflationNorm, DeflationSet};
pub use error::Error;
pub use galerkin::{
    assemble, assemble_with_oversample, DiscreteSystem, NonlinearSystem, ProblemDef,
};
pub use lm::{
    lm_solve, lm_step, newton_solve, ratio, update_mu, LMConfig, LMTrace, SolveOutcome,
    SolveStatus,
};
pub use models::{apply_symmetry, ModelId, ModelSpec, SymmetryTransform};
pub use search::{
    expand_by_symmetry, is_duplicate, perturb, search, SearchConfig, SearchOutcome,
    SolutionRecord, SolutionSet,
};

/// Scalar type accepted by every numerical kernel in this crate.
///
/// `f32` and `f64` satisfy the bound. The `FromPrimitive`/`ToPrimitive`
/// half pulls model parameters and tolerances in and out of the generic
/// code; `RealField` supplies the field operations nalgebra needs.
pub trait RealScalar:
    RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync
{
    /// Shorthand for lossy conversion from `f64` literals.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }
}

impl<T> RealScalar for T where
    T: RealField + FromPrimitive + ToPrimitive + Copy + Sum + Send + Sync
{
}

/// Default scalar used by the CLI, presets, and acceptance tooling.
pub type Real = f64;

/// Dynamically sized coefficient / residual vector.
///
/// Layout for an assembled system: fields concatenated; within a field in
/// 2D the x-index varies fastest, i.e. entry `k + (N+1)·j` holds the
/// coefficient of `φ_k(x) φ_j(y)`.
pub type CoeffVector<T> = nalgebra::DVector<T>;

/// Dense matrix alias used for Jacobians and operator blocks.
pub type DenseMatrix<T> = nalgebra::DMatrix<T>;

/// Concrete `f64` coefficient vector.
pub type CoeffVector64 = CoeffVector<Real>;

/// Concrete `f64` dense matrix.
pub type DenseMatrix64 = DenseMatrix<Real>;
