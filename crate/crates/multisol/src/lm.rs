//! Trust-region Levenberg-Marquardt iteration on `Q(a) = ½‖F(a)‖²`, plus a
//! plain Newton baseline.
//!
//! Each iteration solves the shifted normal equations
//!
//! ```text
//! (JᵀJ + μI) s = -JᵀF
//! ```
//!
//! and accepts the step when the trust-region ratio
//! `r = (Q_old - Q_new) / (q(0) - q(s))` is at least `δ₁`. The shift
//! follows the schedule `μ ← 10μ` for `r < δ₁`, unchanged for
//! `δ₁ ≤ r ≤ δ₂`, and `μ ← 0.1μ` for `r > δ₂`. Iteration stops when both
//! `‖JᵀF‖ < ε` and `√Q < ε`, or when a failure criterion trips
//! (iteration cap, `μ` overflow, non-finite `Q`).

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::galerkin::NonlinearSystem;
use crate::RealScalar;

/// Solver constants. Defaults: `μ₀ = 0.01`, `δ₁ = 0.25`, `δ₂ = 0.75`,
/// `ε = 1e-13`, 500 iterations, `μ` overflow at `1e12`.
#[derive(Debug, Clone, Copy)]
pub struct LMConfig<T> {
    /// Initial shift `μ₀`.
    pub mu0: T,
    /// Acceptance / shrink threshold `δ₁`.
    pub delta1: T,
    /// Expansion threshold `δ₂`.
    pub delta2: T,
    /// First-order and residual tolerance `ε`.
    pub epsilon: T,
    /// Iteration cap.
    pub max_iters: usize,
    /// Divergence guard on the shift.
    pub mu_max: T,
}

impl<T: RealScalar> Default for LMConfig<T> {
    fn default() -> Self {
        Self {
            mu0: T::from_f64_lossy(0.01),
            delta1: T::from_f64_lossy(0.25),
            delta2: T::from_f64_lossy(0.75),
            epsilon: T::from_f64_lossy(1e-13),
            max_iters: 500,
            mu_max: T::from_f64_lossy(1e12),
        }
    }
}

impl<T: RealScalar> LMConfig<T> {
    /// Replace the stopping tolerance.
    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Replace the iteration cap.
    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone, Copy)]
pub struct IterRecord<T> {
    /// Iteration index.
    pub k: usize,
    /// `‖F(a_k)‖₂`.
    pub norm_f: T,
    /// `‖JᵀF(a_k)‖₂`.
    pub norm_g: T,
    /// Shift `μ_k` used for the step attempt.
    pub mu: T,
    /// Trust-region ratio (NaN on terminal rows where no step was tried).
    pub r: T,
    /// Whether the step was accepted.
    pub accepted: bool,
    /// `Q(a_k) = ½‖F‖²`.
    pub q: T,
    /// Seconds since the solve started.
    pub elapsed_s: f64,
}

/// Full per-iteration history of one solve.
#[derive(Debug, Clone)]
pub struct LMTrace<T> {
    /// One record per iteration, in order.
    pub records: Vec<IterRecord<T>>,
}

impl<T> Default for LMTrace<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<T: RealScalar> LMTrace<T> {
    /// Serialize as CSV with columns `k,normF,normg,mu,r,accepted,Q,elapsed_s`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,normF,normg,mu,r,accepted,Q,elapsed_s\n");
        for rec in &self.records {
            let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{},{:e},{:e}\n",
                rec.k,
                f(rec.norm_f),
                f(rec.norm_g),
                f(rec.mu),
                f(rec.r),
                rec.accepted,
                f(rec.q),
                rec.elapsed_s
            ));
        }
        out
    }

    /// `‖F‖` at iteration `k`, if the trace reached it.
    pub fn norm_f_at(&self, k: usize) -> Option<T> {
        self.records.iter().find(|r| r.k == k).map(|r| r.norm_f)
    }

    /// Smallest `‖F‖` over iterations `0..=k`.
    pub fn best_norm_f_through(&self, k: usize) -> Option<T> {
        self.records
            .iter()
            .filter(|r| r.k <= k)
            .map(|r| r.norm_f)
            .fold(None, |acc, v| match acc {
                None => Some(v),
                Some(b) => Some(if v < b { v } else { b }),
            })
    }
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Both stopping inequalities held.
    Converged,
    /// Iteration cap reached.
    MaxIters,
    /// Shift exceeded `mu_max`.
    MuOverflow,
    /// Residual norm exceeded the divergence guard / went non-finite.
    Diverged,
    /// Shifted normal matrix could not be factored after retries.
    LinearSolveFailure,
}

/// Final iterate, status, and history of one solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    /// Stopping reason.
    pub status: SolveStatus,
    /// Final iterate.
    pub solution: DVector<T>,
    /// Iteration history.
    pub trace: LMTrace<T>,
}

impl<T: RealScalar> SolveOutcome<T> {
    /// True when the solve converged.
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

fn is_finite<T: RealScalar>(x: T) -> bool {
    x.to_f64().map(f64::is_finite).unwrap_or(false)
}

/// Solve `(JᵀJ + μI) s = -g` by Cholesky, escalating the shift by
/// `μ' = max(μ, 1e-12)·10` for up to 5 retries if factorization fails.
fn step_from_normal<T: RealScalar>(
    normal: &DMatrix<T>,
    g: &DVector<T>,
    mu: T,
) -> Result<DVector<T>> {
    let n = normal.nrows();
    let floor = T::from_f64_lossy(1e-12);
    let ten = T::from_f64_lossy(10.0);
    let mut shift = mu;
    for _attempt in 0..=5 {
        let mut m = normal.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(-chol.solve(g));
        }
        shift = if shift > floor { shift } else { floor } * ten;
    }
    Err(Error::LinearSolveFailure)
}

/// The Levenberg-Marquardt step `s = -(JᵀJ + μI)⁻¹ JᵀF`.
pub fn lm_step<T: RealScalar>(j: &DMatrix<T>, f: &DVector<T>, mu: T) -> Result<DVector<T>> {
    let normal = j.tr_mul(j);
    let g = j.tr_mul(f);
    step_from_normal(&normal, &g, mu)
}

/// Trust-region ratio `r = (Q_old - Q_new) / model_decrease`.
///
/// A non-positive model decrease returns `-∞`, forcing rejection and a
/// shift increase.
pub fn ratio<T: RealScalar>(q_old: T, q_new: T, model_decrease: T) -> T {
    if model_decrease <= T::zero() {
        return T::from_f64_lossy(f64::NEG_INFINITY);
    }
    (q_old - q_new) / model_decrease
}

/// Shift schedule: `r < δ₁ → 10μ`, `δ₁ ≤ r ≤ δ₂ → μ`, `r > δ₂ → 0.1μ`.
pub fn update_mu<T: RealScalar>(mu: T, r: T, config: &LMConfig<T>) -> T {
    // NaN ratios (non-finite trial Q) land in the increase branch.
    if !(r >= config.delta1) {
        mu * T::from_f64_lossy(10.0)
    } else if r <= config.delta2 {
        mu
    } else {
        mu * T::from_f64_lossy(0.1)
    }
}

/// Run the trust-region Levenberg-Marquardt iteration from `a0`.
///
/// Works on any residual/Jacobian provider, so the same solver runs on
/// plain and deflated systems. Rejected steps keep the iterate, count as an
/// iteration, and retry with the increased shift.
pub fn lm_solve<T: RealScalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    a0: &DVector<T>,
    config: &LMConfig<T>,
) -> Result<SolveOutcome<T>> {
    if a0.len() != system.n_unknowns() {
        return Err(Error::DimensionMismatch {
            expected: system.n_unknowns(),
            got: a0.len(),
        });
    }
    let start = Instant::now();
    let half = T::from_f64_lossy(0.5);
    let nan = T::from_f64_lossy(f64::NAN);

    let mut trace = LMTrace::default();
    let mut a = a0.clone();
    let mut f = system.residual(&a)?;
    let mut mu = config.mu0;
    // Jacobian data is refreshed only after accepted steps.
    let mut jacobian_stale = true;
    let mut normal = DMatrix::zeros(0, 0);
    let mut g = DVector::zeros(0);

    let mut k = 0;
    loop {
        if jacobian_stale {
            let j = system.jacobian(&a)?;
            normal = j.tr_mul(&j);
            g = j.tr_mul(&f);
            jacobian_stale = false;
        }
        let q = f.norm_squared() * half;
        let norm_f = f.norm();
        let norm_g = g.norm();
        let elapsed_s = start.elapsed().as_secs_f64();

        let terminal = |status: SolveStatus, trace: &mut LMTrace<T>| {
            trace.records.push(IterRecord {
                k,
                norm_f,
                norm_g,
                mu,
                r: nan,
                accepted: false,
                q,
                elapsed_s,
            });
            SolveOutcome {
                status,
                solution: a.clone(),
                trace: std::mem::take(trace),
            }
        };

        if norm_g < config.epsilon && q.sqrt() < config.epsilon {
            return Ok(terminal(SolveStatus::Converged, &mut trace));
        }
        if !is_finite(q) {
            return Ok(terminal(SolveStatus::Diverged, &mut trace));
        }
        if k >= config.max_iters {
            return Ok(terminal(SolveStatus::MaxIters, &mut trace));
        }
        if mu > config.mu_max {
            return Ok(terminal(SolveStatus::MuOverflow, &mut trace));
        }

        let s = match step_from_normal(&normal, &g, mu) {
            Ok(s) => s,
            Err(Error::LinearSolveFailure) => {
                return Ok(terminal(SolveStatus::LinearSolveFailure, &mut trace));
            }
            Err(e) => return Err(e),
        };

        let trial = &a + &s;
        let f_trial = system.residual(&trial)?;
        let q_new = f_trial.norm_squared() * half;
        // Exact decrease of the quadratic model: -gᵀs - ½ sᵀ(JᵀJ)s.
        let model_decrease = -g.dot(&s) - s.dot(&(&normal * &s)) * half;
        let r = ratio(q, q_new, model_decrease);
        let accepted = r >= config.delta1;

        trace.records.push(IterRecord {
            k,
            norm_f,
            norm_g,
            mu,
            r,
            accepted,
            q,
            elapsed_s,
        });

        if accepted {
            a = trial;
            f = f_trial;
            jacobian_stale = true;
        }
        mu = update_mu(mu, r, config);
        k += 1;
    }
}

/// Plain Newton iteration `a ← a - J⁻¹F` (LU), kept as the comparison
/// baseline. Declares `Diverged` once `‖F‖₂ > 1e30`.
pub fn newton_solve<T: RealScalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    a0: &DVector<T>,
    max_iters: usize,
) -> Result<SolveOutcome<T>> {
    if a0.len() != system.n_unknowns() {
        return Err(Error::DimensionMismatch {
            expected: system.n_unknowns(),
            got: a0.len(),
        });
    }
    let start = Instant::now();
    let half = T::from_f64_lossy(0.5);
    let nan = T::from_f64_lossy(f64::NAN);
    let overflow = T::from_f64_lossy(1e30);
    let tol = T::from_f64_lossy(1e-13);

    let mut trace = LMTrace::default();
    let mut a = a0.clone();

    let mut k = 0;
    loop {
        let f = system.residual(&a)?;
        let norm_f = f.norm();
        let q = f.norm_squared() * half;
        let record = |accepted: bool, trace: &mut LMTrace<T>| {
            trace.records.push(IterRecord {
                k,
                norm_f,
                norm_g: nan,
                mu: T::zero(),
                r: nan,
                accepted,
                q,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        };

        let status = if norm_f > overflow || !is_finite(norm_f) {
            Some(SolveStatus::Diverged)
        } else if norm_f < tol {
            Some(SolveStatus::Converged)
        } else if k >= max_iters {
            Some(SolveStatus::MaxIters)
        } else {
            None
        };
        if let Some(status) = status {
            record(false, &mut trace);
            return Ok(SolveOutcome {
                status,
                solution: a,
                trace,
            });
        }

        let j = system.jacobian(&a)?;
        let step = match nalgebra::LU::new(j).solve(&f) {
            Some(step) => step,
            None => {
                record(false, &mut trace);
                return Ok(SolveOutcome {
                    status: SolveStatus::LinearSolveFailure,
                    solution: a,
                    trace,
                });
            }
        };
        record(true, &mut trace);
        a -= step;
        k += 1;
    }
}
