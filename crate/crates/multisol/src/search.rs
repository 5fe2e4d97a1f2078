//! Multi-solution search: solve, record, deflate, perturb, repeat.
//!
//! Each attempt runs the LM solver on the current (possibly deflated)
//! system. A converged iterate is re-verified against the *undeflated*
//! residual, deduplicated, stored, and added to the deflation set; the next
//! initial guess is a random perturbation of the newest root. The loop
//! stops at the solution cap, the attempt cap, or after a run of
//! consecutive failures.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::deflation::{DeflatedSystem, DeflationMode, DeflationSet};
use crate::error::Result;
use crate::galerkin::DiscreteSystem;
use crate::lm::{lm_solve, LMConfig, LMTrace, SolveStatus};
use crate::models::{apply_symmetry, SymmetryTransform};
use crate::RealScalar;

/// Stored roots must satisfy `‖F‖₂ ≤ 1e-9` on the undeflated system.
pub const VERIFY_TOL: f64 = 1e-9;

/// Budget of undeflated polish iterations before a candidate is rejected.
const POLISH_ITERS: usize = 5;

/// Search loop controls.
#[derive(Debug, Clone)]
pub struct SearchConfig<T> {
    /// Stop after this many stored solutions.
    pub max_solutions: usize,
    /// Total LM runs allowed.
    pub max_attempts: usize,
    /// Restart noise amplitude `σ`.
    pub perturb_scale: T,
    /// Relative duplicate threshold.
    pub dup_tol: T,
    /// Seed for the restart noise.
    pub rng_seed: u64,
    /// Stop after this many deflated runs fail in a row.
    pub consecutive_failures: usize,
    /// Restart from the original guess instead of perturbing the newest
    /// root.
    pub reuse_initial: bool,
    /// Full-product deflation or last-root-only.
    pub deflation_mode: DeflationMode,
}

impl<T: RealScalar> Default for SearchConfig<T> {
    fn default() -> Self {
        Self {
            max_solutions: 25,
            max_attempts: 60,
            perturb_scale: T::from_f64_lossy(0.5),
            dup_tol: T::from_f64_lossy(1e-6),
            rng_seed: 0,
            consecutive_failures: 5,
            reuse_initial: false,
            deflation_mode: DeflationMode::FullProduct,
        }
    }
}

/// How a stored root was first reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscoveredBy {
    /// Found on the undeflated system.
    Direct,
    /// Found on a deflated system.
    Deflated,
    /// Produced by a symmetry transform of another root.
    Symmetry,
}

impl DiscoveredBy {
    /// Lowercase name used in run logs and summaries.
    pub fn name(&self) -> &'static str {
        match self {
            DiscoveredBy::Direct => "direct",
            DiscoveredBy::Deflated => "deflated",
            DiscoveredBy::Symmetry => "symmetry",
        }
    }
}

/// One deduplicated root with its provenance.
#[derive(Debug, Clone)]
pub struct SolutionRecord<T> {
    /// Modal coefficients.
    pub coefficients: DVector<T>,
    /// `‖F‖₂` re-evaluated on the undeflated system.
    pub residual_norm: T,
    /// Iterations spent by the run that found it.
    pub iterations: usize,
    /// Attempt number (1-based); 0 for symmetry images.
    pub attempt_index: usize,
    /// Which initial guess led here.
    pub initial_guess_id: String,
    /// Discovery channel.
    pub discovered_by: DiscoveredBy,
}

/// Deduplicated solutions in discovery order.
#[derive(Debug, Clone)]
pub struct SolutionSet<T> {
    /// Stored records.
    pub records: Vec<SolutionRecord<T>>,
}

impl<T> Default for SolutionSet<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<T: RealScalar> SolutionSet<T> {
    /// Number of stored solutions.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// True when nothing is stored.
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Relative duplicate test: true iff some stored root `r` satisfies
/// `‖candidate - r‖₂ / (1 + ‖r‖₂) < dup_tol`.
pub fn is_duplicate<T: RealScalar>(
    candidate: &DVector<T>,
    set: &SolutionSet<T>,
    dup_tol: T,
) -> bool {
    set.records.iter().any(|rec| {
        let dist = (candidate - &rec.coefficients).norm();
        dist / (T::one() + rec.coefficients.norm()) < dup_tol
    })
}

/// Random restart: `root + u` with `u` uniform in `[-σ, σ]` per entry,
/// scaled by `(1 + ‖root‖∞) / (N+1)`.
pub fn perturb<T: RealScalar>(
    root: &DVector<T>,
    sigma: T,
    modes_1d: usize,
    rng: &mut ChaCha8Rng,
) -> DVector<T> {
    let inf_norm = root
        .iter()
        .map(|v| v.abs())
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc });
    let scale = (T::one() + inf_norm) / T::from_usize(modes_1d).unwrap();
    let sig = sigma.to_f64().unwrap_or(0.0);
    DVector::from_fn(root.len(), |i, _| {
        let noise = T::from_f64_lossy(rng.gen_range(-sig..=sig));
        root[i] + noise * scale
    })
}

/// Per-attempt entry of the machine-readable run log.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AttemptRecord {
    /// Attempt number, 1-based.
    pub attempt: usize,
    /// Initial guess used.
    pub initial_guess_id: String,
    /// Number of roots deflated during this run.
    pub deflated_roots: usize,
    /// Solver status.
    pub status: String,
    /// Iterations spent.
    pub iterations: usize,
    /// Final residual norm on the (possibly deflated) system solved.
    pub final_norm: f64,
    /// Undeflated residual norm of the final iterate (after polish).
    pub verified_norm: Option<f64>,
    /// What happened: stored / duplicate / not-a-root.
    pub outcome: String,
}

/// Everything a search produced.
#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    /// Deduplicated solutions.
    pub set: SolutionSet<T>,
    /// One record per attempt.
    pub attempts: Vec<AttemptRecord>,
    /// Solver trace per attempt, aligned with `attempts`.
    pub traces: Vec<LMTrace<T>>,
}

fn status_name(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIters => "max-iters",
        SolveStatus::MuOverflow => "mu-overflow",
        SolveStatus::Diverged => "diverged",
        SolveStatus::LinearSolveFailure => "linear-solve-failure",
    }
}

/// Run the deflated multi-solution search.
pub fn search<T: RealScalar>(
    sys: &DiscreteSystem<T>,
    a0: &DVector<T>,
    cfg: &SearchConfig<T>,
    lmcfg: &LMConfig<T>,
) -> Result<SearchOutcome<T>> {
    let verify_tol = T::from_f64_lossy(VERIFY_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let modes_1d = sys.degree_cap() + 1;

    let mut deflation = DeflationSet::new().with_mode(cfg.deflation_mode);
    let mut set = SolutionSet::default();
    let mut attempts = Vec::new();
    let mut traces = Vec::new();
    let mut guess = a0.clone();
    let mut guess_id = String::from("a0");
    let mut consecutive = 0usize;

    for attempt in 1..=cfg.max_attempts {
        if set.len() >= cfg.max_solutions || consecutive >= cfg.consecutive_failures {
            break;
        }

        let deflated_roots = deflation.len();
        let out = if deflation.is_empty() {
            lm_solve(sys, &guess, lmcfg)?
        } else {
            let wrapped = DeflatedSystem::new(sys, &deflation);
            lm_solve(&wrapped, &guess, lmcfg)?
        };
        let iterations = out.trace.records.len();
        let final_norm = out
            .trace
            .records
            .last()
            .map(|r| r.norm_f.to_f64().unwrap_or(f64::NAN))
            .unwrap_or(f64::NAN);

        // The inner iteration may exit through its failure criterion with
        // the iterate parked at the residual floor (on deflated systems the
        // first-order test cannot fire: the factor gradient amplifies the
        // gradient noise floor well above epsilon). Whether a solution was
        // found is decided by a separate convergence threshold on the
        // undeflated residual of the final iterate.
        let mut candidate = out.solution;
        let mut norm = sys.residual(&candidate)?.norm();
        if norm > verify_tol {
            // A short undeflated polish closes the gap the deflation
            // factor may have hidden.
            let polish_cfg = lmcfg.with_max_iters(POLISH_ITERS);
            let polished = lm_solve(sys, &candidate, &polish_cfg)?;
            let polished_norm = sys.residual(&polished.solution)?.norm();
            if polished_norm < norm {
                candidate = polished.solution;
                norm = polished_norm;
            }
        }
        let verified_norm = Some(norm.to_f64().unwrap_or(f64::NAN));

        let outcome;
        if norm > verify_tol {
            outcome = "not-a-root";
            consecutive += 1;
        } else if is_duplicate(&candidate, &set, cfg.dup_tol) {
            outcome = "duplicate";
            consecutive += 1;
        } else {
            set.records.push(SolutionRecord {
                coefficients: candidate.clone(),
                residual_norm: norm,
                iterations,
                attempt_index: attempt,
                initial_guess_id: guess_id.clone(),
                discovered_by: if deflated_roots == 0 {
                    DiscoveredBy::Direct
                } else {
                    DiscoveredBy::Deflated
                },
            });
            deflation.push(candidate);
            outcome = "stored";
            consecutive = 0;
        }

        attempts.push(AttemptRecord {
            attempt,
            initial_guess_id: guess_id.clone(),
            deflated_roots,
            status: status_name(out.status).into(),
            iterations,
            final_norm,
            verified_norm,
            outcome: outcome.into(),
        });
        traces.push(out.trace);

        // Next guess: perturb the newest root (or the original guess while
        // none exist), unless configured to always reuse the original.
        if cfg.reuse_initial {
            guess = a0.clone();
            guess_id = String::from("a0");
        } else if let Some(last) = set.records.last() {
            guess = perturb(&last.coefficients, cfg.perturb_scale, modes_1d, &mut rng);
            guess_id = format!("perturb-of-{}", set.len());
        } else {
            guess = perturb(a0, cfg.perturb_scale, modes_1d, &mut rng);
            guess_id = String::from("perturb-of-a0");
        }
    }

    Ok(SearchOutcome {
        set,
        attempts,
        traces,
    })
}

/// Apply each declared symmetry to each stored root, polish with a short
/// undeflated LM run, and append verified non-duplicates tagged
/// [`DiscoveredBy::Symmetry`].
pub fn expand_by_symmetry<T: RealScalar>(
    set: &mut SolutionSet<T>,
    sys: &DiscreteSystem<T>,
    transforms: &[SymmetryTransform],
    lmcfg: &LMConfig<T>,
    dup_tol: T,
) -> Result<usize> {
    let verify_tol = T::from_f64_lossy(VERIFY_TOL);
    let polish_cfg = lmcfg.with_max_iters(POLISH_ITERS);
    let mut added = 0;
    let original = set.records.len();
    for idx in 0..original {
        for transform in transforms {
            let image = apply_symmetry(sys, transform, &set.records[idx].coefficients)?;
            let polished = lm_solve(sys, &image, &polish_cfg)?;
            let candidate = polished.solution;
            let norm = sys.residual(&candidate)?.norm();
            if norm <= verify_tol && !is_duplicate(&candidate, set, dup_tol) {
                set.records.push(SolutionRecord {
                    coefficients: candidate,
                    residual_norm: norm,
                    iterations: polished.trace.records.len(),
                    attempt_index: 0,
                    initial_guess_id: format!("symmetry-of-{}", idx + 1),
                    discovered_by: DiscoveredBy::Symmetry,
                });
                added += 1;
            }
        }
    }
    Ok(added)
}
