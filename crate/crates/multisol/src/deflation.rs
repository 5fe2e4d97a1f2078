//! Multiplicative deflation of known roots.
//!
//! With roots `r_1..r_m` the deflated residual is `F̂(a) = η(a) F(a)` where
//!
//! ```text
//! η(a) = Π_i (‖a - r_i‖^{-p} + α)
//! ```
//!
//! With `α ≥ 1` the factor never drops below 1, so `F̂` keeps every other
//! root of `F`, while `η → ∞` near a deflated root prevents the solver from
//! converging there again. The Jacobian of the deflated system is the
//! rank-one update `Ĵ = η J + F ∇ηᵀ`, with `∇η` from logarithmic
//! differentiation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::galerkin::NonlinearSystem;
use crate::RealScalar;

/// Distance below which evaluation counts as "at a deflated root".
const ROOT_DISTANCE_GUARD: f64 = 1e-14;

/// Which deflated roots enter the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeflationMode {
    /// Product over every recorded root.
    FullProduct,
    /// Only the most recently added root, a cheaper variant that relies on
    /// perturbed restarts to avoid older roots.
    LastRootOnly,
}

/// Norm used inside the deflation factor. Currently only the Euclidean
/// norm of the coefficient vector; a mass-weighted norm is a possible
/// extension slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeflationNorm {
    /// Plain Euclidean distance between coefficient vectors.
    CoeffEuclidean,
}

/// A set of deflated roots plus the factor parameters `p` and `α`.
#[derive(Debug, Clone)]
pub struct DeflationSet<T> {
    roots: Vec<DVector<T>>,
    exponent: T,
    shift: T,
    mode: DeflationMode,
    norm: DeflationNorm,
}

impl<T: RealScalar> Default for DeflationSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: RealScalar> DeflationSet<T> {
    /// Empty set with `p = 2`, `α = 1`, full-product deflation.
    pub fn new() -> Self {
        Self {
            roots: Vec::new(),
            exponent: T::from_f64_lossy(2.0),
            shift: T::one(),
            mode: DeflationMode::FullProduct,
            norm: DeflationNorm::CoeffEuclidean,
        }
    }

    /// Replace the deflation exponent `p ≥ 1`.
    pub fn with_exponent(mut self, p: T) -> Self {
        assert!(p >= T::one(), "deflation exponent must be at least 1");
        self.exponent = p;
        self
    }

    /// Replace the shift `α ≥ 0`.
    pub fn with_shift(mut self, alpha: T) -> Self {
        assert!(alpha >= T::zero(), "deflation shift must be nonnegative");
        self.shift = alpha;
        self
    }

    /// Replace the deflation mode.
    pub fn with_mode(mut self, mode: DeflationMode) -> Self {
        self.mode = mode;
        self
    }

    /// Norm variant in use.
    pub fn norm(&self) -> DeflationNorm {
        self.norm
    }

    /// Deflation exponent `p`.
    pub fn exponent(&self) -> T {
        self.exponent
    }

    /// Shift `α`.
    pub fn shift(&self) -> T {
        self.shift
    }

    /// Record a new root.
    pub fn push(&mut self, root: DVector<T>) {
        self.roots.push(root);
    }

    /// All recorded roots.
    pub fn roots(&self) -> &[DVector<T>] {
        &self.roots
    }

    /// Number of recorded roots.
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    /// True when no roots are recorded.
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    fn active_roots(&self) -> &[DVector<T>] {
        match self.mode {
            DeflationMode::FullProduct => &self.roots,
            DeflationMode::LastRootOnly => {
                let n = self.roots.len();
                &self.roots[n.saturating_sub(1)..]
            }
        }
    }

    /// The scalar deflation factor `η(a)`. Empty set gives 1.
    pub fn factor(&self, a: &DVector<T>) -> Result<T> {
        let guard = T::from_f64_lossy(ROOT_DISTANCE_GUARD);
        let mut eta = T::one();
        for root in self.active_roots() {
            let dist = (a - root).norm();
            if dist < guard {
                return Err(Error::AtDeflatedRoot);
            }
            eta *= dist.powf(-self.exponent) + self.shift;
        }
        Ok(eta)
    }

    /// Analytic gradient `∇η(a)`, via logarithmic differentiation:
    /// `∇η = η Σ_i [-p ‖a-r_i‖^{-p-2} (a - r_i)] / (‖a-r_i‖^{-p} + α)`.
    pub fn gradient_factor(&self, a: &DVector<T>) -> Result<DVector<T>> {
        let (_, grad) = self.factor_with_gradient(a)?;
        Ok(grad)
    }

    /// `η(a)` and `∇η(a)` in one pass.
    pub fn factor_with_gradient(&self, a: &DVector<T>) -> Result<(T, DVector<T>)> {
        let guard = T::from_f64_lossy(ROOT_DISTANCE_GUARD);
        let two = T::from_f64_lossy(2.0);
        let mut eta = T::one();
        let mut log_grad = DVector::zeros(a.len());
        for root in self.active_roots() {
            let diff = a - root;
            let dist = diff.norm();
            if dist < guard {
                return Err(Error::AtDeflatedRoot);
            }
            let inv_pow = dist.powf(-self.exponent);
            let term = inv_pow + self.shift;
            eta *= term;
            let coeff = -self.exponent * dist.powf(-self.exponent - two) / term;
            log_grad.axpy(coeff, &diff, T::one());
        }
        Ok((eta, log_grad * eta))
    }

    /// The deflated residual `F̂ = η(a) F`.
    pub fn deflated_residual(&self, f: &DVector<T>, a: &DVector<T>) -> Result<DVector<T>> {
        Ok(f * self.factor(a)?)
    }

    /// The deflated Jacobian `Ĵ = η J + F ∇ηᵀ`.
    pub fn deflated_jacobian(
        &self,
        f: &DVector<T>,
        j: &DMatrix<T>,
        a: &DVector<T>,
    ) -> Result<DMatrix<T>> {
        let (eta, grad) = self.factor_with_gradient(a)?;
        let mut out = j * eta;
        out.ger(T::one(), f, &grad, T::one());
        Ok(out)
    }
}

/// A residual provider with deflation applied, runnable by the same solver
/// as the base system.
pub struct DeflatedSystem<'a, T, S: ?Sized> {
    base: &'a S,
    deflation: &'a DeflationSet<T>,
}

impl<'a, T: RealScalar, S: NonlinearSystem<T> + ?Sized> DeflatedSystem<'a, T, S> {
    /// Wrap `base` with the deflated roots in `deflation`.
    pub fn new(base: &'a S, deflation: &'a DeflationSet<T>) -> Self {
        Self { base, deflation }
    }
}

impl<'a, T: RealScalar, S: NonlinearSystem<T> + ?Sized> NonlinearSystem<T>
    for DeflatedSystem<'a, T, S>
{
    fn n_unknowns(&self) -> usize {
        self.base.n_unknowns()
    }

    fn residual(&self, a: &DVector<T>) -> Result<DVector<T>> {
        let f = self.base.residual(a)?;
        self.deflation.deflated_residual(&f, a)
    }

    fn jacobian(&self, a: &DVector<T>) -> Result<DMatrix<T>> {
        let f = self.base.residual(a)?;
        let j = self.base.jacobian(a)?;
        self.deflation.deflated_jacobian(&f, &j, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn unit_root(dim: usize, value: f64) -> DVector<f64> {
        DVector::from_element(dim, value)
    }

    #[test]
    fn empty_product_is_one() {
        let defl = DeflationSet::<f64>::new();
        let a = DVector::from_vec(vec![0.3, -0.7]);
        assert_abs_diff_eq!(defl.factor(&a).unwrap(), 1.0);
        assert!(defl.gradient_factor(&a).unwrap().norm() == 0.0);
    }

    #[test]
    fn single_and_double_root_factors() {
        let dim = 4;
        let mut defl = DeflationSet::new();
        defl.push(DVector::zeros(dim));
        // Distance 1 from the origin root: η = 1 + 1 = 2.
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(defl.factor(&a).unwrap(), 2.0, epsilon = 1e-14);

        // Second root at distance 2: η = 2 · (1/4 + 1) = 2.5.
        let mut far = DVector::zeros(dim);
        far[0] = 3.0;
        defl.push(far);
        assert_abs_diff_eq!(defl.factor(&a).unwrap(), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dim = 6;
        let mut defl = DeflationSet::new();
        defl.push(DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)));
        defl.push(DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)));
        for _ in 0..5 {
            let a = DVector::from_fn(dim, |_, _| rng.gen_range(2.0..3.0_f64));
            let grad = defl.gradient_factor(&a).unwrap();
            let mut fd = DVector::zeros(dim);
            let mut probe = a.clone();
            for jj in 0..dim {
                let h = 1e-6 * (1.0 + a[jj].abs());
                probe[jj] = a[jj] + h;
                let fp = defl.factor(&probe).unwrap();
                probe[jj] = a[jj] - h;
                let fm = defl.factor(&probe).unwrap();
                probe[jj] = a[jj];
                fd[jj] = (fp - fm) / (2.0 * h);
            }
            assert!((grad - &fd).norm() / fd.norm() <= 1e-6);
        }
    }

    #[test]
    fn gradient_is_odd_around_single_root() {
        let mut defl = DeflationSet::new();
        let r = unit_root(3, 0.5);
        defl.push(r.clone());
        let a = DVector::from_vec(vec![1.0, 0.2, 0.9]);
        let reflected = &r * 2.0 - &a;
        let g1 = defl.gradient_factor(&a).unwrap();
        let g2 = defl.gradient_factor(&reflected).unwrap();
        assert!((g1 + g2).norm() < 1e-12);
    }

    #[test]
    fn residual_preserved_at_other_roots() {
        // F with roots at 1 and 2 (componentwise), deflate the root at 1.
        let r1 = unit_root(2, 1.0);
        let r2 = unit_root(2, 2.0);
        let f_at = |a: &DVector<f64>| {
            DVector::from_fn(2, |i, _| (a[i] - r1[i]) * (a[i] - r2[i]))
        };
        let mut defl = DeflationSet::new();
        defl.push(r1.clone());
        // At the second root the deflated residual is exactly zero.
        let f2 = f_at(&r2);
        let def2 = defl.deflated_residual(&f2, &r2).unwrap();
        assert!(def2.norm() == 0.0);
        // Near the deflated root the deflated residual stays bounded away
        // from zero along the approach segment.
        let mut min_norm = f64::INFINITY;
        for t in 1..200 {
            let a = &r1 * (1.0 - t as f64 * 1e-4) + &r2 * (t as f64 * 1e-4);
            let fd = defl.deflated_residual(&f_at(&a), &a).unwrap();
            min_norm = min_norm.min(fd.norm());
        }
        assert!(min_norm >= 1e-3);
    }

    #[test]
    fn factor_blows_up_at_rate_two_k() {
        let mut defl = DeflationSet::new();
        defl.push(DVector::zeros(3));
        for k in 1..=5 {
            let d = 10f64.powi(-k);
            let a = DVector::from_vec(vec![d, 0.0, 0.0]);
            let eta = defl.factor(&a).unwrap();
            assert!(eta >= 10f64.powi(2 * k));
        }
    }

    #[test]
    fn factor_at_least_one_everywhere() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let mut defl = DeflationSet::new();
        for _ in 0..4 {
            defl.push(DVector::from_fn(5, |_, _| rng.gen_range(-2.0..2.0)));
        }
        for _ in 0..100 {
            let a = DVector::from_fn(5, |_, _| rng.gen_range(-3.0..3.0));
            if let Ok(eta) = defl.factor(&a) {
                assert!(eta >= 1.0);
            }
        }
    }

    #[test]
    fn at_deflated_root_is_an_error() {
        let mut defl = DeflationSet::new();
        let r = unit_root(2, 0.3);
        defl.push(r.clone());
        assert!(matches!(defl.factor(&r), Err(Error::AtDeflatedRoot)));
        assert!(matches!(
            defl.gradient_factor(&r),
            Err(Error::AtDeflatedRoot)
        ));
    }

    #[test]
    fn deflated_jacobian_is_rank_one_update() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let dim = 5;
        let mut defl = DeflationSet::new();
        defl.push(DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)));
        let a = DVector::from_fn(dim, |_, _| rng.gen_range(1.5..2.5));
        let f = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let j = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let eta = defl.factor(&a).unwrap();
        let jd = defl.deflated_jacobian(&f, &j, &a).unwrap();
        let diff = jd - &j * eta;
        let svd = diff.svd(false, false);
        let top = f64::max(svd.singular_values[0], 1.0);
        // Everything beyond the first singular value is numerically zero.
        for i in 1..dim {
            assert!(svd.singular_values[i] < 1e-12 * top);
        }
        // At a point where F = 0 the update vanishes: Ĵ = ηJ exactly.
        let zero_f = DVector::zeros(dim);
        let jd0 = defl.deflated_jacobian(&zero_f, &j, &a).unwrap();
        assert_eq!(jd0, &j * eta);
    }

    #[test]
    fn deflated_system_jacobian_matches_fd() {
        // Wrap a small nonlinear provider and compare against central
        // differences of the wrapped residual.
        struct Quad;
        impl NonlinearSystem<f64> for Quad {
            fn n_unknowns(&self) -> usize {
                3
            }
            fn residual(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
                Ok(DVector::from_vec(vec![
                    a[0] * a[0] - 1.0,
                    a[1] * a[2] + 0.5,
                    a[2] - a[0] * a[1],
                ]))
            }
            fn jacobian(&self, a: &DVector<f64>) -> Result<DMatrix<f64>> {
                Ok(DMatrix::from_row_slice(
                    3,
                    3,
                    &[
                        2.0 * a[0],
                        0.0,
                        0.0,
                        0.0,
                        a[2],
                        a[1],
                        -a[1],
                        -a[0],
                        1.0,
                    ],
                ))
            }
        }
        let mut defl = DeflationSet::new();
        defl.push(DVector::from_vec(vec![1.0, 0.5, -1.0]));
        let sys = DeflatedSystem::new(&Quad, &defl);
        let a = DVector::from_vec(vec![0.3, -0.4, 0.8]);
        let j = sys.jacobian(&a).unwrap();
        let fd = crate::validate::fd_jacobian(&sys, &a).unwrap();
        assert!((j - &fd).norm() / fd.norm() <= 1e-6);
    }

    #[test]
    fn last_root_only_mode_uses_one_factor() {
        let mut defl = DeflationSet::new().with_mode(DeflationMode::LastRootOnly);
        defl.push(unit_root(2, 0.0));
        defl.push(unit_root(2, 10.0));
        // Distance to the *last* root is 9·√2; the first root is ignored,
        // so η stays close to 1 even right next to it.
        let a = unit_root(2, 1.0);
        let eta = defl.factor(&a).unwrap();
        let d = (&a - unit_root(2, 10.0)).norm();
        assert_abs_diff_eq!(eta, d.powi(-2) + 1.0, epsilon = 1e-14);
    }
}
