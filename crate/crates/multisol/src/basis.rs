//! Boundary-adapted modal bases on a mapped interval.
//!
//! Both families combine two Legendre polynomials so that every basis
//! function satisfies the boundary conditions exactly:
//!
//! * Dirichlet: `φ_k = L_k - L_{k+2}`, so `φ_k(±1) = 0`;
//! * no-flux:   `φ_k = L_k - [k(k+1) / ((k+2)(k+3))] L_{k+2}`, so
//!   `φ'_k(±1) = 0`, with `φ_0 = L_0 = 1` keeping the constant mode.
//!
//! Physical intervals `(a, b)` are mapped affinely onto the reference
//! interval `[-1, 1]`; stiffness picks up a factor `2/ℓ` and mass `ℓ/2`
//! with `ℓ = b - a`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::legendre::{eval_legendre_all, lgl_rule};
use crate::RealScalar;

/// Boundary condition family baked into the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Basis functions vanish at both endpoints.
    Dirichlet,
    /// Basis derivatives vanish at both endpoints; contains constants.
    NoFlux,
}

/// A 1D modal basis `φ_0..φ_N` with its LGL quadrature on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Basis1D<T> {
    kind: BasisKind,
    degree_cap: usize,
    interval: (T, T),
    nodes: DVector<T>,
    weights: DVector<T>,
}

impl<T: RealScalar> Basis1D<T> {
    /// Boundary condition family.
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Highest modal index `N`; the basis has `N + 1` functions.
    pub fn degree_cap(&self) -> usize {
        self.degree_cap
    }

    /// Number of basis functions, `N + 1`.
    pub fn len(&self) -> usize {
        self.degree_cap + 1
    }

    /// Always false; a valid basis has at least 3 functions.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical interval `(lo, hi)`.
    pub fn interval(&self) -> (T, T) {
        self.interval
    }

    /// Physical interval length `ℓ`.
    pub fn length(&self) -> T {
        self.interval.1 - self.interval.0
    }

    /// LGL nodes on the reference interval, strictly increasing.
    pub fn nodes(&self) -> &DVector<T> {
        &self.nodes
    }

    /// LGL weights matching [`Basis1D::nodes`].
    pub fn weights(&self) -> &DVector<T> {
        &self.weights
    }

    /// Map a physical coordinate into `[-1, 1]`.
    pub fn to_reference(&self, x: T) -> T {
        let two = T::from_f64_lossy(2.0);
        (x - self.interval.0) * two / self.length() - T::one()
    }

    /// Map a reference coordinate into the physical interval.
    pub fn from_reference(&self, xi: T) -> T {
        let half = T::from_f64_lossy(0.5);
        self.interval.0 + (xi + T::one()) * half * self.length()
    }

    /// Coefficient of `L_{k+2}` in `φ_k`.
    fn coupling(&self, k: usize) -> T {
        match self.kind {
            BasisKind::Dirichlet => T::one(),
            BasisKind::NoFlux => {
                let kf = T::from_usize(k).unwrap();
                let k1 = T::from_usize(k + 1).unwrap();
                let k2 = T::from_usize(k + 2).unwrap();
                let k3 = T::from_usize(k + 3).unwrap();
                kf * k1 / (k2 * k3)
            }
        }
    }

    /// Values and reference-coordinate derivatives of all `φ_k` at `xi`.
    pub fn eval_all(&self, xi: T) -> (Vec<T>, Vec<T>) {
        let n = self.degree_cap;
        let (lv, ld) = eval_legendre_all(n + 2, xi);
        let mut vals = Vec::with_capacity(n + 1);
        let mut ders = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let c = self.coupling(k);
            vals.push(lv[k] - c * lv[k + 2]);
            ders.push(ld[k] - c * ld[k + 2]);
        }
        (vals, ders)
    }

    /// Value and reference-coordinate derivative of `φ_k` at `xi`.
    pub fn eval(&self, k: usize, xi: T) -> (T, T) {
        let (vals, ders) = self.eval_all(xi);
        (vals[k], ders[k])
    }

    /// Matrix of basis values at arbitrary reference points; entry `(m, k)`
    /// is `φ_k(points[m])`.
    pub fn value_matrix_at(&self, points: &[T]) -> DMatrix<T> {
        let mut mat = DMatrix::zeros(points.len(), self.len());
        for (m, &xi) in points.iter().enumerate() {
            let (vals, _) = self.eval_all(xi);
            for (k, v) in vals.into_iter().enumerate() {
                mat[(m, k)] = v;
            }
        }
        mat
    }
}

/// Stiffness, mass, and node-evaluation matrices of a basis, scaled to its
/// physical interval.
#[derive(Debug, Clone)]
pub struct OperatorPair1D<T> {
    /// `A_kj = ∫ φ'_j φ'_k dx` over the physical interval.
    pub stiffness: DMatrix<T>,
    /// `B_kj = ∫ φ_j φ_k dx` over the physical interval.
    pub mass: DMatrix<T>,
    /// `T_mk = φ_k(node_m)` at the basis's own LGL nodes.
    pub eval_matrix: DMatrix<T>,
}

/// Build a boundary-adapted basis of degree cap `N ≥ 2` on `interval`.
pub fn make_basis<T: RealScalar>(
    kind: BasisKind,
    n: usize,
    interval: (T, T),
) -> Result<Basis1D<T>> {
    if n < 2 {
        return Err(Error::InvalidDegree(n));
    }
    assert!(
        interval.1 > interval.0,
        "basis interval must be nondegenerate"
    );
    let (nodes, weights) = lgl_rule(n)?;
    Ok(Basis1D {
        kind,
        degree_cap: n,
        interval,
        nodes,
        weights,
    })
}

/// Assemble the stiffness/mass/evaluation matrices of `basis`.
///
/// Entries are polynomials of degree at most `2N + 4`, so an internal LGL
/// rule with `N + 5` points integrates them exactly. The upper triangle is
/// computed and mirrored, making both matrices symmetric bit-for-bit.
pub fn operators_1d<T: RealScalar>(basis: &Basis1D<T>) -> OperatorPair1D<T> {
    let n = basis.degree_cap;
    let (qn, qw) = lgl_rule::<T>(n + 4).expect("internal quadrature rule");
    let m = qn.len();

    // Basis values/derivatives at the internal quadrature points.
    let mut vals = DMatrix::zeros(m, n + 1);
    let mut ders = DMatrix::zeros(m, n + 1);
    for q in 0..m {
        let (v, d) = basis.eval_all(qn[q]);
        for k in 0..=n {
            vals[(q, k)] = v[k];
            ders[(q, k)] = d[k];
        }
    }

    let two = T::from_f64_lossy(2.0);
    let len = basis.length();
    let stiff_scale = two / len;
    let mass_scale = len / two;

    let mut stiffness = DMatrix::zeros(n + 1, n + 1);
    let mut mass = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        for j in k..=n {
            let mut a = T::zero();
            let mut b = T::zero();
            for q in 0..m {
                a += qw[q] * ders[(q, k)] * ders[(q, j)];
                b += qw[q] * vals[(q, k)] * vals[(q, j)];
            }
            let a = a * stiff_scale;
            let b = b * mass_scale;
            stiffness[(k, j)] = a;
            stiffness[(j, k)] = a;
            mass[(k, j)] = b;
            mass[(j, k)] = b;
        }
    }

    let node_points: Vec<T> = basis.nodes.iter().copied().collect();
    let eval_matrix = basis.value_matrix_at(&node_points);

    OperatorPair1D {
        stiffness,
        mass,
        eval_matrix,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference(kind: BasisKind, n: usize) -> Basis1D<f64> {
        make_basis(kind, n, (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn dirichlet_vanishes_at_endpoints() {
        let basis = reference(BasisKind::Dirichlet, 10);
        for &xi in &[-1.0, 1.0] {
            let (vals, _) = basis.eval_all(xi);
            for v in vals {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn noflux_derivative_vanishes_at_endpoints() {
        let basis = reference(BasisKind::NoFlux, 10);
        for &xi in &[-1.0, 1.0] {
            let (_, ders) = basis.eval_all(xi);
            for d in ders {
                assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn noflux_mode_zero_is_constant_one() {
        let basis = reference(BasisKind::NoFlux, 6);
        for &xi in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
            let (v, d) = basis.eval(0, xi);
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_degree_rejected() {
        assert!(matches!(
            make_basis::<f64>(BasisKind::Dirichlet, 1, (-1.0, 1.0)),
            Err(Error::InvalidDegree(1))
        ));
    }

    #[test]
    fn dirichlet_reference_stiffness_is_diagonal_4k_plus_6() {
        let basis = reference(BasisKind::Dirichlet, 8);
        let ops = operators_1d(&basis);
        for k in 0..basis.len() {
            for j in 0..basis.len() {
                let expect = if k == j { 4.0 * k as f64 + 6.0 } else { 0.0 };
                assert_abs_diff_eq!(ops.stiffness[(k, j)], expect, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn dirichlet_reference_mass_is_pentadiagonal() {
        let basis = reference(BasisKind::Dirichlet, 9);
        let ops = operators_1d(&basis);
        for k in 0..basis.len() {
            for j in 0..basis.len() {
                let kk = k as f64;
                let expect = if k == j {
                    2.0 / (2.0 * kk + 1.0) + 2.0 / (2.0 * kk + 5.0)
                } else if j == k + 2 || k == j + 2 {
                    let low = k.min(j) as f64;
                    -2.0 / (2.0 * low + 5.0)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(ops.mass[(k, j)], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn unit_interval_stiffness_doubles_reference() {
        let refb = reference(BasisKind::Dirichlet, 6);
        let phys = make_basis(BasisKind::Dirichlet, 6, (0.0, 1.0)).unwrap();
        let a_ref = operators_1d(&refb).stiffness;
        let a_phys = operators_1d(&phys).stiffness;
        for k in 0..refb.len() {
            for j in 0..refb.len() {
                assert_abs_diff_eq!(a_phys[(k, j)], 2.0 * a_ref[(k, j)], epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn operators_exactly_symmetric_and_definite() {
        for kind in [BasisKind::Dirichlet, BasisKind::NoFlux] {
            let basis = make_basis(kind, 12, (0.0, 1.0)).unwrap();
            let ops = operators_1d(&basis);
            assert_eq!(ops.stiffness, ops.stiffness.transpose());
            assert_eq!(ops.mass, ops.mass.transpose());
            // Mass is positive definite for both families.
            assert!(nalgebra::Cholesky::new(ops.mass.clone()).is_some());
            // Stiffness is at worst positive semidefinite (no-flux has the
            // constant nullspace), definite for Dirichlet.
            let eig = ops.stiffness.clone().symmetric_eigenvalues();
            let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
            match kind {
                BasisKind::Dirichlet => assert!(min > 1.0),
                BasisKind::NoFlux => assert!(min > -1e-10),
            }
        }
    }

    #[test]
    fn noflux_stiffness_annihilates_constants() {
        let basis = make_basis(BasisKind::NoFlux, 9, (0.0, 1.0)).unwrap();
        let ops = operators_1d(&basis);
        let mut e0 = nalgebra::DVector::zeros(basis.len());
        e0[0] = 3.7;
        let out = &ops.stiffness * e0;
        assert!(out.norm() < 1e-12);
    }

    #[test]
    fn eval_matrix_reproduces_basis_summation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for kind in [BasisKind::Dirichlet, BasisKind::NoFlux] {
            let basis = make_basis(kind, 11, (-3.0, 3.0)).unwrap();
            let ops = operators_1d(&basis);
            let c = nalgebra::DVector::from_fn(basis.len(), |_, _| rng.gen_range(-1.0..1.0));
            let through_matrix = &ops.eval_matrix * &c;
            for m in 0..basis.len() {
                let (vals, _) = basis.eval_all(basis.nodes()[m]);
                let direct: f64 = (0..basis.len()).map(|k| c[k] * vals[k]).sum();
                assert_abs_diff_eq!(through_matrix[m], direct, epsilon = 1e-13);
            }
        }
    }
}
