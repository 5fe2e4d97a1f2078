//! Independent oracles: finite-difference Jacobians, coefficient
//! prolongation between degrees, and refined-degree reference errors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::galerkin::{assemble, NonlinearSystem, ProblemDef};
use crate::lm::{lm_solve, LMConfig};
use crate::RealScalar;

/// Central-difference Jacobian of a residual provider.
///
/// Column `j` uses the step `h_j = 1e-6 (1 + |a_j|)`.
pub fn fd_jacobian<T: RealScalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    a: &DVector<T>,
) -> Result<DMatrix<T>> {
    let n = a.len();
    let f0 = system.residual(a)?;
    let m = f0.len();
    let base = T::from_f64_lossy(1e-6);
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = a.clone();
    for j in 0..n {
        let h = base * (T::one() + a[j].abs());
        probe[j] = a[j] + h;
        let fp = system.residual(&probe)?;
        probe[j] = a[j] - h;
        let fm = system.residual(&probe)?;
        probe[j] = a[j];
        let scale = T::one() / (h + h);
        for r in 0..m {
            jac[(r, j)] = (fp[r] - fm[r]) * scale;
        }
    }
    Ok(jac)
}

/// Copy modal coefficients between degree caps by zero-padding (prolong)
/// or dropping high modes (truncate).
///
/// The boundary-adapted bases are hierarchical, so padding with zeros
/// represents the identical function at the higher degree.
pub fn resize_coeffs<T: RealScalar>(
    a: &DVector<T>,
    n_fields: usize,
    dim: usize,
    n_from: usize,
    n_to: usize,
) -> DVector<T> {
    let k_from = (n_from + 1).pow(dim as u32);
    let k_to = (n_to + 1).pow(dim as u32);
    assert_eq!(a.len(), n_fields * k_from, "source layout mismatch");
    let keep = n_from.min(n_to) + 1;
    let mut out = DVector::zeros(n_fields * k_to);
    for i in 0..n_fields {
        match dim {
            1 => {
                for k in 0..keep {
                    out[i * k_to + k] = a[i * k_from + k];
                }
            }
            2 => {
                for j in 0..keep {
                    for k in 0..keep {
                        out[i * k_to + k + (n_to + 1) * j] =
                            a[i * k_from + k + (n_from + 1) * j];
                    }
                }
            }
            _ => panic!("resize_coeffs supports dim 1 or 2"),
        }
    }
    out
}

/// Residual level at which a polished iterate counts as a root.
const ROOT_TOL: f64 = 1e-9;

/// Move a root between degree caps: resize the coefficients, polish with
/// the LM iteration at the target degree, verify the result still is a
/// root there.
pub fn root_at_degree<T: RealScalar>(
    problem: &ProblemDef<T>,
    root: &DVector<T>,
    n_from: usize,
    n_to: usize,
    lmcfg: &LMConfig<T>,
) -> Result<DVector<T>> {
    let sys_to = assemble(problem.clone(), n_to)?;
    let moved = resize_coeffs(
        root,
        problem.n_fields,
        problem.dim,
        n_from,
        n_to,
    );
    let polished = lm_solve(&sys_to, &moved, lmcfg)?;
    let norm = sys_to.residual(&polished.solution)?.norm();
    if norm.to_f64().unwrap_or(f64::INFINITY) > ROOT_TOL {
        return Err(Error::PolishFailed(format!(
            "residual {:e} at N = {n_to}",
            norm.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(polished.solution)
}

/// Per-field sup-norm error of `root` (a solution at degree `n`) against a
/// reference solve at the larger degree `n_ref`.
///
/// The reference starts from the zero-padded coefficients and is polished
/// by the LM iteration; both solutions are compared on a uniform grid with
/// 1001 points per direction.
pub fn reference_error<T: RealScalar>(
    problem: &ProblemDef<T>,
    root: &DVector<T>,
    n: usize,
    n_ref: usize,
    lmcfg: &LMConfig<T>,
) -> Result<Vec<T>> {
    assert!(n_ref > n, "reference degree must exceed the root's degree");
    let reference = root_at_degree(problem, root, n, n_ref, lmcfg)?;
    let sys_n = assemble(problem.clone(), n)?;
    let sys_ref = assemble(problem.clone(), n_ref)?;
    let resolution = 1001;
    let grid_n = sys_n.to_grid(root, resolution)?;
    let grid_ref = sys_ref.to_grid(&reference, resolution)?;
    let mut errs = Vec::with_capacity(problem.n_fields);
    for i in 0..problem.n_fields {
        let mut max = T::zero();
        for (a, b) in grid_n.fields[i].iter().zip(grid_ref.fields[i].iter()) {
            let d = (*a - *b).abs();
            if d > max {
                max = d;
            }
        }
        errs.push(max);
    }
    Ok(errs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    struct LinearMap {
        mat: DMatrix<f64>,
        shift: DVector<f64>,
    }

    impl NonlinearSystem<f64> for LinearMap {
        fn n_unknowns(&self) -> usize {
            self.shift.len()
        }
        fn residual(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(&self.mat * a - &self.shift)
        }
        fn jacobian(&self, _a: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(self.mat.clone())
        }
    }

    struct QuadraticMap;

    impl NonlinearSystem<f64> for QuadraticMap {
        fn n_unknowns(&self) -> usize {
            3
        }
        fn residual(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![
                a[0] * a[0] + a[1],
                a[1] * a[2],
                a[2] * a[2] - a[0],
            ]))
        }
        fn jacobian(&self, a: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(
                3,
                3,
                &[
                    2.0 * a[0],
                    1.0,
                    0.0,
                    0.0,
                    a[2],
                    a[1],
                    -1.0,
                    0.0,
                    2.0 * a[2],
                ],
            ))
        }
    }

    #[test]
    fn linear_residual_gives_exact_jacobian() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 7;
        let sys = LinearMap {
            mat: DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
            shift: DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)),
        };
        let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let fd = fd_jacobian(&sys, &a).unwrap();
        assert!((fd - &sys.mat).norm() <= 1e-10 * (1.0 + sys.mat.norm()));
    }

    #[test]
    fn quadratic_residual_is_h_squared_accurate() {
        // Observed order over h halvings should be ~2 for a smooth map.
        let sys = QuadraticMap;
        let a = DVector::from_vec(vec![0.4, -0.2, 0.9]);
        let exact = sys.jacobian(&a).unwrap();
        let mut errs = Vec::new();
        for &h in &[1e-2_f64, 5e-3, 2.5e-3] {
            let mut jac = DMatrix::zeros(3, 3);
            let mut probe = a.clone();
            for j in 0..3 {
                probe[j] = a[j] + h;
                let fp = sys.residual(&probe).unwrap();
                probe[j] = a[j] - h;
                let fm = sys.residual(&probe).unwrap();
                probe[j] = a[j];
                for r in 0..3 {
                    jac[(r, j)] = (fp[r] - fm[r]) / (2.0 * h);
                }
            }
            errs.push((jac - &exact).norm().max(1e-300));
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        // A quadratic map has zero third derivative, so central differences
        // are exact up to rounding; accept anything at or above order 1.9
        // or an error already at rounding level.
        assert!(order1 >= 1.9 || errs[1] < 1e-12);
        assert!(order2 >= 1.9 || errs[2] < 1e-12);
    }

    #[test]
    fn prolongation_preserves_grid_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let problem = ProblemDef::new(
            1,
            2,
            vec![1.0, 1.0],
            BasisKind::NoFlux,
            vec![(0.0, 1.0)],
            Arc::new(|u: &[f64], _: &[f64], o: &mut [f64]| {
                o[0] = u[0];
                o[1] = u[1];
            }),
            Arc::new(|_: &[f64], _: &[f64], o: &mut [f64]| {
                o.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            }),
        );
        let sys8 = assemble(problem.clone(), 8).unwrap();
        let sys16 = assemble(problem, 16).unwrap();
        let a = DVector::from_fn(sys8.total_size(), |_, _| rng.gen_range(-1.0..1.0));
        let padded = resize_coeffs(&a, 2, 1, 8, 16);
        let g8 = sys8.to_grid(&a, 101).unwrap();
        let g16 = sys16.to_grid(&padded, 101).unwrap();
        for i in 0..2 {
            for r in 0..101 {
                assert_abs_diff_eq!(g8.fields[i][r], g16.fields[i][r], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn reference_error_vanishes_for_exactly_representable_roots() {
        // The constant steady state of the Schnakenberg model is inside
        // every degree's space, so the reference polish reproduces it and
        // the sup-norm gap is machine noise.
        let problem = crate::models::schnakenberg::<f64>(50.0);
        let sys = assemble(problem.clone(), 8).unwrap();
        let k = sys.field_size();
        let mut root = DVector::zeros(sys.total_size());
        root[0] = 1.0;
        root[k] = 2.0 / 3.0;
        let lmcfg = LMConfig::default().with_max_iters(60);
        let errs = reference_error(&problem, &root, 8, 16, &lmcfg).unwrap();
        assert!(errs.iter().all(|&e| e <= 1e-11), "errors {errs:?}");
    }

    #[test]
    fn root_at_degree_moves_between_caps() {
        let problem = crate::models::schnakenberg::<f64>(50.0);
        let sys24 = assemble(problem.clone(), 24).unwrap();
        let a0 = DVector::from_element(sys24.total_size(), -1.0);
        let lmcfg = LMConfig::default().with_max_iters(200);
        let out = lm_solve(&sys24, &a0, &lmcfg).unwrap();
        let root24 = out.solution;
        assert!(sys24.residual(&root24).unwrap().norm() <= 1e-9);
        let root16 = root_at_degree(&problem, &root24, 24, 16, &lmcfg).unwrap();
        let sys16 = assemble(problem, 16).unwrap();
        assert!(sys16.residual(&root16).unwrap().norm() <= 1e-9);
    }

    #[test]
    fn truncate_then_prolong_keeps_low_modes() {
        let a = DVector::from_fn(2 * 25, |i, _| i as f64);
        let down = resize_coeffs(&a, 2, 1, 24, 8);
        assert_eq!(down.len(), 2 * 9);
        assert_eq!(down[0], 0.0);
        assert_eq!(down[9], 25.0_f64);
        let up = resize_coeffs(&down, 2, 1, 8, 24);
        for i in 0..9 {
            assert_eq!(up[i], a[i]);
            assert_eq!(up[25 + i], a[25 + i]);
        }
        assert_eq!(up[10], 0.0);
    }
}
