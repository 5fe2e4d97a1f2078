//! Assembly of the discrete residual `F(a)` and Jacobian `J(a)` for a
//! coupled system of `n` fields in 1D or 2D.
//!
//! Per field the residual is
//!
//! ```text
//! F_i(a) = d_i (S a_i) ± q_i(a)
//! ```
//!
//! with `S` the (tensorized) stiffness operator and `q_i` the Galerkin
//! projection of the nonlinearity, evaluated pseudospectrally: nodal values
//! through the basis evaluation matrix, pointwise `g_i`, then projection
//! through the LGL weights. The sign is `+` for no-flux systems written as
//! `d_i u_i'' = g_i` and `-` for Dirichlet systems written as
//! `-d_i Δu_i = g_i`.
//!
//! In 2D the per-field linear operator is the Kronecker combination
//! `S = A⊗B + B⊗Aᵀ` of the 1D stiffness/mass pairs. Residual matvecs never
//! materialize it; they use `(A⊗B)·vec(X) = vec(B X Aᵀ)` on the coefficient
//! matrix `X` (x-index fastest). The dense form is built once at assembly
//! for Jacobian work.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::basis::{make_basis, operators_1d, Basis1D, BasisKind, OperatorPair1D};
use crate::error::{Error, Result};
use crate::legendre::lgl_rule;
use crate::RealScalar;

/// Pointwise nonlinearity: `(field_values, position, out_g)`.
pub type NonlinearityFn<T> = Arc<dyn Fn(&[T], &[T], &mut [T]) + Send + Sync>;

/// Pointwise nonlinearity Jacobian: row-major `out[i*n + l] = ∂g_i/∂u_l`.
pub type NonlinearityJacFn<T> = Arc<dyn Fn(&[T], &[T], &mut [T]) + Send + Sync>;

/// A coupled semilinear elliptic system before discretization.
#[derive(Clone)]
pub struct ProblemDef<T> {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Number of coupled fields.
    pub n_fields: usize,
    /// Coefficient multiplying the Laplacian of each field.
    pub diffusion: Vec<T>,
    /// Boundary condition family (also fixes the residual sign convention).
    pub bc: BasisKind,
    /// Physical interval per dimension.
    pub domain: Vec<(T, T)>,
    nonlinearity: NonlinearityFn<T>,
    nonlinearity_jac: NonlinearityJacFn<T>,
}

impl<T: RealScalar> ProblemDef<T> {
    /// Bundle a system definition. `diffusion` must have `n_fields` entries
    /// and `domain` must have `dim` entries.
    pub fn new(
        dim: usize,
        n_fields: usize,
        diffusion: Vec<T>,
        bc: BasisKind,
        domain: Vec<(T, T)>,
        nonlinearity: NonlinearityFn<T>,
        nonlinearity_jac: NonlinearityJacFn<T>,
    ) -> Self {
        assert_eq!(diffusion.len(), n_fields, "one diffusion entry per field");
        assert_eq!(domain.len(), dim, "one interval per dimension");
        Self {
            dim,
            n_fields,
            diffusion,
            bc,
            domain,
            nonlinearity,
            nonlinearity_jac,
        }
    }

    /// Evaluate `g` at one point.
    pub fn eval_g(&self, values: &[T], position: &[T], out: &mut [T]) {
        (self.nonlinearity)(values, position, out);
    }

    /// Evaluate `∂g_i/∂u_l` at one point, row-major.
    pub fn eval_g_jac(&self, values: &[T], position: &[T], out: &mut [T]) {
        (self.nonlinearity_jac)(values, position, out);
    }
}

/// Residual/Jacobian provider consumed by the nonlinear solvers.
///
/// Both the plain discrete system and its deflated wrapper implement this,
/// so one solver runs on either.
pub trait NonlinearSystem<T: RealScalar> {
    /// Number of unknowns.
    fn n_unknowns(&self) -> usize;
    /// Residual vector at `a`.
    fn residual(&self, a: &DVector<T>) -> Result<DVector<T>>;
    /// Dense Jacobian at `a`.
    fn jacobian(&self, a: &DVector<T>) -> Result<DMatrix<T>>;
}

/// Field values on a uniform tensor grid, for plot export.
#[derive(Debug, Clone)]
pub struct GridData<T> {
    /// Grid coordinates per dimension.
    pub coords: Vec<Vec<T>>,
    /// Per-field values, x-index fastest.
    pub fields: Vec<DVector<T>>,
}

/// The assembled discrete system: operators, quadrature, and layout.
#[derive(Clone)]
pub struct DiscreteSystem<T> {
    problem: ProblemDef<T>,
    bases: Vec<Basis1D<T>>,
    ops: Vec<OperatorPair1D<T>>,
    quad_nodes: Vec<DVector<T>>,
    quad_weights: Vec<DVector<T>>,
    /// Basis values at the quadrature nodes, `M × (N+1)` per dimension.
    quad_eval: Vec<DMatrix<T>>,
    /// Physical coordinates of the quadrature nodes per dimension.
    quad_pos: Vec<Vec<T>>,
    /// Dense per-field Laplacian block (`(N+1)^dim` square, no diffusion).
    linear_dense: DMatrix<T>,
    /// `+1` for no-flux (ODE form), `-1` for Dirichlet (PDE form).
    sign: T,
    /// Quadrature volume scale, `∏ ℓ_d / 2`.
    scale_q: T,
}

/// Discretize `problem` with degree cap `n` in each direction.
pub fn assemble<T: RealScalar>(problem: ProblemDef<T>, n: usize) -> Result<DiscreteSystem<T>> {
    assemble_with_oversample(problem, n, 1)
}

/// [`assemble`] with an oversampling factor for the nonlinear quadrature.
///
/// `oversample = 1` evaluates the nonlinearity at exactly the `N+1` LGL
/// points per direction; larger factors use `oversample·(N+1)` points to
/// suppress aliasing of cubic terms.
pub fn assemble_with_oversample<T: RealScalar>(
    problem: ProblemDef<T>,
    n: usize,
    oversample: usize,
) -> Result<DiscreteSystem<T>> {
    if problem.dim == 0 || problem.dim > 2 {
        return Err(Error::UnsupportedDim(problem.dim));
    }
    if n < 2 {
        return Err(Error::InvalidDegree(n));
    }
    let oversample = oversample.max(1);

    let mut bases = Vec::with_capacity(problem.dim);
    let mut ops = Vec::with_capacity(problem.dim);
    let mut quad_nodes = Vec::with_capacity(problem.dim);
    let mut quad_weights = Vec::with_capacity(problem.dim);
    let mut quad_eval = Vec::with_capacity(problem.dim);
    let mut quad_pos = Vec::with_capacity(problem.dim);
    let two = T::from_f64_lossy(2.0);
    let mut scale_q = T::one();

    for d in 0..problem.dim {
        let basis = make_basis(problem.bc, n, problem.domain[d])?;
        let pair = operators_1d(&basis);
        let m_points = oversample * (n + 1);
        let (qn, qw) = lgl_rule::<T>(m_points - 1)?;
        let pts: Vec<T> = qn.iter().copied().collect();
        let eval = basis.value_matrix_at(&pts);
        let pos: Vec<T> = pts.iter().map(|&xi| basis.from_reference(xi)).collect();
        scale_q *= basis.length() / two;
        bases.push(basis);
        ops.push(pair);
        quad_nodes.push(qn);
        quad_weights.push(qw);
        quad_eval.push(eval);
        quad_pos.push(pos);
    }

    let k1 = n + 1;
    let linear_dense = match problem.dim {
        1 => ops[0].stiffness.clone(),
        2 => {
            // S = A⊗B + B⊗Aᵀ over the x/y operator pairs, laid out with the
            // x-index fastest: S[(k + K1 j),(m + K1 s)] = A_x[k,m] B_y[j,s]
            //                                           + B_x[k,m] A_y[j,s].
            let (ax, bx) = (&ops[0].stiffness, &ops[0].mass);
            let (ay, by) = (&ops[1].stiffness, &ops[1].mass);
            let mut s = DMatrix::zeros(k1 * k1, k1 * k1);
            for j in 0..k1 {
                for ss in 0..k1 {
                    let byv = by[(j, ss)];
                    let ayv = ay[(j, ss)];
                    for m in 0..k1 {
                        for k in 0..k1 {
                            s[(k + k1 * j, m + k1 * ss)] = ax[(k, m)] * byv + bx[(k, m)] * ayv;
                        }
                    }
                }
            }
            s
        }
        _ => unreachable!(),
    };

    let sign = match problem.bc {
        BasisKind::NoFlux => T::one(),
        BasisKind::Dirichlet => -T::one(),
    };

    Ok(DiscreteSystem {
        problem,
        bases,
        ops,
        quad_nodes,
        quad_weights,
        quad_eval,
        quad_pos,
        linear_dense,
        sign,
        scale_q,
    })
}

impl<T: RealScalar> DiscreteSystem<T> {
    /// The underlying problem definition.
    pub fn problem(&self) -> &ProblemDef<T> {
        &self.problem
    }

    /// Basis of dimension `d`.
    pub fn basis(&self, d: usize) -> &Basis1D<T> {
        &self.bases[d]
    }

    /// Operator pair of dimension `d`.
    pub fn operators(&self, d: usize) -> &OperatorPair1D<T> {
        &self.ops[d]
    }

    /// Degree cap `N` (identical in every direction).
    pub fn degree_cap(&self) -> usize {
        self.bases[0].degree_cap()
    }

    /// Unknowns per field, `(N+1)^dim`.
    pub fn field_size(&self) -> usize {
        self.bases.iter().map(|b| b.len()).product()
    }

    /// Total number of unknowns.
    pub fn total_size(&self) -> usize {
        self.problem.n_fields * self.field_size()
    }

    /// Dense per-field Laplacian block (before the diffusion coefficient).
    pub fn linear_block(&self) -> &DMatrix<T> {
        &self.linear_dense
    }

    /// Residual sign applied to the projected nonlinearity.
    pub fn nonlinear_sign(&self) -> T {
        self.sign
    }

    /// Quadrature volume scale `∏ ℓ_d / 2`.
    pub fn quad_scale(&self) -> T {
        self.scale_q
    }

    /// Quadrature node count in dimension `d`.
    pub fn quad_len(&self, d: usize) -> usize {
        self.quad_nodes[d].len()
    }

    /// Quadrature nodes of dimension `d` (reference coordinates).
    pub fn quad_nodes(&self, d: usize) -> &DVector<T> {
        &self.quad_nodes[d]
    }

    /// Basis evaluation matrix at the quadrature nodes of dimension `d`.
    pub fn quad_eval(&self, d: usize) -> &DMatrix<T> {
        &self.quad_eval[d]
    }

    /// Quadrature weights of dimension `d`.
    pub fn quad_weights(&self, d: usize) -> &DVector<T> {
        &self.quad_weights[d]
    }

    fn check_len(&self, a: &DVector<T>) -> Result<()> {
        if a.len() != self.total_size() {
            return Err(Error::DimensionMismatch {
                expected: self.total_size(),
                got: a.len(),
            });
        }
        Ok(())
    }

    /// View of field `i` inside a full coefficient vector.
    pub fn field_coeffs<'a>(&self, a: &'a DVector<T>, i: usize) -> &'a [T] {
        let k = self.field_size();
        &a.as_slice()[i * k..(i + 1) * k]
    }

    /// Apply the per-field linear operator `S` to one field's coefficients
    /// without materializing the Kronecker product.
    pub fn linear_matvec(&self, field: &[T]) -> DVector<T> {
        match self.problem.dim {
            1 => &self.ops[0].stiffness * DVector::from_column_slice(field),
            2 => {
                let k1 = self.bases[0].len();
                let x = DMatrix::from_column_slice(k1, k1, field);
                let (ax, bx) = (&self.ops[0].stiffness, &self.ops[0].mass);
                let (ay, by) = (&self.ops[1].stiffness, &self.ops[1].mass);
                // (A⊗B + B⊗Aᵀ)·vec(X) = vec(A_x X B_yᵀ + B_x X A_yᵀ)
                let y = ax * &x * by.transpose() + bx * &x * ay.transpose();
                DVector::from_column_slice(y.as_slice())
            }
            _ => unreachable!(),
        }
    }

    /// Nodal values of every field at the quadrature grid.
    ///
    /// 1D: an `M × 1` column per field; 2D: an `M × M` matrix per field
    /// (row = x node, column = y node).
    pub fn nodal_values(&self, a: &DVector<T>) -> Result<Vec<DMatrix<T>>> {
        self.check_len(a)?;
        let k1 = self.bases[0].len();
        let mut out = Vec::with_capacity(self.problem.n_fields);
        for i in 0..self.problem.n_fields {
            let coeffs = self.field_coeffs(a, i);
            match self.problem.dim {
                1 => {
                    let v = &self.quad_eval[0] * DVector::from_column_slice(coeffs);
                    out.push(DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
                }
                2 => {
                    let x = DMatrix::from_column_slice(k1, k1, coeffs);
                    let u = &self.quad_eval[0] * x * self.quad_eval[1].transpose();
                    out.push(u);
                }
                _ => unreachable!(),
            }
        }
        Ok(out)
    }

    /// Discrete mass matrix of dimension `d` under the nonlinear-term
    /// quadrature, `(ℓ_d/2) Eᵀ diag(w) E`.
    fn discrete_mass(&self, d: usize) -> DMatrix<T> {
        let e = &self.quad_eval[d];
        let w = &self.quad_weights[d];
        let half_len = self.bases[d].length() / T::from_f64_lossy(2.0);
        let mut scaled = e.clone();
        for c in 0..scaled.ncols() {
            for r in 0..scaled.nrows() {
                scaled[(r, c)] *= w[r] * half_len;
            }
        }
        e.tr_mul(&scaled)
    }

    /// Project nodal field values (shaped as in
    /// [`DiscreteSystem::nodal_values`]) back to modal coefficients through
    /// the LGL quadrature (discrete projection).
    ///
    /// Sampling a member of the basis space at the nodes and projecting is
    /// the identity. With the basis's own `N+1` LGL nodes this system is
    /// singular for Dirichlet bases (the endpoint rows vanish); it is used
    /// for the no-flux shift symmetry and for oversampled quadratures.
    pub fn project_from_nodes(&self, nodal: &[DMatrix<T>]) -> Result<DVector<T>> {
        if nodal.len() != self.problem.n_fields {
            return Err(Error::DimensionMismatch {
                expected: self.problem.n_fields,
                got: nodal.len(),
            });
        }
        let k = self.field_size();
        let two = T::from_f64_lossy(2.0);
        let mut out = DVector::zeros(self.total_size());
        match self.problem.dim {
            1 => {
                let chol = nalgebra::Cholesky::new(self.discrete_mass(0))
                    .ok_or(Error::LinearSolveFailure)?;
                let w = &self.quad_weights[0];
                let half_len = self.bases[0].length() / two;
                for i in 0..self.problem.n_fields {
                    let v = &nodal[i];
                    let mut weighted = DVector::zeros(v.nrows());
                    for m in 0..v.nrows() {
                        weighted[m] = w[m] * v[(m, 0)] * half_len;
                    }
                    let rhs = self.quad_eval[0].tr_mul(&weighted);
                    let coeffs = chol.solve(&rhs);
                    out.rows_mut(i * k, k).copy_from(&coeffs);
                }
            }
            2 => {
                let chol_x = nalgebra::Cholesky::new(self.discrete_mass(0))
                    .ok_or(Error::LinearSolveFailure)?;
                let chol_y = nalgebra::Cholesky::new(self.discrete_mass(1))
                    .ok_or(Error::LinearSolveFailure)?;
                let (wx, wy) = (&self.quad_weights[0], &self.quad_weights[1]);
                for i in 0..self.problem.n_fields {
                    let v = &nodal[i];
                    let mut weighted = v.clone();
                    for q in 0..v.ncols() {
                        for p in 0..v.nrows() {
                            weighted[(p, q)] *= wx[p] * wy[q] * self.scale_q;
                        }
                    }
                    let rhs = self.quad_eval[0].tr_mul(&(weighted * &self.quad_eval[1]));
                    let tmp = chol_x.solve(&rhs);
                    let coeffs = chol_y.solve(&tmp.transpose()).transpose();
                    out.rows_mut(i * k, k)
                        .copy_from(&DVector::from_column_slice(coeffs.as_slice()));
                }
            }
            _ => unreachable!(),
        }
        Ok(out)
    }

    /// Pointwise nonlinearity at every quadrature node, one block per field.
    fn nonlinearity_at_nodes(&self, nodal: &[DMatrix<T>]) -> Vec<DMatrix<T>> {
        let n = self.problem.n_fields;
        let rows = nodal[0].nrows();
        let cols = nodal[0].ncols();
        let mut g = vec![DMatrix::zeros(rows, cols); n];
        let mut vals = vec![T::zero(); n];
        let mut out = vec![T::zero(); n];
        let mut pos = vec![T::zero(); self.problem.dim];
        for q in 0..cols {
            if self.problem.dim == 2 {
                pos[1] = self.quad_pos[1][q];
            }
            for p in 0..rows {
                pos[0] = self.quad_pos[0][p];
                for i in 0..n {
                    vals[i] = nodal[i][(p, q)];
                }
                self.problem.eval_g(&vals, &pos, &mut out);
                for i in 0..n {
                    g[i][(p, q)] = out[i];
                }
            }
        }
        g
    }

    /// The discrete residual `F(a)`.
    pub fn residual(&self, a: &DVector<T>) -> Result<DVector<T>> {
        self.check_len(a)?;
        let nodal = self.nodal_values(a)?;
        let g = self.nonlinearity_at_nodes(&nodal);
        let k = self.field_size();
        let mut f = DVector::zeros(self.total_size());
        for i in 0..self.problem.n_fields {
            let coeffs = self.field_coeffs(a, i);
            let linear = self.linear_matvec(coeffs) * self.problem.diffusion[i];
            let projected = match self.problem.dim {
                1 => {
                    let w = &self.quad_weights[0];
                    let mut weighted = DVector::zeros(g[i].nrows());
                    for m in 0..g[i].nrows() {
                        weighted[m] = w[m] * g[i][(m, 0)] * self.scale_q;
                    }
                    self.quad_eval[0].tr_mul(&weighted)
                }
                2 => {
                    let (wx, wy) = (&self.quad_weights[0], &self.quad_weights[1]);
                    let mut weighted = g[i].clone();
                    for q in 0..weighted.ncols() {
                        for p in 0..weighted.nrows() {
                            weighted[(p, q)] *= wx[p] * wy[q] * self.scale_q;
                        }
                    }
                    let q = self.quad_eval[0].tr_mul(&(weighted * &self.quad_eval[1]));
                    DVector::from_column_slice(q.as_slice())
                }
                _ => unreachable!(),
            };
            let fi = linear + projected * self.sign;
            f.rows_mut(i * k, k).copy_from(&fi);
        }
        Ok(f)
    }

    /// The dense Jacobian `J(a)`, using first derivatives of `g` only.
    pub fn jacobian(&self, a: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_len(a)?;
        let nodal = self.nodal_values(a)?;
        let nf = self.problem.n_fields;
        let k = self.field_size();
        let mut jac = DMatrix::zeros(self.total_size(), self.total_size());

        // Linear diffusion blocks.
        for i in 0..nf {
            let d = self.problem.diffusion[i];
            let mut block = jac.view_mut((i * k, i * k), (k, k));
            for c in 0..k {
                for r in 0..k {
                    block[(r, c)] += d * self.linear_dense[(r, c)];
                }
            }
        }

        // Nonlinearity derivative at every node, one block per (i, l) pair.
        let rows = nodal[0].nrows();
        let cols = nodal[0].ncols();
        let mut dg = vec![DMatrix::zeros(rows, cols); nf * nf];
        {
            let mut vals = vec![T::zero(); nf];
            let mut out = vec![T::zero(); nf * nf];
            let mut pos = vec![T::zero(); self.problem.dim];
            for q in 0..cols {
                if self.problem.dim == 2 {
                    pos[1] = self.quad_pos[1][q];
                }
                for p in 0..rows {
                    pos[0] = self.quad_pos[0][p];
                    for i in 0..nf {
                        vals[i] = nodal[i][(p, q)];
                    }
                    self.problem.eval_g_jac(&vals, &pos, &mut out);
                    for e in 0..nf * nf {
                        dg[e][(p, q)] = out[e];
                    }
                }
            }
        }

        match self.problem.dim {
            1 => {
                let e = &self.quad_eval[0];
                let w = &self.quad_weights[0];
                let k1 = self.bases[0].len();
                for i in 0..nf {
                    for l in 0..nf {
                        let d = &dg[i * nf + l];
                        let mut block = jac.view_mut((i * k, l * k), (k1, k1));
                        for cj in 0..k1 {
                            for ck in 0..k1 {
                                let mut acc = T::zero();
                                for m in 0..rows {
                                    acc += w[m] * d[(m, 0)] * e[(m, ck)] * e[(m, cj)];
                                }
                                block[(ck, cj)] += self.sign * self.scale_q * acc;
                            }
                        }
                    }
                }
            }
            2 => {
                let ex = &self.quad_eval[0];
                let ey = &self.quad_eval[1];
                let (wx, wy) = (&self.quad_weights[0], &self.quad_weights[1]);
                let k1 = self.bases[0].len();
                for i in 0..nf {
                    for l in 0..nf {
                        let d = &dg[i * nf + l];
                        let mut block = jac.view_mut((i * k, l * k), (k, k));
                        // Contract the x-direction first: for each y node q,
                        // C_q = E_xᵀ diag(w_x ⊙ d[:,q]) E_x, then spread C_q
                        // over the y-mode pairs with weight w_y E_y E_y.
                        let mut scaled = DMatrix::zeros(rows, k1);
                        for q in 0..cols {
                            for c in 0..k1 {
                                for p in 0..rows {
                                    scaled[(p, c)] = wx[p] * d[(p, q)] * ex[(p, c)];
                                }
                            }
                            let cq = ex.tr_mul(&scaled);
                            for s in 0..k1 {
                                let eys = ey[(q, s)];
                                for j in 0..k1 {
                                    let coef =
                                        self.sign * self.scale_q * wy[q] * ey[(q, j)] * eys;
                                    for m in 0..k1 {
                                        for kk in 0..k1 {
                                            block[(kk + k1 * j, m + k1 * s)] +=
                                                coef * cq[(kk, m)];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(jac)
    }

    /// Evaluate every field on a uniform tensor grid over the physical
    /// domain by direct basis summation.
    pub fn to_grid(&self, a: &DVector<T>, resolution: usize) -> Result<GridData<T>> {
        self.check_len(a)?;
        assert!(resolution >= 2, "grid resolution must be at least 2");
        let k1 = self.bases[0].len();
        let mut coords = Vec::with_capacity(self.problem.dim);
        let mut evals = Vec::with_capacity(self.problem.dim);
        for d in 0..self.problem.dim {
            let (lo, hi) = self.problem.domain[d];
            let step = (hi - lo) / T::from_usize(resolution - 1).unwrap();
            let pts: Vec<T> = (0..resolution)
                .map(|r| lo + step * T::from_usize(r).unwrap())
                .collect();
            let refs: Vec<T> = pts.iter().map(|&x| self.bases[d].to_reference(x)).collect();
            evals.push(self.bases[d].value_matrix_at(&refs));
            coords.push(pts);
        }
        let mut fields = Vec::with_capacity(self.problem.n_fields);
        for i in 0..self.problem.n_fields {
            let coeffs = self.field_coeffs(a, i);
            match self.problem.dim {
                1 => fields.push(&evals[0] * DVector::from_column_slice(coeffs)),
                2 => {
                    let x = DMatrix::from_column_slice(k1, k1, coeffs);
                    let u = &evals[0] * x * evals[1].transpose();
                    fields.push(DVector::from_column_slice(u.as_slice()));
                }
                _ => unreachable!(),
            }
        }
        Ok(GridData { coords, fields })
    }
}

impl<T: RealScalar> NonlinearSystem<T> for DiscreteSystem<T> {
    fn n_unknowns(&self) -> usize {
        self.total_size()
    }

    fn residual(&self, a: &DVector<T>) -> Result<DVector<T>> {
        DiscreteSystem::residual(self, a)
    }

    fn jacobian(&self, a: &DVector<T>) -> Result<DMatrix<T>> {
        DiscreteSystem::jacobian(self, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    /// Single-field problem with g(u) = u³.
    fn cubic_problem(dim: usize, bc: BasisKind, domain: Vec<(f64, f64)>) -> ProblemDef<f64> {
        ProblemDef::new(
            dim,
            1,
            vec![1.0],
            bc,
            domain,
            Arc::new(|u: &[f64], _x: &[f64], out: &mut [f64]| {
                out[0] = u[0] * u[0] * u[0];
            }),
            Arc::new(|u: &[f64], _x: &[f64], out: &mut [f64]| {
                out[0] = 3.0 * u[0] * u[0];
            }),
        )
    }

    fn constant_source(dim: usize, domain: Vec<(f64, f64)>) -> ProblemDef<f64> {
        ProblemDef::new(
            dim,
            1,
            vec![1.0],
            BasisKind::Dirichlet,
            domain,
            Arc::new(|_u: &[f64], _x: &[f64], out: &mut [f64]| out[0] = 2.0),
            Arc::new(|_u: &[f64], _x: &[f64], out: &mut [f64]| out[0] = 0.0),
        )
    }

    #[test]
    fn manufactured_dirichlet_recovers_parabola() {
        // -u'' = 2 on (-1,1) has u = 1 - x² = (2/3)(L_0 - L_2), exactly
        // representable at N = 4; one Newton step solves the linear system.
        let sys = assemble(constant_source(1, vec![(-1.0, 1.0)]), 4).unwrap();
        let zero = DVector::zeros(sys.total_size());
        let f0 = sys.residual(&zero).unwrap();
        let j = sys.jacobian(&zero).unwrap();
        let a = nalgebra::LU::new(j).solve(&(-f0)).unwrap();
        assert_abs_diff_eq!(a[0], 2.0 / 3.0, epsilon = 1e-13);
        for k in 1..sys.total_size() {
            assert_abs_diff_eq!(a[k], 0.0, epsilon = 1e-13);
        }
        let f = sys.residual(&a).unwrap();
        assert!(f.norm() < 1e-13);
    }

    #[test]
    fn noflux_constant_is_annihilated() {
        let sys = assemble(cubic_problem(1, BasisKind::NoFlux, vec![(0.0, 1.0)]), 8).unwrap();
        let mut a = DVector::zeros(sys.total_size());
        a[0] = 4.2;
        let lin = sys.linear_matvec(sys.field_coeffs(&a, 0));
        assert!(lin.norm() < 1e-12);
    }

    #[test]
    fn dirichlet_2d_linear_block_is_spd() {
        let sys = assemble(constant_source(2, vec![(-1.0, 1.0), (-1.0, 1.0)]), 2).unwrap();
        let s = sys.linear_block();
        assert_eq!(s.nrows(), 9);
        assert_eq!(s.ncols(), 9);
        assert!(nalgebra::Cholesky::new(s.clone()).is_some());
    }

    #[test]
    fn kronecker_matvec_matches_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for bc in [BasisKind::Dirichlet, BasisKind::NoFlux] {
            for n in [2usize, 3, 4] {
                let sys =
                    assemble(cubic_problem(2, bc, vec![(0.0, 1.0), (0.0, 1.0)]), n).unwrap();
                let ax = &sys.operators(0).stiffness;
                let bx = &sys.operators(0).mass;
                let ay = &sys.operators(1).stiffness;
                let by = &sys.operators(1).mass;
                // Dense oracle: S = A⊗B + B⊗Aᵀ in the x-fastest layout is
                // B_y ⊗ A_x + A_y ⊗ B_x.
                let oracle = by.kronecker(ax) + ay.kronecker(bx);
                let k = sys.field_size();
                let v = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
                let fast = sys.linear_matvec(v.as_slice());
                let dense = &oracle * &v;
                assert!((fast - &dense).norm() <= 1e-13 * (1.0 + dense.norm()));
                // The cached dense block agrees entrywise.
                assert!((sys.linear_block() - oracle).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let sys = assemble(cubic_problem(1, BasisKind::Dirichlet, vec![(0.0, 1.0)]), 6).unwrap();
        let a = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-0.5..0.5));
        let j = sys.jacobian(&a).unwrap();
        let j_fd = crate::validate::fd_jacobian(&sys, &a).unwrap();
        let denom = j_fd.norm();
        assert!((j - j_fd).norm() / denom <= 1e-6);
    }

    #[test]
    fn jacobian_matches_finite_differences_2d() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let sys = assemble(
            cubic_problem(2, BasisKind::Dirichlet, vec![(-1.0, 1.0), (-1.0, 1.0)]),
            4,
        )
        .unwrap();
        let a = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-0.5..0.5));
        let j = sys.jacobian(&a).unwrap();
        let j_fd = crate::validate::fd_jacobian(&sys, &a).unwrap();
        assert!((j - &j_fd).norm() / j_fd.norm() <= 1e-6);
    }

    #[test]
    fn directional_derivative_second_order() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let sys = assemble(cubic_problem(1, BasisKind::NoFlux, vec![(0.0, 1.0)]), 8).unwrap();
        let a = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-0.5..0.5));
        let v = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-1.0..1.0));
        let j = sys.jacobian(&a).unwrap();
        let jv = &j * &v;
        let mut errs = Vec::new();
        for &h in &[1e-2, 1e-3, 1e-4] {
            let fp = sys.residual(&(&a + &v * h)).unwrap();
            let fm = sys.residual(&(&a - &v * h)).unwrap();
            let approx_jv = (fp - fm) / (2.0 * h);
            errs.push((approx_jv - &jv).norm());
        }
        // O(h²): each tenfold h reduction cuts the error ~100x.
        assert!(errs[1] / errs[0] < 2e-2);
        assert!(errs[2] / errs[1] < 2e-2);
    }

    #[test]
    fn residual_dimension_checked() {
        let sys = assemble(cubic_problem(1, BasisKind::NoFlux, vec![(0.0, 1.0)]), 4).unwrap();
        let bad = DVector::zeros(3);
        assert!(matches!(
            sys.residual(&bad),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn to_grid_basics() {
        let sys = assemble(cubic_problem(1, BasisKind::NoFlux, vec![(0.0, 1.0)]), 6).unwrap();
        let zero = DVector::zeros(sys.total_size());
        let grid = sys.to_grid(&zero, 41).unwrap();
        assert!(grid.fields[0].iter().all(|&v| v == 0.0));

        // e_0 in the no-flux basis is the constant 1.
        let mut e0 = DVector::zeros(sys.total_size());
        e0[0] = 1.0;
        let grid = sys.to_grid(&e0, 41).unwrap();
        for &v in grid.fields[0].iter() {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
        }

        // Dirichlet fields vanish on the boundary rows/columns.
        let sys2 = assemble(
            cubic_problem(2, BasisKind::Dirichlet, vec![(0.0, 1.0), (0.0, 1.0)]),
            4,
        )
        .unwrap();
        let mut a = DVector::zeros(sys2.total_size());
        for (idx, v) in a.iter_mut().enumerate() {
            *v = 0.1 * (idx as f64 * 0.7).sin();
        }
        let r = 21;
        let grid = sys2.to_grid(&a, r).unwrap();
        let f = &grid.fields[0];
        for t in 0..r {
            for &edge in &[t, (r - 1) * r + t, t * r, t * r + (r - 1)] {
                assert_abs_diff_eq!(f[edge], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn project_from_nodes_round_trips() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for (dim, domain) in [(1usize, vec![(0.0, 1.0)]), (2, vec![(0.0, 1.0), (0.0, 1.0)])] {
            let sys = assemble(cubic_problem(dim, BasisKind::NoFlux, domain), 6).unwrap();
            let a = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-1.0..1.0));
            let nodal = sys.nodal_values(&a).unwrap();
            let back = sys.project_from_nodes(&nodal).unwrap();
            assert!((back - &a).norm() <= 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn unsupported_dim_rejected() {
        let p = ProblemDef::new(
            1,
            1,
            vec![1.0],
            BasisKind::NoFlux,
            vec![(0.0, 1.0)],
            Arc::new(|_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 0.0),
            Arc::new(|_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 0.0),
        );
        let mut p3 = p;
        p3.dim = 3;
        p3.domain = vec![(0.0, 1.0); 3];
        assert!(matches!(assemble(p3, 4), Err(Error::UnsupportedDim(3))));
    }
}
