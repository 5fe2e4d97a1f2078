//! Legendre polynomials and the Legendre-Gauss-Lobatto quadrature rule.
//!
//! Values come from the three-term recurrence
//! `(j+1) L_{j+1} = (2j+1) x L_j - j L_{j-1}`, derivatives from
//! `L'_{j+1} = L'_{j-1} + (2j+1) L_j`, which stays valid at `x = ±1`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::RealScalar;

/// Evaluate the Legendre polynomial `L_k` at `x`.
pub fn eval_legendre<T: RealScalar>(k: usize, x: T) -> T {
    eval_legendre_with_derivative(k, x).0
}

/// Evaluate `L_k(x)` together with `L'_k(x)`.
pub fn eval_legendre_with_derivative<T: RealScalar>(k: usize, x: T) -> (T, T) {
    let one = T::one();
    if k == 0 {
        return (one, T::zero());
    }
    let mut val_prev = one; // L_{j-1}
    let mut val = x; // L_j
    let mut der_prev = T::zero(); // L'_{j-1}
    let mut der = one; // L'_j
    for j in 1..k {
        let jf = T::from_usize(j).unwrap();
        let two_j1 = T::from_usize(2 * j + 1).unwrap();
        let j1 = T::from_usize(j + 1).unwrap();
        let val_next = (two_j1 * x * val - jf * val_prev) / j1;
        let der_next = der_prev + two_j1 * val;
        val_prev = val;
        val = val_next;
        der_prev = der;
        der = der_next;
    }
    (val, der)
}

/// Evaluate `L_0..L_k` (and derivatives) at `x` in one recurrence sweep.
pub fn eval_legendre_all<T: RealScalar>(k: usize, x: T) -> (Vec<T>, Vec<T>) {
    let mut vals = Vec::with_capacity(k + 1);
    let mut ders = Vec::with_capacity(k + 1);
    vals.push(T::one());
    ders.push(T::zero());
    if k == 0 {
        return (vals, ders);
    }
    vals.push(x);
    ders.push(T::one());
    for j in 1..k {
        let jf = T::from_usize(j).unwrap();
        let two_j1 = T::from_usize(2 * j + 1).unwrap();
        let j1 = T::from_usize(j + 1).unwrap();
        vals.push((two_j1 * x * vals[j] - jf * vals[j - 1]) / j1);
        ders.push(ders[j - 1] + two_j1 * vals[j]);
    }
    (vals, ders)
}

/// Smallest `e` with `1 + e > 1`, probed at runtime for the scalar type.
fn machine_epsilon<T: RealScalar>() -> T {
    let one = T::one();
    let half = T::from_f64_lossy(0.5);
    let mut eps = one;
    while one + eps * half > one {
        eps *= half;
    }
    eps
}

/// Legendre-Gauss-Lobatto rule with `N + 1` points on `[-1, 1]`.
///
/// Nodes are `-1`, the roots of `L'_N`, and `+1`; the weight at node `x_m`
/// is `2 / (N (N+1) L_N(x_m)²)`. The rule integrates polynomials of degree
/// up to `2N - 1` exactly.
///
/// Interior roots come from Newton iteration on `L'_N` started at the
/// Chebyshev-Lobatto points, polished to `|L'_N| <= 1e-14` (or to step
/// stagnation at machine precision, whichever the floating-point floor
/// allows first).
pub fn lgl_rule<T: RealScalar>(n: usize) -> Result<(DVector<T>, DVector<T>)> {
    if n < 2 {
        return Err(Error::InvalidDegree(n));
    }
    let one = T::one();
    let two = T::from_f64_lossy(2.0);
    let tol = T::from_f64_lossy(1e-14);
    let stall = machine_epsilon::<T>() * T::from_f64_lossy(8.0);
    let nf = T::from_usize(n).unwrap();
    let n1f = T::from_usize(n + 1).unwrap();

    let mut nodes = DVector::zeros(n + 1);
    nodes[0] = -one;
    nodes[n] = one;

    // Newton on L'_N; the second derivative comes from the Legendre ODE,
    // (1 - x²) L''_N = 2 x L'_N - N(N+1) L_N.
    let pi = T::pi();
    for m in 1..n {
        let theta = pi * T::from_usize(m).unwrap() / nf;
        let mut x = -theta.cos();
        let mut converged = false;
        for _ in 0..100 {
            let (val, der) = eval_legendre_with_derivative(n, x);
            if der.abs() <= tol {
                converged = true;
                break;
            }
            let second = (two * x * der - nf * n1f * val) / (one - x * x);
            let step = der / second;
            x -= step;
            if step.abs() <= stall {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceFailure(format!(
                "LGL node {m} of N = {n} did not reach tolerance in 100 steps"
            )));
        }
        nodes[m] = x;
    }

    // The root set of L'_N is symmetric; enforce that exactly so downstream
    // operators come out symmetric to machine precision.
    for m in 1..(n + 1) / 2 {
        let avg = (nodes[m] - nodes[n - m]) / two;
        nodes[m] = avg;
        nodes[n - m] = -avg;
    }
    if n % 2 == 0 {
        nodes[n / 2] = T::zero();
    }

    for m in 1..=n {
        if nodes[m] <= nodes[m - 1] {
            return Err(Error::ConvergenceFailure(format!(
                "LGL nodes of N = {n} are not strictly increasing"
            )));
        }
    }

    let mut weights = DVector::zeros(n + 1);
    for m in 0..=n {
        let ln = eval_legendre(n, nodes[m]);
        weights[m] = two / (nf * n1f * ln * ln);
    }
    Ok((nodes, weights))
}
