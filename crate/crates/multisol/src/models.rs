//! The benchmark systems: two 1D reaction-diffusion models with no-flux
//! boundaries (Schnakenberg, Gray-Scott) and three 2D Dirichlet systems
//! (two noncooperative couplings and a two-component Bose-Einstein
//! condensate model), each with frozen default parameters, analytic
//! first-derivative Jacobians, and declared solution symmetries.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;

use crate::basis::BasisKind;
use crate::error::{Error, Result};
use crate::galerkin::{DiscreteSystem, ProblemDef};
use crate::RealScalar;

/// `sign(u)·|u|^p`, the odd power used by the noncooperative systems.
pub fn sign_pow<T: RealScalar>(u: T, p: T) -> T {
    if u == T::zero() {
        return T::zero();
    }
    let mag = u.abs().powf(p);
    if u > T::zero() {
        mag
    } else {
        -mag
    }
}

/// Derivative `p·|u|^{p-1}` of [`sign_pow`], continuous for `p ≥ 2` with
/// the convention that it vanishes at `u = 0`.
pub fn sign_pow_derivative<T: RealScalar>(u: T, p: T) -> T {
    if u == T::zero() {
        return T::zero();
    }
    p * u.abs().powf(p - T::one())
}

/// Identifier of a benchmark system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelId {
    /// Activator-substrate Turing model, 1D no-flux.
    Schnakenberg,
    /// Autocatalytic activator-substrate model, 1D no-flux.
    GrayScott,
    /// Noncooperative system of definite type, 2D Dirichlet.
    NoncoopDefinite,
    /// Noncooperative system of indefinite type, 2D Dirichlet.
    NoncoopIndefinite,
    /// Two-component Bose-Einstein condensate system, 2D Dirichlet.
    Bec,
}

impl ModelId {
    /// Canonical lowercase name used by the CLI config.
    pub fn name(&self) -> &'static str {
        match self {
            ModelId::Schnakenberg => "schnakenberg",
            ModelId::GrayScott => "grayscott",
            ModelId::NoncoopDefinite => "noncoop-definite",
            ModelId::NoncoopIndefinite => "noncoop-indefinite",
            ModelId::Bec => "bec",
        }
    }

    /// Parse a config-file model name.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "schnakenberg" => Some(ModelId::Schnakenberg),
            "grayscott" | "gray-scott" => Some(ModelId::GrayScott),
            "noncoop-definite" => Some(ModelId::NoncoopDefinite),
            "noncoop-indefinite" => Some(ModelId::NoncoopIndefinite),
            "bec" => Some(ModelId::Bec),
            _ => None,
        }
    }

    /// Parameter names this model accepts.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            ModelId::Schnakenberg => &["d1", "d2", "a", "b", "c"],
            ModelId::GrayScott => &["d1", "d2", "rho", "mu"],
            ModelId::NoncoopDefinite | ModelId::NoncoopIndefinite => {
                &["p", "lambda", "gamma", "delta"]
            }
            ModelId::Bec => &["eta1", "eta2", "mu1", "mu2", "beta"],
        }
    }

    /// All identifiers, for listings.
    pub fn all() -> &'static [ModelId] {
        &[
            ModelId::Schnakenberg,
            ModelId::GrayScott,
            ModelId::NoncoopDefinite,
            ModelId::NoncoopIndefinite,
            ModelId::Bec,
        ]
    }
}

/// Coefficient-level realization of a solution symmetry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymmetryTransform {
    /// Negate the coefficient block of every field with a `true` entry.
    SignFlip(Vec<bool>),
    /// Half-period shift `x → (x + L/2) mod L` in the first dimension.
    HalfShift,
}

/// A benchmark system with (possibly overridden) parameters.
#[derive(Debug, Clone)]
pub struct ModelSpec<T> {
    id: ModelId,
    params: BTreeMap<&'static str, T>,
}

impl<T: RealScalar> ModelSpec<T> {
    /// Model with its frozen default parameters.
    pub fn new(id: ModelId) -> Self {
        let f = T::from_f64_lossy;
        let defaults: &[(&'static str, f64)] = match id {
            ModelId::Schnakenberg => &[
                ("d1", 1.0),
                ("d2", 50.0),
                ("a", 1.0 / 3.0),
                ("b", 2.0 / 3.0),
                ("c", 200.0),
            ],
            ModelId::GrayScott => &[
                ("d1", 2.5e-4),
                ("d2", 5.0e-4),
                ("rho", 0.04),
                ("mu", 0.065),
            ],
            ModelId::NoncoopDefinite => {
                &[("p", 3.0), ("lambda", -0.5), ("gamma", -0.5), ("delta", 5.0)]
            }
            ModelId::NoncoopIndefinite => {
                &[("p", 3.0), ("lambda", -0.5), ("gamma", -1.0), ("delta", 0.5)]
            }
            ModelId::Bec => &[
                ("eta1", -1.0),
                ("eta2", -1.0),
                ("mu1", 1.0),
                ("mu2", 1.0),
                ("beta", -5.0),
            ],
        };
        let params = defaults.iter().map(|&(k, v)| (k, f(v))).collect();
        Self { id, params }
    }

    /// Which model this is.
    pub fn id(&self) -> ModelId {
        self.id
    }

    /// Parameter value by name.
    pub fn param(&self, key: &str) -> Option<T> {
        self.params.get(key).copied()
    }

    /// Override a parameter; returns false for names the model does not
    /// have.
    pub fn set_param(&mut self, key: &str, value: T) -> bool {
        if let Some(&canonical) = self
            .id
            .param_names()
            .iter()
            .find(|&&name| name == key)
        {
            self.params.insert(canonical, value);
            true
        } else {
            false
        }
    }

    /// Builder-style [`ModelSpec::set_param`]; panics on unknown names.
    pub fn with_param(mut self, key: &str, value: T) -> Self {
        assert!(self.set_param(key, value), "unknown parameter `{key}`");
        self
    }

    /// Symmetry transforms whose images are again solutions.
    pub fn symmetries(&self) -> Vec<SymmetryTransform> {
        match self.id {
            ModelId::GrayScott => vec![SymmetryTransform::HalfShift],
            ModelId::Bec => vec![
                SymmetryTransform::SignFlip(vec![true, false]),
                SymmetryTransform::SignFlip(vec![false, true]),
                SymmetryTransform::SignFlip(vec![true, true]),
            ],
            _ => Vec::new(),
        }
    }

    /// Build the continuous problem definition.
    pub fn problem(&self) -> Result<ProblemDef<T>> {
        let p = |k: &str| self.params[k];
        match self.id {
            ModelId::Schnakenberg => {
                let (a, b, c) = (p("a"), p("b"), p("c"));
                Ok(ProblemDef::new(
                    1,
                    2,
                    vec![p("d1"), p("d2")],
                    BasisKind::NoFlux,
                    vec![(T::zero(), T::one())],
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        let uv2 = u[0] * u[0] * u[1];
                        out[0] = c * (u[0] - a - uv2);
                        out[1] = c * (uv2 - b);
                    }),
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        let two = T::from_f64_lossy(2.0);
                        out[0] = c * (T::one() - two * u[0] * u[1]);
                        out[1] = -c * u[0] * u[0];
                        out[2] = two * c * u[0] * u[1];
                        out[3] = c * u[0] * u[0];
                    }),
                ))
            }
            ModelId::GrayScott => {
                let (rho, mu) = (p("rho"), p("mu"));
                Ok(ProblemDef::new(
                    1,
                    2,
                    vec![p("d1"), p("d2")],
                    BasisKind::NoFlux,
                    vec![(T::zero(), T::one())],
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        let uu = u[0] * u[0];
                        out[0] = (mu + rho) * u[0] - u[1] * uu;
                        out[1] = u[1] * uu - rho * (T::one() - u[1]);
                    }),
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        let two = T::from_f64_lossy(2.0);
                        out[0] = (mu + rho) - two * u[0] * u[1];
                        out[1] = -u[0] * u[0];
                        out[2] = two * u[0] * u[1];
                        out[3] = u[0] * u[0] + rho;
                    }),
                ))
            }
            ModelId::NoncoopDefinite | ModelId::NoncoopIndefinite => {
                let pw = p("p");
                let pf = pw.to_f64().unwrap_or(f64::NAN);
                if pf != 2.0 && pf != 3.0 {
                    return Err(Error::UnsupportedExponent(pf));
                }
                let (lambda, gamma, delta) = (p("lambda"), p("gamma"), p("delta"));
                // Definite type subtracts the |v|^{q-1}v term, indefinite
                // adds it.
                let vsign = if self.id == ModelId::NoncoopDefinite {
                    -T::one()
                } else {
                    T::one()
                };
                let half_width = if self.id == ModelId::NoncoopDefinite {
                    T::one()
                } else {
                    T::from_f64_lossy(3.0)
                };
                Ok(ProblemDef::new(
                    2,
                    2,
                    vec![T::one(), T::one()],
                    BasisKind::Dirichlet,
                    vec![(-half_width, half_width); 2],
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        out[0] = lambda * u[0] - delta * u[1] + sign_pow(u[0], pw);
                        out[1] = delta * u[0] + gamma * u[1] + vsign * sign_pow(u[1], pw);
                    }),
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        out[0] = lambda + sign_pow_derivative(u[0], pw);
                        out[1] = -delta;
                        out[2] = delta;
                        out[3] = gamma + vsign * sign_pow_derivative(u[1], pw);
                    }),
                ))
            }
            ModelId::Bec => {
                let (eta1, eta2) = (p("eta1"), p("eta2"));
                let (mu1, mu2, beta) = (p("mu1"), p("mu2"), p("beta"));
                Ok(ProblemDef::new(
                    2,
                    2,
                    vec![T::one(), T::one()],
                    BasisKind::Dirichlet,
                    vec![(T::zero(), T::one()); 2],
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        out[0] = eta1 * u[0] + mu1 * u[0] * u[0] * u[0] + beta * u[0] * u[1] * u[1];
                        out[1] = eta2 * u[1] + mu2 * u[1] * u[1] * u[1] + beta * u[0] * u[0] * u[1];
                    }),
                    Arc::new(move |u: &[T], _x: &[T], out: &mut [T]| {
                        let two = T::from_f64_lossy(2.0);
                        let three = T::from_f64_lossy(3.0);
                        out[0] = eta1 + three * mu1 * u[0] * u[0] + beta * u[1] * u[1];
                        out[1] = two * beta * u[0] * u[1];
                        out[2] = two * beta * u[0] * u[1];
                        out[3] = eta2 + three * mu2 * u[1] * u[1] + beta * u[0] * u[0];
                    }),
                ))
            }
        }
    }
}

/// The Schnakenberg model with the paper defaults and a chosen `d₂`.
pub fn schnakenberg<T: RealScalar>(d2: T) -> ProblemDef<T> {
    ModelSpec::new(ModelId::Schnakenberg)
        .with_param("d2", d2)
        .problem()
        .expect("schnakenberg is always well-formed")
}

/// The Gray-Scott model with its default parameters.
pub fn gray_scott<T: RealScalar>() -> ProblemDef<T> {
    ModelSpec::new(ModelId::GrayScott)
        .problem()
        .expect("gray-scott is always well-formed")
}

/// Noncooperative system of definite type with exponent `p = q ∈ {2, 3}`.
pub fn noncoop_definite<T: RealScalar>(p: usize) -> Result<ProblemDef<T>> {
    ModelSpec::new(ModelId::NoncoopDefinite)
        .with_param("p", T::from_usize(p).unwrap())
        .problem()
}

/// Noncooperative system of indefinite type with exponent `p = q ∈ {2, 3}`.
pub fn noncoop_indefinite<T: RealScalar>(p: usize) -> Result<ProblemDef<T>> {
    ModelSpec::new(ModelId::NoncoopIndefinite)
        .with_param("p", T::from_usize(p).unwrap())
        .problem()
}

/// The two-component condensate system with its default parameters.
pub fn bec<T: RealScalar>() -> ProblemDef<T> {
    ModelSpec::new(ModelId::Bec)
        .problem()
        .expect("bec is always well-formed")
}

/// Map a root's coefficients through a symmetry transform.
///
/// Sign flips act directly on coefficient blocks. The half-period shift
/// evaluates the field at the shifted node positions and re-projects
/// through the LGL quadrature, so it needs a 1D no-flux system.
pub fn apply_symmetry<T: RealScalar>(
    sys: &DiscreteSystem<T>,
    transform: &SymmetryTransform,
    a: &DVector<T>,
) -> Result<DVector<T>> {
    match transform {
        SymmetryTransform::SignFlip(flip) => {
            if flip.len() != sys.problem().n_fields {
                return Err(Error::UnsupportedTransform(format!(
                    "sign flip lists {} fields, system has {}",
                    flip.len(),
                    sys.problem().n_fields
                )));
            }
            let k = sys.field_size();
            let mut out = a.clone();
            for (i, &do_flip) in flip.iter().enumerate() {
                if do_flip {
                    for idx in i * k..(i + 1) * k {
                        out[idx] = -out[idx];
                    }
                }
            }
            Ok(out)
        }
        SymmetryTransform::HalfShift => {
            if sys.problem().dim != 1 {
                return Err(Error::UnsupportedTransform(
                    "half-period shift needs a 1D system".into(),
                ));
            }
            let basis = sys.basis(0);
            let (lo, hi) = basis.interval();
            let len = hi - lo;
            let half = len / T::from_f64_lossy(2.0);
            // Shifted physical positions of the quadrature nodes, wrapped
            // back into the domain.
            let shifted: Vec<T> = (0..sys.quad_len(0))
                .map(|m| {
                    let x = basis.from_reference(sys.quad_nodes(0)[m]);
                    let mut y = x - lo + half;
                    if y >= len {
                        y -= len;
                    }
                    basis.to_reference(lo + y)
                })
                .collect();
            let eval = basis.value_matrix_at(&shifted);
            let k = sys.field_size();
            let nodal: Vec<nalgebra::DMatrix<T>> = (0..sys.problem().n_fields)
                .map(|i| {
                    let coeffs = DVector::from_column_slice(sys.field_coeffs(a, i));
                    let vals = &eval * coeffs;
                    nalgebra::DMatrix::from_column_slice(k, 1, vals.as_slice())
                })
                .collect();
            sys.project_from_nodes(&nodal)
        }
    }
}
