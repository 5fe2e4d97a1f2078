//! Run configuration: a strict flat `key = value` file format plus the
//! named initial-guess presets.
//!
//! Lines are `key = value` with `#` starting a comment; keys outside the
//! global set and the selected model's parameter names are rejected with
//! the offending line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::basis::BasisKind;
use crate::deflation::DeflationMode;
use crate::error::{Error, Result};
use crate::galerkin::{assemble_with_oversample, DiscreteSystem};
use crate::lm::LMConfig;
use crate::models::{ModelId, ModelSpec};
use crate::search::SearchConfig;
use crate::Real;

/// Named coefficient-space initial guesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IgPreset {
    /// Per-field constant blocks of `±1`.
    Ig1,
    /// Like `Ig1` with the sine (and for the condensate model, cosine) of
    /// the constants on selected fields.
    Ig2,
    /// Elementwise sine of `Ig1`.
    Ig3,
}

impl IgPreset {
    /// Parse `ig1`/`ig2`/`ig3`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ig1" => Some(IgPreset::Ig1),
            "ig2" => Some(IgPreset::Ig2),
            "ig3" => Some(IgPreset::Ig3),
            _ => None,
        }
    }

    /// Lowercase name.
    pub fn name(&self) -> &'static str {
        match self {
            IgPreset::Ig1 => "ig1",
            IgPreset::Ig2 => "ig2",
            IgPreset::Ig3 => "ig3",
        }
    }
}

/// Where the starting coefficients come from.
#[derive(Debug, Clone)]
pub enum InitialGuess {
    /// One of the named presets.
    Preset(IgPreset),
    /// Explicit coefficients from a `*.coeffs.csv` file.
    File(PathBuf),
}

/// Everything a run needs, resolved from a config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Model with overridden parameters.
    pub model: ModelSpec<Real>,
    /// Degree cap per direction.
    pub n: usize,
    /// Nonlinear-quadrature oversampling factor.
    pub oversample: usize,
    /// Boundary-condition override.
    pub bc_override: Option<BasisKind>,
    /// Domain override, applied to every dimension.
    pub domain_override: Option<(Real, Real)>,
    /// Solver constants.
    pub lm: LMConfig<Real>,
    /// Search loop controls.
    pub search: SearchConfig<Real>,
    /// Starting coefficients.
    pub ig: InitialGuess,
    /// Output directory.
    pub outdir: PathBuf,
    /// Uniform grid resolution for plot exports.
    pub grid_resolution: usize,
    /// Append symmetry images of found roots.
    pub symmetry_expand: bool,
}

impl RunConfig {
    /// Defaults for a model; mirrors an empty config file apart from the
    /// mandatory model line.
    pub fn for_model(id: ModelId) -> Self {
        Self {
            model: ModelSpec::new(id),
            n: 24,
            oversample: 1,
            bc_override: None,
            domain_override: None,
            lm: LMConfig::default(),
            search: SearchConfig::default(),
            ig: InitialGuess::Preset(IgPreset::Ig1),
            outdir: PathBuf::from("out"),
            grid_resolution: 201,
            symmetry_expand: true,
        }
    }

    /// Assemble the discrete system this config describes.
    pub fn build_system(&self) -> Result<DiscreteSystem<Real>> {
        let mut problem = self.model.problem()?;
        if let Some(bc) = self.bc_override {
            problem.bc = bc;
        }
        if let Some(dom) = self.domain_override {
            for d in problem.domain.iter_mut() {
                *d = dom;
            }
        }
        assemble_with_oversample(problem, self.n, self.oversample)
    }

    /// Model parameters as a plain map for summaries.
    pub fn params(&self) -> BTreeMap<String, Real> {
        self.model
            .id()
            .param_names()
            .iter()
            .map(|&k| (k.to_string(), self.model.param(k).unwrap()))
            .collect()
    }
}

/// Constant per-field block values of a preset for a model.
fn preset_field_values(id: ModelId, preset: IgPreset) -> [Real; 2] {
    let s1 = 1.0_f64.sin();
    let c1 = 1.0_f64.cos();
    let ig1: [Real; 2] = match id {
        ModelId::Bec => [1.0, -1.0],
        _ => [-1.0, -1.0],
    };
    match preset {
        IgPreset::Ig1 => ig1,
        IgPreset::Ig2 => match id {
            // 1D models set only the first field to the sine value.
            ModelId::Schnakenberg | ModelId::GrayScott => [-s1, -1.0],
            ModelId::NoncoopDefinite | ModelId::NoncoopIndefinite => [-s1, -s1],
            ModelId::Bec => [-s1, -c1],
        },
        IgPreset::Ig3 => [ig1[0].sin(), ig1[1].sin()],
    }
}

/// Build a preset's coefficient vector for a model discretized with
/// `field_size` modes per field.
pub fn ig_vector(id: ModelId, preset: IgPreset, field_size: usize) -> DVector<Real> {
    let vals = preset_field_values(id, preset);
    DVector::from_fn(2 * field_size, |i, _| {
        if i < field_size {
            vals[0]
        } else {
            vals[1]
        }
    })
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::ParseError {
        line,
        reason: reason.into(),
    }
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("`{key}` needs a nonnegative integer, got `{value}`")))
}

fn parse_real(line: usize, key: &str, value: &str) -> Result<Real> {
    value
        .parse::<Real>()
        .map_err(|_| parse_err(line, format!("`{key}` needs a number, got `{value}`")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(parse_err(
            line,
            format!("`{key}` needs true or false, got `{value}`"),
        )),
    }
}

/// Parse a config file. The `model` key is mandatory; every other key has
/// a documented default. Unknown keys and malformed values are rejected
/// with their line number.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// [`parse_config`] on an in-memory string.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    // Key/value pairs with line numbers, comments stripped.
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(parse_err(line, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        let value = content[eq + 1..].trim();
        if key.is_empty() {
            return Err(parse_err(line, "empty key"));
        }
        if value.is_empty() {
            return Err(parse_err(line, format!("empty value for `{key}`")));
        }
        pairs.push((line, key.to_string(), value.to_string()));
    }

    // The model must be known before parameter keys can be validated.
    let model_id = {
        let Some((line, _, value)) = pairs.iter().find(|(_, k, _)| k == "model") else {
            return Err(Error::MissingRequired("model".into()));
        };
        ModelId::parse(value).ok_or_else(|| {
            parse_err(
                *line,
                format!(
                    "unknown model `{value}`; expected one of {}",
                    ModelId::all()
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            )
        })?
    };

    let mut cfg = RunConfig::for_model(model_id);
    let mut ig_preset: Option<IgPreset> = None;
    let mut ig_file: Option<PathBuf> = None;

    for (line, key, value) in pairs {
        match key.as_str() {
            "model" => {}
            "N" => {
                let n = parse_usize(line, "N", &value)?;
                if n < 2 {
                    return Err(parse_err(line, format!("`N` must be at least 2, got {n}")));
                }
                cfg.n = n;
            }
            "oversample" => {
                let ov = parse_usize(line, "oversample", &value)?;
                if ov == 0 {
                    return Err(parse_err(line, "`oversample` must be at least 1"));
                }
                cfg.oversample = ov;
            }
            "bc" => {
                cfg.bc_override = Some(match value.as_str() {
                    "dirichlet" => BasisKind::Dirichlet,
                    "noflux" | "no-flux" => BasisKind::NoFlux,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("`bc` needs dirichlet or noflux, got `{value}`"),
                        ))
                    }
                });
            }
            "domain" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    return Err(parse_err(line, "`domain` needs `lo,hi`"));
                }
                let lo = parse_real(line, "domain", parts[0])?;
                let hi = parse_real(line, "domain", parts[1])?;
                if hi <= lo {
                    return Err(parse_err(line, "`domain` needs lo < hi"));
                }
                cfg.domain_override = Some((lo, hi));
            }
            "mu0" => cfg.lm.mu0 = parse_real(line, "mu0", &value)?,
            "delta1" => cfg.lm.delta1 = parse_real(line, "delta1", &value)?,
            "delta2" => cfg.lm.delta2 = parse_real(line, "delta2", &value)?,
            "epsilon" => cfg.lm.epsilon = parse_real(line, "epsilon", &value)?,
            "max_iters" => cfg.lm.max_iters = parse_usize(line, "max_iters", &value)?,
            "mu_max" => cfg.lm.mu_max = parse_real(line, "mu_max", &value)?,
            "max_solutions" => {
                cfg.search.max_solutions = parse_usize(line, "max_solutions", &value)?
            }
            "max_attempts" => {
                cfg.search.max_attempts = parse_usize(line, "max_attempts", &value)?
            }
            "perturb_scale" => {
                cfg.search.perturb_scale = parse_real(line, "perturb_scale", &value)?
            }
            "dup_tol" => cfg.search.dup_tol = parse_real(line, "dup_tol", &value)?,
            "rng_seed" => {
                cfg.search.rng_seed = value.parse::<u64>().map_err(|_| {
                    parse_err(line, format!("`rng_seed` needs an integer, got `{value}`"))
                })?
            }
            "consecutive_failures" => {
                cfg.search.consecutive_failures =
                    parse_usize(line, "consecutive_failures", &value)?
            }
            "reuse_initial" => {
                cfg.search.reuse_initial = parse_bool(line, "reuse_initial", &value)?
            }
            "deflation" => {
                cfg.search.deflation_mode = match value.as_str() {
                    "full" => DeflationMode::FullProduct,
                    "last-root" => DeflationMode::LastRootOnly,
                    _ => {
                        return Err(parse_err(
                            line,
                            format!("`deflation` needs full or last-root, got `{value}`"),
                        ))
                    }
                };
            }
            "ig" => {
                ig_preset = Some(IgPreset::parse(&value).ok_or_else(|| {
                    parse_err(line, format!("`ig` needs ig1, ig2 or ig3, got `{value}`"))
                })?);
            }
            "ig_file" => ig_file = Some(PathBuf::from(&value)),
            "outdir" => cfg.outdir = PathBuf::from(&value),
            "grid_resolution" => {
                let r = parse_usize(line, "grid_resolution", &value)?;
                if r < 2 {
                    return Err(parse_err(line, "`grid_resolution` must be at least 2"));
                }
                cfg.grid_resolution = r;
            }
            "symmetry_expand" => {
                cfg.symmetry_expand = parse_bool(line, "symmetry_expand", &value)?
            }
            other => {
                // Model parameters come last; anything else is unknown.
                let parsed = parse_real(line, other, &value);
                let accepted = match parsed {
                    Ok(v) => cfg.model.set_param(other, v),
                    Err(_) => false,
                };
                if !accepted {
                    if cfg.model.id().param_names().contains(&other) {
                        // Known parameter, bad number.
                        return Err(parse_err(
                            line,
                            format!("`{other}` needs a number, got `{value}`"),
                        ));
                    }
                    return Err(Error::UnknownKey {
                        line,
                        key: other.to_string(),
                    });
                }
            }
        }
    }

    if let (Some(_), Some(_)) = (&ig_preset, &ig_file) {
        return Err(Error::MissingRequired(
            "exactly one of `ig` and `ig_file`".into(),
        ));
    }
    if let Some(p) = ig_file {
        cfg.ig = InitialGuess::File(p);
    } else if let Some(p) = ig_preset {
        cfg.ig = InitialGuess::Preset(p);
    }

    Ok(cfg)
}
