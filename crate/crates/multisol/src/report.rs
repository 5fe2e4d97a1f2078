//! Run execution and result persistence: solution/grid CSV files, the
//! run summary, per-attempt traces, and the method-comparison table.
//!
//! All files are written atomically (temp file in the target directory,
//! then rename). Coefficients are serialized with 17 significant digits so
//! a read-back reproduces the in-memory vector exactly, and solution files
//! carry enough header metadata to rebuild their system.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::basis::BasisKind;
use crate::config::{ig_vector, IgPreset, InitialGuess, RunConfig};
use crate::error::{Error, Result};
use crate::galerkin::{assemble_with_oversample, DiscreteSystem};
use crate::lm::{lm_solve, newton_solve};
use crate::models::{ModelId, ModelSpec};
use crate::search::{expand_by_symmetry, search, SolutionSet};
use crate::validate::fd_jacobian;
use crate::Real;

/// Upper-case Roman numeral for a 1-based solution index.
pub fn roman_label(index: usize) -> String {
    const PAIRS: &[(usize, &str)] = &[
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut n = index.max(1);
    let mut out = String::new();
    for &(v, s) in PAIRS {
        while n >= v {
            out.push_str(s);
            n -= v;
        }
    }
    out
}

/// Write `content` to `path` atomically.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn bc_name(bc: BasisKind) -> &'static str {
    match bc {
        BasisKind::Dirichlet => "dirichlet",
        BasisKind::NoFlux => "noflux",
    }
}

fn parse_bc(s: &str) -> Option<BasisKind> {
    match s {
        "dirichlet" => Some(BasisKind::Dirichlet),
        "noflux" => Some(BasisKind::NoFlux),
        _ => None,
    }
}

fn field_names(n_fields: usize) -> Vec<String> {
    if n_fields == 2 {
        vec!["u".into(), "v".into()]
    } else {
        (1..=n_fields).map(|i| format!("u{i}")).collect()
    }
}

/// Serialize one solution's modal coefficients, with header metadata
/// sufficient to rebuild the discrete system.
pub fn coeffs_to_csv(sys: &DiscreteSystem<Real>, spec: &ModelSpec<Real>, a: &DVector<Real>) -> String {
    let p = sys.problem();
    let mut out = String::new();
    let _ = writeln!(out, "# model = {}", spec.id().name());
    let _ = writeln!(out, "# N = {}", sys.degree_cap());
    let _ = writeln!(out, "# oversample = {}", sys.quad_len(0) / sys.basis(0).len());
    let _ = writeln!(out, "# bc = {}", bc_name(p.bc));
    let _ = writeln!(
        out,
        "# domain = {:.16e},{:.16e}",
        p.domain[0].0, p.domain[0].1
    );
    for &name in spec.id().param_names() {
        let _ = writeln!(out, "# param {name} = {:.16e}", spec.param(name).unwrap());
    }
    out.push_str("field,mode,coefficient\n");
    let k = sys.field_size();
    for i in 0..p.n_fields {
        for m in 0..k {
            let _ = writeln!(out, "{i},{m},{:.16e}", a[i * k + m]);
        }
    }
    out
}

/// A coefficients file read back into memory.
#[derive(Debug, Clone)]
pub struct CoeffsFile {
    /// Model with the parameters recorded in the file.
    pub spec: ModelSpec<Real>,
    /// Degree cap.
    pub n: usize,
    /// Quadrature oversampling factor.
    pub oversample: usize,
    /// Boundary condition family.
    pub bc: BasisKind,
    /// Domain applied to every dimension.
    pub domain: (Real, Real),
    /// The coefficient vector.
    pub coeffs: DVector<Real>,
}

impl CoeffsFile {
    /// Rebuild the discrete system the coefficients belong to.
    pub fn build_system(&self) -> Result<DiscreteSystem<Real>> {
        let mut problem = self.spec.problem()?;
        problem.bc = self.bc;
        for d in problem.domain.iter_mut() {
            *d = self.domain;
        }
        assemble_with_oversample(problem, self.n, self.oversample)
    }
}

/// Parse a solution file written by [`coeffs_to_csv`].
pub fn read_coeffs(path: &Path) -> Result<CoeffsFile> {
    let text = fs::read_to_string(path)?;
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    let mut params: BTreeMap<String, Real> = BTreeMap::new();
    let mut rows: Vec<(usize, usize, Real)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |reason: String| Error::ParseError { line, reason };
        if let Some(comment) = raw.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("param ") {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| bad("malformed param header".into()))?;
                let value = v
                    .trim()
                    .parse::<Real>()
                    .map_err(|_| bad(format!("bad param value `{}`", v.trim())))?;
                params.insert(k.trim().to_string(), value);
            } else if let Some((k, v)) = comment.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        if raw.trim().is_empty() || raw.starts_with("field,") {
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 3 {
            return Err(bad("expected `field,mode,coefficient`".into()));
        }
        let f = parts[0]
            .parse::<usize>()
            .map_err(|_| bad("bad field index".into()))?;
        let m = parts[1]
            .parse::<usize>()
            .map_err(|_| bad("bad mode index".into()))?;
        let c = parts[2]
            .parse::<Real>()
            .map_err(|_| bad("bad coefficient".into()))?;
        rows.push((f, m, c));
    }

    let get = |key: &str| {
        meta.get(key)
            .cloned()
            .ok_or_else(|| Error::MissingRequired(format!("coeffs header `{key}`")))
    };
    let model_id = ModelId::parse(&get("model")?).ok_or_else(|| {
        Error::MissingRequired("recognizable `model` in coeffs header".into())
    })?;
    let mut spec = ModelSpec::new(model_id);
    for (k, v) in &params {
        spec.set_param(k, *v);
    }
    let n = get("N")?
        .parse::<usize>()
        .map_err(|_| Error::MissingRequired("numeric `N` in coeffs header".into()))?;
    let oversample = get("oversample")?
        .parse::<usize>()
        .map_err(|_| Error::MissingRequired("numeric `oversample` in coeffs header".into()))?;
    let bc = parse_bc(&get("bc")?)
        .ok_or_else(|| Error::MissingRequired("valid `bc` in coeffs header".into()))?;
    let domain_text = get("domain")?;
    let (lo, hi) = domain_text
        .split_once(',')
        .ok_or_else(|| Error::MissingRequired("`domain = lo,hi` in coeffs header".into()))?;
    let domain = (
        lo.trim()
            .parse::<Real>()
            .map_err(|_| Error::MissingRequired("numeric domain bounds".into()))?,
        hi.trim()
            .parse::<Real>()
            .map_err(|_| Error::MissingRequired("numeric domain bounds".into()))?,
    );

    rows.sort_by_key(|&(f, m, _)| (f, m));
    let coeffs = DVector::from_iterator(rows.len(), rows.iter().map(|&(_, _, c)| c));
    Ok(CoeffsFile {
        spec,
        n,
        oversample,
        bc,
        domain,
        coeffs,
    })
}

/// Serialize a uniform-grid evaluation as CSV: coordinate columns then one
/// column per field, x varying fastest.
pub fn grid_to_csv(sys: &DiscreteSystem<Real>, a: &DVector<Real>, resolution: usize) -> Result<String> {
    let grid = sys.to_grid(a, resolution)?;
    let names = field_names(sys.problem().n_fields);
    let mut out = String::new();
    match sys.problem().dim {
        1 => {
            let _ = writeln!(out, "x,{}", names.join(","));
            for r in 0..resolution {
                let _ = write!(out, "{:.16e}", grid.coords[0][r]);
                for f in &grid.fields {
                    let _ = write!(out, ",{:.16e}", f[r]);
                }
                out.push('\n');
            }
        }
        2 => {
            let _ = writeln!(out, "x,y,{}", names.join(","));
            for ry in 0..resolution {
                for rx in 0..resolution {
                    let idx = rx + resolution * ry;
                    let _ = write!(
                        out,
                        "{:.16e},{:.16e}",
                        grid.coords[0][rx], grid.coords[1][ry]
                    );
                    for f in &grid.fields {
                        let _ = write!(out, ",{:.16e}", f[idx]);
                    }
                    out.push('\n');
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// One solution's entry in `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    /// 1-based index, matching the solution file names.
    pub index: usize,
    /// Roman-numeral label.
    pub label: String,
    /// Undeflated residual norm at the stored coefficients.
    pub residual_norm: f64,
    /// Iterations spent by the run that found it.
    pub iterations: usize,
    /// Attempt number (0 for symmetry images).
    pub attempt: usize,
    /// Initial guess that led to it.
    pub initial_guess: String,
    /// direct / deflated / symmetry.
    pub discovered_by: String,
    /// Euclidean norm of the coefficient vector.
    pub coeff_norm: f64,
}

/// The deterministic run summary (no wall-clock content).
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    /// Model name.
    pub model: String,
    /// Degree cap.
    pub n: usize,
    /// Spatial dimension.
    pub dim: usize,
    /// Field count.
    pub fields: usize,
    /// Boundary conditions.
    pub bc: String,
    /// Model parameters after overrides.
    pub params: BTreeMap<String, f64>,
    /// Restart seed.
    pub rng_seed: u64,
    /// Named preset or file path.
    pub initial_guess: String,
    /// Attempts performed by the search loop.
    pub attempts: usize,
    /// Stored solutions in discovery order.
    pub solutions: Vec<SolutionSummary>,
}

fn summarize(
    cfg: &RunConfig,
    sys: &DiscreteSystem<Real>,
    set: &SolutionSet<Real>,
    attempts: usize,
) -> RunSummary {
    let ig_name = match &cfg.ig {
        InitialGuess::Preset(p) => p.name().to_string(),
        InitialGuess::File(p) => p.display().to_string(),
    };
    RunSummary {
        model: cfg.model.id().name().into(),
        n: cfg.n,
        dim: sys.problem().dim,
        fields: sys.problem().n_fields,
        bc: bc_name(sys.problem().bc).into(),
        params: cfg.params(),
        rng_seed: cfg.search.rng_seed,
        initial_guess: ig_name,
        attempts,
        solutions: set
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| SolutionSummary {
                index: i + 1,
                label: roman_label(i + 1),
                residual_norm: r.residual_norm,
                iterations: r.iterations,
                attempt: r.attempt_index,
                initial_guess: r.initial_guess_id.clone(),
                discovered_by: r.discovered_by.name().into(),
                coeff_norm: r.coefficients.norm(),
            })
            .collect(),
    }
}

/// Resolve the starting coefficients of a run.
pub fn initial_coefficients(cfg: &RunConfig, sys: &DiscreteSystem<Real>) -> Result<DVector<Real>> {
    match &cfg.ig {
        InitialGuess::Preset(p) => {
            assert_eq!(
                sys.problem().n_fields,
                2,
                "presets are defined for two-field systems"
            );
            Ok(ig_vector(cfg.model.id(), *p, sys.field_size()))
        }
        InitialGuess::File(path) => {
            let file = read_coeffs(path)?;
            if file.coeffs.len() != sys.total_size() {
                return Err(Error::DimensionMismatch {
                    expected: sys.total_size(),
                    got: file.coeffs.len(),
                });
            }
            Ok(file.coeffs)
        }
    }
}

/// Execute a configured run and write all outputs under `cfg.outdir`.
///
/// Produces `summary.json`, `runlog.jsonl`, `trace_<attempt>.csv`, and per
/// solution `solutions/<k>.coeffs.csv` + `solutions/<k>.grid.csv`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let sys = cfg.build_system()?;
    let a0 = initial_coefficients(cfg, &sys)?;

    let outcome = search(&sys, &a0, &cfg.search, &cfg.lm)?;
    let mut set = outcome.set;
    if cfg.symmetry_expand {
        let transforms = cfg.model.symmetries();
        if !transforms.is_empty() {
            expand_by_symmetry(&mut set, &sys, &transforms, &cfg.lm, cfg.search.dup_tol)?;
        }
    }

    fs::create_dir_all(cfg.outdir.join("solutions"))?;

    let summary = summarize(cfg, &sys, &set, outcome.attempts.len());
    write_atomic(
        &cfg.outdir.join("summary.json"),
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&summary).expect("summary serialization")
        ),
    )?;

    let mut runlog = String::new();
    for a in &outcome.attempts {
        let _ = writeln!(
            runlog,
            "{}",
            serde_json::to_string(a).expect("attempt serialization")
        );
    }
    write_atomic(&cfg.outdir.join("runlog.jsonl"), &runlog)?;

    for (i, trace) in outcome.traces.iter().enumerate() {
        write_atomic(
            &cfg.outdir.join(format!("trace_{}.csv", i + 1)),
            &trace.to_csv(),
        )?;
    }

    for (i, rec) in set.records.iter().enumerate() {
        let k = i + 1;
        write_atomic(
            &cfg.outdir.join(format!("solutions/{k}.coeffs.csv")),
            &coeffs_to_csv(&sys, &cfg.model, &rec.coefficients),
        )?;
        write_atomic(
            &cfg.outdir.join(format!("solutions/{k}.grid.csv")),
            &grid_to_csv(&sys, &rec.coefficients, cfg.grid_resolution)?,
        )?;
    }

    Ok(summary)
}

/// Solvers a comparison table can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// The trust-region Levenberg-Marquardt iteration.
    Lm,
    /// The plain Newton baseline.
    Newton,
}

impl Method {
    /// Parse `lm` / `newton`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lm" => Some(Method::Lm),
            "newton" => Some(Method::Newton),
            _ => None,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Method::Lm => "lm",
            Method::Newton => "newton",
        }
    }
}

/// Residual-norm comparison across methods and presets.
///
/// Rows are the requested iteration counts with `‖F‖₂` per
/// `(method, preset)` column; a terminated run keeps reporting its final
/// recorded norm (for the Newton baseline that is the overflow magnitude).
/// A final `T` row holds wall-clock seconds per column.
pub fn comparison_table(cfg: &RunConfig, methods: &[Method], iters: &[usize]) -> Result<String> {
    let sys = cfg.build_system()?;
    let presets = [IgPreset::Ig1, IgPreset::Ig2, IgPreset::Ig3];
    let budget = iters.iter().copied().max().unwrap_or(0);

    let mut columns: Vec<(String, Vec<f64>, f64)> = Vec::new();
    for &method in methods {
        for preset in presets {
            let a0 = ig_vector(cfg.model.id(), preset, sys.field_size());
            let t0 = Instant::now();
            let trace = match method {
                Method::Lm => {
                    let lmcfg = cfg.lm.with_max_iters(budget);
                    lm_solve(&sys, &a0, &lmcfg)?.trace
                }
                Method::Newton => newton_solve(&sys, &a0, budget)?.trace,
            };
            let elapsed = t0.elapsed().as_secs_f64();
            let cells = iters
                .iter()
                .map(|&k| {
                    trace
                        .norm_f_at(k)
                        .or_else(|| trace.records.last().map(|r| r.norm_f))
                        .unwrap_or(f64::NAN)
                })
                .collect();
            columns.push((format!("{}_{}", method.name(), preset.name()), cells, elapsed));
        }
    }

    let mut out = String::from("n_it");
    for (name, _, _) in &columns {
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for (row, &k) in iters.iter().enumerate() {
        let _ = write!(out, "{k}");
        for (_, cells, _) in &columns {
            let _ = write!(out, ",{:.4e}", cells[row]);
        }
        out.push('\n');
    }
    out.push('T');
    for (_, _, t) in &columns {
        let _ = write!(out, ",{t:.3}");
    }
    out.push('\n');
    Ok(out)
}

/// Compare the analytic Jacobian against central differences at a seeded
/// random point, for the base system and a one-vector deflated wrapper.
/// Returns the larger relative deviation.
pub fn check_jacobian(cfg: &RunConfig) -> Result<f64> {
    use crate::deflation::{DeflatedSystem, DeflationSet};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    let sys = cfg.build_system()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.search.rng_seed);
    let a = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(-1.0..1.0));

    let j = sys.jacobian(&a)?;
    let j_fd = fd_jacobian(&sys, &a)?;
    let base = (&j - &j_fd).norm() / j_fd.norm();

    let mut defl = DeflationSet::new();
    let offset = DVector::from_fn(sys.total_size(), |_, _| rng.gen_range(1.0..2.0));
    defl.push(&a + offset);
    let wrapped = DeflatedSystem::new(&sys, &defl);
    let j = crate::galerkin::NonlinearSystem::jacobian(&wrapped, &a)?;
    let j_fd = fd_jacobian(&wrapped, &a)?;
    let deflated = (&j - &j_fd).norm() / j_fd.norm();

    Ok(base.max(deflated))
}

/// Re-evaluate a stored solution file on a uniform grid and write the CSV.
pub fn export_grid(solution: &Path, resolution: usize, out: &Path) -> Result<()> {
    let file = read_coeffs(solution)?;
    let sys = file.build_system()?;
    if file.coeffs.len() != sys.total_size() {
        return Err(Error::DimensionMismatch {
            expected: sys.total_size(),
            got: file.coeffs.len(),
        });
    }
    let csv = grid_to_csv(&sys, &file.coeffs, resolution)?;
    write_atomic(out, &csv)
}
