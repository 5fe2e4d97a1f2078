//! Temporary diagnostics; removed once tuning is done.

use multisol::config::{ig_vector, IgPreset};
use multisol::deflation::DeflationMode;
use multisol::galerkin::assemble;
use multisol::lm::LMConfig;
use multisol::models::{bec, noncoop_definite, noncoop_indefinite, ModelId};
use multisol::search::{search, SearchConfig};
use std::time::Instant;

#[test]
#[ignore]
fn probe_noncoop_p2() {
    for (label, problem) in [
        ("definite", noncoop_definite::<f64>(2).unwrap()),
        ("indefinite", noncoop_indefinite::<f64>(2).unwrap()),
    ] {
        for n in [12usize, 16] {
            let t = Instant::now();
            let sys = assemble(problem.clone(), n).unwrap();
            let a0 = ig_vector(
                if label == "definite" {
                    ModelId::NoncoopDefinite
                } else {
                    ModelId::NoncoopIndefinite
                },
                IgPreset::Ig1,
                sys.field_size(),
            );
            let cfg = SearchConfig::<f64> {
                deflation_mode: DeflationMode::LastRootOnly,
                consecutive_failures: 12,
                max_attempts: 30,
                max_solutions: 8,
                ..Default::default()
            };
            let lmcfg = LMConfig::default().with_max_iters(150);
            let out = search(&sys, &a0, &cfg, &lmcfg).unwrap();
            println!(
                "noncoop-{label} p=2 N={n}: {} roots / {} attempts ({:?})",
                out.set.len(),
                out.attempts.len(),
                t.elapsed()
            );
            for r in &out.set.records {
                println!(
                    "   |F|={:.2e} |a|={:.3} iters={}",
                    r.residual_norm,
                    r.coefficients.norm(),
                    r.iterations
                );
            }
        }
    }
}

#[test]
#[ignore]
fn probe_bec_n24() {
    let t = Instant::now();
    let sys = assemble(bec::<f64>(), 24).unwrap();
    let a0 = ig_vector(ModelId::Bec, IgPreset::Ig1, sys.field_size());
    let cfg = SearchConfig::<f64> {
        deflation_mode: DeflationMode::LastRootOnly,
        consecutive_failures: 4,
        max_attempts: 6,
        max_solutions: 2,
        ..Default::default()
    };
    let lmcfg = LMConfig::default().with_max_iters(80);
    let out = search(&sys, &a0, &cfg, &lmcfg).unwrap();
    println!(
        "bec N=24: {} roots / {} attempts ({:?})",
        out.set.len(),
        out.attempts.len(),
        t.elapsed()
    );
    for r in &out.set.records {
        let k = sys.field_size();
        let unorm = nalgebra::DVector::from_column_slice(&r.coefficients.as_slice()[..k]).norm();
        let vnorm = nalgebra::DVector::from_column_slice(&r.coefficients.as_slice()[k..]).norm();
        println!(
            "   |F|={:.2e} |u|={:.3} |v|={:.3} iters={}",
            r.residual_norm, unorm, vnorm, r.iterations
        );
    }
}
