//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout; exits non-zero on any FAIL.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use aksvd::compat::CompatMode;
use aksvd::data::{synth_directed_graph, synth_two_block, GraphKind};
use aksvd::kernels::{build_sources, default_gamma, KernelEvaluator, KernelSpec};
use aksvd::ksvd::{fit, verify_kkt, FitOptions};
use aksvd::linalg::{canonicalize_columns, svd_exact, svd_truncated, SvdResult, RANK_TOL};
use aksvd::nystrom::{
    asym_nystrom, eta_accuracy, solve_to_tolerance, sym_nystrom, KernelSource, NystromConfig,
    SolverKind, SubSolver,
};
use aksvd::pipeline::{graph_reconstruction, node_classification, FeatureParams, FeatureSides, Method, Protocol};
use aksvd::{DenseMatrix, Error};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome, Error> {
    Ok(Outcome { pass, detail })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

/// Sine of the largest principal angle between the column spans of two
/// matrices with orthonormal columns.
fn max_principal_sine(q: &DenseMatrix, p: &DenseMatrix) -> f64 {
    let proj = q.matmul(&q.t_matmul(p).unwrap()).unwrap();
    let resid = p.sub(&proj).unwrap();
    svd_exact(&resid, 0.0).map(|s| s.s.first().copied().unwrap_or(0.0)).unwrap_or(0.0)
}

fn unit_columns(m: &DenseMatrix) -> DenseMatrix {
    let inv: Vec<f64> = m.column_norms().iter().map(|n| 1.0 / n).collect();
    m.scale_columns(&inv)
}

fn c1_linear_recovery() -> Result<Outcome, Error> {
    let mut worst_value: f64 = 0.0;
    let mut worst_angle: f64 = 0.0;
    for seed in 0..20u64 {
        let n = 5 * (seed as usize + 1);
        let a = DenseMatrix::gaussian(n, n, 1000 + seed);
        let opts = FitOptions::new(KernelSpec::linear(), n)
            .compat(CompatMode::PseudoInverse)
            .center(false);
        let model = fit(&a, &opts)?;
        let svd = svd_exact(&a, RANK_TOL)?;
        if model.rank() != n {
            return outcome(false, format!("{n}x{n}: rank {} of {n}", model.rank()));
        }
        for (l, s) in model.lambda.iter().zip(&svd.s) {
            worst_value = worst_value.max((l - s).abs() / s);
        }
        worst_angle = worst_angle
            .max(max_principal_sine(&svd.u, &unit_columns(&model.b_phi)).asin())
            .max(max_principal_sine(&svd.v, &unit_columns(&model.b_psi)).asin());
    }
    outcome(
        worst_value <= 1e-8 && worst_angle <= 1e-6,
        format!("max rel value err {worst_value:.2e}, max angle {worst_angle:.2e}"),
    )
}

fn c2_kkt() -> Result<Outcome, Error> {
    let mut worst_res: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let shapes = [(200, 150), (150, 200), (120, 120), (90, 60)];
    for (k, &(n, m)) in shapes.iter().enumerate() {
        let a = DenseMatrix::gaussian(n, m, 2000 + k as u64);
        for kernel in [KernelSpec::sne(1.0)?, KernelSpec::rbf(2.0)?] {
            for mode in [CompatMode::PseudoInverse, CompatMode::Pca, CompatMode::Random] {
                let model = fit(&a, &FitOptions::new(kernel, 10).compat(mode))?;
                let kkt = verify_kkt(&model, &model.centered_kernel()?)?;
                worst_res = worst_res.max(kkt.residual_phi).max(kkt.residual_psi);
                worst_gap = worst_gap.max(kkt.ortho_gap);
            }
        }
    }
    outcome(
        worst_res <= 1e-8 && worst_gap <= 1e-8,
        format!("max residual {worst_res:.2e}, max ortho gap {worst_gap:.2e}"),
    )
}

fn c3_full_sampling() -> Result<Outcome, Error> {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let n = 120 + 18 * seed as usize;
        let m = 80 + 12 * seed as usize;
        let g = DenseMatrix::gaussian(n, m, 3000 + seed);
        let reference = svd_exact(&g, RANK_TOL)?;
        let r = 10;
        let mut cfg = NystromConfig::new(r, n, m, seed);
        cfg.subproblem = SubSolver::Exact;
        let res = asym_nystrom(&g, &cfg)?;
        worst = worst.max(eta_accuracy(&res.u_tilde, &res.v_tilde, &reference, r)?);
    }
    outcome(worst <= 1e-8, format!("max eta {worst:.2e} (largest 282x188)"))
}

fn c4_symmetric_reduction() -> Result<Outcome, Error> {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let big_n = 150;
        let b = DenseMatrix::gaussian(big_n, 40, 4000 + seed);
        let g = b.matmul_t(&b)?;
        let mut cfg = NystromConfig::new(8, 60, 60, seed);
        cfg.shared_indices = true;
        cfg.subproblem = SubSolver::Exact;
        let asym = asym_nystrom(&g, &cfg)?;
        let sym = sym_nystrom(&g, &cfg)?.normalized_vectors()?;
        let mut u = asym.u_tilde.clone();
        canonicalize_columns(&mut u);
        worst = worst.max(u.sub(&sym)?.max_abs());
        let mut v = asym.v_tilde.clone();
        canonicalize_columns(&mut v);
        worst = worst.max(v.sub(&sym)?.max_abs());
    }
    outcome(worst <= 1e-8, format!("max vector deviation {worst:.2e}"))
}

fn c5_eta_examples() -> Result<Outcome, Error> {
    let ident = DenseMatrix::identity(2);
    let reference = SvdResult {
        u: ident.clone(),
        s: vec![2.0, 1.0],
        v: ident.clone(),
    };
    let exact = eta_accuracy(&ident, &ident, &reference, 2)?;
    let flipped = DenseMatrix::from_rows(&[[-1.0, 0.0], [0.0, 1.0]])?;
    let flip = eta_accuracy(&flipped, &flipped, &reference, 2)?;
    let one = SvdResult {
        u: DenseMatrix::from_rows(&[[1.0], [0.0]])?,
        s: vec![2.0],
        v: DenseMatrix::from_rows(&[[1.0], [0.0]])?,
    };
    let t = 60f64.to_radians();
    let rotated = DenseMatrix::from_rows(&[[t.cos()], [t.sin()]])?;
    let angle = eta_accuracy(&rotated, &one.v, &one, 1)?;
    outcome(
        exact.abs() <= 1e-12 && flip.abs() <= 1e-12 && (angle - 1.0).abs() <= 1e-12,
        format!("exact {exact:.1e}, flip {flip:.1e}, 60deg {angle:.15}"),
    )
}

fn reference_svd(source: &dyn KernelSource, r: usize) -> Result<SvdResult, Error> {
    svd_truncated(&source.materialize(), r, 1e-12, 2000)
}

/// Sample size needed to reach `epsilon`; `None` when unreachable.
fn m_needed(eval: &KernelEvaluator, reference: &SvdResult, cfg: &NystromConfig) -> Result<Option<usize>, Error> {
    match solve_to_tolerance(eval, SolverKind::AsymNystrom, 0.1, reference, cfg) {
        Ok(rep) => Ok(Some(rep.m_used)),
        Err(Error::ToleranceUnreachable { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn c6_decay_trend() -> Result<Outcome, Error> {
    let ks = [0.1, 0.2, 0.3, 0.5, 1.0];
    let (big_n, r) = (2000, 20);
    let mut medians = Vec::new();
    for &k in &ks {
        let mut used = Vec::new();
        for seed in 0..5u64 {
            let graph = synth_directed_graph(GraphKind::TwoBlock, big_n, 600 + seed)?;
            let sources = build_sources(&graph.adjacency);
            let eval = KernelEvaluator::new(KernelSpec::sne(default_gamma(k, &sources))?, &sources)?;
            let reference = reference_svd(&eval, r)?;
            let cfg = NystromConfig::new(r, 0, 0, seed);
            // Unreachable counts as one past the cap.
            used.push(m_needed(&eval, &reference, &cfg)?.map_or(big_n as f64 + 1.0, |m| m as f64));
        }
        medians.push(median(used));
    }
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    let shown: Vec<String> = ks
        .iter()
        .zip(&medians)
        .map(|(k, m)| if *m > big_n as f64 { format!("k={k}:unreached") } else { format!("k={k}:{m}") })
        .collect();
    outcome(inversions <= 1, format!("median m_used {}; inversions {inversions}", shown.join(" ")))
}

fn c7_speedup() -> Result<Outcome, Error> {
    let (big_n, r, runs) = (5000, 20, 3);
    let graph = synth_directed_graph(GraphKind::TwoBlock, big_n, 700)?;
    let sources = build_sources(&graph.adjacency);
    let eval = KernelEvaluator::new(KernelSpec::sne(default_gamma(1.0, &sources))?, &sources)?;
    // The reference is itself a TSVD solve, so it doubles as the first timed run.
    let start = Instant::now();
    let reference = reference_svd(&eval, r)?;
    let mut tsvd_times = vec![start.elapsed().as_secs_f64()];
    let cfg = NystromConfig::new(r, 0, 0, 7);
    for _ in 1..runs {
        tsvd_times.push(solve_to_tolerance(&eval, SolverKind::Tsvd, 0.1, &reference, &cfg)?.wall_time);
    }
    let t_tsvd = median(tsvd_times);
    solve_to_tolerance(&eval, SolverKind::AsymNystrom, 0.1, &reference, &cfg)?;
    let mut ny_times = Vec::new();
    let mut last = None;
    for _ in 0..runs {
        let rep = solve_to_tolerance(&eval, SolverKind::AsymNystrom, 0.1, &reference, &cfg)?;
        ny_times.push(rep.wall_time);
        last = Some(rep);
    }
    let t_ny = median(ny_times);
    let rep = last.expect("runs > 0");
    let (entries, m, n) = (rep.kernel_entries, rep.m_used, rep.n_used);
    let entries = entries.unwrap_or(u64::MAX);
    let ceiling = (big_n * m + n * big_n) as u64;
    let full = (big_n * big_n) as u64;
    outcome(
        t_ny <= 0.5 * t_tsvd && entries <= ceiling && entries < full,
        format!(
            "nystrom {t_ny:.3}s (m={m}) vs tsvd {t_tsvd:.3}s, ratio {:.3}; kernel entries {entries} <= {ceiling} (full {full})",
            t_ny / t_tsvd
        ),
    )
}

fn macro_f1(method: Method, graph_seed: u64, asymmetric_only: bool) -> Result<f64, Error> {
    let graph = if asymmetric_only {
        synth_two_block(200, 0.15, 0.25, 0.05, graph_seed)?
    } else {
        synth_directed_graph(GraphKind::TwoBlock, 200, graph_seed)?
    };
    let sources = build_sources(&graph.adjacency);
    let kernel = match method {
        Method::Kpca => KernelSpec::rbf(default_gamma(1.0, &sources))?,
        _ => KernelSpec::sne(default_gamma(1.0, &sources))?,
    };
    let params = FeatureParams::new(FitOptions::new(kernel, 8));
    let protocol = Protocol {
        seed: graph_seed,
        ..Protocol::default()
    };
    Ok(node_classification(&graph, method, &params, 8, FeatureSides::Both, &protocol)?.macro_f1)
}

fn c8_downstream() -> Result<Outcome, Error> {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, asym) in [("two_block", false), ("two_block asymmetric-only", true)] {
        let mut ksvd = Vec::new();
        let mut kpca = Vec::new();
        for seed in 0..10u64 {
            ksvd.push(macro_f1(Method::Ksvd, 800 + seed, asym)?);
            kpca.push(macro_f1(Method::Kpca, 800 + seed, asym)?);
        }
        let (a, b) = (median(ksvd), median(kpca));
        pass &= a >= b;
        parts.push(format!("{name}: ksvd {a:.3} vs kpca {b:.3}"));
    }
    let cycle = synth_directed_graph(GraphKind::Cycle, 6, 0)?;
    let params = FeatureParams::new(FitOptions::new(KernelSpec::linear(), 6));
    let (l1, _) = graph_reconstruction(&cycle, Method::Svd, &params)?;
    pass &= l1 == 0.0;
    parts.push(format!("6-cycle l1 {l1}"));
    outcome(pass, parts.join("; "))
}

fn c9_properties() -> Result<Outcome, Error> {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, check) in common::ALL {
        if let Err(e) = check(&mut common::runner(64)) {
            failures.push(format!("{name}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 60.0;
    let detail = if failures.is_empty() {
        format!("{} suites green", common::ALL.len())
    } else {
        failures.join("; ")
    };
    outcome(pass, detail)
}

fn main() -> ExitCode {
    // Cargo passes libtest flags (e.g. --nocapture); listing must not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, fn() -> Result<Outcome, Error>, Option<f64>); 9] = [
        ("linear kernel recovers SVD", c1_linear_recovery, Some(5.0)),
        ("KKT residuals", c2_kkt, Some(30.0)),
        ("Nystrom exact at full sampling", c3_full_sampling, Some(20.0)),
        ("symmetric reduction", c4_symmetric_reduction, None),
        ("eta examples", c5_eta_examples, None),
        ("spectrum decay trend", c6_decay_trend, None),
        ("speedup trend", c7_speedup, None),
        ("downstream trend", c8_downstream, None),
        ("property suites", c9_properties, Some(60.0)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => {
                let in_budget = budget.map_or(true, |b| secs < b);
                let note = if in_budget { String::new() } else { format!(" [over {}s budget]", budget.unwrap()) };
                (o.pass && in_budget, format!("{}{note}", o.detail))
            }
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} ({secs:.2}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
