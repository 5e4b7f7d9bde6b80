//! Solver benchmarks and bandwidth sweeps. Timings are the solver call of
//! the successful attempt (kernel evaluation included, I/O and the η check
//! excluded): one warmup, then the median of `bench.runs`.

use std::io::Write;
use std::path::Path;

use aksvd::kernels::KernelEvaluator;
use aksvd::linalg::{fmt_f64, svd_exact, svd_truncated, SvdResult, RANK_TOL};
use aksvd::nystrom::{solve_to_tolerance, NystromConfig, SolverKind, ToleranceReport};

use crate::commands::{config_error, evaluator, load_data, nystrom_config, out_dir, write_manifest, CliResult};
use crate::config::RunConfig;

enum Measured {
    Reached { report: ToleranceReport, median: f64 },
    Unreachable { eta: f64, cap: usize },
}

impl Measured {
    fn time(&self) -> Option<f64> {
        match self {
            Measured::Reached { median, .. } => Some(*median),
            Measured::Unreachable { .. } => None,
        }
    }
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

fn measure(
    eval: &KernelEvaluator,
    solver: SolverKind,
    epsilon: f64,
    reference: &SvdResult,
    cfg: &NystromConfig,
    runs: usize,
) -> CliResult<Measured> {
    let once = || solve_to_tolerance(eval, solver, epsilon, reference, cfg);
    match once() {
        Ok(_) => {}
        Err(aksvd::Error::ToleranceUnreachable { eta, cap, .. }) => return Ok(Measured::Unreachable { eta, cap }),
        Err(e) => return Err(e.into()),
    }
    let mut times = Vec::with_capacity(runs);
    let mut last = None;
    for _ in 0..runs {
        let report = once()?;
        times.push(report.wall_time);
        last = Some(report);
    }
    Ok(Measured::Reached {
        report: last.expect("runs >= 1"),
        median: median(times),
    })
}

fn reference(cfg: &RunConfig, eval: &KernelEvaluator, r: usize) -> CliResult<SvdResult> {
    let g = eval.full();
    Ok(match cfg.get("bench.reference") {
        "tsvd" => svd_truncated(&g, r, 1e-12, 2000)?,
        "exact" => svd_exact(&g, RANK_TOL)?.truncated(r),
        other => return Err(config_error(format!("unknown bench.reference '{other}' (tsvd or exact)"))),
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(aksvd::Error::from)?;
    w.write_record(header).map_err(aksvd::Error::from)?;
    for row in rows {
        w.write_record(row).map_err(aksvd::Error::from)?;
    }
    w.flush()?;
    let stdout = std::io::stdout();
    let mut out = csv::Writer::from_writer(stdout.lock());
    out.write_record(header).map_err(aksvd::Error::from)?;
    for row in rows {
        out.write_record(row).map_err(aksvd::Error::from)?;
    }
    out.flush()?;
    std::io::stdout().flush()?;
    Ok(())
}

const BENCH_HEADER: [&str; 11] = [
    "solver", "N", "M", "r", "epsilon", "m_used", "eta", "wall_time_s", "seed", "status", "speedup",
];

const SWEEP_HEADER: [&str; 13] = [
    "k", "gamma", "N", "M", "r", "epsilon", "m_used", "eta", "wall_time_s", "rsvd_time_s", "speedup", "seed",
    "status",
];

pub fn bench(cfg: &RunConfig) -> CliResult<()> {
    let solvers: Vec<SolverKind> = cfg.list("bench.solvers")?;
    let epsilons: Vec<f64> = cfg.list("bench.epsilons")?;
    let runs: usize = cfg.parse("bench.runs")?;
    let trials: u64 = cfg.parse("bench.trials")?;
    let a = load_data(cfg, None)?.into_matrix();
    let eval = evaluator(cfg, &a, None)?;
    let base = nystrom_config(cfg)?;
    let (big_n, big_m) = eval.shape();
    let reference = reference(cfg, &eval, base.r)?;

    let mut rows = Vec::new();
    for trial in 0..trials {
        let seed = base.seed.wrapping_add(trial);
        let ny = NystromConfig { seed, ..base.clone() };
        for &epsilon in &epsilons {
            let measured: Vec<(SolverKind, Measured)> = solvers
                .iter()
                .map(|&s| measure(&eval, s, epsilon, &reference, &ny, runs).map(|m| (s, m)))
                .collect::<CliResult<_>>()?;
            let t_rsvd = measured
                .iter()
                .find(|(s, _)| *s == SolverKind::Rsvd)
                .and_then(|(_, m)| m.time());
            for (solver, m) in &measured {
                let (m_used, eta, status) = match m {
                    Measured::Reached { report, .. } => (report.m_used, report.eta, "ok"),
                    Measured::Unreachable { eta, cap } => (*cap, *eta, "unreachable"),
                };
                let speedup = t_rsvd.zip(m.time()).map(|(r, t)| r / t);
                rows.push(vec![
                    solver.to_string(),
                    big_n.to_string(),
                    big_m.to_string(),
                    ny.r.to_string(),
                    fmt_f64(epsilon),
                    m_used.to_string(),
                    fmt_f64(eta),
                    opt(m.time()),
                    seed.to_string(),
                    status.to_string(),
                    opt(speedup),
                ]);
            }
        }
    }
    let out = out_dir(cfg)?;
    write_csv(&out.join("bench.csv"), &BENCH_HEADER, &rows)?;
    if cfg.flag("bench.sweep")? {
        let sweep_rows = sweep_rows(cfg, &a)?;
        let mut w = csv::Writer::from_path(out.join("sweep.csv")).map_err(aksvd::Error::from)?;
        w.write_record(SWEEP_HEADER).map_err(aksvd::Error::from)?;
        for row in &sweep_rows {
            w.write_record(row).map_err(aksvd::Error::from)?;
        }
        w.flush()?;
    }
    write_manifest(&out, "bench", cfg)
}

/// Per bandwidth multiplier `k`: samples needed by asymmetric Nyström at
/// `nystrom.epsilon` and its speedup over RSVD.
fn sweep_rows(cfg: &RunConfig, a: &aksvd::DenseMatrix) -> CliResult<Vec<Vec<String>>> {
    let ks: Vec<f64> = cfg.list("sweep.k")?;
    let runs: usize = cfg.parse("bench.runs")?;
    let ny = nystrom_config(cfg)?;
    let mut rows = Vec::new();
    for k in ks {
        if !(k > 0.0 && k.is_finite()) {
            return Err(config_error(format!("sweep.k entries must be positive, got {k}")));
        }
        let eval = evaluator(cfg, a, Some(k))?;
        let (big_n, big_m) = eval.shape();
        let reference = reference(cfg, &eval, ny.r)?;
        let asym = measure(&eval, SolverKind::AsymNystrom, ny.epsilon, &reference, &ny, runs)?;
        let rsvd = measure(&eval, SolverKind::Rsvd, ny.epsilon, &reference, &ny, runs)?;
        let (m_used, eta, status) = match &asym {
            Measured::Reached { report, .. } => (report.m_used, report.eta, "ok"),
            Measured::Unreachable { eta, cap } => (*cap, *eta, "unreachable"),
        };
        rows.push(vec![
            fmt_f64(k),
            fmt_f64(eval.spec().gamma),
            big_n.to_string(),
            big_m.to_string(),
            ny.r.to_string(),
            fmt_f64(ny.epsilon),
            m_used.to_string(),
            fmt_f64(eta),
            opt(asym.time()),
            opt(rsvd.time()),
            opt(rsvd.time().zip(asym.time()).map(|(r, t)| r / t)),
            ny.seed.to_string(),
            status.to_string(),
        ]);
    }
    Ok(rows)
}

pub fn nystrom_sweep(cfg: &RunConfig) -> CliResult<()> {
    let a = load_data(cfg, None)?.into_matrix();
    let rows = sweep_rows(cfg, &a)?;
    let out = out_dir(cfg)?;
    write_csv(&out.join("sweep.csv"), &SWEEP_HEADER, &rows)?;
    write_manifest(&out, "nystrom-sweep", cfg)
}
