//! Accuracy-targeted solver runs and timing for solver comparisons.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{svd_randomized, svd_truncated, DenseMatrix, SvdResult, DEFAULT_OVERSAMPLE};

use super::{asym_nystrom, sym_nystrom_svd, eta_accuracy, KernelSource, NystromConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Tsvd,
    Rsvd,
    SymNystrom,
    AsymNystrom,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::Tsvd,
        SolverKind::Rsvd,
        SolverKind::SymNystrom,
        SolverKind::AsymNystrom,
    ];
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Tsvd => "tsvd",
            SolverKind::Rsvd => "rsvd",
            SolverKind::SymNystrom => "sym_nystrom",
            SolverKind::AsymNystrom => "asym_nystrom",
        })
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "tsvd" => Ok(SolverKind::Tsvd),
            "rsvd" => Ok(SolverKind::Rsvd),
            "sym_nystrom" | "sym_nys" => Ok(SolverKind::SymNystrom),
            "asym_nystrom" | "nystrom" => Ok(SolverKind::AsymNystrom),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

/// Approximate leading singular triplets: unit columns in `u` and `v`.
#[derive(Clone, Debug)]
pub struct Approximation {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl From<SvdResult> for Approximation {
    fn from(svd: SvdResult) -> Self {
        Self {
            u: svd.u,
            s: svd.s,
            v: svd.v,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ToleranceReport {
    pub solver: SolverKind,
    pub approximation: Approximation,
    /// Column samples (Nyström), oversamples (RSVD) or M (TSVD).
    pub m_used: usize,
    /// Row samples for Nyström methods, otherwise N.
    pub n_used: usize,
    pub eta: f64,
    pub attempts: usize,
    /// Seconds spent in the successful attempt, kernel evaluation included.
    pub wall_time: f64,
    /// Seconds over all attempts.
    pub total_time: f64,
    /// Kernel entries evaluated by the successful attempt, when the source
    /// counts them.
    pub kernel_entries: Option<u64>,
}

const TSVD_TOL: f64 = 1e-12;
const TSVD_MAX_ITERS: usize = 2000;

/// One solver run at a fixed size. `size` is the column sample count for
/// Nyström methods and the oversample for RSVD; TSVD ignores it.
pub fn run_solver(
    source: &dyn KernelSource,
    solver: SolverKind,
    cfg: &NystromConfig,
    size: usize,
) -> Result<(Approximation, usize)> {
    let shape = source.shape();
    match solver {
        SolverKind::Tsvd => {
            let g = source.materialize();
            Ok((svd_truncated(&g, cfg.r, TSVD_TOL, TSVD_MAX_ITERS)?.into(), shape.0))
        }
        SolverKind::Rsvd => {
            let g = source.materialize();
            let svd = svd_randomized(&g, cfg.r, size, super::DEFAULT_POWER_ITERS, cfg.seed)?;
            Ok((svd.into(), shape.0))
        }
        SolverKind::AsymNystrom => {
            let c = sized_config(cfg, shape, size);
            let res = asym_nystrom(source, &c)?;
            Ok((
                Approximation {
                    u: res.u_tilde,
                    s: res.lambda_tilde,
                    v: res.v_tilde,
                },
                c.n,
            ))
        }
        SolverKind::SymNystrom => {
            let g = source.materialize();
            let c = sized_config(cfg, shape, size);
            let (u, s, v) = sym_nystrom_svd(&g, &c)?;
            Ok((Approximation { u, s, v }, c.n))
        }
    }
}

fn sized_config(cfg: &NystromConfig, shape: (usize, usize), m: usize) -> NystromConfig {
    let m = m.min(shape.1);
    NystromConfig {
        m,
        n: NystromConfig::coupled_n(cfg.r, m, shape),
        shared_indices: cfg.shared_indices && shape.0 == shape.1,
        ..cfg.clone()
    }
}

fn start_size(solver: SolverKind, cfg: &NystromConfig, shape: (usize, usize)) -> usize {
    match solver {
        SolverKind::Tsvd => shape.1,
        SolverKind::Rsvd => DEFAULT_OVERSAMPLE.min(rsvd_cap(cfg, shape)),
        _ => {
            let start = if cfg.m > 0 { cfg.m } else { NystromConfig::default_start(cfg.r) };
            start.max(cfg.r).min(size_cap(solver, cfg, shape))
        }
    }
}

fn rsvd_cap(cfg: &NystromConfig, shape: (usize, usize)) -> usize {
    shape.0.min(shape.1).saturating_sub(cfg.r)
}

fn size_cap(solver: SolverKind, cfg: &NystromConfig, shape: (usize, usize)) -> usize {
    match solver {
        SolverKind::Tsvd => shape.1,
        SolverKind::Rsvd => rsvd_cap(cfg, shape),
        _ => cfg.m_max.min(shape.1),
    }
}

/// Grows the sample size (Nyström) or the oversample (RSVD) by
/// `cfg.m_growth` until `η ≤ epsilon` against `reference`, or the cap is
/// hit. TSVD runs once to near machine precision.
pub fn solve_to_tolerance(
    source: &dyn KernelSource,
    solver: SolverKind,
    epsilon: f64,
    reference: &SvdResult,
    cfg: &NystromConfig,
) -> Result<ToleranceReport> {
    if !(cfg.m_growth > 1.0 && cfg.m_growth <= 4.0) {
        return Err(Error::Config(format!(
            "m_growth must lie in (1, 4], got {}",
            cfg.m_growth
        )));
    }
    let shape = source.shape();
    let cap = size_cap(solver, cfg, shape);
    let mut size = start_size(solver, cfg, shape);
    let mut attempts = 0;
    let mut total_time = 0.0;
    loop {
        attempts += 1;
        let before = source.evaluated();
        let start = Instant::now();
        let (approx, n_used) = run_solver(source, solver, cfg, size)?;
        let wall_time = start.elapsed().as_secs_f64();
        let kernel_entries = source.evaluated().zip(before).map(|(a, b)| a - b);
        total_time += wall_time;
        let eta = eta_accuracy(&approx.u, &approx.v, reference, cfg.r)?;
        log::debug!("{solver} size {size}: eta {eta:.3e} in {wall_time:.3}s");
        if eta <= epsilon {
            return Ok(ToleranceReport {
                solver,
                approximation: approx,
                m_used: size,
                n_used,
                eta,
                attempts,
                wall_time,
                total_time,
                kernel_entries,
            });
        }
        if size >= cap || solver == SolverKind::Tsvd {
            return Err(Error::ToleranceUnreachable { epsilon, eta, cap });
        }
        size = ((size as f64 * cfg.m_growth).ceil() as usize).max(size + 1).min(cap);
    }
}

/// Median wall time of `runs` timed calls after one untimed warmup.
pub fn time_solver<T>(runs: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    f()?;
    let mut times = Vec::with_capacity(runs.max(1));
    let mut last = None;
    for _ in 0..runs.max(1) {
        let start = Instant::now();
        last = Some(f()?);
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    let median = if times.len() % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    };
    Ok((last.expect("at least one run"), median))
}
