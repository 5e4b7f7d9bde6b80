//! Property checks shared by the `properties` and `acceptance` targets.
#![allow(dead_code)]

use aksvd::compat::{compat_pseudoinverse, compat_random, CompatMode};
use aksvd::data::synth_two_block;
use aksvd::eval::stratified_split;
use aksvd::kernels::{build_sources, center, kernel_matrix, KernelEvaluator, KernelSpec};
use aksvd::ksvd::{fit, EmbeddingSide, FitOptions, KsvdSolver};
use aksvd::linalg::{pseudoinverse, svd_exact, svd_randomized, RANK_TOL};
use aksvd::nystrom::{asym_nystrom, eta_accuracy, sym_nystrom, NystromConfig};
use aksvd::DenseMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Check = fn(&mut TestRunner) -> Result<(), String>;

/// Every property with a display name.
pub const ALL: [(&str, Check); 6] = [
    ("sne row-stochastic", sne_row_stochastic),
    ("double-centering sums", double_centering),
    ("moore-penrose identities", moore_penrose),
    ("eta sign/scale invariance", eta_invariance),
    ("out-of-sample self-consistency", oos_self_consistency),
    ("seeded determinism", determinism),
];

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn shape() -> impl Strategy<Value = (usize, usize, u64)> {
    (2usize..14, 2usize..14, any::<u64>())
}

pub fn sne_row_stochastic(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(shape(), 0.2f64..6.0), |((n, _, seed), gamma)| {
            let a = DenseMatrix::gaussian(n, n, seed);
            let g = kernel_matrix(&KernelSpec::sne(gamma).unwrap(), &build_sources(&a)).unwrap();
            for (i, row) in g.row_iter().enumerate() {
                let sum: f64 = row.iter().sum();
                ensure((sum - 1.0).abs() <= 1e-12, || format!("row {i} sums to {sum}"))?;
                ensure(row.iter().all(|&v| v >= 0.0), || format!("negative entry in row {i}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn double_centering(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&shape(), |(n, m, seed)| {
            let g = DenseMatrix::gaussian(n, m, seed).scale(3.0);
            let (gc, _) = center(&g);
            for i in 0..n {
                let s: f64 = gc.row(i).iter().sum();
                ensure(s.abs() <= 1e-10, || format!("row {i} sum {s}"))?;
            }
            for j in 0..m {
                let s: f64 = gc.column(j).iter().sum();
                ensure(s.abs() <= 1e-10, || format!("column {j} sum {s}"))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn moore_penrose(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(shape(), 1usize..4), |((n, m, seed), rank_cut)| {
            // Optionally rank-deficient: a product through a thin inner dimension.
            let inner = n.min(m).saturating_sub(rank_cut - 1).max(1);
            let a = DenseMatrix::gaussian(n, inner, seed)
                .matmul(&DenseMatrix::gaussian(inner, m, seed ^ 1))
                .unwrap();
            let p = pseudoinverse(&a, RANK_TOL).unwrap();
            let close = |x: &DenseMatrix, y: &DenseMatrix| {
                x.sub(y).unwrap().max_abs() <= 1e-8 * y.max_abs().max(1.0)
            };
            let ap = a.matmul(&p).unwrap();
            let pa = p.matmul(&a).unwrap();
            ensure(close(&ap.matmul(&a).unwrap(), &a), || "A P A != A".into())?;
            ensure(close(&pa.matmul(&p).unwrap(), &p), || "P A P != P".into())?;
            ensure(close(&ap.transpose(), &ap), || "A P not symmetric".into())?;
            ensure(close(&pa.transpose(), &pa), || "P A not symmetric".into())?;
            let c = compat_pseudoinverse(&a).unwrap();
            ensure(c.mode == CompatMode::PseudoInverse, || "wrong compat mode".into())?;
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn eta_invariance(runner: &mut TestRunner) -> Result<(), String> {
    let scales = prop::collection::vec((0.01f64..100.0, any::<bool>()), 8);
    runner
        .run(&(shape(), scales, 0.0f64..0.3), |((n, m, seed), scales, noise)| {
            let (n, m) = (n.max(3), m.max(3));
            let a = DenseMatrix::gaussian(n, m, seed);
            let reference = svd_exact(&a, RANK_TOL).unwrap();
            let r = reference.rank().min(3);
            let u = reference
                .u
                .leading_columns(r)
                .add(&DenseMatrix::gaussian(n, r, seed ^ 2).scale(noise))
                .unwrap();
            let v = reference
                .v
                .leading_columns(r)
                .add(&DenseMatrix::gaussian(m, r, seed ^ 3).scale(noise))
                .unwrap();
            let base = eta_accuracy(&u, &v, &reference, r).unwrap();
            let f: Vec<f64> = scales.iter().map(|&(s, neg)| if neg { -s } else { s }).collect();
            let moved = eta_accuracy(
                &u.scale_columns(&f[..r]),
                &v.scale_columns(&f[4..4 + r]),
                &reference,
                r,
            )
            .unwrap();
            ensure((base - moved).abs() <= 1e-12 * base.max(1.0), || {
                format!("eta {base} vs {moved} after sign/scale changes")
            })?;
            let exact = eta_accuracy(&reference.u, &reference.v, &reference, r).unwrap();
            ensure(exact.abs() <= 1e-12, || format!("exact vectors give eta {exact}"))
        })
        .map_err(|e| e.to_string())
}

pub fn oos_self_consistency(runner: &mut TestRunner) -> Result<(), String> {
    let kernel = prop_oneof![
        (0.5f64..4.0).prop_map(|g| KernelSpec::sne(g).unwrap()),
        (0.5f64..4.0).prop_map(|g| KernelSpec::rbf(g).unwrap()),
    ];
    let compat = prop_oneof![Just(CompatMode::PseudoInverse), Just(CompatMode::Pca), Just(CompatMode::Random)];
    runner
        .run(&(shape(), kernel, compat, any::<bool>()), |((n, m, seed), kernel, compat, centered)| {
            let (n, m) = (n.max(4), m.max(4));
            let a = DenseMatrix::gaussian(n, m, seed);
            let opts = FitOptions::new(kernel, 3).compat(compat).center(centered);
            let model = fit(&a, &opts).unwrap();
            let r = model.rank();
            let at = a.transpose();
            for (side, data) in [(EmbeddingSide::Left, &a), (EmbeddingSide::Right, &at)] {
                let train = model.transform(side, r).unwrap().features;
                for i in 0..data.rows() {
                    let oos = model.transform_oos(side, data.row(i)).unwrap();
                    for (k, (x, y)) in oos.iter().zip(train.row(i)).enumerate() {
                        ensure((x - y).abs() <= 1e-6 * y.abs().max(1.0), || {
                            format!("{side} sample {i} component {k}: {x} vs {y}")
                        })?;
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn bits(m: &DenseMatrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn vec_bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Every seeded path, run twice, as a flat bit pattern.
fn seeded_outputs(n: usize, m: usize, seed: u64) -> Vec<Vec<u64>> {
    let a = DenseMatrix::gaussian(n, m, seed);
    let mut out = vec![bits(&a)];
    out.push(bits(compat_random(&a, seed).c.as_ref().unwrap()));
    let r = 2.min(n).min(m);
    let rs = svd_randomized(&a, r, 3, 2, seed).unwrap();
    out.extend([bits(&rs.u), vec_bits(&rs.s), bits(&rs.v)]);

    let sq = DenseMatrix::gaussian(n, n, seed).scale(0.5);
    let eval = KernelEvaluator::new(KernelSpec::sne(2.0).unwrap(), &build_sources(&sq)).unwrap();
    let k = (n / 2).max(r);
    let cfg = NystromConfig::new(r, k, k, seed);
    let ny = asym_nystrom(&eval, &cfg).unwrap();
    out.extend([bits(&ny.u_tilde), bits(&ny.v_tilde), vec_bits(&ny.lambda_tilde)]);
    out.push(ny.row_indices.iter().chain(&ny.col_indices).map(|&i| i as u64).collect());

    let psd = sq.matmul_t(&sq).unwrap();
    let sym = sym_nystrom(&psd, &cfg).unwrap();
    out.extend([bits(&sym.vectors), vec_bits(&sym.values)]);

    for solver in [KsvdSolver::randomized(seed), KsvdSolver::Nystrom(cfg.clone())] {
        let model = fit(&sq, &FitOptions::new(KernelSpec::rbf(1.5).unwrap(), r).solver(solver)).unwrap();
        out.extend([bits(&model.b_phi), bits(&model.b_psi), vec_bits(&model.lambda)]);
    }

    let g = synth_two_block(n.max(4), 0.5, 0.3, 0.05, seed).unwrap();
    out.push(bits(&g.adjacency));
    let labels: Vec<usize> = (0..2 * n).map(|i| i % 2).collect();
    let (train, test) = stratified_split(&labels, 0.3, seed).unwrap();
    out.push(train.iter().chain(&test).map(|&i| i as u64).collect());
    out
}

pub fn determinism(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(4usize..12, 4usize..12, any::<u64>()), |(n, m, seed)| {
            ensure(seeded_outputs(n, m, seed) == seeded_outputs(n, m, seed), || {
                format!("seeded outputs differ for ({n}, {m}, {seed})")
            })
        })
        .map_err(|e| e.to_string())
}
