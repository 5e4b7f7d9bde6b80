use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aksvd::linalg::{read_vector_csv, svd_exact, RANK_TOL};
use aksvd::DenseMatrix;

fn aksvd(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_aksvd"));
    cmd.current_dir(dir).args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("AKSVD_")) {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_toy(dir: &Path) -> (PathBuf, DenseMatrix) {
    let a = DenseMatrix::from_rows(&[[3.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 2.0, 5.0]]).unwrap();
    let path = dir.join("a.csv");
    fs::write(&path, "3,1,0\n1,4,1\n0,2,5\n").unwrap();
    (path, a)
}

const LINEAR_A0: [&str; 10] = [
    "-s", "dataset.format=matrix",
    "-s", "kernel.family=linear",
    "-s", "compat.mode=a0",
    "-s", "center=false",
    "-s", "rank=3",
];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

fn metric(dir: &Path, name: &str) -> f64 {
    let text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
    text.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[5] == name)
        .unwrap_or_else(|| panic!("no {name} in {text}"))[6]
        .parse()
        .unwrap()
}

fn read_dir_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn linear_extract_returns_singular_values() {
    let tmp = tempfile::tempdir().unwrap();
    let (path, a) = write_toy(tmp.path());
    let p = format!("dataset.path={}", path.display());
    let out = aksvd(tmp.path(), &with(&LINEAR_A0, &["extract", "-s", &p, "--out", "x"]), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lambda = read_vector_csv(tmp.path().join("x/lambda.csv")).unwrap();
    let svd = svd_exact(&a, RANK_TOL).unwrap();
    for (l, s) in lambda.iter().zip(&svd.s) {
        assert!((l - s).abs() < 1e-10 * s, "{l} vs {s}");
    }
    for f in ["left.csv", "right.csv", "manifest.conf", "model/model.conf", "model/B_phi.csv"] {
        assert!(tmp.path().join("x").join(f).exists(), "{f}");
    }
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["extract", "--out", "x", "-s", "dataset.nodes=40", "-s", "solver=nystrom", "-s", "rank=4"];
    assert_eq!(code(&aksvd(tmp.path(), &args, &[])), 0);
    let first = read_dir_bytes(&tmp.path().join("x"));
    assert_eq!(code(&aksvd(tmp.path(), &args, &[])), 0);
    assert_eq!(first, read_dir_bytes(&tmp.path().join("x")));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aksvd(tmp.path(), &["extract", "--out", "x", "--seed", "5", "-s", "dataset.nodes=30"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = read_dir_bytes(&tmp.path().join("x"));
    fs::rename(tmp.path().join("x/manifest.conf"), tmp.path().join("m.conf")).unwrap();
    fs::remove_dir_all(tmp.path().join("x")).unwrap();
    assert_eq!(code(&aksvd(tmp.path(), &["extract", "--config", "m.conf"], &[])), 0);
    assert_eq!(first, read_dir_bytes(&tmp.path().join("x")));
}

#[test]
fn rank_above_numerical_rank_warns_and_truncates() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("low.csv");
    fs::write(&path, "1,2,3\n2,4,6\n1,1,1\n").unwrap();
    let p = format!("dataset.path={}", path.display());
    let args = ["extract", "-s", "dataset.format=matrix", "-s", "kernel.family=linear", "-s", "center=false", "-s", "rank=3", "-s", &p];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("truncating"), "{}", stderr(&out));
    assert_eq!(read_vector_csv(tmp.path().join("out/lambda.csv")).unwrap().len(), 2);
}

#[test]
fn env_overrides_config_and_flags_override_env() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.conf"), "rank = 2\n[dataset]\nnodes = 30\n").unwrap();
    let lambda_len = |extra: &[&str], env: &[(&str, &str)]| {
        let args = with(&["extract", "--config", "run.conf"], extra);
        let out = aksvd(tmp.path(), &args, env);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        read_vector_csv(tmp.path().join("out/lambda.csv")).unwrap().len()
    };
    assert_eq!(lambda_len(&[], &[]), 2);
    assert_eq!(lambda_len(&[], &[("AKSVD_RANK", "3")]), 3);
    assert_eq!(lambda_len(&["-s", "rank=4"], &[("AKSVD_RANK", "3")]), 4);
    let manifest = fs::read_to_string(tmp.path().join("out/manifest.conf")).unwrap();
    assert!(manifest.contains("rank = 4\n") && manifest.contains("run.command = extract"));
}

#[test]
fn gamma_env_override_reaches_the_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = aksvd(tmp.path(), &["extract", "-s", "dataset.nodes=30", "-s", "rank=2"], &[("AKSVD_KERNEL_GAMMA", "2.5")]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let conf = fs::read_to_string(tmp.path().join("out/model/model.conf")).unwrap();
    assert!(conf.contains("kernel.gamma = 2.5"), "{conf}");
}

#[test]
fn user_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["extract", "-s", "kernel.colour=red"],
        &["extract", "-s", "dataset.format=edges", "-s", "dataset.path=missing.tsv"],
        &["extract", "-s", "rank=0"],
        &["classify", "-s", "dataset.synth=cycle", "-s", "dataset.nodes=10"],
        &["reconstruct", "--method", "nonsense"],
    ];
    for args in cases {
        let out = aksvd(tmp.path(), args, &[]);
        assert_eq!(code(&out), 2, "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn single_class_labels_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("g.tsv"), "a\tb\nb\tc\nc\ta\na\tc\n").unwrap();
    fs::write(tmp.path().join("l.tsv"), "a\tx\nb\tx\nc\tx\n").unwrap();
    let args = [
        "classify", "-s", "dataset.format=edges", "-s", "dataset.path=g.tsv", "-s", "dataset.labels=l.tsv",
        "-s", "rank=2", "-s", "features.count=2",
    ];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("two classes"), "{}", stderr(&out));
}

#[test]
fn numeric_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("z.csv"), "0,0,0\n0,0,0\n0,0,0\n").unwrap();
    let args = ["extract", "-s", "dataset.format=matrix", "-s", "dataset.path=z.csv", "-s", "kernel.family=linear", "-s", "center=false", "-s", "rank=1"];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn svd_reconstructs_the_directed_cycle() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["reconstruct", "--method", "svd", "-s", "dataset.synth=cycle", "-s", "dataset.nodes=6", "-s", "rank=6"];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(metric(&tmp.path().join("out"), "l1"), 0.0);
}

#[test]
fn ksvd_keeps_up_with_kpca_on_two_block() {
    let tmp = tempfile::tempdir().unwrap();
    let mut scores = [Vec::new(), Vec::new()];
    for seed in 0..10 {
        for (k, method) in ["ksvd", "kpca"].iter().enumerate() {
            let seed = seed.to_string();
            let out = aksvd(tmp.path(), &["classify", "--method", method, "--seed", &seed], &[]);
            assert_eq!(code(&out), 0, "{}", stderr(&out));
            scores[k].push(metric(&tmp.path().join("out"), "macro_f1"));
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let (ksvd, kpca) = (median(&mut scores[0]), median(&mut scores[1]));
    assert!(ksvd >= kpca - 0.02, "ksvd {ksvd} vs kpca {kpca}");
}

fn bench_rows(dir: &Path, file: &str) -> Vec<Vec<String>> {
    let text = fs::read_to_string(dir.join(file)).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn loose_tolerance_passes_on_the_first_attempt() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["bench", "-s", "dataset.nodes=120", "-s", "rank=5", "-s", "bench.epsilons=10", "-s", "bench.runs=1"];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = bench_rows(&tmp.path().join("out"), "bench.csv");
    assert_eq!(rows.len(), 4);
    for row in &rows {
        assert_eq!(row[9], "ok");
        let expected = match row[0].as_str() {
            "tsvd" => "120",
            "rsvd" => "10",
            _ => "32",
        };
        assert_eq!(row[5], expected, "{row:?}");
    }
    let rsvd = rows.iter().find(|r| r[0] == "rsvd").unwrap();
    assert_eq!(rsvd[10].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn full_sampling_is_exact_in_the_bench() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "bench", "-s", "dataset.nodes=80", "-s", "rank=5", "-s", "nystrom.m=80", "-s", "nystrom.subproblem=exact",
        "-s", "bench.solvers=asym_nystrom", "-s", "bench.epsilons=1e-8", "-s", "bench.reference=exact",
        "-s", "bench.runs=1",
    ];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = bench_rows(&tmp.path().join("out"), "bench.csv");
    assert_eq!(rows[0][9], "ok");
    assert!(rows[0][6].parse::<f64>().unwrap() <= 1e-8);
}

#[test]
fn unreachable_tolerance_is_a_status_row() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "bench", "-s", "dataset.nodes=60", "-s", "rank=5", "-s", "bench.solvers=asym_nystrom",
        "-s", "bench.epsilons=1e-30", "-s", "bench.runs=1",
    ];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = bench_rows(&tmp.path().join("out"), "bench.csv");
    assert_eq!(rows[0][9], "unreachable");
    assert_eq!(rows[0][5], "60");
    assert!(rows[0][7].is_empty());
}

#[test]
fn sweep_writes_one_row_per_bandwidth() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["nystrom-sweep", "-s", "dataset.nodes=100", "-s", "rank=4", "-s", "sweep.k=0.5,1,2", "-s", "bench.runs=1"];
    let out = aksvd(tmp.path(), &args, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = bench_rows(&tmp.path().join("out"), "sweep.csv");
    assert_eq!(rows.len(), 3);
    let gammas: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(gammas.windows(2).all(|w| w[1] > w[0]));
    assert!(tmp.path().join("out/manifest.conf").exists());
}

#[test]
fn tabular_classification_and_regression() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cls_csv = String::from("x1,x2,label\n");
    let mut reg_csv = String::from("x1,x2,y\n");
    for i in 0..60 {
        let t = i as f64 / 60.0;
        let class = if i % 2 == 0 { "a" } else { "b" };
        let shift = if i % 2 == 0 { 0.0 } else { 3.0 };
        let (x1, x2) = (t + shift, (7.0 * t).sin());
        cls_csv.push_str(&format!("{x1},{x2},{class}\n"));
        reg_csv.push_str(&format!("{x1},{x2},{}\n", 2.0 * x1 - x2));
    }
    fs::write(tmp.path().join("c.csv"), cls_csv).unwrap();
    fs::write(tmp.path().join("r.csv"), reg_csv).unwrap();
    let base = ["-s", "dataset.format=csv", "-s", "rank=2", "-s", "kernel.family=rbf"];
    let mut cls = base.to_vec();
    cls.extend(["classify", "-s", "dataset.path=c.csv", "-s", "dataset.target=label"]);
    let out = aksvd(tmp.path(), &cls, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(metric(&tmp.path().join("out"), "accuracy") >= 0.9);
    let mut reg = base.to_vec();
    reg.extend(["regress", "-s", "dataset.path=r.csv", "-s", "dataset.target=y", "-s", "lssvm.gamma=1000", "--method", "pca"]);
    let out = aksvd(tmp.path(), &reg, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // Two unit-norm components span both features; weak regularization fits a linear target.
    assert!(metric(&tmp.path().join("out"), "rmse") < 0.1);
}
