use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sketchkit::numerics::{load_mat1, singular_values};
use sketchkit::runtime::load_skt1;
use tempfile::TempDir;

fn sketchkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchkit"))
        .args(args)
        .env_remove("SKETCHKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sketchkit(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, shape: &str, seed: u64) -> PathBuf {
    let out = path(dir, name);
    ok(&["gen", "--shape", shape, "--seed", &seed.to_string(), "--out", s(&out)]);
    out
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = sketchkit(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_shape_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = sketchkit(&["gen", "--shape", "8by64", "--out", s(&path(&dir, "w.mat1"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ROWSxCOLS"));
}

#[test]
fn bits_out_of_range_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let w = gen(&dir, "w.mat1", "4x16", 0);
    let out = sketchkit(&[
        "sketch",
        "--input",
        s(&w),
        "--bits",
        "5",
        "--calib",
        "synth:gaussian:m=32",
        "--output",
        s(&path(&dir, "m.skt1")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = gen(&dir, "a.mat1", "5x7", 42);
    let b = gen(&dir, "b.mat1", "5x7", 42);
    let c = gen(&dir, "c.mat1", "5x7", 43);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let manifest = fs::read_to_string(format!("{}.manifest.txt", a.display())).unwrap();
    assert!(manifest.contains("# seed: 42"));
}

#[test]
fn flat_powerlaw_has_unit_spectrum() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "p.mat1");
    ok(&[
        "gen",
        "--shape",
        "16x16",
        "--dist",
        "powerlaw-spectrum",
        "--eta",
        "0",
        "--seed",
        "3",
        "--out",
        s(&out),
    ]);
    let m = load_mat1(&out).unwrap();
    for sv in singular_values(&m) {
        assert!((sv - 1.0).abs() < 1e-6, "singular value {sv}");
    }
}

#[test]
fn gaussian_entries_have_unit_scale() {
    let dir = TempDir::new().unwrap();
    let mut total = 0.0;
    for seed in 0..100 {
        let m = load_mat1(gen(&dir, "g.mat1", "4x4", seed)).unwrap();
        total += m.as_slice().iter().map(|v| v.abs()).sum::<f64>() / 16.0;
    }
    // E|z| = sqrt(2/pi) ~ 0.80
    let mean = total / 100.0;
    assert!(mean > 0.4 && mean < 1.2, "mean |entry| {mean}");
}

#[test]
fn sketch_reconstruct_info_pipeline() {
    let dir = TempDir::new().unwrap();
    let w = gen(&dir, "w.mat1", "8x64", 1);
    let model = path(&dir, "m.skt1");
    let dense = path(&dir, "r.mat1");
    ok(&[
        "sketch",
        "--input",
        s(&w),
        "--bits",
        "3",
        "--gpr",
        "2",
        "--calib",
        "synth:gaussian:m=128",
        "--output",
        s(&model),
    ]);
    ok(&["reconstruct", "--model", s(&model), "--output", s(&dense)]);
    let sm = load_skt1(&model).unwrap();
    assert_eq!((sm.shape(), sm.gpr(), sm.bits()), ((8, 64), 2, 3));
    assert_eq!(load_mat1(&dense).unwrap().shape(), (8, 64));

    let info = ok(&["info", "--model", s(&model)]);
    assert!(info.contains("trainable params: 128"), "{info}");
    let sidecar = fs::read_to_string(format!("{}.manifest.txt", model.display())).unwrap();
    assert!(sidecar.contains("# subcommand: sketch"));
    assert!(sidecar.contains("fnv1a64="));
}

#[test]
fn info_preset_counts() {
    let out = ok(&["info", "--preset", "llama2-7b", "--gpr", "4", "--bits", "4"]);
    assert!(out.contains("trainable params: 87,031,808"), "{out}");
    assert!(out.contains("77.4x"), "{out}");
}

#[test]
fn wrong_magic_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let w = gen(&dir, "w.mat1", "4x4", 0);
    let out = sketchkit(&["reconstruct", "--model", s(&w), "--output", s(&path(&dir, "r.mat1"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected \"SKT1\", found \"MAT1\""), "{err}");
}

#[test]
fn finetune_trace_and_analysis_csvs_carry_manifests() {
    let dir = TempDir::new().unwrap();
    let w = gen(&dir, "w.mat1", "8x32", 1);
    let tuned = gen(&dir, "t.mat1", "8x32", 2);
    let inputs = gen(&dir, "x.mat1", "32x40", 3);
    let model = path(&dir, "m.skt1");
    ok(&[
        "sketch",
        "--input",
        s(&w),
        "--bits",
        "2",
        "--calib",
        "synth:gaussian:m=64",
        "--output",
        s(&model),
    ]);

    let trace = path(&dir, "trace.csv");
    let out_model = path(&dir, "ft.skt1");
    ok(&[
        "finetune",
        "--model",
        s(&model),
        "--teacher",
        s(&tuned),
        "--inputs",
        s(&inputs),
        "--steps",
        "5",
        "--out",
        s(&out_model),
        "--trace",
        s(&trace),
    ]);
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("# sketchkit "));
    assert!(text.lines().any(|l| l == "step,loss"));
    assert_eq!(
        load_skt1(&out_model).unwrap().indices(),
        load_skt1(&model).unwrap().indices()
    );

    let csv = path(&dir, "delta.csv");
    ok(&[
        "analyze-delta",
        "--base",
        s(&w),
        "--tuned",
        s(&tuned),
        "--ratios",
        "2,4",
        "--calib",
        "synth:gaussian:m=64",
        "--out",
        s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# "));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "ratio,lowrank_err,sketch_err");
    assert_eq!(data.len(), 3);
}

#[test]
fn theory_csv() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "theory.csv");
    ok(&[
        "theory",
        "--n",
        "64",
        "--alpha",
        "4",
        "--eta-grid",
        "0:0.5:0.25",
        "--trials",
        "4",
        "--out",
        s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# "));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(
        data[0],
        "eta,lowrank_exact,sketch_closed_form,sketch_empirical_mean,sketch_empirical_std"
    );
    assert_eq!(data.len(), 4);
}

#[test]
fn theory_rejects_indivisible_alpha() {
    let dir = TempDir::new().unwrap();
    let out = sketchkit(&["theory", "--n", "10", "--alpha", "4", "--out", s(&path(&dir, "t.csv"))]);
    assert_eq!(out.status.code(), Some(1));
}
