use std::path::Path;
use std::process::{Command, Output};

use manifold_icp::io::{parse_dataset, parse_transform};
use manifold_icp::{RigidSpdTransform, SpdCloud};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_manifold-icp"));
    c.env_remove("MANIFOLD_ICP_OUT_DIR");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_of(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON document")
}

fn cloud(path: &Path) -> SpdCloud {
    parse_dataset(&std::fs::read_to_string(path).unwrap()).unwrap().cloud().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn random_data_is_deterministic_and_carries_provenance() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gen-data", "--model", "panda7", "--random", "100", "--seed", "7", "--out", "d.json"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let first = std::fs::read(a.path().join("d.json")).unwrap();
    assert_eq!(first, std::fs::read(b.path().join("d.json")).unwrap());

    let doc = json(&a.path().join("d.json"));
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["model"], "panda7");
    assert_eq!(doc["points"].as_array().unwrap().len(), 100);
    assert_eq!(doc["provenance"]["invocation"][0], "gen-data");
}

#[test]
fn planar_sweep_has_four_hundred_points() {
    let d = tempfile::tempdir().unwrap();
    ok(d.path(), &["gen-data", "--model", "planar2_horizontal", "--trajectory", "planar_sweep:20x20", "--out", "t.json"]);
    assert_eq!(cloud(&d.path().join("t.json")).len(), 400);
}

#[test]
fn default_output_directory_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let status = bin()
        .current_dir(d.path())
        .env("MANIFOLD_ICP_OUT_DIR", "results")
        .args(["gen-data", "--model", "panda7", "--random", "5"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(d.path().join("results/panda7_random_5.json").exists());
}

#[test]
fn planar_pipeline_recovers_the_base_rotation() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--model", "planar2_horizontal", "--trajectory", "planar_sweep:10x10", "--out", "t.json"]);
    ok(p, &["gen-data", "--model", "planar2_vertical", "--trajectory", "planar_sweep:10x10", "--out", "s.json"]);
    let summary: Value = serde_json::from_str(&ok(p, &["fit", "--teacher", "t.json", "--student", "s.json", "--out", "tf.json"])).unwrap();
    assert_eq!(summary["converged"], true);
    let tf = json(&p.join("tf.json"));
    assert_eq!(tf["version"], 1);
    assert!(tf["provenance"]["inputs"]["teacher"].is_string());
    assert!(p.join("tf.report.json").exists());

    ok(p, &["gen-data", "--model", "planar2_horizontal", "--trajectory", "planar_eval:20", "--out", "te.json"]);
    ok(p, &["gen-data", "--model", "planar2_vertical", "--trajectory", "planar_eval:20", "--out", "se.json"]);
    ok(p, &["transfer", "--transform", "tf.json", "--data", "te.json", "--out", "pe.json"]);
    let moved = json(&p.join("pe.json"));
    assert_eq!(moved["labels"], json(&p.join("te.json"))["labels"]);
    assert!(moved["provenance"]["inputs"]["transform"].is_string());

    let report: Value = serde_json::from_str(&ok(p, &["eval", "--predicted", "pe.json", "--reference", "se.json"])).unwrap();
    assert!(report["report"]["rmse"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["samples"], 60);
}

#[test]
fn transferring_training_targets_reproduces_the_aligned_cloud() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--model", "panda7", "--random", "30", "--seed", "1", "--out", "t.json"]);
    ok(p, &["gen-data", "--model", "panda7", "--random", "30", "--seed", "2", "--out", "s.json"]);
    ok(p, &["fit", "--teacher", "t.json", "--student", "s.json", "--out", "tf.json", "--report", "r.json"]);
    ok(p, &["transfer", "--transform", "tf.json", "--data", "t.json", "--out", "moved.json"]);
    let aligned: SpdCloud = serde_json::from_value(json(&p.join("r.json"))["report"]["aligned"].clone()).unwrap();
    let moved = cloud(&p.join("moved.json"));
    for (a, b) in aligned.iter().zip(moved.iter()) {
        assert!(a.frobenius_distance(b) < 1e-9 * (1.0 + a.matrix().norm()));
    }
}

#[test]
fn fitting_a_domain_to_itself_is_near_identity() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--model", "panda7", "--random", "40", "--seed", "3", "--out", "t.json"]);
    ok(p, &["fit", "--teacher", "t.json", "--student", "t.json", "--out", "tf.json"]);
    let tf = parse_transform(&std::fs::read_to_string(p.join("tf.json")).unwrap()).unwrap();
    assert!((tf.scale_exponent() - 1.0).abs() < 1e-9);
    assert!(tf.rotation().angle() < 1e-6);
}

#[test]
fn identity_transform_passes_data_through() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("id.json"), RigidSpdTransform::identity(3).to_json()).unwrap();
    ok(p, &["gen-data", "--model", "panda7", "--random", "10", "--out", "t.json"]);
    ok(p, &["transfer", "--transform", "id.json", "--data", "t.json", "--out", "same.json"]);
    for (a, b) in cloud(&p.join("t.json")).iter().zip(cloud(&p.join("same.json")).iter()) {
        assert!(a.frobenius_distance(b) < 1e-12);
    }
}

#[test]
fn eval_formats_and_baseline_column() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--model", "panda7", "--random", "12", "--seed", "4", "--out", "t.json"]);
    let same: Value = serde_json::from_str(&ok(p, &["eval", "--predicted", "t.json", "--reference", "t.json"])).unwrap();
    assert_eq!(same["report"]["rmse"], 0.0);
    assert!(same["baseline"].is_null());

    ok(p, &["build-map", "--teacher", "surrogate7_teacher", "--student", "panda7", "--samples", "50", "--out", "map.json"]);
    let csv = ok(
        p,
        &[
            "eval", "--predicted", "t.json", "--reference", "t.json", "--baseline", "map.json", "--source", "t.json",
            "--format", "csv", "--experiment", "x", "--variant", "v",
        ],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# schema 1; provenance "));
    assert_eq!(lines[1], "experiment,variant,samples,rmse,iterations,baseline_rmse");
    let fields: Vec<&str> = lines[2].split(',').collect();
    assert_eq!(&fields[..3], &["x", "v", "12"]);
    assert!(fields[5].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn render_writes_an_annotated_overlay() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(p, &["gen-data", "--model", "panda7", "--random", "4", "--out", "a.json"]);
    ok(p, &["gen-data", "--model", "panda7", "--random", "4", "--seed", "1", "--out", "b.json"]);
    ok(p, &["render", "--data", "a.json", "--data", "b.json", "--view", "front", "--out", "v.svg"]);
    let svg = std::fs::read_to_string(p.join("v.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<metadata>"));
    assert_eq!(svg.matches("<ellipse").count(), 8);

    ok(p, &["gen-data", "--model", "planar2_horizontal", "--random", "3", "--out", "flat.json"]);
    let _ = ok(p, &["render", "--data", "flat.json", "--out", "flat.svg"]);
}

#[test]
fn failures_are_reported_as_json_with_distinct_codes() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();

    let missing = run_in(p, &["eval", "--predicted", "nope.json", "--reference", "nope.json"]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(error_of(&missing)["error"]["kind"], "io");

    let usage = run_in(p, &["gen-data", "--model", "panda7"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_of(&usage)["error"]["kind"], "usage");

    let unknown = run_in(p, &["gen-data", "--model", "no_such_arm", "--random", "3"]);
    assert_eq!(unknown.status.code(), Some(4));

    std::fs::write(p.join("bad.json"), "{\"model\": 1}").unwrap();
    let bad = run_in(p, &["eval", "--predicted", "bad.json", "--reference", "bad.json"]);
    assert_eq!(bad.status.code(), Some(4));
    assert_eq!(error_of(&bad)["error"]["kind"], "parse");

    ok(p, &["gen-data", "--model", "panda7", "--random", "5", "--out", "five.json"]);
    ok(p, &["gen-data", "--model", "panda7", "--random", "6", "--out", "six.json"]);
    let mismatch = run_in(p, &["eval", "--predicted", "five.json", "--reference", "six.json"]);
    assert_eq!(mismatch.status.code(), Some(4));
    let unequal = run_in(p, &["fit", "--teacher", "five.json", "--student", "six.json"]);
    assert_eq!(unequal.status.code(), Some(4));
    assert!(!p.join("out/transform.json").exists());

    let help = run_in(p, &["--help"]);
    assert!(help.status.success());
}

#[test]
fn toy_bench_meets_the_accuracy_bound() {
    let d = tempfile::tempdir().unwrap();
    let stdout = ok(d.path(), &["toy-bench", "--reps", "1", "--out", "toy.json"]);
    assert!(stdout.contains("reference 0.042"));
    let doc = json(&d.path().join("toy.json"));
    assert_eq!(doc["summary"]["runs"], 1);
    assert!(doc["summary"]["median_rmse"].as_f64().unwrap() <= 0.1);
    assert_eq!(doc["runs"][0]["training_points"], 100);
}

#[test]
fn sweep_writes_cells_and_a_table() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    ok(
        p,
        &[
            "sweep", "--variants", "pt", "--weight-exps", "1,3", "--sample-counts", "100", "--out-dir", "grid",
        ],
    );
    assert!(p.join("grid/sweep/PT_ICP_w1-n100-s0/cell.json").exists());
    assert!(p.join("grid/sweep/PT_ICP_w3-n100-s0/cell.json").exists());
    let table = std::fs::read_to_string(p.join("grid/sweep/results.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[1], "experiment,variant,samples,rmse,iterations");
    assert_eq!(lines.len(), 2 + 6);
    assert!(lines[2].starts_with("m-eval-1,PT+ICP+w1,100,"));
}
