use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use serde_json::Value;
use tempfile::TempDir;

use dgfib_core::ainfty::{identity_transformation, singleton};
use dgfib_core::linalg::Field;
use dgfib_core::{dg, gen, io};

struct Run {
    code: i32,
    report: Value,
    stdout: String,
}

fn dgfib(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_dgfib")).current_dir(dir).args(args).output().expect("binary runs");
    let stdout = String::from_utf8(out.stdout).expect("utf-8 report");
    let report = serde_json::from_str(&stdout).unwrap_or_else(|e| panic!("report is not JSON ({e}): {stdout}"));
    Run { code: out.status.code().expect("exit code"), report, stdout }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let r = dgfib(dir.path(), &["gen", "--kind", "cat", "--seed", "3", "--out", "cat.json"]);
    assert_eq!(r.code, 0);
    dir
}

#[test]
fn generated_categories_are_deterministic_and_valid() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(dgfib(d, &["gen", "--kind", "cat", "--seed", "3", "--out", "again.json"]).code, 0);
    assert_eq!(read(d, "cat.json"), read(d, "again.json"));
    let r = dgfib(d, &["validate", "--in", "cat.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["command"], "validate");
    assert_eq!(r.report["status"], "pass");

    let fp = dgfib(d, &["gen", "--kind", "cat", "--seed", "3", "--field", "fp:65537", "--out", "fp.json"]);
    assert_eq!(fp.code, 0);
    assert_eq!(dgfib(d, &["validate", "--in", "fp.json"]).code, 0);
}

#[test]
fn simplex_categories_validate() {
    let dir = tempfile::tempdir().unwrap();
    for n in [0, 3, 5] {
        let name = format!("k{n}.json");
        write(dir.path(), &name, &io::write_category(&dg::make_k_n(Field::Rational, n)));
        let r = dgfib(dir.path(), &["validate", "--in", &name]);
        assert_eq!(r.code, 0, "k[{n}]: {}", r.stdout);
    }
}

#[test]
fn malformed_category_files_are_input_errors() {
    let dir = setup();
    let d = dir.path();
    let good: Value = serde_json::from_str(&read(d, "cat.json")).unwrap();

    let mut ragged = good.clone();
    let (key, mats) = ragged["d"].as_object_mut().unwrap().iter_mut().next().expect("some differential");
    let key = key.clone();
    let rows = mats.as_object_mut().unwrap().values_mut().next().unwrap().as_array_mut().unwrap();
    rows[0].as_array_mut().unwrap().push(Value::from("1"));
    write(d, "ragged.json", &ragged.to_string());
    let r = dgfib(d, &["validate", "--in", "ragged.json"]);
    assert_eq!(r.code, 2, "ragged d on {key}: {}", r.stdout);
    assert_eq!(r.report["status"], "error");

    let mut range = good.clone();
    let entries = range["comp"].as_object_mut().unwrap().values_mut().next().unwrap().as_array_mut().unwrap();
    entries[0]["outidx"] = Value::from(10_000);
    write(d, "range.json", &range.to_string());
    assert_eq!(dgfib(d, &["validate", "--in", "range.json"]).code, 2);

    write(d, "garbage.json", "{ not json");
    assert_eq!(dgfib(d, &["validate", "--in", "garbage.json"]).code, 2);
    assert_eq!(dgfib(d, &["validate", "--in", "missing.json"]).code, 2);
}

#[test]
fn generated_objects_and_maps_check_out() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(dgfib(d, &["gen", "--kind", "mc", "--cat", "cat.json", "--n", "3", "--seed", "5", "--out", "x.json"]).code, 0);
    let r = dgfib(d, &["mc-check", "--cat", "cat.json", "--in", "x.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["n"], 3);

    assert_eq!(dgfib(d, &["gen", "--kind", "hoequiv", "--cat", "cat.json", "--in", "x.json", "--seed", "5", "--out", "a.json"]).code, 0);
    let r = dgfib(d, &["hoequiv", "--cat", "cat.json", "--in", "a.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["certified"], true);
    assert_eq!(r.report["pointwise"], true);
    let r = dgfib(d, &["dinf", "--cat", "cat.json", "--in", "a.json"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.report["closed"], true);

    // With its first edge zeroed the object's edges are no longer all
    // homotopy equivalences.
    let mut bad: Value = serde_json::from_str(&read(d, "x.json")).unwrap();
    for v in bad["components"]["0,1"].as_array_mut().unwrap() {
        *v = Value::from("0");
    }
    write(d, "bad.json", &bad.to_string());
    let r = dgfib(d, &["mc-check", "--cat", "cat.json", "--in", "bad.json"]);
    assert_eq!(r.code, 1, "{}", r.stdout);
}

/// gen mc → match → gen hoequiv gives a map out of a truncated object.
fn lift_instance(d: &Path, n: &str, seed: &str) {
    assert_eq!(dgfib(d, &["gen", "--kind", "mc", "--cat", "cat.json", "--n", n, "--seed", seed, "--out", "x.json"]).code, 0);
    assert_eq!(dgfib(d, &["match", "--cat", "cat.json", "--in", "x.json", "--out", "xbar.json"]).code, 0);
    let r = dgfib(d, &["mc-check", "--cat", "cat.json", "--in", "xbar.json"]);
    assert_eq!(r.report["truncated"], true);
    assert_eq!(dgfib(d, &["gen", "--kind", "hoequiv", "--cat", "cat.json", "--in", "xbar.json", "--seed", seed, "--out", "a.json"]).code, 0);
}

#[test]
fn lifts_of_generated_instances_pass_every_check() {
    let dir = setup();
    let d = dir.path();
    for (n, seed) in [("1", "1"), ("2", "2"), ("3", "3")] {
        lift_instance(d, n, seed);
        let r = dgfib(d, &["lift", "--cat", "cat.json", "--source", "x.json", "--in", "a.json", "--out", "lifted"]);
        assert_eq!(r.code, 0, "n = {n}: {}", r.stdout);
        assert_eq!(r.report["closed"], true);
        assert_eq!(r.report["truncation_round_trip"], true);
        assert_eq!(r.report["equivalence"]["appendix"], true);
        let r = dgfib(d, &["mc-check", "--cat", "cat.json", "--in", "lifted/lifted_object.json"]);
        assert_eq!(r.code, 0);
        let r = dgfib(d, &["hoequiv", "--cat", "cat.json", "--in", "lifted/lifted_morphism.json"]);
        assert_eq!(r.code, 0);
        let r = dgfib(d, &["match", "--cat", "cat.json", "--in", "lifted/lifted_morphism.json", "--out", "back.json"]);
        assert_eq!(r.code, 0);
        assert_eq!(read(d, "back.json"), read(d, "a.json"));
    }
}

#[test]
fn supplied_witnesses_are_checked() {
    let dir = setup();
    let d = dir.path();
    lift_instance(d, "2", "4");
    let cat = io::read_category(&read(d, "cat.json")).unwrap();
    let a = io::transformation_from_file(&cat, &io::parse_json(&read(d, "a.json")).unwrap()).unwrap();
    let w = dg::kontsevich_witness(&cat, &a.component(&cat, singleton(0))).unwrap().expect("a_0 is an equivalence");
    let mut file = io::witness_to_file(&cat, &w);
    write(d, "w.json", &io::to_json(&file));
    let r = dgfib(d, &["lift", "--cat", "cat.json", "--source", "x.json", "--in", "a.json", "--witness", "w.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert!(r.report["lifted_object"].is_object());

    let slot = file.g.coords.iter_mut().chain(file.r_x.coords.iter_mut()).next().expect("nonempty witness");
    *slot = format!("{}1", slot.trim_start_matches('0'));
    write(d, "bad_w.json", &io::to_json(&file));
    let r = dgfib(d, &["lift", "--cat", "cat.json", "--source", "x.json", "--in", "a.json", "--witness", "bad_w.json"]);
    assert_eq!(r.code, 2, "{}", r.stdout);
    assert_eq!(r.report["status"], "error");
}

#[test]
fn lifting_an_identity_returns_the_source() {
    let dir = setup();
    let d = dir.path();
    for n in [1, 2, 3] {
        let cat = io::read_category(&read(d, "cat.json")).unwrap();
        let x = gen::generate_mc_object(&cat, n, 9).unwrap();
        write(d, "x.json", &io::to_json(&io::mc_to_file(&cat, &x)));
        let xbar = Arc::new(dgfib_core::reedy::truncate_object(&x));
        write(d, "id.json", &io::to_json(&io::transformation_to_file(&cat, &identity_transformation(&cat, &xbar))));
        let r = dgfib(d, &["lift", "--cat", "cat.json", "--source", "x.json", "--in", "id.json", "--out", "lifted"]);
        assert_eq!(r.code, 0, "n = {n}: {}", r.stdout);
        let y = io::mc_from_file(&cat, &io::parse_json(&read(d, "lifted/lifted_object.json")).unwrap()).unwrap();
        assert_eq!(y, x, "lifted object differs at n = {n}");
        let up = io::transformation_from_file(&cat, &io::parse_json(&read(d, "lifted/lifted_morphism.json")).unwrap()).unwrap();
        assert_eq!(up.a, identity_transformation(&cat, &Arc::new(x)).a, "lifted map is not the identity at n = {n}");
    }
}

#[test]
fn a_flipped_sign_fails_with_a_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "wide.json", &io::write_category(&gen::random_wide_category(Field::Rational, 0)));
    let ok = dgfib(d, &["fibration-test", "--cat", "wide.json", "--n", "2", "--trials", "10"]);
    assert_eq!(ok.code, 0, "{}", ok.stdout);
    let bad = dgfib(d, &["fibration-test", "--cat", "wide.json", "--n", "2", "--trials", "10", "--mutate-sign", "orientation"]);
    assert_eq!(bad.code, 1);
    assert!(!bad.report["failures"].as_array().unwrap().is_empty());

    let r = dgfib(d, &["suite", "--suite", "reedy", "--trials", "6", "--mutate-sign", "morphism.delta_a"]);
    assert_eq!(r.code, 1, "{}", r.stdout);
    assert_eq!(r.report["mutated_term"], "morphism.delta_a");
    let failing: Vec<&Value> = r.report["checks"].as_array().unwrap().iter().filter(|c| c["passed"] != c["cases"]).collect();
    assert!(!failing.is_empty());
    assert!(failing.iter().all(|c| !c["failures"].as_array().unwrap().is_empty()));
}

#[test]
fn exit_codes_separate_verdicts_from_bad_input() {
    let dir = setup();
    let d = dir.path();
    let r = dgfib(d, &["suite", "--suite", "core", "--trials", "3"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["status"], "pass");

    // The zero map on an object with cohomology is not an equivalence.
    let cat = io::read_category(&read(d, "cat.json")).unwrap();
    let x = (0..cat.num_objects()).find(|&x| !cat.hom(x, x).cohomology_dims().values().all(|&k| k == 0)).unwrap();
    write(d, "zero.json", &io::to_json(&io::morphism_to_file(&cat, &cat.zero(x, x, 0))));
    let r = dgfib(d, &["hoequiv", "--cat", "cat.json", "--in", "zero.json"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.report["status"], "fail");
    assert_eq!(r.report["equivalence"], false);
    assert_eq!(dgfib(d, &["witness", "--cat", "cat.json", "--in", "zero.json"]).code, 1);
    let r = dgfib(d, &["cone", "--cat", "cat.json", "--in", "zero.json", "--out", "cone.json"]);
    assert_eq!(r.code, 0);
    assert_eq!(dgfib(d, &["contract", "--cat", "cat.json", "--in", "cone.json"]).code, 1);

    assert_eq!(dgfib(d, &["fibration-test", "--trials", "0"]).code, 2);
    assert_eq!(dgfib(d, &["fibration-test", "--n", "7"]).code, 2);
    assert_eq!(dgfib(d, &["hoequiv", "--cat", "cat.json", "--in", "cat.json"]).code, 2);
    assert_eq!(dgfib(d, &["mc-check", "--in", "zero.json"]).code, 2);
}

#[test]
fn quasi_equivalence_and_calibration_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = dgfib(d, &["quasi-equiv-test", "--n", "2", "--seed", "1"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["pairs"].as_array().unwrap().len(), 9);
    let r = dgfib(d, &["calibrate", "--n", "3", "--out", "scheme.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.report["matches_reference"], true);
    write(d, "wide.json", &io::write_category(&gen::random_wide_category(Field::Rational, 0)));
    let r = dgfib(d, &["fibration-test", "--cat", "wide.json", "--n", "1", "--trials", "5", "--scheme", "scheme.json"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
}
