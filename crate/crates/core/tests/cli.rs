use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn freeflow(args: &[&str], out: &Path) -> (i32, String) {
    freeflow_env(args, out, None)
}

fn freeflow_env(args: &[&str], out: &Path, threads: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_freeflow"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(n) = threads {
        cmd.env("FREEFLOW_THREADS", n);
    }
    let o = cmd.output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout).into_owned() + &String::from_utf8_lossy(&o.stderr);
    (o.status.code().unwrap(), text)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn fal2_check_passes_for_negpow_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = freeflow(&["fal2-check", "--phi", "negPow(0.333…)"], dir.path());
    assert_eq!(code, 0, "{text}");
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["result"]["verdict"], "pass");
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["verdict"]["verdict"], "pass");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["tolerances"]["ode"]["abs_tol"].is_number());
    assert_eq!(m["domain"]["route"], "conformal");
}

#[test]
fn fal2_check_fails_for_inverse_sqrt() {
    let dir = tempfile::tempdir().unwrap();
    let (code, text) = freeflow(&["fal2-check", "--phi", "pow(-0.5)"], dir.path());
    assert_eq!(code, 2, "{text}");
    let v = read_json(&dir.path().join("verdict.json"));
    assert_eq!(v["result"]["verdict"], "fail");
    assert!(v["result"]["witness"].as_array().unwrap().len() == 2);
}

#[test]
fn flowlines_reproduce_slit_picture() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "flowlines",
        "--psi",
        "rational(a=-1,b=0,poles=[0],residues=[1])",
        "--im-lines",
        "8",
        "--re-lines",
        "8",
    ];
    let (code, text) = freeflow(&args, dir.path());
    assert_eq!(code, 0, "{text}");
    let (header, rows) = read_csv(&dir.path().join("slits.csv"));
    assert_eq!(header, ["height", "tip", "root"]);
    let mut heights: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    heights.sort_by(|a, b| a.total_cmp(b));
    assert!((heights[0] + PI).abs() < 1e-10 && heights[1].abs() < 1e-10);
    assert!(rows.iter().all(|r| (r[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-8));

    let (header, rows) = read_csv(&dir.path().join("polylines.csv"));
    assert_eq!(header, ["family", "value", "index", "re_in", "im_in", "re_out", "im_out"]);
    assert_eq!(rows.len(), 16 * 201);
    // no image point lies on a slit: Im w ∈ {0, −π} only left of the tip
    for r in &rows {
        let (re, im): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        assert!(re.is_finite() && im.is_finite());
        let on_slit = re > 0.5 && (im.abs() < 1e-12 || (im + PI).abs() < 1e-12);
        assert!(!on_slit, "{r:?}");
    }
}

#[test]
fn kernel_csv_matches_cauchy_density() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["kernel", "--phi", "const(0,-1)", "--t", "1", "--x", "0.5", "--grid", "-5:5:101"];
    let (code, text) = freeflow(&args, dir.path());
    assert_eq!(code, 0, "{text}");
    let (header, rows) = read_csv(&dir.path().join("kernel_t1.csv"));
    assert_eq!(header, ["u", "density", "failed"]);
    for r in rows {
        let (u, d): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        let exact = 1.0 / (PI * (1.0 + (u - 0.5) * (u - 0.5)));
        assert!((d - exact).abs() < 1e-4);
        assert_eq!(r[2], "false");
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let args = ["flow", "--phi", "negPow(0.25)", "--t", "0.5,2", "--grid", "-2:2:17", "--im-grid", "0.1:2:9"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(freeflow_env(&args, a.path(), Some("1")).0, 0);
    assert_eq!(freeflow_env(&args, b.path(), Some("4")).0, 0);
    for f in ["flow.csv", "manifest.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let (header, rows) = read_csv(&a.path().join("flow.csv"));
    assert_eq!(header, ["re_in", "im_in", "re_out", "im_out", "t", "failed"]);
    assert_eq!(rows.len(), 2 * 17 * 9);
}

#[test]
fn seeded_build_is_reproducible() {
    let args = ["fal2-build", "--psi", "negPow(0.5)", "--seed", "7", "--pairs", "100"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(freeflow(&args, a.path()).0, 0);
    assert_eq!(freeflow(&args, b.path()).0, 0);
    let fa = fs::read(a.path().join("fal2.json")).unwrap();
    assert_eq!(fa, fs::read(b.path().join("fal2.json")).unwrap());
    let v: Value = serde_json::from_slice(&fa).unwrap();
    assert!(v["univalence"]["worstDefect"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn fal2_build_reports_non_containing_psi() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = freeflow(&["fal2-build", "--psi", "pow(-0.5)"], dir.path());
    assert_eq!(code, 2);
    let v = read_json(&dir.path().join("fal2.json"));
    assert_eq!(v["verdict"], "notContaining");
}

#[test]
fn semigroup_writes_density_and_transform() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["semigroup", "--phi", "rational(a=0,b=0,poles=[0],residues=[1])", "--t", "2", "--grid", "-3:3:61"];
    let (code, text) = freeflow(&args, dir.path());
    assert_eq!(code, 0, "{text}");
    let (header, rows) = read_csv(&dir.path().join("density_t2.csv"));
    assert_eq!(header, ["x", "density", "failed"]);
    for r in rows {
        let (x, d): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((d - (8.0 - x * x).max(0.0).sqrt() / (4.0 * PI)).abs() < 1e-3);
    }
    let j = read_json(&dir.path().join("cauchy_t2.json"));
    assert_eq!(j["grid"].as_array().unwrap().len(), 61);
    assert!(j["massDeficit"].as_f64().unwrap().abs() < 0.02);
}

#[test]
fn nevanlinna_file_input_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"alpha": -1, "beta": 0.5, "nu": {"atoms": [{"u": 0, "mass": 1}]}}"#).unwrap();
    let arg = format!("@{}", spec.display());
    let out = dir.path().join("eval");
    let (code, text) = freeflow(&["nev-eval", "--phi", &arg, "--grid", "-1:1:3", "--im-grid", "1:2:2"], &out);
    assert_eq!(code, 0, "{text}");
    let v = read_json(&out.join("values.json"));
    // −z + 0.5 + 1/z at z = i
    let first_i = &v["values"][1];
    assert!((first_i[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((first_i[1].as_f64().unwrap() + 2.0).abs() < 1e-12);

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\"alpha\": -1,\n \"beta\": }").unwrap();
    let (code, text) = freeflow(&["nev-eval", "--phi", &format!("@{}", broken.display())], &out);
    assert_eq!(code, 1);
    assert!(text.contains("broken.json") && text.contains("line 2"), "{text}");

    assert_eq!(freeflow(&["flow", "--phi", "nope(1)"], &out).0, 1);
    assert_eq!(freeflow(&["flow", "--phi", "const(0,-1)", "--grid", "1:0:5"], &out).0, 1);
    assert_eq!(freeflow(&["no-such-command"], &out).0, 1);
}

#[test]
fn nev_eval_flags_non_nevanlinna_input() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = freeflow(&["nev-eval", "--phi", "pow(0.5)"], dir.path());
    assert_eq!(code, 2);
}
