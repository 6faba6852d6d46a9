use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn flatband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatband"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = flatband(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn spectrum_flat_row_at_minus_four() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bands.csv");
    let summary = ok_json(&[
        "spectrum",
        "--model",
        "lieb-extended",
        "--kappa",
        "1",
        "--J",
        "8",
        "--phi",
        "pi/3",
        "--flatband",
        "--grid",
        "16",
        "16",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(summary["flatness"]["is_flat"], true);
    assert_eq!(summary["flatness"]["candidate_energy"][0].as_f64().unwrap(), -4.0);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "kx,ky,band_index,re_E,im_E");
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 16 * 16 * 3);
    for point in rows.chunks(3) {
        let near = point
            .iter()
            .any(|r| (r[3].parse::<f64>().unwrap() + 4.0).abs() < 1e-12 && r[4].parse::<f64>().unwrap().abs() < 1e-12);
        assert!(near, "{point:?}");
    }
}

#[test]
fn spectrum_original_and_tasaki() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orig.csv");
    ok_json(&[
        "spectrum",
        "--model",
        "lieb-original",
        "--kappa",
        "1",
        "--grid",
        "8",
        "8",
        "--out",
        csv.to_str().unwrap(),
    ]);
    for row in csv_rows(&csv).iter().filter(|r| r[2] == "1") {
        assert!(row[3].parse::<f64>().unwrap().abs() < 1e-7, "{row:?}");
    }

    let s = ok_json(&[
        "spectrum",
        "--model",
        "tasaki",
        "--kappa",
        "1",
        "--J",
        "3",
        "--phi",
        "pi/3",
        "--flatband",
        "--grid",
        "16",
        "16",
        "--out",
        dir.path().join("t.csv").to_str().unwrap(),
    ]);
    assert_eq!(s["flatness"]["is_flat"], true);
    assert_eq!(s["flatness"]["candidate_energy"][0].as_f64().unwrap(), -1.5);
}

#[test]
fn spectrum_output_is_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let common = ["spectrum", "--J", "2.3", "--phi", "0.4", "--flatband", "--grid", "32", "32"];
    let mut one: Vec<&str> = common.to_vec();
    one.extend(["--threads", "1", "--out", a.to_str().unwrap()]);
    let mut four: Vec<&str> = common.to_vec();
    four.extend(["--threads", "4", "--out", b.to_str().unwrap()]);
    assert!(flatband(&one).status.success());
    assert!(flatband(&four).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn classify_taxonomy() {
    let kind = |j: &str| {
        ok_json(&[
            "classify",
            "--kappa",
            "1",
            "--J",
            j,
            "--phi",
            "pi/3",
            "--flatband",
            "--grid",
            "64",
            "64",
        ])
    };
    let iso = kind("6");
    assert_eq!(iso["kind"], "IsolatedEP");
    assert_eq!(iso["loci"], serde_json::json!([[0.0, 0.0]]));
    assert_eq!(iso["tolerances"]["cond_EP"].as_f64().unwrap(), 1e3);
    assert_eq!(kind("8")["kind"], "Separated");
    assert_eq!(kind("4")["kind"], "SingleEPRing");
    assert_eq!(kind("1")["kind"], "DoubleEPRing");
}

#[test]
fn cls_three_cell_amplitude() {
    let v = ok_json(&["cls", "--three", "--J", "1", "--gamma", "0.25", "--phi", "pi/2"]);
    assert_eq!(v["psi_B1"], serde_json::json!([0.0, 0.75]));
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["cells"], serde_json::json!([[0, 0], [0, 1], [1, 0]]));

    let v = ok_json(&["cls", "--J", "3", "--phi", "pi/3", "--flatband", "--cell", "3", "4"]);
    assert_eq!(v["energy"], serde_json::json!([-1.5, 0.0]));

    // the single-cell state needs gamma = J sin(phi)
    let out = flatband(&["cls", "--J", "1", "--gamma", "0.25", "--phi", "pi/2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn evolve_cls_three_keeps_profile() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let snap = dir.path().join("final.json");
    let s = ok_json(&[
        "evolve",
        "--init",
        "cls-three",
        "--J",
        "1",
        "--gamma",
        "0.25",
        "--phi",
        "pi/2",
        "--t",
        "10",
        "--dt",
        "0.01",
        "--stride",
        "100",
        "--out",
        trace.to_str().unwrap(),
        "--snapshot",
        snap.to_str().unwrap(),
    ]);
    assert!(s["max_intensity_drift"].as_f64().unwrap() < 1e-8, "{s}");
    assert_eq!(s["steps"], 1000);
    let rows = csv_rows(&trace);
    // 11 recorded times × 8·8·3 sites
    assert_eq!(rows.len(), 11 * 192);
    assert_eq!(
        std::fs::read_to_string(&trace).unwrap().lines().next().unwrap(),
        "t,site_m,site_n,sublattice,intensity"
    );

    // the snapshot feeds back in as an initial state
    let init = format!("file:{}", snap.to_str().unwrap());
    let s = ok_json(&[
        "evolve", "--init", &init, "--J", "1", "--gamma", "0.25", "--phi", "pi/2", "--t", "1", "--format", "json",
    ]);
    assert!(s["max_intensity_drift"].as_f64().unwrap() < 1e-8);
}

#[test]
fn evolve_single_site_spreads() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("site.json");
    let mut psi = vec![[0.0, 0.0]; 192];
    psi[3 * (3 * 8 + 3)] = [1.0, 0.0];
    std::fs::write(&state, serde_json::to_string(&psi).unwrap()).unwrap();
    let init = format!("file:{}", state.to_str().unwrap());
    let s = ok_json(&[
        "evolve", "--init", &init, "--J", "1", "--gamma", "0.25", "--phi", "pi/2", "--t", "5", "--dt", "0.05", "--format", "json",
    ]);
    assert!(s["max_off_support_intensity"].as_f64().unwrap() > 1e-3);
}

#[test]
fn symmetry_and_oracle() {
    let v = ok_json(&["symmetry", "--model", "lieb-extended", "--J", "0"]);
    assert_eq!(v["time_reversal"], true);
    assert_eq!(v["chiral"], true);
    let v = ok_json(&["symmetry", "--J", "1", "--phi", "pi/4", "--gamma", "0.3", "--seed", "7"]);
    assert_eq!(v["chiral"], false);
    assert_eq!(v["time_reversal"], true);

    let v = ok_json(&[
        "oracle",
        "--model",
        "dice",
        "--J",
        "3",
        "--phi",
        "pi/3",
        "--flatband",
        "--cells",
        "3",
        "3",
        "--boundary",
        "periodic",
    ]);
    assert_eq!(v["consistent"], true, "{v}");
}

#[test]
fn model_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let out = flatband(&[
        "model",
        "--model",
        "kagome-modified",
        "--J",
        "3",
        "--phi",
        "pi/3",
        "--flatband",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v = ok_json(&["flatness", "--model-file", path.to_str().unwrap(), "--grid", "16", "16"]);
    assert_eq!(v["is_flat"], true);
    assert_eq!(v["model"]["name"], "kagome-modified");

    let out = flatband(&["flatness", "--model-file", path.to_str().unwrap(), "--J", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = flatband(&["flatness", "--model-file", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numeric_failure_exit_code() {
    let out = flatband(&[
        "evolve",
        "--init",
        "cls-single",
        "--model",
        "lieb-extended",
        "--gamma",
        "400",
        "--t",
        "10",
        "--dt",
        "0.1",
        "--format",
        "json",
    ]);
    // the single-cell state is rejected first: gamma breaks the flat-band condition
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("s.json");
    let mut psi = vec![[0.0, 0.0]; 12];
    psi[2] = [1.0, 0.0];
    std::fs::write(&state, serde_json::to_string(&psi).unwrap()).unwrap();
    let init = format!("file:{}", state.to_str().unwrap());
    let out = flatband(&[
        "evolve", "--init", &init, "--gamma", "400", "--cells", "2", "2", "--t", "10", "--dt", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}
