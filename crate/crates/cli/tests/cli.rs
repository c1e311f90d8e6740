//! End-to-end runs of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use sl2lab::cayley::{build_generator_set_bg, second_eigenvalue, symmetrize, CayleyGraph, SpectralOptions};
use sl2lab::markov::{mix_profile, ChainSpec, EvolveMode, Laziness};
use sl2lab::sl2::Sl2Group;
use sl2lab::{FieldCtx, Mat2, ProjPoint};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl2lab")).args(args).output().expect("binary runs")
}

fn lab_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl2lab")).args(args).env(key, val).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let head = r.headers().unwrap().clone();
    r.records()
        .map(|rec| head.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect())
        .collect()
}

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn expander_writes_lambda2_and_girth() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs/e1.csv");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    stdout(&lab(&["expander", "--prime", "31", "--g", "w", "--N", "5", "--symmetrize", "--out", p(&out)]));
    let rows = csv_rows(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 1);
    let lambda2: f64 = rows[0]["lambda2"].parse().unwrap();
    assert!(rows[0]["girth"].parse::<usize>().unwrap() >= 2);

    let f = FieldCtx::new(31).unwrap();
    let gens = symmetrize(&f, &build_generator_set_bg(&f, &Mat2::w(&f), 5).unwrap());
    let g = CayleyGraph::sl2(&Sl2Group::new(f.clone()), &gens).unwrap();
    let want = second_eigenvalue(&g, &SpectralOptions::default()).unwrap().lambda2;
    assert!((lambda2 - want).abs() < 1e-9 && lambda2 < 1.0, "{lambda2} vs {want}");
}

#[test]
fn markov_profile_matches_library() {
    let text = stdout(&lab(&["markov", "--prime", "11", "--g", "w", "--gamma", "1", "--nmax", "40"]));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 41);
    let f = FieldCtx::new(11).unwrap();
    let spec = ChainSpec::new(&f, Mat2::w(&f), f.one(), Laziness::HalfLazy).unwrap();
    let prof = mix_profile(&spec, ProjPoint::Finite(f.one()), 40, EvolveMode::Exact).unwrap();
    for (row, want) in rows.iter().zip(&prof.rows) {
        assert_eq!(row["n"].parse::<usize>().unwrap(), want.n);
        assert_eq!(row["tv_p1"].parse::<f64>().unwrap(), want.tv_p1);
    }
}

#[test]
fn exit_codes() {
    let o = lab(&["markov", "--prime", "15"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert_eq!(lab(&["markov"]).status.code(), Some(2));
    assert_eq!(lab(&["no-such-experiment"]).status.code(), Some(2));
    let o = lab_env(&["product-stats", "--prime", "101", "--N", "3", "--l", "2"], "LAB_BUDGET", "10");
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "markov", "prime": 11, "nmax": 5, "format": "json"}"#).unwrap();
    let v: Value = serde_json::from_str(&stdout(&lab(&["--config", p(&cfg)]))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 6);
    let v: Value = serde_json::from_str(&stdout(&lab(&["--config", p(&cfg), "markov", "--nmax", "2"]))).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(v[0]["prime"], 11);
    let text = stdout(&lab(&["--config", p(&cfg), "--format", "csv", "markov", "--prime", "13", "--nmax", "1"]));
    assert!(text.starts_with("experiment,prime") && text.contains("markov,13,"), "{text}");
}

#[test]
fn format_follows_extension() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g.json");
    stdout(&lab(&["girth", "--cyclic", "7", "--steps=1,-1", "--out", p(&out)]));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v[0]["girth"], 7);
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let runs: [&[&str]; 3] = [
        &["count-bg", "--prime", "101", "--N", "10"],
        &["weil-check", "--pmax", "300", "--tuples", "5"],
        &["expander", "--prime", "13", "--gens", "1,1,0,1;1,0,1,1", "--symmetrize"],
    ];
    for args in runs {
        let a = stdout(&lab(&[&["--threads", "1"], args].concat()));
        let b = stdout(&lab(&[&["--threads", "3"], args].concat()));
        let c = stdout(&lab(&[&["--threads", "3"], args].concat()));
        assert_eq!(a, b, "{args:?}");
        assert_eq!(b, c, "{args:?}");
    }
}

#[test]
fn list_names_every_experiment() {
    let text = stdout(&lab(&["--list"]));
    assert_eq!(text.lines().count(), 19);
    for name in ["expander", "markov", "qr-gap", "reconstruct"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}

#[test]
fn suite_empty_self_and_drift() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, r#"{"runs": []}"#).unwrap();
    assert_eq!(stdout(&lab(&["suite", p(&empty)])).trim(), "{}");

    let manifest = dir.path().join("m.json");
    std::fs::write(
        &manifest,
        r#"{"runs": [
            {"name": "c", "experiment": "girth", "args": {"cyclic": 9, "steps": "1,-1"}},
            {"name": "q", "experiment": "qr-gap", "args": {"prime": 103}, "tolerance": {"ratio": {"abs": 0.01}}}
        ]}"#,
    )
    .unwrap();
    let base = dir.path().join("base.json");
    stdout(&lab(&["suite", p(&manifest), "--freeze", p(&base)]));
    let o = lab(&["suite", p(&manifest), "--baseline", p(&base)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(&base).unwrap()).unwrap();
    let r = v["q"][0]["ratio"].as_f64().unwrap();
    v["q"][0]["ratio"] = (r + 0.005).into();
    std::fs::write(&base, v.to_string()).unwrap();
    assert_eq!(lab(&["suite", p(&manifest), "--baseline", p(&base)]).status.code(), Some(0));
    v["c"][0]["girth"] = 8.into();
    std::fs::write(&base, v.to_string()).unwrap();
    let o = lab(&["suite", p(&manifest), "--baseline", p(&base)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c[0].girth"));
}

#[test]
fn desk_manifest_parses() {
    let text = std::fs::read_to_string(root().join("manifests/desk.json")).unwrap();
    let m: Value = serde_json::from_str(&text).unwrap();
    let base: Value =
        serde_json::from_str(&std::fs::read_to_string(root().join("baselines/desk.json")).unwrap()).unwrap();
    let names: Vec<&str> = m["runs"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    let frozen: Vec<&str> = base.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(names, frozen);
}
