use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pnlv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnlv")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = pnlv(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

const LINE: [&str; 11] =
    ["integrate", "--eq", "iv", "--alpha", "0", "--beta", "-2", "--seed", "jet:z=1,w=-2,w1=-2", "--path", "segment:1,5"];

#[test]
fn rational_line_example_tracks_minus_two_z() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &LINE);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("pathParam,zRe,zIm,wRe,wIm,w1Re,w1Im,w2Re,w2Im,flags"));
    let r = rows(&text);
    assert!(r.len() > 2);
    assert_eq!(r.last().unwrap()[1], 5.0);
    for row in &r {
        let z = row[1];
        // Neighbouring solutions separate like exp(z^2), which bounds the attainable accuracy.
        let bound = 1e-13 * (z * z).exp() * z;
        assert!((row[3] + 2.0 * z).abs() <= bound.max(1e-9), "w({z}) = {}", row[3]);
        assert!((row[5] + 2.0).abs() <= bound.max(1e-9));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(dir.path(), &LINE).stdout;
    let b = ok(dir.path(), &LINE).stdout;
    assert_eq!(a, b);
    let pf = ["polefield", "--eq", "iv", "--seed", "special:wh:gamma=0.5", "--region", "annulus:0,6"];
    assert_eq!(ok(dir.path(), &pf).stdout, ok(dir.path(), &pf).stdout);
}

#[test]
fn verify_laurent_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["verify", "--suite", "laurent", "--out", "report.json"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["failed"], 0);
    assert_eq!(v["runConfig"]["options"]["suite"], "laurent");
}

#[test]
fn polefield_then_strings() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["polefield", "--seed", "special:wh:gamma=0.5,u1=0.3+0.2i", "--region", "annulus:0,12", "--out", "poles.json", "--svg", "poles.svg"],
    );
    let cat: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("poles.json")).unwrap()).unwrap();
    assert_eq!(cat["eq"]["kind"], "IV");
    assert!(cat["poles"].as_array().unwrap().len() > 20);
    assert!(cat["contentHash"].as_str().unwrap().starts_with("sha256:"));
    assert!(fs::read_to_string(dir.path().join("poles.svg")).unwrap().contains("<svg"));

    let out = ok(dir.path(), &["strings", "--in", "poles.json", "--out", "strings.json"]);
    let report = String::from_utf8_lossy(&out.stderr);
    assert!(report.contains("strings"), "{report}");
    let s: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("strings.json")).unwrap()).unwrap();
    let strings = s["strings"].as_array().unwrap();
    assert_eq!(strings.len(), 4);
    for st in strings {
        assert!(st["omega"].is_object() && st["tau"]["den"].is_number() && st["countCoeff"].is_number());
    }
}

#[test]
fn backlund_forward_then_inverse_restores_the_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = LINE.to_vec();
    args.extend(["--out", "t.csv"]);
    ok(dir.path(), &args);
    ok(dir.path(), &["backlund", "--in", "t.csv", "--transform", "forward", "--out", "f.csv", "--history", "h.json"]);
    ok(dir.path(), &["backlund", "--in", "f.csv", "--transform", "inverse", "--out", "back.csv"]);
    let orig = rows(&fs::read_to_string(dir.path().join("t.csv")).unwrap());
    let back = rows(&fs::read_to_string(dir.path().join("back.csv")).unwrap());
    assert_eq!(orig.len(), back.len());
    for (a, b) in orig.iter().zip(&back) {
        for k in 3..7 {
            assert!((a[k] - b[k]).abs() <= 1e-10 * (1.0 + a[k].abs()), "{a:?} vs {b:?}");
        }
    }
    let h: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("h.json")).unwrap()).unwrap();
    assert_eq!(h["history"].as_array().unwrap().len(), 2);
}

#[test]
fn series_json_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["series", "--eq", "i", "--seed", "pole:p=0,h=2", "--order", "6"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["coeffs"][0]["re"], 1.0);
    assert_eq!(v["leadingExponent"]["num"], -2);
    assert_eq!(v["truncationOrder"], 6);
    assert!(v["seed"].is_object());
    let out = ok(dir.path(), &["series", "--eq", "iv", "--kind", "asymptotic", "--family", "IVa", "--order", "4"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["family"].is_string() && v["exponentStep"].is_object());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "eq=iv\nalpha=5\n[series]\norder=3\nseed=pole:p=0\n").unwrap();
    let out = ok(dir.path(), &["series", "--config", "run.cfg", "--alpha", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["runConfig"]["alpha"], "1+0i");
    assert_eq!(v["runConfig"]["options"]["order"], "3");
    fs::write(dir.path().join("run.json"), r#"{"eq":"ii","series":{"order":2,"seed":"pole:p=0"}}"#).unwrap();
    let out = ok(dir.path(), &["series", "--config", "run.json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["runConfig"]["eq"], "ii");
    assert_eq!(v["truncationOrder"], 2);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pnlv(dir.path(), &["series", "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(pnlv(dir.path(), &["verify", "--suite", "nope"]).status.code(), Some(1));
    assert_eq!(pnlv(dir.path(), &["strings", "--in", "missing.json"]).status.code(), Some(1));
    assert_eq!(pnlv(dir.path(), &["--help"]).status.code(), Some(0));
}
