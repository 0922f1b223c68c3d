use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn glx(args: &[&str], cfg: Option<(&Path, serde_json::Value)>) -> Output {
    if let Some((p, v)) = cfg {
        std::fs::write(p, v.to_string()).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_glx")).args(args).env_remove("GLX_CACHE_DIR").output().unwrap()
}

fn small() -> serde_json::Value {
    json!({"model": {"kind": "massive", "dim": 2, "mass": 0.3}, "sizes": [8], "replicates": 200})
}

#[test]
fn membrane_below_five_dimensions_exits_2_with_constraint() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    let out = t.path().join("o");
    let o = glx(
        &["covariance", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        Some((&cfg, json!({"model": {"kind": "membrane", "dim": 3}}))),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("membrane requires d>=5"));
    assert!(!out.exists(), "nothing written before validation");
}

#[test]
fn unknown_field_and_missing_file_exit_2() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    let o = glx(&["maxima", "--config", cfg.to_str().unwrap()], Some((&cfg, json!({"replicats": 10}))));
    assert_eq!(o.status.code(), Some(2));
    let o = glx(&["maxima", "--config", t.path().join("none.json").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_headers_and_manifest() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    let out = t.path().join("o");
    let o = glx(
        &["maxima", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "4"],
        Some((&cfg, small())),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let hash = manifest["config_hash"].as_str().unwrap().to_string();
    assert_eq!(manifest["seed"], 4);
    for f in manifest["outputs"].as_array().unwrap() {
        let f = f.as_str().unwrap();
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        if f.ends_with(".csv") {
            assert!(text.starts_with(&format!("# config_hash: {hash}\n# manifest: manifest.json\n")), "{f}");
        } else {
            assert!(text.contains(&hash), "{f}");
        }
    }
}

#[test]
fn merge_refuses_mismatched_hashes() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    let mut runs = Vec::new();
    for (tag, seed, mass) in [("a", 1, 0.3), ("b", 2, 0.3), ("c", 1, 0.4)] {
        let out = t.path().join(tag);
        let mut v = small();
        v["model"]["mass"] = json!(mass);
        let o = glx(
            &["maxima", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", &seed.to_string()],
            Some((&cfg, v)),
        );
        assert_eq!(o.status.code(), Some(0));
        runs.push(out.join("maxima_n8.csv"));
    }
    let merged = t.path().join("m.csv");
    // seeds differ, config hash does not
    let o =
        glx(&["merge", "--out", merged.to_str().unwrap(), runs[0].to_str().unwrap(), runs[1].to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(merged.exists());
    let bad = t.path().join("bad.csv");
    let o = glx(&["merge", "--out", bad.to_str().unwrap(), runs[0].to_str().unwrap(), runs[2].to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(!bad.exists());
}

#[test]
fn inconclusive_audit_exits_0_with_flag() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    let out = t.path().join("o");
    // one size gives no trend to certify
    let v = json!({"model": {"kind": "massive", "dim": 1, "mass": 0.3}, "sizes": [64]});
    let o = glx(&["audit", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], Some((&cfg, v)));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["flags"]["conditional_variance"], "inconclusive");
}
