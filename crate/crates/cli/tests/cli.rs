use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spcomm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spcomm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn spcomm")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = spcomm(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Four quadrant blobs with distinct type mixes.
fn quadrant_cells(dir: &Path) {
    let mut s = String::from("sample,fov,cell_id,x,y,cell_type\n");
    let mut id = 0;
    for (qx, qy, types) in [
        (0.0, 0.0, ["a", "a"]),
        (100.0, 0.0, ["b", "b"]),
        (0.0, 100.0, ["a", "c"]),
        (100.0, 100.0, ["c", "c"]),
    ] {
        for i in 0..10 {
            for j in 0..10 {
                let t = types[(i + j) % 2];
                let sample = if id % 2 == 0 { "S1" } else { "S2" };
                let fov = if qx == 0.0 { "F1" } else { "F2" };
                s += &format!(
                    "{sample},{fov},c{id:03},{},{},{t}\n",
                    qx + 4.0 * i as f64,
                    qy + 4.0 * j as f64
                );
                id += 1;
            }
        }
    }
    std::fs::write(dir.join("cells.csv"), s).unwrap();
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for tag in ["a", "b"] {
        ok(
            d,
            &[
                "simulate",
                "--setting",
                "1",
                "--seed",
                "7",
                "--scale",
                "0.02",
                "--output",
                &format!("{tag}.csv"),
                "--truth",
                &format!("{tag}_truth.csv"),
            ],
        );
    }
    for (x, y) in [("a.csv", "b.csv"), ("a_truth.csv", "b_truth.csv")] {
        assert_eq!(
            std::fs::read(d.join(x)).unwrap(),
            std::fs::read(d.join(y)).unwrap()
        );
    }
    let m = json(&d.join("a.csv.manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["communities"], 4);
}

#[test]
fn evaluate_identical_labelings_gives_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate",
            "--setting",
            "2",
            "--scale",
            "0.02",
            "--output",
            "cells.csv",
            "--truth",
            "truth.csv",
        ],
    );
    let out = ok(
        d,
        &[
            "evaluate",
            "--assignment",
            "truth.csv",
            "--truth",
            "truth.csv",
        ],
    );
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["ari"], 1.0);
    assert_eq!(v["reference_communities"], 5);
}

#[test]
fn logit_on_tumor_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let xs = [0.40, 39.30, 3.26, 12.58, 7.28, 6.95, 2.98, 0.59];
    let mut s = String::from("sample,x,y\n");
    for (i, x) in xs.iter().enumerate() {
        s += &format!("{},{x},{}\n", i + 1, 1 - i % 2);
    }
    std::fs::write(d.join("tumor.csv"), s).unwrap();
    ok(
        d,
        &[
            "logit",
            "--input",
            "tumor.csv",
            "--output",
            "fit.json",
            "--curve",
            "curve.csv",
            "--label",
            "dcd-tmhc",
            "--grid-points",
            "11",
        ],
    );
    let fit = &json(&d.join("fit.json"))["fit"];
    assert!(
        (fit["alpha"].as_f64().unwrap() - 1.375).abs() < 0.01,
        "{fit}"
    );
    assert!(
        (fit["beta"].as_f64().unwrap() + 0.219).abs() < 0.01,
        "{fit}"
    );
    assert_eq!(fit["separation"], "none");
    let curve = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 12);
    assert!(curve.lines().nth(1).unwrap().ends_with(",dcd-tmhc"));
}

#[test]
fn knn_rows_are_tenths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    quadrant_cells(d);
    ok(
        d,
        &[
            "compose",
            "--cells",
            "cells.csv",
            "--method",
            "knn",
            "--k",
            "10",
            "--output",
            "knn.csv",
        ],
    );
    let text = std::fs::read_to_string(d.join("knn.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["cell_id", "sample", "n_i", "a", "b", "c"]);
    let mut rows = 0;
    for line in lines {
        for v in line.split(',').skip(3) {
            let v: f64 = v.parse().unwrap();
            assert!((v * 10.0 - (v * 10.0).round()).abs() < 1e-9, "{line}");
        }
        rows += 1;
    }
    assert_eq!(rows, 400);
}

#[test]
fn disk_pipeline_profile_and_fractions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    quadrant_cells(d);
    ok(
        d,
        &[
            "compose",
            "--cells",
            "cells.csv",
            "--r",
            "6",
            "--margin",
            "0",
            "--output",
            "comp.csv",
            "--diagnostics",
            "sizes.csv",
        ],
    );
    let m = json(&d.join("comp.csv.manifest.json"));
    assert_eq!(m["rows"], 400);
    assert_eq!(m["radius"], 6.0);
    ok(
        d,
        &[
            "detect",
            "--input",
            "comp.csv",
            "--method",
            "kmeans",
            "--k",
            "4",
            "--transform",
            "skip",
            "--output",
            "km.csv",
        ],
    );
    let m = json(&d.join("km.csv.manifest.json"));
    assert_eq!(m["community_count"], 4);
    ok(
        d,
        &[
            "detect",
            "--input",
            "comp.csv",
            "--method",
            "kmeans",
            "--k",
            "4",
            "--transform",
            "skip",
            "--cells",
            "cells.csv",
            "--output",
            "km_fov.csv",
        ],
    );
    let asg = std::fs::read_to_string(d.join("km_fov.csv")).unwrap();
    assert_eq!(asg.lines().next().unwrap(), "cell_id,sample,fov,community");
    assert!(asg.lines().nth(1).unwrap().starts_with("c000,S1,F1,"));
    ok(
        d,
        &[
            "profile",
            "--cells",
            "cells.csv",
            "--assignment",
            "km.csv",
            "--output",
            "profile.csv",
        ],
    );
    let profile = std::fs::read_to_string(d.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().next().unwrap(), "community,size,a,b,c");
    assert_eq!(profile.lines().count(), 5);

    std::fs::write(d.join("stages.csv"), "sample,y\nS1,1\nS2,0\n").unwrap();
    ok(
        d,
        &[
            "fractions",
            "--cells",
            "cells.csv",
            "--assignment",
            "km.csv",
            "--community",
            "0",
            "--stages",
            "stages.csv",
            "--output",
            "frac.csv",
        ],
    );
    let frac = std::fs::read_to_string(d.join("frac.csv")).unwrap();
    assert_eq!(frac.lines().next().unwrap(), "sample,x,y,k,n");
    assert_eq!(frac.lines().count(), 3);
}

#[test]
fn kmeans_with_one_cluster_and_stm() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    quadrant_cells(d);
    ok(
        d,
        &[
            "compose",
            "--cells",
            "cells.csv",
            "--method",
            "knn",
            "--output",
            "comp.csv",
        ],
    );
    ok(
        d,
        &[
            "detect",
            "--input",
            "comp.csv",
            "--method",
            "kmeans",
            "--k",
            "1",
            "--transform",
            "skip",
            "--output",
            "one.csv",
        ],
    );
    assert_eq!(json(&d.join("one.csv.manifest.json"))["community_count"], 1);
    ok(
        d,
        &[
            "detect",
            "--input",
            "comp.csv",
            "--method",
            "stm",
            "--k1",
            "1000",
            "--k2",
            "10",
            "--transform",
            "skip",
            "--output",
            "stm.csv",
        ],
    );
    assert_eq!(json(&d.join("stm.csv.manifest.json"))["community_count"], 1);
    let out = spcomm(
        d,
        &[
            "detect", "--input", "comp.csv", "--method", "stm", "--output", "x.csv",
        ],
    );
    assert!(!out.status.success());
}

#[test]
fn config_file_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    quadrant_cells(d);
    ok(
        d,
        &[
            "compose",
            "--cells",
            "cells.csv",
            "--method",
            "knn",
            "--output",
            "comp.csv",
        ],
    );
    std::fs::write(
        d.join("run.conf"),
        "method = dcd-tmhc\npreset = simulation\nsize_cap = 50\nn_sim = 50\nseed = 3\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "detect", "--config", "run.conf", "--input", "comp.csv", "--output", "a.csv", "--seed",
            "4",
        ],
    );
    let m = json(&d.join("a.csv.manifest.json"));
    assert_eq!(m["args"]["seed"], 4);
    assert_eq!(m["config"]["size_cap"], 50);
    assert_eq!(m["config"]["n_sim"], 50);
    ok(
        d,
        &[
            "detect",
            "--config",
            "a.csv.manifest.json",
            "--output",
            "b.csv",
            "--manifest",
            "b.json",
        ],
    );
    assert_eq!(
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    quadrant_cells(d);
    ok(
        d,
        &[
            "compose",
            "--cells",
            "cells.csv",
            "--method",
            "knn",
            "--output",
            "comp.csv",
        ],
    );
    for (threads, out) in [("1", "t1.csv"), ("3", "t3.csv")] {
        ok(
            d,
            &[
                "--threads",
                threads,
                "detect",
                "--input",
                "comp.csv",
                "--preset",
                "simulation",
                "--size-cap",
                "40",
                "--n-sim",
                "40",
                "--output",
                out,
            ],
        );
    }
    assert_eq!(
        std::fs::read(d.join("t1.csv")).unwrap(),
        std::fs::read(d.join("t3.csv")).unwrap()
    );
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = spcomm(
        d,
        &[
            "compose",
            "--cells",
            "missing.csv",
            "--r",
            "5",
            "--output",
            "x.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "Io");
    assert!(err["message"].as_str().unwrap().contains("missing.csv"));

    std::fs::write(d.join("bad.csv"), "sample,x,y,cell_type\nS,1,oops,a\n").unwrap();
    let out = spcomm(
        d,
        &[
            "compose", "--cells", "bad.csv", "--r", "5", "--output", "x.csv",
        ],
    );
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "ParseError");

    let out = spcomm(d, &["detect", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "Usage");
}
