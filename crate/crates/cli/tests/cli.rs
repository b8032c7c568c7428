use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pcrobust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcrobust"))
        .args(args)
        .arg("--log=warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, frames: usize) -> PathBuf {
    let root = dir.join("kitti");
    let out = pcrobust(&["synth", "--output", s(&root), "--frames", &frames.to_string(), "--small"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    root
}

/// Labels with a trailing score of 1, written as detections.
fn perfect_dets(labels: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for e in fs::read_dir(labels).unwrap() {
        let p = e.unwrap().path();
        let text: String = fs::read_to_string(&p).unwrap().lines().map(|l| format!("{l} 1\n")).collect();
        fs::write(dst.join(p.file_name().unwrap()), text).unwrap();
    }
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

fn col(path: &Path, name: &str) -> usize {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.headers().unwrap().iter().position(|h| h == name).unwrap()
}

#[test]
fn corrupt_writes_every_cell_and_copies_severity_zero() {
    let dir = tempfile::tempdir().unwrap();
    let root = synth(dir.path(), 2);
    let out = dir.path().join("out");
    let o = pcrobust(&["corrupt", "--root", s(&root), "--output", s(&out), "--kinds", "beam_del", "--severities", "0,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["000000", "000001"] {
        let src = fs::read(root.join("velodyne").join(format!("{f}.bin"))).unwrap();
        let clean = fs::read(out.join("beam_del/0/velodyne").join(format!("{f}.bin"))).unwrap();
        let hit = fs::read(out.join("beam_del/3/velodyne").join(format!("{f}.bin"))).unwrap();
        assert_eq!(clean, src);
        assert!(hit.len() < src.len() && hit.len().is_multiple_of(16));
    }
    let log = fs::read_to_string(out.join("provenance.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(out.join("run.json").exists());
}

#[test]
fn unknown_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = synth(dir.path(), 1);
    let o = pcrobust(&["corrupt", "--root", s(&root), "--output", s(&dir.path().join("o")), "--kinds", "hail"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hail"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(pcrobust(&["corrupt", "--no-such-flag"]).status.code(), Some(2));
}

#[test]
fn denoise_of_empty_dir_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty");
    fs::create_dir_all(&input).unwrap();
    let o = pcrobust(&["denoise", "--input", s(&input), "--output", s(&dir.path().join("clean"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn denoise_mirrors_tree() {
    let dir = tempfile::tempdir().unwrap();
    let root = synth(dir.path(), 1);
    let out = dir.path().join("dn");
    let o = pcrobust(&["denoise", "--input", s(&root), "--output", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("velodyne/000000.bin").exists());
    assert!(out.join("label_2/000000.txt").exists());
    assert!(out.join("denoise.csv").exists());
}

#[test]
fn perfect_detections_score_full_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let root = synth(dir.path(), 2);
    let dets = dir.path().join("dets");
    perfect_dets(&root.join("label_2"), &dets.join("clean"));
    for l in 1..=5 {
        perfect_dets(&root.join("label_2"), &dets.join("cutout").join(l.to_string()));
    }
    let report = dir.path().join("report");
    let o = pcrobust(&[
        "evaluate", "--dets", s(&dets), "--root", s(&root), "--kinds", "cutout", "--detector", "oracle", "--output", s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = report.join("report.csv");
    let (oa, ce, kind) = (col(&csv, "oa"), col(&csv, "ce"), col(&csv, "row_type"));
    let rows = csv_rows(&csv);
    assert!(!rows.is_empty());
    for r in &rows {
        if !r[oa].is_empty() {
            assert_eq!(r[oa].parse::<f64>().unwrap(), 1.0);
        }
        if r[kind] == *"mean" {
            assert_eq!(r[ce].parse::<f64>().unwrap(), 0.0);
        }
    }
    assert!(report.join("report.json").exists());
    let txt = fs::read_to_string(report.join("report.txt")).unwrap();
    assert!(txt.contains("oracle"));

    let rendered = dir.path().join("tables.txt");
    let o = pcrobust(&["report", s(&csv), "--output", s(&rendered)]);
    assert!(o.status.success());
    assert!(fs::read_to_string(rendered).unwrap().contains("mCE"));
}

#[test]
fn partial_table_needs_explicit_flag() {
    let dir = tempfile::tempdir().unwrap();
    let root = synth(dir.path(), 1);
    let dets = dir.path().join("dets");
    perfect_dets(&root.join("label_2"), &dets.join("clean"));
    for l in [1, 2] {
        perfect_dets(&root.join("label_2"), &dets.join("cutout").join(l.to_string()));
    }
    let args = ["evaluate", "--dets", s(&dets), "--root", s(&root), "--kinds", "cutout", "--severities", "1,2"];
    let o = pcrobust(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cutout@3"));
    let mut with = args.to_vec();
    with.push("--allow-partial");
    assert!(pcrobust(&with).status.success());
}

const CALIB: &str = "P0: 1 0 0 0 0 1 0 0 0 0 1 0
P1: 1 0 0 0 0 1 0 0 0 0 1 0
P2: 721.5 0 609.6 44.9 0 721.5 172.9 0.2 0 0 1 0.003
P3: 721.5 0 609.6 -339.5 0 721.5 172.9 2.2 0 0 1 0.003
R0_rect: 1 0 0 0 1 0 0 0 1
Tr_velo_to_cam: 0 -1 0 0 0 0 -1 0 1 0 0 0
Tr_imu_to_velo: 1 0 0 0 0 1 0 0 0 0 1 0
";

#[test]
fn three_frame_hand_fixture() {
    // Frame a: matched car. Frame b: missed car. Frame c: a false alarm.
    // Ranked: TP at 0.9, FP at 0.8, so precision is 1 up to recall 0.5 and
    // R40 AP is 20/40 at every difficulty.
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("kitti");
    for d in ["label_2", "calib", "velodyne"] {
        fs::create_dir_all(root.join(d)).unwrap();
    }
    let car = |x: f64| format!("Car 0.00 0 0.00 500.00 150.00 600.00 230.00 1.50 1.60 4.00 0.00 1.60 {x:.2} 0.00");
    let gts = [("a", Some(car(10.0))), ("b", Some(car(20.0))), ("c", None)];
    let dets = dir.path().join("dets/clean");
    fs::create_dir_all(&dets).unwrap();
    for (f, gt) in &gts {
        fs::write(root.join("calib").join(format!("{f}.txt")), CALIB).unwrap();
        fs::write(root.join("label_2").join(format!("{f}.txt")), gt.as_ref().map_or(String::new(), |g| format!("{g}\n"))).unwrap();
    }
    fs::write(dets.join("a.txt"), format!("{} 0.9\n", car(10.0))).unwrap();
    fs::write(dets.join("c.txt"), format!("{} 0.8\n", car(40.0))).unwrap();
    let report = dir.path().join("report");
    let o = pcrobust(&[
        "evaluate", "--dets", s(&dir.path().join("dets")), "--root", s(&root), "--kinds", "", "--classes", "Car",
        "--output", s(&report),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = report.join("report.csv");
    let rows = csv_rows(&csv);
    let clean = rows.iter().find(|r| &r[col(&csv, "corruption")] == "clean").unwrap();
    for name in ["ap_easy", "ap_moderate", "ap_hard", "oa"] {
        assert_eq!(clean[col(&csv, name)].parse::<f64>().unwrap(), 0.5, "{name}");
    }
    let get = |n: &str| clean[col(&csv, n)].parse::<f64>().unwrap();
    // The false alarm overlaps nothing, which the partition calls MD.
    assert_eq!((get("br_td"), get("br_fd"), get("br_md")), (0.5, 0.0, 0.5));
    assert_eq!(get("gt_misses"), 1.0);
}
