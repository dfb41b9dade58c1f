use std::path::Path;
use std::process::{Command, Output};

use evlc_core::bench::{formats, BenchReport, DatasetLayout, SceneConfig};

fn evlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evlc")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn short_scene(dir: &Path, name: &str) -> std::path::PathBuf {
    let mut scene = SceneConfig::preset(name).unwrap();
    scene.trajectory.t1 = 60_000;
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, scene.to_toml()).unwrap();
    path
}

#[test]
fn usage_errors_exit_with_1() {
    assert_eq!(evlc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(evlc(&["decode"]).status.code(), Some(1));
    assert_eq!(evlc(&["bench", "--dataset", "x", "--compensate", "maybe"]).status.code(), Some(1));
    assert_eq!(evlc(&["simulate"]).status.code(), Some(1), "no output directory");
    assert_eq!(evlc(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_with_2_and_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = evlc(&["bench", "--dataset", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("events.bin"));

    let bad = dir.path().join("events.csv");
    std::fs::write(&bad, "# evlc-events v1 width=4 height=4\n10,1,1,1\n5,1,1,1\n").unwrap();
    let out = evlc(&["decode", "--events", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("events.csv:3"), "{}", String::from_utf8_lossy(&out.stderr));

    let scene = dir.path().join("scene.toml");
    std::fs::write(&scene, "version = 1\nname = \"x\"\nbogus = 3\n").unwrap();
    let out = evlc(&["--config", s(&scene), "--output", s(&dir.path().join("ds")), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_decode_localize_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_scene(dir.path(), "static");
    let ds = dir.path().join("ds");
    let out = evlc(&["--seed", "5", "--config", s(&cfg), "--output", s(&ds), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    DatasetLayout::new(&ds).check().unwrap();

    let dets = dir.path().join("det.csv");
    let ev = ds.join(DatasetLayout::EVENTS);
    assert!(evlc(&["--output", s(&dets), "decode", "--events", s(&ev)]).status.success());
    let det = formats::read_with(&dets, formats::read_detections).unwrap();
    assert_eq!(det.iter().filter(|d| d.t == 25_000).count(), 8);

    let out = evlc(&[
        "localize",
        "--detections",
        s(&dets),
        "--markers",
        s(&ds.join(DatasetLayout::MARKERS)),
        "--calibration",
        s(&ds.join(DatasetLayout::CALIBRATION)),
    ]);
    assert!(out.status.success());
    let poses = formats::read_poses(&out.stdout[..], Path::new("stdout")).unwrap();
    assert_eq!(poses.len(), 2);
    assert!(poses.iter().all(|(_, p)| p.translation.norm() < 0.02));

    let motion = evlc(&["estimate-motion", "--events", s(&ev), "--calibration", s(&ds.join(DatasetLayout::CALIBRATION))]);
    assert!(motion.status.success());
    let text = String::from_utf8(motion.stdout).unwrap();
    assert!(text.starts_with("t_us,model,p0,p1,p2,contrast,iterations\n25000,flow2,"), "{text}");

    let res = dir.path().join("res");
    let out = evlc(&["--output", s(&res), "bench", "--dataset", s(&ds), "--compensate", "off"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("| static |"));
    let report = BenchReport::read(&res.join("report_static_baseline.json")).unwrap();
    assert_eq!(report.detection_rate, 1.0);
    assert!(report.frames_localized <= report.frames_evaluated);

    let svg = dir.path().join("plot.svg");
    let out = evlc(&["--output", s(&svg), "plot", s(&res.join("report_static_baseline.json"))]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn both_modes_see_the_same_frames() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_scene(dir.path(), "translation");
    let ds = dir.path().join("ds");
    assert!(evlc(&["--config", s(&cfg), "--output", s(&ds), "simulate"]).status.success());
    let res = dir.path().join("res");
    let out = evlc(&["--output", s(&res), "bench", "--dataset", s(&ds)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let b = BenchReport::read(&res.join("report_translation_baseline.json")).unwrap();
    let o = BenchReport::read(&res.join("report_translation_ours.json")).unwrap();
    let frames = |r: &BenchReport| r.frames.iter().map(|f| (f.t, f.n_events)).collect::<Vec<_>>();
    assert_eq!(frames(&b), frames(&o));
    assert_eq!(b.boxes_evaluated, o.boxes_evaluated);
    assert!(o.frames.iter().all(|f| f.motion.is_some()));
    let csv = std::fs::read_to_string(res.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
