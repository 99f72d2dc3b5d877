use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concentration::kalman::{filter_values, KalmanParams};
use concentration::keypoint_io::{parse_trace, serialize_trace, Label};
use concentration::synth::{generate_trace, SynthConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concentration"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_trace(path: &Path, frames: usize, label: Label, seed: u64) {
    let cfg = SynthConfig {
        seed,
        frames,
        ..SynthConfig::default()
    };
    let mut bytes = Vec::new();
    serialize_trace(&generate_trace(&cfg, label).unwrap(), &mut bytes).unwrap();
    std::fs::write(path, bytes).unwrap();
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn preprocess_writes_one_row_per_window() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    write_trace(&trace, 100, Label::High, 1);
    let out_dir = dir.path().join("out");
    assert_ok(&cli(&["--out", p(&out_dir), "preprocess", p(&trace)]));
    let text = std::fs::read_to_string(out_dir.join("features.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "window_index,t_seconds,sigma_top_x,sigma_top_y,sigma_mid_x,sigma_mid_y,label"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,2.5,") && lines[1].ends_with(",1"));
    assert!(lines[2].starts_with("1,5,"));
}

#[test]
fn malformed_input_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.jsonl");
    write_trace(&good, 100, Label::Low, 2);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        "{\"fps\":20.0,\"label\":0}\n{\"frame\":0,\"points\":[[0.5,0.5,1.0]]}\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = cli(&["--out", p(&out_dir), "preprocess", p(&good), p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.jsonl"));
    assert!(!out_dir.exists());
}

fn features_from(dir: &Path, labels: &[Label]) -> PathBuf {
    let mut traces = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        let t = dir.join(format!("t{i}.jsonl"));
        write_trace(&t, 100, label, 10 + i as u64);
        traces.push(t);
    }
    let out_dir = dir.join("features");
    let mut args = vec!["--out", p(&out_dir), "preprocess"];
    args.extend(traces.iter().map(|t| p(t)));
    assert_ok(&cli(&args));
    out_dir.join("features.csv")
}

#[test]
fn single_fold_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let features = features_from(
        dir.path(),
        &[Label::High, Label::Low, Label::High, Label::Low],
    );
    let out = cli(&[
        "--out",
        p(&dir.path().join("m")),
        "train",
        p(&features),
        "--folds",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_class_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let features = features_from(dir.path(), &[Label::High; 4]);
    let out_dir = dir.path().join("m");
    let out = cli(&["--out", p(&out_dir), "train", p(&features)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out_dir.join("model.json").exists());
}

#[test]
fn synth_writes_parseable_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("s");
    assert_ok(&cli(&[
        "--seed",
        "5",
        "--out",
        p(&out_dir),
        "synth",
        "--traces-per-class",
        "2",
    ]));
    let mut names: Vec<String> = std::fs::read_dir(out_dir.join("traces"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "trace_0000_high.jsonl",
            "trace_0001_low.jsonl",
            "trace_0002_high.jsonl",
            "trace_0003_low.jsonl"
        ]
    );
    for name in names {
        let f = std::fs::File::open(out_dir.join("traces").join(&name)).unwrap();
        let trace = parse_trace(std::io::BufReader::new(f), None, None).unwrap();
        assert_eq!(trace.len(), 100);
        let expected = if name.contains("high") {
            Label::High
        } else {
            Label::Low
        };
        assert_eq!(trace.label(), Some(expected));
    }
}

#[test]
fn staged_pipeline_matches_run_and_filters_recognition() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<Label> = (0..8)
        .map(|i| if i % 2 == 0 { Label::High } else { Label::Low })
        .collect();
    let features = features_from(dir.path(), &labels);
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[train]\nepochs = 20\nfolds = 2\n").unwrap();
    let model_dir = dir.path().join("m");
    assert_ok(&cli(&[
        "--config",
        p(&cfg),
        "--out",
        p(&model_dir),
        "train",
        p(&features),
    ]));
    let model = model_dir.join("model.json");

    let trace = dir.path().join("long.jsonl");
    write_trace(&trace, 600, Label::Low, 99);
    let rec_dir = dir.path().join("r");
    assert_ok(&cli(&[
        "--out",
        p(&rec_dir),
        "recognize",
        p(&trace),
        "--model",
        p(&model),
    ]));
    let est_dir = dir.path().join("e");
    assert_ok(&cli(&[
        "--out",
        p(&est_dir),
        "estimate",
        p(&rec_dir.join("recognition.csv")),
    ]));
    let run_dir = dir.path().join("run");
    assert_ok(&cli(&[
        "--out",
        p(&run_dir),
        "run",
        p(&trace),
        "--model",
        p(&model),
    ]));

    let estimation = std::fs::read_to_string(est_dir.join("estimation.csv")).unwrap();
    let series = std::fs::read_to_string(run_dir.join("series.csv")).unwrap();
    assert_eq!(estimation, series);

    let rows: Vec<Vec<f64>> = series
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    let s_r: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let s_e = filter_values(&s_r, &KalmanParams::default()).unwrap();
    for (row, want) in rows.iter().zip(&s_e) {
        assert_eq!(row[3], *want);
        assert!((0.0..=1.0).contains(&row[2]));
    }
    for name in [
        "features.csv",
        "histogram.csv",
        "keypoints_2d.csv",
        "manifest.json",
        "fit_report.json",
    ] {
        assert!(run_dir.join(name).exists(), "{name}");
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "sede = 3\n").unwrap();
    let out = cli(&[
        "--config",
        p(&cfg),
        "--out",
        p(&dir.path().join("o")),
        "synth",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
