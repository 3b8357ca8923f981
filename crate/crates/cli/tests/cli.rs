use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use itf_core::evaluate::{map_error, read_report_csv};
use itf_core::pipeline::{estimated_angles, read_map_csv};
use itf_core::signals::{save_record, RecordFormat, SampleRecord};
use itf_core::simulate::load_truth;

fn itf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_itf")).args(args).output().expect("run itf")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, seed: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let o = itf(&[
        "simulate", "--output", path(&out), "--windows", "40", "--hop", "16", "--seed", seed, "--snr-db", "20",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn simulate_map_bench_compose() {
    let dir = tempfile::tempdir().unwrap();
    let rec = simulate(dir.path(), "rec.csv", "5");
    assert!(dir.path().join("rec.truth.csv").exists());
    let map = dir.path().join("map.csv");
    let settings = ["--filter", "bpf", "--cc", "cctd", "--interp", "cubic:4", "--hop", "16"];
    let mut args = vec!["map", "--input", path(&rec), "--output", path(&map)];
    args.extend(settings);
    let o = itf(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = dir.path().join("report.csv");
    let mut args = vec!["bench", "--grid", "single", "--input", path(&rec), "--output", path(&report)];
    args.extend(settings);
    let o = itf(&args);
    assert!(o.status.success(), "{}", stderr(&o));

    let est = read_map_csv(BufReader::new(fs::File::open(&map).unwrap())).unwrap();
    let truth = load_truth(&dir.path().join("rec.truth.csv")).unwrap();
    let t: Vec<_> = truth.track.points.iter().copied().map(Some).collect();
    let direct = map_error(&estimated_angles(&est), &t).unwrap();
    let rows = read_report_csv(BufReader::new(fs::File::open(&report).unwrap())).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((rows[0].mean_dist_deg.unwrap() - direct.mean_deg).abs() < 1e-6);
    assert_eq!(rows[0].excluded_windows, direct.excluded);
    assert_eq!(rows[0].filter, "BPF");
}

#[test]
fn outputs_are_byte_identical_for_equal_seeds() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut files = Vec::new();
    for dir in [a.path(), b.path()] {
        let rec = simulate(dir, "rec.csv", "9");
        let map = dir.join("map.csv");
        let o = itf(&["map", "--input", path(&rec), "--output", path(&map), "--hop", "16", "--interp", "cubic:8"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let svg = dir.join("map.svg");
        assert!(itf(&["plot", "--input", path(&map), "--output", path(&svg)]).status.success());
        files.push(
            ["rec.csv", "rec.truth.csv", "map.csv", "map.svg"].map(|f| fs::read(dir.join(f)).unwrap()),
        );
    }
    assert!(files[0] == files[1]);
    let other = simulate(a.path(), "other.csv", "10");
    assert_ne!(fs::read(other).unwrap(), files[0][0]);
}

#[test]
fn outputs_carry_their_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let rec = simulate(dir.path(), "rec.csv", "1");
    let text = fs::read_to_string(&rec).unwrap();
    assert!(text.contains("# command=simulate"));
    assert!(text.contains("# seed=1"));
    assert!(text.contains("# hop=16"));
    let truth = fs::read_to_string(dir.path().join("rec.truth.csv")).unwrap();
    assert!(truth.contains("window_index,az_deg,el_deg,tau1_s,tau2_s"));
    assert!(truth.contains("# snr-db=20"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# experiment\nwindows = 12\nhop = 32\nseed = 3\ntrack = constant\naz = 10\nel = 60\n").unwrap();
    let out = dir.path().join("rec.raw");
    let o = itf(&["simulate", "--config", path(&conf), "--output", path(&out), "--hop", "8"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let truth = load_truth(&dir.path().join("rec.truth.csv")).unwrap();
    assert_eq!(truth.track.len(), 12);
    assert_eq!(truth.track.plan.hop, 8);
    assert!(truth.track.points.iter().all(|p| p.az_deg == 10.0 && p.el_deg == 60.0));
}

#[test]
fn short_record_names_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("short.csv");
    let x: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
    let r = SampleRecord::new([x.clone(), x.clone(), x], 4e-9).unwrap();
    save_record(&r, &rec, RecordFormat::Csv, &[]).unwrap();
    let o = itf(&["map", "--input", path(&rec), "--output", path(&dir.path().join("m.csv"))]);
    assert_eq!(o.status.code(), Some(6));
    assert!(stderr(&o).contains("window"), "{}", stderr(&o));
}

#[test]
fn plot_refuses_an_empty_map() {
    let dir = tempfile::tempdir().unwrap();
    let map = dir.path().join("empty.csv");
    fs::write(&map, "window_index,time_s,azimuth_deg,elevation_deg,peak_coeff,valid\n0,1e-6,,,0.3,false\n").unwrap();
    let o = itf(&["plot", "--input", path(&map), "--output", path(&dir.path().join("p.svg"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("no valid windows"), "{}", stderr(&o));
}

#[test]
fn overlong_delays_are_marked_invalid_without_nan() {
    let dir = tempfile::tempdir().unwrap();
    let n = 2000;
    let b: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
    let late = |k: usize| (0..n).map(|i| if i >= k { b[i - k] } else { 0.0 }).collect::<Vec<_>>();
    let r = SampleRecord::new([b.clone(), late(20), late(25)], 4e-9).unwrap();
    let rec = dir.path().join("far.csv");
    save_record(&r, &rec, RecordFormat::Csv, &[]).unwrap();
    let map = dir.path().join("map.csv");
    let o = itf(&["map", "--input", path(&rec), "--output", path(&map), "--hop", "64", "--filter", "none", "--cc", "cctd"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&map).unwrap();
    assert!(!text.to_ascii_lowercase().contains("nan"));
    let rows = read_map_csv(text.as_bytes()).unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| !r.is_valid() && r.angles.is_none()));
}

#[test]
fn exit_codes_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(itf(&["frobnicate"]).status.code(), Some(2));
    let out = dir.path().join("x.csv");
    assert_eq!(itf(&["simulate", "--output", path(&out), "--filter", "wt-haar-sure"]).status.code(), Some(3));
    assert_eq!(itf(&["simulate", "--output", path(&out), "--window", "1"]).status.code(), Some(3));
    assert_eq!(itf(&["simulate"]).status.code(), Some(3));
    assert_eq!(itf(&["map", "--input", path(&dir.path().join("nope.csv")), "--output", path(&out)]).status.code(), Some(4));
    assert_eq!(itf(&["simulate", "--config", path(&dir.path().join("nope.conf")), "--output", path(&out)]).status.code(), Some(4));
    let bad = dir.path().join("missing-dir").join("x.csv");
    assert_eq!(itf(&["simulate", "--windows", "4", "--output", path(&bad)]).status.code(), Some(5));
    let rec = simulate(dir.path(), "rec.csv", "2");
    fs::remove_file(dir.path().join("rec.truth.csv")).unwrap();
    let o = itf(&["bench", "--input", path(&rec), "--output", path(&dir.path().join("r.csv"))]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("ground truth"));
}

#[test]
fn full_bench_writes_csv_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let o = itf(&["simulate", "--output", path(&a), "--windows", "8", "--hop", "64", "--seed", "4", "--snr-db", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = dir.path().join("r.csv");
    let md = dir.path().join("r.md");
    let o = itf(&["bench", "--input", path(&a), "--output", path(&report), "--markdown", path(&md)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_report_csv(BufReader::new(fs::File::open(&report).unwrap())).unwrap();
    assert_eq!(rows.len(), 240);
    let table = fs::read_to_string(&md).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("| ")).count(), 11);
    assert!(table.contains("| WT-Sym4-SURE |"));
}
