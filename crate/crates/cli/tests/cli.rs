use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stbn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stbn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gen_is_reproducible_and_feeds_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.stbn");
    let b = path(dir.path(), "b.stbn");
    let args = |out: &str| {
        vec![
            "gen", "--size", "64x64x16", "--groups", "xy,z", "--sigma", "1.9", "--density", "0.10", "--seed", "42",
            "--output", out,
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()
    };
    let run = |out: &str| {
        let v = args(out);
        stbn(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let first = run(&a);
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stderr(&first)
        .lines()
        .any(|l| l.starts_with("progress phase=phase3 done=") && l.contains(" total=")));
    assert!(run(&b).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let prefix = path(dir.path(), "spec");
    let o = stbn(&["analyze", &a, "--dft", "xy", "--avg", "--output", &prefix]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(format!("{prefix}.csv")).unwrap();
    let ratio: f64 = csv
        .lines()
        .find_map(|l| l.strip_prefix("low_freq_ratio,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(ratio < 0.5, "{ratio}");
    let pgm = fs::read(format!("{prefix}.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n64 64\n65535\n"));
    assert_eq!(pgm.len(), 15 + 64 * 64 * 2);

    let points = path(dir.path(), "points.csv");
    let o = stbn(&["threshold", &a, "--t", "0.25", "--output", &points]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(&points).unwrap().lines().count() - 1;
    assert_eq!(rows, 16384);

    let temporal = path(dir.path(), "temporal");
    assert!(stbn(&["analyze", &a, "--temporal", "--output", &temporal]).status.success());
    assert_eq!(fs::read_to_string(format!("{temporal}.csv")).unwrap().lines().count(), 9);
}

#[test]
fn u8_payload_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "m.stbn");
    let o = stbn(&["gen", "--size", "64x64x16", "--payload", "u8", "--quiet", "--output", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).is_empty());
    assert_eq!(fs::metadata(&out).unwrap().len(), 70 + 65536);
}

#[test]
fn repeated_axis_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "bad.stbn");
    let o = stbn(&["gen", "--size", "16x16x4", "--groups", "xy,y", "--output", &out]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error: kind=invalid_spec message="), "{err}");
    assert!(!err.contains("progress"));
    assert!(!Path::new(&out).exists());
}

#[test]
fn usage_errors_and_help() {
    let o = stbn(&["gen", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: kind=usage message="));
    let o = stbn(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("gen"));
}

#[test]
fn truncated_container_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "m.stbn");
    assert!(stbn(&["gen", "--size", "8x8x4", "--quiet", "--output", &out]).status.success());
    let bytes = fs::read(&out).unwrap();
    fs::write(&out, &bytes[..bytes.len() - 10]).unwrap();
    let o = stbn(&["threshold", &out, "--t", "0.5", "--output", &path(dir.path(), "p.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: kind=truncated_payload"), "{}", stderr(&o));
    let o = stbn(&["threshold", &path(dir.path(), "missing"), "--t", "0.5", "--output", "x"]);
    assert!(stderr(&o).starts_with("error: kind=io"), "{}", stderr(&o));
}

#[test]
fn bench_and_apps_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = path(dir.path(), "bench.csv");
    let o = stbn(&[
        "bench", "--scheme", "ema", "--integrand", "smoothstep", "--frames", "20", "--noise", "white", "--size",
        "16x16x8", "--output", &report,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("frame,mae,rmse\n"));
    assert_eq!(csv.lines().count(), 21);

    let o = stbn(&["bench", "--integrand", "nope", "--noise", "white", "--size", "8x8x8", "--output", &report]);
    assert!(stderr(&o).starts_with("error: kind=unknown_integrand"));

    for (cmd, extra) in [("dither", vec!["--bits", "2"]), ("alpha", vec!["--alpha", "0.9"]), ("volume", vec!["--reference-samples", "16"])] {
        let prefix = path(dir.path(), cmd);
        let mut args = vec![cmd, "--noise", "stack", "--size", "16x16x4", "--frames", "4", "--output", &prefix];
        args.extend(extra);
        let o = stbn(&args);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert_eq!(fs::read_to_string(format!("{prefix}.csv")).unwrap().lines().count(), 5);
        assert!(fs::read(format!("{prefix}.pgm")).unwrap().starts_with(b"P5\n16 16\n255\n"));
    }
}

#[test]
fn threads_flag_and_paper_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.stbn");
    let b = path(dir.path(), "b.stbn");
    let common = ["gen", "--size", "16x16x4", "--quiet", "--paper-fidelity"];
    let mut args: Vec<&str> = common.to_vec();
    args.extend(["--output", &a, "--threads", "1"]);
    assert!(stbn(&args).status.success());
    let mut args: Vec<&str> = common.to_vec();
    args.extend(["--output", &b, "--threads", "3"]);
    assert!(stbn(&args).status.success());
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    assert_eq!(bytes[7], 0b11);
}
