use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fastgabor::io::{read_bank_container, read_sdft_container};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fastgabor"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.gbnk");
    let o = run(&["bank", "--input", "/no/such/image.pgm", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/image.pgm"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["bank", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn box_smoother_is_refused_for_banks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.gbnk");
    let input = fixture("coins64.pgm");
    let o = run(&[
        "bank", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap(), "--smoother", "box",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("box"));
}

#[test]
fn default_bank_writes_forty_entries_and_magnitudes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bank.gbnk");
    let mags = dir.path().join("mags");
    let input = fixture("camera64.pgm");
    let o = run(&[
        "bank",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--magnitudes",
        mags.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let entries = read_bank_container(&out).unwrap();
    assert_eq!(entries.len(), 40);
    assert!(entries.iter().all(|(_, img)| img.dims() == (64, 64)));
    assert!(mags.join("f0_o0.pgm").exists());
    assert!(mags.join("f4_o7.pgm").exists());
}

#[test]
fn single_orientation_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one.gbnk");
    let input = fixture("grass64.pgm");
    let o = run(&[
        "bank",
        "--input",
        input.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--frequencies",
        "0.5,1.0",
        "--orientations",
        "1",
        "--sigma",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let entries = read_bank_container(&out).unwrap();
    assert_eq!(entries.len(), 2);
    assert!(entries.iter().all(|(p, _)| p.theta() == 0.0 && p.sigma() == 3.0));
}

#[test]
fn sdft_writes_every_bin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.gbnk");
    let input = fixture("brick64.pgm");
    let o = run(&[
        "sdft", "--input", input.to_str().unwrap(), "--output", out.to_str().unwrap(), "--window", "4x8",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_sdft_container(&out).unwrap().len(), 32);
}

#[test]
fn compare_reports_a_near_exact_control() {
    let input = fixture("moon64.pgm");
    let o = run(&["compare", "--input", input.to_str().unwrap(), "--sweep", "freq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("omega,wavelength,theta_deg,sigma,ser_real_db,ser_imag_db,"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 11);
    for r in &rows {
        let imag: f64 = r[5].parse().unwrap();
        assert!(imag >= 20.0, "{r:?}");
        for col in [6, 7] {
            let control = &r[col];
            assert!(control == "inf" || control.parse::<f64>().unwrap() >= 100.0, "{r:?}");
        }
        assert_eq!(&r[8], "moon64");
    }
}

#[test]
fn bench_report_passes_the_checker() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.csv");
    let o = run(&[
        "bench",
        "--output",
        report.to_str().unwrap(),
        "--size",
        "64",
        "--orientations",
        "4,8,12",
        "--runs",
        "5",
        "--sdft-size",
        "32",
        "--windows",
        "4",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["check-report", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("rows=4"), "{text}");
    assert!(text.contains("reuse R_M slope="), "{text}");
}

#[test]
fn checker_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("junk.csv");
    std::fs::write(&report, "not,a,report\n1,2,3\n").unwrap();
    let o = run(&["check-report", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
