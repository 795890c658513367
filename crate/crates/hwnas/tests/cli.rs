use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hwnas::formats;
use hwnas::run::{HISTOGRAM, SEARCH_REPORT};
use hwnas_core::{SearchReport, SimDeviceConfig};

fn hwnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwnas")).args(args).output().unwrap()
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_device_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = hwnas(&["gen-device", "--template", "sim-edge", "--seed", "3", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn templates_carry_their_batch_sizes() {
    let dir = tempfile::tempdir().unwrap();
    for (template, batch) in [("sim-cpu", 1), ("sim-edge", 16), ("sim-gpu", 32)] {
        let out = dir.path().join(format!("{template}.json"));
        assert!(hwnas(&["gen-device", "--template", template, "--out", s(&out)]).status.success());
        let dev: SimDeviceConfig = formats::read(&out).unwrap();
        assert_eq!(dev.batch_size, batch, "{template}");
    }
}

#[test]
fn unknown_template_fails() {
    let o = hwnas(&["gen-device", "--template", "sim-tpu", "--out", "/dev/null"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("sim-tpu"));
}

#[test]
fn missing_device_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere.json");
    let o = hwnas(&["profile", "--device", s(&missing), "--out-dir", s(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains(s(&missing)));
    assert!(o.stdout.is_empty());
}

#[test]
fn noiseless_profile_has_zero_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let dev_path = dir.path().join("dev.json");
    assert!(hwnas(&["gen-device", "--template", "sim-cpu", "--out", s(&dev_path)]).status.success());
    let mut dev: SimDeviceConfig = formats::read(&dev_path).unwrap();
    dev.noise_stddev_ms = 0.0;
    formats::write(&dev_path, &dev).unwrap();
    let out = dir.path().join("p");
    let o = hwnas(&["profile", "--device", s(&dev_path), "--m", "20", "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p: hwnas_core::DeviceProfile = formats::read(&out.join("profile.json")).unwrap();
    assert!(p.calibration_rmse_ms.unwrap() < 1e-9);
    assert!((p.bias_ms - 19.0 * dev.boundary_overhead_ms).abs() < 1e-9);
}

#[test]
fn search_twice_gives_the_same_best() {
    let dir = tempfile::tempdir().unwrap();
    let mut bests = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = hwnas(&["search", "--config", s(&demo_config()), "--out-dir", s(&out), "--jobs", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r: SearchReport = formats::read(&out.join(SEARCH_REPORT)).unwrap();
        bests.push(r.best);
    }
    assert_eq!(bests[0], bests[1]);
}

#[test]
fn report_and_validate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = hwnas(&["pipeline", "--config", s(&demo_config()), "--out-dir", s(&run), "--seed", "11"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rep_dir = dir.path().join("rep");
    let report = run.join(SEARCH_REPORT);
    assert!(hwnas(&["report", "--report", s(&report), "--out-dir", s(&rep_dir)]).status.success());
    assert_eq!(fs::read(rep_dir.join(HISTOGRAM)).unwrap(), fs::read(run.join(HISTOGRAM)).unwrap());

    let r: SearchReport = formats::read(&report).unwrap();
    let mut rdr = csv::Reader::from_path(rep_dir.join(HISTOGRAM)).unwrap();
    let mut per_gen = vec![0u32; r.generations.len()];
    for row in rdr.records() {
        let row = row.unwrap();
        per_gen[row[0].parse::<usize>().unwrap()] += row[4].parse::<u32>().unwrap();
    }
    assert!(per_gen.iter().all(|&c| c as usize == r.config.population_size));

    let mut docs: Vec<String> = fs::read_dir(&run)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| p.to_string_lossy().into_owned())
        .collect();
    docs.sort();
    let mut args = vec!["validate"];
    args.extend(docs.iter().map(String::as_str));
    let o = hwnas(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_rejects_inconsistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(hwnas(&["search", "--config", s(&demo_config()), "--out-dir", s(&run)]).status.success());
    let path = run.join(SEARCH_REPORT);
    let mut r: SearchReport = formats::read(&path).unwrap();
    r.generations[3].histogram[0] += 1;
    formats::write(&path, &r).unwrap();
    let o = hwnas(&["validate", s(&path)]);
    assert!(!o.status.success());

    let junk = dir.path().join("junk.json");
    fs::write(&junk, r#"{"schema": "hwnas.nothing/v1", "data": 1}"#).unwrap();
    assert!(!hwnas(&["validate", s(&junk)]).status.success());
}
