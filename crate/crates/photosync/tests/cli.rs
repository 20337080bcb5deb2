use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use photosync::manifest::RunManifest;

fn photosync(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photosync"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("PHOTOSYNC_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = photosync(&["simulate", "--seed", "9", "--duration", "0.05"], d);
        assert_eq!(code(&o), 0, "{o:?}");
    }
    for f in ["tags.ptag", "events.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let ma = RunManifest::read(&a.join("manifest.json")).unwrap();
    let mb = RunManifest::read(&b.join("manifest.json")).unwrap();
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(
        ma.outputs.iter().map(|o| &o.sha256).collect::<Vec<_>>(),
        mb.outputs.iter().map(|o| &o.sha256).collect::<Vec<_>>()
    );
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    photosync(&["simulate", "--seed", "1", "--duration", "0.02"], &a);
    photosync(&["simulate", "--seed", "2", "--duration", "0.02"], &b);
    assert_ne!(
        fs::read(a.join("tags.ptag")).unwrap(),
        fs::read(b.join("tags.ptag")).unwrap()
    );
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = photosync(&["simulate", "--duration", "0"], dir.path());
    assert_eq!(code(&o), 1);
    let o = photosync(&["model", "--sweep", "r2=1:2:3"], dir.path());
    assert_eq!(code(&o), 1);
    let o = photosync(&["frobnicate"], dir.path());
    assert_eq!(code(&o), 1);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "memory.eta0 = 0.3\nmemory.nonsense = 1\n").unwrap();
    let o = photosync(&["model", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = photosync(&["analyze", "/nonexistent/tags.ptag"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn model_csv_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let o = photosync(&["model", "--sweep", "r1=50000:440000:4"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("model.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r1_cps,r2_cps,r_stoc,r_sync,zeta,r_trig2,r_sync_trials,downtime,g2_h,p_trig1,eta_bar,status"
    );
    assert_eq!(lines.count(), 4);
    assert!(csv.contains("\n50000,48500,1.455,"));
}

#[test]
fn empty_tag_file_gives_zero_count_report() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("empty.csv");
    fs::write(&tags, "").unwrap();
    let o = photosync(
        &["analyze", tags.to_str().unwrap()],
        &dir.path().join("out"),
    );
    assert_eq!(code(&o), 0, "{o:?}");
    let metrics = fs::read_to_string(dir.path().join("out/metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,value,stderr,n\n"));
    for ch in ["idler1", "idler2", "sig_a", "sig_b"] {
        let row = metrics
            .lines()
            .find(|l| l.starts_with(&format!("singles_{ch},")))
            .unwrap();
        assert!(
            row.starts_with(&format!("singles_{ch},0,")) && row.ends_with(",0"),
            "{row}"
        );
    }
}

#[test]
fn malformed_tag_file_reports_byte_offset() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    photosync(&["simulate", "--duration", "0.01"], &sim);
    let mut bytes = fs::read(sim.join("tags.ptag")).unwrap();
    bytes.truncate(bytes.len() - 4);
    // The last record now starts 5 bytes before the end.
    let offset = bytes.len() - 5;
    let bad = dir.path().join("bad.ptag");
    fs::write(&bad, bytes).unwrap();
    let o = photosync(&["analyze", bad.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(&format!("byte {offset}:")), "{err}");
}

#[test]
fn one_point_reproduce_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = photosync(
        &[
            "reproduce",
            "--sweep",
            "r1=50000:50000:1",
            "--duration",
            "0.5",
            "--aux-duration",
            "0.2",
        ],
        dir.path(),
    );
    assert!(matches!(code(&o), 0 | 3), "{o:?}");
    let csv = fs::read_to_string(dir.path().join("reproduce.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("50000,"));
    let checks = fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(checks.starts_with("check,value,stderr,reference,tolerance,pass,note\n"));
    assert!(RunManifest::read(&dir.path().join("manifest.json"))
        .unwrap()
        .is_consistent());
}

#[test]
fn hundredfold_memory_noise_fails_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("noisy.cfg");
    fs::write(&cfg, "memory.nu = 0.0017\n").unwrap();
    let o = photosync(
        &[
            "reproduce",
            "--config",
            cfg.to_str().unwrap(),
            "--sweep",
            "r1=50000:50000:1",
            "--duration",
            "0.2",
            "--aux-duration",
            "0.2",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3, "{o:?}");
    let failed = stdout(&o)
        .lines()
        .find(|l| l.starts_with("failed:"))
        .unwrap()
        .to_owned();
    assert!(failed.contains("model_g2_noise_negligible"), "{failed}");
    assert!(failed.contains("model_snr"), "{failed}");
}
