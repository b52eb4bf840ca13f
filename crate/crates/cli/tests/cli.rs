use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn out_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("toa-lab-test-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toa-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(exp: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![exp, "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn column(dir: &Path, file: &str, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(dir.join(file)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().parse().unwrap())
        .collect()
}

fn config_path(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn nonpositive_dy_is_rejected_by_name() {
    let o = lab(&["clock-readout", "--validate-only", "--override", "dy=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`dy`"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let o = lab(&[
        "multi-trigger",
        "--validate-only",
        "--override",
        "colour=3",
        "--override",
        "n_max=0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("`colour`: unknown key"), "{err}");
    assert!(err.contains("`n_max`"), "{err}");
}

#[test]
fn delocalized_packet_warns() {
    let o = lab(&["clock-readout", "--validate-only", "--override", "x0=4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(
        stderr(&o).contains("not localized on the left"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn presets_pass_regime_checks() {
    for preset in ["inaccurate.conf", "accurate.conf"] {
        let o = lab(&[
            "clock-readout",
            "--validate-only",
            "--config",
            &config_path(preset),
        ]);
        assert_eq!(o.status.code(), Some(0), "{preset}: {}", stderr(&o));
        assert!(!stderr(&o).contains("warning"), "{preset}: {}", stderr(&o));
    }
    let o = lab(&[
        "two-peak",
        "--validate-only",
        "--config",
        &config_path("two-peak.json"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn early_readout_time_is_a_config_error() {
    let o = lab(&["clock-readout", "--validate-only", "--override", "t=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`t`"), "{}", stderr(&o));
}

#[test]
fn multi_trigger_column_is_exact() {
    let dir = out_dir("multi");
    let o = run_in("multi-trigger", &dir, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = column(&dir, "multi_trigger.csv", "flip_probability");
    assert_eq!(p.len(), 10);
    for (i, v) in p.iter().enumerate() {
        assert_eq!(*v, 1.0 - 0.5f64.powi(i as i32 + 1));
    }
    let m = manifest(&dir);
    assert_eq!(m["pass"], true);
    assert_eq!(m["config"]["n_max"], 10);
    assert!(m["timestamp_unix"].as_u64().unwrap() > 0);
}

#[test]
fn detection_sweep_reports_square_root_law() {
    let dir = out_dir("detection");
    let o = run_in("detection-sweep", &dir, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&dir);
    let slope = m["metrics"]["slope"].as_f64().unwrap();
    assert!((slope - 0.5).abs() < 0.05, "{slope}");
    let x = column(&dir, "detection.csv", "e_dy");
    let w = column(&dir, "detection.csv", "detection_weight");
    assert_eq!(x.len(), 25);
    assert!(w.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = out_dir("threads1");
    let b = out_dir("threads2");
    assert!(run_in("detection-sweep", &a, &["--threads", "1"])
        .status
        .success());
    assert!(run_in("detection-sweep", &b, &["--threads", "2"])
        .status
        .success());
    for f in ["detection.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn eigenstate_weights_fall_with_dy() {
    let dir = out_dir("eigen");
    assert!(run_in("eigenstate-trigger", &dir, &[]).status.success());
    let dy = column(&dir, "eigenstate_trigger.csv", "dy");
    let w = column(&dir, "eigenstate_trigger.csv", "detection_weight");
    assert!(dy.windows(2).all(|p| p[1] < p[0]));
    assert!(w.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn failed_check_exits_three_and_names_it() {
    let dir = out_dir("strict");
    let o = run_in("detection-sweep", &dir, &["--override", "slope_tol=1e-4"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("square_root_law"), "{}", stderr(&o));
    let m = manifest(&dir);
    assert_eq!(m["pass"], false);
    assert_eq!(m["overrides"][0], "slope_tol=1e-4");
}

#[test]
fn json_and_flat_configs_resolve_identically() {
    let dir = out_dir("formats");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("c.conf"), "# booster\nk = 1.5\nk_prime = 3\n").unwrap();
    std::fs::write(dir.join("c.json"), r#"{"k": 1.5, "k_prime": 3}"#).unwrap();
    let a = lab(&[
        "booster-curve",
        "--validate-only",
        "--config",
        dir.join("c.conf").to_str().unwrap(),
    ]);
    let b = lab(&[
        "booster-curve",
        "--validate-only",
        "--config",
        dir.join("c.json").to_str().unwrap(),
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    std::fs::write(dir.join("bad.json"), r#"{"k": true}"#).unwrap();
    let c = lab(&[
        "booster-curve",
        "--validate-only",
        "--config",
        dir.join("bad.json").to_str().unwrap(),
    ]);
    assert_eq!(c.status.code(), Some(2));
    assert!(stderr(&c).contains("`k`"));
}

#[test]
fn booster_curve_writes_fixed_columns() {
    let dir = out_dir("booster");
    let o = run_in("booster-curve", &dir, &["--override", "points=20"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.join("booster.csv")).unwrap();
    assert!(text.starts_with("k_in,j_rdown,j_lup,flux_error\n"));
    let m = manifest(&dir);
    // The slope comparison is reported without affecting the status.
    let slope = m["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "slope_vs_2_over_k")
        .unwrap();
    assert_eq!(slope["enforced"], false);
}
