use std::path::Path;
use std::process::{Command, Output};

fn memrc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memrc"))
        .args(args)
        .env_remove("MEMRC_DATA")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn states_writes_sixteen_rows_of_five_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("states.csv");
    let o = memrc(&["states", "--device", "0", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# memrc "));
    assert!(text.lines().next().unwrap().contains("seed=0"));
    let lines = data_lines(&out);
    assert_eq!(lines[0], "code,read1,read2,read3,read4");
    assert_eq!(lines.len(), 17);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert!(lines[16].starts_with("1111,"));
}

#[test]
fn outputs_are_bit_stable_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    for (p, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        assert!(memrc(&["--seed", seed, "states", "--device", "2", "--out", p.to_str().unwrap()]).status.success());
    }
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn bad_flag_is_usage_error() {
    let o = memrc(&["states", "--nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(memrc(&["timeseries", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(memrc(&[]).status.code(), Some(2));
}

#[test]
fn missing_dataset_exits_3_with_path() {
    let o = memrc(&["fsdd", "--data", "/no/such/recordings"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("/no/such/recordings"), "{}", stderr(&o));
    let o = memrc(&["fsdd"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("MEMRC_DATA"));
}

#[test]
fn energy_table_shows_reference_efficiency() {
    let dir = tempfile::tempdir().unwrap();
    let o = memrc(&["energy", "--task", "timeseries", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("3,057,553"), "{}", stdout(&o));
    let csv = data_lines(&dir.path().join("energy_timeseries.csv"));
    assert_eq!(csv[0], "component,energy_per_op_j,count,power_w,ops_per_w");
    let o = memrc(&["energy", "--task", "speech", "--out", dir.path().to_str().unwrap()]);
    assert!(stdout(&o).contains("181,818,181"), "{}", stdout(&o));
}

#[test]
fn timeseries_online_emits_trace_and_nrmse() {
    let dir = tempfile::tempdir().unwrap();
    let o = memrc(&[
        "timeseries",
        "--mode",
        "online",
        "--steps",
        "500",
        "--epochs",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let nrmse_line = stdout(&o).lines().find(|l| l.starts_with("NRMSE ")).unwrap().to_owned();
    let v: f64 = nrmse_line[6..].trim().parse().unwrap();
    assert!(v.is_finite() && v > 0.0);
    let trace = data_lines(&dir.path().join("prediction_trace.csv"));
    assert_eq!(trace[0], "k,y,y_hat");
    assert_eq!(trace.len(), 101);
    assert_eq!(data_lines(&dir.path().join("cumulative_error.csv")).len(), 401);
    let metrics = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
    assert!(metrics.contains("\"config_hash\""));
}

#[test]
fn sclcfit_reports_regions() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("iv.csv");
    let mut text = String::from("voltage,current,branch\n");
    for i in 0..40 {
        let v = 0.05 * (60f64).powf(i as f64 / 39.0);
        let hrs = if v < 0.5 { 1e-7 * v } else { 1e-7 * 0.5 * (v / 0.5f64).powi(2) };
        text += &format!("{v},{hrs},hrs\n{v},{},lrs\n", 1e-4 * v);
    }
    std::fs::write(&input, text).unwrap();
    let o = memrc(&["sclcfit", "--input", input.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("Sclc") && s.contains("Ohmic"), "{s}");
    let fits = data_lines(&dir.path().join("sclc_fits.csv"));
    assert_eq!(fits.len(), 4, "{fits:?}");
}

#[test]
fn selftest_passes() {
    let o = memrc(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn config_file_is_strict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"reservoir": {"speech": {"num_nodse": 8}}}"#).unwrap();
    let o = memrc(&["--config", cfg.to_str().unwrap(), "config"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("num_nodse"), "{}", stderr(&o));

    std::fs::write(&cfg, "").unwrap();
    let o = memrc(&["--config", cfg.to_str().unwrap(), "config"]);
    assert!(o.status.success());
    let defaults = memrc(&["config"]);
    assert_eq!(stdout(&o), stdout(&defaults));
}
