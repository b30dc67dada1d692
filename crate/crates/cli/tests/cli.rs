use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nrmimo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nrmimo"))
        .args(args)
        .env_remove("NRMIMO_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn out_dir_args(dir: &Path) -> Vec<String> {
    vec!["--out-dir".into(), dir.display().to_string()]
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<String> = out_dir_args(dir);
    all.extend(args.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = all.iter().map(String::as_str).collect();
    nrmimo(&refs)
}

#[test]
fn help_lists_flags_with_defaults() {
    let out = nrmimo(&["--help"]);
    assert!(out.status.success());
    let help = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--distance-m",
        "--ri-scheme",
        "--fixed-ri",
        "--threshold1-db",
        "--threshold2-db",
        "--rng-run",
        "--scenario",
        "--mcs-table",
        "--rho",
        "--duration-s",
        "--out-dir",
        "--distances",
        "--rng-runs",
    ] {
        assert!(help.contains(flag), "missing {flag}");
    }
    for default in ["[default: 10]", "[default: 7]", "[default: 12]", "[default: adaptive]"] {
        assert!(help.contains(default), "missing {default}");
    }
}

#[test]
fn single_run_writes_summary_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--duration-s", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("Throughput:"));
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert_eq!(summary, stdout);
    for field in ["TX bytes", "RX bytes", "Throughput", "Mean jitter", "Mean delay"] {
        assert!(summary.contains(field));
    }
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "distance_m,rng_run,thr_mbps,delay_ms,jitter_ms,tx_bytes,rx_bytes,mean_ri"
    );
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("10,1,"));
}

#[test]
fn sweep_rows_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "--duration-s",
        "0.1",
        "--distances",
        "10,200,400",
        "--rng-runs",
        "1-4",
        "--ri-scheme",
        "fixed",
        "--fixed-ri",
        "2",
    ];
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    let csv_a = fs::read(a.path().join("results.csv")).unwrap();
    let csv_b = fs::read(b.path().join("results.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 12 + 3);
    assert_eq!(rows.iter().filter(|r| r.contains(",mean,")).count(), 3);
    assert!(rows[0].starts_with("10,1,"));
    assert!(rows[11].starts_with("400,4,"));
    assert!(!text.contains(';'));
}

#[test]
fn contradictory_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--ri-scheme", "adaptive", "--fixed-ri", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("--fixed-ri") && err.contains("--ri-scheme"));
    assert!(err.contains("Usage"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["--no-such-flag"][..],
        &["--fixed-ri", "3"],
        &["--rho", "1.5"],
        &["--mcs-table", "1"],
        &["--ri-scheme", "sometimes"],
    ] {
        let out = run_in(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_out_dir_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run_in(&blocker.join("sub"), &["--duration-s", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn env_var_sets_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nrmimo"))
        .args(["--duration-s", "0.01"])
        .env("NRMIMO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("results.csv").exists());
}

#[test]
fn config_file_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.conf");
    fs::write(
        &cfg,
        "# short run\ndistance_m = 150\nri_scheme = fixed\nfixed_ri = 2\nsim_duration_s = 0.05\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--rng-run", "3", "--traces"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("150,3,"));
    let mac = fs::read_to_string(dir.path().join("mac_trace.csv")).unwrap();
    assert!(mac.starts_with("slot,rnti,harq_pid,stream,ndi,rv,mcs,tbs_bytes,outcome"));
    assert!(mac.lines().skip(1).any(|l| l.split(',').nth(3) == Some("1")));
    let phy = fs::read_to_string(dir.path().join("phy_trace.csv")).unwrap();
    assert!(phy.starts_with("slot,rnti,stream,sinr_db,cqi,ri,ack"));
    let ch = fs::read_to_string(dir.path().join("channel_trace.csv")).unwrap();
    assert_eq!(ch.lines().nth(1).unwrap().split(',').nth(1), Some("0-1"));
}
