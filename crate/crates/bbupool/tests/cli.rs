use std::fs;
use std::process::{Command, Output};

fn bbupool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbupool"))
        .args(args)
        .output()
        .expect("spawn bbupool")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_reference_point() {
    let o = bbupool(&["analyze", "--lambda", "10,10", "--servers", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("stable=true"), "{text}");
    // Six significant digits of the chain model at this point.
    assert_eq!(text.matches("p99(t2)=4.70448").count(), 2, "{text}");
}

#[test]
fn analyze_idle_pool_has_zero_queuing() {
    let o = bbupool(&[
        "analyze",
        "--lambda",
        "0,0",
        "--servers",
        "2",
        "--zeta",
        "0.9",
        "--zeta",
        "0.999",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("p90(t2)=0 "), "{text}");
    assert!(text.contains("p99.9(t2)=0 "), "{text}");
    assert!(!text.contains("-0"), "{text}");
}

#[test]
fn analyze_unstable_pool_is_reported_not_fatal() {
    let o = bbupool(&["analyze", "--lambda", "10,10", "--servers", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("stable=false"));
}

#[test]
fn analyze_json_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let cdf = dir.path().join("cdf.csv");
    let chain = dir.path().join("chain");
    let o = bbupool(&[
        "analyze",
        "--lambda",
        "4",
        "--num-rrh",
        "2",
        "--servers",
        "8",
        "--format",
        "json",
        "--cdf-out",
        cdf.to_str().unwrap(),
        "--cdf-points",
        "11",
        "--dump-chain",
        chain.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["servers"], 8);
    assert_eq!(v["rrhs"].as_array().unwrap().len(), 2);
    let cdf_text = fs::read_to_string(&cdf).unwrap();
    // Header plus one row per point and RRH.
    assert_eq!(cdf_text.lines().count(), 1 + 11 * 2);
    assert!(chain.join("rrh0_matrix.csv").exists());
    assert!(chain.join("rrh1_stationary.csv").exists());
}

#[test]
fn malformed_key_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(
        &path,
        "# reference setup\nlambda = 10,10\nframe_durration = 10\n",
    )
    .unwrap();
    let o = bbupool(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("frame_durration"), "{err}");
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bbupool(&["analyze", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        bbupool(&["analyze", "--lambda", "1", "--zeta", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(bbupool(&["analyze"]).status.code(), Some(1));
    assert_eq!(bbupool(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first = bbupool(&[
        "config",
        "--lambda",
        "7.3,2.1",
        "--frame-duration",
        "5",
        "--service-rate",
        "0.3",
    ]);
    assert!(first.status.success(), "{}", stderr(&first));
    let path = dir.path().join("dumped.cfg");
    fs::write(&path, &first.stdout).unwrap();
    let second = bbupool(&["config", "--config", path.to_str().unwrap()]);
    assert_eq!(stdout(&first), stdout(&second));

    let a = bbupool(&[
        "analyze",
        "--lambda",
        "7.3,2.1",
        "--frame-duration",
        "5",
        "--service-rate",
        "0.3",
        "--format",
        "json",
    ]);
    let b = bbupool(&[
        "analyze",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.cfg");
    fs::write(&path, "lambda = 1,1\nmax_concurrent = 25\n").unwrap();
    let o = bbupool(&[
        "config",
        "--config",
        path.to_str().unwrap(),
        "--max-concurrent",
        "9",
    ]);
    let text = stdout(&o);
    assert!(text.contains("max_concurrent = 9"), "{text}");
    assert!(text.contains("lambda = 1.0, 1.0"), "{text}");
}

#[test]
fn simulate_is_deterministic() {
    let args = [
        "simulate",
        "--lambda",
        "10,10",
        "--servers",
        "20",
        "--frames",
        "20000",
        "--seed",
        "7",
    ];
    let a = bbupool(&args);
    let b = bbupool(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(v["percentiles"][0]["t2"].as_f64().unwrap() > 0.0);

    let c = bbupool(&[
        "simulate",
        "--lambda",
        "10,10",
        "--servers",
        "20",
        "--frames",
        "20000",
        "--seed",
        "8",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn simulate_idle_and_raw_output() {
    let o = bbupool(&["simulate", "--lambda", "0,0", "--frames", "1000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["transfers_completed"], 0);

    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.csv");
    let o = bbupool(&[
        "simulate",
        "--policy",
        "st",
        "--lambda",
        "1,2",
        "--frames",
        "500",
        "--raw-out",
        raw.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let text = fs::read_to_string(&raw).unwrap();
    assert_eq!(text.lines().next().unwrap(), "transfer_id,rrh,t1,t2,t3");
    // Warm-up arrivals are left out, as in the delay statistics.
    assert_eq!(
        text.lines().count() as u64 - 1,
        v["t2_samples"].as_u64().unwrap()
    );
}

#[test]
fn sweep_servers_rows_in_order() {
    let o = bbupool(&[
        "sweep-servers",
        "--curves",
        "5,10",
        "--servers",
        "9:12",
        "--zeta",
        "0.99",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "servers,lambda,zeta,percentile_t2,status"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r[1], r[0])).collect();
    assert_eq!(
        keys[..4],
        [("5.0", "9"), ("5.0", "10"), ("5.0", "11"), ("5.0", "12")]
    );
    // c <= total load has no stationary regime: empty value, sweep continues.
    assert_eq!(rows[4][4], "unstable");
    assert_eq!(rows[5][4], "unstable");
    assert_eq!(rows[5][3], "");
    assert_eq!(rows[6][4], "ok");

    let again = bbupool(&[
        "sweep-servers",
        "--curves",
        "5,10",
        "--servers",
        "9:12",
        "--zeta",
        "0.99",
    ]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn sweep_savings_respects_bound() {
    let o = bbupool(&[
        "sweep-savings",
        "--rho",
        "0.2:0.4:0.2",
        "--tau",
        "1",
        "--tau",
        "10",
        "--zeta",
        "0.99",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!rows.is_empty());
    for r in &rows {
        if let Some(s) = r["savings"].as_f64() {
            assert!(s <= r["upper_bound"].as_f64().unwrap() + 1e-9, "{r}");
        }
    }
    let lt = |tau: f64| {
        rows.iter()
            .find(|r| r["policy"] == "long_term" && r["rho_bbu"] == 0.2 && r["tau"] == tau)
            .and_then(|r| r["savings"].as_f64())
            .unwrap()
    };
    assert!(lt(10.0) >= lt(1.0));
}
