use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgesched"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios")).join(name)
}

fn stdout_of(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn run_motivating_prints_the_least_request_throughput() {
    let text = stdout_of(bin().arg("run").arg(scenario("motivating.json")));
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("scenario,seed,scheduler,nodes,jobs,bw_mean,avg_throughput,avg_wait_s,runtime_ms")
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "lr");
    assert_eq!(row[6], "2.000000");
    assert_eq!(row[8], "");
}

#[test]
fn flags_override_the_scenario() {
    let text = stdout_of(
        bin()
            .args(["run", "--scheduler", "otfs", "--seed", "5", "--k-paths", "2"])
            .arg(scenario("motivating.json")),
    );
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[1], row[2]), ("5", "otfs"));
}

#[test]
fn run_writes_metrics_log_and_plans_into_out() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--log-events", "--format", "json", "--out"])
        .arg(dir.path())
        .arg(scenario("diamond.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["scheduler"], "otfs");
    assert_eq!(metrics["records"].as_array().unwrap().len(), 5);
    let log = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    assert!(log.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
    let plans: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("plans.json")).unwrap()).unwrap();
    assert_eq!(plans.as_array().unwrap().len(), 5);
}

#[test]
fn timing_fills_the_runtime_column() {
    let text = stdout_of(bin().args(["run", "--timing"]).arg(scenario("motivating.json")));
    let runtime = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_string();
    assert!(runtime.parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn validate_accepts_bundled_documents() {
    for (file, kind) in [
        ("motivating.json", "scenario"),
        ("motivating_network.json", "network"),
        ("diamond_job.json", "job"),
        ("nodes_sweep.json", "sweep"),
    ] {
        let text = stdout_of(bin().arg("validate").arg(scenario(file)));
        assert_eq!(text.trim(), format!("ok {kind}"), "{file}");
    }
}

#[test]
fn validate_rejects_a_cycle() {
    let out = bin().arg("validate").arg(scenario("cyclic_job.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "CycleDetected");
}

#[test]
fn missing_file_reports_io_error() {
    let out = bin().args(["run", "/nonexistent/scenario.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert_eq!(err["error"], "Io");
}

#[test]
fn oracle_reports_each_job() {
    let text = stdout_of(bin().arg("oracle").arg(scenario("diamond.json")));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("job,flows,lp_bound,oracle_period,jrba_period,gap,note"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        let cols: Vec<&str> = r.split(',').collect();
        if cols[6] == "ok" {
            let lp: f64 = cols[2].parse().unwrap();
            let oracle: f64 = cols[3].parse().unwrap();
            let jrba: f64 = cols[4].parse().unwrap();
            assert!(lp <= oracle + 1e-6 && oracle <= jrba + 1e-6, "{r}");
        }
    }
}

#[test]
fn sweep_restricted_to_one_seed_and_scheduler() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = serde_json::json!({
        "name": "mini",
        "base": {
            "name": "mini",
            "seed": 1,
            "network": {"generate": {"nodes": 8, "avg_degree": 2.5, "bw_mean": 2.0, "bw_var": 0.5}},
            "jobs": {"generate": {"templates": [{"file": scenario("diamond_job.json").to_str().unwrap()}], "n_jobs": 4, "lambda": 1.0}}
        },
        "axis": "bw_mean",
        "values": [1.0, 4.0],
        "seeds": [1, 2, 3],
        "schedulers": ["lr", "otfs"]
    });
    let path = dir.path().join("sweep.json");
    std::fs::write(&path, sweep.to_string()).unwrap();
    let text = stdout_of(bin().args(["sweep", "--seed", "2", "--scheduler", "otfs"]).arg(&path));
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",2,otfs,")));
    assert!(rows[0].starts_with("mini/bw_mean=1"));
}

#[test]
fn oracle_with_out_dumps_each_program() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["oracle", "--out"]).arg(dir.path()).arg(scenario("diamond.json")).output().unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("oracle.csv").exists());
    let dump = std::fs::read_to_string(dir.path().join("diamond0.lp.txt")).unwrap();
    assert!(dump.lines().any(|l| l.trim_start().starts_with("min")));
    assert!(dump.contains("<="));
}
