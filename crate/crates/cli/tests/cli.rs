use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn outerspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_outerspace"))
        .args(args)
        .env_remove("OUTERSPACE_THREADS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn missing_seed_is_rejected() {
    let o = outerspace(&["--command", "energy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.seeds"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "run.command = energy\nrun.seeds = 1\ntraffic.mesages = 10\n").unwrap();
    let o = outerspace(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("traffic.mesages"), "{}", stderr(&o));
}

#[test]
fn out_of_range_flag_is_named() {
    let o = outerspace(&["--command", "lifetime-threshold", "--seed", "1", "--threshold", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lifetime.threshold"), "{}", stderr(&o));
}

#[test]
fn congestion_writes_per_seed_reports_heatmaps_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = outerspace(&[
        "--command", "congestion", "--seed", "1", "--seed", "2", "--nodes", "500",
        "--messages", "500", "--out", out, "--format", "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for seed in [1, 2] {
        let table = fs::read_to_string(dir.path().join(format!("congestion-seed-{seed}.csv"))).unwrap();
        let rows = data_lines(&table);
        assert_eq!(rows[0], "protocol,area,x,y,radius,traversing,messages,fraction");
        assert_eq!(rows.len(), 1 + 2 * 5);
        for p in ["geographic", "outer_space"] {
            let heat = fs::read_to_string(dir.path().join(format!("congestion-seed-{seed}-heatmap-{p}.csv"))).unwrap();
            let rows = data_lines(&heat);
            assert_eq!(rows[0], "row,col,count");
            assert_eq!(rows.len(), 1 + 30 * 30);
        }
        assert!(table.contains("# network.range = 0.1\n"));
        assert!(table.contains(&format!("# seed = {seed}\n")));
    }
    let agg = fs::read_to_string(dir.path().join("congestion-aggregate.csv")).unwrap();
    let central = data_lines(&agg)
        .into_iter()
        .find(|l| l.starts_with("geographic.fraction.0,"))
        .unwrap()
        .to_string();
    assert!(central.ends_with(",2"), "{central}");
}

fn run_json(dir: &Path, extra: &[&str]) -> String {
    let mut args = vec![
        "--command", "energy", "--seed", "3", "--seed", "4", "--nodes", "400", "--messages", "300",
        "--out", dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = outerspace(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::read_to_string(dir.join("energy-aggregate.json")).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let agg_a = run_json(a.path(), &[]);
    let agg_b = run_json(b.path(), &[]);
    let strip = |s: &str, dir: &Path| s.replace(dir.to_str().unwrap(), "OUT");
    assert_eq!(strip(&agg_a, a.path()), strip(&agg_b, b.path()));
    for seed in [3, 4] {
        let name = format!("energy-seed-{seed}.json");
        let x = fs::read_to_string(a.path().join(&name)).unwrap();
        let y = fs::read_to_string(b.path().join(&name)).unwrap();
        assert_eq!(strip(&x, a.path()), strip(&y, b.path()));
    }
}

#[test]
fn aggregate_embeds_resolved_config_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let doc: serde_json::Value = serde_json::from_str(&run_json(dir.path(), &[])).unwrap();
    assert_eq!(doc["seeds"], serde_json::json!([3, 4]));
    assert_eq!(doc["config"]["network.nodes"], "400");
    assert_eq!(doc["config"]["network.battery"], "500");
    assert_eq!(doc["config"]["lifetime.window"], "1000");
    let ratio = &doc["metrics"]["ratio"];
    assert_eq!(ratio["n"], 2);
    assert!(ratio["mean"].as_f64().unwrap() > 1.0);
}

#[test]
fn flag_overrides_config_file_and_logs_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "# energy pilot\nrun.command = energy\nrun.seeds = 3\nnetwork.nodes = 1000\ntraffic.messages = 300\n",
    )
    .unwrap();
    let o = outerspace(&["--config", cfg.to_str().unwrap(), "--nodes", "400"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("network.nodes"), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["config"]["network.nodes"], "400");
    assert_eq!(doc["reports"][0]["nodes"], 400);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = outerspace(&[
        "--command", "stretch", "--seed", "5", "--set", "stretch.samples=100000",
        "--set", "stretch.messages=200", "--nodes", "400", "--format", "csv",
    ]);
    assert!(first.status.success(), "{}", stderr(&first));
    let text = String::from_utf8(first.stdout).unwrap();
    let cfg: String = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = dir.path().join("echo.conf");
    fs::write(&path, cfg).unwrap();
    let second = outerspace(&["--config", path.to_str().unwrap()]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(text, String::from_utf8(second.stdout).unwrap());
}

#[test]
fn route_traces_and_reloaded_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = outerspace(&["--command", "generate", "--seed", "8", "--nodes", "300", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let net = dir.path().join("network-seed-8.json");
    assert!(net.is_file());

    let traces = dir.path().join("traces");
    let o = outerspace(&[
        "--command", "route", "--seed", "8", "--set", &format!("network.file={}", net.display()),
        "--messages", "40", "--out", traces.to_str().unwrap(), "--format", "csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(traces.join("route-seed-8.csv")).unwrap();
    let rows = data_lines(&csv);
    assert_eq!(rows[0], "msg_id,protocol,src,dst,status,hops,path");
    assert_eq!(rows.len(), 1 + 2 * 40);
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        let path: Vec<&str> = f[6].split(';').collect();
        assert_eq!(path[0], f[2]);
        assert_eq!(path.len() - 1, f[5].parse::<usize>().unwrap());
        assert_eq!(f[4] == "delivered", *path.last().unwrap() == f[3], "{row}");
    }
}

#[test]
fn lifetime_without_stop_reports_exhaustion() {
    let o = outerspace(&[
        "--command", "lifetime-threshold", "--seed", "1", "--nodes", "300", "--messages", "500",
        "--threshold", "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exhausted"), "{}", stderr(&o));
}

#[test]
fn bad_thread_cap_is_rejected() {
    let o = Command::new(env!("CARGO_BIN_EXE_outerspace"))
        .args(["--command", "energy", "--seed", "1"])
        .env("OUTERSPACE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("OUTERSPACE_THREADS"));
}

#[test]
fn validate_prints_pass_table() {
    let o = outerspace(&["--command", "validate", "--seed", "11"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}{}", stderr(&o));
    assert!(text.lines().filter(|l| l.trim_start().starts_with("PASS")).count() >= 8, "{text}");
    assert!(!text.contains("FAIL"));
}
