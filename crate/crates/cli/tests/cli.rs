use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use uamn_cli::instance::InstanceFile;

const SMALL: &str = r#"
schema_version = 1
battery_boost = 100.0
channel_types = ["standard"]

[[nodes]]
name = "a"
airport_capacity = 100.0
infrastructure_cost = 50.0
capacity_unit_cost = 1.0

[[nodes]]
name = "b"
airport_capacity = 100.0
infrastructure_cost = 50.0
capacity_unit_cost = 1.0

[[nodes]]
name = "hub"
airport_capacity = 100.0
infrastructure_cost = 20.0
capacity_unit_cost = 1.0

[[od_pairs]]
name = "a-b"
origin = "a"
destination = "b"
upper = 30.0

[[arcs]]
tail = "a"
head = "b"
energy = 10.0
transport_cost = 6.0
channels = [{ capacity = 50.0, cost = 40.0 }]

[[arcs]]
tail = "a"
head = "hub"
energy = 5.0
transport_cost = 2.0
channels = [{ capacity = 50.0, cost = 10.0 }]

[[arcs]]
tail = "hub"
head = "b"
energy = 5.0
transport_cost = 2.0
channels = [{ capacity = 50.0, cost = 10.0 }]

[demand]
labels = ["d1", "d2", "d3"]
samples = { "a-b" = [10.0, 12.0, 20.0] }
"#;

fn write_instance(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("net.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn uamn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uamn"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn error_json(out: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("error.json")).unwrap()).unwrap()
}

#[test]
fn instance_round_trips_through_toml() {
    let file = InstanceFile::from_toml(SMALL).unwrap();
    let again = InstanceFile::from_toml(&file.to_toml()).unwrap();
    assert_eq!(file, again);
    let (a, b) = (file.build(None, None).unwrap(), again.build(None, None).unwrap());
    assert_eq!(a.spec, b.spec);
    assert_eq!(a.demand, b.demand);
}

#[test]
fn solve_writes_tables_of_the_right_shape() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap(), "--theta", "1", "--beta", "3"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("worst_case.csv")).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, ["pair", "d1", "d2", "d3"]);
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "a-b");

    let mut d = csv::Reader::from_path(out.join("design.csv")).unwrap();
    let header: Vec<String> = d.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, ["kind", "tail", "head", "channel_type", "count"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["objective"].as_f64().unwrap().is_finite());
    assert!(report.get("elapsed_ms").is_none());
}

#[test]
fn identical_inputs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    for out in [&o1, &o2] {
        assert!(uamn(&["solve", "--network", net.to_str().unwrap()], out).status.success());
    }
    for name in ["report.json", "worst_case.csv", "design.csv", "flows.csv"] {
        assert_eq!(
            std::fs::read(o1.join(name)).unwrap(),
            std::fs::read(o2.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn sequential_flag_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    assert!(uamn(&["solve", "--network", net.to_str().unwrap()], &o1).status.success());
    assert!(uamn(&["solve", "--network", net.to_str().unwrap(), "--sequential"], &o2).status.success());
    assert_eq!(
        std::fs::read(o1.join("worst_case.csv")).unwrap(),
        std::fs::read(o2.join("worst_case.csv")).unwrap()
    );
}

#[test]
fn parse_error_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), "schema_version = 1\nnodes = [");
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_json(&out)["kind"], "parse");
}

#[test]
fn missing_file_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", dir.path().join("nope.toml").to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sample_above_upper_bound_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), &SMALL.replace("20.0] }", "45.0] }"));
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(4));
    let err = error_json(&out);
    assert!(err["message"].as_str().unwrap().contains("outside bounds"), "{err}");
}

#[test]
fn empty_history_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(r#"labels = ["d1", "d2", "d3"]"#, "").replace("[10.0, 12.0, 20.0]", "[]");
    let net = write_instance(dir.path(), &text);
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(error_json(&out).to_string().contains("N ≥ 1 required"));
}

#[test]
fn lattice_cap_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap(), "--lattice-cap", "1"], &out);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_json(&out)["kind"], "lattice-cap");
}

#[test]
fn insufficient_capacity_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), &SMALL.replace("capacity = 50.0", "capacity = 5.0"));
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&out)["kind"], "infeasible");
}

#[test]
fn worst_case_command_scores_a_saved_design() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let (o1, o2) = (dir.path().join("o1"), dir.path().join("o2"));
    assert!(uamn(&["solve", "--network", net.to_str().unwrap()], &o1).status.success());
    let design = o1.join("design.csv");
    let o = uamn(
        &["worst-case", "--network", net.to_str().unwrap(), "--design", design.to_str().unwrap()],
        &o2,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let read = |p: &Path| -> serde_json::Value { serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap() };
    let (a, b) = (read(&o1.join("report.json")), read(&o2.join("report.json")));
    assert_eq!(a["objective"], b["objective"]);
}

#[test]
fn check_command_agrees_with_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = uamn(&["check", "--network", net.to_str().unwrap(), "--random", "10"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let rows = csv::Reader::from_path(out.join("check.csv")).unwrap().records().count();
    assert_eq!(rows, 11);
}

#[test]
fn theta_sweep_has_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_instance(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = uamn(&["solve", "--network", net.to_str().unwrap(), "--sweep", "theta=0,1,2"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv::Reader::from_path(out.join("sweep.csv")).unwrap().records().count();
    assert_eq!(rows, 3);
}
