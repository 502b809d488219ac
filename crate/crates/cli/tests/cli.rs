use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gridlink::cli_io::{
    read_csv, EvPlanCsvRow, FleetDocument, RegionCostCsvRow, RegionDemandCsvRow, TraceCsvRow, DEMO_MANIFEST,
};
use gridlink::coordinator::ScenarioReport;
use gridlink::power_grid::GridCase;
use gridlink::transport_graph::NetworkDocument;

fn gridlink(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridlink")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_manifest(dir: &Path, scenarios: &str, grid: &str) -> std::path::PathBuf {
    let text = format!(
        r#"{{
  "seed": 7,
  "network": {{ "synthetic": {{ "n_nodes": 30, "n_roads": 50, "n_stations": 12, "n_regions": 6, "side_m": 30000.0 }} }},
  "grid": {grid},
  "fleet": {{ "generate": {{ "n_evs": 60 }} }},
  "scenarios": {scenarios}
}}"#
    );
    let p = dir.join("manifest.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn demo_run_writes_every_report_file() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gridlink(&["run", "--demo", "--out", "demo"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("demo");
    assert_eq!(fs::read_to_string(out.join("manifest.json")).unwrap(), DEMO_MANIFEST);
    for tag in ["I", "II"] {
        let r: ScenarioReport =
            serde_json::from_str(&fs::read_to_string(out.join(format!("report_{tag}.json"))).unwrap()).unwrap();
        assert_eq!(r.evs.len(), 500);
        let demand: Vec<RegionDemandCsvRow> = read_csv(&out.join(format!("region_demand_{tag}.csv"))).unwrap();
        assert_eq!(demand.len(), 6);
        let kwh: f64 = demand.iter().map(|d| d.total_kwh).sum();
        assert!((kwh - r.total_charging_kwh).abs() < 1e-9);
        let cost: Vec<RegionCostCsvRow> = read_csv(&out.join(format!("region_cost_{tag}.csv"))).unwrap();
        assert_eq!(cost.len(), 6);
        let trace: Vec<TraceCsvRow> = read_csv(&out.join(format!("trace_{tag}.csv"))).unwrap();
        assert_eq!(trace.len(), r.iterations);
        let plans: Vec<EvPlanCsvRow> = read_csv(&out.join(format!("ev_plans_{tag}.csv"))).unwrap();
        assert_eq!(plans.len(), 500);
        // the JSON report re-serializes to exactly what was written
        assert_eq!(
            serde_json::to_string_pretty(&r).unwrap(),
            fs::read_to_string(out.join(format!("report_{tag}.json"))).unwrap()
        );
    }
    assert!(out.join("comparison.csv").exists());
    NetworkDocument::parse(&fs::read_to_string(out.join("network.json")).unwrap()).unwrap();
    let fleet = FleetDocument::parse(&fs::read_to_string(out.join("fleet.json")).unwrap()).unwrap();
    assert_eq!(fleet.evs.len(), 500);
    assert!(stdout(&o).contains("total_charging_cost"));
}

#[test]
fn single_scenario_has_no_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let m = small_manifest(tmp.path(), r#"["I"]"#, r#"{ "builtin": "ieee9" }"#);
    let o = gridlink(&["run", m.to_str().unwrap(), "--out", "o", "--format", "machine"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 1);
    assert!(v["comparison"].is_null());
    let out = tmp.path().join("o");
    assert!(out.join("report_I.json").exists());
    assert!(!out.join("report_II.json").exists());
    assert!(!out.join("comparison.json").exists());
}

#[test]
fn missing_grid_file_is_a_parse_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let m = small_manifest(tmp.path(), r#"["I", "II"]"#, r#"{ "file": "absent.json" }"#);
    let o = gridlink(&["run", m.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn infeasible_grid_gets_its_own_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut case = GridCase::bundled_ieee9();
    for g in &mut case.generators {
        g.pmax = 200.0;
    }
    fs::write(tmp.path().join("grid.json"), case.to_json()).unwrap();
    let m = small_manifest(tmp.path(), r#"["I"]"#, r#"{ "file": "grid.json" }"#);
    let o = gridlink(&["run", m.to_str().unwrap(), "--out", "o"], tmp.path());
    assert_eq!(o.status.code(), Some(5));
    let o = gridlink(&["opf", "--grid", "grid.json"], tmp.path());
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn opf_on_bundled_case() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gridlink(&["opf", "--format", "machine"], tmp.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lmp"].as_array().unwrap().len(), 9);
    assert_eq!(v["dispatch"].as_array().unwrap().len(), 3);
    assert!(v["total_cost"].as_f64().unwrap() > 0.0);
    let pretty = stdout(&gridlink(&["opf"], tmp.path()));
    assert!(pretty.starts_with("objective"));
}

#[test]
fn opf_rejects_inverted_generator_limits() {
    let tmp = tempfile::tempdir().unwrap();
    // edit the JSON directly, since a GridCase value would be validated on load
    let text = GridCase::bundled_ieee9().to_json().replacen("\"pmin\": 10.0", "\"pmin\": 300.0", 1);
    assert_ne!(text, GridCase::bundled_ieee9().to_json());
    fs::write(tmp.path().join("bad.json"), text).unwrap();
    let o = gridlink(&["opf", "--grid", "bad.json"], tmp.path());
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn network_fleet_and_route_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let o = gridlink(
        &[
            "gen-network",
            "--nodes",
            "25",
            "--roads",
            "40",
            "--stations",
            "6",
            "--regions",
            "6",
            "--side-m",
            "30000",
            "--seed",
            "4",
            "--out",
            "net.json",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["a.json", "b.json"] {
        let o = gridlink(&["gen-fleet", "--network", "net.json", "--n", "40", "--seed", "9", "--out", name], d);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(d.join("a.json")).unwrap(), fs::read(d.join("b.json")).unwrap());
    let o = gridlink(&["gen-fleet", "--network", "net.json", "--n", "0", "--out", "empty.json"], d);
    assert!(o.status.success());
    assert!(FleetDocument::parse(&fs::read_to_string(d.join("empty.json")).unwrap()).unwrap().evs.is_empty());
    let o =
        gridlink(&["gen-fleet", "--network", "net.json", "--n", "5", "--mix", "0.5,0.5,0.5,0", "--out", "x.json"], d);
    assert_eq!(o.status.code(), Some(4));

    let o = gridlink(
        &[
            "route",
            "--network",
            "net.json",
            "--origin",
            "0",
            "--destination",
            "9",
            "--class",
            "PHEV20",
            "--soc",
            "0.3",
            "--format",
            "machine",
        ],
        d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(plan.get("options").is_some());
    let o = gridlink(
        &["route", "--network", "net.json", "--origin", "3", "--destination", "3", "--class", "BEV100", "--soc", "0.5"],
        d,
    );
    assert_eq!(o.status.code(), Some(4));
}
