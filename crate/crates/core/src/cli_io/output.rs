use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{write_file, CliError, FleetDocument, Inputs};
use crate::coordinator::{Comparison, EvStatus, ScenarioReport};
use crate::powertrain::PowertrainClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDemandCsvRow {
    pub region: u32,
    pub bus: usize,
    pub admitted: usize,
    pub rejected: usize,
    pub total_kwh: f64,
    pub load_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCostCsvRow {
    pub region: u32,
    pub bus: usize,
    pub lmp: f64,
    pub charging_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub iteration: usize,
    pub grid_cost: f64,
    pub total_kwh: f64,
    pub charging_cost: f64,
    pub min_lmp: f64,
    pub max_lmp: f64,
    pub max_lmp_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvPlanCsvRow {
    pub ev_id: usize,
    pub class: PowertrainClass,
    pub status: EvStatus,
    pub station_id: Option<usize>,
    pub region: Option<u32>,
    pub charge_kwh: f64,
    pub charge_price: f64,
    pub trip_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCsvRow {
    pub metric: String,
    pub scenario_i: f64,
    pub scenario_ii: f64,
    pub reduction_percent: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let parse = |e: csv::Error| CliError::Parse(format!("{}: {e}", path.display()));
    csv::Reader::from_path(path).map_err(parse)?.deserialize().collect::<Result<Vec<T>, _>>().map_err(parse)
}

fn fold_minmax(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn write_report(dir: &Path, r: &ScenarioReport, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let tag = r.scenario.to_string();
    let path = dir.join(format!("report_{tag}.json"));
    write_file(&path, &serde_json::to_string_pretty(r).expect("report serializes"))?;
    files.push(path);

    let path = dir.join(format!("region_demand_{tag}.csv"));
    write_csv(
        &path,
        r.regions.iter().map(|g| RegionDemandCsvRow {
            region: g.region,
            bus: g.bus,
            admitted: g.admitted,
            rejected: g.rejected,
            total_kwh: g.total_kwh,
            load_mw: g.load_mw,
        }),
    )?;
    files.push(path);

    let path = dir.join(format!("region_cost_{tag}.csv"));
    write_csv(
        &path,
        r.regions.iter().map(|g| RegionCostCsvRow {
            region: g.region,
            bus: g.bus,
            lmp: g.lmp,
            charging_cost: g.charging_cost,
        }),
    )?;
    files.push(path);

    let path = dir.join(format!("trace_{tag}.csv"));
    write_csv(
        &path,
        r.trace.iter().map(|t| {
            let (min_lmp, max_lmp) = fold_minmax(&t.next_lmp);
            TraceCsvRow {
                iteration: t.iteration,
                grid_cost: t.grid_cost,
                total_kwh: t.regions.iter().map(|g| g.total_kwh).sum(),
                charging_cost: t.regions.iter().map(|g| g.charging_cost).sum(),
                min_lmp,
                max_lmp,
                max_lmp_change: t.max_lmp_change,
            }
        }),
    )?;
    files.push(path);

    let path = dir.join(format!("ev_plans_{tag}.csv"));
    write_csv(
        &path,
        r.evs.iter().map(|e| EvPlanCsvRow {
            ev_id: e.ev_id,
            class: e.class,
            status: e.status,
            station_id: e.station_id,
            region: e.region,
            charge_kwh: e.charge_kwh,
            charge_price: e.charge_price,
            trip_cost: e.trip_cost,
        }),
    )?;
    files.push(path);
    Ok(())
}

/// Writes the manifest echo, generated inputs, one report set per scenario
/// and the comparison. Returns the paths written.
pub fn write_outputs(
    dir: &Path,
    manifest_text: &str,
    inputs: &Inputs,
    reports: &[ScenarioReport],
    comparison: Option<&Comparison>,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<(), CliError> {
        let p = dir.join(name);
        write_file(&p, text)?;
        files.push(p);
        Ok(())
    };
    put("manifest.json", manifest_text)?;
    if inputs.generated_network {
        put("network.json", &inputs.document.to_json())?;
    }
    if inputs.generated_fleet {
        put("fleet.json", &FleetDocument { evs: inputs.fleet.evs.clone() }.to_json())?;
    }
    if let Some(c) = comparison {
        put("comparison.json", &serde_json::to_string_pretty(c).expect("comparison serializes"))?;
        let p = dir.join("comparison.csv");
        write_csv(
            &p,
            c.rows.iter().map(|r| ComparisonCsvRow {
                metric: r.metric.clone(),
                scenario_i: r.scenario_i,
                scenario_ii: r.scenario_ii,
                reduction_percent: r.reduction_percent,
            }),
        )?;
        files.push(p);
    }
    for r in reports {
        write_report(dir, r, &mut files)?;
    }
    Ok(files)
}
