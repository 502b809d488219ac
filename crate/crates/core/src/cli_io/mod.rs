//! Run manifests, input loading, fleet generation and report files.

mod fleet;
mod output;

pub use fleet::{class_counts, generate_fleet, FleetDocument, FleetSpec, DEFAULT_MIX, DEFAULT_SOC};
pub use output::{
    read_csv, write_outputs, ComparisonCsvRow, EvPlanCsvRow, RegionCostCsvRow, RegionDemandCsvRow, TraceCsvRow,
};

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::{
    compare_reports, run_scenario, Comparison, CoordinatorError, Scenario, ScenarioConfig, ScenarioReport, Simulation,
};
use crate::power_grid::{GridCase, GridError};
use crate::powertrain::EfficiencyTable;
use crate::rng::{substream, Stream};
use crate::stations::{sample_cpi, ChargingStation, DEFAULT_CPI_RANGE};
use crate::transport_graph::{
    generate_synthetic, NetworkDocument, NetworkError, SyntheticConfig, TransportNetwork, MILES_PER_METER,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Demo run: 60-node synthetic network, bundled 9-bus grid, 500 vehicles.
pub const DEMO_MANIFEST: &str = include_str!("../../assets/demo_manifest.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Infeasible(_) => 5,
            CliError::Io(_) => 1,
        }
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::Parse(_) => CliError::Parse(e.to_string()),
            GridError::Invalid(_) | GridError::LoadShape { .. } => CliError::Validation(e.to_string()),
            GridError::Infeasible(_) | GridError::SingularKkt(_) | GridError::NoConvergence(_) => {
                CliError::Infeasible(e.to_string())
            }
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::Parse(_) => CliError::Parse(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CoordinatorError> for CliError {
    fn from(e: CoordinatorError) -> Self {
        match e {
            CoordinatorError::BaseCase(g) => g.into(),
            CoordinatorError::Invalid(_) | CoordinatorError::Routing(_) => CliError::Validation(e.to_string()),
        }
    }
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    File(PathBuf),
    Synthetic(SyntheticConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSource {
    File(PathBuf),
    /// Name of a bundled case; only `ieee9` exists.
    Builtin(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FleetSource {
    File(PathBuf),
    Generate(FleetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CpiSource {
    /// Keep the margins stored with the stations in the network file.
    File,
    /// Draw every station's margin uniformly from `[low, high]` percent.
    Uniform([f64; 2]),
}

impl Default for CpiSource {
    fn default() -> Self {
        CpiSource::Uniform([DEFAULT_CPI_RANGE.0, DEFAULT_CPI_RANGE.1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    pub seed: u64,
    pub network: NetworkSource,
    pub grid: GridSource,
    pub fleet: FleetSource,
    #[serde(default)]
    pub cpi: CpiSource,
    /// Overrides the bundled efficiency table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency_table: Option<PathBuf>,
    #[serde(default = "default_miles_per_meter")]
    pub miles_per_meter: f64,
    /// Shared settings; the scenario field is replaced per run.
    #[serde(default)]
    pub config: ScenarioConfig,
    #[serde(default = "both_scenarios")]
    pub scenarios: Vec<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_miles_per_meter() -> f64 {
    MILES_PER_METER
}

fn both_scenarios() -> Vec<Scenario> {
    vec![Scenario::I, Scenario::II]
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let m: RunManifest = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("manifest: {e}")))?;
        if m.scenarios.is_empty() {
            return Err(CliError::Validation("manifest: scenarios must list I, II or both".into()));
        }
        let mut seen = m.scenarios.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != m.scenarios.len() {
            return Err(CliError::Validation("manifest: scenarios repeat".into()));
        }
        if let Some(v) = &m.tool_version {
            if v != TOOL_VERSION {
                return Err(CliError::Validation(format!(
                    "manifest: written for tool version {v}, this is {TOOL_VERSION}"
                )));
            }
        }
        Ok(m)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_grid(source: &GridSource, base: &Path) -> Result<GridCase, CliError> {
    match source {
        GridSource::Builtin(name) if name == "ieee9" => Ok(GridCase::bundled_ieee9()),
        GridSource::Builtin(name) => Err(CliError::Validation(format!("no bundled grid case named {name:?}"))),
        GridSource::File(p) => Ok(GridCase::parse(&read_file(&resolve(base, p))?)?),
    }
}

pub fn load_network_file(path: &Path, miles_per_meter: f64) -> Result<(NetworkDocument, TransportNetwork), CliError> {
    let doc = NetworkDocument::parse(&read_file(path)?)?;
    let net = doc.build(miles_per_meter)?;
    Ok((doc, net))
}

pub fn load_efficiency_table(path: Option<&Path>) -> Result<EfficiencyTable, CliError> {
    let Some(p) = path else {
        return Ok(EfficiencyTable::default());
    };
    let t = EfficiencyTable::parse(&read_file(p)?).map_err(|e| CliError::Parse(format!("efficiency table: {e}")))?;
    t.validate().map_err(|e| CliError::Validation(format!("efficiency table: {e}")))?;
    Ok(t)
}

/// Inputs resolved from a manifest, ready to simulate.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub document: NetworkDocument,
    pub network: TransportNetwork,
    pub grid: GridCase,
    pub table: EfficiencyTable,
    pub fleet: FleetDocument,
    pub stations: Vec<ChargingStation>,
    /// The network or fleet was generated rather than read.
    pub generated_network: bool,
    pub generated_fleet: bool,
}

impl Inputs {
    pub fn simulation(&self) -> Simulation<'_> {
        Simulation {
            net: &self.network,
            grid: &self.grid,
            table: &self.table,
            fleet: &self.fleet.evs,
            stations: &self.stations,
        }
    }
}

pub fn resolve_inputs(m: &RunManifest, base: &Path) -> Result<Inputs, CliError> {
    let grid = load_grid(&m.grid, base)?;
    let table = load_efficiency_table(m.efficiency_table.as_ref().map(|p| resolve(base, p)).as_deref())?;
    let (document, network) = match &m.network {
        NetworkSource::File(p) => load_network_file(&resolve(base, p), m.miles_per_meter)?,
        NetworkSource::Synthetic(cfg) => {
            let syn = generate_synthetic(cfg, m.seed)?;
            let doc = syn.to_document();
            let net = doc.build(m.miles_per_meter)?;
            (doc, net)
        }
    };
    let fleet = match &m.fleet {
        FleetSource::File(p) => FleetDocument::parse(&read_file(&resolve(base, p))?)?,
        FleetSource::Generate(spec) => FleetDocument { evs: generate_fleet(spec, &network, &table, m.seed)? },
    };
    let mut stations: Vec<ChargingStation> = document.stations.iter().map(ChargingStation::from).collect();
    if let CpiSource::Uniform([lo, hi]) = m.cpi {
        if !(lo <= hi && lo >= -100.0) {
            return Err(CliError::Validation(format!("cpi range [{lo}, {hi}] is invalid")));
        }
        let cpis = sample_cpi(stations.len(), &mut substream(m.seed, Stream::Cpi), (lo, hi));
        for (s, c) in stations.iter_mut().zip(cpis) {
            s.cpi_percent = c;
        }
    }
    let inputs = Inputs {
        document,
        network,
        grid,
        table,
        fleet,
        stations,
        generated_network: matches!(m.network, NetworkSource::Synthetic(_)),
        generated_fleet: matches!(m.fleet, FleetSource::Generate(_)),
    };
    inputs.simulation().validate()?;
    Ok(inputs)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub reports: Vec<ScenarioReport>,
    pub comparison: Option<Comparison>,
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// First failed scenario, if any, as an infeasibility error.
    pub fn failure(&self) -> Option<CliError> {
        self.reports.iter().find_map(|r| match &r.status {
            crate::coordinator::RunStatus::Failed { message } => {
                Some(CliError::Infeasible(format!("scenario {}: {message}", r.scenario)))
            }
            _ => None,
        })
    }
}

/// Executes every scenario in the manifest and writes the report files.
///
/// `manifest_text` is echoed into the output directory unchanged.
/// Relative paths in the manifest resolve against `base`. The output
/// directory is `out` if given, else the manifest's `out_dir`, else `out`.
pub fn run_manifest(
    manifest_text: &str,
    base: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunOutcome, CliError> {
    let mut m = RunManifest::parse(manifest_text)?;
    if let Some(s) = seed {
        m.seed = s;
    }
    let inputs = resolve_inputs(&m, base)?;
    let mut reports = Vec::new();
    for &scenario in &m.scenarios {
        let cfg = ScenarioConfig { scenario, seed: m.seed, ..m.config.clone() };
        reports.push(run_scenario(&inputs.simulation(), &cfg)?);
    }
    let comparison =
        match (reports.iter().find(|r| r.scenario == Scenario::I), reports.iter().find(|r| r.scenario == Scenario::II))
        {
            (Some(a), Some(b)) => Some(compare_reports(a, b)),
            _ => None,
        };
    let out_dir = match (out, &m.out_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => resolve(base, o),
        (None, None) => PathBuf::from("out"),
    };
    let files = write_outputs(&out_dir, manifest_text, &inputs, &reports, comparison.as_ref())?;
    Ok(RunOutcome { reports, comparison, out_dir, files })
}
