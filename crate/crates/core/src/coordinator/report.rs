use serde::{Deserialize, Serialize};

use super::{Scenario, ScenarioConfig};
use crate::power_grid::BusId;
use crate::powertrain::PowertrainClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// Scenario I: prices do not react to demand, one pass.
    SinglePass,
    Converged,
    /// The LMP vector came back to an earlier iterate.
    Cycling {
        revisited: usize,
    },
    MaxIterations,
    Failed {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionIteration {
    pub region: u32,
    pub total_kwh: f64,
    pub charging_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    /// LMPs the station prices were set from, $/MWh per bus.
    pub lmp: Vec<f64>,
    /// Offered price per station, in station order, $/kWh.
    pub station_prices: Vec<f64>,
    pub regions: Vec<RegionIteration>,
    pub dispatch: Vec<f64>,
    pub grid_cost: f64,
    /// LMPs after dispatching this iteration's demand.
    pub next_lmp: Vec<f64>,
    pub max_lmp_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: u32,
    pub bus: BusId,
    pub lmp: f64,
    pub admitted: usize,
    pub rejected: usize,
    pub total_kwh: f64,
    pub load_mw: f64,
    pub charging_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvStatus {
    /// Finished on the energy it started with.
    Direct,
    Charged,
    /// PHEV that needed a charge but found no station and ran on gasoline.
    Gasoline,
    /// Turned away by full regions twice.
    Unserved,
    Stranded,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvOutcome {
    pub ev_id: usize,
    pub class: PowertrainClass,
    pub status: EvStatus,
    pub station_id: Option<usize>,
    pub region: Option<u32>,
    pub charge_kwh: f64,
    pub charge_price: f64,
    /// Travel plus charging, $; absent when the trip cannot be made.
    pub trip_cost: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub direct: usize,
    pub charged: usize,
    pub gasoline: usize,
    pub unserved: usize,
    pub stranded: usize,
    pub unreachable: usize,
}

impl OutcomeCounts {
    pub fn tally(evs: &[EvOutcome]) -> Self {
        let mut c = Self::default();
        for e in evs {
            *match e.status {
                EvStatus::Direct => &mut c.direct,
                EvStatus::Charged => &mut c.charged,
                EvStatus::Gasoline => &mut c.gasoline,
                EvStatus::Unserved => &mut c.unserved,
                EvStatus::Stranded => &mut c.stranded,
                EvStatus::Unreachable => &mut c.unreachable,
            } += 1;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub status: RunStatus,
    pub iterations: usize,
    /// $/h without any EV charging.
    pub base_case_cost: f64,
    pub total_power_cost: f64,
    pub total_charging_cost: f64,
    pub additional_cost_percent: f64,
    pub total_charging_kwh: f64,
    pub dispatch: Vec<f64>,
    pub lmp: Vec<f64>,
    pub regions: Vec<RegionSummary>,
    pub counts: OutcomeCounts,
    pub evs: Vec<EvOutcome>,
    pub trace: Vec<IterationTrace>,
}

impl ScenarioReport {
    pub fn succeeded(&self) -> bool {
        !matches!(self.status, RunStatus::Failed { .. })
    }
}

pub fn additional_cost_percent(total: f64, base: f64) -> f64 {
    100.0 * (total - base) / base
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub scenario_i: f64,
    pub scenario_ii: f64,
    /// `100·(I − II)/I`; zero when I is zero.
    pub reduction_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

fn reduction(i: f64, ii: f64) -> f64 {
    if i == 0.0 {
        0.0
    } else {
        100.0 * (i - ii) / i
    }
}

pub fn compare_reports(r1: &ScenarioReport, r2: &ScenarioReport) -> Comparison {
    let row = |metric: &str, a: f64, b: f64| ComparisonRow {
        metric: metric.to_string(),
        scenario_i: a,
        scenario_ii: b,
        reduction_percent: reduction(a, b),
    };
    Comparison {
        rows: vec![
            row("total_power_cost", r1.total_power_cost, r2.total_power_cost),
            row("total_charging_cost", r1.total_charging_cost, r2.total_charging_cost),
            row("additional_cost_percent", r1.additional_cost_percent, r2.additional_cost_percent),
        ],
    }
}
