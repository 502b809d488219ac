//! Closed loop between vehicle routing, station pricing and grid dispatch.
//!
//! Scenario I quotes one flat price at every station and routes the fleet
//! once. Scenario II quotes LMP-plus-margin prices, routes, dispatches the
//! resulting charging load and repeats with the new LMPs until they settle.

mod report;

pub use report::{
    additional_cost_percent, compare_reports, Comparison, ComparisonRow, EvOutcome, EvStatus, IterationTrace,
    OutcomeCounts, RegionIteration, RegionSummary, RunStatus, ScenarioReport,
};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::power_grid::{solve_dcopf, DcopfSolution, GridCase, GridError};
use crate::powertrain::{ChargePolicy, EfficiencyTable, EnergyPrices, EvAgent, DEFAULT_GAS_PRICE};
use crate::routing::{
    PlanOptions, RoutingContext, RoutingError, TripPlan, DEFAULT_CANDIDATES, DEFAULT_SEARCH_RADIUS_M,
};
use crate::stations::{admit_and_aggregate, offered_price, ChargingRequest, ChargingStation, Region, RegionDemand};
use crate::transport_graph::TransportNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum Scenario {
    /// Flat station prices, no feedback from the grid.
    #[default]
    I,
    /// Prices follow bus LMPs plus each station's margin.
    II,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "I",
            Scenario::II => "II",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "i" | "1" => Ok(Scenario::I),
            "II" | "ii" | "2" => Ok(Scenario::II),
            _ => Err(format!("unknown scenario {s:?} (expected I or II)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// Station price under Scenario I and the value of electricity already
    /// in a battery under both scenarios, $/kWh.
    pub flat_price: f64,
    /// $/gallon.
    pub p_gas: f64,
    pub charge_policy: ChargePolicy,
    /// $/MWh.
    pub eps_price: f64,
    pub max_iters: usize,
    pub n_candidates: usize,
    pub d_search_m: f64,
    pub opportunistic: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::I,
            flat_price: 0.05,
            p_gas: DEFAULT_GAS_PRICE,
            charge_policy: ChargePolicy::FillToFull,
            eps_price: 0.01,
            max_iters: 20,
            n_candidates: DEFAULT_CANDIDATES,
            d_search_m: DEFAULT_SEARCH_RADIUS_M,
            opportunistic: false,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CoordinatorError> {
        let mut errs = Vec::new();
        if !(self.eps_price > 0.0) {
            errs.push(format!("eps_price {} must be positive", self.eps_price));
        }
        if self.max_iters == 0 {
            errs.push("max_iters must be at least 1".to_string());
        }
        if !(self.flat_price >= 0.0 && self.flat_price.is_finite()) {
            errs.push(format!("flat_price {} must be non-negative", self.flat_price));
        }
        if !(self.p_gas >= 0.0 && self.p_gas.is_finite()) {
            errs.push(format!("p_gas {} must be non-negative", self.p_gas));
        }
        if self.n_candidates == 0 {
            errs.push("n_candidates must be at least 1".to_string());
        }
        if !(self.d_search_m > 0.0 && self.d_search_m.is_finite()) {
            errs.push(format!("d_search_m {} must be positive", self.d_search_m));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CoordinatorError::Invalid(errs))
        }
    }

    fn plan_options(&self) -> PlanOptions {
        PlanOptions {
            n_candidates: self.n_candidates,
            d_search_m: self.d_search_m,
            policy: self.charge_policy,
            opportunistic: self.opportunistic,
        }
    }
}

#[derive(Debug, Error)]
pub enum CoordinatorError {
    #[error("simulation inputs are inconsistent: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("base case: {0}")]
    BaseCase(#[source] GridError),
    #[error("routing failed: {0}")]
    Routing(#[from] RoutingError),
}

/// Everything a scenario run reads.
#[derive(Debug, Clone, Copy)]
pub struct Simulation<'a> {
    pub net: &'a TransportNetwork,
    pub grid: &'a GridCase,
    pub table: &'a EfficiencyTable,
    pub fleet: &'a [EvAgent],
    pub stations: &'a [ChargingStation],
}

impl Simulation<'_> {
    /// Regions of the grid case with the stations attached to each.
    pub fn regions(&self) -> Vec<Region> {
        self.grid
            .buses
            .iter()
            .filter_map(|b| {
                b.region.map(|r| {
                    (
                        r,
                        Region {
                            index: r,
                            bus: b.id,
                            capacity_evs: b.charging_capacity_evs.unwrap_or(usize::MAX),
                            station_ids: self.stations.iter().filter(|s| s.region == r).map(|s| s.id).collect(),
                        },
                    )
                })
            })
            .collect::<BTreeMap<u32, Region>>()
            .into_values()
            .collect()
    }

    pub fn validate(&self) -> Result<(), CoordinatorError> {
        let mut errs = Vec::new();
        let regions: HashSet<u32> = self.grid.buses.iter().filter_map(|b| b.region).collect();
        let mut ids = HashSet::new();
        for s in self.stations {
            if !ids.insert(s.id) {
                errs.push(format!("station {}: duplicate id", s.id));
            }
            if !self.net.contains(s.node) {
                errs.push(format!("station {}: node {} is not in the network", s.id, s.node));
            }
            if !regions.contains(&s.region) {
                errs.push(format!("station {}: region {} has no bus in the grid case", s.id, s.region));
            }
            if !(s.cpi_percent >= -100.0) {
                errs.push(format!("station {}: cpi_percent {} is below -100", s.id, s.cpi_percent));
            }
        }
        let mut ev_ids = HashSet::new();
        for ev in self.fleet {
            if !ev_ids.insert(ev.id) {
                errs.push(format!("ev {}: duplicate id", ev.id));
            }
            for n in [ev.origin, ev.destination] {
                if !self.net.contains(n) {
                    errs.push(format!("ev {}: node {n} is not in the network", ev.id));
                }
            }
            if ev.origin == ev.destination {
                errs.push(format!("ev {}: origin equals destination", ev.id));
            }
            let cap = self.table.usable_capacity(ev.class);
            if !(ev.battery.energy >= 0.0 && ev.battery.energy <= ev.battery.capacity + 1e-9)
                || ev.battery.capacity > cap + 1e-9
            {
                errs.push(format!("ev {}: battery state outside [0, {cap}] kWh", ev.id));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CoordinatorError::Invalid(errs))
        }
    }
}

/// Inclusive: a change of exactly `eps` counts as settled.
pub fn converged(prev: &[f64], curr: &[f64], eps: f64) -> Result<bool, CoordinatorError> {
    max_abs_change(prev, curr).map(|d| d <= eps)
}

fn max_abs_change(prev: &[f64], curr: &[f64]) -> Result<f64, CoordinatorError> {
    if prev.len() != curr.len() {
        return Err(CoordinatorError::Invalid(vec![format!(
            "LMP vectors cover {} and {} buses",
            prev.len(),
            curr.len()
        )]));
    }
    Ok(prev.iter().zip(curr).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Outcome of routing the whole fleet against one price snapshot.
struct Round {
    outcomes: Vec<EvOutcome>,
    demands: Vec<RegionDemand>,
}

enum Pending {
    Done(EvOutcome),
    Request(ChargingRequest, u32, f64),
}

fn classify(ev: &EvAgent, plan: Result<TripPlan, RoutingError>) -> Result<Pending, CoordinatorError> {
    let outcome = |status, trip_cost| EvOutcome {
        ev_id: ev.id,
        class: ev.class,
        status,
        station_id: None,
        region: None,
        charge_kwh: 0.0,
        charge_price: 0.0,
        trip_cost,
    };
    match plan {
        Ok(plan) => Ok(match plan.chosen() {
            Some(o) => Pending::Request(
                ChargingRequest {
                    ev_id: ev.id,
                    station_id: o.station_id,
                    energy_kwh: o.charge_kwh,
                    quoted_price: o.offered_price,
                    trip_cost: o.total_cost,
                },
                o.region,
                o.total_cost,
            ),
            None if plan.charging_required => Pending::Done(outcome(EvStatus::Gasoline, Some(plan.total_cost()))),
            None => Pending::Done(outcome(EvStatus::Direct, Some(plan.total_cost()))),
        }),
        Err(RoutingError::Stranded { .. }) => Ok(Pending::Done(outcome(EvStatus::Stranded, None))),
        Err(RoutingError::Unreachable { .. }) => Ok(Pending::Done(outcome(EvStatus::Unreachable, None))),
        Err(e) => Err(e.into()),
    }
}

fn plan_all(
    ctx: &RoutingContext<'_>,
    evs: &[&EvAgent],
    stations: &[ChargingStation],
) -> Result<Vec<Pending>, CoordinatorError> {
    evs.par_iter()
        .map(|ev| classify(ev, ctx.plan_with_charging(ev, stations)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn charged(ev: &EvAgent, r: &ChargingRequest, region: u32, trip_cost: f64) -> EvOutcome {
    EvOutcome {
        ev_id: ev.id,
        class: ev.class,
        status: EvStatus::Charged,
        station_id: Some(r.station_id),
        region: Some(region),
        charge_kwh: r.energy_kwh,
        charge_price: r.quoted_price,
        trip_cost: Some(trip_cost),
    }
}

fn group(pending: &[Pending]) -> BTreeMap<u32, Vec<ChargingRequest>> {
    let mut by_region: BTreeMap<u32, Vec<ChargingRequest>> = BTreeMap::new();
    for p in pending {
        if let Pending::Request(r, region, _) = p {
            by_region.entry(*region).or_default().push(r.clone());
        }
    }
    by_region
}

/// Routes every vehicle, admits requests up to regional capacity and gives
/// turned-away vehicles one more try at stations outside the full regions.
fn route_and_admit(
    ctx: &RoutingContext<'_>,
    fleet: &[EvAgent],
    stations: &[ChargingStation],
    regions: &[Region],
) -> Result<Round, CoordinatorError> {
    let evs: Vec<&EvAgent> = fleet.iter().collect();
    let first = plan_all(ctx, &evs, stations)?;
    let mut demands = admit_and_aggregate(&group(&first), regions, &BTreeMap::new());

    let admitted: HashSet<usize> = demands.iter().flat_map(|d| d.admitted.iter().map(|r| r.ev_id)).collect();
    let saturated: BTreeSet<u32> = demands.iter().filter(|d| !d.rejected.is_empty()).map(|d| d.region).collect();
    let mut outcomes: Vec<Option<EvOutcome>> = Vec::with_capacity(fleet.len());
    let mut retry = Vec::new();
    for (ev, p) in fleet.iter().zip(first) {
        match p {
            Pending::Done(o) => outcomes.push(Some(o)),
            Pending::Request(r, region, cost) if admitted.contains(&ev.id) => {
                outcomes.push(Some(charged(ev, &r, region, cost)))
            }
            Pending::Request(..) => {
                retry.push(outcomes.len());
                outcomes.push(None);
            }
        }
    }

    if !retry.is_empty() {
        let open: Vec<ChargingStation> = stations.iter().filter(|s| !saturated.contains(&s.region)).cloned().collect();
        let evs: Vec<&EvAgent> = retry.iter().map(|&i| &fleet[i]).collect();
        let second = plan_all(ctx, &evs, &open)?;
        let taken: BTreeMap<u32, usize> = demands.iter().map(|d| (d.region, d.admitted.len())).collect();
        let extra = admit_and_aggregate(&group(&second), regions, &taken);
        let admitted: HashSet<usize> = extra.iter().flat_map(|d| d.admitted.iter().map(|r| r.ev_id)).collect();
        for (&i, p) in retry.iter().zip(second) {
            let ev = &fleet[i];
            outcomes[i] = Some(match p {
                Pending::Request(r, region, cost) if admitted.contains(&ev.id) => charged(ev, &r, region, cost),
                _ => EvOutcome {
                    ev_id: ev.id,
                    class: ev.class,
                    status: EvStatus::Unserved,
                    station_id: None,
                    region: None,
                    charge_kwh: 0.0,
                    charge_price: 0.0,
                    trip_cost: None,
                },
            });
        }
        for (d, e) in demands.iter_mut().zip(extra) {
            d.admitted.extend(e.admitted);
            d.total_kwh = d.admitted.iter().map(|r| r.energy_kwh).fold(0.0, |a, x| a + x);
            d.load_mw = d.total_kwh / 1000.0;
        }
    }

    Ok(Round { outcomes: outcomes.into_iter().map(|o| o.expect("every vehicle has an outcome")).collect(), demands })
}

fn extra_load(grid: &GridCase, regions: &[Region], demands: &[RegionDemand]) -> Vec<f64> {
    let idx = grid.bus_index();
    let mut extra = vec![0.0; grid.buses.len()];
    for (region, d) in regions.iter().zip(demands) {
        extra[idx[&region.bus]] += d.load_mw;
    }
    extra
}

fn price_stations(stations: &[ChargingStation], prices: impl Fn(&ChargingStation) -> f64) -> Vec<ChargingStation> {
    stations.iter().map(|s| ChargingStation { offered_price: prices(s), ..s.clone() }).collect()
}

struct Iterate {
    round: Round,
    solution: DcopfSolution,
}

/// Runs one scenario to completion.
///
/// Input problems and an infeasible no-EV base case are errors. A grid that
/// cannot serve the charging load of some iteration yields a report with
/// `RunStatus::Failed` holding the trace up to that point.
pub fn run_scenario(sim: &Simulation<'_>, cfg: &ScenarioConfig) -> Result<ScenarioReport, CoordinatorError> {
    cfg.validate()?;
    sim.validate()?;
    let regions = sim.regions();
    let base = solve_dcopf(sim.grid, &vec![0.0; sim.grid.buses.len()]).map_err(CoordinatorError::BaseCase)?;
    let ctx = RoutingContext {
        net: sim.net,
        table: sim.table,
        prices: EnergyPrices { p_ele: cfg.flat_price, p_gas: cfg.p_gas },
        options: cfg.plan_options(),
    };
    let idx = sim.grid.bus_index();
    let region_bus: HashMap<u32, usize> = regions.iter().map(|r| (r.index, idx[&r.bus])).collect();

    let mut trace = Vec::new();
    let mut last: Option<Iterate> = None;
    let mut lmp = base.lmp.clone();
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut status = RunStatus::MaxIterations;
    let passes = match cfg.scenario {
        Scenario::I => 1,
        Scenario::II => cfg.max_iters,
    };

    for iteration in 1..=passes {
        let priced = match cfg.scenario {
            Scenario::I => price_stations(sim.stations, |_| cfg.flat_price),
            // a negative LMP would mean paying vehicles to charge; quote zero instead
            Scenario::II => {
                price_stations(sim.stations, |s| offered_price(lmp[region_bus[&s.region]].max(0.0), s.cpi_percent))
            }
        };
        let round = route_and_admit(&ctx, sim.fleet, &priced, &regions)?;
        let solution = match solve_dcopf(sim.grid, &extra_load(sim.grid, &regions, &round.demands)) {
            Ok(s) => s,
            Err(e) => {
                status = RunStatus::Failed { message: format!("iteration {iteration}: {e}") };
                break;
            }
        };
        let change = max_abs_change(&lmp, &solution.lmp)?;
        trace.push(IterationTrace {
            iteration,
            lmp: lmp.clone(),
            station_prices: priced.iter().map(|s| s.offered_price).collect(),
            regions: round
                .demands
                .iter()
                .map(|d| RegionIteration { region: d.region, total_kwh: d.total_kwh, charging_cost: d.charging_cost() })
                .collect(),
            dispatch: solution.dispatch.clone(),
            grid_cost: solution.total_cost,
            next_lmp: solution.lmp.clone(),
            max_lmp_change: change,
        });
        let next = solution.lmp.clone();
        last = Some(Iterate { round, solution });

        if cfg.scenario == Scenario::I {
            status = RunStatus::SinglePass;
            break;
        }
        if change <= cfg.eps_price {
            status = RunStatus::Converged;
            break;
        }
        if let Some(k) = history.iter().position(|h| max_abs_change(h, &next).is_ok_and(|d| d <= cfg.eps_price)) {
            status = RunStatus::Cycling { revisited: k + 1 };
            break;
        }
        history.push(std::mem::replace(&mut lmp, next));
    }

    let (evs, demands, solution) = match last {
        Some(it) => (it.round.outcomes, it.round.demands, it.solution),
        None => (Vec::new(), Vec::new(), base.clone()),
    };
    let regions_out: Vec<RegionSummary> = regions
        .iter()
        .zip(demands.iter().map(Some).chain(std::iter::repeat(None)))
        .map(|(r, d)| RegionSummary {
            region: r.index,
            bus: r.bus,
            lmp: solution.lmp[idx[&r.bus]],
            admitted: d.map_or(0, |d| d.admitted.len()),
            rejected: d.map_or(0, |d| d.rejected.len()),
            total_kwh: d.map_or(0.0, |d| d.total_kwh),
            load_mw: d.map_or(0.0, |d| d.load_mw),
            charging_cost: d.map_or(0.0, |d| d.charging_cost()),
        })
        .collect();
    // fold from +0.0 so an empty fleet reports 0 rather than -0
    let total_charging_cost = regions_out.iter().map(|r| r.charging_cost).fold(0.0, |a, x| a + x);
    let total_charging_kwh = regions_out.iter().map(|r| r.total_kwh).fold(0.0, |a, x| a + x);
    Ok(ScenarioReport {
        scenario: cfg.scenario,
        config: cfg.clone(),
        status,
        iterations: trace.len(),
        base_case_cost: base.total_cost,
        total_power_cost: solution.total_cost,
        total_charging_cost,
        additional_cost_percent: additional_cost_percent(solution.total_cost, base.total_cost),
        total_charging_kwh,
        dispatch: solution.dispatch,
        lmp: solution.lmp,
        regions: regions_out,
        counts: OutcomeCounts::tally(&evs),
        evs,
        trace,
    })
}
