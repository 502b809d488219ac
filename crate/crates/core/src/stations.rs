//! Charging-station pricing, request admission and regional demand.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::transport_graph::{NodeId, StationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingStation {
    pub id: usize,
    pub node: NodeId,
    pub region: u32,
    /// Profit margin over the bus LMP, percent.
    pub cpi_percent: f64,
    /// Price quoted to vehicles this iteration, $/kWh.
    pub offered_price: f64,
}

impl From<&StationRecord> for ChargingStation {
    fn from(r: &StationRecord) -> Self {
        Self { id: r.id, node: r.node, region: r.region, cpi_percent: r.cpi_percent, offered_price: 0.0 }
    }
}

/// Station price in $/kWh from the bus LMP in $/MWh and the station margin.
pub fn offered_price(lmp_per_mwh: f64, cpi_percent: f64) -> f64 {
    lmp_per_mwh / 1000.0 * (1.0 + cpi_percent / 100.0)
}

/// Margin implied by an offered price over the wholesale price, both $/kWh.
pub fn cpi_from_prices(offered: f64, wholesale: f64) -> f64 {
    (offered - wholesale) / wholesale * 100.0
}

/// Uniform margins in `[low, high]` percent.
pub fn sample_cpi<R: Rng>(n_stations: usize, rng: &mut R, range: (f64, f64)) -> Vec<f64> {
    let (low, high) = range;
    assert!(low <= high, "cpi range is inverted");
    (0..n_stations).map(|_| if low == high { low } else { rng.gen_range(low..=high) }).collect()
}

pub const DEFAULT_CPI_RANGE: (f64, f64) = (0.0, 12.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub index: u32,
    pub bus: usize,
    /// Vehicles the region's stations can serve in one step.
    pub capacity_evs: usize,
    pub station_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingRequest {
    pub ev_id: usize,
    pub station_id: usize,
    pub energy_kwh: f64,
    /// $/kWh.
    pub quoted_price: f64,
    /// Whole-trip cost of the plan behind the request; admission priority.
    pub trip_cost: f64,
}

impl ChargingRequest {
    pub fn cost(&self) -> f64 {
        self.energy_kwh * self.quoted_price
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDemand {
    pub region: u32,
    pub admitted: Vec<ChargingRequest>,
    pub rejected: Vec<ChargingRequest>,
    pub total_kwh: f64,
    /// Average load over the one-hour step.
    pub load_mw: f64,
}

impl RegionDemand {
    pub fn charging_cost(&self) -> f64 {
        self.admitted.iter().map(ChargingRequest::cost).fold(0.0, |a, x| a + x)
    }
}

fn admission_order(a: &ChargingRequest, b: &ChargingRequest) -> std::cmp::Ordering {
    a.trip_cost.total_cmp(&b.trip_cost).then(a.ev_id.cmp(&b.ev_id))
}

/// Admits the cheapest trips first, up to each region's vehicle capacity.
/// `already_admitted` counts vehicles a region has taken in earlier rounds.
pub fn admit_and_aggregate(
    requests: &BTreeMap<u32, Vec<ChargingRequest>>,
    regions: &[Region],
    already_admitted: &BTreeMap<u32, usize>,
) -> Vec<RegionDemand> {
    regions
        .iter()
        .map(|region| {
            let mut queue = requests.get(&region.index).cloned().unwrap_or_default();
            queue.sort_by(admission_order);
            let room = region.capacity_evs.saturating_sub(already_admitted.get(&region.index).copied().unwrap_or(0));
            let rejected = if queue.len() > room { queue.split_off(room) } else { Vec::new() };
            let total_kwh: f64 = queue.iter().map(|r| r.energy_kwh).fold(0.0, |a, x| a + x);
            RegionDemand { region: region.index, admitted: queue, rejected, total_kwh, load_mw: total_kwh / 1000.0 }
        })
        .collect()
}
