use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::search::{depletion_node, least_cost_path, Route};
use super::station_search::candidate_stations;
use super::RoutingError;
use crate::powertrain::{required_charge, BatteryState, ChargePolicy, EfficiencyTable, EnergyPrices, EvAgent};
use crate::stations::ChargingStation;
use crate::transport_graph::{NodeId, TransportNetwork};

pub const DEFAULT_CANDIDATES: usize = 5;
pub const DEFAULT_SEARCH_RADIUS_M: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanOptions {
    pub n_candidates: usize,
    pub d_search_m: f64,
    pub policy: ChargePolicy,
    /// Stop to charge on trips the battery could finish, whenever a station
    /// option is cheaper than driving straight through.
    pub opportunistic: bool,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            n_candidates: DEFAULT_CANDIDATES,
            d_search_m: DEFAULT_SEARCH_RADIUS_M,
            policy: ChargePolicy::FillToFull,
            opportunistic: false,
        }
    }
}

/// Trip through one charging stop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationOption {
    pub station_id: usize,
    pub station_node: NodeId,
    pub region: u32,
    pub offered_price: f64,
    pub leg_to_station: Route,
    pub leg_to_destination: Route,
    pub charge_kwh: f64,
    pub charge_cost: f64,
    pub total_cost: f64,
}

impl StationOption {
    pub fn travel_cost(&self) -> f64 {
        self.leg_to_station.total_cost + self.leg_to_destination.total_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripPlan {
    /// Straight route without charging, when one exists.
    pub direct: Option<Route>,
    /// Charging alternatives, cheapest first.
    pub options: Vec<StationOption>,
    /// Index into `options` of the stop the vehicle takes.
    pub selected: Option<usize>,
    /// The battery alone cannot cover the trip.
    pub charging_required: bool,
}

impl TripPlan {
    pub fn chosen(&self) -> Option<&StationOption> {
        self.selected.map(|i| &self.options[i])
    }

    /// Travel plus charging cost of whatever the vehicle actually does.
    pub fn total_cost(&self) -> f64 {
        match (self.chosen(), &self.direct) {
            (Some(o), _) => o.total_cost,
            (None, Some(r)) => r.total_cost,
            (None, None) => f64::INFINITY,
        }
    }
}

fn rank(a: &StationOption, b: &StationOption) -> Ordering {
    a.total_cost
        .total_cmp(&b.total_cost)
        .then(b.leg_to_destination.arrival_energy.total_cmp(&a.leg_to_destination.arrival_energy))
        .then(a.station_id.cmp(&b.station_id))
}

/// Shared read-only inputs of a routing pass.
#[derive(Debug, Clone, Copy)]
pub struct RoutingContext<'a> {
    pub net: &'a TransportNetwork,
    pub table: &'a EfficiencyTable,
    /// Travel-energy prices; electricity already in the battery is valued at
    /// `p_ele`.
    pub prices: EnergyPrices,
    pub options: PlanOptions,
}

impl RoutingContext<'_> {
    fn path(&self, ev: &EvAgent, from: NodeId, to: NodeId, energy: f64) -> Result<Option<Route>, RoutingError> {
        least_cost_path(self.net, self.table, ev.class, from, to, energy, &self.prices)
    }

    fn evaluate(&self, ev: &EvAgent, station: &ChargingStation) -> Result<Option<StationOption>, RoutingError> {
        let Some(leg1) = self.path(ev, ev.origin, station.node, ev.battery.energy)? else {
            return Ok(None);
        };
        let need = match self.options.policy {
            ChargePolicy::FillToFull => 0.0,
            ChargePolicy::FillToNeed => match self.path(ev, station.node, ev.destination, f64::INFINITY)? {
                Some(r) => r.segments.iter().map(|&s| self.table.segment_energy(ev.class, self.net.segment(s))).sum(),
                None => return Ok(None),
            },
        };
        let at_station =
            BatteryState { capacity: ev.battery.capacity, energy: leg1.arrival_energy.min(ev.battery.capacity) };
        let charge_kwh = required_charge(&at_station, self.options.policy, need);
        let Some(leg2) = self.path(ev, station.node, ev.destination, at_station.energy + charge_kwh)? else {
            return Ok(None);
        };
        let charge_cost = charge_kwh * station.offered_price;
        Ok(Some(StationOption {
            station_id: station.id,
            station_node: station.node,
            region: station.region,
            offered_price: station.offered_price,
            total_cost: leg1.total_cost + leg2.total_cost + charge_cost,
            leg_to_station: leg1,
            leg_to_destination: leg2,
            charge_kwh,
            charge_cost,
        }))
    }

    fn options_near(
        &self,
        ev: &EvAgent,
        anchors: &[NodeId],
        stations: &[ChargingStation],
    ) -> Result<Vec<StationOption>, RoutingError> {
        let found = candidate_stations(self.net, anchors, stations, self.options.n_candidates, self.options.d_search_m);
        let mut options = Vec::with_capacity(found.len());
        for c in found {
            if let Some(o) = self.evaluate(ev, &stations[c.station])? {
                options.push(o);
            }
        }
        options.sort_by(rank);
        Ok(options)
    }

    /// Plans one trip, adding a charging stop when the battery cannot cover
    /// it.
    ///
    /// If the battery suffices, the plain least-cost route is kept and the
    /// stations nearest to its nodes are still ranked as alternatives.
    /// Otherwise stations are searched around the route nodes up to the
    /// point where the battery runs dry, each candidate is priced as a two-leg
    /// trip through it, and the cheapest is selected. A PHEV with no usable
    /// station finishes on gasoline; a BEV without one is stranded.
    pub fn plan_with_charging(&self, ev: &EvAgent, stations: &[ChargingStation]) -> Result<TripPlan, RoutingError> {
        if ev.origin == ev.destination {
            return Err(RoutingError::OriginIsDestination(ev.origin));
        }
        let direct = self.path(ev, ev.origin, ev.destination, ev.battery.energy)?;
        if let Some(route) = &direct {
            if depletion_node(self.net, self.table, ev.class, route).is_none() {
                let options = self.options_near(ev, &route.nodes, stations)?;
                let selected = (self.options.opportunistic
                    && options.first().is_some_and(|o| o.total_cost < route.total_cost))
                .then_some(0);
                return Ok(TripPlan { direct, options, selected, charging_required: false });
            }
        }

        let reference = match &direct {
            Some(r) => r.clone(),
            None => {
                let mut r = self
                    .path(ev, ev.origin, ev.destination, f64::INFINITY)?
                    .ok_or(RoutingError::Unreachable { from: ev.origin, to: ev.destination })?;
                r.start_energy = ev.battery.energy;
                r
            }
        };
        let dry =
            depletion_node(self.net, self.table, ev.class, &reference).expect("infeasible route depletes somewhere");
        let cut = reference.nodes.iter().position(|&n| n == dry).expect("depletion node lies on the route");
        let options = self.options_near(ev, &reference.nodes[..=cut], stations)?;
        if options.is_empty() {
            if ev.class.is_bev() {
                return Err(RoutingError::Stranded { ev: ev.id });
            }
            return Ok(TripPlan { direct, options, selected: None, charging_required: true });
        }
        Ok(TripPlan { direct, options, selected: Some(0), charging_required: true })
    }
}
