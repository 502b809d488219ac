//! Powertrain-aware least-cost routing and charging-stop planning.

mod planner;
mod search;
mod station_search;

pub use planner::{PlanOptions, RoutingContext, StationOption, TripPlan, DEFAULT_CANDIDATES, DEFAULT_SEARCH_RADIUS_M};
pub use search::{depletion_node, fold_path_cost, least_cost_path, Route};
pub use station_search::{candidate_stations, nearest_station, Candidate};

use thiserror::Error;

use crate::powertrain::PowertrainError;
use crate::transport_graph::NodeId;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("node {0} is not in the network")]
    UnknownNode(NodeId),
    #[error("trip origin and destination are both node {0}")]
    OriginIsDestination(NodeId),
    #[error("no route from node {from} to node {to}")]
    Unreachable { from: NodeId, to: NodeId },
    #[error("vehicle {ev} cannot reach any charging station before its battery runs out")]
    Stranded { ev: usize },
    #[error(transparent)]
    Powertrain(#[from] PowertrainError),
}
