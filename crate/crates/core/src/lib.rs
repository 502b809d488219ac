//! EV routing, charging-station pricing and DC optimal power flow coupled in
//! one co-simulation loop.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod coordinator;
pub mod power_grid;
pub mod powertrain;
pub mod rng;
pub mod routing;
pub mod stations;
pub mod transport_graph;
