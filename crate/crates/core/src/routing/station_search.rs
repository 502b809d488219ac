use std::collections::BTreeMap;

use crate::stations::ChargingStation;
use crate::transport_graph::{NodeId, TransportNetwork};

/// A station found near a route node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    /// Index into the station slice that was searched.
    pub station: usize,
    pub anchor: NodeId,
    pub distance_m: f64,
}

/// Nearest station to one node by growing a search circle in steps of
/// `d_search_m` until it contains at least one station. The closest station
/// inside the first non-empty circle wins; ties go to the lower station id.
pub fn nearest_station(
    net: &TransportNetwork,
    anchor: NodeId,
    stations: &[ChargingStation],
    d_search_m: f64,
) -> Option<(usize, f64)> {
    let at = net.node(anchor)?;
    let placed: Vec<(usize, f64)> =
        stations.iter().enumerate().filter_map(|(i, s)| net.node(s.node).map(|g| (i, at.meters_to(g)))).collect();
    if placed.is_empty() || !(d_search_m > 0.0) {
        return None;
    }
    let mut k = 1u64;
    loop {
        let radius = k as f64 * d_search_m;
        let hit = placed
            .iter()
            .filter(|(_, d)| *d <= radius)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(stations[a.0].id.cmp(&stations[b.0].id)));
        if let Some(&found) = hit {
            return Some(found);
        }
        k += 1;
    }
}

/// Union of the nearest station of every anchor node, closest first,
/// truncated to `n_candidates` distinct stations.
pub fn candidate_stations(
    net: &TransportNetwork,
    anchors: &[NodeId],
    stations: &[ChargingStation],
    n_candidates: usize,
    d_search_m: f64,
) -> Vec<Candidate> {
    let mut best: BTreeMap<usize, Candidate> = BTreeMap::new();
    for &anchor in anchors {
        if let Some((station, distance_m)) = nearest_station(net, anchor, stations, d_search_m) {
            let c = Candidate { station, anchor, distance_m };
            best.entry(station)
                .and_modify(|cur| {
                    if distance_m < cur.distance_m {
                        *cur = c;
                    }
                })
                .or_insert(c);
        }
    }
    let mut out: Vec<Candidate> = best.into_values().collect();
    out.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m).then(stations[a.station].id.cmp(&stations[b.station].id)));
    out.truncate(n_candidates);
    out
}
