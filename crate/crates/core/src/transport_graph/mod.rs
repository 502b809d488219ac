//! Road network model: node geometry, directed segments with traffic classes,
//! distance computation, validation and the network file format.

mod synthetic;

pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticNetwork, TrafficMix};

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::powertrain::DriveCycle;

pub type NodeId = usize;

/// Miles per meter.
pub const MILES_PER_METER: f64 = 6.2137e-4;

/// Conversion constant exactly as printed alongside the distance formula
/// (`62.137 mile/m`). Dimensionally it is miles per kilometer times 1000;
/// kept only so reproduction runs can opt into it.
pub const LITERAL_DISTANCE_FACTOR: f64 = 62.137;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGeo {
    pub id: NodeId,
    /// Easting in meters.
    pub lon_m: f64,
    /// Northing in meters.
    pub lat_m: f64,
}

impl NodeGeo {
    pub fn new(id: NodeId, lon_m: f64, lat_m: f64) -> Self {
        Self { id, lon_m, lat_m }
    }

    /// Planar distance in meters.
    pub fn meters_to(&self, other: &NodeGeo) -> f64 {
        (self.lon_m - other.lon_m).hypot(self.lat_m - other.lat_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficClass {
    Low,
    Normal,
    Heavy,
}

impl TrafficClass {
    pub const ALL: [TrafficClass; 3] = [TrafficClass::Low, TrafficClass::Normal, TrafficClass::Heavy];

    /// Driving cycle used as the proxy for this congestion level.
    pub fn cycle(self) -> DriveCycle {
        match self {
            TrafficClass::Low => DriveCycle::Hwfet,
            TrafficClass::Normal => DriveCycle::Udds,
            TrafficClass::Heavy => DriveCycle::Nyc,
        }
    }
}

impl fmt::Display for TrafficClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrafficClass::Low => "low",
            TrafficClass::Normal => "normal",
            TrafficClass::Heavy => "heavy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: NodeId,
    pub to: NodeId,
    pub traffic: TrafficClass,
    /// Length in miles.
    pub distance: f64,
}

/// Segment length in miles, or `f64::INFINITY` for unconnected pairs.
pub fn segment_distance(a: &NodeGeo, b: &NodeGeo, connected: bool) -> f64 {
    segment_distance_with(a, b, connected, MILES_PER_METER)
}

pub fn segment_distance_with(a: &NodeGeo, b: &NodeGeo, connected: bool, miles_per_meter: f64) -> f64 {
    if !connected {
        return f64::INFINITY;
    }
    miles_per_meter * ((a.lon_m - b.lon_m).powi(2) + (a.lat_m - b.lat_m).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNodeId { id: NodeId },
    NonFiniteCoordinate { id: NodeId },
    DanglingEndpoint { segment: usize, node: NodeId },
    SelfLoop { segment: usize, node: NodeId },
    NonPositiveDistance { segment: usize, distance: f64 },
    StationOnMissingNode { station: usize, node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId { id } => write!(f, "duplicate node id {id}"),
            Violation::NonFiniteCoordinate { id } => write!(f, "node {id} has a non-finite coordinate"),
            Violation::DanglingEndpoint { segment, node } => {
                write!(f, "segment #{segment} references missing node {node}")
            }
            Violation::SelfLoop { segment, node } => write!(f, "segment #{segment} is a self-loop on node {node}"),
            Violation::NonPositiveDistance { segment, distance } => {
                write!(f, "segment #{segment} has non-positive or non-finite distance {distance}")
            }
            Violation::StationOnMissingNode { station, node } => {
                write!(f, "station {station} sits on missing node {node}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network file is malformed: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("network is invalid: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid generator parameters: {0}")]
    BadParameters(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Directed road graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct TransportNetwork {
    nodes: Vec<NodeGeo>,
    segments: Vec<Segment>,
    index: HashMap<NodeId, usize>,
    outgoing: Vec<Vec<usize>>,
    station_nodes: BTreeSet<NodeId>,
}

impl TransportNetwork {
    /// Builds the graph without rejecting anything; call [`validate_network`]
    /// to find violations. Segments with a missing endpoint are kept in the
    /// segment list but never appear in adjacency.
    pub fn new(nodes: Vec<NodeGeo>, segments: Vec<Segment>) -> Self {
        let mut index = HashMap::with_capacity(nodes.len());
        for (pos, n) in nodes.iter().enumerate() {
            index.entry(n.id).or_insert(pos);
        }
        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (si, s) in segments.iter().enumerate() {
            if let (Some(&f), Some(_)) = (index.get(&s.from), index.get(&s.to)) {
                outgoing[f].push(si);
            }
        }
        for out in &mut outgoing {
            out.sort_by_key(|&si| (segments[si].to, si));
        }
        Self { nodes, segments, index, outgoing, station_nodes: BTreeSet::new() }
    }

    pub fn with_station_nodes(mut self, nodes: impl IntoIterator<Item = NodeId>) -> Self {
        self.station_nodes = nodes.into_iter().collect();
        self
    }

    pub fn nodes(&self) -> &[NodeGeo] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn station_nodes(&self) -> &BTreeSet<NodeId> {
        &self.station_nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeGeo> {
        self.position(id).map(|p| &self.nodes[p])
    }

    pub fn segment(&self, idx: usize) -> &Segment {
        &self.segments[idx]
    }

    /// Indices of segments leaving `id`, ordered by head node id.
    pub fn outgoing(&self, id: NodeId) -> &[usize] {
        match self.position(id) {
            Some(p) => &self.outgoing[p],
            None => &[],
        }
    }

    /// True when every node can reach every other ignoring direction.
    pub fn is_weakly_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for s in &self.segments {
            if let (Some(a), Some(b)) = (self.position(s.from), self.position(s.to)) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Lists every broken invariant; an empty list means the network is well formed.
pub fn validate_network(net: &TransportNetwork) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for n in &net.nodes {
        if !seen.insert(n.id) {
            out.push(Violation::DuplicateNodeId { id: n.id });
        }
        if !n.lon_m.is_finite() || !n.lat_m.is_finite() {
            out.push(Violation::NonFiniteCoordinate { id: n.id });
        }
    }
    for (si, s) in net.segments.iter().enumerate() {
        for node in [s.from, s.to] {
            if !net.contains(node) {
                out.push(Violation::DanglingEndpoint { segment: si, node });
            }
        }
        if s.from == s.to {
            out.push(Violation::SelfLoop { segment: si, node: s.from });
        }
        if !(s.distance > 0.0 && s.distance.is_finite()) {
            out.push(Violation::NonPositiveDistance { segment: si, distance: s.distance });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Network file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub lon_m: f64,
    pub lat_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub traffic: TrafficClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationRecord {
    pub id: usize,
    pub node: NodeId,
    pub region: u32,
    pub cpi_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub nodes: Vec<NodeRecord>,
    pub segments: Vec<SegmentRecord>,
    pub stations: Vec<StationRecord>,
}

impl NetworkDocument {
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network document serializes")
    }

    /// Builds a validated network, computing segment lengths from coordinates.
    pub fn build(&self, miles_per_meter: f64) -> Result<TransportNetwork, NetworkError> {
        let nodes: Vec<NodeGeo> = self.nodes.iter().map(|n| NodeGeo::new(n.id, n.lon_m, n.lat_m)).collect();
        let geo: HashMap<NodeId, NodeGeo> = nodes.iter().map(|n| (n.id, *n)).collect();
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let distance = match (geo.get(&s.from), geo.get(&s.to)) {
                    (Some(a), Some(b)) => segment_distance_with(a, b, true, miles_per_meter),
                    _ => f64::NAN,
                };
                Segment { from: s.from, to: s.to, traffic: s.traffic, distance }
            })
            .collect();
        let net = TransportNetwork::new(nodes, segments).with_station_nodes(self.stations.iter().map(|s| s.node));
        let mut violations = validate_network(&net);
        for s in &self.stations {
            if !net.contains(s.node) {
                violations.push(Violation::StationOnMissingNode { station: s.id, node: s.node });
            }
        }
        if violations.is_empty() {
            Ok(net)
        } else {
            Err(NetworkError::Invalid(violations))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> TransportNetwork {
        let nodes = vec![NodeGeo::new(0, 0.0, 0.0), NodeGeo::new(1, 1000.0, 0.0), NodeGeo::new(2, 0.0, 1000.0)];
        let seg = |from, to| Segment { from, to, traffic: TrafficClass::Normal, distance: 0.6 };
        TransportNetwork::new(nodes, vec![seg(0, 1), seg(1, 2), seg(2, 0)])
    }

    #[test]
    fn distance_identity_and_disconnected() {
        let a = NodeGeo::new(0, 12.0, -4.0);
        assert_eq!(segment_distance(&a, &a, true), 0.0);
        assert!(segment_distance(&a, &NodeGeo::new(1, 0.0, 0.0), false).is_infinite());
    }

    #[test]
    fn distance_three_four_five() {
        let a = NodeGeo::new(0, 0.0, 0.0);
        let b = NodeGeo::new(1, 3000.0, 4000.0);
        // independent evaluation: 5000 m at 1609.344 m/mi is 3.10686 mi; the
        // fixed factor 6.2137e-4 gives 3.10685
        let d = segment_distance(&a, &b, true);
        assert!((d - 3.10685).abs() < 1e-12);
        assert!((d - 5000.0 / 1609.344).abs() < 2e-5);
    }

    #[test]
    fn literal_factor_is_available() {
        let a = NodeGeo::new(0, 0.0, 0.0);
        let b = NodeGeo::new(1, 3.0, 4.0);
        assert!((segment_distance_with(&a, &b, true, LITERAL_DISTANCE_FACTOR) - 310.685).abs() < 1e-9);
    }

    #[test]
    fn triangle_is_valid() {
        assert!(validate_network(&triangle()).is_empty());
    }

    #[test]
    fn dangling_endpoint_reported_once() {
        let net = triangle();
        let mut segs = net.segments().to_vec();
        segs.push(Segment { from: 0, to: 99, traffic: TrafficClass::Low, distance: 1.0 });
        let v = validate_network(&TransportNetwork::new(net.nodes().to_vec(), segs));
        assert_eq!(v, vec![Violation::DanglingEndpoint { segment: 3, node: 99 }]);
    }

    #[test]
    fn duplicate_id_reported_once() {
        let net = triangle();
        let mut nodes = net.nodes().to_vec();
        nodes.push(NodeGeo::new(1, 5.0, 5.0));
        let v = validate_network(&TransportNetwork::new(nodes, net.segments().to_vec()));
        assert_eq!(v, vec![Violation::DuplicateNodeId { id: 1 }]);
    }

    #[test]
    fn adjacency_matches_declared_segments() {
        let net = triangle();
        assert_eq!(net.outgoing(0), &[0]);
        assert_eq!(net.outgoing(1), &[1]);
        assert!(net.outgoing(42).is_empty());
    }

    const DOC: &str = r#"{
        "nodes": [{"id": 0, "lon_m": 0, "lat_m": 0}, {"id": 1, "lon_m": 3000, "lat_m": 4000}],
        "segments": [{"from": 0, "to": 1, "traffic": "heavy"}],
        "stations": [{"id": 7, "node": 1, "region": 2, "cpi_percent": 1.5}]
    }"#;

    #[test]
    fn document_computes_distance_on_load() {
        let net = NetworkDocument::parse(DOC).unwrap().build(MILES_PER_METER).unwrap();
        assert!((net.segment(0).distance - 3.10685).abs() < 1e-12);
        assert_eq!(net.segment(0).traffic, TrafficClass::Heavy);
        assert!(net.station_nodes().contains(&1));
    }

    #[test]
    fn document_rejects_unknown_fields() {
        let bad = DOC.replace("\"traffic\": \"heavy\"", "\"traffic\": \"heavy\", \"distance\": 3");
        assert!(matches!(NetworkDocument::parse(&bad), Err(NetworkError::Parse(_))));
    }

    #[test]
    fn document_rejects_self_loop() {
        let bad = DOC.replace("\"from\": 0, \"to\": 1", "\"from\": 1, \"to\": 1");
        let err = NetworkDocument::parse(&bad).unwrap().build(MILES_PER_METER).unwrap_err();
        match err {
            NetworkError::Invalid(v) => assert!(v.iter().any(|x| matches!(x, Violation::SelfLoop { .. }))),
            other => panic!("unexpected {other}"),
        }
    }
}
