//! Seeded synthetic road networks with clustered charging-station regions.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    segment_distance, NetworkDocument, NetworkError, NodeGeo, NodeId, NodeRecord, Segment, SegmentRecord,
    StationRecord, TrafficClass, TransportNetwork,
};
use crate::rng::{substream, Stream};

/// Probability of each traffic class for a generated segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficMix {
    pub heavy: f64,
    pub normal: f64,
    pub low: f64,
}

impl Default for TrafficMix {
    fn default() -> Self {
        Self { heavy: 0.2, normal: 0.5, low: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_nodes: usize,
    /// Number of two-way roads; each becomes two directed segments.
    pub n_roads: usize,
    pub n_stations: usize,
    pub n_regions: usize,
    #[serde(default)]
    pub traffic: TrafficMix,
    /// Side of the square service area in meters. Defaults to 1 km per
    /// square-root node.
    #[serde(default)]
    pub side_m: Option<f64>,
    /// Stations per region, in region order. Defaults to an even split.
    #[serde(default)]
    pub region_sizes: Option<Vec<usize>>,
}

impl SyntheticConfig {
    pub fn new(n_nodes: usize, n_roads: usize, n_stations: usize, n_regions: usize) -> Self {
        Self {
            n_nodes,
            n_roads,
            n_stations,
            n_regions,
            traffic: TrafficMix::default(),
            side_m: None,
            region_sizes: None,
        }
    }

    fn check(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::BadParameters(m));
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1".into());
        }
        if self.n_roads + 1 < self.n_nodes {
            return bad(format!("{} roads cannot connect {} nodes", self.n_roads, self.n_nodes));
        }
        let max_roads = self.n_nodes * (self.n_nodes - 1) / 2;
        if self.n_roads > max_roads {
            return bad(format!("at most {max_roads} distinct roads fit on {} nodes", self.n_nodes));
        }
        if self.n_stations > self.n_nodes {
            return bad(format!("{} stations exceed {} nodes", self.n_stations, self.n_nodes));
        }
        if self.n_regions == 0 {
            return bad("n_regions must be at least 1".into());
        }
        if self.n_stations > 0 && self.n_stations < self.n_regions {
            return bad(format!("{} stations cannot fill {} regions", self.n_stations, self.n_regions));
        }
        if let Some(sizes) = &self.region_sizes {
            if sizes.len() != self.n_regions || sizes.iter().sum::<usize>() != self.n_stations {
                return bad("region_sizes must have n_regions entries summing to n_stations".into());
            }
        }
        let t = self.traffic;
        if [t.heavy, t.normal, t.low].iter().any(|w| !(*w >= 0.0)) || t.heavy + t.normal + t.low <= 0.0 {
            return bad("traffic mix weights must be non-negative and not all zero".into());
        }
        if let Some(side) = self.side_m {
            if !(side > 0.0 && side.is_finite()) {
                return bad("side_m must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub network: TransportNetwork,
    /// Station placement; `cpi_percent` is left at zero for the caller to fill.
    pub stations: Vec<StationRecord>,
}

impl SyntheticNetwork {
    pub fn to_document(&self) -> NetworkDocument {
        NetworkDocument {
            nodes: self
                .network
                .nodes()
                .iter()
                .map(|n| NodeRecord { id: n.id, lon_m: n.lon_m, lat_m: n.lat_m })
                .collect(),
            segments: self
                .network
                .segments()
                .iter()
                .map(|s| SegmentRecord { from: s.from, to: s.to, traffic: s.traffic })
                .collect(),
            stations: self.stations.clone(),
        }
    }
}

/// Generates a weakly connected random road network.
///
/// Nodes are scattered uniformly over a square. A geometric spanning tree
/// (each node joins its nearest predecessor) guarantees connectivity, then the
/// shortest remaining node pairs are added until the road count is met. Every
/// road is emitted in both directions with independently drawn traffic.
/// Stations land on distinct random nodes and are split into angular sectors
/// around their centroid, one sector per region.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticNetwork, NetworkError> {
    cfg.check()?;
    let mut rng = substream(seed, Stream::Network);
    let n = cfg.n_nodes;
    let side = cfg.side_m.unwrap_or(1000.0 * (n as f64).sqrt());

    let nodes: Vec<NodeGeo> =
        (0..n).map(|id| NodeGeo::new(id, rng.gen::<f64>() * side, rng.gen::<f64>() * side)).collect();

    let mut roads: Vec<(NodeId, NodeId)> = Vec::with_capacity(cfg.n_roads);
    let mut present = HashSet::new();
    for i in 1..n {
        let j = (0..i)
            .min_by(|&a, &b| nodes[i].meters_to(&nodes[a]).total_cmp(&nodes[i].meters_to(&nodes[b])))
            .expect("i >= 1");
        roads.push((j, i));
        present.insert((j, i));
    }
    if roads.len() < cfg.n_roads {
        let mut pairs: Vec<(f64, NodeId, NodeId)> = (0..n)
            .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
            .filter(|p| !present.contains(p))
            .map(|(a, b)| (nodes[a].meters_to(&nodes[b]), a, b))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let need = cfg.n_roads - roads.len();
        roads.extend(pairs.into_iter().take(need).map(|(_, a, b)| (a, b)));
    }

    let t = cfg.traffic;
    let classes = [TrafficClass::Heavy, TrafficClass::Normal, TrafficClass::Low];
    let pick = WeightedIndex::new([t.heavy, t.normal, t.low]).expect("weights checked");
    let mut segments = Vec::with_capacity(2 * roads.len());
    for &(a, b) in &roads {
        let d = segment_distance(&nodes[a], &nodes[b], true);
        for (from, to) in [(a, b), (b, a)] {
            segments.push(Segment { from, to, traffic: classes[pick.sample(&mut rng)], distance: d });
        }
    }

    let mut hosts: Vec<NodeId> = rand::seq::index::sample(&mut rng, n, cfg.n_stations).into_vec();
    hosts.sort_unstable();
    let stations = assign_regions(&nodes, &hosts, cfg);

    let network = TransportNetwork::new(nodes, segments).with_station_nodes(stations.iter().map(|s| s.node));
    Ok(SyntheticNetwork { network, stations })
}

fn assign_regions(nodes: &[NodeGeo], hosts: &[NodeId], cfg: &SyntheticConfig) -> Vec<StationRecord> {
    if hosts.is_empty() {
        return Vec::new();
    }
    let k = hosts.len() as f64;
    let cx = hosts.iter().map(|&h| nodes[h].lon_m).sum::<f64>() / k;
    let cy = hosts.iter().map(|&h| nodes[h].lat_m).sum::<f64>() / k;
    let mut by_angle: Vec<(f64, NodeId)> =
        hosts.iter().map(|&h| ((nodes[h].lat_m - cy).atan2(nodes[h].lon_m - cx), h)).collect();
    by_angle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let sizes = cfg.region_sizes.clone().unwrap_or_else(|| {
        let (q, r) = (hosts.len() / cfg.n_regions, hosts.len() % cfg.n_regions);
        (0..cfg.n_regions).map(|i| q + usize::from(i < r)).collect()
    });
    let mut out = Vec::with_capacity(hosts.len());
    let mut it = by_angle.into_iter();
    for (ri, &size) in sizes.iter().enumerate() {
        for (_, node) in it.by_ref().take(size) {
            out.push(StationRecord { id: out.len(), node, region: ri as u32 + 1, cpi_percent: 0.0 });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport_graph::validate_network;

    #[test]
    fn spanning_tree_minimum() {
        let g = generate_synthetic(&SyntheticConfig::new(4, 3, 1, 1), 7).unwrap();
        assert_eq!(g.network.segments().len(), 6);
        assert!(g.network.is_weakly_connected());
        assert_eq!(g.stations.len(), 1);
    }

    #[test]
    fn shanghai_sized_network() {
        let mut cfg = SyntheticConfig::new(352, 615, 50, 6);
        cfg.region_sizes = Some(vec![7, 5, 8, 6, 8, 16]);
        let g = generate_synthetic(&cfg, 1).unwrap();
        assert_eq!(g.network.node_count(), 352);
        assert_eq!(g.network.segments().len(), 2 * 615);
        assert!(g.network.is_weakly_connected());
        assert!(validate_network(&g.network).is_empty());
        for (r, want) in [7, 5, 8, 6, 8, 16].into_iter().enumerate() {
            assert_eq!(g.stations.iter().filter(|s| s.region == r as u32 + 1).count(), want);
        }
        let hosts: HashSet<_> = g.stations.iter().map(|s| s.node).collect();
        assert_eq!(hosts.len(), 50);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SyntheticConfig::new(40, 70, 10, 3);
        let a = generate_synthetic(&cfg, 11).unwrap().to_document();
        let b = generate_synthetic(&cfg, 11).unwrap().to_document();
        let c = generate_synthetic(&cfg, 12).unwrap().to_document();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn traffic_mix_roughly_respected() {
        let g = generate_synthetic(&SyntheticConfig::new(200, 400, 0, 1), 3).unwrap();
        let heavy = g.network.segments().iter().filter(|s| s.traffic == TrafficClass::Heavy).count() as f64;
        let frac = heavy / g.network.segments().len() as f64;
        assert!((frac - 0.2).abs() < 0.05, "heavy fraction {frac}");
    }

    #[test]
    fn rejects_infeasible_counts() {
        assert!(generate_synthetic(&SyntheticConfig::new(10, 5, 1, 1), 0).is_err());
        assert!(generate_synthetic(&SyntheticConfig::new(4, 7, 1, 1), 0).is_err());
        assert!(generate_synthetic(&SyntheticConfig::new(4, 3, 5, 1), 0).is_err());
        assert!(generate_synthetic(&SyntheticConfig::new(4, 3, 1, 0), 0).is_err());
    }
}
