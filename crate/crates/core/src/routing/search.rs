use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::RoutingError;
use crate::powertrain::{EfficiencyTable, EnergyPrices, PowertrainClass, ENERGY_EPS};
use crate::transport_graph::{NodeId, TransportNetwork};

/// Node sequence with its travel cost and the battery energy left on arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<NodeId>,
    /// Segment indices into the network, one per hop.
    pub segments: Vec<usize>,
    pub start_energy: f64,
    pub total_cost: f64,
    pub arrival_energy: f64,
}

impl Route {
    pub fn hops(&self) -> usize {
        self.segments.len()
    }

    pub fn distance(&self, net: &TransportNetwork) -> f64 {
        self.segments.iter().map(|&s| net.segment(s).distance).sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Label {
    cost: f64,
    hops: usize,
    energy: f64,
    pred: Option<(usize, usize)>,
}

#[derive(Debug, PartialEq)]
struct QueueEntry {
    cost: f64,
    hops: usize,
    node: NodeId,
    pos: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    // reversed so BinaryHeap pops the smallest (cost, hops, node id)
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then(other.hops.cmp(&self.hops)).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Least-cost route from `start` to `goal` for one powertrain class.
///
/// Dijkstra-style label setting keyed on cumulative cost; every settled label
/// carries the battery energy left along its tree path, which prices the
/// next segment. Ties go to fewer hops, then to the lower predecessor id.
/// BEVs never relax a segment they cannot complete. Returns `Ok(None)` when
/// the goal is unreachable under those rules.
///
/// For BEVs, and for PHEVs that stay in one mode for the whole search, the
/// result is the exact minimum. When a PHEV blends electricity and gasoline
/// the cost of a segment depends on the path taken so far and the result is
/// an upper bound on the true optimum.
#[allow(clippy::too_many_arguments)]
pub fn least_cost_path(
    net: &TransportNetwork,
    table: &EfficiencyTable,
    class: PowertrainClass,
    start: NodeId,
    goal: NodeId,
    start_energy: f64,
    prices: &EnergyPrices,
) -> Result<Option<Route>, RoutingError> {
    let s = net.position(start).ok_or(RoutingError::UnknownNode(start))?;
    let g = net.position(goal).ok_or(RoutingError::UnknownNode(goal))?;
    let n = net.node_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    labels[s] = Some(Label { cost: 0.0, hops: 0, energy: start_energy, pred: None });
    heap.push(QueueEntry { cost: 0.0, hops: 0, node: start, pos: s });

    while let Some(QueueEntry { cost, hops, node, pos }) = heap.pop() {
        if settled[pos] {
            continue;
        }
        let label = labels[pos].expect("queued nodes are labelled");
        if label.cost != cost || label.hops != hops {
            continue;
        }
        settled[pos] = true;
        if pos == g {
            break;
        }
        for &si in net.outgoing(node) {
            let seg = net.segment(si);
            let v = net.position(seg.to).expect("adjacency only holds known nodes");
            if settled[v] {
                continue;
            }
            if class.is_bev() && label.energy + ENERGY_EPS < table.segment_energy(class, seg) {
                continue;
            }
            let step = table.segment_cost(class, label.energy, seg, prices)?;
            let cand = Label {
                cost: label.cost + step,
                hops: label.hops + 1,
                energy: table.energy_after(class, label.energy, seg),
                pred: Some((pos, si)),
            };
            let better = match labels[v] {
                None => true,
                Some(cur) => {
                    let cur_pred = cur.pred.map(|(p, _)| net.nodes()[p].id);
                    cand.cost.total_cmp(&cur.cost).then(cand.hops.cmp(&cur.hops)).then(Some(node).cmp(&cur_pred))
                        == Ordering::Less
                }
            };
            if better {
                labels[v] = Some(cand);
                heap.push(QueueEntry { cost: cand.cost, hops: cand.hops, node: seg.to, pos: v });
            }
        }
    }

    if !settled[g] {
        return Ok(None);
    }
    let end = labels[g].expect("settled goal has a label");
    let mut nodes = vec![goal];
    let mut segments = Vec::with_capacity(end.hops);
    let mut cur = end;
    while let Some((p, si)) = cur.pred {
        segments.push(si);
        nodes.push(net.nodes()[p].id);
        cur = labels[p].expect("predecessor is labelled");
    }
    nodes.reverse();
    segments.reverse();
    Ok(Some(Route { nodes, segments, start_energy, total_cost: end.cost, arrival_energy: end.energy }))
}

/// Cost of driving `segments` in order from `start_energy`, with the energy
/// left at each node (first entry is `start_energy`).
pub fn fold_path_cost(
    net: &TransportNetwork,
    table: &EfficiencyTable,
    class: PowertrainClass,
    segments: &[usize],
    start_energy: f64,
    prices: &EnergyPrices,
) -> Result<(f64, Vec<f64>), RoutingError> {
    let mut energy = start_energy;
    let mut trace = Vec::with_capacity(segments.len() + 1);
    trace.push(energy);
    let mut cost = 0.0;
    for &si in segments {
        let seg = net.segment(si);
        cost += table.segment_cost(class, energy, seg, prices)?;
        energy = table.energy_after(class, energy, seg);
        trace.push(energy);
    }
    Ok((cost, trace))
}

/// First node on the route from which the battery cannot cover the next
/// segment, i.e. where the vehicle runs dry before reaching the destination.
pub fn depletion_node(
    net: &TransportNetwork,
    table: &EfficiencyTable,
    class: PowertrainClass,
    route: &Route,
) -> Option<NodeId> {
    let mut energy = route.start_energy;
    for (k, &si) in route.segments.iter().enumerate() {
        let seg = net.segment(si);
        if energy + ENERGY_EPS < table.segment_energy(class, seg) {
            return Some(route.nodes[k]);
        }
        energy = table.energy_after(class, energy, seg);
    }
    None
}
