//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the routing search, the QP solver or the station
//! search; the oracles restate the cost rules and enumerate.

#![allow(dead_code)]

use rand::Rng;

use gridlink::power_grid::{Bus, Generator, GridCase, Line};
use gridlink::powertrain::PowertrainClass;
use gridlink::stations::ChargingStation;
use gridlink::transport_graph::{NodeGeo, Segment, TrafficClass, TransportNetwork, MILES_PER_METER};

// columns: HWFET (low traffic), UDDS (normal), NYC (heavy)
const MU_CD: [[f64; 3]; 4] = [[5.7, 6.2, 4.2], [5.7, 6.0, 4.1], [5.6, 5.7, 3.8], [4.8, 5.2, 3.1]];
const MU_CS: [[f64; 3]; 3] = [[58.6, 69.4, 45.7], [58.2, 68.0, 43.1], [57.8, 65.8, 40.3]];
pub const ENERGY_TOLERANCE: f64 = 1e-12;

fn class_row(c: PowertrainClass) -> usize {
    match c {
        PowertrainClass::Phev20 => 0,
        PowertrainClass::Phev40 => 1,
        PowertrainClass::Phev60 => 2,
        PowertrainClass::Bev100 => 3,
    }
}

fn traffic_col(t: TrafficClass) -> usize {
    match t {
        TrafficClass::Low => 0,
        TrafficClass::Normal => 1,
        TrafficClass::Heavy => 2,
    }
}

pub fn mu_cd(c: PowertrainClass, t: TrafficClass) -> f64 {
    MU_CD[class_row(c)][traffic_col(t)]
}

pub fn mu_cs(c: PowertrainClass, t: TrafficClass) -> f64 {
    MU_CS[class_row(c)][traffic_col(t)]
}

/// Segment cost by the three-case rule; `None` when a BEV cannot finish it.
pub fn oracle_cost(c: PowertrainClass, t: TrafficClass, d: f64, e: f64, p_ele: f64, p_gas: f64) -> Option<f64> {
    let need = d / mu_cd(c, t);
    if c == PowertrainClass::Bev100 {
        return (e + ENERGY_TOLERANCE >= need).then_some(p_ele * need);
    }
    Some(if e <= 0.0 {
        p_gas * d / mu_cs(c, t)
    } else if e >= need {
        p_ele * need
    } else {
        p_ele * e + p_gas * (d - mu_cd(c, t) * e) / mu_cs(c, t)
    })
}

pub fn oracle_energy_after(c: PowertrainClass, t: TrafficClass, d: f64, e: f64) -> f64 {
    (e - d / mu_cd(c, t)).max(0.0)
}

/// Cost of driving the segment list in order from `e0`, or `None` if a BEV
/// runs dry.
pub fn fold_cost(
    net: &TransportNetwork,
    c: PowertrainClass,
    segs: &[usize],
    e0: f64,
    p_ele: f64,
    p_gas: f64,
) -> Option<f64> {
    let mut e = e0;
    let mut cost = 0.0;
    for &s in segs {
        let seg = net.segment(s);
        cost += oracle_cost(c, seg.traffic, seg.distance, e, p_ele, p_gas)?;
        e = oracle_energy_after(c, seg.traffic, seg.distance, e);
    }
    Some(cost)
}

/// Minimum over every simple path by depth-first enumeration, with the
/// segment list of one minimizer. Segment costs are non-negative, so partial
/// paths already above the best complete one are cut.
pub fn enumerate_min(
    net: &TransportNetwork,
    c: PowertrainClass,
    start: usize,
    goal: usize,
    e0: f64,
    p_ele: f64,
    p_gas: f64,
) -> Option<(f64, Vec<usize>)> {
    struct Walk<'a> {
        net: &'a TransportNetwork,
        c: PowertrainClass,
        goal: usize,
        p: (f64, f64),
        on_path: Vec<bool>,
        segs: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
    }
    impl Walk<'_> {
        fn go(&mut self, node: usize, e: f64, cost: f64) {
            if self.best.as_ref().is_some_and(|(b, _)| cost > *b) {
                return;
            }
            if node == self.goal {
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.segs.clone()));
                }
                return;
            }
            for (i, seg) in self.net.segments().iter().enumerate() {
                if seg.from != node || self.on_path[seg.to] {
                    continue;
                }
                let Some(step) = oracle_cost(self.c, seg.traffic, seg.distance, e, self.p.0, self.p.1) else {
                    continue;
                };
                let after = oracle_energy_after(self.c, seg.traffic, seg.distance, e);
                self.on_path[seg.to] = true;
                self.segs.push(i);
                self.go(seg.to, after, cost + step);
                self.segs.pop();
                self.on_path[seg.to] = false;
            }
        }
    }
    let mut w =
        Walk { net, c, goal, p: (p_ele, p_gas), on_path: vec![false; net.node_count()], segs: Vec::new(), best: None };
    w.on_path[start] = true;
    w.go(start, e0, 0.0);
    w.best
}

/// Random directed road graph on nodes `0..n` in a 20 km square.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, density: f64) -> TransportNetwork {
    let nodes: Vec<NodeGeo> =
        (0..n).map(|i| NodeGeo::new(i, rng.gen_range(0.0..20_000.0), rng.gen_range(0.0..20_000.0))).collect();
    let mut segs = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                let dx = nodes[a].lon_m - nodes[b].lon_m;
                let dy = nodes[a].lat_m - nodes[b].lat_m;
                let traffic = [TrafficClass::Low, TrafficClass::Normal, TrafficClass::Heavy][rng.gen_range(0..3)];
                segs.push(Segment { from: a, to: b, traffic, distance: MILES_PER_METER * (dx * dx + dy * dy).sqrt() });
            }
        }
    }
    TransportNetwork::new(nodes, segs)
}

/// Closest station by scanning all of them; ties to the lower id.
pub fn linear_scan_nearest(
    net: &TransportNetwork,
    anchor: usize,
    stations: &[ChargingStation],
) -> Option<(usize, f64)> {
    let a = net.node(anchor)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in stations.iter().enumerate() {
        let g = net.node(s.node)?;
        let d = ((a.lon_m - g.lon_m).powi(2) + (a.lat_m - g.lat_m).powi(2)).sqrt();
        let better = match best {
            None => true,
            Some((j, bd)) => d < bd || (d == bd && s.id < stations[j].id),
        };
        if better {
            best = Some((i, d));
        }
    }
    best
}

/// Three buses on a triangle, generators at buses 1 and 2, load everywhere.
pub fn random_three_bus<R: Rng>(rng: &mut R) -> GridCase {
    let loads = [rng.gen_range(0.0..60.0), rng.gen_range(10.0..90.0), rng.gen_range(20.0..120.0)];
    let total: f64 = loads.iter().sum();
    let gen = |rng: &mut R, bus| {
        let pmin = rng.gen_range(0.0..15.0);
        Generator {
            bus,
            a: rng.gen_range(0.0..200.0),
            b: rng.gen_range(5.0..40.0),
            c: rng.gen_range(0.005..0.12),
            pmin,
            pmax: pmin + rng.gen_range(0.4..1.2) * total,
        }
    };
    let g1 = gen(rng, 1);
    let g2 = gen(rng, 2);
    let mut line =
        |from, to| Line { from, to, susceptance: rng.gen_range(5.0..50.0), fmax: rng.gen_range(0.15..1.0) * total };
    let lines = vec![line(1, 2), line(2, 3), line(1, 3)];
    GridCase {
        name: None,
        buses: (1..=3)
            .map(|i| Bus { id: i, base_load_mw: loads[i - 1], region: None, charging_capacity_evs: None })
            .collect(),
        generators: vec![g1, g2],
        lines,
        slack_bus: 1,
    }
}

/// Flows on lines (1,2), (2,3), (1,3) for the given dispatch, solved from
/// the two non-slack angles.
pub fn three_bus_flows(case: &GridCase, p1: f64, p2: f64) -> [f64; 3] {
    let (b12, b23, b13) = (case.lines[0].susceptance, case.lines[1].susceptance, case.lines[2].susceptance);
    let d = |i: usize| case.buses[i].base_load_mw;
    let (inj2, inj3) = (p2 - d(1), -d(2));
    let _ = p1;
    // [b12+b23, -b23; -b23, b13+b23] [t2; t3] = [inj2; inj3]
    let (a, bb, c) = (b12 + b23, -b23, b13 + b23);
    let det = a * c - bb * bb;
    let t2 = (c * inj2 - bb * inj3) / det;
    let t3 = (a * inj3 - bb * inj2) / det;
    [-b12 * t2, b23 * (t2 - t3), -b13 * t3]
}

/// Best objective over a 0.01 MW grid of the first generator's output; the
/// second generator covers the rest of the load.
pub fn grid_search_three_bus(case: &GridCase) -> Option<(f64, f64)> {
    let total: f64 = case.buses.iter().map(|b| b.base_load_mw).sum();
    let (g1, g2) = (&case.generators[0], &case.generators[1]);
    let steps = ((g1.pmax - g1.pmin) / 0.01).floor() as usize;
    let mut best: Option<(f64, f64)> = None;
    for k in 0..=steps {
        let p1 = g1.pmin + 0.01 * k as f64;
        let p2 = total - p1;
        if p2 < g2.pmin - 1e-9 || p2 > g2.pmax + 1e-9 {
            continue;
        }
        let flows = three_bus_flows(case, p1, p2);
        if flows.iter().zip(&case.lines).any(|(f, l)| f.abs() > l.fmax + 1e-9) {
            continue;
        }
        let cost = g1.a + g1.b * p1 + g1.c * p1 * p1 + g2.a + g2.b * p2 + g2.c * p2 * p2;
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, p1));
        }
    }
    best
}
