use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::powertrain::{BatteryState, EfficiencyTable, EvAgent, PowertrainClass};
use crate::rng::{substream, Stream};
use crate::transport_graph::TransportNetwork;

/// Fleet share of PHEV20, PHEV40, PHEV60 and BEV100.
pub const DEFAULT_MIX: [f64; 4] = [0.16, 0.16, 0.16, 0.52];
pub const DEFAULT_SOC: [f64; 2] = [0.2, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub n_evs: usize,
    #[serde(default = "default_mix")]
    pub mix: [f64; 4],
    /// Initial state of charge range as a fraction of usable capacity.
    #[serde(default = "default_soc")]
    pub soc: [f64; 2],
}

fn default_mix() -> [f64; 4] {
    DEFAULT_MIX
}

fn default_soc() -> [f64; 2] {
    DEFAULT_SOC
}

impl FleetSpec {
    pub fn new(n_evs: usize) -> Self {
        Self { n_evs, mix: DEFAULT_MIX, soc: DEFAULT_SOC }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetDocument {
    pub evs: Vec<EvAgent>,
}

impl FleetDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Parse(format!("fleet file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fleet serializes")
    }
}

/// Vehicles per class by largest-remainder rounding; remainder ties go to the
/// earlier class.
pub fn class_counts(n: usize, mix: &[f64; 4]) -> Result<[usize; 4], CliError> {
    let sum: f64 = mix.iter().sum();
    if mix.iter().any(|m| !(*m >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(CliError::Validation(format!("fleet mix {mix:?} must be non-negative and sum to 1")));
    }
    let exact: Vec<f64> = mix.iter().map(|m| m * n as f64).collect();
    let mut counts = [0usize; 4];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &k in order.iter().take(short) {
        counts[k] += 1;
    }
    Ok(counts)
}

/// Seeded fleet: class counts by mix, uniform distinct origin/destination
/// pairs, uniform initial charge.
pub fn generate_fleet(
    spec: &FleetSpec,
    net: &TransportNetwork,
    table: &EfficiencyTable,
    seed: u64,
) -> Result<Vec<EvAgent>, CliError> {
    let counts = class_counts(spec.n_evs, &spec.mix)?;
    let [lo, hi] = spec.soc;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(CliError::Validation(format!("soc range [{lo}, {hi}] must lie within [0, 1]")));
    }
    if spec.n_evs == 0 {
        return Ok(Vec::new());
    }
    let nodes: Vec<usize> = net.nodes().iter().map(|n| n.id).collect();
    if nodes.len() < 2 {
        return Err(CliError::Validation("a fleet needs a network with at least two nodes".into()));
    }
    let mut rng = substream(seed, Stream::Fleet);
    let mut classes: Vec<PowertrainClass> =
        PowertrainClass::ALL.iter().zip(counts).flat_map(|(&c, k)| std::iter::repeat_n(c, k)).collect();
    classes.shuffle(&mut rng);
    Ok(classes
        .into_iter()
        .enumerate()
        .map(|(id, class)| {
            let o = rng.gen_range(0..nodes.len());
            let d = (o + rng.gen_range(1..nodes.len())) % nodes.len();
            let soc = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
            let cap = table.usable_capacity(class);
            EvAgent {
                id,
                class,
                battery: BatteryState::new(cap, soc * cap).expect("soc within [0, 1]"),
                origin: nodes[o],
                destination: nodes[d],
            }
        })
        .collect())
}
