//! DC optimal power flow: grid case model and file format, susceptance
//! matrix, quadratic-cost dispatch and locational marginal prices.

mod opf;
pub mod qp;

pub use opf::{kkt_residuals, solve_dcopf, Binding, DcopfSolution, KktResiduals};

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type BusId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: BusId,
    /// Conventional demand before any EV charging, MW.
    #[serde(rename = "load_mw")]
    pub base_load_mw: f64,
    /// Charging region attached to this bus.
    #[serde(default)]
    pub region: Option<u32>,
    /// Vehicles the region's stations can serve per step; unlimited if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charging_capacity_evs: Option<usize>,
}

/// Quadratic cost `a + b P + c P²` in $/h with P in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: BusId,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub pmin: f64,
    pub pmax: f64,
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        self.a + self.b * p + self.c * p * p
    }

    pub fn marginal_cost(&self, p: f64) -> f64 {
        self.b + 2.0 * self.c * p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: BusId,
    pub to: BusId,
    /// MW per radian, system base folded in.
    pub susceptance: f64,
    pub fmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub lines: Vec<Line>,
    pub slack_bus: BusId,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid case is malformed: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("grid case is invalid: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("dispatch is infeasible: {0}")]
    Infeasible(String),
    #[error("optimality system is singular: {0}")]
    SingularKkt(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("extra load vector has {got} entries for {want} buses")]
    LoadShape { got: usize, want: usize },
}

const BUNDLED_IEEE9: &str = include_str!("../../assets/ieee9_modified.json");

impl GridCase {
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let case: GridCase = serde_json::from_str(text)?;
        case.validate()?;
        Ok(case)
    }

    /// Modified 9-bus system with the charging-region loads. Generator cost
    /// and limit data are the standard 9-bus values; line susceptances are
    /// 100 MVA / x.
    pub fn bundled_ieee9() -> Self {
        Self::parse(BUNDLED_IEEE9).expect("bundled case is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("grid case serializes")
    }

    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn base_loads(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.base_load_mw).collect()
    }

    /// Region index to bus position.
    pub fn region_buses(&self) -> BTreeMap<u32, usize> {
        self.buses.iter().enumerate().filter_map(|(i, b)| b.region.map(|r| (r, i))).collect()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let mut errs = Vec::new();
        let mut ids = HashSet::new();
        let mut regions = HashSet::new();
        for (i, b) in self.buses.iter().enumerate() {
            if !ids.insert(b.id) {
                errs.push(format!("buses[{i}]: duplicate id {}", b.id));
            }
            if !(b.base_load_mw >= 0.0 && b.base_load_mw.is_finite()) {
                errs.push(format!("buses[{i}]: load_mw {} must be non-negative", b.base_load_mw));
            }
            if let Some(r) = b.region {
                if !regions.insert(r) {
                    errs.push(format!("buses[{i}]: region {r} already attached to another bus"));
                }
            }
        }
        if !ids.contains(&self.slack_bus) {
            errs.push(format!("slack_bus: bus {} does not exist", self.slack_bus));
        }
        if self.generators.is_empty() {
            errs.push("generators: at least one generator is required".into());
        }
        for (i, g) in self.generators.iter().enumerate() {
            if !ids.contains(&g.bus) {
                errs.push(format!("generators[{i}]: bus {} does not exist", g.bus));
            }
            if !(g.pmin <= g.pmax) {
                errs.push(format!("generators[{i}]: pmin {} exceeds pmax {}", g.pmin, g.pmax));
            }
            if !(g.c >= 0.0) {
                errs.push(format!("generators[{i}]: c {} must be non-negative", g.c));
            }
            if ![g.a, g.b, g.c, g.pmin, g.pmax].iter().all(|v| v.is_finite()) {
                errs.push(format!("generators[{i}]: coefficients and limits must be finite"));
            }
        }
        for (i, l) in self.lines.iter().enumerate() {
            for end in [l.from, l.to] {
                if !ids.contains(&end) {
                    errs.push(format!("lines[{i}]: bus {end} does not exist"));
                }
            }
            if l.from == l.to {
                errs.push(format!("lines[{i}]: both ends on bus {}", l.from));
            }
            if !(l.susceptance > 0.0 && l.susceptance.is_finite()) {
                errs.push(format!("lines[{i}]: susceptance {} must be positive", l.susceptance));
            }
            if !(l.fmax > 0.0) {
                errs.push(format!("lines[{i}]: fmax {} must be positive", l.fmax));
            }
        }
        if errs.is_empty() && !self.is_connected() {
            errs.push("lines: network is not connected".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(GridError::Invalid(errs))
        }
    }

    fn is_connected(&self) -> bool {
        let idx = self.bus_index();
        let mut adj = vec![Vec::new(); self.buses.len()];
        for l in &self.lines {
            let (a, b) = (idx[&l.from], idx[&l.to]);
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![idx[&self.slack_bus]];
        seen[stack[0]] = true;
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

    pub fn objective(&self, dispatch: &[f64]) -> f64 {
        self.generators.iter().zip(dispatch).map(|(g, &p)| g.cost(p)).sum()
    }
}

/// DC susceptance matrix in bus order: `B·θ` gives net injections.
pub fn susceptance_matrix(case: &GridCase) -> DMatrix<f64> {
    let idx = case.bus_index();
    let n = case.buses.len();
    let mut b = DMatrix::zeros(n, n);
    for l in &case.lines {
        let (i, j) = (idx[&l.from], idx[&l.to]);
        b[(i, i)] += l.susceptance;
        b[(j, j)] += l.susceptance;
        b[(i, j)] -= l.susceptance;
        b[(j, i)] -= l.susceptance;
    }
    b
}
