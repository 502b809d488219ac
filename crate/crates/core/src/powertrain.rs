//! Vehicle classes, drive-cycle efficiencies, per-segment travel cost and
//! battery bookkeeping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transport_graph::{NodeId, Segment};

/// Slack used when comparing stored energy against a segment's requirement,
/// so that a battery filled to exactly `d / mu` is not rejected by rounding.
pub const ENERGY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PowertrainClass {
    #[serde(rename = "PHEV20")]
    Phev20,
    #[serde(rename = "PHEV40")]
    Phev40,
    #[serde(rename = "PHEV60")]
    Phev60,
    #[serde(rename = "BEV100")]
    Bev100,
}

impl PowertrainClass {
    pub const ALL: [PowertrainClass; 4] =
        [PowertrainClass::Phev20, PowertrainClass::Phev40, PowertrainClass::Phev60, PowertrainClass::Bev100];

    /// All-electric range in miles.
    pub fn rated_range(self) -> f64 {
        match self {
            PowertrainClass::Phev20 => 20.0,
            PowertrainClass::Phev40 => 40.0,
            PowertrainClass::Phev60 => 60.0,
            PowertrainClass::Bev100 => 100.0,
        }
    }

    pub fn is_bev(self) -> bool {
        matches!(self, PowertrainClass::Bev100)
    }

    fn row(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PowertrainClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowertrainClass::Phev20 => "PHEV20",
            PowertrainClass::Phev40 => "PHEV40",
            PowertrainClass::Phev60 => "PHEV60",
            PowertrainClass::Bev100 => "BEV100",
        })
    }
}

impl FromStr for PowertrainClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "PHEV20" => Ok(PowertrainClass::Phev20),
            "PHEV40" => Ok(PowertrainClass::Phev40),
            "PHEV60" => Ok(PowertrainClass::Phev60),
            "BEV100" => Ok(PowertrainClass::Bev100),
            other => Err(format!("unknown powertrain class {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriveCycle {
    Hwfet,
    Udds,
    Nyc,
}

impl DriveCycle {
    pub const ALL: [DriveCycle; 3] = [DriveCycle::Hwfet, DriveCycle::Udds, DriveCycle::Nyc];

    fn col(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Battery powered.
    ChargeDepleting,
    /// Gasoline powered.
    ChargeSustaining,
}

#[derive(Debug, Error, PartialEq)]
pub enum PowertrainError {
    #[error("{0} has no charge-sustaining mode")]
    NoChargeSustaining(PowertrainClass),
    #[error("{class} needs {needed:.6} kWh for a {distance:.4} mi segment but holds {held:.6} kWh")]
    InsufficientEnergy { class: PowertrainClass, distance: f64, needed: f64, held: f64 },
    #[error("efficiency table entry {0} must be strictly positive")]
    BadTable(String),
}

/// Drive-cycle efficiencies per class: columns are HWFET, UDDS, NYC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyTable {
    pub version: String,
    /// mi/kWh in charge-depleting mode, rows PHEV20, PHEV40, PHEV60, BEV100.
    pub mu_cd: [[f64; 3]; 4],
    /// mi/gal in charge-sustaining mode; `None` for battery-only vehicles.
    pub mu_cs: [Option<[f64; 3]>; 4],
}

impl Default for EfficiencyTable {
    fn default() -> Self {
        Self {
            version: "drive-cycle-efficiencies/1".into(),
            mu_cd: [[5.7, 6.2, 4.2], [5.7, 6.0, 4.1], [5.6, 5.7, 3.8], [4.8, 5.2, 3.1]],
            mu_cs: [Some([58.6, 69.4, 45.7]), Some([58.2, 68.0, 43.1]), Some([57.8, 65.8, 40.3]), None],
        }
    }
}

impl EfficiencyTable {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn validate(&self) -> Result<(), PowertrainError> {
        for class in PowertrainClass::ALL {
            for cycle in DriveCycle::ALL {
                let cd = self.mu_cd[class.row()][cycle.col()];
                if !(cd > 0.0 && cd.is_finite()) {
                    return Err(PowertrainError::BadTable(format!("{class} CD {cycle:?}")));
                }
                match (class.is_bev(), self.mu_cs[class.row()]) {
                    (true, Some(_)) => return Err(PowertrainError::BadTable(format!("{class} CS must be absent"))),
                    (false, None) => return Err(PowertrainError::BadTable(format!("{class} CS missing"))),
                    (false, Some(cs)) if !(cs[cycle.col()] > 0.0 && cs[cycle.col()].is_finite()) => {
                        return Err(PowertrainError::BadTable(format!("{class} CS {cycle:?}")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// mi/kWh for charge-depleting, mi/gal for charge-sustaining.
    pub fn efficiency(&self, class: PowertrainClass, mode: Mode, cycle: DriveCycle) -> Result<f64, PowertrainError> {
        match mode {
            Mode::ChargeDepleting => Ok(self.mu_cd[class.row()][cycle.col()]),
            Mode::ChargeSustaining => {
                self.mu_cs[class.row()].map(|r| r[cycle.col()]).ok_or(PowertrainError::NoChargeSustaining(class))
            }
        }
    }

    pub fn mu_cd(&self, class: PowertrainClass, cycle: DriveCycle) -> f64 {
        self.mu_cd[class.row()][cycle.col()]
    }

    /// Usable battery energy implied by the rated range at `cycle` efficiency.
    pub fn usable_capacity_at(&self, class: PowertrainClass, cycle: DriveCycle) -> f64 {
        class.rated_range() / self.mu_cd(class, cycle)
    }

    /// Usable battery energy in kWh, sized on the UDDS cycle.
    pub fn usable_capacity(&self, class: PowertrainClass) -> f64 {
        self.usable_capacity_at(class, DriveCycle::Udds)
    }

    /// Battery energy consumed on `seg` in charge-depleting mode.
    pub fn segment_energy(&self, class: PowertrainClass, seg: &Segment) -> f64 {
        seg.distance / self.mu_cd(class, seg.traffic.cycle())
    }

    /// Monetary cost of driving `seg` when entering it with `entry_energy` kWh.
    ///
    /// A PHEV runs on electricity until the battery is empty and covers the
    /// rest of the segment on gasoline. A BEV must hold enough energy for the
    /// whole segment; callers route BEVs through charging otherwise.
    pub fn segment_cost(
        &self,
        class: PowertrainClass,
        entry_energy: f64,
        seg: &Segment,
        prices: &EnergyPrices,
    ) -> Result<f64, PowertrainError> {
        let cycle = seg.traffic.cycle();
        let mu_cd = self.mu_cd(class, cycle);
        let need = seg.distance / mu_cd;
        if class.is_bev() {
            if entry_energy + ENERGY_EPS < need {
                return Err(PowertrainError::InsufficientEnergy {
                    class,
                    distance: seg.distance,
                    needed: need,
                    held: entry_energy,
                });
            }
            return Ok(prices.p_ele * need);
        }
        let mu_cs = self.efficiency(class, Mode::ChargeSustaining, cycle)?;
        Ok(if entry_energy <= 0.0 {
            prices.p_gas * seg.distance / mu_cs
        } else if entry_energy >= need {
            prices.p_ele * need
        } else {
            prices.p_ele * entry_energy + prices.p_gas * (seg.distance - mu_cd * entry_energy) / mu_cs
        })
    }

    /// Battery energy left on leaving `seg`; floors at zero where a PHEV
    /// switches to gasoline.
    pub fn energy_after(&self, class: PowertrainClass, entry_energy: f64, seg: &Segment) -> f64 {
        (entry_energy - self.segment_energy(class, seg)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// Usable capacity, kWh.
    pub capacity: f64,
    /// Currently available energy, kWh.
    pub energy: f64,
}

impl BatteryState {
    pub fn new(capacity: f64, energy: f64) -> Option<Self> {
        (capacity >= 0.0 && (0.0..=capacity).contains(&energy)).then_some(Self { capacity, energy })
    }

    pub fn soc(&self) -> f64 {
        if self.capacity > 0.0 {
            self.energy / self.capacity
        } else {
            0.0
        }
    }
}

/// Unit energy prices seen by a vehicle: $/kWh and $/gal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPrices {
    pub p_ele: f64,
    pub p_gas: f64,
}

pub const DEFAULT_GAS_PRICE: f64 = 2.93;

impl Default for EnergyPrices {
    fn default() -> Self {
        Self { p_ele: 0.05, p_gas: DEFAULT_GAS_PRICE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvAgent {
    pub id: usize,
    pub class: PowertrainClass,
    pub battery: BatteryState,
    pub origin: NodeId,
    pub destination: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargePolicy {
    #[default]
    FillToFull,
    FillToNeed,
}

/// Energy to buy at a charging stop.
pub fn required_charge(battery: &BatteryState, policy: ChargePolicy, remaining_trip_energy: f64) -> f64 {
    let headroom = (battery.capacity - battery.energy).max(0.0);
    match policy {
        ChargePolicy::FillToFull => headroom,
        ChargePolicy::FillToNeed => headroom.min((remaining_trip_energy - battery.energy).max(0.0)),
    }
}
