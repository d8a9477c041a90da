//! Problem data for the two-stage design model and its MILP encodings.

mod formulate;
mod model;
mod mps;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use formulate::{formulate, formulate_second_stage, DesignSolution, VarKey, VarMap};
pub use model::{Constraint, MilpModel, RowId, Sense, VarId, VarKind, Variable};
pub use mps::{parse_mps, write_mps};

use crate::demand::{price_commodities, Commodity, Scenario, ScenarioSet};
use crate::error::{Error, Result};
use crate::network::{build_time_space_network, PhysicalNetwork, TimeGrid, TimeSpaceNetwork};
use crate::services::{
    apply_overrides, cycle_layout, enumerate_services, Consistency, HosPolicy, Service, ServiceCatalog, ServiceOverride,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaulerOption {
    /// Vehicles carried by one hauler.
    pub size: u32,
    pub hourly_rate: f64,
}

/// How the outsourcing price of a commodity depends on its volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutsourcingMode {
    /// rate x miles x volume
    #[default]
    PerVehicle,
    /// rate x miles, whatever the volume
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostParams {
    pub driver_hourly: f64,
    pub tractor_hourly: f64,
    pub hauler_rates: Vec<HaulerOption>,
    pub outsource_per_vehicle_mile: f64,
    pub consistency_discount: f64,
    pub avg_mph: f64,
    pub default_capacity: u32,
    pub outsourcing: OutsourcingMode,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            driver_hourly: 29.0,
            tractor_hourly: 18.0,
            hauler_rates: vec![
                HaulerOption {
                    size: 8,
                    hourly_rate: 10.0,
                },
                HaulerOption {
                    size: 4,
                    hourly_rate: 5.0,
                },
            ],
            outsource_per_vehicle_mile: 0.93,
            consistency_discount: 0.8,
            avg_mph: 50.0,
            default_capacity: 10,
            outsourcing: OutsourcingMode::PerVehicle,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("driver_hourly", self.driver_hourly),
            ("tractor_hourly", self.tractor_hourly),
            ("outsource_per_vehicle_mile", self.outsource_per_vehicle_mile),
            ("avg_mph", self.avg_mph),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.avg_mph <= 0.0 {
            return Err(Error::Validation("avg_mph must be > 0".into()));
        }
        if !(self.consistency_discount > 0.0 && self.consistency_discount <= 1.0) {
            return Err(Error::Validation(format!(
                "consistency_discount must lie in (0, 1], got {}",
                self.consistency_discount
            )));
        }
        let mut sizes = std::collections::BTreeSet::new();
        for h in &self.hauler_rates {
            if h.size == 0 || !(h.hourly_rate.is_finite() && h.hourly_rate >= 0.0) {
                return Err(Error::Validation(format!("bad hauler option {h:?}")));
            }
            if !sizes.insert(h.size) {
                return Err(Error::Validation(format!("hauler size {} listed twice", h.size)));
            }
        }
        Ok(())
    }

    pub fn hauler_rate(&self, size: u32) -> Option<f64> {
        self.hauler_rates
            .iter()
            .find(|h| h.size == size)
            .map(|h| h.hourly_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    #[default]
    FluMcp,
    FluScp,
    Hs,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::FluMcp, Pattern::FluScp, Pattern::Hs];

    pub fn is_flu(self) -> bool {
        !matches!(self, Pattern::Hs)
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::FluMcp => "flu-mcp",
            Pattern::FluScp => "flu-scp",
            Pattern::Hs => "hs",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "flu-mcp" | "mcp" => Ok(Pattern::FluMcp),
            "flu-scp" | "scp" => Ok(Pattern::FluScp),
            "hs" => Ok(Pattern::Hs),
            other => Err(Error::Usage(format!(
                "unknown pattern {other:?} (expected flu-mcp, flu-scp or hs)"
            ))),
        }
    }
}

/// Everything the formulation needs: network, candidate services, demand,
/// prices and the operating regime.
#[derive(Debug, Clone)]
pub struct Instance {
    pub pnet: PhysicalNetwork,
    pub tsn: TimeSpaceNetwork,
    pub hos: HosPolicy,
    pub catalog: ServiceCatalog,
    pub commodities: Vec<Commodity>,
    pub scenarios: ScenarioSet,
    pub costs: CostParams,
    /// Hauler sizes available (the set U).
    pub haulers: Vec<u32>,
    pub pattern: Pattern,
    pub consistency: Consistency,
    pub overrides: Vec<ServiceOverride>,
}

impl Instance {
    /// Builds the time-space network, enumerates services and prices
    /// commodities.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pnet: PhysicalNetwork,
        grid: TimeGrid,
        hos: HosPolicy,
        commodities: Vec<Commodity>,
        scenarios: ScenarioSet,
        costs: CostParams,
        haulers: Vec<u32>,
        pattern: Pattern,
        consistency: Consistency,
    ) -> Result<Self> {
        grid.validate()?;
        hos.validate()?;
        costs.validate()?;
        let tsn = build_time_space_network(&pnet, grid)?;
        let catalog = enumerate_services(&tsn, &pnet, &hos, &costs, consistency);
        let mut inst = Self {
            pnet,
            tsn,
            hos,
            catalog,
            commodities,
            scenarios,
            costs,
            haulers,
            pattern,
            consistency,
            overrides: Vec::new(),
        };
        inst.haulers.sort_unstable();
        inst.haulers.dedup();
        price_commodities(&mut inst.commodities, &inst.pnet, inst.costs.outsource_per_vehicle_mile)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        self.costs.validate()?;
        let grid = self.tsn.grid();
        for (i, k) in self.commodities.iter().enumerate() {
            if k.id != i {
                return Err(Error::InvalidRow {
                    what: "commodity",
                    row: i,
                    reason: format!("ids must be dense, found {}", k.id),
                });
            }
            k.validate(self.pnet.num_hubs(), grid)?;
        }
        self.scenarios.validate(self.commodities.len())?;
        if self.haulers.is_empty() {
            return Err(Error::Validation("hauler size set is empty".into()));
        }
        for &u in &self.haulers {
            if self.costs.hauler_rate(u).is_none() {
                return Err(Error::Validation(format!("no rental rate for hauler size {u}")));
            }
        }
        Ok(())
    }

    pub fn with_pattern(&self, pattern: Pattern) -> Self {
        Self {
            pattern,
            ..self.clone()
        }
    }

    /// Switches consistency regime; services are re-enumerated because cycle
    /// identity and fees depend on it. Overrides keep pointing at the same
    /// absolute start steps.
    pub fn with_consistency(&self, consistency: Consistency) -> Result<Self> {
        let mut inst = self.clone();
        let (old_len, _) = cycle_layout(self.grid(), self.consistency);
        let (new_len, _) = cycle_layout(self.grid(), consistency);
        for o in &mut inst.overrides {
            let start = o.cycle * old_len + o.start_in_cycle;
            o.cycle = start / new_len;
            o.start_in_cycle = start % new_len;
        }
        inst.consistency = consistency;
        inst.reenumerate()?;
        Ok(inst)
    }

    pub fn with_scenarios(&self, scenarios: ScenarioSet) -> Result<Self> {
        let inst = Self {
            scenarios,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_haulers(&self, mut haulers: Vec<u32>) -> Result<Self> {
        haulers.sort_unstable();
        haulers.dedup();
        let inst = Self {
            haulers,
            ..self.clone()
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Replaces prices; fees, capacities and outsourcing prices are refreshed.
    pub fn with_costs(&self, costs: CostParams) -> Result<Self> {
        costs.validate()?;
        let mut inst = self.clone();
        inst.costs = costs;
        price_commodities(&mut inst.commodities, &inst.pnet, inst.costs.outsource_per_vehicle_mile)?;
        inst.reenumerate()?;
        Ok(inst)
    }

    pub fn with_overrides(&self, overrides: Vec<ServiceOverride>) -> Result<Self> {
        let mut inst = self.clone();
        inst.overrides = overrides;
        inst.reenumerate()?;
        Ok(inst)
    }

    fn reenumerate(&mut self) -> Result<()> {
        let base = enumerate_services(&self.tsn, &self.pnet, &self.hos, &self.costs, self.consistency);
        self.catalog = apply_overrides(&base, &self.tsn, &self.overrides)?;
        self.validate()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.tsn.grid()
    }

    /// Outsourcing price of commodity `k` in scenario `w`.
    pub fn outsourcing_cost(&self, k: usize, w: &Scenario) -> f64 {
        let c = &self.commodities[k];
        match self.costs.outsourcing {
            OutsourcingMode::PerVehicle => c.outsource_cost_per_vehicle * w.volumes[k],
            OutsourcingMode::Fixed => c.outsource_cost_per_vehicle,
        }
    }

    /// First-stage price of one contracted trucker on `s`. Under hauler
    /// swapping a trucker is a driver-tractor pair, so the tractor is billed
    /// with the contract.
    pub fn first_stage_cost(&self, s: &Service) -> f64 {
        match self.pattern {
            Pattern::Hs => s.contract_fee + self.costs.tractor_hourly * s.on_duty_hours,
            _ => s.contract_fee,
        }
    }

    /// Rental price of a tractor plus a size-`u` hauler for the duration of `s`.
    pub fn truck_rental_cost(&self, s: &Service, u: u32) -> f64 {
        (self.costs.tractor_hourly + self.costs.hauler_rate(u).unwrap_or(0.0)) * s.on_duty_hours
    }

    /// Hours a hauler stays with commodity `k` (its full delivery window).
    pub fn hauler_hours(&self, k: usize) -> f64 {
        self.commodities[k].window_steps() as f64 * self.grid().step_hours
    }

    /// Rental price of one size-`u` hauler carrying commodity `k` end to end.
    pub fn hauler_rental_cost(&self, k: usize, u: u32) -> f64 {
        self.costs.hauler_rate(u).unwrap_or(0.0) * self.hauler_hours(k)
    }
}
