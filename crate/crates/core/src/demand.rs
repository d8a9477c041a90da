//! Commodities, demand scenarios and outsourcing prices.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Hub, HubId, PhysicalNetwork, TimeGrid};

pub type CommodityId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Commodity {
    pub id: CommodityId,
    pub origin: HubId,
    pub destination: HubId,
    pub entry_step: usize,
    pub due_step: usize,
    /// Shortest origin-destination mileage; filled by [`price_commodities`].
    #[serde(skip)]
    pub distance_miles: f64,
    /// Outsourcing price of one vehicle; filled by [`price_commodities`].
    #[serde(skip)]
    pub outsource_cost_per_vehicle: f64,
}

impl Commodity {
    pub fn new(id: CommodityId, origin: HubId, destination: HubId, entry_step: usize, due_step: usize) -> Self {
        Self {
            id,
            origin,
            destination,
            entry_step,
            due_step,
            distance_miles: 0.0,
            outsource_cost_per_vehicle: 0.0,
        }
    }

    pub fn validate(&self, num_hubs: usize, grid: &TimeGrid) -> Result<()> {
        let bad = |reason: String| Error::InvalidRow {
            what: "commodity",
            row: self.id,
            reason,
        };
        if self.origin >= num_hubs || self.destination >= num_hubs {
            return Err(bad(format!(
                "unknown hub in {} -> {}",
                self.origin, self.destination
            )));
        }
        if self.origin == self.destination {
            return Err(bad("origin equals destination".into()));
        }
        if !(self.entry_step < self.due_step && self.due_step <= grid.num_steps) {
            return Err(bad(format!(
                "need 0 <= entry ({}) < due ({}) <= T ({})",
                self.entry_step, self.due_step, grid.num_steps
            )));
        }
        Ok(())
    }

    /// Delivery window length in steps.
    pub fn window_steps(&self) -> usize {
        self.due_step - self.entry_step
    }
}

/// Fills mileage and per-vehicle outsourcing price for every commodity.
pub fn price_commodities(commodities: &mut [Commodity], pnet: &PhysicalNetwork, rate_per_vehicle_mile: f64) -> Result<()> {
    let mut cache: BTreeMap<HubId, Vec<Option<f64>>> = BTreeMap::new();
    for k in commodities.iter_mut() {
        let dist = cache
            .entry(k.origin)
            .or_insert_with(|| pnet.distances_from(k.origin));
        let miles = dist
            .get(k.destination)
            .copied()
            .flatten()
            .ok_or(Error::Unreachable {
                from: k.origin,
                to: k.destination,
            })?;
        k.distance_miles = miles;
        k.outsource_cost_per_vehicle = rate_per_vehicle_mile * miles;
    }
    Ok(())
}

/// `rate x shortest distance x volume` for commodity `k` in scenario `w`.
pub fn outsourcing_cost(k: &Commodity, w: &Scenario, rate: f64, pnet: &PhysicalNetwork) -> Result<f64> {
    let miles = pnet.shortest_distance_miles(k.origin, k.destination)?;
    let volume = w.volumes.get(k.id).copied().ok_or_else(|| {
        Error::Usage(format!("scenario {} has no volume for commodity {}", w.id, k.id))
    })?;
    Ok(rate * miles * volume)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub probability: f64,
    /// Volume per commodity id, in vehicles.
    pub volumes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn validate(&self, num_commodities: usize) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::Validation("scenario set is empty".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        let mut total = 0.0;
        for w in &self.scenarios {
            if !ids.insert(w.id) {
                return Err(Error::Validation(format!("duplicate scenario id {}", w.id)));
            }
            if !(w.probability > 0.0 && w.probability <= 1.0) {
                return Err(Error::Validation(format!(
                    "scenario {} probability {} outside (0, 1]",
                    w.id, w.probability
                )));
            }
            if w.volumes.len() != num_commodities {
                return Err(Error::Validation(format!(
                    "scenario {} has {} volumes for {} commodities",
                    w.id,
                    w.volumes.len(),
                    num_commodities
                )));
            }
            if let Some(v) = w.volumes.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::Validation(format!(
                    "scenario {} has invalid volume {v}",
                    w.id
                )));
            }
            total += w.probability;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "scenario probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Probability-weighted average scenario.
pub fn mean_scenario(set: &ScenarioSet) -> Scenario {
    let n = set.scenarios.first().map_or(0, |w| w.volumes.len());
    let mut volumes = vec![0.0; n];
    for w in &set.scenarios {
        for (acc, v) in volumes.iter_mut().zip(&w.volumes) {
            *acc += w.probability * v;
        }
    }
    Scenario {
        id: 0,
        probability: 1.0,
        volumes,
    }
}

/// Mean volume override for one origin-destination pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdMean {
    pub origin: HubId,
    pub destination: HubId,
    pub mean: f64,
}

/// Shape of the synthetic demand generator.
///
/// Volumes follow a gamma-Poisson mixture (negative binomial) with mean
/// `lambda` and variance `lambda + dispersion * lambda^2`; a dispersion of 0
/// makes every draw `round(lambda)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemandSpec {
    pub mean_volume: f64,
    pub od_means: Vec<OdMean>,
    pub dispersion: f64,
    /// Share of demand moving towards larger longitude. 0.5 is balanced.
    pub east_share: f64,
    /// Entry steps of generated commodities; empty means the first step of
    /// each demand day.
    pub entry_steps: Vec<usize>,
    pub demand_days: usize,
    pub window_days: f64,
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self {
            mean_volume: 4.0,
            od_means: Vec::new(),
            dispersion: 0.5,
            east_share: 0.5,
            entry_steps: Vec::new(),
            demand_days: 4,
            window_days: 2.0,
        }
    }
}

impl DemandSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean_volume, self.dispersion, self.east_share, self.window_days]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.mean_volume < 0.0 || self.dispersion < 0.0 {
            return Err(Error::Validation("demand spec needs finite, nonnegative values".into()));
        }
        if !(0.0..=1.0).contains(&self.east_share) {
            return Err(Error::Validation(format!(
                "east_share {} outside [0, 1]",
                self.east_share
            )));
        }
        if self.od_means.iter().any(|o| !(o.mean.is_finite() && o.mean >= 0.0)) {
            return Err(Error::Validation("od mean must be finite and >= 0".into()));
        }
        Ok(())
    }

    fn base_mean(&self, origin: HubId, destination: HubId) -> f64 {
        self.od_means
            .iter()
            .find(|o| o.origin == origin && o.destination == destination)
            .map_or(self.mean_volume, |o| o.mean)
    }

    /// Mean volume of `k` after the directional imbalance is applied.
    pub fn mean_for(&self, k: &Commodity, hubs: &[Hub]) -> f64 {
        let base = self.base_mean(k.origin, k.destination);
        let lon = |h: HubId| hubs.get(h).and_then(|h| h.lon);
        match (lon(k.origin), lon(k.destination)) {
            (Some(a), Some(b)) if b > a => base * 2.0 * self.east_share,
            (Some(a), Some(b)) if b < a => base * 2.0 * (1.0 - self.east_share),
            _ => base,
        }
    }
}

/// One commodity per ordered hub pair and entry step, due `window_days` later
/// (capped at the horizon).
pub fn generate_commodities(pnet: &PhysicalNetwork, grid: &TimeGrid, spec: &DemandSpec) -> Vec<Commodity> {
    let per_day = grid.steps_per_day().round().max(1.0) as usize;
    let entries: Vec<usize> = if spec.entry_steps.is_empty() {
        (0..spec.demand_days).map(|d| d * per_day).collect()
    } else {
        spec.entry_steps.clone()
    };
    let window = ((spec.window_days * grid.steps_per_day()).round() as usize).max(1);
    let mut out = Vec::new();
    for &entry in &entries {
        if entry >= grid.num_steps {
            continue;
        }
        let due = (entry + window).min(grid.num_steps);
        for o in 0..pnet.num_hubs() {
            for d in 0..pnet.num_hubs() {
                if o != d {
                    out.push(Commodity::new(out.len(), o, d, entry, due));
                }
            }
        }
    }
    out
}

/// `n` equiprobable scenarios, reproducible from `seed`.
pub fn generate_scenarios(
    spec: &DemandSpec,
    commodities: &[Commodity],
    hubs: &[Hub],
    n: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::Usage("number of scenarios must be >= 1".into()));
    }
    spec.validate()?;
    let means: Vec<f64> = commodities.iter().map(|k| spec.mean_for(k, hubs)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probability = 1.0 / n as f64;
    let mut scenarios = Vec::with_capacity(n);
    for id in 0..n {
        let volumes = means
            .iter()
            .map(|&lambda| draw_volume(lambda, spec.dispersion, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        scenarios.push(Scenario {
            id,
            probability,
            volumes,
        });
    }
    Ok(ScenarioSet { scenarios, seed })
}

fn draw_volume(lambda: f64, dispersion: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if dispersion == 0.0 {
        return Ok(lambda.round());
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let gamma = Gamma::new(1.0 / dispersion, lambda * dispersion)
        .map_err(|e| Error::Validation(format!("gamma law: {e}")))?;
    let rate: f64 = gamma.sample(rng);
    if rate <= 0.0 {
        return Ok(0.0);
    }
    let poisson = Poisson::new(rate).map_err(|e| Error::Validation(format!("poisson law: {e}")))?;
    let v: f64 = poisson.sample(rng);
    Ok(v)
}

#[derive(Debug, Serialize, Deserialize)]
struct CommodityRow {
    id: CommodityId,
    origin: HubId,
    destination: HubId,
    entry_step: usize,
    due_step: usize,
}

pub fn read_commodities<R: std::io::Read>(reader: R) -> Result<Vec<Commodity>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<Commodity> = Vec::new();
    for (row, rec) in rdr.deserialize::<CommodityRow>().enumerate() {
        let r = rec.map_err(|e| Error::InvalidRow {
            what: "commodity",
            row,
            reason: e.to_string(),
        })?;
        out.push(Commodity::new(r.id, r.origin, r.destination, r.entry_step, r.due_step));
    }
    out.sort_by_key(|k| k.id);
    for (i, k) in out.iter().enumerate() {
        if k.id != i {
            return Err(Error::Validation(format!(
                "commodity ids must be dense 0..{}; missing or duplicate id near {}",
                out.len(),
                k.id
            )));
        }
    }
    Ok(out)
}

pub fn write_commodities<W: std::io::Write>(writer: W, commodities: &[Commodity]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for k in commodities {
        w.serialize(CommodityRow {
            id: k.id,
            origin: k.origin,
            destination: k.destination,
            entry_step: k.entry_step,
            due_step: k.due_step,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioRow {
    scenario_id: usize,
    probability: f64,
    commodity_id: CommodityId,
    volume: f64,
}

/// Reads long-format scenario rows. Commodities without a row get volume 0.
pub fn read_scenarios<R: std::io::Read>(reader: R, num_commodities: usize) -> Result<ScenarioSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_id: BTreeMap<usize, Scenario> = BTreeMap::new();
    for (row, rec) in rdr.deserialize::<ScenarioRow>().enumerate() {
        let r = rec.map_err(|e| Error::InvalidRow {
            what: "scenario",
            row,
            reason: e.to_string(),
        })?;
        if r.commodity_id >= num_commodities {
            return Err(Error::InvalidRow {
                what: "scenario",
                row,
                reason: format!("unknown commodity {}", r.commodity_id),
            });
        }
        let w = by_id.entry(r.scenario_id).or_insert_with(|| Scenario {
            id: r.scenario_id,
            probability: r.probability,
            volumes: vec![0.0; num_commodities],
        });
        if w.probability != r.probability {
            return Err(Error::InvalidRow {
                what: "scenario",
                row,
                reason: format!("inconsistent probability for scenario {}", r.scenario_id),
            });
        }
        w.volumes[r.commodity_id] = r.volume;
    }
    let set = ScenarioSet {
        scenarios: by_id.into_values().collect(),
        seed: 0,
    };
    set.validate(num_commodities)?;
    Ok(set)
}

pub fn write_scenarios<W: std::io::Write>(writer: W, set: &ScenarioSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in &set.scenarios {
        for (k, &v) in s.volumes.iter().enumerate() {
            w.serialize(ScenarioRow {
                scenario_id: s.id,
                probability: s.probability,
                commodity_id: k,
                volume: v,
            })
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{load_physical_network, ArcRow, NetworkDoc};
    use proptest::prelude::*;

    fn line3() -> PhysicalNetwork {
        load_physical_network(&NetworkDoc {
            hubs: (0..3)
                .map(|i| Hub {
                    id: i,
                    name: format!("H{i}"),
                    lon: Some(-90.0 + i as f64),
                    lat: None,
                })
                .collect(),
            arcs: vec![
                ArcRow {
                    from: 0,
                    to: 1,
                    travel_steps: 1,
                    distance_miles: 275.0,
                    directed: false,
                },
                ArcRow {
                    from: 1,
                    to: 2,
                    travel_steps: 1,
                    distance_miles: 275.0,
                    directed: false,
                },
            ],
        })
        .unwrap()
    }

    fn scenario(id: usize, p: f64, v: Vec<f64>) -> Scenario {
        Scenario {
            id,
            probability: p,
            volumes: v,
        }
    }

    #[test]
    fn zero_dispersion_is_degenerate() {
        let ks: Vec<_> = (0..5).map(|i| Commodity::new(i, 0, 1, 0, 4)).collect();
        let spec = DemandSpec {
            mean_volume: 3.6,
            dispersion: 0.0,
            ..DemandSpec::default()
        };
        let set = generate_scenarios(&spec, &ks, &[], 4, 1).unwrap();
        for w in &set.scenarios {
            assert!(w.volumes.iter().all(|&v| v == 4.0));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let ks: Vec<_> = (0..10).map(|i| Commodity::new(i, 0, 1, 0, 4)).collect();
        let spec = DemandSpec::default();
        let a = generate_scenarios(&spec, &ks, &[], 5, 42).unwrap();
        let b = generate_scenarios(&spec, &ks, &[], 5, 42).unwrap();
        let c = generate_scenarios(&spec, &ks, &[], 5, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(generate_scenarios(&spec, &ks, &[], 0, 42).is_err());
    }

    #[test]
    fn thirty_scenarios_over_196_commodities() {
        let ks: Vec<_> = (0..196).map(|i| Commodity::new(i, 0, 1, 0, 4)).collect();
        let set = generate_scenarios(&DemandSpec::default(), &ks, &[], 30, 7).unwrap();
        assert_eq!(set.len(), 30);
        assert!(set.scenarios.iter().all(|w| w.volumes.len() == 196));
        let total: f64 = set.scenarios.iter().map(|w| w.probability).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        set.validate(196).unwrap();
    }

    #[test]
    fn empirical_mean_within_three_sigma() {
        let lambda = 5.0;
        let dispersion = 0.4;
        let n = 20_000;
        let ks = vec![Commodity::new(0, 0, 1, 0, 4)];
        let spec = DemandSpec {
            mean_volume: lambda,
            dispersion,
            ..DemandSpec::default()
        };
        let set = generate_scenarios(&spec, &ks, &[], n, 11).unwrap();
        let draws: Vec<f64> = set.scenarios.iter().map(|w| w.volumes[0]).collect();
        assert!(draws.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (lambda + dispersion * lambda * lambda).sqrt();
        assert!(
            (mean - lambda).abs() <= 3.0 * sd / (n as f64).sqrt(),
            "mean {mean}"
        );
    }

    #[test]
    fn imbalance_scales_by_direction() {
        let pnet = line3();
        let spec = DemandSpec {
            mean_volume: 10.0,
            east_share: 0.9,
            ..DemandSpec::default()
        };
        let east = Commodity::new(0, 0, 2, 0, 4);
        let west = Commodity::new(1, 2, 0, 0, 4);
        assert!((spec.mean_for(&east, pnet.hubs()) - 18.0).abs() < 1e-12);
        assert!((spec.mean_for(&west, pnet.hubs()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_scenario_examples() {
        let one = ScenarioSet {
            scenarios: vec![scenario(3, 1.0, vec![2.0, 7.0])],
            seed: 0,
        };
        assert_eq!(mean_scenario(&one).volumes, vec![2.0, 7.0]);

        let two = ScenarioSet {
            scenarios: vec![scenario(0, 0.5, vec![8.0]), scenario(1, 0.5, vec![4.0])],
            seed: 0,
        };
        assert_eq!(mean_scenario(&two).volumes, vec![6.0]);

        let skew = ScenarioSet {
            scenarios: vec![scenario(0, 0.25, vec![0.0]), scenario(1, 0.75, vec![4.0])],
            seed: 0,
        };
        let m = mean_scenario(&skew);
        assert_eq!(m.volumes, vec![3.0]);
        assert_eq!(m.probability, 1.0);
    }

    #[test]
    fn outsourcing_cost_examples() {
        let pnet = line3();
        let far = Commodity::new(0, 0, 2, 0, 4);
        let near = Commodity::new(1, 0, 1, 0, 4);
        let w = scenario(0, 1.0, vec![5.0, 5.0]);
        assert!((outsourcing_cost(&far, &w, 0.93, &pnet).unwrap() - 2557.50).abs() < 1e-9);
        assert!((outsourcing_cost(&near, &w, 0.93, &pnet).unwrap() - 1278.75).abs() < 1e-9);
        let empty = scenario(0, 1.0, vec![0.0, 0.0]);
        assert_eq!(outsourcing_cost(&far, &empty, 0.93, &pnet).unwrap(), 0.0);
    }

    #[test]
    fn commodity_validation() {
        let grid = TimeGrid {
            step_hours: 6.0,
            num_steps: 8,
            num_cycles: 1,
            cycle_steps: 8,
        };
        assert!(Commodity::new(0, 1, 1, 0, 4).validate(3, &grid).is_err());
        assert!(Commodity::new(0, 0, 1, 4, 4).validate(3, &grid).is_err());
        assert!(Commodity::new(0, 0, 1, 0, 9).validate(3, &grid).is_err());
        assert!(Commodity::new(0, 0, 5, 0, 4).validate(3, &grid).is_err());
        Commodity::new(0, 0, 1, 0, 8).validate(3, &grid).unwrap();
    }

    #[test]
    fn documents_round_trip() {
        let ks = vec![Commodity::new(0, 0, 1, 0, 4), Commodity::new(1, 1, 2, 2, 6)];
        let mut buf = Vec::new();
        write_commodities(&mut buf, &ks).unwrap();
        assert_eq!(read_commodities(buf.as_slice()).unwrap(), ks);

        let set = ScenarioSet {
            scenarios: vec![scenario(0, 0.25, vec![1.0, 0.0]), scenario(1, 0.75, vec![3.0, 2.0])],
            seed: 0,
        };
        let mut buf = Vec::new();
        write_scenarios(&mut buf, &set).unwrap();
        assert_eq!(read_scenarios(buf.as_slice(), 2).unwrap(), set);

        let sparse = "scenario_id,probability,commodity_id,volume\n0,1,1,4\n";
        let set = read_scenarios(sparse.as_bytes(), 2).unwrap();
        assert_eq!(set.scenarios[0].volumes, vec![0.0, 4.0]);

        let bad = "scenario_id,probability,commodity_id,volume\n0,0.5,0,4\n";
        assert!(read_scenarios(bad.as_bytes(), 1).is_err());
    }

    proptest! {
        #[test]
        fn mean_commutes_with_scaling(
            vols in prop::collection::vec(prop::collection::vec(0.0f64..50.0, 3), 1..6),
            alpha in 0.1f64..10.0,
        ) {
            let n = vols.len();
            let set = ScenarioSet {
                scenarios: vols.iter().enumerate().map(|(i, v)| scenario(i, 1.0 / n as f64, v.clone())).collect(),
                seed: 0,
            };
            let scaled = ScenarioSet {
                scenarios: set.scenarios.iter().map(|w| Scenario {
                    volumes: w.volumes.iter().map(|v| v * alpha).collect(),
                    ..w.clone()
                }).collect(),
                seed: 0,
            };
            let a = mean_scenario(&set);
            let b = mean_scenario(&scaled);
            for (x, y) in a.volumes.iter().zip(&b.volumes) {
                prop_assert!((x * alpha - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }
    }
}
