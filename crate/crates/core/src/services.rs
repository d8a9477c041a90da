//! Candidate short-haul round-trip services and their indexes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::CostParams;
use crate::network::{ArcId, ArcKind, HubId, PhysicalNetwork, TimeSpaceNetwork};

pub type ServiceId = usize;

/// How a service's driving time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DrivingBasis {
    /// Leg mileage divided by the average speed in [`CostParams`].
    #[default]
    Distance,
    /// Scheduled leg duration: travel steps times the step length.
    Schedule,
}

/// Hour-of-service limits applied to every candidate service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HosPolicy {
    pub max_on_duty_hours: f64,
    pub max_driving_hours: f64,
    pub driving_basis: DrivingBasis,
}

impl Default for HosPolicy {
    fn default() -> Self {
        Self {
            max_on_duty_hours: 14.0,
            max_driving_hours: 11.0,
            driving_basis: DrivingBasis::Distance,
        }
    }
}

impl HosPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_driving_hours > 0.0 && self.max_driving_hours <= self.max_on_duty_hours) {
            return Err(Error::Validation(format!(
                "HOS limits need 0 < driving ({}) <= on-duty ({})",
                self.max_driving_hours, self.max_on_duty_hours
            )));
        }
        Ok(())
    }
}

/// Schedule consistency regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Consistency {
    /// One cycle spanning the whole start window.
    Weekly,
    /// One cycle per day; repeated services must be contracted equally.
    Daily,
}

impl fmt::Display for Consistency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Consistency::Weekly => "weekly",
            Consistency::Daily => "daily",
        })
    }
}

impl FromStr for Consistency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weekly" => Ok(Consistency::Weekly),
            "daily" => Ok(Consistency::Daily),
            other => Err(Error::Usage(format!("unknown consistency mode `{other}`"))),
        }
    }
}

/// Services sharing a key repeat the same timetable in different cycles.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TemplateKey {
    pub route: Vec<HubId>,
    pub start_in_cycle: usize,
    /// Steps between the first departure and the return departure.
    pub return_offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Service {
    pub id: ServiceId,
    pub home_hub: HubId,
    pub away_hub: HubId,
    pub legs: Vec<ArcId>,
    pub cycle: usize,
    pub start_in_cycle: usize,
    pub on_duty_hours: f64,
    pub driving_hours: f64,
    pub contract_fee: f64,
    pub capacity: u32,
    pub template_key: TemplateKey,
}

impl Service {
    pub fn route(&self) -> &[HubId] {
        &self.template_key.route
    }

    pub fn route_label(&self) -> String {
        route_label(self.route())
    }
}

pub fn route_label(route: &[HubId]) -> String {
    route
        .iter()
        .map(|h| h.to_string())
        .collect::<Vec<_>>()
        .join("-")
}

pub fn parse_route(label: &str) -> Result<Vec<HubId>> {
    label
        .split('-')
        .map(|p| {
            p.trim()
                .parse::<HubId>()
                .map_err(|_| Error::Parse(format!("bad route `{label}`")))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ServiceCatalog {
    services: Vec<Service>,
    arc_index: Vec<Vec<ServiceId>>,
    moving: Vec<bool>,
    template_index: BTreeMap<TemplateKey, Vec<ServiceId>>,
}

impl ServiceCatalog {
    /// Builds the indexes over `services`, renumbering them densely in order.
    pub fn from_services(mut services: Vec<Service>, tsn: &TimeSpaceNetwork) -> Self {
        let mut arc_index = vec![Vec::new(); tsn.arcs().len()];
        let moving = tsn
            .arcs()
            .iter()
            .map(|a| a.kind == ArcKind::Moving)
            .collect();
        let mut template_index: BTreeMap<TemplateKey, Vec<ServiceId>> = BTreeMap::new();
        for (id, s) in services.iter_mut().enumerate() {
            s.id = id;
            for &a in &s.legs {
                arc_index[a].push(id);
            }
            template_index
                .entry(s.template_key.clone())
                .or_default()
                .push(id);
        }
        for group in template_index.values_mut() {
            group.sort_by_key(|&id| (services[id].cycle, id));
        }
        Self {
            services,
            arc_index,
            moving,
            template_index,
        }
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn len(&self) -> usize {
        self.services.len()
    }

    pub fn is_empty(&self) -> bool {
        self.services.is_empty()
    }

    pub fn service(&self, id: ServiceId) -> &Service {
        &self.services[id]
    }

    /// Services whose legs include moving arc `arc`.
    pub fn services_on_arc(&self, arc: ArcId) -> Result<&[ServiceId]> {
        match self.moving.get(arc) {
            None => Err(Error::Usage(format!("arc {arc} does not exist"))),
            Some(false) => Err(Error::Usage(format!(
                "arc {arc} is a holding arc; services only cover moving arcs"
            ))),
            Some(true) => Ok(&self.arc_index[arc]),
        }
    }

    /// Same as [`services_on_arc`](Self::services_on_arc) but empty for holding arcs.
    pub(crate) fn covering(&self, arc: ArcId) -> &[ServiceId] {
        &self.arc_index[arc]
    }

    /// All services sharing `id`'s template, including `id`, sorted by cycle.
    pub fn consistency_partners(&self, id: ServiceId) -> Result<Vec<ServiceId>> {
        let s = self
            .services
            .get(id)
            .ok_or_else(|| Error::Usage(format!("unknown service id {id}")))?;
        Ok(self.template_index[&s.template_key].clone())
    }

    pub fn templates(&self) -> impl Iterator<Item = (&TemplateKey, &[ServiceId])> {
        self.template_index.iter().map(|(k, v)| (k, v.as_slice()))
    }
}

/// Enumerates every two-leg round trip `home -> adjacent -> home` that fits
/// the horizon and the hour-of-service limits, for every feasible dwell at
/// the away hub.
pub fn enumerate_services(
    tsn: &TimeSpaceNetwork,
    pnet: &PhysicalNetwork,
    hos: &HosPolicy,
    costs: &CostParams,
    consistency: Consistency,
) -> ServiceCatalog {
    let grid = *tsn.grid();
    let (cycle_len, _) = cycle_layout(&grid, consistency);
    let window = grid.start_window();
    let fee_rate = match consistency {
        Consistency::Weekly => costs.driver_hourly,
        Consistency::Daily => costs.driver_hourly * costs.consistency_discount,
    };
    const EPS: f64 = 1e-9;

    let mut services = Vec::new();
    for home in 0..pnet.num_hubs() {
        let mut aways: Vec<&crate::network::PhysicalArc> =
            pnet.out_arcs(home).iter().map(|&i| &pnet.arcs()[i]).collect();
        aways.sort_by_key(|a| a.to);
        for out in aways {
            let away = out.to;
            let Some(back) = pnet.arc_between(away, home) else {
                continue;
            };
            let driving_hours = match hos.driving_basis {
                DrivingBasis::Distance => (out.distance_miles + back.distance_miles) / costs.avg_mph,
                DrivingBasis::Schedule => {
                    (out.travel_steps + back.travel_steps) as f64 * grid.step_hours
                }
            };
            if driving_hours > hos.max_driving_hours + EPS {
                continue;
            }
            for start in 0..window.min(grid.num_steps + 1) {
                let Some(first) = tsn.moving_arc(home, start, away) else {
                    continue;
                };
                let arrival = start + out.travel_steps;
                for depart in arrival..=grid.num_steps {
                    let end = depart + back.travel_steps;
                    let on_duty_hours = (end - start) as f64 * grid.step_hours;
                    if on_duty_hours > hos.max_on_duty_hours + EPS {
                        break;
                    }
                    let Some(second) = tsn.moving_arc(away, depart, home) else {
                        break;
                    };
                    services.push(Service {
                        id: 0,
                        home_hub: home,
                        away_hub: away,
                        legs: vec![first, second],
                        cycle: start / cycle_len,
                        start_in_cycle: start % cycle_len,
                        on_duty_hours,
                        driving_hours,
                        contract_fee: fee_rate * on_duty_hours,
                        capacity: costs.default_capacity,
                        template_key: TemplateKey {
                            route: vec![home, away, home],
                            start_in_cycle: start % cycle_len,
                            return_offset: depart - start,
                        },
                    });
                }
            }
        }
    }
    ServiceCatalog::from_services(services, tsn)
}

/// (steps per cycle, number of cycles) for a consistency regime.
pub fn cycle_layout(grid: &crate::network::TimeGrid, consistency: Consistency) -> (usize, usize) {
    match consistency {
        Consistency::Weekly => (grid.start_window(), 1),
        Consistency::Daily => (grid.cycle_steps, grid.num_cycles),
    }
}

/// One row of a service-override document. A capacity of 0 removes the
/// matching services from the catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceOverride {
    pub route: String,
    pub start_in_cycle: usize,
    pub cycle: usize,
    pub capacity: u32,
    #[serde(default)]
    pub contract_fee: Option<f64>,
}

pub fn read_overrides<R: std::io::Read>(reader: R) -> Result<Vec<ServiceOverride>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize()
        .enumerate()
        .map(|(row, r)| {
            r.map_err(|e| Error::InvalidRow {
                what: "service override",
                row,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Replaces capacity/fee on matching services, or prunes them.
pub fn apply_overrides(
    catalog: &ServiceCatalog,
    tsn: &TimeSpaceNetwork,
    overrides: &[ServiceOverride],
) -> Result<ServiceCatalog> {
    let mut services = catalog.services().to_vec();
    let mut keep = vec![true; services.len()];
    for (row, o) in overrides.iter().enumerate() {
        let route = parse_route(&o.route)?;
        let matches: Vec<usize> = services
            .iter()
            .filter(|s| {
                s.route() == route.as_slice()
                    && s.cycle == o.cycle
                    && s.start_in_cycle == o.start_in_cycle
            })
            .map(|s| s.id)
            .collect();
        if matches.is_empty() {
            return Err(Error::InvalidRow {
                what: "service override",
                row,
                reason: format!(
                    "no service with route {} in cycle {} starting at step {}",
                    o.route, o.cycle, o.start_in_cycle
                ),
            });
        }
        for id in matches {
            if o.capacity == 0 {
                keep[id] = false;
            } else {
                services[id].capacity = o.capacity;
                if let Some(fee) = o.contract_fee {
                    if !(fee.is_finite() && fee >= 0.0) {
                        return Err(Error::InvalidRow {
                            what: "service override",
                            row,
                            reason: format!("contract fee must be >= 0, got {fee}"),
                        });
                    }
                    services[id].contract_fee = fee;
                }
            }
        }
    }
    let kept = services
        .into_iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(s))
        .collect();
    Ok(ServiceCatalog::from_services(kept, tsn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_time_space_network, load_physical_network, ArcRow, Hub, NetworkDoc, TimeGrid};

    fn line(n: usize, miles: f64) -> PhysicalNetwork {
        load_physical_network(&NetworkDoc {
            hubs: (0..n)
                .map(|i| Hub {
                    id: i,
                    name: format!("H{i}"),
                    lon: None,
                    lat: None,
                })
                .collect(),
            arcs: (0..n.saturating_sub(1))
                .map(|i| ArcRow {
                    from: i,
                    to: i + 1,
                    travel_steps: 1,
                    distance_miles: miles,
                    directed: false,
                })
                .collect(),
        })
        .unwrap()
    }

    fn grid(t: usize, cycles: usize, cycle_steps: usize) -> TimeGrid {
        TimeGrid {
            step_hours: 6.0,
            num_steps: t,
            num_cycles: cycles,
            cycle_steps,
        }
    }

    /// Independent enumeration of all (out leg, return leg) pairs that pass both limits.
    fn brute_force_round_trips(
        tsn: &TimeSpaceNetwork,
        pnet: &PhysicalNetwork,
        hos: &HosPolicy,
        costs: &CostParams,
    ) -> Vec<(ArcId, ArcId)> {
        let step = tsn.grid().step_hours;
        let window = tsn.grid().start_window();
        let mut out = Vec::new();
        for a in tsn.moving_arcs() {
            for b in tsn.moving_arcs() {
                let ok_shape = a.head.hub == b.tail.hub
                    && b.head.hub == a.tail.hub
                    && b.tail.t >= a.head.t
                    && a.tail.t < window;
                if !ok_shape {
                    continue;
                }
                let on_duty = (b.head.t - a.tail.t) as f64 * step;
                let pa = &pnet.arcs()[tsn.physical_arc(a.id).unwrap()];
                let pb = &pnet.arcs()[tsn.physical_arc(b.id).unwrap()];
                let driving = match hos.driving_basis {
                    DrivingBasis::Distance => (pa.distance_miles + pb.distance_miles) / costs.avg_mph,
                    DrivingBasis::Schedule => (pa.travel_steps + pb.travel_steps) as f64 * step,
                };
                if on_duty <= hos.max_on_duty_hours && driving <= hos.max_driving_hours {
                    out.push((a.id, b.id));
                }
            }
        }
        out.sort();
        out
    }

    fn legs(cat: &ServiceCatalog) -> Vec<(ArcId, ArcId)> {
        let mut v: Vec<_> = cat.services().iter().map(|s| (s.legs[0], s.legs[1])).collect();
        v.sort();
        v
    }

    #[test]
    fn immediate_turnaround_against_scheduled_driving_limit() {
        let pnet = line(3, 275.0);
        let tsn = build_time_space_network(&pnet, grid(8, 1, 8)).unwrap();
        let costs = CostParams::default();
        let strict = HosPolicy {
            driving_basis: DrivingBasis::Schedule,
            ..HosPolicy::default()
        };
        let cat = enumerate_services(&tsn, &pnet, &strict, &costs, Consistency::Weekly);
        assert!(cat.is_empty());
        assert_eq!(legs(&cat), brute_force_round_trips(&tsn, &pnet, &strict, &costs));

        let relaxed = HosPolicy {
            max_driving_hours: 12.0,
            ..strict
        };
        let cat = enumerate_services(&tsn, &pnet, &relaxed, &costs, Consistency::Weekly);
        // 4 directed (home, away) pairs x 7 starts with a return by T = 8.
        assert_eq!(cat.len(), 28);
        assert!(cat.services().iter().all(|s| s.on_duty_hours == 12.0));
        assert_eq!(legs(&cat), brute_force_round_trips(&tsn, &pnet, &relaxed, &costs));
    }

    #[test]
    fn distance_basis_matches_oracle_and_rejects_long_dwell() {
        let pnet = line(3, 275.0);
        let tsn = build_time_space_network(&pnet, grid(8, 1, 8)).unwrap();
        let costs = CostParams::default();
        let hos = HosPolicy::default();
        let cat = enumerate_services(&tsn, &pnet, &hos, &costs, Consistency::Weekly);
        assert_eq!(legs(&cat), brute_force_round_trips(&tsn, &pnet, &hos, &costs));
        for s in cat.services() {
            assert!((s.driving_hours - 11.0).abs() < 1e-12);
            // A one-step dwell would give 18h on duty; only immediate returns remain.
            let a = tsn.arc(s.legs[0]);
            let b = tsn.arc(s.legs[1]);
            assert_eq!(a.head.t, b.tail.t);
        }
        let wider = HosPolicy {
            max_on_duty_hours: 18.0,
            ..hos
        };
        let cat2 = enumerate_services(&tsn, &pnet, &wider, &costs, Consistency::Weekly);
        assert!(cat2.len() > cat.len());
        assert_eq!(legs(&cat2), brute_force_round_trips(&tsn, &pnet, &wider, &costs));
    }

    #[test]
    fn two_step_dwell_is_rejected() {
        // Dwell of 2 steps: 1 + 2 + 1 steps = 24h > 14h.
        let pnet = line(2, 100.0);
        let tsn = build_time_space_network(&pnet, grid(6, 1, 6)).unwrap();
        let cat = enumerate_services(
            &tsn,
            &pnet,
            &HosPolicy::default(),
            &CostParams::default(),
            Consistency::Weekly,
        );
        for s in cat.services() {
            assert!(s.on_duty_hours <= 14.0);
            assert_eq!(s.template_key.return_offset, 1);
        }
    }

    #[test]
    fn single_hub_has_no_services() {
        let pnet = line(1, 1.0);
        let tsn = build_time_space_network(&pnet, grid(4, 1, 4)).unwrap();
        let cat = enumerate_services(
            &tsn,
            &pnet,
            &HosPolicy::default(),
            &CostParams::default(),
            Consistency::Weekly,
        );
        assert!(cat.is_empty());
    }

    #[test]
    fn arc_index_inverts_legs() {
        let pnet = line(3, 250.0);
        let tsn = build_time_space_network(&pnet, grid(8, 2, 4)).unwrap();
        let cat = enumerate_services(
            &tsn,
            &pnet,
            &HosPolicy::default(),
            &CostParams::default(),
            Consistency::Daily,
        );
        for a in tsn.moving_arcs() {
            let on = cat.services_on_arc(a.id).unwrap();
            for s in cat.services() {
                assert_eq!(on.contains(&s.id), s.legs.contains(&a.id));
            }
        }
        let hold = tsn.holding_arcs().next().unwrap().id;
        assert!(matches!(cat.services_on_arc(hold), Err(Error::Usage(_))));
    }

    #[test]
    fn partners_in_weekly_and_daily_modes() {
        let pnet = line(2, 250.0);
        let costs = CostParams::default();
        let hos = HosPolicy::default();
        // Four day-cycles of four 6h steps plus a trailing day.
        let g = grid(20, 4, 4);
        let tsn = build_time_space_network(&pnet, g).unwrap();

        let weekly = enumerate_services(&tsn, &pnet, &hos, &costs, Consistency::Weekly);
        for s in weekly.services() {
            assert_eq!(weekly.consistency_partners(s.id).unwrap(), vec![s.id]);
        }

        let daily = enumerate_services(&tsn, &pnet, &hos, &costs, Consistency::Daily);
        let s0 = daily
            .services()
            .iter()
            .find(|s| s.home_hub == 0 && s.cycle == 0 && s.start_in_cycle == 0)
            .unwrap();
        let partners = daily.consistency_partners(s0.id).unwrap();
        assert_eq!(partners.len(), 4);
        let cycles: Vec<_> = partners.iter().map(|&p| daily.service(p).cycle).collect();
        assert_eq!(cycles, vec![0, 1, 2, 3]);
        for &p in &partners {
            let s = daily.service(p);
            assert_eq!(s.on_duty_hours, s0.on_duty_hours);
            assert_eq!(s.driving_hours, s0.driving_hours);
            assert_eq!(s.capacity, s0.capacity);
        }
        // Same route, different start: disjoint groups.
        let s1 = daily
            .services()
            .iter()
            .find(|s| s.home_hub == 0 && s.cycle == 0 && s.start_in_cycle == 1)
            .unwrap();
        let other = daily.consistency_partners(s1.id).unwrap();
        assert!(other.iter().all(|p| !partners.contains(p)));

        assert!(daily.consistency_partners(10_000).is_err());
        // Daily fee is discounted.
        assert!((s0.contract_fee - 29.0 * 0.8 * 12.0).abs() < 1e-9);
    }

    #[test]
    fn overrides_replace_and_prune() {
        let pnet = line(2, 250.0);
        let tsn = build_time_space_network(&pnet, grid(4, 1, 4)).unwrap();
        let cat = enumerate_services(
            &tsn,
            &pnet,
            &HosPolicy::default(),
            &CostParams::default(),
            Consistency::Weekly,
        );
        let n = cat.len();
        let rows = read_overrides(
            "route,start_in_cycle,cycle,capacity,contract_fee\n0-1-0,0,0,3,100\n1-0-1,1,0,0,\n".as_bytes(),
        )
        .unwrap();
        let cat2 = apply_overrides(&cat, &tsn, &rows).unwrap();
        assert_eq!(cat2.len(), n - 1);
        let s = cat2
            .services()
            .iter()
            .find(|s| s.home_hub == 0 && s.start_in_cycle == 0)
            .unwrap();
        assert_eq!(s.capacity, 3);
        assert_eq!(s.contract_fee, 100.0);
        for (i, s) in cat2.services().iter().enumerate() {
            assert_eq!(s.id, i);
        }

        let bad = vec![ServiceOverride {
            route: "0-1-0".into(),
            start_in_cycle: 9,
            cycle: 0,
            capacity: 1,
            contract_fee: None,
        }];
        assert!(apply_overrides(&cat, &tsn, &bad).is_err());
    }
}
