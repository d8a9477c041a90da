//! KPIs, value of the stochastic solution and pattern/consistency comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{mean_scenario, CommodityId, Scenario, ScenarioSet};
use crate::error::{Error, Result};
use crate::milp::{formulate, formulate_second_stage, Instance, Pattern, VarKey, VarMap};
use crate::network::ArcId;
use crate::services::{Consistency, ServiceId};
use crate::solver::{solve_milp, MilpStatus, SolveOptions, SolveStats};

pub use crate::milp::DesignSolution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub solve: SolveOptions,
    /// Worker threads for independent solves; results never depend on it.
    pub threads: usize,
    pub rate_basis: RateBasis,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            threads: 1,
            rate_basis: RateBasis::Volume,
        }
    }
}

/// How the outsourcing rate weighs commodities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateBasis {
    /// Share of vehicles outsourced.
    #[default]
    Volume,
    /// Share of commodities (with positive volume) outsourced.
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckAssignment {
    pub service: ServiceId,
    pub size: u32,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaulerAssignment {
    pub commodity: CommodityId,
    pub size: u32,
    pub count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcFlow {
    pub commodity: CommodityId,
    pub arc: ArcId,
    pub value: f64,
}

/// Second-stage decisions of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecourse {
    pub scenario: usize,
    pub probability: f64,
    /// Rental plus outsourcing cost, unweighted.
    pub cost: f64,
    pub trucks: Vec<TruckAssignment>,
    pub haulers: Vec<HaulerAssignment>,
    pub outsourced: Vec<CommodityId>,
    pub flows: Vec<ArcFlow>,
    pub status: MilpStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recourse {
    /// One entry per scenario, in scenario-set order.
    pub scenarios: Vec<ScenarioRecourse>,
}

impl Recourse {
    pub fn expected_cost(&self) -> f64 {
        self.scenarios
            .iter()
            .fold(0.0, |acc, r| acc + r.probability * r.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub total_contracted_driver_hours: f64,
    pub avg_tractor_rental_hours: f64,
    pub avg_hauler_rental_hours: f64,
    pub avg_outsourcing_rate: f64,
    pub total_expected_cost: f64,
    pub first_stage_cost: f64,
    pub expected_recourse_cost: f64,
    pub rate_basis: RateBasis,
}

impl KpiReport {
    /// Rows labelled as in the published result tables.
    pub fn table_rows(&self) -> [(&'static str, f64); 5] {
        [
            ("Total contracted hours of drivers (hrs)", self.total_contracted_driver_hours),
            ("Average rental hours of tractors (hrs)", self.avg_tractor_rental_hours),
            ("Average rental hours of haulers (hrs)", self.avg_hauler_rental_hours),
            ("Average outsourcing rate of commodities", self.avg_outsourcing_rate),
            ("Total expected transportation cost ($)", self.total_expected_cost),
        ]
    }
}

/// Reads the recourse of every scenario out of a deterministic-equivalent
/// (or second-stage) solution.
pub fn extract_recourse(
    inst: &Instance,
    map: &VarMap,
    values: &[f64],
    scenarios: &[&Scenario],
    status: MilpStatus,
) -> Recourse {
    let services = inst.catalog.services();
    let recourse = scenarios
        .iter()
        .map(|scen| {
            let w = scen.id;
            let mut r = ScenarioRecourse {
                scenario: w,
                probability: scen.probability,
                cost: 0.0,
                trucks: Vec::new(),
                haulers: Vec::new(),
                outsourced: Vec::new(),
                flows: Vec::new(),
                status,
            };
            if inst.pattern.is_flu() {
                for s in services {
                    for &u in &inst.haulers {
                        let y = map.value(&VarKey::Y { s: s.id, u, w }, values);
                        if y != 0.0 {
                            r.cost += inst.truck_rental_cost(s, u) * y;
                            r.trucks.push(TruckAssignment {
                                service: s.id,
                                size: u,
                                count: y,
                            });
                        }
                    }
                }
            }
            for k in 0..inst.commodities.len() {
                for &u in &inst.haulers {
                    let y = map.value(&VarKey::Yh { k, u, w }, values);
                    if y != 0.0 {
                        r.cost += inst.hauler_rental_cost(k, u) * y;
                        r.haulers.push(HaulerAssignment {
                            commodity: k,
                            size: u,
                            count: y,
                        });
                    }
                }
                if map.value(&VarKey::Z { k, w }, values) > 0.5 {
                    r.cost += inst.outsourcing_cost(k, scen);
                    r.outsourced.push(k);
                }
            }
            for (j, key) in map.iter() {
                if let VarKey::F { k, a, w: fw } = *key {
                    if fw == w && values[j].abs() > 1e-12 {
                        r.flows.push(ArcFlow {
                            commodity: k,
                            arc: a,
                            value: values[j],
                        });
                    }
                }
            }
            r
        })
        .collect();
    Recourse {
        scenarios: recourse,
    }
}

pub fn compute_kpis(inst: &Instance, design: &DesignSolution, recourse: &Recourse) -> Result<KpiReport> {
    compute_kpis_with(inst, design, recourse, RateBasis::Volume)
}

pub fn compute_kpis_with(
    inst: &Instance,
    design: &DesignSolution,
    recourse: &Recourse,
    basis: RateBasis,
) -> Result<KpiReport> {
    design.validate(inst)?;
    if recourse.scenarios.len() != inst.scenarios.len() {
        return Err(Error::Validation(format!(
            "recourse covers {} scenarios, instance has {}",
            recourse.scenarios.len(),
            inst.scenarios.len()
        )));
    }
    let services = inst.catalog.services();
    let driver_hours: f64 = services
        .iter()
        .zip(&design.x)
        .map(|(s, &x)| x as f64 * s.on_duty_hours)
        .sum();

    let mut tractor = 0.0;
    let mut hauler = 0.0;
    let mut rate = 0.0;
    for (r, scen) in recourse.scenarios.iter().zip(&inst.scenarios.scenarios) {
        if r.scenario != scen.id {
            return Err(Error::Validation(format!(
                "recourse scenario {} does not match instance scenario {}",
                r.scenario, scen.id
            )));
        }
        let p = scen.probability;
        if inst.pattern.is_flu() {
            let hours: f64 = r
                .trucks
                .iter()
                .map(|t| t.count * services[t.service].on_duty_hours)
                .sum();
            tractor += p * hours;
            hauler += p * hours;
        } else {
            tractor += p * driver_hours;
            let hours: f64 = r
                .haulers
                .iter()
                .map(|h| h.count * inst.hauler_hours(h.commodity))
                .sum();
            hauler += p * hours;
        }
        let share = match basis {
            RateBasis::Volume => {
                let total: f64 = scen.volumes.iter().sum();
                let out: f64 = r.outsourced.iter().map(|&k| scen.volumes[k]).sum();
                if total > 0.0 {
                    out / total
                } else {
                    0.0
                }
            }
            RateBasis::Count => {
                let active = scen.volumes.iter().filter(|&&v| v > 0.0).count();
                let out = r
                    .outsourced
                    .iter()
                    .filter(|&&k| scen.volumes[k] > 0.0)
                    .count();
                if active > 0 {
                    out as f64 / active as f64
                } else {
                    0.0
                }
            }
        };
        rate += p * share;
    }
    let first_stage_cost = design.first_stage_cost(inst);
    let expected_recourse_cost = recourse.expected_cost();
    Ok(KpiReport {
        total_contracted_driver_hours: driver_hours,
        avg_tractor_rental_hours: tractor,
        avg_hauler_rental_hours: hauler,
        avg_outsourcing_rate: rate,
        total_expected_cost: first_stage_cost + expected_recourse_cost,
        first_stage_cost,
        expected_recourse_cost,
        rate_basis: basis,
    })
}

/// Outcome of solving an instance's deterministic equivalent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub pattern: Pattern,
    pub consistency: Consistency,
    pub haulers: Vec<u32>,
    pub status: MilpStatus,
    pub objective: f64,
    pub bound: Option<f64>,
    pub design: DesignSolution,
    pub recourse: Recourse,
    pub kpis: KpiReport,
    pub stats: SolveStats,
}

impl SolveReport {
    pub fn is_conclusive(&self) -> bool {
        self.status == MilpStatus::Optimal
    }
}

fn status_error(status: MilpStatus, what: &str) -> Error {
    match status {
        MilpStatus::Infeasible => Error::Infeasible(what.to_string()),
        MilpStatus::Limit => Error::Limit(what.to_string()),
        MilpStatus::Unbounded => Error::Numerical(format!("{what} is unbounded")),
        _ => Error::Numerical(format!("{what} returned no solution")),
    }
}

/// Solves the full stochastic model and splits its solution.
pub fn solve_instance(inst: &Instance, opts: &AnalysisOptions) -> Result<SolveReport> {
    let (model, map) = formulate(inst)?;
    let sol = solve_milp(&model, &opts.solve)?;
    if !sol.has_solution() {
        return Err(status_error(sol.status, &model.name));
    }
    let design = DesignSolution::from_values(&map, &sol.values, inst.catalog.len());
    let scenarios: Vec<&Scenario> = inst.scenarios.scenarios.iter().collect();
    let recourse = extract_recourse(inst, &map, &sol.values, &scenarios, sol.status);
    let kpis = compute_kpis_with(inst, &design, &recourse, opts.rate_basis)?;
    Ok(SolveReport {
        pattern: inst.pattern,
        consistency: inst.consistency,
        haulers: inst.haulers.clone(),
        status: sol.status,
        objective: sol.objective.unwrap_or(f64::NAN),
        bound: sol.bound,
        design,
        recourse,
        kpis,
        stats: sol.stats,
    })
}

/// Expected cost of a fixed design: each scenario's second stage is solved
/// separately (concurrently when `opts.threads > 1`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub design: DesignSolution,
    pub recourse: Recourse,
    pub kpis: KpiReport,
    /// True when every second-stage solve proved optimality.
    pub conclusive: bool,
}

pub fn evaluate_design(inst: &Instance, design: &DesignSolution, opts: &AnalysisOptions) -> Result<Evaluation> {
    design.validate(inst)?;
    let run = |scen: &Scenario| -> Result<ScenarioRecourse> {
        let (model, map) = formulate_second_stage(inst, design, scen)?;
        let sol = solve_milp(&model, &opts.solve)?;
        if !sol.has_solution() {
            return Err(status_error(sol.status, &model.name));
        }
        let mut rec = extract_recourse(inst, &map, &sol.values, &[scen], sol.status);
        Ok(rec.scenarios.remove(0))
    };
    let scenarios = &inst.scenarios.scenarios;
    let results: Vec<Result<ScenarioRecourse>> = in_pool(opts.threads, || scenarios.par_iter().map(run).collect())?;
    let recourse = Recourse {
        scenarios: results.into_iter().collect::<Result<_>>()?,
    };
    let conclusive = recourse
        .scenarios
        .iter()
        .all(|r| r.status == MilpStatus::Optimal);
    let kpis = compute_kpis_with(inst, design, &recourse, opts.rate_basis)?;
    Ok(Evaluation {
        design: design.clone(),
        recourse,
        kpis,
        conclusive,
    })
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VssReport {
    pub stochastic_cost: f64,
    pub deterministic_design_cost: f64,
    pub vss: f64,
    /// False when any solve stopped at a limit.
    pub conclusive: bool,
    /// Objective of the full stochastic model, before re-evaluation.
    pub stochastic_model_objective: Option<f64>,
    pub stochastic: Option<Evaluation>,
    pub deterministic: Option<Evaluation>,
}

impl VssReport {
    /// Report built from the two expected costs alone.
    pub fn from_costs(deterministic_design_cost: f64, stochastic_cost: f64) -> Self {
        Self {
            stochastic_cost,
            deterministic_design_cost,
            vss: deterministic_design_cost - stochastic_cost,
            conclusive: true,
            stochastic_model_objective: None,
            stochastic: None,
            deterministic: None,
        }
    }

    /// VSS as a share of the deterministic design's cost.
    pub fn relative_saving(&self) -> f64 {
        if self.deterministic_design_cost != 0.0 {
            self.vss / self.deterministic_design_cost
        } else {
            0.0
        }
    }
}

/// Value of the stochastic solution: the stochastic design and the
/// mean-demand design are both priced by solving every scenario's second
/// stage, and the report holds the difference.
pub fn compute_vss(inst: &Instance, opts: &AnalysisOptions) -> Result<VssReport> {
    let stochastic = solve_instance(inst, opts)?;
    let mean = inst.with_scenarios(ScenarioSet {
        scenarios: vec![mean_scenario(&inst.scenarios)],
        seed: inst.scenarios.seed,
    })?;
    let deterministic = solve_instance(&mean, opts)?;

    let sto_eval = evaluate_design(inst, &stochastic.design, opts)?;
    let det_eval = evaluate_design(inst, &deterministic.design, opts)?;
    let sto = sto_eval.kpis.total_expected_cost;
    let det = det_eval.kpis.total_expected_cost;
    Ok(VssReport {
        stochastic_cost: sto,
        deterministic_design_cost: det,
        vss: det - sto,
        conclusive: stochastic.is_conclusive()
            && deterministic.is_conclusive()
            && sto_eval.conclusive
            && det_eval.conclusive,
        stochastic_model_objective: Some(stochastic.objective),
        stochastic: Some(sto_eval),
        deterministic: Some(det_eval),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub report: SolveReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, label: &str) -> Option<&SolveReport> {
        self.rows.iter().find(|r| r.label == label).map(|r| &r.report)
    }

    /// `cost(FLU-MCP) <= cost(FLU-SCP)` within `tol`, when both rows exist.
    pub fn mcp_not_above_scp(&self, tol: f64) -> Option<bool> {
        let mcp = self.row(&Pattern::FluMcp.to_string())?;
        let scp = self.row(&Pattern::FluScp.to_string())?;
        Some(mcp.objective <= scp.objective + tol)
    }
}

fn run_variants(variants: Vec<(String, Instance)>, opts: &AnalysisOptions) -> Result<ComparisonReport> {
    let inner = AnalysisOptions {
        threads: 1,
        ..opts.clone()
    };
    let results: Vec<Result<ComparisonRow>> = in_pool(opts.threads, || {
        variants
            .par_iter()
            .map(|(label, inst)| {
                Ok(ComparisonRow {
                    label: label.clone(),
                    report: solve_instance(inst, &inner)?,
                })
            })
            .collect()
    })?;
    Ok(ComparisonReport {
        rows: results.into_iter().collect::<Result<_>>()?,
    })
}

/// Solves the instance under all three operational patterns.
pub fn compare_patterns(inst: &Instance, opts: &AnalysisOptions) -> Result<ComparisonReport> {
    let variants = Pattern::ALL
        .iter()
        .map(|&p| (p.to_string(), inst.with_pattern(p)))
        .collect();
    run_variants(variants, opts)
}

/// Hauler-size sets used by [`compare_consistency`]: the largest size alone,
/// and every size (the instance's set, or the whole rate table when the
/// instance offers a single size).
pub fn hauler_variants(inst: &Instance) -> (Vec<u32>, Vec<u32>) {
    let mut various = if inst.haulers.len() > 1 {
        inst.haulers.clone()
    } else {
        inst.costs.hauler_rates.iter().map(|h| h.size).collect()
    };
    various.sort_unstable();
    various.dedup();
    let fixed = vec![*various.last().expect("rate table is never empty after validation")];
    (fixed, various)
}

/// Weekly vs daily consistency, each with a fixed and a various hauler set.
pub fn compare_consistency(inst: &Instance, opts: &AnalysisOptions) -> Result<ComparisonReport> {
    let (fixed, various) = hauler_variants(inst);
    let mut variants = Vec::new();
    for consistency in [Consistency::Weekly, Consistency::Daily] {
        let base = inst.with_consistency(consistency)?;
        for (tag, sizes) in [("fixed", &fixed), ("various", &various)] {
            variants.push((format!("{consistency}-{tag}"), base.with_haulers(sizes.clone())?));
        }
    }
    run_variants(variants, opts)
}

/// CSV table of KPI rows, one line per labelled report.
pub fn write_kpi_csv<'a, W: std::io::Write>(
    writer: W,
    rows: impl IntoIterator<Item = (&'a str, &'a KpiReport)>,
) -> Result<()> {
    let io = |e: csv::Error| Error::Usage(format!("cannot write report: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "label",
        "driver_hours",
        "tractor_hours",
        "hauler_hours",
        "outsourcing_rate",
        "first_stage_cost",
        "expected_recourse_cost",
        "total_expected_cost",
    ])
    .map_err(io)?;
    for (label, k) in rows {
        w.write_record([
            label.to_string(),
            fmt_num(k.total_contracted_driver_hours),
            fmt_num(k.avg_tractor_rental_hours),
            fmt_num(k.avg_hauler_rental_hours),
            fmt_num(k.avg_outsourcing_rate),
            fmt_num(k.first_stage_cost),
            fmt_num(k.expected_recourse_cost),
            fmt_num(k.total_expected_cost),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Usage(format!("cannot write report: {e}")))
}

/// Fixed six-decimal rendering so reports diff cleanly.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}
