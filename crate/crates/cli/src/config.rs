use std::fs;
use std::path::{Path, PathBuf};

use relaynet::analysis::{AnalysisOptions, RateBasis};
use relaynet::demand::{read_commodities, read_scenarios, DemandSpec};
use relaynet::milp::{CostParams, Instance, Pattern};
use relaynet::network::{load_physical_network, NetworkDoc, TimeGrid};
use relaynet::services::{read_overrides, Consistency, HosPolicy};
use relaynet::solver::SolveOptions;
use relaynet::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run needs. Relative paths are resolved against the directory
/// holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub network: PathBuf,
    pub commodities: PathBuf,
    pub scenarios: PathBuf,
    pub overrides: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub pattern: Pattern,
    pub consistency: Consistency,
    pub haulers: Vec<u32>,
    pub num_scenarios: usize,
    pub threads: usize,
    pub rate_basis: RateBasis,
    pub grid: TimeGrid,
    pub hos: HosPolicy,
    pub costs: CostParams,
    pub demand: DemandSpec,
    pub solve: SolveOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            network: "network.toml".into(),
            commodities: "commodities.csv".into(),
            scenarios: "scenarios.csv".into(),
            overrides: None,
            output_dir: "out".into(),
            pattern: Pattern::FluMcp,
            consistency: Consistency::Weekly,
            haulers: vec![8],
            num_scenarios: 30,
            threads: 1,
            rate_basis: RateBasis::Volume,
            grid: TimeGrid {
                step_hours: 6.0,
                num_steps: 20,
                num_cycles: 5,
                cycle_steps: 4,
            },
            hos: HosPolicy::default(),
            costs: CostParams::default(),
            demand: DemandSpec::default(),
            solve: SolveOptions::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path`, or returns the defaults rooted at the working directory
    /// when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<(Self, PathBuf)> {
        let Some(path) = path else {
            return Ok((Self::default(), PathBuf::from(".")));
        };
        let text = read_text(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.hos.validate()?;
        self.costs.validate()?;
        self.demand.validate()?;
        if self.haulers.is_empty() {
            return Err(Error::Validation("haulers must list at least one size".into()));
        }
        if self.num_scenarios == 0 {
            return Err(Error::Validation("num_scenarios must be >= 1".into()));
        }
        if !(self.solve.rel_gap_tol > 0.0 && self.solve.int_feas_tol > 0.0) {
            return Err(Error::Validation("solver tolerances must be > 0".into()));
        }
        Ok(())
    }

    /// Settings that influence results; thread count and output location
    /// are left out because they never change a report.
    pub fn canonical(&self) -> Result<String> {
        let mut c = self.clone();
        c.threads = 1;
        c.output_dir = PathBuf::new();
        toml::to_string(&c).map_err(|e| Error::Usage(format!("cannot encode config: {e}")))
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            solve: SolveOptions {
                seed: self.seed,
                ..self.solve.clone()
            },
            threads: self.threads.max(1),
            rate_basis: self.rate_basis,
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Usage(format!("cannot open {}: {e}", path.display())))
}

/// Resolved run: config plus the directory its relative paths hang off.
pub struct Run {
    pub cfg: RunConfig,
    pub base: PathBuf,
}

impl Run {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.path(&self.cfg.output_dir)
    }

    /// Input documents in a fixed order, for hashing into the manifest.
    pub fn inputs(&self) -> Vec<(&'static str, PathBuf)> {
        let mut v = vec![
            ("network", self.path(&self.cfg.network)),
            ("commodities", self.path(&self.cfg.commodities)),
            ("scenarios", self.path(&self.cfg.scenarios)),
        ];
        if let Some(o) = &self.cfg.overrides {
            v.push(("overrides", self.path(o)));
        }
        v
    }

    pub fn load_network(&self) -> Result<relaynet::network::PhysicalNetwork> {
        let doc = NetworkDoc::from_toml_str(&read_text(&self.path(&self.cfg.network))?)?;
        load_physical_network(&doc)
    }

    pub fn load_instance(&self) -> Result<Instance> {
        let cfg = &self.cfg;
        let pnet = self.load_network()?;
        let commodities = read_commodities(open(&self.path(&cfg.commodities))?)?;
        let scenarios = read_scenarios(open(&self.path(&cfg.scenarios))?, commodities.len())?;
        let costs = cfg.costs.clone();
        let inst = Instance::new(
            pnet,
            cfg.grid,
            cfg.hos,
            commodities,
            scenarios,
            costs,
            cfg.haulers.clone(),
            cfg.pattern,
            cfg.consistency,
        )?;
        match &cfg.overrides {
            Some(p) => inst.with_overrides(read_overrides(open(&self.path(p))?)?),
            None => Ok(inst),
        }
    }
}
