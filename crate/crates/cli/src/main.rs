mod config;
mod report;
mod synth;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaynet::analysis::{
    compare_consistency, compare_patterns, compute_kpis_with, compute_vss, evaluate_design, extract_recourse, fmt_num,
    ComparisonReport, SolveReport,
};
use relaynet::demand::{generate_commodities, generate_scenarios, write_commodities, write_scenarios, Scenario};
use relaynet::milp::{formulate, write_mps, DesignSolution, Pattern};
use relaynet::services::Consistency;
use relaynet::solver::{import_solution, solve_milp, write_solution, MilpStatus};
use relaynet::{Error, Result};
use serde::Serialize;

use config::{Run, RunConfig};
use report::Outputs;

#[derive(Parser)]
#[command(name = "relaynet", version, about = "Relay service network design under demand uncertainty")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    pattern: Option<Pattern>,
    #[arg(long, global = true)]
    consistency: Option<Consistency>,
    /// Hauler sizes, e.g. `8` or `4,8`.
    #[arg(long, global = true, value_delimiter = ',')]
    haulers: Option<Vec<u32>>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Solver wall-clock limit in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic 19-hub Southeast testbed to the network path.
    BuildNetwork,
    /// Generate commodities and demand scenarios from the configured demand model.
    GenScenarios {
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// Solve the stochastic model.
    Solve {
        /// Write the model in MPS format to this path instead of solving.
        #[arg(long)]
        export_mps: Option<PathBuf>,
    },
    /// Evaluate a fixed design scenario by scenario.
    Evaluate {
        #[arg(long)]
        design: PathBuf,
    },
    /// Value of the stochastic solution.
    Vss,
    /// Solve under FLU-MCP, FLU-SCP and HS.
    ComparePatterns,
    /// Solve under weekly and daily consistency with fixed and various hauler sets.
    CompareConsistency,
    /// Write the model in MPS format.
    ExportMps {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an external solution against the model and report its KPIs.
    ImportSolution {
        #[arg(long)]
        solution: PathBuf,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::BuildNetwork => "build-network",
            Command::GenScenarios { .. } => "gen-scenarios",
            Command::Solve { .. } => "solve",
            Command::Evaluate { .. } => "evaluate",
            Command::Vss => "vss",
            Command::ComparePatterns => "compare-patterns",
            Command::CompareConsistency => "compare-consistency",
            Command::ExportMps { .. } => "export-mps",
            Command::ImportSolution { .. } => "import-solution",
        }
    }
}

const EXIT_OK: u8 = 0;
const EXIT_OTHER: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_LIMIT: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation(_)
        | Error::InvalidRow { .. }
        | Error::Usage(_)
        | Error::Parse(_)
        | Error::Rejected(_)
        | Error::Unreachable { .. } => EXIT_INVALID,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Limit(_) => EXIT_LIMIT,
        Error::Numerical(_) => EXIT_OTHER,
    }
}

fn status_code(status: MilpStatus) -> u8 {
    match status {
        MilpStatus::Optimal | MilpStatus::Feasible => EXIT_OK,
        MilpStatus::Infeasible => EXIT_INFEASIBLE,
        MilpStatus::Limit => EXIT_LIMIT,
        MilpStatus::Unbounded => EXIT_OTHER,
    }
}

fn conclusive_code(conclusive: bool) -> u8 {
    if conclusive {
        EXIT_OK
    } else {
        EXIT_LIMIT
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("relaynet: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve(cli: &Cli) -> Result<Run> {
    let (mut cfg, base) = RunConfig::load(cli.config.as_deref())?;
    if let Some(p) = cli.pattern {
        cfg.pattern = p;
    }
    if let Some(c) = cli.consistency {
        cfg.consistency = c;
    }
    if let Some(h) = &cli.haulers {
        cfg.haulers = h.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.time_limit {
        cfg.solve.time_limit_s = Some(t);
    }
    if let Some(dir) = &cli.output_dir {
        // Taken relative to the working directory, like any other argument.
        cfg.output_dir = std::path::absolute(dir).map_err(|e| Error::Usage(format!("bad output dir: {e}")))?;
    }
    if let Command::GenScenarios { scenarios: Some(n) } = &cli.command {
        cfg.num_scenarios = *n;
    }
    cfg.validate()?;
    Ok(Run { cfg, base })
}

fn run(cli: &Cli) -> Result<u8> {
    let run = resolve(cli)?;
    let mut out = Outputs::create(run.output_dir())?;
    let command = cli.command.name();
    let code = match &cli.command {
        Command::BuildNetwork => build_network(&run, &mut out)?,
        Command::GenScenarios { .. } => gen_scenarios(&run, &mut out)?,
        Command::Solve { export_mps: Some(path) } => export_mps(&run, &mut out, Some(path))?,
        Command::Solve { export_mps: None } => solve(&run, &mut out)?,
        Command::Evaluate { design } => evaluate(&run, &mut out, design)?,
        Command::Vss => vss(&run, &mut out)?,
        Command::ComparePatterns => compare(&run, &mut out, true)?,
        Command::CompareConsistency => compare(&run, &mut out, false)?,
        Command::ExportMps { out: path } => export_mps(&run, &mut out, path.as_deref())?,
        Command::ImportSolution { solution } => import(&run, &mut out, solution)?,
    };
    report::write_manifest(&mut out, command, run.cfg.seed, &run.cfg.canonical()?, &run.inputs())?;
    Ok(code)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))
}

fn build_network(run: &Run, out: &mut Outputs) -> Result<u8> {
    let doc = synth::southeast_network();
    let text = doc.to_toml_string()?;
    write_file(&run.path(&run.cfg.network), &text)?;
    out.write("network.toml", &text)?;
    eprintln!("wrote {} hubs and {} arcs", doc.hubs.len(), doc.arcs.len());
    Ok(EXIT_OK)
}

fn gen_scenarios(run: &Run, out: &mut Outputs) -> Result<u8> {
    let cfg = &run.cfg;
    let pnet = run.load_network()?;
    let commodities = generate_commodities(&pnet, &cfg.grid, &cfg.demand);
    let set = generate_scenarios(&cfg.demand, &commodities, pnet.hubs(), cfg.num_scenarios, cfg.seed)?;
    let mut kbuf = Vec::new();
    write_commodities(&mut kbuf, &commodities)?;
    let mut sbuf = Vec::new();
    write_scenarios(&mut sbuf, &set)?;
    write_file(&run.path(&cfg.commodities), &kbuf)?;
    write_file(&run.path(&cfg.scenarios), &sbuf)?;
    out.write("commodities.csv", &kbuf)?;
    out.write("scenarios.csv", &sbuf)?;
    eprintln!("wrote {} commodities and {} scenarios", commodities.len(), set.len());
    Ok(EXIT_OK)
}

fn export_mps(run: &Run, out: &mut Outputs, path: Option<&Path>) -> Result<u8> {
    let inst = run.load_instance()?;
    let (model, _) = formulate(&inst)?;
    let text = write_mps(&model)?;
    match path {
        Some(p) => write_file(p, &text)?,
        None => out.write("model.mps", &text)?,
    }
    eprintln!(
        "model {}: {} columns ({} integer), {} rows",
        model.name,
        model.num_vars(),
        model.num_integer_vars(),
        model.num_cons()
    );
    Ok(EXIT_OK)
}

fn solve(run: &Run, out: &mut Outputs) -> Result<u8> {
    let inst = run.load_instance()?;
    let opts = run.cfg.analysis_options();
    let (model, map) = formulate(&inst)?;
    let sol = solve_milp(&model, &opts.solve)?;
    if !sol.has_solution() {
        return Err(match sol.status {
            MilpStatus::Limit => Error::Limit(model.name.clone()),
            MilpStatus::Infeasible => Error::Infeasible(model.name.clone()),
            _ => Error::Numerical(format!("{} has no solution", model.name)),
        });
    }
    let design = DesignSolution::from_values(&map, &sol.values, inst.catalog.len());
    let scenarios: Vec<&Scenario> = inst.scenarios.scenarios.iter().collect();
    let recourse = extract_recourse(&inst, &map, &sol.values, &scenarios, sol.status);
    let kpis = compute_kpis_with(&inst, &design, &recourse, opts.rate_basis)?;
    let rep = SolveReport {
        pattern: inst.pattern,
        consistency: inst.consistency,
        haulers: inst.haulers.clone(),
        status: sol.status,
        objective: sol.objective.unwrap_or(f64::NAN),
        bound: sol.bound,
        design,
        recourse,
        kpis,
        stats: sol.stats.clone(),
    };

    let label = inst.pattern.to_string();
    out.write("design.csv", report::design_csv(&inst, &rep.design))?;
    out.write("recourse.csv", report::recourse_csv(&inst, &rep.recourse))?;
    out.write("kpis.csv", report::kpi_csv([(label.as_str(), &rep.kpis)])?)?;
    let mut sbuf = Vec::new();
    write_solution(&mut sbuf, &model, &sol.values)?;
    out.write("solution.csv", &sbuf)?;
    out.write_json("solve.json", &rep)?;

    let mut log = String::new();
    let _ = writeln!(log, "model: {}", model.name);
    let _ = writeln!(log, "pattern: {}", inst.pattern);
    let _ = writeln!(log, "consistency: {}", inst.consistency);
    let _ = writeln!(log, "haulers: {:?}", inst.haulers);
    let _ = writeln!(log, "scenarios: {}", inst.scenarios.len());
    let _ = writeln!(log, "columns: {} ({} integer)", model.num_vars(), model.num_integer_vars());
    let _ = writeln!(log, "rows: {}", model.num_cons());
    let _ = writeln!(log, "status: {:?}", rep.status);
    let _ = writeln!(log, "objective: {}", fmt_num(rep.objective));
    if let Some(b) = rep.bound {
        let _ = writeln!(log, "bound: {}", fmt_num(b));
    }
    if let Some(g) = sol.relative_gap() {
        let _ = writeln!(log, "relative_gap: {g:.3e}");
    }
    let _ = writeln!(log, "nodes: {}", rep.stats.nodes);
    let _ = writeln!(log, "lp_iterations: {}", rep.stats.lp_iterations);
    out.write("solver.log", log)?;
    report::kpi_charts(out, "Solve", &[(label, &rep.kpis)])?;

    eprintln!(
        "{:?}: expected cost {} in {:.2} s",
        rep.status,
        fmt_num(rep.objective),
        rep.stats.wall_time_s
    );
    Ok(status_code(rep.status))
}

fn evaluate(run: &Run, out: &mut Outputs, design_path: &Path) -> Result<u8> {
    let inst = run.load_instance()?;
    let design = report::read_design(design_path, &inst)?;
    let ev = evaluate_design(&inst, &design, &run.cfg.analysis_options())?;
    out.write("recourse.csv", report::recourse_csv(&inst, &ev.recourse))?;
    out.write("kpis.csv", report::kpi_csv([("design", &ev.kpis)])?)?;
    out.write_json("evaluation.json", &ev)?;
    eprintln!("expected cost {}", fmt_num(ev.kpis.total_expected_cost));
    Ok(conclusive_code(ev.conclusive))
}

fn vss(run: &Run, out: &mut Outputs) -> Result<u8> {
    let inst = run.load_instance()?;
    let rep = compute_vss(&inst, &run.cfg.analysis_options())?;
    let mut csv = String::from("metric,value\n");
    for (name, v) in [
        ("deterministic_design_cost", rep.deterministic_design_cost),
        ("stochastic_cost", rep.stochastic_cost),
        ("vss", rep.vss),
        ("relative_saving", rep.relative_saving()),
    ] {
        let _ = writeln!(csv, "{name},{}", fmt_num(v));
    }
    let _ = writeln!(csv, "conclusive,{}", rep.conclusive);
    out.write("vss.csv", csv)?;
    if let (Some(s), Some(d)) = (&rep.stochastic, &rep.deterministic) {
        let rows = [
            ("stochastic".to_string(), &s.kpis),
            ("deterministic".to_string(), &d.kpis),
        ];
        out.write("kpis.csv", report::kpi_csv(rows.iter().map(|(l, k)| (l.as_str(), *k)))?)?;
        report::kpi_charts(out, "Stochastic vs deterministic design", &rows)?;
    }
    out.write_json("vss.json", &rep)?;
    eprintln!("vss {}", fmt_num(rep.vss));
    Ok(conclusive_code(rep.conclusive))
}

#[derive(Serialize)]
struct Comparison<'a> {
    mcp_not_above_scp: Option<bool>,
    #[serde(flatten)]
    report: &'a ComparisonReport,
}

fn compare(run: &Run, out: &mut Outputs, patterns: bool) -> Result<u8> {
    let inst = run.load_instance()?;
    let opts = run.cfg.analysis_options();
    let (rep, title) = if patterns {
        (compare_patterns(&inst, &opts)?, "Operational patterns")
    } else {
        (compare_consistency(&inst, &opts)?, "Driver consistency")
    };
    let rows: Vec<(String, &relaynet::analysis::KpiReport)> =
        rep.rows.iter().map(|r| (r.label.clone(), &r.report.kpis)).collect();
    out.write("comparison.csv", report::kpi_csv(rows.iter().map(|(l, k)| (l.as_str(), *k)))?)?;
    report::kpi_charts(out, title, &rows)?;
    let summary = Comparison {
        mcp_not_above_scp: if patterns { rep.mcp_not_above_scp(1e-6) } else { None },
        report: &rep,
    };
    out.write_json("comparison.json", &summary)?;
    for r in &rep.rows {
        eprintln!("{}: {}", r.label, fmt_num(r.report.objective));
    }
    Ok(conclusive_code(rep.rows.iter().all(|r| r.report.is_conclusive())))
}

fn import(run: &Run, out: &mut Outputs, solution: &Path) -> Result<u8> {
    let inst = run.load_instance()?;
    let (model, map) = formulate(&inst)?;
    let sol = import_solution(&model, config::open(solution)?)?;
    let design = DesignSolution::from_values(&map, &sol.values, inst.catalog.len());
    let scenarios: Vec<&Scenario> = inst.scenarios.scenarios.iter().collect();
    let recourse = extract_recourse(&inst, &map, &sol.values, &scenarios, sol.status);
    let kpis = compute_kpis_with(&inst, &design, &recourse, run.cfg.rate_basis)?;
    let objective = sol.objective.unwrap_or(f64::NAN);
    out.write("design.csv", report::design_csv(&inst, &design))?;
    out.write("recourse.csv", report::recourse_csv(&inst, &recourse))?;
    out.write("kpis.csv", report::kpi_csv([("imported", &kpis)])?)?;
    out.write("objective.txt", format!("{}\n", fmt_num(objective)))?;
    eprintln!("imported solution accepted: objective {}", fmt_num(objective));
    Ok(status_code(sol.status))
}
