#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_relaynet");

const LINE_NETWORK: &str = r#"[[hubs]]
id = 0
name = "A"

[[hubs]]
id = 1
name = "B"

[[hubs]]
id = 2
name = "C"

[[arcs]]
from = 0
to = 1
travel_steps = 1
distance_miles = 275.0

[[arcs]]
from = 1
to = 2
travel_steps = 1
distance_miles = 275.0
"#;

const DESK_GRID: &str = "[grid]\nstep_hours = 6.0\nnum_steps = 2\nnum_cycles = 1\ncycle_steps = 3\n";

/// Three-hub line, one commodity A to B over two 6-hour steps, one scenario
/// per entry of `volumes`. `extra` is appended to the config verbatim.
pub fn desk_dir(dir: &Path, volumes: &[f64], extra: &str) -> PathBuf {
    fs::write(dir.join("network.toml"), LINE_NETWORK).unwrap();
    fs::write(
        dir.join("commodities.csv"),
        "id,origin,destination,entry_step,due_step\n0,0,1,0,2\n",
    )
    .unwrap();
    let mut scen = String::from("scenario_id,probability,commodity_id,volume\n");
    for (w, v) in volumes.iter().enumerate() {
        scen.push_str(&format!("{w},{},0,{v}\n", 1.0 / volumes.len() as f64));
    }
    fs::write(dir.join("scenarios.csv"), scen).unwrap();
    let cfg = dir.join("relaynet.toml");
    fs::write(&cfg, format!("seed = 11\n{extra}\n{DESK_GRID}")).unwrap();
    cfg
}

pub fn relaynet(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(cfg)
        .arg("--output-dir")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Rows of a CSV file as string fields, header dropped.
pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

pub fn kpi_total(path: &Path, label: &str) -> f64 {
    csv_rows(path)
        .into_iter()
        .find(|r| r[0] == label)
        .unwrap_or_else(|| panic!("no row {label} in {}", path.display()))[7]
        .parse()
        .unwrap()
}

/// Every file under `dir` with its bytes, sorted by name.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
