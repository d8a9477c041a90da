use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use relaynet::analysis::{fmt_num, write_kpi_csv, KpiReport, Recourse};
use relaynet::milp::{DesignSolution, Instance};
use relaynet::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Output directory that remembers what was written, for the manifest.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::Usage(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|e| Error::Usage(format!("cannot encode {name}: {e}")))?;
        drop_timings(&mut v);
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::Usage(format!("cannot encode {name}: {e}")))?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Wall-clock figures differ between identical runs; reports leave them out.
fn drop_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(drop_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(drop_timings),
        _ => {}
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize)]
struct InputDigest {
    name: String,
    sha256: Option<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config_sha256: String,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

/// Writes `manifest.json`: the command, seed, a hash of the canonical
/// config and of every input document, and the list of outputs.
pub fn write_manifest(out: &mut Outputs, command: &str, seed: u64, canonical_config: &str, inputs: &[(&'static str, PathBuf)]) -> Result<()> {
    let manifest = Manifest {
        tool: "relaynet",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config_sha256: sha256_hex(canonical_config.as_bytes()),
        inputs: inputs
            .iter()
            .map(|(name, path)| InputDigest {
                name: (*name).to_string(),
                sha256: fs::read(path).ok().map(|b| sha256_hex(&b)),
            })
            .collect(),
        outputs: out.files().to_vec(),
    };
    out.write_json("manifest.json", &manifest)
}

pub fn kpi_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a KpiReport)>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_kpi_csv(&mut buf, rows)?;
    Ok(buf)
}

/// Contracted truckers per opened service.
pub fn design_csv(inst: &Instance, design: &DesignSolution) -> String {
    let mut s = String::from("service,route,start_step,cycle,start_in_cycle,on_duty_hours,contract_fee,count\n");
    for svc in inst.catalog.services() {
        let count = design.x[svc.id];
        if count == 0 {
            continue;
        }
        let start = inst.tsn.arc(svc.legs[0]).tail.t;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            svc.id,
            svc.route_label(),
            start,
            svc.cycle,
            svc.start_in_cycle,
            fmt_num(svc.on_duty_hours),
            fmt_num(inst.first_stage_cost(svc)),
            count
        );
    }
    s
}

#[derive(serde::Deserialize)]
struct DesignRow {
    service: usize,
    count: u32,
}

/// Reads a design document; services not listed get no truckers.
pub fn read_design(path: &Path, inst: &Instance) -> Result<DesignSolution> {
    let file = crate::config::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut design = DesignSolution::zeros(inst.catalog.len());
    for (row, rec) in rdr.deserialize::<DesignRow>().enumerate() {
        let r = rec.map_err(|e| Error::InvalidRow {
            what: "design",
            row,
            reason: e.to_string(),
        })?;
        let slot = design.x.get_mut(r.service).ok_or_else(|| Error::InvalidRow {
            what: "design",
            row,
            reason: format!("unknown service {}", r.service),
        })?;
        *slot = r.count;
    }
    design.validate(inst)?;
    Ok(design)
}

/// One line per scenario: weight, recourse cost and what was used.
pub fn recourse_csv(inst: &Instance, recourse: &Recourse) -> String {
    let mut s = String::from("scenario,probability,recourse_cost,trucks,haulers,outsourced,outsourced_volume,status\n");
    for r in &recourse.scenarios {
        let scen = inst.scenarios.scenarios.iter().find(|w| w.id == r.scenario);
        let volume: f64 = scen.map_or(0.0, |w| r.outsourced.iter().map(|&k| w.volumes[k]).sum());
        let trucks: f64 = r.trucks.iter().map(|t| t.count).sum();
        let haulers: f64 = r.haulers.iter().map(|h| h.count).sum();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.scenario,
            fmt_num(r.probability),
            fmt_num(r.cost),
            fmt_num(trucks),
            fmt_num(haulers),
            r.outsourced.len(),
            fmt_num(volume),
            serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
        );
    }
    s
}

const PALETTE: [&str; 4] = ["#1f5fa8", "#e07b1a", "#3a9a4a", "#8a4fb0"];

/// Grouped vertical bar chart: one group per category, one bar per series.
pub fn bar_chart(title: &str, unit: &str, categories: &[String], series: &[(&str, Vec<f64>)]) -> String {
    let (w, h) = (720.0, 400.0);
    let (left, right, top, bottom) = (80.0, 20.0, 50.0, 70.0);
    let plot_w = w - left - right;
    let plot_h = h - top - bottom;
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().copied())
        .fold(0.0f64, f64::max);
    let top_value = nice_ceiling(max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        escape(title)
    );
    for i in 0..=5 {
        let v = top_value * i as f64 / 5.0;
        let y = top + plot_h - plot_h * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/>"##,
            left + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            thousands(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        top + plot_h / 2.0,
        escape(unit)
    );

    let groups = categories.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (g, cat) in categories.iter().enumerate() {
        let gx = left + group_w * g as f64 + group_w * 0.1;
        for (k, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0).max(0.0);
            let bh = if top_value > 0.0 { plot_h * v / top_value } else { 0.0 };
            let x = gx + bar_w * k as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{bh:.1}" fill="{}"><title>{}</title></rect>"#,
                top + plot_h - bh,
                bar_w * 0.95,
                PALETTE[k % PALETTE.len()],
                thousands(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            left + group_w * (g as f64 + 0.5),
            top + plot_h + 18.0,
            escape(cat)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{left}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#333333"/>"##,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    for (k, (name, _)) in series.iter().enumerate() {
        let x = left + 150.0 * k as f64;
        let y = h - 22.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/>"#,
            y - 10.0,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 18.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * mag >= v {
            return step * mag;
        }
    }
    10.0 * mag
}

fn thousands(v: f64) -> String {
    let n = v.round() as i64;
    let digits = n.abs().to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    if n < 0 {
        format!("-{out}")
    } else {
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Hours chart (driver, tractor, hauler) and cost chart for labelled KPIs.
pub fn kpi_charts(out: &mut Outputs, title: &str, rows: &[(String, &KpiReport)]) -> Result<()> {
    let cats: Vec<String> = rows.iter().map(|(l, _)| l.clone()).collect();
    let pick = |f: fn(&KpiReport) -> f64| rows.iter().map(|(_, k)| f(k)).collect::<Vec<f64>>();
    let hours = bar_chart(
        &format!("{title}: contracted driver hours and truck rental hours"),
        "hours",
        &cats,
        &[
            ("driver hours", pick(|k| k.total_contracted_driver_hours)),
            ("tractor hours", pick(|k| k.avg_tractor_rental_hours)),
            ("hauler hours", pick(|k| k.avg_hauler_rental_hours)),
        ],
    );
    out.write("hours.svg", hours)?;
    let cost = bar_chart(
        &format!("{title}: expected transportation cost"),
        "$",
        &cats,
        &[
            ("first stage", pick(|k| k.first_stage_cost)),
            ("expected recourse", pick(|k| k.expected_recourse_cost)),
            ("total", pick(|k| k.total_expected_cost)),
        ],
    );
    out.write("cost.svg", cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands_groups_digits() {
        assert_eq!(thousands(556494.4), "556,494");
        assert_eq!(thousands(12.0), "12");
        assert_eq!(thousands(-1234.0), "-1,234");
        assert_eq!(thousands(1000.0), "1,000");
    }

    #[test]
    fn nice_ceiling_rounds_up_to_a_readable_tick() {
        assert_eq!(nice_ceiling(684.0), 1000.0);
        assert_eq!(nice_ceiling(2.1), 2.5);
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(200.0), 200.0);
    }

    #[test]
    fn chart_has_one_bar_per_value() {
        let svg = bar_chart(
            "t",
            "h",
            &["a".into(), "b".into()],
            &[("x", vec![1.0, 2.0]), ("y", vec![3.0, 4.0])],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<title>").count(), 4);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn timings_are_dropped_at_any_depth() {
        let mut v = serde_json::json!({"a": {"wall_time_s": 1.5, "nodes": 3}, "b": [{"wall_time_s": 2}]});
        drop_timings(&mut v);
        assert_eq!(v, serde_json::json!({"a": {"nodes": 3}, "b": [{}]}));
    }
}
