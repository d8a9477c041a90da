//! Solution documents: `variable,value` CSV rows keyed by column name.

use std::collections::BTreeMap;

use super::bnb::{integral_violation, MilpSolution, MilpStatus, SolveStats};
use crate::error::{Error, Result};
use crate::milp::MilpModel;

const TOL: f64 = 1e-6;
/// Rows listed in a rejection message.
const WORST_ROWS: usize = 5;

pub fn write_solution<W: std::io::Write>(writer: W, model: &MilpModel<f64>, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Usage(format!("cannot write solution: {e}"));
    w.write_record(["variable", "value"]).map_err(io)?;
    for (v, x) in model.vars.iter().zip(values) {
        w.write_record([v.name.as_str(), &x.to_string()]).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::Usage(format!("cannot write solution: {e}")))
}

/// Reads name/value pairs, rejecting duplicates and malformed rows.
pub fn read_solution<R: std::io::Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let bad = |reason: String| Error::InvalidRow {
            what: "solution",
            row,
            reason,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let (Some(name), Some(value)) = (rec.get(0), rec.get(1)) else {
            return Err(bad("expected variable,value".into()));
        };
        let value: f64 = value
            .parse()
            .map_err(|_| bad(format!("bad value {value:?}")))?;
        if !value.is_finite() {
            return Err(bad(format!("non-finite value for {name}")));
        }
        if out.insert(name.to_string(), value).is_some() {
            return Err(bad(format!("variable {name} listed twice")));
        }
    }
    Ok(out)
}

/// Validates an external solution against `model` and recomputes its
/// objective. Columns absent from the document are taken as 0 when 0 is
/// within their bounds.
pub fn import_solution<R: std::io::Read>(model: &MilpModel<f64>, doc: R) -> Result<MilpSolution<f64>> {
    model.validate()?;
    let mut given = read_solution(doc)?;
    let mut values = Vec::with_capacity(model.num_vars());
    for v in &model.vars {
        let x = match given.remove(&v.name) {
            Some(x) => x,
            None => {
                let zero_ok = v.lower.is_none_or(|l| l <= TOL) && v.upper.is_none_or(|u| u >= -TOL);
                if !zero_ok {
                    return Err(Error::Rejected(format!(
                        "variable {} is missing and 0 is outside its bounds",
                        v.name
                    )));
                }
                0.0
            }
        };
        values.push(x);
    }
    if let Some(name) = given.keys().next() {
        return Err(Error::Rejected(format!("unknown variable {name}")));
    }
    if let Some(&j) = model.bound_violations(&values, TOL).first() {
        let v = &model.vars[j];
        return Err(Error::Rejected(format!(
            "variable {} = {} violates bounds [{:?}, {:?}]",
            v.name, values[j], v.lower, v.upper
        )));
    }
    if let Some(j) = integral_violation(model, &values, TOL) {
        return Err(Error::Rejected(format!(
            "variable {} = {} is not integral",
            model.vars[j].name, values[j]
        )));
    }
    let violated = model.violations(&values, TOL);
    if !violated.is_empty() {
        let worst: Vec<String> = violated
            .iter()
            .take(WORST_ROWS)
            .map(|&(i, r)| format!("{} (by {r:.3e})", model.cons[i].name))
            .collect();
        return Err(Error::Rejected(format!(
            "{} constraint(s) violated; worst: {}",
            violated.len(),
            worst.join(", ")
        )));
    }
    let objective = model.objective_value(&values);
    Ok(MilpSolution {
        status: MilpStatus::Feasible,
        objective: Some(objective),
        values,
        bound: None,
        stats: SolveStats::default(),
    })
}
