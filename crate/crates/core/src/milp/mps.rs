//! MPS export and import.
//!
//! The writer follows the fixed-format section layout (NAME, ROWS, COLUMNS
//! with integrality markers, RHS, BOUNDS, ENDATA) but separates fields by
//! whitespace, so names longer than eight characters survive a round trip.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::model::{MilpModel, Sense, VarKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const OBJ_ROW: &str = "OBJ";

pub fn write_mps<T: Scalar>(model: &MilpModel<T>) -> Result<String> {
    model.validate()?;
    if model.cons.iter().any(|c| c.name == OBJ_ROW) {
        return Err(Error::Validation(format!("row name {OBJ_ROW} is reserved")));
    }
    let num = |v: T| v.to_f64_lossy();
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name);
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ_ROW}");
    for c in &model.cons {
        let tag = match c.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        let _ = writeln!(out, " {tag}  {}", c.name);
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.cons.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            columns[j].push((i, num(a)));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in model.vars.iter().enumerate() {
        let int = v.kind.is_integral();
        if int != in_int {
            let kind = if int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER{marker:<8} 'MARKER'                 {kind}");
            marker += 1;
            in_int = int;
        }
        let _ = writeln!(out, "    {:<8}  {:<8}  {}", v.name, OBJ_ROW, num(v.obj));
        // Merge duplicate row entries so the parser sees one coefficient per cell.
        let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
        for &(i, a) in &columns[j] {
            *merged.entry(i).or_insert(0.0) += a;
        }
        for (i, a) in merged {
            let _ = writeln!(out, "    {:<8}  {:<8}  {}", v.name, model.cons[i].name, a);
        }
    }
    if in_int {
        let _ = writeln!(out, "    MARKER{marker:<8} 'MARKER'                 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &model.cons {
        let rhs = num(c.rhs);
        if rhs != 0.0 {
            let _ = writeln!(out, "    RHS       {:<8}  {}", c.name, rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &model.vars {
        match (v.lower, v.upper) {
            (None, None) => {
                let _ = writeln!(out, " FR BND       {}", v.name);
            }
            (lower, upper) => {
                match lower {
                    Some(l) => {
                        let _ = writeln!(out, " LO BND       {:<8}  {}", v.name, num(l));
                    }
                    None => {
                        let _ = writeln!(out, " MI BND       {}", v.name);
                    }
                }
                match upper {
                    Some(u) => {
                        let _ = writeln!(out, " UP BND       {:<8}  {}", v.name, num(u));
                    }
                    None if v.kind.is_integral() => {
                        let _ = writeln!(out, " PL BND       {}", v.name);
                    }
                    None => {}
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Parses an MPS document. Integer columns bounded to [0, 1] come back as
/// binaries; integer columns without explicit bounds get the conventional
/// [0, +inf).
pub fn parse_mps(text: &str) -> Result<MilpModel<f64>> {
    let err = |line: usize, msg: String| Error::Parse(format!("line {}: {msg}", line + 1));
    let number = |line: usize, s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| err(line, format!("bad number {s:?}")))
    };

    let mut model = MilpModel::<f64>::new("");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: BTreeMap<String, usize> = BTreeMap::new();
    let mut cols: BTreeMap<String, usize> = BTreeMap::new();
    let mut lower_set: Vec<bool> = Vec::new();
    let mut integer = false;
    let mut ended = false;

    for (ln, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match fields[0] {
                "NAME" => {
                    model.name = fields.get(1..).map(|f| f.join(" ")).unwrap_or_default();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(err(ln, format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err(ln, "data outside a section".into())),
            Section::Rows => {
                let [kind, name] = fields[..] else {
                    return Err(err(ln, "ROWS entries need a type and a name".into()));
                };
                let sense = match kind {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "E" => Sense::Eq,
                    "G" => Sense::Ge,
                    other => return Err(err(ln, format!("unknown row type {other}"))),
                };
                if rows.contains_key(name) {
                    return Err(err(ln, format!("duplicate row {name}")));
                }
                let id = model.add_constraint(name, Vec::new(), sense, 0.0);
                rows.insert(name.to_string(), id);
            }
            Section::Columns => {
                if fields.len() == 3 && fields[1] == "'MARKER'" {
                    integer = match fields[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return Err(err(ln, format!("unknown marker {other}"))),
                    };
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(ln, "COLUMNS entries need 3 or 5 fields".into()));
                }
                let name = fields[0];
                let j = match cols.get(name) {
                    Some(&j) => j,
                    None => {
                        let kind = if integer {
                            VarKind::Integer
                        } else {
                            VarKind::Continuous
                        };
                        let j = model.add_var(name, kind, Some(0.0), None, 0.0);
                        lower_set.push(false);
                        cols.insert(name.to_string(), j);
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = number(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.vars[j].obj += value;
                    } else {
                        let &i = rows
                            .get(pair[0])
                            .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                        model.cons[i].coeffs.push((j, value));
                    }
                }
            }
            Section::Rhs => {
                let pairs = match fields.len() {
                    2 | 4 => &fields[..],
                    3 | 5 => &fields[1..],
                    _ => return Err(err(ln, "bad RHS entry".into())),
                };
                for pair in pairs.chunks(2) {
                    let value = number(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        // Objective constant; the model has none, so it must be 0.
                        if value != 0.0 {
                            return Err(err(ln, "objective constants are not supported".into()));
                        }
                        continue;
                    }
                    let &i = rows
                        .get(pair[0])
                        .ok_or_else(|| err(ln, format!("unknown row {}", pair[0])))?;
                    model.cons[i].rhs = value;
                }
            }
            Section::Ranges => return Err(err(ln, "RANGES are not supported".into())),
            Section::Bounds => {
                let kind = fields[0];
                let (name, value) = match (kind, fields.len()) {
                    ("FR" | "MI" | "PL" | "BV", 3) => (fields[2], None),
                    ("FR" | "MI" | "PL" | "BV", 2) => (fields[1], None),
                    (_, 4) => (fields[2], Some(number(ln, fields[3])?)),
                    (_, 3) => (fields[1], Some(number(ln, fields[2])?)),
                    _ => return Err(err(ln, "bad BOUNDS entry".into())),
                };
                let &j = cols
                    .get(name)
                    .ok_or_else(|| err(ln, format!("unknown column {name}")))?;
                let v = &mut model.vars[j];
                let had_lower = std::mem::replace(&mut lower_set[j], true);
                match (kind, value) {
                    ("LO", Some(x)) => v.lower = Some(x),
                    ("UP", Some(x)) => {
                        v.upper = Some(x);
                        // Classic convention: a negative upper bound with no
                        // lower bound given makes the column unbounded below.
                        lower_set[j] = had_lower;
                        if x < 0.0 && !had_lower {
                            v.lower = None;
                        }
                    }
                    ("FX", Some(x)) => {
                        v.lower = Some(x);
                        v.upper = Some(x);
                    }
                    ("FR", None) => {
                        v.lower = None;
                        v.upper = None;
                    }
                    ("MI", None) => v.lower = None,
                    ("PL", None) => {
                        lower_set[j] = had_lower;
                        v.upper = None;
                    }
                    ("BV", None) => {
                        v.kind = VarKind::Binary;
                        v.lower = Some(0.0);
                        v.upper = Some(1.0);
                    }
                    ("LI", Some(x)) => {
                        v.kind = VarKind::Integer;
                        v.lower = Some(x);
                    }
                    ("UI", Some(x)) => {
                        lower_set[j] = had_lower;
                        v.kind = VarKind::Integer;
                        v.upper = Some(x);
                    }
                    _ => return Err(err(ln, format!("unsupported bound type {kind}"))),
                }
            }
        }
    }
    if !ended {
        return Err(Error::Parse("missing ENDATA".into()));
    }
    for v in &mut model.vars {
        if v.kind == VarKind::Integer && v.lower == Some(0.0) && v.upper == Some(1.0) {
            v.kind = VarKind::Binary;
        }
    }
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel<f64> {
        let mut m = MilpModel::new("sample");
        let x = m.add_var("X_s0", VarKind::Integer, Some(0.0), Some(10.0), 348.0);
        let b = m.add_var("Z_k0_w0", VarKind::Binary, None, None, 1278.75);
        let f = m.add_var("F_k0_a12_w0", VarKind::Continuous, Some(0.0), None, 0.0);
        let g = m.add_var("free", VarKind::Continuous, None, None, -1.0);
        m.add_constraint("eq3_s0_w0", vec![(x, -1.0), (f, 0.125)], Sense::Le, 0.0);
        m.add_constraint("eq5_k0_n0_t0_w0", vec![(b, -5.0), (f, -1.0)], Sense::Eq, -5.0);
        m.add_constraint("cap", vec![(x, 2.0), (g, 1.0)], Sense::Ge, -3.5);
        m
    }

    #[test]
    fn skeleton_and_markers() {
        let text = write_mps(&sample()).unwrap();
        for section in ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(text.lines().any(|l| l.starts_with(section)), "{section}");
        }
        let start = text.find("'INTORG'").unwrap();
        let end = text.find("'INTEND'").unwrap();
        assert!(text[start..end].contains("Z_k0_w0"));
        assert!(text.contains(" LO BND       Z_k0_w0   0"));
        assert!(text.contains(" UP BND       Z_k0_w0   1"));
    }

    #[test]
    fn round_trip_preserves_the_model() {
        let m = sample();
        let back = parse_mps(&write_mps(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn parser_rejects_garbage() {
        assert!(parse_mps("NAME x\nROWS\n N OBJ\nCOLUMNS\n    x  OBJ  abc\nENDATA\n").is_err());
        assert!(parse_mps("NAME x\nROWS\n N OBJ\n").is_err());
        assert!(parse_mps("NAME x\nROWS\n N OBJ\nCOLUMNS\n    x  nope  1\nENDATA\n").is_err());
    }

    #[test]
    fn parser_reads_classic_fixed_format() {
        let text = "\
NAME          TESTLP
ROWS
 N  COST
 L  LIM1
 G  LIM2
COLUMNS
    MARKER                 'MARKER'                 'INTORG'
    X1        COST         1.0   LIM1         1.0
    MARKER                 'MARKER'                 'INTEND'
    X2        COST         2.0   LIM2         1.0
RHS
    RHS       LIM1         4.0   LIM2         1.0
BOUNDS
 UP BND       X1           4.0
ENDATA
";
        let m = parse_mps(text).unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.vars[0].kind, VarKind::Integer);
        assert_eq!(m.vars[0].upper, Some(4.0));
        assert_eq!(m.cons[0].rhs, 4.0);
        assert_eq!(m.cons[1].sense, Sense::Ge);
        assert_eq!(m.vars[1].obj, 2.0);
    }
}
