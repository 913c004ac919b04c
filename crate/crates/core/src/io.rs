//! On-disk formats: objective JSON with hex-float numbers, trace CSVs and
//! flat `key=value` configuration files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::analysis::{ClassTrace, StepRecord};
use crate::error::{Error, Result};
use crate::generators::{GroundTruthRecord, GroundTruthTrace, StepData};
use crate::hermite::{Knot, PiecewiseObjective, QuinticSegment};
use crate::linalg::{SymMatrix, Vector};
use crate::methods::IterateTrace;

/// C99 hexadecimal form of a finite double, e.g. `0x1.8p-1`.
pub fn format_hex(v: f64) -> String {
    let sign = if v.is_sign_negative() { "-" } else { "" };
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = v.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if biased == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if biased == 0 { (0, -1022) } else { (1, biased - 1023) };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    format!("{sign}0x{lead}{frac}p{exp:+}")
}

pub fn parse_hex(s: &str) -> Result<f64> {
    hexf_parse::parse_hexf64(s.trim(), false).map_err(|e| Error::Parse(format!("bad hex float `{s}`: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Hex(f64);

impl Serialize for Hex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_hex(self.0))
    }
}

impl<'de> Deserialize<'de> for Hex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_hex(&s).map(Hex).map_err(de::Error::custom)
    }
}

mod hex_field {
    use super::Hex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        Hex(*v).serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        Hex::deserialize(deserializer).map(|h| h.0)
    }
}

#[derive(Serialize, Deserialize)]
struct KnotDoc {
    x: Hex,
    f: Hex,
    g: Hex,
    #[serde(rename = "H")]
    h: Hex,
}

#[derive(Serialize, Deserialize)]
struct SegmentDoc {
    c0: Hex,
    c1: Hex,
    c2: Hex,
    c3: Hex,
    c4: Hex,
    c5: Hex,
    length: Hex,
    base: Hex,
}

#[derive(Serialize, Deserialize)]
struct TailsDoc {
    left: Hex,
    right: Hex,
}

#[derive(Serialize, Deserialize)]
struct ObjectiveDoc {
    dim: usize,
    knots: Vec<KnotDoc>,
    segments: Vec<SegmentDoc>,
    tails: TailsDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partner: Option<Box<ObjectiveDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<ObjectiveMeta>,
}

/// Generation parameters stored alongside an objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveMeta {
    pub family: String,
    #[serde(with = "hex_field")]
    pub eps: f64,
    #[serde(with = "hex_field")]
    pub alpha: f64,
    #[serde(with = "hex_field")]
    pub tolerance: f64,
    pub k_target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl ObjectiveMeta {
    pub fn from_trace(trace: &GroundTruthTrace) -> Self {
        Self {
            family: trace.family.name().into(),
            eps: trace.eps,
            alpha: trace.alpha,
            tolerance: trace.tolerance,
            k_target: trace.k_target,
            preset: None,
        }
    }
}

fn to_doc(obj: &PiecewiseObjective, meta: Option<&ObjectiveMeta>) -> ObjectiveDoc {
    ObjectiveDoc {
        dim: obj.dim(),
        knots: obj.knots().iter().map(|k| KnotDoc { x: Hex(k.x), f: Hex(k.f), g: Hex(k.g), h: Hex(k.h) }).collect(),
        segments: obj
            .segments()
            .iter()
            .map(|s| {
                let c = s.coeffs.map(Hex);
                SegmentDoc {
                    c0: c[0],
                    c1: c[1],
                    c2: c[2],
                    c3: c[3],
                    c4: c[4],
                    c5: c[5],
                    length: Hex(s.length),
                    base: Hex(s.base),
                }
            })
            .collect(),
        tails: TailsDoc { left: Hex(obj.left_tail()), right: Hex(obj.right_tail()) },
        partner: obj.partner().map(|p| Box::new(to_doc(p, None))),
        meta: meta.cloned(),
    }
}

fn from_doc(doc: ObjectiveDoc) -> Result<PiecewiseObjective> {
    let expected = if doc.partner.is_some() { 2 } else { 1 };
    if doc.dim != expected {
        return Err(Error::Parse(format!("dim {} does not match the stored parts ({expected})", doc.dim)));
    }
    let knots = doc.knots.iter().map(|k| Knot::new(k.x.0, k.f.0, k.g.0, k.h.0)).collect();
    let segments = doc
        .segments
        .iter()
        .map(|s| QuinticSegment {
            coeffs: [s.c0.0, s.c1.0, s.c2.0, s.c3.0, s.c4.0, s.c5.0],
            length: s.length.0,
            base: s.base.0,
        })
        .collect();
    let partner = doc.partner.map(|p| from_doc(*p)).transpose()?;
    PiecewiseObjective::from_parts(knots, segments, doc.tails.left.0, doc.tails.right.0, partner)
}

pub fn objective_to_json(obj: &PiecewiseObjective, meta: Option<&ObjectiveMeta>) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&to_doc(obj, meta))?;
    text.push('\n');
    Ok(text)
}

pub fn objective_from_json(text: &str) -> Result<(PiecewiseObjective, Option<ObjectiveMeta>)> {
    let mut doc: ObjectiveDoc = serde_json::from_str(text)?;
    let meta = doc.meta.take();
    Ok((from_doc(doc)?, meta))
}

pub fn read_objective(path: &Path) -> Result<(PiecewiseObjective, Option<ObjectiveMeta>)> {
    objective_from_json(&fs::read_to_string(path)?)
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub const GROUND_TRUTH_COLUMNS: [&str; 8] = ["k", "x", "f", "g", "H", "lambda", "theta", "s"];

/// Ground-truth trace as CSV; the second coordinate of a 2-D family is
/// not included (see [`partner_path`]).
pub fn ground_truth_csv(trace: &GroundTruthTrace) -> Result<Vec<u8>> {
    let rows = trace.records.iter().map(|r| {
        let step = r.step;
        vec![
            r.k.to_string(),
            num(r.x),
            num(r.f),
            num(r.g),
            num(r.h),
            opt(step.and_then(|d| d.lambda)),
            opt(step.map(|d| d.theta)),
            opt(step.map(|d| d.s)),
        ]
    });
    csv_bytes(&GROUND_TRUTH_COLUMNS, rows)
}

/// `dir/name_partner.csv` for `dir/name.csv`.
pub fn partner_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_partner.csv"))
}

/// Writes the trace and, for a 2-D family, its partner file.
pub fn write_ground_truth(path: &Path, trace: &GroundTruthTrace) -> Result<()> {
    write_atomic(path, &ground_truth_csv(trace)?)?;
    if let Some(p) = &trace.partner {
        write_atomic(&partner_path(path), &ground_truth_csv(p)?)?;
    }
    Ok(())
}

fn parse_num(field: &str, column: &str, line: usize) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad number `{field}` in column {column}")))
}

fn parse_opt(field: &str, column: &str, line: usize) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse_num(field, column, line).map(Some)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(str::to_owned).collect();
        let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { header, rows })
    }

    fn has(&self, column: &str) -> bool {
        self.header.iter().any(|h| h == column)
    }

    fn index(&self, column: &str) -> Result<usize> {
        self.header.iter().position(|h| h == column).ok_or_else(|| Error::Parse(format!("missing column `{column}`")))
    }

    fn field<'a>(&self, row: &'a csv::StringRecord, column: &str) -> Result<&'a str> {
        Ok(row.get(self.index(column)?).unwrap_or(""))
    }

    fn num(&self, row: &csv::StringRecord, line: usize, column: &str) -> Result<f64> {
        parse_num(self.field(row, column)?, column, line)
    }

    fn opt(&self, row: &csv::StringRecord, line: usize, column: &str) -> Result<Option<f64>> {
        parse_opt(self.field(row, column)?, column, line)
    }
}

fn ground_truth_records(table: &Table) -> Result<Vec<GroundTruthRecord>> {
    let n = table.rows.len();
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let k = table.num(row, line, "k")? as usize;
            let (f, g, h) = (table.num(row, line, "f")?, table.num(row, line, "g")?, table.num(row, line, "H")?);
            let lambda = table.opt(row, line, "lambda")?;
            let step = match (table.opt(row, line, "theta")?, table.opt(row, line, "s")?) {
                (Some(theta), Some(s)) if i + 1 < n => {
                    let residual = lambda.map(|l| (h + l) * s + g);
                    Some(StepData { lambda, theta, s, residual })
                }
                _ => None,
            };
            Ok(GroundTruthRecord { k, x: table.num(row, line, "x")?, f, g, h, step })
        })
        .collect()
}

pub fn parse_ground_truth_csv(bytes: &[u8]) -> Result<Vec<GroundTruthRecord>> {
    ground_truth_records(&Table::parse(bytes)?)
}

/// Columns of a method trace for a `dim`-dimensional objective. The leading
/// columns are the summary; the rest carry what the class checks need.
pub fn method_trace_columns(dim: usize) -> Vec<&'static str> {
    let mut cols = vec!["k"];
    cols.extend(if dim == 2 { &["x", "y"][..] } else { &["x"][..] });
    cols.extend(["f", "gnorm", "lambda", "sigma_or_delta_or_omega", "step_norm", "rho", "success"]);
    if dim == 2 {
        cols.extend(["g1", "g2", "h11", "h12", "h22", "s1", "s2", "residual1", "residual2"]);
    } else {
        cols.extend(["g", "h", "s", "residual"]);
    }
    cols.extend(["model_decrease", "actual_decrease", "negative_curvature"]);
    cols
}

/// Method trace as CSV; `residual` is `(H + λI)s + g`.
pub fn method_trace_csv(trace: &IterateTrace) -> Result<Vec<u8>> {
    let dim = trace.final_x.dim();
    let rows = trace.records.iter().map(|r| {
        let mut row = vec![r.k.to_string()];
        row.extend(r.x.as_slice().iter().map(|&v| num(v)));
        row.extend([
            num(r.f),
            num(r.g.norm()),
            opt(r.multiplier),
            opt(r.parameter),
            num(r.step.norm()),
            num(r.rho),
            r.success.to_string(),
        ]);
        row.extend(r.g.as_slice().iter().map(|&v| num(v)));
        row.extend(if dim == 2 { r.h.entries() } else { vec![r.h.entries()[0]] }.into_iter().map(num));
        row.extend(r.step.as_slice().iter().map(|&v| num(v)));
        row.extend(r.residual.as_slice().iter().map(|&v| num(v)));
        row.extend([num(r.model_decrease), num(r.actual_decrease), r.negative_curvature.to_string()]);
        row
    });
    csv_bytes(&method_trace_columns(dim), rows)
}

fn parse_bool(field: &str, line: usize) -> Result<bool> {
    field.trim().parse().map_err(|_| Error::Parse(format!("line {line}: bad boolean `{field}`")))
}

fn method_class_trace(table: &Table) -> Result<ClassTrace> {
    let dim = if table.has("y") { 2 } else { 1 };
    let records = table
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i + 2;
            let n = |c: &str| table.num(row, line, c);
            let (g, h, step, driver_residual) = if dim == 2 {
                (
                    Vector::new2(n("g1")?, n("g2")?),
                    SymMatrix::new2(n("h11")?, n("h12")?, n("h22")?),
                    Vector::new2(n("s1")?, n("s2")?),
                    Vector::new2(n("residual1")?, n("residual2")?),
                )
            } else {
                (Vector::new1(n("g")?), SymMatrix::new1(n("h")?), Vector::new1(n("s")?), Vector::new1(n("residual")?))
            };
            Ok(StepRecord {
                k: n("k")? as usize,
                g,
                h,
                multiplier: table.opt(row, line, "lambda")?,
                step,
                residual: Some(-driver_residual),
                actual_decrease: Some(n("actual_decrease")?),
                success: parse_bool(table.field(row, "success")?, line)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassTrace { records })
}

/// Reads either a method trace or a ground-truth trace (with its partner
/// file if present) into the form the class checks consume.
pub fn read_class_trace(path: &Path) -> Result<ClassTrace> {
    let table = Table::parse(&fs::read(path)?)?;
    if table.has("theta") {
        let records = ground_truth_records(&table)?;
        let partner_file = partner_path(path);
        let partner = if partner_file.exists() {
            Some(parse_ground_truth_csv(&fs::read(&partner_file)?)?)
        } else {
            None
        };
        Ok(ClassTrace::from_ground_truth(&records, partner.as_deref()))
    } else {
        method_class_trace(&table)
    }
}

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("config line {}: empty key", i + 1)));
        }
        if map.insert(key.to_owned(), value.trim().to_owned()).is_some() {
            return Err(Error::Parse(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path)?)
}
