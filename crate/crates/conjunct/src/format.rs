//! Conjunction files: a JSON schema and a line-oriented `KEY = VALUE [unit]`
//! format modelled loosely on conjunction data messages.
//!
//! # KVN grammar
//!
//! ```text
//! COMMENT free text            ignored
//! OBJECT1_X = 7000123.5 [m]    position, m
//! OBJECT1_X_DOT = -1.2 [m/s]   velocity, m/s
//! OBJECT1_RADIUS = 5 [m]       hard-body radius, m
//! OBJECT1_CR_R = 25 [m**2]     lower triangle of the 6x6 state covariance
//! CROSS_R_TDOT = 0 [m**2/s]    optional object1 x object2 cross-covariance
//! ANY_OTHER_KEY = text         kept as metadata
//! ```
//!
//! Covariance labels `R, T, N, RDOT, TDOT, NDOT` index the same Cartesian
//! axes as the state (`X, Y, Z, X_DOT, Y_DOT, Z_DOT`); no frame rotation is
//! applied. Units are optional; when given they must match the key.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use conjunct_core::{JointState, StateCovariance, StateVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate key {key} (first defined on line {first})")]
    DuplicateKey { key: String, line: usize, first: usize },
    #[error("missing key {key} ({context})")]
    MissingKey { key: String, context: String },
    #[error("line {line}: {key} has unit [{found}], expected [{expected}]")]
    Unit { key: String, line: usize, found: String, expected: &'static str },
    #[error("line {line}: {key}: cannot parse `{value}` as a number")]
    Number { key: String, line: usize, value: String },
    #[error("cross-covariance incomplete: {present} of 36 CROSS_* keys present, first missing {missing}")]
    PartialCross { present: usize, missing: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Kvn,
}

impl Format {
    /// Guess from a file extension: `.kvn`, `.cdm` and `.txt` are KVN.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("kvn" | "cdm" | "txt") => Format::Kvn,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub position_m: [f64; 3],
    pub velocity_mps: [f64; 3],
    pub radius_m: f64,
}

pub type Matrix6 = [[f64; 6]; 6];

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// Full 12x12 joint covariance.
    Joint(Box<StateCovariance>),
    /// Per-object 6x6 blocks; a missing cross block means zero.
    Blocks { object1: Matrix6, object2: Matrix6, cross: Option<Matrix6> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjunctionFile {
    pub object1: ObjectState,
    pub object2: ObjectState,
    pub covariance: Covariance,
    pub metadata: BTreeMap<String, String>,
    /// Non-fatal observations made while parsing.
    pub warnings: Vec<String>,
}

impl ConjunctionFile {
    pub fn joint_covariance(&self) -> StateCovariance {
        match &self.covariance {
            Covariance::Joint(c) => **c,
            Covariance::Blocks { object1, object2, cross } => {
                let mut c = StateCovariance::zeros();
                for i in 0..6 {
                    for j in 0..6 {
                        c[(i, j)] = object1[i][j];
                        c[(i + 6, j + 6)] = object2[i][j];
                        if let Some(x) = cross {
                            c[(i, j + 6)] = x[i][j];
                            c[(j + 6, i)] = x[i][j];
                        }
                    }
                }
                c
            }
        }
    }

    pub fn state_vector(&self) -> StateVector {
        let mut v = StateVector::zeros();
        for (offset, obj) in [(0, &self.object1), (6, &self.object2)] {
            for i in 0..3 {
                v[offset + i] = obj.position_m[i];
                v[offset + 3 + i] = obj.velocity_mps[i];
            }
        }
        v
    }

    pub fn joint_state(&self) -> conjunct_core::Result<JointState> {
        JointState::new(self.state_vector(), self.joint_covariance(), self.object1.radius_m, self.object2.radius_m)
    }
}

pub fn parse_conjunction(bytes: &[u8], format: Format) -> Result<ConjunctionFile, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax { line: 0, message: format!("not UTF-8: {e}") })?;
    match format {
        Format::Json => parse_json(text),
        Format::Kvn => parse_kvn(text),
    }
}

// ---------------------------------------------------------------- JSON

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObject {
    position_m: Vec<f64>,
    velocity_mps: Vec<f64>,
    radius_m: f64,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCovariance {
    #[serde(skip_serializing_if = "Option::is_none")]
    cov12: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    object1_cov6: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    object2_cov6: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross6: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    object1: RawObject,
    object2: RawObject,
    covariance: RawCovariance,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

fn field_error(field: impl Into<String>, reason: impl Into<String>) -> FormatError {
    FormatError::Field { field: field.into(), reason: reason.into() }
}

fn finite_array<const N: usize>(field: &str, values: &[f64]) -> Result<[f64; N], FormatError> {
    if values.len() != N {
        return Err(field_error(field, format!("expected {N} values, found {}", values.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(field_error(format!("{field}[{i}]"), "not finite"));
    }
    let mut out = [0.0; N];
    out.copy_from_slice(values);
    Ok(out)
}

fn matrix6(field: &str, values: &[f64]) -> Result<Matrix6, FormatError> {
    let flat: [f64; 36] = finite_array(field, values)?;
    let mut m = [[0.0; 6]; 6];
    for (i, row) in m.iter_mut().enumerate() {
        row.copy_from_slice(&flat[6 * i..6 * i + 6]);
    }
    Ok(m)
}

fn flatten6(m: &Matrix6) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

fn object_from_raw(name: &str, raw: &RawObject) -> Result<ObjectState, FormatError> {
    let position_m = finite_array(&format!("{name}.position_m"), &raw.position_m)?;
    let velocity_mps = finite_array(&format!("{name}.velocity_mps"), &raw.velocity_mps)?;
    if !raw.radius_m.is_finite() || raw.radius_m <= 0.0 {
        return Err(field_error(format!("{name}.radius_m"), "must be positive and finite"));
    }
    Ok(ObjectState { position_m, velocity_mps, radius_m: raw.radius_m })
}

pub fn parse_json(text: &str) -> Result<ConjunctionFile, FormatError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
    let object1 = object_from_raw("object1", &raw.object1)?;
    let object2 = object_from_raw("object2", &raw.object2)?;
    let cov = &raw.covariance;
    let blocks = cov.object1_cov6.is_some() || cov.object2_cov6.is_some() || cov.cross6.is_some();
    let covariance = match (&cov.cov12, blocks) {
        (Some(_), true) => {
            return Err(field_error("covariance", "give either cov12 or the per-object blocks, not both"))
        }
        (None, false) => return Err(field_error("covariance", "needs cov12 or object1_cov6 + object2_cov6")),
        (Some(values), false) => {
            let flat: [f64; 144] = finite_array("covariance.cov12", values)?;
            Covariance::Joint(Box::new(StateCovariance::from_row_slice(&flat)))
        }
        (None, true) => {
            let get = |name: &str, v: &Option<Vec<f64>>| {
                v.as_deref().ok_or_else(|| field_error(format!("covariance.{name}"), "missing")).and_then(|v| matrix6(&format!("covariance.{name}"), v))
            };
            Covariance::Blocks {
                object1: get("object1_cov6", &cov.object1_cov6)?,
                object2: get("object2_cov6", &cov.object2_cov6)?,
                cross: cov.cross6.as_deref().map(|v| matrix6("covariance.cross6", v)).transpose()?,
            }
        }
    };
    Ok(ConjunctionFile { object1, object2, covariance, metadata: raw.metadata, warnings: Vec::new() })
}

pub fn to_json(file: &ConjunctionFile) -> String {
    let object = |o: &ObjectState| RawObject {
        position_m: o.position_m.to_vec(),
        velocity_mps: o.velocity_mps.to_vec(),
        radius_m: o.radius_m,
    };
    let covariance = match &file.covariance {
        Covariance::Joint(c) => RawCovariance {
            cov12: Some((0..12).flat_map(|i| (0..12).map(move |j| (i, j))).map(|(i, j)| c[(i, j)]).collect()),
            ..Default::default()
        },
        Covariance::Blocks { object1, object2, cross } => RawCovariance {
            cov12: None,
            object1_cov6: Some(flatten6(object1)),
            object2_cov6: Some(flatten6(object2)),
            cross6: cross.as_ref().map(flatten6),
        },
    };
    let raw = RawFile {
        object1: object(&file.object1),
        object2: object(&file.object2),
        covariance,
        metadata: file.metadata.clone(),
    };
    let mut out = serde_json::to_string_pretty(&raw).expect("plain data serializes");
    out.push('\n');
    out
}

// ---------------------------------------------------------------- KVN

const STATE_SUFFIXES: [&str; 6] = ["X", "Y", "Z", "X_DOT", "Y_DOT", "Z_DOT"];
const COV_LABELS: [&str; 6] = ["R", "T", "N", "RDOT", "TDOT", "NDOT"];

const UNIT_M: &str = "m";
const UNIT_MPS: &str = "m/s";
const UNIT_M2: &str = "m**2";
const UNIT_M2PS: &str = "m**2/s";
const UNIT_M2PS2: &str = "m**2/s**2";

fn covariance_unit(i: usize, j: usize) -> &'static str {
    match (i >= 3) as u8 + (j >= 3) as u8 {
        0 => UNIT_M2,
        1 => UNIT_M2PS,
        _ => UNIT_M2PS2,
    }
}

/// Canonical spelling of an accepted unit, or `None`.
fn normalize_unit(unit: &str) -> Option<&'static str> {
    let compact: String = unit.chars().filter(|c| !c.is_whitespace()).collect();
    match compact.replace('²', "**2").replace('^', "**").as_str() {
        "m" => Some(UNIT_M),
        "m/s" => Some(UNIT_MPS),
        "m**2" | "m2" => Some(UNIT_M2),
        "m**2/s" | "m2/s" => Some(UNIT_M2PS),
        "m**2/s**2" | "m2/s2" => Some(UNIT_M2PS2),
        _ => None,
    }
}

struct Entry {
    line: usize,
    value: String,
    unit: Option<String>,
}

/// Keys in the order they are written, with their units.
fn numeric_keys(with_cross: bool) -> Vec<(String, &'static str)> {
    let mut keys = Vec::new();
    for obj in ["OBJECT1", "OBJECT2"] {
        for (i, s) in STATE_SUFFIXES.iter().enumerate() {
            keys.push((format!("{obj}_{s}"), if i < 3 { UNIT_M } else { UNIT_MPS }));
        }
        keys.push((format!("{obj}_RADIUS"), UNIT_M));
        for i in 0..6 {
            for j in 0..=i {
                keys.push((format!("{obj}_C{}_{}", COV_LABELS[i], COV_LABELS[j]), covariance_unit(i, j)));
            }
        }
    }
    if with_cross {
        for i in 0..6 {
            for j in 0..6 {
                keys.push((format!("CROSS_{}_{}", COV_LABELS[i], COV_LABELS[j]), covariance_unit(i, j)));
            }
        }
    }
    keys
}

fn cross_key(i: usize, j: usize) -> String {
    format!("CROSS_{}_{}", COV_LABELS[i], COV_LABELS[j])
}

pub fn parse_kvn(text: &str) -> Result<ConjunctionFile, FormatError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with("COMMENT") {
            continue;
        }
        let (key, rest) = trimmed
            .split_once('=')
            .ok_or_else(|| FormatError::Syntax { line, message: format!("expected `KEY = VALUE`, found `{trimmed}`") })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(FormatError::Syntax { line, message: "empty key".into() });
        }
        let rest = rest.trim();
        let (value, unit) = match rest.strip_suffix(']').and_then(|r| r.rsplit_once('[')) {
            Some((v, u)) => (v.trim().to_string(), Some(u.trim().to_string())),
            None => (rest.to_string(), None),
        };
        if let Some(first) = entries.get(&key) {
            return Err(FormatError::DuplicateKey { key, line, first: first.line });
        }
        order.push(key.clone());
        entries.insert(key, Entry { line, value, unit });
    }

    let cross_present = (0..36).filter(|k| entries.contains_key(&cross_key(k / 6, k % 6))).count();
    if cross_present != 0 && cross_present != 36 {
        let missing = (0..36).map(|k| cross_key(k / 6, k % 6)).find(|k| !entries.contains_key(k)).expect("some missing");
        return Err(FormatError::PartialCross { present: cross_present, missing });
    }
    let expected = numeric_keys(cross_present == 36);

    let mut numbers: BTreeMap<String, f64> = BTreeMap::new();
    for (idx, (key, unit)) in expected.iter().enumerate() {
        let Some(entry) = entries.get(key) else {
            let context = expected[..idx]
                .iter()
                .rev()
                .find_map(|(k, _)| entries.get(k).map(|e| format!("expected after {k} on line {}", e.line)))
                .unwrap_or_else(|| format!("no preceding state keys; input has {} lines", text.lines().count()));
            return Err(FormatError::MissingKey { key: key.clone(), context });
        };
        if let Some(found) = &entry.unit {
            if normalize_unit(found) != Some(unit) {
                return Err(FormatError::Unit { key: key.clone(), line: entry.line, found: found.clone(), expected: unit });
            }
        }
        let value: f64 = entry
            .value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| FormatError::Number { key: key.clone(), line: entry.line, value: entry.value.clone() })?;
        numbers.insert(key.clone(), value);
    }

    let object = |obj: &str| -> Result<(ObjectState, Matrix6), FormatError> {
        let get = |s: &str| numbers[&format!("{obj}_{s}")];
        let state = ObjectState {
            position_m: [get("X"), get("Y"), get("Z")],
            velocity_mps: [get("X_DOT"), get("Y_DOT"), get("Z_DOT")],
            radius_m: get("RADIUS"),
        };
        if state.radius_m <= 0.0 {
            let line = entries[&format!("{obj}_RADIUS")].line;
            return Err(FormatError::Syntax { line, message: format!("{obj}_RADIUS must be positive") });
        }
        let mut cov = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..=i {
                let v = get(&format!("C{}_{}", COV_LABELS[i], COV_LABELS[j]));
                cov[i][j] = v;
                cov[j][i] = v;
            }
        }
        Ok((state, cov))
    };
    let (object1, cov1) = object("OBJECT1")?;
    let (object2, cov2) = object("OBJECT2")?;
    let mut warnings = Vec::new();
    let cross = if cross_present == 36 {
        let mut x = [[0.0; 6]; 6];
        for (i, row) in x.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = numbers[&cross_key(i, j)];
            }
        }
        Some(x)
    } else {
        warnings.push("no CROSS_* keys: cross-covariance between the objects taken as zero".to_string());
        None
    };
    let known: std::collections::BTreeSet<&str> = expected.iter().map(|(k, _)| k.as_str()).collect();
    let metadata = order
        .into_iter()
        .filter(|k| !known.contains(k.as_str()))
        .map(|k| {
            let e = &entries[&k];
            let value = match &e.unit {
                Some(u) => format!("{} [{u}]", e.value),
                None => e.value.clone(),
            };
            (k, value)
        })
        .collect();
    Ok(ConjunctionFile {
        object1,
        object2,
        covariance: Covariance::Blocks { object1: cov1, object2: cov2, cross },
        metadata,
        warnings,
    })
}

/// KVN text for a conjunction file. A joint covariance is written as its
/// two diagonal blocks plus the full cross block.
pub fn to_kvn(file: &ConjunctionFile) -> String {
    let (cov1, cov2, cross) = match &file.covariance {
        Covariance::Blocks { object1, object2, cross } => (*object1, *object2, *cross),
        Covariance::Joint(c) => {
            let block = |r: usize, col: usize| {
                let mut m = [[0.0; 6]; 6];
                for (i, row) in m.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = c[(r + i, col + j)];
                    }
                }
                m
            };
            (block(0, 0), block(6, 6), Some(block(0, 6)))
        }
    };
    let mut out = String::new();
    for (k, v) in &file.metadata {
        let _ = writeln!(out, "{k} = {v}");
    }
    for (obj, state, cov) in [("OBJECT1", &file.object1, &cov1), ("OBJECT2", &file.object2, &cov2)] {
        for i in 0..3 {
            let _ = writeln!(out, "{obj}_{} = {:?} [{UNIT_M}]", STATE_SUFFIXES[i], state.position_m[i]);
        }
        for i in 0..3 {
            let _ = writeln!(out, "{obj}_{} = {:?} [{UNIT_MPS}]", STATE_SUFFIXES[i + 3], state.velocity_mps[i]);
        }
        let _ = writeln!(out, "{obj}_RADIUS = {:?} [{UNIT_M}]", state.radius_m);
        for i in 0..6 {
            for j in 0..=i {
                let _ = writeln!(out, "{obj}_C{}_{} = {:?} [{}]", COV_LABELS[i], COV_LABELS[j], cov[i][j], covariance_unit(i, j));
            }
        }
    }
    if let Some(x) = cross {
        for i in 0..6 {
            for j in 0..6 {
                let _ = writeln!(out, "{} = {:?} [{}]", cross_key(i, j), x[i][j], covariance_unit(i, j));
            }
        }
    }
    out
}
