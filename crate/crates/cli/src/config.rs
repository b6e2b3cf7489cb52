//! System configuration files: a preset with its parameters, or explicit matrices.
//!
//! ```toml
//! [preset]
//! id = "coupled_cavity"
//!
//! [preset.params]
//! omega1 = 1.0
//! omega2 = 1.0
//! omega_s = 0.5
//! g1 = 0.3
//! g2 = 0.3
//! ```
//!
//! Explicit systems give `n_modes`, `n_mech`, `H0` and `Hj` (and optionally `Gamma0`,
//! `Gammaj`) under `[explicit]`, with complex entries as `[re, im]` pairs.

use std::path::Path;

use omx_core::ring_cavity::RingCavityParams;
use omx_core::system_model::{LinearSystemModel, ModelError, Preset, PresetId};
use omx_core::{CMatrix, Complex64};
use thiserror::Error;
use toml::{Table, Value};

use crate::report::{Document, Item};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{key}: {reason}")]
    Parse { key: String, reason: String },
    #[error("invalid system: {0}")]
    Validation(#[from] ModelError),
}

fn parse_err(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        key: key.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSystem {
    pub n_modes: usize,
    pub n_mech: usize,
    pub h0: CMatrix,
    pub hj: Vec<CMatrix>,
    pub gamma0: CMatrix,
    pub gammaj: Vec<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemConfig {
    /// Parameter values in the preset's canonical order.
    Preset { id: PresetId, params: Vec<(String, f64)> },
    Explicit(ExplicitSystem),
}

pub fn parse_config(path: &Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parse the text of a TOML document into a table, reporting syntax errors by line.
pub fn parse_table(text: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>().map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        let key = match line {
            Some(l) => format!("line {l}"),
            None => "document".to_string(),
        };
        parse_err(key, e.message().to_string())
    })
}

pub fn parse_config_str(text: &str) -> Result<SystemConfig, ConfigError> {
    let table = parse_table(text)?;
    let config = match (table.get("preset"), table.get("explicit")) {
        (Some(_), Some(_)) => return Err(parse_err("preset", "give either [preset] or [explicit], not both")),
        (None, None) => return Err(parse_err("preset", "missing [preset] or [explicit] section")),
        (Some(p), None) => parse_preset(p)?,
        (None, Some(e)) => SystemConfig::Explicit(parse_explicit(e)?),
    };
    if let Some(extra) = table.keys().find(|k| *k != "preset" && *k != "explicit") {
        return Err(parse_err(extra.clone(), "unknown section"));
    }
    config.build()?;
    Ok(config)
}

fn as_table<'a>(v: &'a Value, key: &str) -> Result<&'a Table, ConfigError> {
    v.as_table().ok_or_else(|| parse_err(key, "expected a table"))
}

fn as_number(v: &Value, key: &str) -> Result<f64, ConfigError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(parse_err(key, "expected a number")),
    }
}

fn parse_preset(v: &Value) -> Result<SystemConfig, ConfigError> {
    let t = as_table(v, "preset")?;
    let id: PresetId = t
        .get("id")
        .ok_or_else(|| parse_err("preset.id", "missing required key"))?
        .as_str()
        .ok_or_else(|| parse_err("preset.id", "expected a string"))?
        .parse()
        .map_err(|reason: String| parse_err("preset.id", reason))?;
    if let Some(extra) = t.keys().find(|k| *k != "id" && *k != "params") {
        return Err(parse_err(format!("preset.{extra}"), "unknown key"));
    }
    let empty = Table::new();
    let given = match t.get("params") {
        Some(p) => as_table(p, "preset.params")?,
        None => &empty,
    };
    let names = id.parameter_names();
    if let Some(extra) = given.keys().find(|k| !names.contains(&k.as_str())) {
        return Err(parse_err(
            format!("preset.params.{extra}"),
            format!("unknown parameter for {id} (expected {})", names.join(", ")),
        ));
    }
    let mut params = Vec::with_capacity(names.len());
    for name in names {
        let key = format!("preset.params.{name}");
        let value = given.get(*name).ok_or_else(|| parse_err(&key, "missing required key"))?;
        params.push((name.to_string(), as_number(value, &key)?));
    }
    Ok(SystemConfig::Preset { id, params })
}

fn parse_complex(v: &Value, key: &str) -> Result<Complex64, ConfigError> {
    let pair = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| parse_err(key, "expected a complex entry [re, im]"))?;
    Ok(Complex64::new(as_number(&pair[0], key)?, as_number(&pair[1], key)?))
}

fn parse_matrix(v: &Value, key: &str, rows: usize, cols: Option<usize>) -> Result<CMatrix, ConfigError> {
    let r = v.as_array().ok_or_else(|| parse_err(key, "expected an array of rows"))?;
    if r.len() != rows {
        return Err(parse_err(key, format!("expected {rows} rows, found {}", r.len())));
    }
    let mut entries = Vec::new();
    let mut width = cols;
    for (i, row) in r.iter().enumerate() {
        let rkey = format!("{key}[{i}]");
        let row = row.as_array().ok_or_else(|| parse_err(&rkey, "expected an array of entries"))?;
        let w = *width.get_or_insert(row.len());
        if row.len() != w || w == 0 {
            return Err(parse_err(&rkey, format!("expected {w} entries, found {}", row.len())));
        }
        for (j, e) in row.iter().enumerate() {
            entries.push(parse_complex(e, &format!("{rkey}[{j}]"))?);
        }
    }
    Ok(CMatrix::from_row_slice(rows, width.unwrap_or(0), &entries))
}

fn parse_matrix_list(v: &Value, key: &str, count: usize, rows: usize, cols: Option<usize>) -> Result<Vec<CMatrix>, ConfigError> {
    let list = v.as_array().ok_or_else(|| parse_err(key, "expected an array of matrices"))?;
    if list.len() != count {
        return Err(parse_err(key, format!("expected {count} matrices, found {}", list.len())));
    }
    list.iter()
        .enumerate()
        .map(|(j, m)| parse_matrix(m, &format!("{key}[{j}]"), rows, cols))
        .collect()
}

fn parse_count(t: &Table, key: &str) -> Result<usize, ConfigError> {
    let full = format!("explicit.{key}");
    let v = t.get(key).ok_or_else(|| parse_err(&full, "missing required key"))?;
    match v.as_integer() {
        Some(n) if n >= 1 => Ok(n as usize),
        _ => Err(parse_err(&full, "expected a positive integer")),
    }
}

fn parse_explicit(v: &Value) -> Result<ExplicitSystem, ConfigError> {
    let t = as_table(v, "explicit")?;
    const KEYS: [&str; 6] = ["n_modes", "n_mech", "H0", "Hj", "Gamma0", "Gammaj"];
    if let Some(extra) = t.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(parse_err(format!("explicit.{extra}"), "unknown key"));
    }
    let n = parse_count(t, "n_modes")?;
    let k = parse_count(t, "n_mech")?;
    let required = |key: &str| t.get(key).ok_or_else(|| parse_err(format!("explicit.{key}"), "missing required key"));
    let h0 = parse_matrix(required("H0")?, "explicit.H0", n, Some(n))?;
    let hj = parse_matrix_list(required("Hj")?, "explicit.Hj", k, n, Some(n))?;
    let gamma0 = match t.get("Gamma0") {
        Some(g) => parse_matrix(g, "explicit.Gamma0", n, None)?,
        None => CMatrix::zeros(n, n),
    };
    let channels = gamma0.ncols();
    let gammaj = match t.get("Gammaj") {
        Some(g) => parse_matrix_list(g, "explicit.Gammaj", k, n, Some(channels))?,
        None => vec![CMatrix::zeros(n, channels); k],
    };
    Ok(ExplicitSystem {
        n_modes: n,
        n_mech: k,
        h0,
        hj,
        gamma0,
        gammaj,
    })
}

impl SystemConfig {
    pub fn preset(&self) -> Result<Option<Preset>, ConfigError> {
        let SystemConfig::Preset { id, params } = self else {
            return Ok(None);
        };
        let p = |i: usize| params[i].1;
        Ok(Some(match id {
            PresetId::SingleCavity => Preset::SingleCavity {
                omega_a: p(0),
                length: p(1),
            },
            PresetId::LigoArms => Preset::LigoArms { omega0: p(0), g: p(1) },
            PresetId::RacetrackDissipative => Preset::RacetrackDissipative {
                omega_a: p(0),
                gamma: p(1),
                g_gamma: p(2),
            },
            PresetId::ThreeMode => Preset::ThreeMode {
                omega1: p(0),
                omega2: p(1),
                g0: p(2),
            },
            PresetId::CoupledCavity => Preset::CoupledCavity {
                omega1: p(0),
                omega2: p(1),
                omega_s: p(2),
                g1: p(3),
                g2: p(4),
            },
            PresetId::RingCavityTwoMode => {
                let n = p(3);
                if n.fract() != 0.0 || n.abs() > 1e15 {
                    return Err(parse_err("preset.params.fsr_index", "expected an integer"));
                }
                let ring = RingCavityParams::new(p(0), p(1), p(2), n as i64).map_err(ModelError::from)?;
                Preset::RingCavityTwoMode { ring, k_p: p(4) }
            }
        }))
    }

    pub fn build(&self) -> Result<LinearSystemModel, ConfigError> {
        match self {
            SystemConfig::Preset { .. } => Ok(self.preset()?.expect("preset config").build()?),
            SystemConfig::Explicit(e) => Ok(LinearSystemModel::new(
                e.h0.clone(),
                e.hj.clone(),
                e.gamma0.clone(),
                e.gammaj.clone(),
            )?),
        }
    }

    /// Canonical document: fixed section and key order.
    pub fn to_document(&self) -> Document {
        let mut doc = Document::new();
        match self {
            SystemConfig::Preset { id, params } => {
                doc.section(&["preset"]).string("id", id.as_str());
                let mut s = doc.section(&["preset", "params"]);
                for (name, value) in params {
                    s.float(name, *value);
                }
            }
            SystemConfig::Explicit(e) => {
                doc.section(&["explicit"])
                    .put("n_modes", Item::Int(e.n_modes as i64))
                    .put("n_mech", Item::Int(e.n_mech as i64))
                    .put("H0", Item::matrix(&e.h0))
                    .put("Hj", Item::Array(e.hj.iter().map(Item::matrix).collect()))
                    .put("Gamma0", Item::matrix(&e.gamma0))
                    .put("Gammaj", Item::Array(e.gammaj.iter().map(Item::matrix).collect()));
            }
        }
        doc
    }

    pub fn to_canonical_string(&self) -> String {
        self.to_document().render()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUPLED: &str = r#"
[preset]
id = "coupled_cavity"

[preset.params]
g2 = 0.3
omega1 = 1
omega2 = 1.0
omega_s = 0.5
g1 = 0.3
"#;

    #[test]
    fn preset_parses_in_canonical_order() {
        let c = parse_config_str(COUPLED).unwrap();
        let SystemConfig::Preset { id, params } = &c else { panic!() };
        assert_eq!(*id, PresetId::CoupledCavity);
        let names: Vec<_> = params.iter().map(|p| p.0.as_str()).collect();
        assert_eq!(names, ["omega1", "omega2", "omega_s", "g1", "g2"]);
        assert_eq!(c.build().unwrap().n_modes, 2);
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let once = parse_config_str(COUPLED).unwrap().to_canonical_string();
        let twice = parse_config_str(&once).unwrap().to_canonical_string();
        assert_eq!(once, twice);
    }

    #[test]
    fn missing_key_is_named() {
        let text = COUPLED.replace("g1 = 0.3\n", "");
        match parse_config_str(&text) {
            Err(ConfigError::Parse { key, .. }) => assert_eq!(key, "preset.params.g1"),
            other => panic!("{other:?}"),
        }
        match parse_config_str("[explicit]\nn_modes = 1\n") {
            Err(ConfigError::Parse { key, .. }) => assert_eq!(key, "explicit.n_mech"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_hermitian_explicit_is_rejected() {
        let text = r#"
[explicit]
n_modes = 2
n_mech = 1
H0 = [[[1.0, 0.0], [0.5, 0.0]], [[0.2, 0.0], [1.0, 0.0]]]
Hj = [[[[0.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]]
"#;
        match parse_config_str(text) {
            Err(ConfigError::Validation(e)) => assert!(e.to_string().contains("Hermitian"), "{e}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_report_the_line() {
        match parse_config_str("[preset]\nid = \n") {
            Err(ConfigError::Parse { key, .. }) => assert_eq!(key, "line 2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn both_or_neither_section_rejected() {
        assert!(parse_config_str("").is_err());
        assert!(parse_config_str("[preset]\nid=\"single_cavity\"\n[explicit]\n").is_err());
        assert!(parse_config_str(&format!("{COUPLED}\n[extra]\n")).is_err());
    }
}
