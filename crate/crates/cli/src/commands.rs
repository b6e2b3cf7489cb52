//! Command-line surface: argument definitions and the three command families.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use omx_core::classifier::{ClassifyError, CoordinateReport};
use omx_core::constants::C;
use omx_core::cooling::{self, CoolingError, CoolingScenario, PumpedMode};
use omx_core::ring_cavity::{self, Branch, ModeProfile, RingCavityParams, RingError};
use omx_core::system_model::{MechanicalOscillator, ModelError};
use omx_core::{classify, ClassificationReport};
use rayon::prelude::*;
use thiserror::Error;
use toml::Table;

use crate::config::{self, ConfigError, SystemConfig};
use crate::report::{self, format_float, Document, Item, Provenance, SweepTable, TableError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Cooling(#[from] CoolingError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(name = "omx", version, about = "Optomechanical coupling classification and ring-cavity cooling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the couplings of a linearized system given as a preset or explicit matrices.
    Classify(ClassifyArgs),
    /// Ring cavity with a partially reflecting membrane.
    #[command(subcommand)]
    Ring(RingCommand),
    /// Membrane cooling in the ring cavity and in a single cavity.
    #[command(subcommand)]
    Cool(CoolCommand),
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// System configuration file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in preset id.
    #[arg(long)]
    pub preset: Option<String>,
    /// Preset parameter, repeatable.
    #[arg(short = 'p', long = "param", value_parser = parse_assignment, requires = "preset")]
    pub params: Vec<(String, f64)>,
    /// Report destination; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct RingArgs {
    /// File with a [ring] table of parameters; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Membrane amplitude reflectivity.
    #[arg(long)]
    pub r: Option<f64>,
    /// Front-mirror amplitude transmissivity.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Round-trip length, m.
    #[arg(long)]
    pub length: Option<f64>,
    /// Free-spectral-range index of the resonance pair.
    #[arg(long)]
    pub fsr_index: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum RingCommand {
    /// Resonant frequencies and splitting.
    Resonances(RingArgs),
    /// Intracavity response to a port-1 pump over one free spectral range.
    Sweep {
        #[command(flatten)]
        ring: RingArgs,
        /// Membrane displacement, m.
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Standing-wave mode profiles along the loop.
    Profile {
        #[command(flatten)]
        ring: RingArgs,
        /// Membrane displacement, m.
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Pump {
    #[default]
    Lower,
    Upper,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ScenarioArgs {
    /// File with a [cooling] table of parameters; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ring round-trip length, m.
    #[arg(long)]
    pub length: Option<f64>,
    /// Front-mirror amplitude transmissivity.
    #[arg(long)]
    pub t0: Option<f64>,
    /// Membrane reflectivity; chosen so that 2ω_s = Ω_m when omitted.
    #[arg(long)]
    pub r: Option<f64>,
    /// Pump wavelength, m.
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Membrane mass, kg.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Mechanical frequency, rad/s.
    #[arg(long)]
    pub omega_m: Option<f64>,
    /// Intrinsic mechanical damping, rad/s.
    #[arg(long)]
    pub gamma_m: Option<f64>,
    /// Bath temperature, K.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Input amplitude, √(photons/s). Overrides --power.
    #[arg(long)]
    pub pump_amplitude: Option<f64>,
    /// Input power, W.
    #[arg(long)]
    pub power: Option<f64>,
    /// Which standing-wave mode is pumped.
    #[arg(long, value_enum)]
    pub pump: Option<Pump>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CoolCommand {
    /// Ring-cavity optical damping, spring and phonon occupation.
    Ring(ScenarioArgs),
    /// Dispersive single-cavity damping at the same linewidth and input.
    Single {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Single-cavity length, m; defaults to the ring length.
        #[arg(long)]
        single_length: Option<f64>,
        /// Single-cavity linewidth, rad/s; defaults to the ring linewidth.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Ring-to-single damping ratio in its three closed forms.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        single_length: Option<f64>,
    },
    /// Time-domain ringdown of the linearized membrane and cavity.
    Ringdown {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Initial displacement, m.
        #[arg(long)]
        x0: Option<f64>,
        /// Integration time, s; 20/γ_eff when omitted.
        #[arg(long)]
        duration: Option<f64>,
        /// Trajectory CSV destination.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

/// Result of a successful command: warnings to show to the user.
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Classify(a) => cmd_classify(&a),
        Command::Ring(c) => cmd_ring(c),
        Command::Cool(c) => cmd_cool(c),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

/// Numeric parameters resolved from flags, an optional config table and defaults, recorded
/// in resolution order.
struct Params {
    section: &'static str,
    file: Table,
    resolved: Vec<(String, f64)>,
    integers: Vec<String>,
}

impl Params {
    fn load(path: Option<&Path>, section: &'static str) -> Result<Self, CliError> {
        let file = match path {
            None => Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                let mut t = config::parse_table(&text)?;
                if let Some(extra) = t.keys().find(|k| *k != section) {
                    return Err(ConfigError::Parse {
                        key: extra.clone(),
                        reason: format!("unknown section (expected [{section}])"),
                    }
                    .into());
                }
                match t.remove(section) {
                    Some(toml::Value::Table(s)) => s,
                    Some(_) => {
                        return Err(ConfigError::Parse {
                            key: section.into(),
                            reason: "expected a table".into(),
                        }
                        .into())
                    }
                    None => Table::new(),
                }
            }
        };
        Ok(Self {
            section,
            file,
            resolved: Vec::new(),
            integers: Vec::new(),
        })
    }

    fn file_value(&self, name: &str) -> Result<Option<f64>, CliError> {
        match self.file.get(name) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some(*f)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(ConfigError::Parse {
                key: format!("{}.{name}", self.section),
                reason: "expected a number".into(),
            }
            .into()),
        }
    }

    fn optional(&mut self, name: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(name)?,
        };
        if let Some(v) = v {
            self.resolved.push((name.to_string(), v));
        }
        Ok(v)
    }

    fn get(&mut self, name: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        let v = self.optional(name, flag)?.unwrap_or(default);
        if !self.resolved.iter().any(|(k, _)| k == name) {
            self.resolved.push((name.to_string(), v));
        }
        Ok(v)
    }

    fn integer(&mut self, name: &str, flag: Option<f64>, default: f64) -> Result<i64, CliError> {
        let v = self.get(name, flag, default)?;
        if v.fract() != 0.0 || v.abs() > 1e15 {
            return Err(CliError::Usage(format!("{name} must be an integer, got {v}")));
        }
        self.integers.push(name.to_string());
        Ok(v as i64)
    }

    /// Reject keys in the file that were never consulted, then build the input document.
    fn finish(&self, extra: &[(&str, &str)]) -> Result<Document, CliError> {
        if let Some(k) = self.file.keys().find(|k| !self.known(k)) {
            return Err(ConfigError::Parse {
                key: format!("{}.{k}", self.section),
                reason: "unknown parameter".into(),
            }
            .into());
        }
        let mut doc = Document::new();
        let mut s = doc.section(&[self.section]);
        for (k, v) in &self.resolved {
            if self.integers.contains(k) {
                s.put(k, Item::Int(*v as i64));
            } else {
                s.float(k, *v);
            }
        }
        for (k, v) in extra {
            s.string(k, *v);
        }
        Ok(doc)
    }

    fn known(&self, key: &str) -> bool {
        self.resolved.iter().any(|(k, _)| k == key) || KNOWN_OPTIONAL.contains(&key)
    }

    fn pairs(&self) -> Vec<(String, String)> {
        self.resolved
            .iter()
            .map(|(k, v)| {
                let text = if self.integers.contains(k) {
                    format!("{}", *v as i64)
                } else {
                    format_float(*v)
                };
                (k.clone(), text)
            })
            .collect()
    }
}

/// File keys that may legitimately be unused because a flag or another key superseded them.
const KNOWN_OPTIONAL: &[&str] = &["r", "power", "pump_amplitude", "duration", "gamma", "single_length"];

fn warning_strings<T: ToString>(w: &[T]) -> Vec<String> {
    w.iter().map(|x| x.to_string()).collect()
}

fn classify_input(args: &ClassifyArgs) -> Result<SystemConfig, CliError> {
    match (&args.config, &args.preset) {
        (Some(path), _) => Ok(config::parse_config(path)?),
        (None, Some(id)) => {
            let mut text = format!("[preset]\nid = \"{id}\"\n\n[preset.params]\n");
            for (k, v) in &args.params {
                text.push_str(&format!("{k} = {}\n", format_float(*v)));
            }
            Ok(config::parse_config_str(&text)?)
        }
        (None, None) => Err(CliError::Usage("classify needs --config or --preset".into())),
    }
}

fn coordinate_section(doc: &mut Document, c: &CoordinateReport) {
    doc.section(&["coordinate", c.label.as_str()])
        .boolean("dispersive", c.flags.dispersive)
        .boolean("coherent", c.flags.coherent)
        .boolean("dissipative", c.flags.dissipative)
        .boolean("rotation_conflict", c.rotation_conflict)
        .put("dispersive_shifts", Item::quantities(&c.dispersive_shifts, "rad/s/m"))
        .put(
            "coherent_mixing",
            Item::Quantity(Box::new(Item::matrix(&c.coherent_mixing)), "1/m"),
        )
        .put(
            "dissipative_derivs",
            Item::quantities(&c.dissipative_derivs, "(rad/s)^(1/2)/m"),
        )
        .put(
            "omega_coefficient",
            Item::Quantity(Box::new(Item::matrix(&c.omega_coefficient)), "rad/s/m"),
        )
        .put(
            "gamma_coefficient",
            Item::Quantity(Box::new(Item::matrix(&c.gamma_coefficient)), "(rad/s)^(1/2)/m"),
        )
        .put("basis", Item::matrix(&c.basis))
        .quantity("threshold", c.threshold, "rad/s/m")
        .quantity("gamma_threshold", c.gamma_threshold, "(rad/s)^(1/2)/m");
}

pub fn classification_document(rep: &ClassificationReport, labels: &[String]) -> Document {
    let mut doc = Document::new();
    let flags = rep.flags();
    doc.section(&["summary"])
        .boolean("dispersive", flags.dispersive)
        .boolean("coherent", flags.coherent)
        .boolean("dissipative", flags.dissipative)
        .boolean("rotation_conflict", rep.has_rotation_conflict());
    doc.section(&["eigenstructure"])
        .put("mode_labels", Item::strings(labels))
        .put("frequencies", Item::quantities(&rep.eigvals, "rad/s"))
        .put(
            "clusters",
            Item::Array(
                rep.clusters
                    .iter()
                    .map(|c| Item::Array(c.iter().map(|&i| Item::Int(i as i64)).collect()))
                    .collect(),
            ),
        )
        .quantity("degeneracy_tolerance", rep.tol_deg, "rad/s")
        .put("basis", Item::matrix(&rep.basis))
        .put(
            "gamma0",
            Item::Quantity(Box::new(Item::matrix(&rep.gamma0)), "(rad/s)^(1/2)"),
        );
    for c in &rep.coordinates {
        coordinate_section(&mut doc, c);
    }
    doc
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<Outcome, CliError> {
    let config = classify_input(args)?;
    let model = config.build()?;
    let rep = classify(&model)?;
    let input = config.to_document();
    let provenance = Provenance::new("classify", &input);
    let mut warnings = Vec::new();
    if rep.has_rotation_conflict() {
        warnings.push("degenerate modes are rotated differently by different coordinates; each such coordinate is reported in its own basis".to_string());
    }
    let body = classification_document(&rep, &model.mode_labels);
    emit(args.out.as_deref(), &report::report(&provenance, &input, body, &warnings))?;
    Ok(Outcome { warnings })
}

fn ring_params(p: &mut Params, a: &RingArgs) -> Result<RingCavityParams, CliError> {
    let r = p.get("r", a.r, 0.3)?;
    let t0 = p.get("t0", a.t0, 0.01)?;
    let length = p.get("length", a.length, 1.0)?;
    let n = p.integer("fsr_index", a.fsr_index, 1.0)?;
    Ok(RingCavityParams::new(r, t0, length, n)?)
}

fn cmd_ring(c: RingCommand) -> Result<Outcome, CliError> {
    match c {
        RingCommand::Resonances(a) => {
            let mut p = Params::load(a.config.as_deref(), "ring")?;
            let ring = ring_params(&mut p, &a)?;
            let res = ring_cavity::solve_resonances(&ring)?;
            let input = p.finish(&[])?;
            let prov = Provenance::new("ring resonances", &input);
            let mut body = Document::new();
            body.section(&["resonances"])
                .put("fsr_index", Item::Int(res.fsr_index))
                .quantity("k_minus", res.k_minus, "1/m")
                .quantity("k_plus", res.k_plus, "1/m")
                .quantity("omega_minus", res.omega_minus, "rad/s")
                .quantity("omega_plus", res.omega_plus, "rad/s")
                .quantity("omega_s", res.omega_s, "rad/s")
                .quantity("omega_s_from_phases", res.omega_s_from_phases(ring.length), "rad/s")
                .quantity("phase_minus", res.phase_minus, "rad")
                .quantity("phase_plus", res.phase_plus, "rad")
                .quantity("fsr", res.fsr, "rad/s");
            body.section(&["cavity"])
                .quantity("linewidth", ring_cavity::linewidth(&ring), "rad/s")
                .float("membrane_transmissivity", ring.t)
                .float("front_reflectivity", ring.r0);
            emit(a.out.as_deref(), &report::report(&prov, &input, body, &[]))?;
            Ok(Outcome::default())
        }
        RingCommand::Sweep { ring: a, x, points } => {
            let mut p = Params::load(a.config.as_deref(), "ring")?;
            let ring = ring_params(&mut p, &a)?;
            let x = p.get("x", x, 0.0)?;
            let n = p.integer("points", points.map(|v| v as f64), 2001.0)?;
            if n < 2 {
                return Err(CliError::Usage("points must be at least 2".into()));
            }
            let deltas: Vec<f64> = (0..n).map(|i| -PI + TAU * i as f64 / (n - 1) as f64).collect();
            let sweep = ring_cavity::response_sweep(&ring, x, &deltas)?;
            let rows = sweep.iter().map(|s| vec![s.delta, s.ratio_1, s.ratio_2]).collect();
            let table = SweepTable::new(&["delta", "ratio_1", "ratio_2"], rows)?;
            let input = p.finish(&[])?;
            let prov = Provenance::new("ring sweep", &input);
            emit(a.out.as_deref(), &table.render(&prov, &p.pairs()))?;
            Ok(Outcome::default())
        }
        RingCommand::Profile { ring: a, x, points } => {
            let mut p = Params::load(a.config.as_deref(), "ring")?;
            let ring = ring_params(&mut p, &a)?;
            let x = p.get("x", x, 0.0)?;
            let n = p.integer("points", points.map(|v| v as f64), 1001.0)?;
            if n < 1 {
                return Err(CliError::Usage("points must be positive".into()));
            }
            let zs: Vec<f64> = (0..n).map(|i| ring.length * i as f64 / n as f64).collect();
            let minus = ModeProfile::new(Branch::Minus, x, &ring)?.sample(&zs)?;
            let plus = ModeProfile::new(Branch::Plus, x, &ring)?.sample(&zs)?;
            let rows = zs
                .par_iter()
                .zip(minus.par_iter().zip(plus.par_iter()))
                .map(|(&z, (m, p))| vec![z, m.norm(), p.norm(), m.arg(), p.arg()])
                .collect();
            let table = SweepTable::new(&["z", "abs_p_minus", "abs_p_plus", "arg_p_minus", "arg_p_plus"], rows)?;
            let input = p.finish(&[])?;
            let prov = Provenance::new("ring profile", &input);
            emit(a.out.as_deref(), &table.render(&prov, &p.pairs()))?;
            Ok(Outcome::default())
        }
    }
}

/// Reference membrane at the worked comparison point.
const DEFAULT_OMEGA_M: f64 = TAU * 2.5e6;

struct Resolved {
    scenario: CoolingScenario,
    params: Params,
    pump: Pump,
}

fn scenario(a: &ScenarioArgs) -> Result<Resolved, CliError> {
    let mut p = Params::load(a.config.as_deref(), "cooling")?;
    let length = p.get("length", a.length, 0.4)?;
    let t0 = p.get("t0", a.t0, 0.01)?;
    let wavelength = p.get("wavelength", a.wavelength, 1064e-9)?;
    let mass = p.get("mass", a.mass, 1e-10)?;
    let omega_m = p.get("omega_m", a.omega_m, DEFAULT_OMEGA_M)?;
    let gamma_m = p.get("gamma_m", a.gamma_m, TAU)?;
    let temperature = p.get("temperature", a.temperature, 0.0)?;
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(CliError::Usage(format!("wavelength must be positive, got {wavelength}")));
    }
    let k_p = TAU / wavelength;
    let amplitude = match p.optional("pump_amplitude", a.pump_amplitude)? {
        Some(v) => v,
        None => {
            let power = p.get("power", a.power, 1e-3)?;
            if !(power >= 0.0) {
                return Err(CliError::Usage(format!("power must be non-negative, got {power}")));
            }
            (power / (omx_core::constants::HBAR * C * k_p)).sqrt()
        }
    };
    let fsr_index = (length / wavelength).round() as i64;
    let mech = MechanicalOscillator::new(mass, omega_m, gamma_m, temperature)?;
    let pump = a.pump.unwrap_or_default();
    let base = match p.optional("r", a.r)? {
        Some(r) => CoolingScenario::new(RingCavityParams::new(r, t0, length, fsr_index)?, mech, amplitude, k_p)?,
        None => CoolingScenario::tuned(length, t0, fsr_index, mech, amplitude, k_p)?,
    };
    let pumped = match pump {
        Pump::Lower => PumpedMode::Lower,
        Pump::Upper => PumpedMode::Upper,
    };
    Ok(Resolved {
        scenario: base.with_pumped(pumped),
        params: p,
        pump,
    })
}

fn pump_name(p: Pump) -> &'static str {
    match p {
        Pump::Lower => "lower",
        Pump::Upper => "upper",
    }
}

fn scenario_section(doc: &mut Document, s: &CoolingScenario, pump: Pump) {
    doc.section(&["scenario"])
        .string("pumped_mode", pump_name(pump))
        .quantity("linewidth", s.linewidth(), "rad/s")
        .quantity("omega_s", s.omega_s(), "rad/s")
        .float("membrane_reflectivity", s.ring.r)
        .put("fsr_index", Item::Int(s.ring.fsr_index))
        .float("sideband_ratio", s.sideband_ratio())
        .boolean("resolved_sideband", s.is_resolved())
        .float("tuning_mismatch", s.tuning_mismatch())
        .boolean("tuned", s.is_tuned())
        .quantity("k_p", s.k_p, "1/m")
        .quantity("pump_amplitude", s.pump_amplitude, "(photons/s)^(1/2)")
        .quantity("pump_power", s.pump_power(), "W");
}

fn cmd_cool(c: CoolCommand) -> Result<Outcome, CliError> {
    match c {
        CoolCommand::Ring(a) => {
            let Resolved { scenario: s, params, pump } = scenario(&a)?;
            let input = params.finish(&[("pump", pump_name(pump))])?;
            let prov = Provenance::new("cool ring", &input);
            let mut body = Document::new();
            scenario_section(&mut body, &s, pump);
            let (cm, cp) = cooling::static_amplitudes(&s)?;
            body.section(&["static_fields"])
                .put("c_minus", Item::Quantity(Box::new(Item::complex(cm)), "photons^(1/2)"))
                .put("c_plus", Item::Quantity(Box::new(Item::complex(cp)), "photons^(1/2)"))
                .quantity("static_force", cooling::static_force(&s)?, "N");
            let d = cooling::optical_spring_damping(&s)?;
            let lr = cooling::linear_response_damping(&s)?;
            body.section(&["damping"])
                .quantity("gamma_opt", d.gamma_opt, "rad/s")
                .quantity("omega_opt_sq", d.omega_opt_sq, "(rad/s)^2")
                .quantity("gamma_opt_linear_response", lr.gamma_opt, "rad/s")
                .quantity("dynamic_spring_linear_response", lr.dynamic_spring, "(rad/s)^2");
            let mut warnings = warning_strings(&d.warnings);
            match cooling::occupation_number(&s) {
                Ok(o) => {
                    body.section(&["occupation"])
                        .float("n_mean", o.n_mean)
                        .float("n_limit", o.n_limit)
                        .float("n_moments", o.n_moments)
                        .float("n_th", o.n_th)
                        .float("n_ba", o.n_ba)
                        .quantity("gamma_eff", o.gamma_eff, "rad/s")
                        .quantity("omega_eff_sq", o.omega_eff_sq, "(rad/s)^2")
                        .quantity("x_zpf", o.x_zpf, "m")
                        .quantity("g_eff", o.g_eff, "N");
                }
                Err(CoolingError::Unstable { gamma_eff }) => {
                    warnings.push(format!(
                        "total damping {gamma_eff:e} rad/s is not positive; the membrane is amplified and has no steady occupation"
                    ));
                }
                Err(e) => return Err(e.into()),
            }
            emit(a.out.as_deref(), &report::report(&prov, &input, body, &warnings))?;
            Ok(Outcome { warnings })
        }
        CoolCommand::Single {
            scenario: a,
            single_length,
            gamma,
        } => {
            let Resolved {
                scenario: s,
                mut params,
                pump,
            } = scenario(&a)?;
            let lsc = params.get("single_length", single_length, s.ring.length)?;
            let gamma = params.get("gamma", gamma, s.linewidth())?;
            let input = params.finish(&[("pump", pump_name(pump))])?;
            let prov = Provenance::new("cool single", &input);
            let omega_p = C * s.k_p;
            let d = cooling::single_cavity_damping(lsc, omega_p, gamma, &s.mech, s.pump_amplitude)?;
            let mut body = Document::new();
            body.section(&["single_cavity"])
                .quantity("length", lsc, "m")
                .quantity("linewidth", gamma, "rad/s")
                .quantity("omega_p", omega_p, "rad/s")
                .quantity("coupling", d.coupling, "rad/s/m")
                .put("amplitude", Item::Quantity(Box::new(Item::complex(d.amplitude)), "photons^(1/2)"))
                .put(
                    "amplitude_resolved",
                    Item::Quantity(Box::new(Item::complex(d.amplitude_resolved)), "photons^(1/2)"),
                )
                .quantity("gamma_opt", d.gamma_opt, "rad/s")
                .quantity("gamma_opt_resolved", d.gamma_opt_resolved, "rad/s");
            let lim = cooling::occupation_limit(&s.mech, gamma, d.gamma_opt)?;
            body.section(&["occupation"])
                .float("n_limit", lim.n_limit)
                .float("n_th", lim.n_th)
                .float("n_ba", lim.n_ba)
                .quantity("gamma_eff", lim.gamma_eff, "rad/s");
            let mut warnings = Vec::new();
            if s.mech.omega_m / gamma <= cooling::RESOLVED_SIDEBAND_RATIO {
                warnings.push(format!(
                    "sideband ratio Ω_m/γ = {:.3} is below {}; resolved-sideband closed forms are unreliable",
                    s.mech.omega_m / gamma,
                    cooling::RESOLVED_SIDEBAND_RATIO
                ));
            }
            emit(a.out.as_deref(), &report::report(&prov, &input, body, &warnings))?;
            Ok(Outcome { warnings })
        }
        CoolCommand::Compare {
            scenario: a,
            single_length,
        } => {
            let Resolved {
                scenario: s,
                mut params,
                pump,
            } = scenario(&a)?;
            let lsc = params.get("single_length", single_length, s.ring.length)?;
            let input = params.finish(&[("pump", pump_name(pump))])?;
            let prov = Provenance::new("cool compare", &input);
            let ratio = cooling::damping_ratio(&s, lsc, C * s.k_p)?;
            let mut body = Document::new();
            scenario_section(&mut body, &s, pump);
            body.section(&["ratio"])
                .float("from_rates", ratio.from_rates)
                .float("linewidth_form", ratio.linewidth_form)
                .float("reflectivity_form", ratio.reflectivity_form)
                .float("frequency_form", ratio.frequency_form)
                .float("max_relative_spread", ratio.max_relative_spread)
                .boolean("ring_favoured", ratio.linewidth_form > 1.0);
            body.section(&["threshold"])
                .quantity("sqrt_fsr_linewidth", ratio.threshold, "rad/s")
                .quantity("omega_m", s.mech.omega_m, "rad/s")
                .float("omega_m_over_threshold", ratio.threshold_ratio);
            let mut warnings = warning_strings(&cooling::optical_spring_damping(&s)?.warnings);
            if let Some((value, caveat)) = ratio.published {
                body.section(&["published"]).float("ratio", value).string("caveat", caveat);
                warnings.push(format!("reference configuration: {caveat}"));
            }
            emit(a.out.as_deref(), &report::report(&prov, &input, body, &warnings))?;
            Ok(Outcome { warnings })
        }
        CoolCommand::Ringdown {
            scenario: a,
            x0,
            duration,
            table,
        } => {
            let Resolved {
                scenario: s,
                mut params,
                pump,
            } = scenario(&a)?;
            let x0 = params.get("x0", x0, 1e-12)?;
            let closed = cooling::optical_spring_damping(&s)?.gamma_opt + s.mech.gamma_m;
            let duration = params.get("duration", duration, 20.0 / closed.abs())?;
            let input = params.finish(&[("pump", pump_name(pump))])?;
            let prov = Provenance::new("cool ringdown", &input);
            let out = cooling::ringdown_simulate(&s, x0, duration)?;
            let mut body = Document::new();
            scenario_section(&mut body, &s, pump);
            body.section(&["ringdown"])
                .quantity("gamma_eff_fit", out.gamma_eff, "rad/s")
                .quantity("gamma_eff_closed_form", out.gamma_eff_closed_form, "rad/s")
                .float(
                    "relative_difference",
                    (out.gamma_eff - out.gamma_eff_closed_form) / out.gamma_eff_closed_form,
                )
                .quantity("fit_start", out.fit_window.0, "s")
                .quantity("fit_end", out.fit_window.1, "s")
                .put("samples", Item::Int(out.times.len() as i64))
                .put("steps", Item::Int(out.steps as i64));
            let warnings = warning_strings(&cooling::optical_spring_damping(&s)?.warnings);
            if let Some(path) = table {
                let rows = (0..out.times.len())
                    .map(|i| vec![out.times[i], out.displacement[i], out.velocity[i], out.envelope[i]])
                    .collect();
                let t = SweepTable::new(&["t", "x", "v", "envelope"], rows)?;
                emit(Some(&path), &t.render(&prov, &params.pairs()))?;
            }
            emit(a.out.as_deref(), &report::report(&prov, &input, body, &warnings))?;
            Ok(Outcome { warnings })
        }
    }
}
