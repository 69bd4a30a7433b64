use serde::{Deserialize, Serialize};

use crate::evolve::{DissipatorConfig, IntegratorConfig};
use crate::fluxqubit::{CircuitParams, FluxPath};
use crate::schedules::{GroundProtocolParams, Shape, SingletProtocolParams};
use crate::{Error, Result};

use super::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    /// Ground state of `H(0)`.
    #[default]
    Ground,
    /// `|0⟩ ⊗ |↓…↓⟩`.
    Bare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSpec {
    pub enabled: bool,
    /// Fock levels added for the refined run.
    pub fock_step: usize,
    /// Largest accepted change of the headline quantity.
    pub tolerance: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            enabled: true,
            fock_step: 20,
            tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSpec {
    pub g_start: f64,
    pub g_stop: f64,
    pub g_step: f64,
    pub omega_q: f64,
    pub levels: usize,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            g_start: 0.0,
            g_stop: 5.0,
            g_step: 0.05,
            omega_q: 1.0,
            levels: 32,
        }
    }
}

impl SpectrumSpec {
    /// Inclusive grid `g_start, g_start + g_step, …, ≤ g_stop`.
    pub fn g_values(&self) -> Vec<f64> {
        let n = ((self.g_stop - self.g_start) / self.g_step + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.g_start + k as f64 * self.g_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub g_min: Vec<f64>,
    /// Fast-stage durations; `T₃` is set equal to `T₄`.
    pub t4: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            g_min: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            t4: vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSpec {
    /// `k_B T / ħω_r`.
    pub temperatures: Vec<f64>,
    pub n_cut: usize,
    /// Larger cut used for the truncation check.
    pub n_cut_check: usize,
    /// Fock members lighter than this are skipped.
    pub min_weight: f64,
}

impl Default for ThermalSpec {
    fn default() -> Self {
        Self {
            temperatures: (0..=20).map(|k| k as f64 / 10.0).collect(),
            n_cut: 10,
            n_cut_check: 14,
            min_weight: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtectionSpec {
    pub g_f: Vec<f64>,
    pub epsilon_max: f64,
    pub omega_q: f64,
    pub duration: f64,
    pub runs: usize,
}

impl Default for ProtectionSpec {
    fn default() -> Self {
        Self {
            g_f: vec![0.0, 0.5, 1.0, 2.0],
            epsilon_max: 0.05,
            omega_q: 10.0,
            duration: 40.0,
            runs: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    Frequency,
    Coupling,
}

/// Static per-qubit factors `1 + ε_i` with `ε_i` uniform on `[−ε_max, ε_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderSpec {
    pub kind: DisorderKind,
    pub epsilon_max: f64,
    pub runs: usize,
}

impl Default for DisorderSpec {
    fn default() -> Self {
        Self {
            kind: DisorderKind::Coupling,
            epsilon_max: 0.1,
            runs: 10,
        }
    }
}

impl DisorderSpec {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.epsilon_max >= 0.0 && self.epsilon_max < 1.0) {
            e.push(format!("{prefix}epsilon_max must lie in [0, 1), got {}", self.epsilon_max));
        }
        if self.runs == 0 {
            e.push(format!("{prefix}runs must be at least 1"));
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DissipationSpec {
    /// `κ = ω_r / Q`.
    pub quality_factor: f64,
    pub temperatures: Vec<f64>,
    /// Fock levels in the initial thermal mixture.
    pub n_cut: usize,
    /// Solver settings; `kappa` and `temperature` are taken from the fields above.
    pub dissipator: DissipatorConfig,
}

impl Default for DissipationSpec {
    fn default() -> Self {
        Self {
            quality_factor: 100.0,
            temperatures: vec![0.0, 1.0],
            n_cut: 10,
            dissipator: DissipatorConfig::default(),
        }
    }
}

/// Evenly spaced points in units of π.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn radians(&self) -> Vec<f64> {
        let pi = std::f64::consts::PI;
        if self.points == 1 {
            return vec![pi * self.start];
        }
        (0..self.points)
            .map(|k| pi * (self.start + (self.stop - self.start) * k as f64 / (self.points - 1) as f64))
            .collect()
    }
}

/// Coupling pulse fed through the flux path: a ramp from the path's
/// starting coupling up to its peak, a ramp down to the final coupling,
/// then a hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSpec {
    pub t_up: f64,
    pub t_down: f64,
    pub t_hold: f64,
    /// Sample spacing of the synthesized table.
    pub dt: f64,
    pub up_shape: Shape,
    pub down_shape: Shape,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            t_up: 60.0,
            t_down: 0.1,
            t_hold: 1.0,
            dt: 0.01,
            up_shape: Shape::Cosine,
            down_shape: Shape::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxSpec {
    pub f_alpha: GridAxis,
    pub f_beta: GridAxis,
    pub path: FluxPath,
    pub pulse: PulseSpec,
}

impl Default for FluxSpec {
    fn default() -> Self {
        Self {
            f_alpha: GridAxis {
                start: 0.0,
                stop: 0.7,
                points: 15,
            },
            f_beta: GridAxis {
                start: 0.0,
                stop: 0.96,
                points: 15,
            },
            path: FluxPath::default(),
            pulse: PulseSpec::default(),
        }
    }
}

/// Everything a scenario run needs. Sections irrelevant to a scenario are
/// carried along but not validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    pub n_fock: usize,
    pub omega_r: f64,
    pub seed: u64,
    pub initial: InitialState,
    /// `n_qubits` and `omega_r` here are overwritten by the top-level values.
    pub ground: GroundProtocolParams,
    /// `n_qubits` and `omega_r` here are overwritten by the top-level values.
    pub singlet: SingletProtocolParams,
    pub integrator: IntegratorConfig,
    pub convergence: ConvergenceSpec,
    pub spectrum: SpectrumSpec,
    pub sweep: SweepSpec,
    pub thermal: ThermalSpec,
    pub protection: ProtectionSpec,
    pub disorder: DisorderSpec,
    pub dissipation: DissipationSpec,
    pub circuit: CircuitParams,
    pub flux: FluxSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            n_fock: 100,
            omega_r: 1.0,
            seed: 0,
            initial: InitialState::Ground,
            ground: GroundProtocolParams::default(),
            singlet: SingletProtocolParams::default(),
            integrator: IntegratorConfig::default(),
            convergence: ConvergenceSpec::default(),
            spectrum: SpectrumSpec::default(),
            sweep: SweepSpec::default(),
            thermal: ThermalSpec::default(),
            protection: ProtectionSpec::default(),
            disorder: DisorderSpec::default(),
            dissipation: DissipationSpec::default(),
            circuit: CircuitParams::default(),
            flux: FluxSpec::default(),
        }
    }
}

fn non_negative(e: &mut Vec<String>, name: &str, values: &[f64]) {
    if values.is_empty() {
        e.push(format!("{name} must not be empty"));
    }
    for v in values {
        if !(*v >= 0.0) || !v.is_finite() {
            e.push(format!("{name} entry {v} must be finite and non-negative"));
        }
    }
}

impl ExperimentConfig {
    pub fn ground_params(&self) -> GroundProtocolParams {
        GroundProtocolParams {
            n_qubits: self.n_qubits,
            omega_r: self.omega_r,
            ..self.ground.clone()
        }
    }

    pub fn singlet_params(&self) -> SingletProtocolParams {
        SingletProtocolParams {
            n_qubits: self.n_qubits,
            omega_r: self.omega_r,
            ..self.singlet.clone()
        }
    }

    /// `κ = ω_r / Q`.
    pub fn kappa(&self) -> f64 {
        self.omega_r / self.dissipation.quality_factor
    }

    /// Every violated constraint of the sections `scenario` reads.
    pub fn problems(&self, scenario: Scenario) -> Vec<String> {
        use Scenario::*;
        let mut e = Vec::new();
        if self.n_fock < 2 {
            e.push(format!("n_fock must be at least 2, got {}", self.n_fock));
        }
        if !(self.omega_r > 0.0) {
            e.push(format!("omega_r must be positive, got {}", self.omega_r));
        }
        let protocol = !matches!(scenario, Spectrum | Fluxmap);
        if scenario == Spectrum && self.n_qubits == 0 {
            e.push("n_qubits must be positive".into());
        }
        if protocol && (self.n_qubits < 2 || self.n_qubits % 2 != 0) {
            e.push(format!("n_qubits must be even and at least 2, got {}", self.n_qubits));
        }
        if protocol {
            e.extend(self.integrator.problems("integrator."));
            let c = &self.convergence;
            if !(c.tolerance > 0.0) {
                e.push("convergence.tolerance must be positive".into());
            }
        }
        if matches!(scenario, Harvest | Sweep | Thermal | Disorder | Dissipative) {
            e.extend(self.ground_params().problems("ground."));
        }
        match scenario {
            Spectrum => {
                let s = &self.spectrum;
                if !(s.g_step > 0.0) {
                    e.push("spectrum.g_step must be positive".into());
                }
                if !(s.g_start >= 0.0 && s.g_stop >= s.g_start) {
                    e.push(format!(
                        "spectrum needs 0 <= g_start <= g_stop, got {} / {}",
                        s.g_start, s.g_stop
                    ));
                }
                if !(s.omega_q > 0.0) {
                    e.push("spectrum.omega_q must be positive".into());
                }
                if s.levels == 0 {
                    e.push("spectrum.levels must be at least 1".into());
                }
            }
            Sweep => {
                non_negative(&mut e, "sweep.g_min", &self.sweep.g_min);
                non_negative(&mut e, "sweep.t4", &self.sweep.t4);
                for g in &self.sweep.g_min {
                    if *g >= self.ground.g_max {
                        e.push(format!("sweep.g_min entry {g} must stay below ground.g_max"));
                    }
                }
            }
            Thermal => {
                let t = &self.thermal;
                non_negative(&mut e, "thermal.temperatures", &t.temperatures);
                if t.n_cut == 0 {
                    e.push("thermal.n_cut must be at least 1".into());
                }
                if t.n_cut_check <= t.n_cut {
                    e.push("thermal.n_cut_check must exceed thermal.n_cut".into());
                }
                if self.n_fock <= t.n_cut_check {
                    e.push(format!("n_fock must exceed thermal.n_cut_check = {}", t.n_cut_check));
                }
                if !(t.min_weight >= 0.0 && t.min_weight < 1.0) {
                    e.push("thermal.min_weight must lie in [0, 1)".into());
                }
            }
            Singlet => e.extend(self.singlet_params().problems("singlet.")),
            Protect => {
                let p = &self.protection;
                non_negative(&mut e, "protection.g_f", &p.g_f);
                if !(p.epsilon_max >= 0.0 && p.epsilon_max < 1.0) {
                    e.push("protection.epsilon_max must lie in [0, 1)".into());
                }
                if !(p.omega_q > 0.0) {
                    e.push("protection.omega_q must be positive".into());
                }
                if !(p.duration > 0.0) {
                    e.push("protection.duration must be positive".into());
                }
                if p.runs == 0 {
                    e.push("protection.runs must be at least 1".into());
                }
                if self.n_qubits != 2 && self.n_qubits != 4 {
                    e.push("protection needs n_qubits = 2 or 4".into());
                }
            }
            Disorder => e.extend(self.disorder.problems("disorder.")),
            Dissipative => {
                let d = &self.dissipation;
                if !(d.quality_factor > 0.0) {
                    e.push("dissipation.quality_factor must be positive".into());
                }
                non_negative(&mut e, "dissipation.temperatures", &d.temperatures);
                if d.n_cut == 0 || d.n_cut >= self.n_fock {
                    e.push("dissipation.n_cut must lie in [1, n_fock)".into());
                }
                e.extend(d.dissipator.problems("dissipation.dissipator."));
            }
            Fluxmap | Fluxpath => {
                e.extend(self.circuit.problems("circuit."));
                if scenario == Fluxmap {
                    for (name, ax) in [("flux.f_alpha", &self.flux.f_alpha), ("flux.f_beta", &self.flux.f_beta)] {
                        if ax.points == 0 {
                            e.push(format!("{name}.points must be at least 1"));
                        }
                    }
                } else {
                    e.extend(self.flux.path.problems("flux.path."));
                    let p = &self.flux.pulse;
                    if !(p.t_up > 0.0) {
                        e.push("flux.pulse.t_up must be positive".into());
                    }
                    if !(p.t_down >= 0.0) || !(p.t_hold >= 0.0) {
                        e.push("flux.pulse.t_down and t_hold must be non-negative".into());
                    }
                    if !(p.dt > 0.0) {
                        e.push("flux.pulse.dt must be positive".into());
                    }
                }
            }
            Harvest => {}
        }
        e
    }

    pub fn validate(&self, scenario: Scenario) -> Result<()> {
        let e = self.problems(scenario);
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }
}

pub const PRESETS: [&str; 8] = ["fig2b", "fig3b", "fig3c", "fig4", "figS2", "figS7", "figS8", "figS9"];

/// Figure presets as TOML overlays on the defaults.
pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2b" => FIG2B,
        "fig3b" => FIG3B,
        "fig3c" => FIG3C,
        "fig4" => FIG4,
        "figS2" => FIGS2,
        "figS7" => FIGS7,
        "figS8" => FIGS8,
        "figS9" => FIGS9,
        _ => return None,
    })
}

const FIG2B: &str = r#"
n_fock = 100
initial = "ground"

[ground]
omega_max = 20.0
omega_min = 0.5
g_max = 4.5
g_min = 0.1
t1 = 6.5
t2 = 6.5
t3 = 0.5
t4 = 0.5
t_hold = 1.0
adiabatic_shape = "cosine"
fast_shape = "linear"
"#;

const FIG3B: &str = r#"
n_qubits = 4
n_fock = 100

[sweep]
g_min = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
t4 = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0]
"#;

const FIG3C: &str = r#"
n_qubits = 4
n_fock = 100
initial = "bare"

[thermal]
n_cut = 10
n_cut_check = 14
"#;

const FIG4: &str = r#"
n_qubits = 4
n_fock = 30

[singlet]
omega_max = 5.0
omega_low_a = 0.48
omega_low_b = 0.35
g_max = 1.8
t1 = 10.0
t2 = 150.0
t3 = 10.0

[protection]
g_f = [0.0, 0.5, 1.0, 2.0]
epsilon_max = 0.05
omega_q = 10.0
duration = 40.0
runs = 10

[integrator]
record_stride = 0.05
"#;

const FIGS2: &str = r#"
n_qubits = 4
n_fock = 100

[disorder]
kind = "coupling"
epsilon_max = 0.1
runs = 10
"#;

const FIGS7: &str = r#"
[flux.f_alpha]
start = 0.0
stop = 0.7
points = 15

[flux.f_beta]
start = 0.0
stop = 0.96
points = 15
"#;

const FIGS8: &str = r#"
n_qubits = 4
n_fock = 80

[circuit]
n_charge = 5

[flux.pulse]
t_up = 60.0
t_down = 0.1
t_hold = 1.0
dt = 0.01
"#;

const FIGS9: &str = r#"
n_qubits = 2
n_fock = 40
initial = "bare"

[ground]
omega_max = 10.0

[dissipation]
quality_factor = 100.0
temperatures = [0.0, 1.0]
n_cut = 10

[integrator]
record_stride = 0.01
"#;

/// Parses one `key=value` override; values that are not valid TOML are
/// taken as strings.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override `{text}` is not of the form key=value")]))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    Ok((key, value))
}

/// Layered configuration: defaults, then an optional preset, then file
/// text, then dotted-key overrides.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    pub preset: Option<String>,
    pub text: Option<String>,
    pub overrides: Vec<(String, toml::Value)>,
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> std::result::Result<(), String> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().ok_or("empty key")?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(format!("`{p}` in `{key}` is not a section")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// A schema table: the defaults with every optional field present.
fn schema() -> toml::Table {
    let mut cfg = ExperimentConfig::default();
    cfg.integrator.dt_max = Some(1.0);
    cfg.integrator.t_end = Some(1.0);
    cfg.singlet.g_f = Some(0.0);
    cfg.singlet.omega_low_b = Some(0.0);
    toml::Table::try_from(&cfg).expect("config serialises")
}

fn unknown_keys(input: &toml::Table, schema: &toml::Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in input {
        let path = format!("{prefix}{k}");
        match (schema.get(k), v) {
            (None, _) => out.push(format!("unknown key `{path}`")),
            (Some(toml::Value::Table(s)), toml::Value::Table(t)) => unknown_keys(t, s, &format!("{path}."), out),
            _ => {}
        }
    }
}

impl ConfigSource {
    /// Builds and validates the configuration, reporting every problem found.
    pub fn load(&self, scenario: Scenario) -> Result<ExperimentConfig> {
        let mut table = toml::Table::new();
        let mut errors = Vec::new();
        if let Some(name) = &self.preset {
            match preset_text(name) {
                Some(t) => merge(&mut table, toml::from_str(t).expect("preset parses")),
                None => errors.push(format!("unknown preset `{name}` (known: {})", PRESETS.join(", "))),
            }
        }
        if let Some(text) = &self.text {
            match toml::from_str::<toml::Table>(text) {
                Ok(t) => merge(&mut table, t),
                Err(e) => errors.push(format!("config file: {e}")),
            }
        }
        for (k, v) in &self.overrides {
            if let Err(e) = set_dotted(&mut table, k, v.clone()) {
                errors.push(format!("override: {e}"));
            }
        }
        unknown_keys(&table, &schema(), "", &mut errors);
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        cfg.validate(scenario)?;
        Ok(cfg)
    }
}

/// Reads `path` (if any) on top of `preset` and validates for `scenario`.
pub fn load_config(
    path: Option<&std::path::Path>,
    preset: Option<&str>,
    overrides: &[(String, toml::Value)],
    scenario: Scenario,
) -> Result<ExperimentConfig> {
    let text = path.map(std::fs::read_to_string).transpose()?;
    ConfigSource {
        preset: preset.map(str::to_string),
        text,
        overrides: overrides.to_vec(),
    }
    .load(scenario)
}
