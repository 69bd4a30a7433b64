//! Scenario drivers, figure presets, and run persistence.
//!
//! Each scenario reads one [`ExperimentConfig`], fans independent
//! trajectories out to the rayon pool and aggregates in a fixed order, so
//! outputs depend only on the configuration and seed.

mod config;
mod drivers;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::evolve::write_records_csv;
use crate::fluxqubit::{convergence_check as circuit_convergence, FluxPoint};
use crate::spectral::{compare_lowest_manifold, write_spectrum_csv};
use crate::{Error, Result};

pub use config::{
    load_config, parse_override, preset_text, ConfigSource, ConvergenceSpec, DisorderKind, DisorderSpec,
    DissipationSpec, ExperimentConfig, FluxSpec, GridAxis, InitialState, ProtectionSpec, PulseSpec, SpectrumSpec,
    SweepSpec, ThermalSpec, PRESETS,
};
pub use drivers::{
    constrained_harvest, constrained_harvest_with, coupled_pulse, dicke_target, disorder_monte_carlo,
    disorder_samples, dissipative_harvest, flux_map, flux_profile, protection_scan, run_ground_harvest,
    run_singlet_harvest, spectrum_scan, sweep_eef, thermal_initial_density, thermal_point, thermal_scan,
    ConstrainedResult, DisorderResult, DissipativePoint, HarvestResult, ProtectionScan, SingletResult, SweepGrid,
    ThermalPoint, ThermalRun, ThermalScan,
};

/// Twelve significant digits, the fixed CSV number format.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Spectrum,
    Harvest,
    Sweep,
    Thermal,
    Singlet,
    Protect,
    Disorder,
    Dissipative,
    Fluxmap,
    Fluxpath,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::Spectrum,
        Scenario::Harvest,
        Scenario::Sweep,
        Scenario::Thermal,
        Scenario::Singlet,
        Scenario::Protect,
        Scenario::Disorder,
        Scenario::Dissipative,
        Scenario::Fluxmap,
        Scenario::Fluxpath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::Harvest => "harvest",
            Scenario::Sweep => "sweep",
            Scenario::Thermal => "thermal",
            Scenario::Singlet => "singlet",
            Scenario::Protect => "protect",
            Scenario::Disorder => "disorder",
            Scenario::Dissipative => "dissipative",
            Scenario::Fluxmap => "fluxmap",
            Scenario::Fluxpath => "fluxpath",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}`")))
    }
}

/// Outcome of one convergence or invariant check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn within(name: &str, value: f64, limit: f64, what: &str) -> Self {
        Check {
            name: name.to_string(),
            passed: value.abs() <= limit,
            detail: format!("{what} = {value:.3e} (limit {limit:.1e})"),
        }
    }
}

/// Everything a scenario produced, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub summary: serde_json::Map<String, Value>,
    /// `(file name, contents)`.
    pub files: Vec<(String, Vec<u8>)>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            summary: serde_json::Map::new(),
            files: Vec::new(),
            checks: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn put(&mut self, key: &str, v: Value) {
        self.summary.insert(key.to_string(), v);
    }

    fn file(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }
}

fn refined(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.n_fock += cfg.convergence.fock_step;
    c.convergence.enabled = false;
    c
}

fn fock_check(cfg: &ExperimentConfig, name: &str, base: f64, refined_value: f64) -> Check {
    let d = refined_value - base;
    Check {
        name: format!("{name} under n_fock {} -> {}", cfg.n_fock, cfg.n_fock + cfg.convergence.fock_step),
        passed: d.abs() <= cfg.convergence.tolerance,
        detail: format!(
            "{base:.6} -> {refined_value:.6} (change {d:.2e}, tolerance {:.1e})",
            cfg.convergence.tolerance
        ),
    }
}

fn harvest_summary(out: &mut RunOutput, h: &HarvestResult) {
    out.put("eef", json!(h.eef));
    out.put("eef_time", json!(h.eef_time));
    out.put("t_f", json!(h.t_f));
    out.put("min_post_purity", json!(h.min_post_purity));
    out.put("stats", json!(h.trajectory.stats));
    out.checks.push(Check::within(
        "norm drift",
        h.trajectory.stats.max_norm_drift,
        1e-8,
        "max |‖ψ‖ − 1|",
    ));
    out.warnings.extend(h.trajectory.warnings.iter().cloned());
}

/// Runs `scenario` and collects its tables, summary and checks.
pub fn run_scenario(scenario: Scenario, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(scenario)?;
    let mut out = RunOutput::new(scenario);
    let converge = cfg.convergence.enabled;
    match scenario {
        Scenario::Spectrum => {
            let rows = spectrum_scan(cfg)?;
            out.put("rows", json!(rows.len()));
            out.file("spectrum.csv", |b| write_spectrum_csv(&rows, b))?;
            let g = cfg.spectrum.g_stop;
            if g > 0.0 {
                let cmp = compare_lowest_manifold(cfg.n_qubits, cfg.spectrum.omega_q, cfg.omega_r, g, cfg.n_fock)?;
                out.put("lowest_manifold", json!(cmp));
            }
            if converge {
                let r = refined(cfg);
                let last = |rows: &[crate::spectral::SpectrumRow]| {
                    rows.iter().rev().take(cfg.spectrum.levels).map(|x| x.energy_minus_e0).collect::<Vec<_>>()
                };
                let (a, b) = (last(&rows), last(&spectrum_scan(&r)?));
                let d = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                out.checks.push(Check::within(
                    &format!("spectrum at g = {g} under n_fock +{}", cfg.convergence.fock_step),
                    d,
                    cfg.convergence.tolerance,
                    "max level shift",
                ));
            }
        }
        Scenario::Harvest => {
            let h = run_ground_harvest(cfg)?;
            harvest_summary(&mut out, &h);
            out.file("trajectory.csv", |b| write_records_csv(&h.trajectory.records, b))?;
            if converge {
                let r = run_ground_harvest(&refined(cfg))?;
                out.checks.push(fock_check(cfg, "EEF", h.eef, r.eef));
            }
        }
        Scenario::Sweep => {
            let grid = sweep_eef(cfg)?;
            out.put("grid", json!(grid));
            out.file("sweep.csv", |b| grid.write_csv(b))?;
            if converge {
                let mut c = refined(cfg);
                c.sweep.g_min.truncate(1);
                c.sweep.t4.truncate(1);
                let r = sweep_eef(&c)?;
                out.checks.push(fock_check(cfg, "EEF at the first grid point", grid.eef[0][0], r.eef[0][0]));
            }
        }
        Scenario::Thermal => {
            let scan = thermal_scan(cfg)?;
            out.put("points", json!(scan.points));
            out.warnings.extend(scan.warnings.iter().cloned());
            out.file("thermal.csv", |b| scan.write_csv(b))?;
            if converge {
                let t_max = cfg.thermal.temperatures.iter().copied().fold(0.0, f64::max);
                let at_max = scan.points.iter().find(|p| p.temperature == t_max).map_or(f64::NAN, |p| p.eef);
                let wider = thermal_point(cfg, t_max, cfg.thermal.n_cut_check)?.point.eef;
                out.checks.push(Check::within(
                    &format!("EEF at T = {t_max} under n_cut {} -> {}", cfg.thermal.n_cut, cfg.thermal.n_cut_check),
                    wider - at_max,
                    0.01,
                    "change",
                ));
                let base = scan.points[0].eef;
                let r = thermal_point(&refined(cfg), cfg.thermal.temperatures[0], cfg.thermal.n_cut)?;
                out.checks.push(fock_check(cfg, "EEF at the first temperature", base, r.point.eef));
            }
        }
        Scenario::Singlet => {
            let s = run_singlet_harvest(cfg)?;
            out.put("final_s2", json!(s.final_s2));
            out.put("final_purity", json!(s.final_purity));
            out.put("fidelity_s", json!(s.fidelity_s));
            out.put("fidelity_s_prime", json!(s.fidelity_s_prime));
            out.put("s2_drift", json!(s.s2_drift));
            out.put("stats", json!(s.trajectory.stats));
            out.warnings.extend(s.trajectory.warnings.iter().cloned());
            out.file("trajectory.csv", |b| write_records_csv(&s.trajectory.records, b))?;
            if converge {
                let r = run_singlet_harvest(&refined(cfg))?;
                out.checks.push(fock_check(cfg, "final ⟨S²⟩", s.final_s2, r.final_s2));
            }
        }
        Scenario::Protect => {
            let scan = protection_scan(cfg)?;
            out.put("g_f", json!(scan.g_f));
            out.put("time_average_s2", json!(scan.time_average));
            out.put("samples", json!(scan.samples));
            out.file("protection.csv", |b| scan.write_csv(b))?;
            if converge {
                let mut c = refined(cfg);
                let k = scan.g_f.len() - 1;
                c.protection.g_f = vec![scan.g_f[k]];
                let r = protection_scan(&c)?;
                out.checks.push(fock_check(
                    cfg,
                    "time-averaged ⟨S²⟩ at the largest g_f",
                    scan.time_average[k],
                    r.time_average[0],
                ));
            }
        }
        Scenario::Disorder => {
            let d = disorder_monte_carlo(cfg)?;
            out.put("kind", json!(d.kind));
            out.put("eef", json!(d.eef));
            out.put("mean_eef", json!(d.mean_eef));
            out.put("stderr_eef", json!(d.stderr_eef));
            out.put("final_purity_mean", json!(d.final_purity_mean));
            out.put("clean_eef", json!(d.clean_eef));
            out.put("clean_final_purity", json!(d.clean_final_purity));
            out.put("samples", json!(d.samples));
            out.file("mean_trajectory.csv", |b| write_records_csv(&d.mean_records, b))?;
            if converge {
                let r = run_ground_harvest(&refined(cfg))?;
                out.checks.push(fock_check(cfg, "disorder-free EEF", d.clean_eef, r.eef));
            }
        }
        Scenario::Dissipative => {
            let points = dissipative_harvest(cfg)?;
            let mut rows = Vec::new();
            for p in &points {
                rows.push(json!({
                    "temperature": p.temperature,
                    "coherent_eef": p.coherent_eef,
                    "eef": p.eef,
                    "degradation": p.degradation,
                    "diagnostics": p.diagnostics,
                }));
                out.checks.push(Check::within(
                    &format!("trace at T = {}", p.temperature),
                    p.diagnostics.max_trace_error,
                    1e-6,
                    "max |Tr ρ − 1|",
                ));
                out.warnings.extend(p.trajectory.warnings.iter().cloned());
                out.file(&format!("dissipative_T{}.csv", p.temperature), |b| {
                    write_records_csv(&p.trajectory.records, b)
                })?;
                out.file(&format!("coherent_T{}.csv", p.temperature), |b| {
                    write_records_csv(&p.coherent.records, b)
                })?;
            }
            out.put("kappa", json!(cfg.kappa()));
            out.put("points", Value::Array(rows));
            if converge {
                let mut c = refined(cfg);
                c.dissipation.temperatures.truncate(1);
                c.dissipation.quality_factor = f64::INFINITY;
                let r = dissipative_harvest(&c)?;
                out.checks.push(fock_check(cfg, "coherent EEF", points[0].coherent_eef, r[0].coherent_eef));
            }
        }
        Scenario::Fluxmap => {
            let map = flux_map(cfg)?;
            let (wlo, whi) = map.omega_q_range();
            let (glo, ghi) = map.g_range();
            out.put("omega_q_range", json!([wlo, whi]));
            out.put("g_range", json!([glo, ghi]));
            out.put("failures", json!(map.failures()));
            let ambiguous = map.points.iter().filter(|p| p.spectrum.is_some_and(|s| s.ambiguous)).count();
            out.put("ambiguous", json!(ambiguous));
            out.file("landscape.csv", |b| map.write_csv(b))?;
            if converge {
                let corner = FluxPoint::sweet_spot(
                    *map.f_alpha.first().unwrap_or(&0.0),
                    *map.f_beta.last().unwrap_or(&0.0),
                );
                let rep = circuit_convergence(&cfg.circuit, &corner)?;
                out.checks.push(Check {
                    name: "circuit truncation at the strong-coupling corner".into(),
                    passed: rep.converged,
                    detail: format!(
                        "charge shift {:.2e}, oscillator shift {:.2e}, tolerance {:.2e}",
                        rep.charge_shift, rep.oscillator_shift, rep.tolerance
                    ),
                });
            }
        }
        Scenario::Fluxpath => {
            let res = constrained_harvest(cfg)?;
            harvest_summary(&mut out, &res.harvest);
            let peak = res.table.omega_q.iter().copied().fold(f64::INFINITY, f64::min);
            out.put(
                "omega_q_path",
                json!([res.table.omega_q[0], peak, res.table.omega_q[res.table.omega_q.len() - 1]]),
            );
            out.put("g_peak", json!(res.table.g.iter().copied().fold(0.0, f64::max)));
            out.file("path_table.csv", |b| res.table.write_csv(b))?;
            out.file("trajectory.csv", |b| write_records_csv(&res.harvest.trajectory.records, b))?;
            if converge {
                let top = res
                    .profile
                    .iter()
                    .max_by(|a, b| a.g.total_cmp(&b.g))
                    .expect("non-empty profile");
                let rep = circuit_convergence(&cfg.circuit, &FluxPoint::sweet_spot(top.f_alpha, top.f_beta))?;
                out.checks.push(Check {
                    name: "circuit truncation at the coupling peak".into(),
                    passed: rep.converged,
                    detail: format!(
                        "charge shift {:.2e}, oscillator shift {:.2e}, tolerance {:.2e}",
                        rep.charge_shift, rep.oscillator_shift, rep.tolerance
                    ),
                });
                let r = constrained_harvest_with(&refined(cfg), res.profile.clone())?;
                out.checks.push(fock_check(cfg, "EEF", res.harvest.eef, r.harvest.eef));
            }
        }
    }
    Ok(out)
}

/// Hex SHA-256 of the canonical JSON form of `cfg`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serialises");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-run directory name: scenario, config hash prefix and seed.
pub fn run_dir_name(scenario: Scenario, cfg: &ExperimentConfig) -> String {
    format!("{}-{}-seed{}", scenario.name(), &config_hash(cfg)[..12], cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub n_fock: usize,
    pub n_charge: usize,
    pub n_oscillator: usize,
    pub thermal_n_cut: usize,
}

/// Run metadata; everything except timing, so identical inputs give an
/// identical manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub truncation: Truncation,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes data files, `summary.json`, `timing.json` and finally
/// `manifest.json` under `root/<run_dir_name>`.
pub fn persist(root: &Path, cfg: &ExperimentConfig, out: &RunOutput, wall_seconds: f64) -> Result<PathBuf> {
    let dir = root.join(run_dir_name(out.scenario, cfg));
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for (name, bytes) in &out.files {
        write_atomic(&dir.join(name), bytes)?;
        files.push(name.clone());
    }
    let mut summary = out.summary.clone();
    summary.insert("passed".into(), json!(out.passed()));
    write_atomic(&dir.join("summary.json"), &serde_json::to_vec_pretty(&Value::Object(summary))?)?;
    files.push("summary.json".into());
    write_atomic(
        &dir.join("timing.json"),
        &serde_json::to_vec_pretty(&json!({ "wall_seconds": wall_seconds }))?,
    )?;
    files.push("timing.json".into());
    let manifest = RunManifest {
        scenario: out.scenario,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        seed: cfg.seed,
        truncation: Truncation {
            n_fock: cfg.n_fock,
            n_charge: cfg.circuit.n_charge,
            n_oscillator: cfg.circuit.n_oscillator,
            thermal_n_cut: cfg.thermal.n_cut,
        },
        checks: out.checks.clone(),
        warnings: out.warnings.clone(),
        files,
        config: cfg.clone(),
    };
    write_atomic(&dir.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(dir)
}
