use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::evolve::{
    lindblad_evolve, schrodinger_evolve, thermal_average, thermal_weights, bose_occupation, DissipatorConfig,
    FactoredDensity, IntegratorConfig, LindbladDiagnostics, LindbladTrajectory, Trajectory,
};
use crate::fluxqubit::{flux_landscape, path_profile, synthesize_path, Landscape, PathSample, PathTable};
use crate::model::ControlledHamiltonian;
use crate::observables::{eef, eef_time, ObservableRecord, Observer};
use crate::schedules::{
    ground_state_protocol, singlet_protocol, ControlSchedule, Controls, Segment, Shape,
};
use crate::spectral::{dicke_state, eigensystem, labeled_spectrum, manifold_population, singlet_states, SpectrumRow};
use crate::statespace::{product_state, register_state, Axis, HilbertSpace, StateVector};
use crate::{Error, Result};

use super::config::{DisorderKind, ExperimentConfig, InitialState, PulseSpec};
use super::Scenario;

fn all_down(n: usize) -> Result<StateVector> {
    register_state(&"d".repeat(n))
}

fn setup(cfg: &ExperimentConfig) -> Result<(HilbertSpace, ControlledHamiltonian)> {
    let space = HilbertSpace::new(cfg.n_qubits, cfg.n_fock)?;
    let ham = ControlledHamiltonian::new(space, cfg.omega_r)?;
    Ok((space, ham))
}

fn initial_state(cfg: &ExperimentConfig, ham: &ControlledHamiltonian, controls: &dyn Controls) -> Result<StateVector> {
    let space = ham.space();
    match cfg.initial {
        InitialState::Ground => {
            let (g, w) = controls.evaluate(0.0);
            let es = eigensystem(&ham.to_operator(&g, &w)?, 1)?;
            Ok(es.vectors[0].clone())
        }
        InitialState::Bare => product_state(space, 0, &all_down(space.n_qubits)?),
    }
}

/// Symmetric Dicke target `|s = N/2, m_x = 0⟩`.
pub fn dicke_target(n: usize) -> Result<StateVector> {
    dicke_state(n, n as f64 / 2.0, 0.0, Axis::X, 0)
}

#[derive(Debug, Clone)]
pub struct HarvestResult {
    pub trajectory: Trajectory,
    /// Start of the extraction window.
    pub t_f: f64,
    pub eef: f64,
    pub eef_time: f64,
    /// Smallest register purity at `t ≥ t_f`.
    pub min_post_purity: f64,
}

fn harvest_with(cfg: &ExperimentConfig, controls: &dyn Controls, t_f: f64) -> Result<HarvestResult> {
    let (space, ham) = setup(cfg)?;
    let psi0 = initial_state(cfg, &ham, controls)?;
    let obs = Observer::new(space, dicke_target(cfg.n_qubits)?)?;
    let trajectory = schrodinger_evolve(&ham, controls, &psi0, &obs, &cfg.integrator)?;
    let eef_value = eef(&trajectory.records, t_f)?;
    let crest = eef_time(&trajectory.records, t_f).unwrap_or(t_f);
    let min_post_purity = trajectory
        .records
        .iter()
        .filter(|r| r.t >= t_f - 1e-12)
        .map(|r| r.purity_qubits)
        .fold(f64::INFINITY, f64::min);
    Ok(HarvestResult {
        trajectory,
        t_f,
        eef: eef_value,
        eef_time: crest,
        min_post_purity,
    })
}

/// Four-stage ground-state protocol from the configured initial state.
pub fn run_ground_harvest(cfg: &ExperimentConfig) -> Result<HarvestResult> {
    cfg.validate(Scenario::Harvest)?;
    let p = cfg.ground_params();
    let sched = ground_state_protocol(&p)?;
    harvest_with(cfg, &sched, p.t_decoupled())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepGrid {
    pub g_min: Vec<f64>,
    pub t4: Vec<f64>,
    /// `eef[i][j]` at `g_min[i]`, `t4[j]`.
    pub eef: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use super::fmt_num as f;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["g_min", "t4", "eef"])?;
        for (i, g) in self.g_min.iter().enumerate() {
            for (j, t) in self.t4.iter().enumerate() {
                w.write_record([f(*g), f(*t), f(self.eef[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// EEF over the `(g_min, T₄)` grid with `T₃ = T₄`.
pub fn sweep_eef(cfg: &ExperimentConfig) -> Result<SweepGrid> {
    cfg.validate(Scenario::Sweep)?;
    let g_min = cfg.sweep.g_min.clone();
    let t4 = cfg.sweep.t4.clone();
    let cells: Vec<(usize, usize)> = (0..g_min.len()).flat_map(|i| (0..t4.len()).map(move |j| (i, j))).collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut c = cfg.clone();
            c.ground.g_min = g_min[i];
            c.ground.t3 = t4[j];
            c.ground.t4 = t4[j];
            let p = c.ground_params();
            Ok(harvest_with(&c, &ground_state_protocol(&p)?, p.t_decoupled())?.eef)
        })
        .collect::<Result<_>>()?;
    let eef = values.chunks(t4.len()).map(<[f64]>::to_vec).collect();
    Ok(SweepGrid { g_min, t4, eef })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalPoint {
    pub temperature: f64,
    pub nbar: f64,
    pub eef: f64,
    /// Thermal population of the resonator vacuum, `1/(1 + n̄)`.
    pub ground_population: f64,
    /// Weight in the `2^N` lowest dressed levels at the end of the second stage.
    pub manifold_population: f64,
    /// Thermal weight beyond the Fock cut.
    pub residual_weight: f64,
    pub members: usize,
}

#[derive(Debug, Clone)]
pub struct ThermalRun {
    pub point: ThermalPoint,
    pub records: Vec<ObservableRecord>,
    pub warnings: Vec<String>,
}

/// One temperature of the thermal scan with the given Fock cut.
pub fn thermal_point(cfg: &ExperimentConfig, temperature: f64, n_cut: usize) -> Result<ThermalRun> {
    let p = cfg.ground_params();
    let sched = ground_state_protocol(&p)?;
    let (space, ham) = setup(cfg)?;
    let reg = all_down(cfg.n_qubits)?;
    let obs = Observer::new(space, dicke_target(cfg.n_qubits)?)?;
    let t_usc = p.t1 + p.t2;
    let mut icfg: IntegratorConfig = cfg.integrator.clone();
    icfg.snapshot_times.push(t_usc);
    let avg = thermal_average(&ham, &sched, &reg, temperature, n_cut, cfg.thermal.min_weight, &obs, &icfg)?;
    let (g, w) = sched.evaluate(t_usc);
    let levels = eigensystem(&ham.to_operator(&g, &w)?, 1 << cfg.n_qubits)?.vectors;
    let manifold = avg
        .weighted_snapshot(t_usc, |s| manifold_population(s, &levels))
        .ok_or_else(|| Error::invalid("missing snapshot at the end of the second stage"))?;
    let r = avg.nbar / (1.0 + avg.nbar);
    let residual_weight = r.powi(n_cut as i32);
    let mut warnings = avg.warnings.clone();
    if residual_weight > 1e-3 {
        warnings.push(format!(
            "T = {temperature}: thermal weight {residual_weight:.2e} lies beyond n_cut = {n_cut}"
        ));
    }
    Ok(ThermalRun {
        point: ThermalPoint {
            temperature,
            nbar: avg.nbar,
            eef: eef(&avg.records, p.t_decoupled())?,
            ground_population: 1.0 / (1.0 + avg.nbar),
            manifold_population: manifold,
            residual_weight,
            members: avg.members.len(),
        },
        records: avg.records,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalScan {
    pub points: Vec<ThermalPoint>,
    pub warnings: Vec<String>,
}

impl ThermalScan {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use super::fmt_num as f;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["temperature", "nbar", "eef", "ground_population", "manifold_population", "residual_weight"])?;
        for p in &self.points {
            w.write_record([
                f(p.temperature),
                f(p.nbar),
                f(p.eef),
                f(p.ground_population),
                f(p.manifold_population),
                f(p.residual_weight),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// EEF and ground populations over the temperature grid.
pub fn thermal_scan(cfg: &ExperimentConfig) -> Result<ThermalScan> {
    cfg.validate(Scenario::Thermal)?;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for &t in &cfg.thermal.temperatures {
        let run = thermal_point(cfg, t, cfg.thermal.n_cut)?;
        points.push(run.point);
        warnings.extend(run.warnings);
    }
    Ok(ThermalScan { points, warnings })
}

#[derive(Debug, Clone)]
pub struct SingletResult {
    pub trajectory: Trajectory,
    pub final_s2: f64,
    pub final_purity: f64,
    /// Final fidelity with `|S⟩`.
    pub fidelity_s: f64,
    /// Final fidelity with `|S′⟩`; zero for two qubits.
    pub fidelity_s_prime: f64,
    /// `max_t |⟨S²⟩(t) − ⟨S²⟩(0)|`.
    pub s2_drift: f64,
}

/// Singlet sequence from `|0⟩ ⊗ |↑…↑↓…↓⟩`.
pub fn run_singlet_harvest(cfg: &ExperimentConfig) -> Result<SingletResult> {
    cfg.validate(Scenario::Singlet)?;
    let n = cfg.n_qubits;
    let sched = singlet_protocol(&cfg.singlet_params())?;
    let (space, ham) = setup(cfg)?;
    let reg = register_state(&format!("{}{}", "u".repeat(n / 2), "d".repeat(n / 2)))?;
    let psi0 = product_state(&space, 0, &reg)?;
    let singlets = singlet_states(n)?;
    let obs = Observer::new(space, singlets[0].clone())?;
    let trajectory = schrodinger_evolve(&ham, &sched, &psi0, &obs, &cfg.integrator)?;
    let last = *trajectory.records.last().ok_or_else(|| Error::EmptyWindow("no records".into()))?;
    let fidelity_s_prime = match singlets.get(1) {
        Some(sp) => crate::observables::fidelity_to_qubit_state(&trajectory.final_state.amplitudes, &space, sp)?,
        None => 0.0,
    };
    let s0 = trajectory.records[0].s2;
    let s2_drift = trajectory.records.iter().map(|r| (r.s2 - s0).abs()).fold(0.0, f64::max);
    Ok(SingletResult {
        final_s2: last.s2,
        final_purity: last.purity_qubits,
        fidelity_s: last.fidelity,
        fidelity_s_prime,
        s2_drift,
        trajectory,
    })
}

/// `ε_i` uniform on `[−ε_max, ε_max]`, drawn sequentially so results do not
/// depend on the worker count.
pub fn disorder_samples(seed: u64, runs: usize, n: usize, epsilon_max: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..runs)
        .map(|_| (0..n).map(|_| epsilon_max * (2.0 * rng.gen::<f64>() - 1.0)).collect())
        .collect()
}

fn factors(eps: &[f64]) -> Vec<f64> {
    eps.iter().map(|e| 1.0 + e).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ProtectionScan {
    pub g_f: Vec<f64>,
    pub times: Vec<f64>,
    /// Ensemble mean of `⟨S²⟩(t)` per `g_f`.
    pub mean_s2: Vec<Vec<f64>>,
    /// Time average of `mean_s2` per `g_f`.
    pub time_average: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl ProtectionScan {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use super::fmt_num as f;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.g_f.iter().map(|g| format!("s2_gf_{g}")));
        w.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![f(*t)];
            row.extend(self.mean_s2.iter().map(|s| f(s[k])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Free evolution of `|0⟩ ⊗ |S⟩` at fixed coupling `g_f` with static
/// frequency disorder, averaged over the seeded ensemble.
pub fn protection_scan(cfg: &ExperimentConfig) -> Result<ProtectionScan> {
    cfg.validate(Scenario::Protect)?;
    let n = cfg.n_qubits;
    let spec = &cfg.protection;
    let (space, ham) = setup(cfg)?;
    let singlet = singlet_states(n)?[0].clone();
    let psi0 = product_state(&space, 0, &singlet)?;
    let obs = Observer::new(space, singlet)?;
    let samples = disorder_samples(cfg.seed, spec.runs, n, spec.epsilon_max);
    let jobs: Vec<(usize, usize)> = (0..spec.g_f.len()).flat_map(|i| (0..spec.runs).map(move |r| (i, r))).collect();
    let series: Vec<(Vec<f64>, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let g = spec.g_f[i];
            let sched = ControlSchedule::new(
                n,
                vec![Segment::uniform(n, spec.duration, Shape::Hold, (g, g), (spec.omega_q, spec.omega_q))],
            )?
            .with_disorder(Some(&factors(&samples[r])), None)?;
            let traj = schrodinger_evolve(&ham, &sched, &psi0, &obs, &cfg.integrator)?;
            Ok((
                traj.records.iter().map(|x| x.t).collect(),
                traj.records.iter().map(|x| x.s2).collect(),
            ))
        })
        .collect::<Result<_>>()?;
    let times = series[0].0.clone();
    let mut mean_s2 = vec![vec![0.0; times.len()]; spec.g_f.len()];
    for (&(i, _), (_, s2)) in jobs.iter().zip(&series) {
        for (m, v) in mean_s2[i].iter_mut().zip(s2) {
            *m += v / spec.runs as f64;
        }
    }
    let time_average = mean_s2.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    Ok(ProtectionScan {
        g_f: spec.g_f.clone(),
        times,
        mean_s2,
        time_average,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DisorderResult {
    pub kind: DisorderKind,
    pub samples: Vec<Vec<f64>>,
    pub eef: Vec<f64>,
    pub mean_eef: f64,
    pub stderr_eef: f64,
    /// Field-wise ensemble mean of the records.
    pub mean_records: Vec<ObservableRecord>,
    pub final_purity_mean: f64,
    pub clean_eef: f64,
    pub clean_final_purity: f64,
}

/// Ground-state protocol with static per-qubit disorder on the chosen
/// control, plus the disorder-free reference run.
pub fn disorder_monte_carlo(cfg: &ExperimentConfig) -> Result<DisorderResult> {
    cfg.validate(Scenario::Disorder)?;
    let spec = &cfg.disorder;
    let p = cfg.ground_params();
    let base = ground_state_protocol(&p)?;
    let t_f = p.t_decoupled();
    let samples = disorder_samples(cfg.seed, spec.runs, cfg.n_qubits, spec.epsilon_max);
    let runs: Vec<HarvestResult> = samples
        .par_iter()
        .map(|eps| {
            let f = factors(eps);
            let sched = match spec.kind {
                DisorderKind::Frequency => base.with_disorder(Some(&f), None)?,
                DisorderKind::Coupling => base.with_disorder(None, Some(&f))?,
            };
            harvest_with(cfg, &sched, t_f)
        })
        .collect::<Result<_>>()?;
    let clean = harvest_with(cfg, &base, t_f)?;
    let k = runs.len() as f64;
    let eefs: Vec<f64> = runs.iter().map(|r| r.eef).collect();
    let mean_eef = eefs.iter().sum::<f64>() / k;
    let stderr_eef = if runs.len() > 1 {
        (eefs.iter().map(|e| (e - mean_eef).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    let mut mean_records = runs[0].trajectory.records.clone();
    for (idx, m) in mean_records.iter_mut().enumerate() {
        let at = |f: fn(&ObservableRecord) -> f64| runs.iter().map(|r| f(&r.trajectory.records[idx])).sum::<f64>() / k;
        m.fidelity = at(|r| r.fidelity);
        m.purity_qubits = at(|r| r.purity_qubits);
        m.entropy_qubits = at(|r| r.entropy_qubits);
        m.entropy_single = at(|r| r.entropy_single);
        m.s2 = at(|r| r.s2);
        m.top_fock_population = at(|r| r.top_fock_population);
    }
    let final_purity_mean = mean_records.last().map_or(f64::NAN, |r| r.purity_qubits);
    let clean_final_purity = clean.trajectory.records.last().map_or(f64::NAN, |r| r.purity_qubits);
    Ok(DisorderResult {
        kind: spec.kind,
        samples,
        eef: eefs,
        mean_eef,
        stderr_eef,
        mean_records,
        final_purity_mean,
        clean_eef: clean.eef,
        clean_final_purity,
    })
}

#[derive(Debug, Clone)]
pub struct DissipativePoint {
    pub temperature: f64,
    pub coherent_eef: f64,
    pub eef: f64,
    /// `coherent_eef − eef`, in absolute fidelity units.
    pub degradation: f64,
    pub diagnostics: LindbladDiagnostics,
    pub coherent: LindbladTrajectory,
    pub trajectory: LindbladTrajectory,
}

/// Thermal initial mixture `Σ p_n |n⟩⟨n| ⊗ |↓…↓⟩⟨↓…↓|` at temperature `t`.
pub fn thermal_initial_density(space: &HilbertSpace, omega_r: f64, temperature: f64, n_cut: usize) -> Result<FactoredDensity> {
    let w = thermal_weights(bose_occupation(omega_r, temperature), n_cut)?;
    let reg = all_down(space.n_qubits)?;
    let states = w
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(k, p)| Ok((*p, product_state(space, k, &reg)?)))
        .collect::<Result<Vec<_>>>()?;
    FactoredDensity::from_mixture(&states)
}

/// Ground-state protocol under resonator decay, one run per configured
/// temperature, each with its coherent reference from the same initial state.
pub fn dissipative_harvest(cfg: &ExperimentConfig) -> Result<Vec<DissipativePoint>> {
    cfg.validate(Scenario::Dissipative)?;
    let p = cfg.ground_params();
    let sched = ground_state_protocol(&p)?;
    let t_f = p.t_decoupled();
    let (space, ham) = setup(cfg)?;
    let obs = Observer::new(space, dicke_target(cfg.n_qubits)?)?;
    let mut out = Vec::new();
    for &temperature in &cfg.dissipation.temperatures {
        let rho0 = thermal_initial_density(&space, cfg.omega_r, temperature, cfg.dissipation.n_cut)?;
        let closed = DissipatorConfig {
            kappa: 0.0,
            ..cfg.dissipation.dissipator.clone()
        };
        let open = DissipatorConfig {
            kappa: cfg.kappa(),
            temperature,
            ..cfg.dissipation.dissipator.clone()
        };
        let coherent = lindblad_evolve(&ham, &sched, &rho0, &obs, &cfg.integrator, &closed)?;
        let trajectory = lindblad_evolve(&ham, &sched, &rho0, &obs, &cfg.integrator, &open)?;
        let coherent_eef = eef(&coherent.records, t_f)?;
        let e = eef(&trajectory.records, t_f)?;
        out.push(DissipativePoint {
            temperature,
            coherent_eef,
            eef: e,
            degradation: coherent_eef - e,
            diagnostics: trajectory.diagnostics.clone(),
            coherent,
            trajectory,
        });
    }
    Ok(out)
}

/// Labelled extended-Dicke spectrum along the configured coupling grid.
pub fn spectrum_scan(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    cfg.validate(Scenario::Spectrum)?;
    let s = &cfg.spectrum;
    labeled_spectrum(cfg.n_qubits, s.omega_q, cfg.omega_r, &s.g_values(), cfg.n_fock, s.levels)
}

/// Sweet-spot landscape over the configured flux grid.
pub fn flux_map(cfg: &ExperimentConfig) -> Result<Landscape> {
    cfg.validate(Scenario::Fluxmap)?;
    flux_landscape(&cfg.circuit, &cfg.flux.f_alpha.radians(), &cfg.flux.f_beta.radians())
}

/// Samples `g(t)`: a ramp from the profile's first coupling to its peak,
/// a ramp to its last coupling, then a hold.
pub fn coupled_pulse(profile: &[PathSample], spec: &PulseSpec) -> (Vec<f64>, Vec<f64>) {
    let g0 = profile[0].g;
    let g_end = profile[profile.len() - 1].g;
    let g_peak = profile.iter().map(|s| s.g).fold(f64::NEG_INFINITY, f64::max);
    let total = spec.t_up + spec.t_down + spec.t_hold;
    let steps = (total / spec.dt).round().max(1.0) as usize;
    let mut ts = Vec::with_capacity(steps + 3);
    for k in 0..=steps {
        ts.push(total * k as f64 / steps as f64);
    }
    // the turning points must be samples so the table keeps the exact peak
    for t in [spec.t_up, spec.t_up + spec.t_down] {
        if !ts.iter().any(|x| (x - t).abs() < 1e-12) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    let gs = ts
        .iter()
        .map(|&t| {
            let g = if t <= spec.t_up {
                g0 + (g_peak - g0) * spec.up_shape.weight(t / spec.t_up)
            } else if t <= spec.t_up + spec.t_down && spec.t_down > 0.0 {
                g_peak + (g_end - g_peak) * spec.down_shape.weight((t - spec.t_up) / spec.t_down)
            } else {
                g_end
            };
            g.min(g_peak)
        })
        .collect();
    (ts, gs)
}

#[derive(Debug, Clone)]
pub struct ConstrainedResult {
    pub profile: Vec<PathSample>,
    pub table: PathTable,
    pub harvest: HarvestResult,
}

/// Flux-path profile for the configured circuit and path.
pub fn flux_profile(cfg: &ExperimentConfig) -> Result<Vec<PathSample>> {
    cfg.validate(Scenario::Fluxpath)?;
    path_profile(&cfg.circuit, &cfg.flux.path)
}

/// Harvest driven by the coupled `(g, ω_q)` pulse synthesized along the
/// flux path, reusing a precomputed profile.
pub fn constrained_harvest_with(cfg: &ExperimentConfig, profile: Vec<PathSample>) -> Result<ConstrainedResult> {
    cfg.validate(Scenario::Fluxpath)?;
    let (ts, gs) = coupled_pulse(&profile, &cfg.flux.pulse);
    let table = synthesize_path(&profile, &cfg.flux.path, &ts, &gs)?;
    let sched = table
        .to_schedule(cfg.n_qubits)?
        .with_breakpoints(&[cfg.flux.pulse.t_up, cfg.flux.pulse.t_up + cfg.flux.pulse.t_down]);
    let t_f = cfg.flux.pulse.t_up + cfg.flux.pulse.t_down;
    let harvest = harvest_with(cfg, &sched, t_f)?;
    Ok(ConstrainedResult { profile, table, harvest })
}

pub fn constrained_harvest(cfg: &ExperimentConfig) -> Result<ConstrainedResult> {
    constrained_harvest_with(cfg, flux_profile(cfg)?)
}
