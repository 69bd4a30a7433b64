//! Time propagation of pure states and of the dressed-basis master equation.

mod dopri;
mod lindblad;
mod thermal;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::ControlledHamiltonian;
use crate::observables::{ObservableRecord, Observer};
use crate::schedules::Controls;
use crate::statespace::StateVector;
use crate::{Error, Result, C64};

pub use dopri::StepStats;
pub use lindblad::{
    lindblad_evolve, bose_occupation, DissipatorConfig, FactoredDensity, LindbladDiagnostics, LindbladTrajectory,
    StaticDissipator,
};
pub use thermal::{thermal_average, thermal_weights, ThermalAverage, ThermalMember};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dopri5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Step bound; `None` derives `0.02 / max(ω_max, g_max, g_max²/ω_r)`
    /// from the schedule.
    pub dt_max: Option<f64>,
    /// Absolute 2-norm local error target per step.
    pub tolerance: f64,
    pub dt_min: f64,
    /// Observable sampling interval.
    pub record_stride: f64,
    /// Extra times at which the full state is stored.
    pub snapshot_times: Vec<f64>,
    /// Integrate until this time if later than the schedule's end.
    pub t_end: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Dopri5,
            dt_max: None,
            tolerance: 1e-10,
            dt_min: 1e-12,
            record_stride: 0.002,
            snapshot_times: Vec::new(),
            t_end: None,
        }
    }
}

impl IntegratorConfig {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if let Some(d) = self.dt_max {
            if !(d > 0.0) {
                e.push(format!("{prefix}dt_max must be positive"));
            }
        }
        if !(self.tolerance > 0.0) {
            e.push(format!("{prefix}tolerance must be positive"));
        }
        if !(self.record_stride > 0.0) {
            e.push(format!("{prefix}record_stride must be positive"));
        }
        if !(self.dt_min > 0.0) {
            e.push(format!("{prefix}dt_min must be positive"));
        }
        e
    }

    /// The step bound actually used for `controls`.
    pub fn resolved_dt_max(&self, controls: &dyn Controls, omega_r: f64) -> f64 {
        let (w, g) = controls.extremes();
        let auto = 0.02 / w.max(g).max(g * g / omega_r).max(omega_r);
        self.dt_max.map_or(auto, |d| d.min(auto))
    }

    fn end_time(&self, controls: &dyn Controls) -> f64 {
        self.t_end.map_or(controls.duration(), |t| t.max(0.0))
    }
}

/// Sorted event grid: record times, schedule breakpoints and snapshots.
pub(crate) fn event_times(t_end: f64, stride: f64, extra: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = (t_end / stride).floor() as usize;
    let mut records: Vec<f64> = (0..=n).map(|k| k as f64 * stride).collect();
    if t_end - records.last().copied().unwrap_or(0.0) > 1e-9 * stride {
        records.push(t_end);
    }
    let mut all = records.clone();
    all.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < t_end));
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    (all, records)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
    pub dt_max: f64,
    pub min_step: f64,
    pub max_norm_drift: f64,
    pub max_top_fock_population: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
    pub stats: TrajectoryStats,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn fidelities(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.fidelity).collect()
    }

    pub fn snapshot(&self, t: f64) -> Option<&StateVector> {
        self.snapshots
            .iter()
            .find(|(ts, _)| (ts - t).abs() < 1e-9)
            .map(|(_, s)| s)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records_csv(&self.records, out)
    }
}

pub fn write_records_csv<W: Write>(records: &[ObservableRecord], out: W) -> Result<()> {
    use crate::experiments::fmt_num as f;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "fidelity",
        "purity",
        "entropy_qubits",
        "entropy_single_qubit",
        "S2_expectation",
        "top_fock_population",
    ])?;
    for r in records {
        w.write_record([
            f(r.t),
            f(r.fidelity),
            f(r.purity_qubits),
            f(r.entropy_qubits),
            f(r.entropy_single),
            f(r.s2),
            f(r.top_fock_population),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Right-hand side `dψ/dt = −i H(t) ψ` for a schedule.
pub(crate) struct SchrodingerRhs<'a> {
    pub ham: &'a ControlledHamiltonian,
    pub controls: &'a dyn Controls,
    g: Vec<f64>,
    w: Vec<f64>,
    work: Vec<C64>,
}

impl<'a> SchrodingerRhs<'a> {
    pub fn new(ham: &'a ControlledHamiltonian, controls: &'a dyn Controls) -> Self {
        let n = controls.n_qubits();
        Self {
            ham,
            controls,
            g: vec![0.0; n],
            w: vec![0.0; n],
            work: vec![C64::new(0.0, 0.0); ham.space().dim()],
        }
    }

    /// `dy = −i H(t) y` applied to every `dim`-length column of `y`.
    pub fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        self.controls.evaluate_into(t, &mut self.g, &mut self.w);
        let dim = self.ham.space().dim();
        for (yc, dc) in y.chunks(dim).zip(dy.chunks_mut(dim)) {
            self.ham.apply(&self.g, &self.w, yc, dc, &mut self.work);
            for v in dc.iter_mut() {
                *v = C64::new(v.im, -v.re);
            }
        }
    }
}

/// Output of a bare propagation run.
pub(crate) struct Propagation {
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
    pub stats: TrajectoryStats,
}

/// Integrates `psi0` and calls `on_record` at every record time.
pub(crate) fn propagate<F>(
    ham: &ControlledHamiltonian,
    controls: &dyn Controls,
    psi0: &StateVector,
    config: &IntegratorConfig,
    mut on_record: F,
) -> Result<Propagation>
where
    F: FnMut(f64, &[C64]) -> Result<()>,
{
    let errs = config.problems("integrator.");
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let space = ham.space();
    if psi0.dim() != space.dim() {
        return Err(Error::dims(format!("initial state dim {} vs space {}", psi0.dim(), space.dim())));
    }
    if controls.n_qubits() != space.n_qubits {
        return Err(Error::dims("schedule and space disagree on the number of qubits"));
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("initial state norm {} is not 1", psi0.norm())));
    }
    let t_end = config.end_time(controls);
    let dt_max = config.resolved_dt_max(controls, ham.omega_r());
    let mut extra = controls.breakpoints();
    extra.extend(&config.snapshot_times);
    let (events, record_times) = event_times(t_end, config.record_stride, &extra);

    let mut rhs = SchrodingerRhs::new(ham, controls);
    let mut f = |t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(t, y, dy);
    let mut stepper = dopri::Dopri5::new(config.tolerance, dt_max, config.dt_min);
    let mut y = psi0.amplitudes.clone();
    let mut t = 0.0;
    let mut snapshots = Vec::new();
    let mut stats = TrajectoryStats {
        dt_max,
        ..Default::default()
    };
    let mut rec_iter = record_times.iter().peekable();
    let mut snaps = config.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut snap_iter = snaps.into_iter().peekable();
    for &te in &events {
        if te > t {
            stepper.advance(&mut f, t, te, &mut y)?;
            t = te;
        }
        while rec_iter.peek().is_some_and(|&&r| (r - t).abs() < 1e-12) {
            rec_iter.next();
            let drift = (crate::linalg::norm(&y) - 1.0).abs();
            stats.max_norm_drift = stats.max_norm_drift.max(drift);
            let top = crate::statespace::top_fock_population(&y, space);
            stats.max_top_fock_population = stats.max_top_fock_population.max(top);
            on_record(t, &y)?;
        }
        while snap_iter.peek().is_some_and(|&s| s <= t + 1e-12) {
            let s = snap_iter.next().unwrap();
            snapshots.push((s, StateVector::new(y.clone())));
        }
    }
    let s = stepper.stats;
    stats.steps_accepted = s.accepted;
    stats.steps_rejected = s.rejected;
    stats.rhs_evals = s.rhs_evals;
    stats.min_step = s.min_step;
    Ok(Propagation {
        snapshots,
        final_state: StateVector::new(y),
        stats,
    })
}

pub(crate) fn leak_warnings(stats: &TrajectoryStats) -> Vec<String> {
    let mut warnings = Vec::new();
    if stats.max_top_fock_population > 1e-6 {
        let msg = format!(
            "top Fock level reached population {:.2e}; increase n_fock",
            stats.max_top_fock_population
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    warnings
}

/// Integrates the Schrödinger equation under `controls`, recording the
/// observables of `observer` on a uniform grid.
pub fn schrodinger_evolve(
    ham: &ControlledHamiltonian,
    controls: &dyn Controls,
    psi0: &StateVector,
    observer: &Observer,
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut records = Vec::new();
    let run = propagate(ham, controls, psi0, config, |t, y| {
        records.push(observer.record(t, y)?);
        Ok(())
    })?;
    Ok(Trajectory {
        records,
        snapshots: run.snapshots,
        final_state: run.final_state,
        warnings: leak_warnings(&run.stats),
        stats: run.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm_hermitian;
    use crate::model::ControlledHamiltonian;
    use crate::schedules::{ControlSchedule, Segment, Shape};
    use crate::statespace::{register_state, HilbertSpace};

    #[test]
    fn static_propagation_matches_expm() {
        let space = HilbertSpace::new(2, 6).unwrap();
        let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
        let seg = Segment::uniform(2, 3.0, Shape::Hold, (1.2, 1.2), (0.7, 0.7));
        let sched = ControlSchedule::new(2, vec![seg]).unwrap();
        let psi0 = crate::statespace::product_state(&space, 1, &register_state("ud").unwrap()).unwrap();
        let obs = Observer::new(space, register_state("dd").unwrap()).unwrap();
        let cfg = IntegratorConfig {
            tolerance: 1e-12,
            ..Default::default()
        };
        let traj = schrodinger_evolve(&ham, &sched, &psi0, &obs, &cfg).unwrap();
        let h = ham.to_operator(&[1.2, 1.2], &[0.7, 0.7]).unwrap().to_dense();
        let u = expm_hermitian(&h, C64::new(0.0, -3.0)).unwrap();
        let dim = space.dim();
        for i in 0..dim {
            let want: C64 = (0..dim).map(|j| u[(i, j)] * psi0.amplitudes[j]).sum();
            assert!((traj.final_state.amplitudes[i] - want).norm() < 1e-8);
        }
        assert!(traj.stats.max_norm_drift < 1e-8);
    }
}
