//! Dressed-basis master equation for a resonator coupled to a thermal line.
//!
//! The state is kept as `ρ = W W†` with `W` a `dim × r` matrix, so
//! positivity holds by construction. Each interval is Strang split: half a
//! dissipative step, a unitary DOPRI step on every column of `W`, and
//! another half dissipative step. The dissipator is frozen over a rebuild
//! window and built from the lowest eigenpairs of `H` at the window centre,
//! with rates `Γ_kl = κ (Δ_lk/ω_r) |⟨k|a+a†|l⟩|²` weighted by the Bose
//! occupation of the bath at `Δ_lk`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::dopri::Dopri5;
use super::{event_times, IntegratorConfig, SchrodingerRhs, TrajectoryStats};
use crate::linalg::{dot, expm_real, hermitian_eigen};
use crate::model::{resonator_quadrature, ControlledHamiltonian};
use crate::observables::{ObservableRecord, Observer};
use crate::schedules::Controls;
use crate::spectral::eigensystem;
use crate::statespace::{reduce_to_register, top_fock_population, DensityMatrix, HilbertSpace, StateVector};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DissipatorConfig {
    /// Resonator decay rate in units of `ω_r`.
    pub kappa: f64,
    /// Bath temperature `k_B T / ħω_r`.
    pub temperature: f64,
    /// Base rates `Γ_kl` below this are dropped.
    pub rate_floor: f64,
    /// Number of dressed levels that take part in transitions.
    pub basis_dim: usize,
    /// Length of the window over which the dissipator is frozen.
    pub rebuild_interval: f64,
    /// Transitions with `|Δ|` below this are skipped.
    pub degeneracy_tol: f64,
    /// Relative weight below which columns of `W` are discarded.
    pub rank_tol: f64,
    pub max_rank: usize,
}

impl Default for DissipatorConfig {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            temperature: 0.0,
            rate_floor: 1e-8,
            basis_dim: 40,
            rebuild_interval: 0.05,
            degeneracy_tol: 1e-9,
            rank_tol: 1e-12,
            max_rank: 256,
        }
    }
}

impl DissipatorConfig {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if !(self.kappa >= 0.0) {
            e.push(format!("{prefix}kappa must be non-negative"));
        }
        if !(self.temperature >= 0.0) {
            e.push(format!("{prefix}temperature must be non-negative"));
        }
        if !(self.rate_floor >= 0.0) {
            e.push(format!("{prefix}rate_floor must be non-negative"));
        }
        if self.basis_dim == 0 {
            e.push(format!("{prefix}basis_dim must be at least 1"));
        }
        if !(self.rebuild_interval > 0.0) {
            e.push(format!("{prefix}rebuild_interval must be positive"));
        }
        if !(self.rank_tol >= 0.0 && self.rank_tol < 1.0) {
            e.push(format!("{prefix}rank_tol must lie in [0, 1)"));
        }
        if self.max_rank == 0 {
            e.push(format!("{prefix}max_rank must be at least 1"));
        }
        e
    }
}

/// Bose–Einstein occupation at frequency `delta` and temperature `t`.
pub fn bose_occupation(delta: f64, t: f64) -> f64 {
    if t <= 0.0 || delta <= 0.0 {
        return 0.0;
    }
    let x = delta / t;
    if x > 700.0 {
        0.0
    } else {
        1.0 / x.exp_m1()
    }
}

/// `ρ = W W†` with the columns of `W` stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredDensity {
    dim: usize,
    data: Vec<C64>,
}

impl FactoredDensity {
    pub fn from_pure(psi: &StateVector) -> Self {
        Self {
            dim: psi.dim(),
            data: psi.amplitudes.clone(),
        }
    }

    /// `Σ_c p_c |ψ_c⟩⟨ψ_c|`.
    pub fn from_mixture(states: &[(f64, StateVector)]) -> Result<Self> {
        let dim = states.first().map(|(_, s)| s.dim()).ok_or_else(|| Error::invalid("empty mixture"))?;
        let mut data = Vec::with_capacity(dim * states.len());
        for (p, s) in states {
            if s.dim() != dim {
                return Err(Error::dims("mixture members differ in dimension"));
            }
            if *p < 0.0 {
                return Err(Error::invalid("negative mixture weight"));
            }
            let a = p.sqrt();
            data.extend(s.amplitudes.iter().map(|x| x * a));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn column(&self, c: usize) -> &[C64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        self.data.chunks(self.dim)
    }

    pub fn trace(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    /// `⟨φ|ρ|φ⟩`.
    pub fn expectation_pure(&self, phi: &[C64]) -> f64 {
        self.columns().map(|w| dot(phi, w).norm_sqr()).sum()
    }

    pub fn reduce_to_register(&self, space: &HilbertSpace) -> DensityMatrix {
        let rd = space.register_dim();
        let mut acc = Mat::<C64>::zeros(rd, rd);
        for w in self.columns() {
            acc += reduce_to_register(w, space).entries;
        }
        DensityMatrix { entries: acc }
    }

    pub fn top_fock_population(&self, space: &HilbertSpace) -> f64 {
        self.columns().map(|w| top_fock_population(w, space)).sum()
    }

    pub fn to_dense(&self) -> DensityMatrix {
        let w = MatRef::from_column_major_slice(&self.data, self.dim, self.rank());
        DensityMatrix {
            entries: w * w.adjoint(),
        }
    }

    /// Re-diagonalises through the Gram matrix and drops negligible
    /// directions. Returns the discarded trace.
    pub fn recompress(&mut self, rank_tol: f64, max_rank: usize) -> Result<f64> {
        let r = self.rank();
        if r <= 1 {
            return Ok(0.0);
        }
        let w = MatRef::from_column_major_slice(&self.data, self.dim, r);
        let gram = w.adjoint() * w;
        let (vals, u) = hermitian_eigen(&gram)?;
        let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
        let cut = rank_tol * total;
        let keep: Vec<usize> = (0..r).rev().filter(|&i| vals[i] > cut).take(max_rank).collect();
        let dropped = total - keep.iter().map(|&i| vals[i]).sum::<f64>();
        let mut uk = Mat::<C64>::zeros(r, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            for j in 0..r {
                uk[(j, c)] = u[(j, i)];
            }
        }
        let nw = w * &uk;
        let mut data = Vec::with_capacity(self.dim * keep.len());
        for c in 0..keep.len() {
            data.extend((0..self.dim).map(|i| nw[(i, c)]));
        }
        self.data = data;
        Ok(dropped.max(0.0))
    }
}

/// Population-transfer rates among the lowest dressed levels.
#[derive(Debug, Clone)]
pub struct StaticDissipator {
    pub levels: Vec<StateVector>,
    pub energies: Vec<f64>,
    /// `rates[k][l]` is the rate from level `l` into level `k`.
    pub rates: Vec<Vec<f64>>,
    pub outflow: Vec<f64>,
    g: Vec<f64>,
    omega_q: Vec<f64>,
    propagator: Option<(f64, Mat<f64>)>,
}

impl StaticDissipator {
    pub fn build(ham: &ControlledHamiltonian, g: &[f64], omega_q: &[f64], cfg: &DissipatorConfig) -> Result<Self> {
        let space = ham.space();
        let h = ham.to_operator(g, omega_q)?;
        let k = cfg.basis_dim.min(space.dim());
        let es = eigensystem(&h, k)?;
        let x = resonator_quadrature(space)?;
        let xv: Vec<Vec<C64>> = es.vectors.iter().map(|v| x.apply_vec(&v.amplitudes)).collect();
        let wr = ham.omega_r();
        let mut rates = vec![vec![0.0; k]; k];
        for l in 0..k {
            for m in (l + 1)..k {
                let delta = es.values[m] - es.values[l];
                if delta.abs() < cfg.degeneracy_tol {
                    continue;
                }
                let base = cfg.kappa * (delta / wr) * dot(&es.vectors[l].amplitudes, &xv[m]).norm_sqr();
                if base < cfg.rate_floor || base == 0.0 {
                    continue;
                }
                let nbar = bose_occupation(delta, cfg.temperature);
                rates[l][m] = base * (1.0 + nbar);
                rates[m][l] = base * nbar;
            }
        }
        let outflow = (0..k).map(|l| (0..k).map(|m| rates[m][l]).sum()).collect();
        Ok(Self {
            levels: es.vectors,
            energies: es.values,
            rates,
            outflow,
            g: g.to_vec(),
            omega_q: omega_q.to_vec(),
            propagator: None,
        })
    }

    fn matches(&self, g: &[f64], omega_q: &[f64]) -> bool {
        self.g == g && self.omega_q == omega_q
    }

    fn population_propagator(&mut self, s: f64) -> &Mat<f64> {
        let stale = self.propagator.as_ref().is_none_or(|(ts, _)| (ts - s).abs() > 1e-15 * s.max(1.0));
        if stale {
            let k = self.levels.len();
            let gen = Mat::<f64>::from_fn(k, k, |i, j| if i == j { -self.outflow[j] * s } else { self.rates[i][j] * s });
            self.propagator = Some((s, expm_real(&gen)));
        }
        &self.propagator.as_ref().unwrap().1
    }

    /// Exact action of the frozen dissipator over time `s`.
    pub fn apply(&mut self, rho: &mut FactoredDensity, s: f64) -> Result<()> {
        let k = self.levels.len();
        let mut p = vec![0.0; k];
        let shrink: Vec<f64> = self.outflow.iter().map(|g| (-0.5 * g * s).exp() - 1.0).collect();
        let dim = rho.dim;
        for w in rho.data.chunks_mut(dim) {
            for (l, v) in self.levels.iter().enumerate() {
                let a = dot(&v.amplitudes, w);
                p[l] += a.norm_sqr();
                if shrink[l] != 0.0 {
                    let c = a * shrink[l];
                    for (wi, vi) in w.iter_mut().zip(&v.amplitudes) {
                        *wi += vi * c;
                    }
                }
            }
        }
        let decay: Vec<f64> = self.outflow.iter().map(|g| (-g * s).exp()).collect();
        let prop = self.population_propagator(s);
        let evolved: Vec<f64> = (0..k).map(|i| (0..k).map(|j| prop[(i, j)] * p[j]).sum()).collect();
        for (i, pi) in evolved.into_iter().enumerate() {
            let q = pi - decay[i] * p[i];
            if q < -1e-6 {
                return Err(Error::NegativeEigenvalue(q));
            }
            if q > 0.0 {
                let a = q.sqrt();
                rho.data.extend(self.levels[i].amplitudes.iter().map(|x| x * a));
            }
        }
        Ok(())
    }

    /// Smallest weight of a lower-half level inside the previous basis
    /// span. Degenerate rotations score 1; levels leaving the window do not.
    fn alignment_with(&self, older: &Self) -> f64 {
        let half = self.levels.len().div_ceil(2);
        self.levels[..half]
            .iter()
            .map(|n| older.levels.iter().map(|o| o.overlap_sqr(n)).sum::<f64>())
            .fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LindbladDiagnostics {
    pub rebuilds: usize,
    pub max_rank: usize,
    pub dropped_trace: f64,
    pub max_trace_error: f64,
    /// Worst overlap of the lower dressed levels with the previous basis.
    pub min_basis_alignment: f64,
    pub integrator: TrajectoryStats,
}

#[derive(Debug, Clone)]
pub struct LindbladTrajectory {
    pub records: Vec<ObservableRecord>,
    pub snapshots: Vec<(f64, FactoredDensity)>,
    pub final_state: FactoredDensity,
    pub diagnostics: LindbladDiagnostics,
    pub warnings: Vec<String>,
}

impl LindbladTrajectory {
    pub fn snapshot(&self, t: f64) -> Option<&FactoredDensity> {
        self.snapshots
            .iter()
            .find(|(ts, _)| (ts - t).abs() < 1e-9)
            .map(|(_, s)| s)
    }
}

fn record(observer: &Observer, t: f64, rho: &FactoredDensity) -> Result<ObservableRecord> {
    let space = observer.space();
    let rq = rho.reduce_to_register(space);
    observer.record_from_register(t, &rq, rho.top_fock_population(space))
}

/// Integrates the master equation from `rho0` under `controls`.
pub fn lindblad_evolve(
    ham: &ControlledHamiltonian,
    controls: &dyn Controls,
    rho0: &FactoredDensity,
    observer: &Observer,
    config: &IntegratorConfig,
    diss: &DissipatorConfig,
) -> Result<LindbladTrajectory> {
    let mut errs = config.problems("integrator.");
    errs.extend(diss.problems("dissipation."));
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let space = *ham.space();
    if rho0.dim() != space.dim() {
        return Err(Error::dims("initial density and space differ in dimension"));
    }
    if controls.n_qubits() != space.n_qubits {
        return Err(Error::dims("schedule and space disagree on the number of qubits"));
    }
    let t_end = config.end_time(controls);
    let dt_max = config.resolved_dt_max(controls, ham.omega_r());
    let mut extra = controls.breakpoints();
    extra.extend(&config.snapshot_times);
    let (events, record_times) = event_times(t_end, config.record_stride, &extra);
    let window = diss.rebuild_interval;
    let mut steps = vec![0.0];
    for &te in &events[1..] {
        let t0 = *steps.last().unwrap();
        let pieces = ((te - t0) / window).ceil().max(1.0) as usize;
        for j in 1..=pieces {
            steps.push(if j == pieces { te } else { t0 + (te - t0) * j as f64 / pieces as f64 });
        }
    }

    let mut rhs = SchrodingerRhs::new(ham, controls);
    let mut stepper = Dopri5::new(config.tolerance, dt_max, config.dt_min);
    let mut rho = rho0.clone();
    let mut diag = LindbladDiagnostics {
        min_basis_alignment: 1.0,
        max_rank: rho.rank(),
        ..Default::default()
    };
    let trace0 = rho.trace();
    let mut current: Option<StaticDissipator> = None;
    let (mut gbuf, mut wbuf) = (vec![0.0; space.n_qubits], vec![0.0; space.n_qubits]);
    let mut records = Vec::with_capacity(record_times.len());
    let mut snapshots = Vec::new();
    let mut snaps: Vec<f64> = config.snapshot_times.clone();
    snaps.sort_by(f64::total_cmp);
    let mut snap_iter = snaps.into_iter().peekable();
    let mut rec_iter = record_times.iter().peekable();

    let mut observe = |t: f64, rho: &FactoredDensity, diag: &mut LindbladDiagnostics| -> Result<()> {
        while rec_iter.peek().is_some_and(|&&r| (r - t).abs() < 1e-12) {
            rec_iter.next();
            let rec = record(observer, t, rho)?;
            diag.integrator.max_top_fock_population = diag.integrator.max_top_fock_population.max(rec.top_fock_population);
            records.push(rec);
        }
        while snap_iter.peek().is_some_and(|&s| s <= t + 1e-12) {
            snapshots.push((snap_iter.next().unwrap(), rho.clone()));
        }
        Ok(())
    };
    observe(0.0, &rho, &mut diag)?;

    for pair in steps.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let tau = t1 - t0;
        let dissipative = diss.kappa > 0.0;
        if dissipative {
            let centre = ((((t0 + t1) / 2.0) / window).floor() + 0.5) * window;
            controls.evaluate_into(centre.min(t_end), &mut gbuf, &mut wbuf);
            if !current.as_ref().is_some_and(|d| d.matches(&gbuf, &wbuf)) {
                let fresh = StaticDissipator::build(ham, &gbuf, &wbuf, diss)?;
                if let Some(old) = &current {
                    diag.min_basis_alignment = diag.min_basis_alignment.min(fresh.alignment_with(old));
                }
                diag.rebuilds += 1;
                current = Some(fresh);
            }
            let d = current.as_mut().unwrap();
            d.apply(&mut rho, tau / 2.0)?;
            diag.dropped_trace += rho.recompress(diss.rank_tol, diss.max_rank)?;
        }
        let mut f = |t: f64, y: &[C64], dy: &mut [C64]| rhs.eval(t, y, dy);
        stepper.invalidate();
        stepper.advance(&mut f, t0, t1, &mut rho.data)?;
        if dissipative {
            let d = current.as_mut().unwrap();
            d.apply(&mut rho, tau / 2.0)?;
            diag.dropped_trace += rho.recompress(diss.rank_tol, diss.max_rank)?;
        }
        diag.max_rank = diag.max_rank.max(rho.rank());
        let terr = (rho.trace() + diag.dropped_trace - trace0).abs();
        diag.max_trace_error = diag.max_trace_error.max(terr);
        observe(t1, &rho, &mut diag)?;
    }

    let s = stepper.stats;
    diag.integrator.steps_accepted = s.accepted;
    diag.integrator.steps_rejected = s.rejected;
    diag.integrator.rhs_evals = s.rhs_evals;
    diag.integrator.min_step = s.min_step;
    diag.integrator.dt_max = dt_max;
    diag.integrator.max_norm_drift = diag.max_trace_error;
    let mut warnings = Vec::new();
    if diag.integrator.max_top_fock_population > 1e-6 {
        warnings.push(format!(
            "top Fock level reached population {:.2e}; increase n_fock",
            diag.integrator.max_top_fock_population
        ));
    }
    if diag.min_basis_alignment < 0.5 {
        warnings.push(format!(
            "dressed basis changed sharply between rebuilds (alignment {:.3})",
            diag.min_basis_alignment
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LindbladTrajectory {
        records,
        snapshots,
        final_state: rho,
        diagnostics: diag,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::schrodinger_evolve;
    use crate::schedules::{ControlSchedule, Segment, Shape};
    use crate::statespace::{annihilator, embed, product_state, register_state, Factor};

    fn hold(n: usize, t: f64, g: f64, w: f64) -> ControlSchedule {
        ControlSchedule::new(n, vec![Segment::uniform(n, t, Shape::Hold, (g, g), (w, w))]).unwrap()
    }

    #[test]
    fn damped_oscillator_decays_exponentially() {
        let space = HilbertSpace::new(1, 6).unwrap();
        let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
        let sched = hold(1, 2.0, 0.0, 0.37);
        let psi = product_state(&space, 1, &register_state("d").unwrap()).unwrap();
        let obs = Observer::new(space, register_state("d").unwrap()).unwrap();
        let kappa = 0.4;
        let diss = DissipatorConfig {
            kappa,
            rate_floor: 0.0,
            basis_dim: space.dim(),
            ..Default::default()
        };
        let cfg = IntegratorConfig {
            record_stride: 0.5,
            snapshot_times: vec![1.0, 2.0],
            ..Default::default()
        };
        let traj = lindblad_evolve(&ham, &sched, &FactoredDensity::from_pure(&psi), &obs, &cfg, &diss).unwrap();
        let num = embed(&annihilator(6).unwrap().adjoint().mul(&annihilator(6).unwrap()).unwrap(), Factor::Resonator, &space).unwrap();
        for t in [1.0, 2.0] {
            let rho = traj.snapshot(t).unwrap();
            let n: f64 = rho.columns().map(|w| num.expectation(w).re).sum();
            assert!((n - (-kappa * t).exp()).abs() < 1e-8, "t={t}: {n}");
        }
    }

    #[test]
    fn relaxes_to_gibbs_state() {
        let space = HilbertSpace::new(1, 10).unwrap();
        let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
        let (g, w) = (0.3, 0.8);
        let sched = hold(1, 80.0, g, w);
        let psi = product_state(&space, 0, &register_state("u").unwrap()).unwrap();
        let obs = Observer::new(space, register_state("d").unwrap()).unwrap();
        let temp = 0.6;
        let diss = DissipatorConfig {
            kappa: 0.3,
            temperature: temp,
            rate_floor: 0.0,
            basis_dim: space.dim(),
            rebuild_interval: 0.5,
            ..Default::default()
        };
        let cfg = IntegratorConfig {
            record_stride: 10.0,
            tolerance: 1e-9,
            ..Default::default()
        };
        let traj = lindblad_evolve(&ham, &sched, &FactoredDensity::from_pure(&psi), &obs, &cfg, &diss).unwrap();
        let h = ham.to_operator(&[g], &[w]).unwrap();
        let es = eigensystem(&h, space.dim()).unwrap();
        let weights: Vec<f64> = es.values.iter().map(|e| (-(e - es.values[0]) / temp).exp()).collect();
        let z: f64 = weights.iter().sum();
        let gibbs = DensityMatrix::mixture(
            &es.vectors.iter().zip(&weights).map(|(v, p)| (p / z, v.clone())).collect::<Vec<_>>(),
        )
        .unwrap();
        let diff = DensityMatrix {
            entries: traj.final_state.to_dense().entries - gibbs.entries,
        };
        let dist: f64 = 0.5 * diff.eigenvalues().unwrap().iter().map(|x| x.abs()).sum::<f64>();
        assert!(dist < 1e-3, "trace distance {dist}");
        assert!(traj.diagnostics.max_trace_error < 1e-8);
    }

    #[test]
    fn zero_kappa_reduces_to_schrodinger() {
        let space = HilbertSpace::new(2, 8).unwrap();
        let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
        let sched = ControlSchedule::new(
            2,
            vec![Segment::uniform(2, 1.5, Shape::Cosine, (0.1, 1.4), (2.0, 0.6))],
        )
        .unwrap();
        let psi = product_state(&space, 0, &register_state("dd").unwrap()).unwrap();
        let obs = Observer::new(space, register_state("dd").unwrap()).unwrap();
        let cfg = IntegratorConfig {
            tolerance: 1e-11,
            record_stride: 0.25,
            ..Default::default()
        };
        let pure = schrodinger_evolve(&ham, &sched, &psi, &obs, &cfg).unwrap();
        let mixed = lindblad_evolve(&ham, &sched, &FactoredDensity::from_pure(&psi), &obs, &cfg, &DissipatorConfig::default()).unwrap();
        assert_eq!(pure.records.len(), mixed.records.len());
        for (a, b) in pure.records.iter().zip(&mixed.records) {
            assert!((a.fidelity - b.fidelity).abs() < 1e-8);
            assert!((a.entropy_qubits - b.entropy_qubits).abs() < 1e-6);
        }
    }

    #[test]
    fn recompression_preserves_density() {
        let space = HilbertSpace::new(1, 3).unwrap();
        let a = product_state(&space, 0, &register_state("u").unwrap()).unwrap();
        let b = product_state(&space, 2, &register_state("d").unwrap()).unwrap();
        let mut rho = FactoredDensity::from_mixture(&[(0.3, a.clone()), (0.2, a.clone()), (0.5, b)]).unwrap();
        let before = rho.to_dense();
        rho.recompress(1e-12, 10).unwrap();
        assert_eq!(rho.rank(), 2);
        let after = rho.to_dense();
        let err = (before.entries - after.entries).norm_max();
        assert!(err < 1e-12);
    }
}
