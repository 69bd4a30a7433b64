//! Thermal resonator ensembles as weighted sums of pure trajectories.

use faer::Mat;
use rayon::prelude::*;

use super::{leak_warnings, propagate, IntegratorConfig, TrajectoryStats};
use super::lindblad::bose_occupation;
use crate::model::ControlledHamiltonian;
use crate::observables::{ObservableRecord, Observer};
use crate::schedules::Controls;
use crate::statespace::{product_state, reduce_to_register, top_fock_population, DensityMatrix, StateVector};
use crate::{Error, Result, C64};

/// Thermal photon-number weights `n̄ⁿ/(1+n̄)ⁿ⁺¹` for `n < n_cut`,
/// renormalised over the kept levels.
pub fn thermal_weights(nbar: f64, n_cut: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0) || n_cut == 0 {
        return Err(Error::invalid("thermal weights need n̄ ≥ 0 and n_cut ≥ 1"));
    }
    let r = nbar / (1.0 + nbar);
    let raw: Vec<f64> = (0..n_cut).map(|n| r.powi(n as i32) / (1.0 + nbar)).collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|p| p / z).collect())
}

#[derive(Debug, Clone)]
pub struct ThermalMember {
    pub n: usize,
    pub weight: f64,
    pub snapshots: Vec<(f64, StateVector)>,
    pub final_state: StateVector,
    pub stats: TrajectoryStats,
}

#[derive(Debug, Clone)]
pub struct ThermalAverage {
    pub nbar: f64,
    /// Observables of the mixed state `Σ_n p_n |ψ_n⟩⟨ψ_n|`.
    pub records: Vec<ObservableRecord>,
    pub members: Vec<ThermalMember>,
    pub warnings: Vec<String>,
}

impl ThermalAverage {
    /// `Σ_n p_n f(ψ_n(t))` over the snapshot at `t`.
    pub fn weighted_snapshot<F: Fn(&StateVector) -> f64>(&self, t: f64, f: F) -> Option<f64> {
        let mut acc = 0.0;
        for m in &self.members {
            let (_, s) = m.snapshots.iter().find(|(ts, _)| (ts - t).abs() < 1e-9)?;
            acc += m.weight * f(s);
        }
        Some(acc)
    }
}

/// Runs `|n⟩ ⊗ register` for every thermal level with weight above
/// `min_weight` and mixes the results with the thermal weights.
#[allow(clippy::too_many_arguments)]
pub fn thermal_average(
    ham: &ControlledHamiltonian,
    controls: &dyn Controls,
    register: &StateVector,
    temperature: f64,
    n_cut: usize,
    min_weight: f64,
    observer: &Observer,
    config: &IntegratorConfig,
) -> Result<ThermalAverage> {
    let space = *ham.space();
    let nbar = bose_occupation(ham.omega_r(), temperature);
    let all = thermal_weights(nbar, n_cut)?;
    let kept: Vec<(usize, f64)> = all.iter().copied().enumerate().filter(|&(_, p)| p >= min_weight || p == all[0]).collect();
    let z: f64 = kept.iter().map(|(_, p)| p).sum();
    if let Some(&(n, _)) = kept.iter().find(|&&(n, _)| n >= space.n_fock) {
        return Err(Error::invalid(format!("thermal level n = {n} needs n_fock > {n}")));
    }

    let rd = space.register_dim();
    let runs: Vec<(ThermalMember, Vec<(Mat<C64>, f64)>)> = kept
        .par_iter()
        .map(|&(n, p)| {
            let psi0 = product_state(&space, n, register)?;
            let mut reduced = Vec::new();
            let run = propagate(ham, controls, &psi0, config, |_, y| {
                reduced.push((reduce_to_register(y, &space).entries, top_fock_population(y, &space)));
                Ok(())
            })?;
            Ok((
                ThermalMember {
                    n,
                    weight: p / z,
                    snapshots: run.snapshots,
                    final_state: run.final_state,
                    stats: run.stats,
                },
                reduced,
            ))
        })
        .collect::<Result<_>>()?;

    let (_, record_times) = super::event_times(
        config.t_end.map_or(controls.duration(), |t| t.max(0.0)),
        config.record_stride,
        &[],
    );
    let mut records = Vec::with_capacity(record_times.len());
    for (i, &t) in record_times.iter().enumerate() {
        let mut acc = Mat::<C64>::zeros(rd, rd);
        let mut top = 0.0;
        for (m, red) in &runs {
            let (r, tp) = &red[i];
            acc += faer::Scale(C64::new(m.weight, 0.0)) * r;
            top += m.weight * tp;
        }
        records.push(observer.record_from_register(t, &DensityMatrix { entries: acc }, top)?);
    }
    let mut warnings = Vec::new();
    let members: Vec<ThermalMember> = runs.into_iter().map(|(m, _)| m).collect();
    for m in &members {
        for w in leak_warnings(&m.stats) {
            warnings.push(format!("n = {}: {w}", m.n));
        }
    }
    Ok(ThermalAverage {
        nbar,
        records,
        members,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{ControlSchedule, Segment, Shape};
    use crate::statespace::{register_state, HilbertSpace};

    #[test]
    fn weights_are_geometric() {
        let w = thermal_weights(0.5, 40).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!((w[1] / w[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(thermal_weights(0.0, 5).unwrap(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn decoupled_ensemble_keeps_register() {
        let space = HilbertSpace::new(1, 6).unwrap();
        let ham = ControlledHamiltonian::new(space, 1.0).unwrap();
        let sched = ControlSchedule::new(1, vec![Segment::uniform(1, 1.0, Shape::Hold, (0.0, 0.0), (1.3, 1.3))]).unwrap();
        let reg = register_state("d").unwrap();
        let obs = Observer::new(space, reg.clone()).unwrap();
        let cfg = IntegratorConfig {
            record_stride: 0.25,
            ..Default::default()
        };
        let avg = thermal_average(&ham, &sched, &reg, 0.8, 4, 0.0, &obs, &cfg).unwrap();
        assert_eq!(avg.members.len(), 4);
        for r in &avg.records {
            assert!((r.fidelity - 1.0).abs() < 1e-9);
            assert!((r.purity_qubits - 1.0).abs() < 1e-9);
        }
    }
}
