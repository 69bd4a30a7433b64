//! Scalar diagnostics of evolved states.

use serde::{Deserialize, Serialize};

use crate::statespace::{
    partial_trace, partial_trace_pure, reduce_to_register, spin_squared, top_fock_population,
    DensityMatrix, HilbertSpace, Keep, Layout, OperatorMatrix, StateVector,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub t: f64,
    pub fidelity: f64,
    pub purity_qubits: f64,
    pub entropy_qubits: f64,
    pub entropy_single: f64,
    pub s2: f64,
    pub top_fock_population: f64,
}

/// `⟨target| Tr_r{|ψ⟩⟨ψ|} |target⟩` without forming the reduced state.
pub fn fidelity_to_qubit_state(psi: &[C64], space: &HilbertSpace, target: &StateVector) -> Result<f64> {
    if target.dim() != space.register_dim() {
        return Err(Error::dims(format!(
            "target has dim {}, register has {}",
            target.dim(),
            space.register_dim()
        )));
    }
    if psi.len() != space.dim() {
        return Err(Error::dims(format!("state has dim {}, space has {}", psi.len(), space.dim())));
    }
    let nf = space.n_fock;
    let mut proj = vec![C64::new(0.0, 0.0); nf];
    for (q, t) in target.amplitudes.iter().enumerate() {
        if *t == C64::new(0.0, 0.0) {
            continue;
        }
        let tc = t.conj();
        for (p, a) in proj.iter_mut().zip(&psi[q * nf..(q + 1) * nf]) {
            *p += tc * a;
        }
    }
    Ok(proj.iter().map(|x| x.norm_sqr()).sum())
}

/// Fidelity of a full-space density matrix with a pure register target.
pub fn fidelity_mixed(rho: &DensityMatrix, space: &HilbertSpace, target: &StateVector) -> Result<f64> {
    let rq = partial_trace(rho, Layout::Full(*space), &Keep::Qubits)?;
    fidelity_register(&rq, target)
}

/// `⟨target|ρ_q|target⟩` for a register density matrix.
pub fn fidelity_register(rho_q: &DensityMatrix, target: &StateVector) -> Result<f64> {
    if rho_q.dim() != target.dim() {
        return Err(Error::dims("register density matrix and target differ in dimension"));
    }
    Ok(rho_q.expectation_pure(target))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.purity()
}

/// Von Neumann entropy in bits.
///
/// Eigenvalues in `(−1e-6, 0)` are clipped to zero and the rest
/// renormalised; anything more negative is an error.
pub fn entanglement_entropy(rho: &DensityMatrix) -> Result<f64> {
    let vals = rho.eigenvalues()?;
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -1e-6 {
        return Err(Error::NegativeEigenvalue(min));
    }
    if min < -1e-10 {
        log::warn!("clipping density-matrix eigenvalue {min:.3e}");
    }
    let total: f64 = vals.iter().filter(|&&v| v > 0.0).sum();
    if total <= 0.0 {
        return Err(Error::invalid("density matrix has no positive weight"));
    }
    Ok(vals
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

/// `⟨S²⟩` of a register density matrix.
pub fn total_spin(rho_q: &DensityMatrix, s2: &OperatorMatrix) -> Result<f64> {
    if rho_q.dim() != s2.dim() {
        return Err(Error::dims("S² and register state differ in dimension"));
    }
    Ok(rho_q.expectation(s2).re)
}

/// Maximum fidelity at times `t ≥ t_f`.
pub fn eef(records: &[ObservableRecord], t_f: f64) -> Result<f64> {
    records
        .iter()
        .filter(|r| r.t >= t_f - 1e-12)
        .map(|r| r.fidelity)
        .fold(None, |acc: Option<f64>, f| Some(acc.map_or(f, |a| a.max(f))))
        .ok_or_else(|| Error::EmptyWindow(format!("no records at or after t = {t_f}")))
}

/// Time of the EEF crest.
pub fn eef_time(records: &[ObservableRecord], t_f: f64) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.t >= t_f - 1e-12)
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
        .map(|r| r.t)
}

/// Computes every record field from a pure full-space state.
#[derive(Debug, Clone)]
pub struct Observer {
    space: HilbertSpace,
    target: StateVector,
    s2: OperatorMatrix,
}

impl Observer {
    pub fn new(space: HilbertSpace, target: StateVector) -> Result<Self> {
        if target.dim() != space.register_dim() {
            return Err(Error::dims("observer target must live on the qubit register"));
        }
        Ok(Self {
            s2: spin_squared(space.n_qubits)?,
            space,
            target,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn target(&self) -> &StateVector {
        &self.target
    }

    pub fn record(&self, t: f64, psi: &[C64]) -> Result<ObservableRecord> {
        let rq = reduce_to_register(psi, &self.space);
        self.record_from_register(t, &rq, top_fock_population(psi, &self.space))
    }

    /// Record from an already reduced register state.
    pub fn record_from_register(&self, t: f64, rq: &DensityMatrix, top: f64) -> Result<ObservableRecord> {
        let single = partial_trace(rq, Layout::Register(self.space.n_qubits), &Keep::SingleQubit(0))?;
        Ok(ObservableRecord {
            t,
            fidelity: fidelity_register(rq, &self.target)?,
            purity_qubits: rq.purity(),
            entropy_qubits: entanglement_entropy(rq)?,
            entropy_single: entanglement_entropy(&single)?,
            s2: total_spin(rq, &self.s2)?,
            top_fock_population: top,
        })
    }
}

/// Single-qubit reduced state of a pure full-space vector.
pub fn single_qubit_state(psi: &[C64], space: &HilbertSpace, qubit: usize) -> Result<DensityMatrix> {
    partial_trace_pure(psi, Layout::Full(*space), &Keep::SingleQubit(qubit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dicke_state, singlet_states};
    use crate::statespace::{product_state, register_state, Axis};

    #[test]
    fn fidelity_examples() {
        let space = HilbertSpace::new(2, 3).unwrap();
        let d0 = dicke_state(2, 1.0, 0.0, Axis::X, 0).unwrap();
        let psi = product_state(&space, 0, &d0).unwrap();
        assert!((fidelity_to_qubit_state(&psi.amplitudes, &space, &d0).unwrap() - 1.0).abs() < 1e-12);
        let dd = product_state(&space, 0, &register_state("dd").unwrap()).unwrap();
        assert!((fidelity_to_qubit_state(&dd.amplitudes, &space, &d0).unwrap() - 0.5).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((fidelity_register(&mixed, &d0).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn entropy_and_purity() {
        let mut bell = register_state("uu").unwrap();
        bell.amplitudes[0] = C64::new(1.0, 0.0);
        let bell = bell.normalized().unwrap();
        let whole = DensityMatrix::from_pure(&bell);
        assert!(entanglement_entropy(&whole).unwrap() < 1e-9);
        let one = partial_trace(&whole, Layout::Register(2), &Keep::SingleQubit(0)).unwrap();
        assert!((purity(&one) - 0.5).abs() < 1e-12);
        assert!((entanglement_entropy(&one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singlet_has_zero_spin() {
        let s = &singlet_states(4).unwrap()[0];
        let rq = DensityMatrix::from_pure(s);
        assert!(total_spin(&rq, &spin_squared(4).unwrap()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eef_window() {
        let rec = |t, f| ObservableRecord {
            t,
            fidelity: f,
            purity_qubits: 1.0,
            entropy_qubits: 0.0,
            entropy_single: 0.0,
            s2: 0.0,
            top_fock_population: 0.0,
        };
        let r = vec![rec(0.0, 0.99), rec(1.0, 0.3), rec(2.0, 0.7), rec(3.0, 0.6)];
        assert_eq!(eef(&r, 1.0).unwrap(), 0.7);
        assert_eq!(eef_time(&r, 1.0), Some(2.0));
        assert!(eef(&r, 5.0).is_err());
    }
}
