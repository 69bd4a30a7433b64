//! Multiqubit USC Hamiltonians.
//!
//! `H = ω_r a†a + Σ_i (g_i/2)(a+a†)σ_x^i + Σ_i (ω_q^i/2)σ_z^i
//!      + Σ_{ij} g_i g_j/(4ω_r) σ_x^i σ_x^j`
//! with the `i = j` terms kept as a constant shift, and its symmetric
//! (extended Dicke) form `ω_r a†a + g(a+a†)S_x + ω_q S_z + (g²/ω_r)S_x²`.

use serde::{Deserialize, Serialize};

use crate::statespace::{
    annihilator, collective_spin, embed, number, Axis, Factor, HilbertSpace, OperatorMatrix,
};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_r: f64,
    pub g: Vec<f64>,
    pub omega_q: Vec<f64>,
}

impl ModelParams {
    pub fn uniform(n: usize, omega_r: f64, g: f64, omega_q: f64) -> Self {
        Self {
            omega_r,
            g: vec![g; n],
            omega_q: vec![omega_q; n],
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.g.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_r > 0.0) {
            return Err(Error::invalid(format!("omega_r must be positive, got {}", self.omega_r)));
        }
        if self.g.len() != self.omega_q.len() {
            return Err(Error::dims(format!(
                "{} couplings but {} qubit frequencies",
                self.g.len(),
                self.omega_q.len()
            )));
        }
        if let Some(g) = self.g.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return Err(Error::invalid(format!("couplings must be finite and non-negative, got {g}")));
        }
        if self.omega_q.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("qubit frequencies must be finite"));
        }
        Ok(())
    }

    fn check_space(&self, space: &HilbertSpace) -> Result<()> {
        self.validate()?;
        if self.n_qubits() != space.n_qubits {
            return Err(Error::dims(format!(
                "parameters describe {} qubits, space has {}",
                self.n_qubits(),
                space.n_qubits
            )));
        }
        Ok(())
    }
}

/// Sparse full Hamiltonian with per-qubit parameters.
pub fn build_full_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> Result<OperatorMatrix> {
    params.check_space(space)?;
    let n = space.n_qubits;
    let nf = space.n_fock;
    let wr = params.omega_r;
    let masks: Vec<usize> = (0..n).map(|i| 1usize << (n - 1 - i)).collect();
    let self_term: f64 = params.g.iter().map(|g| g * g).sum::<f64>() / (4.0 * wr);
    let mut entries = Vec::with_capacity(space.dim() * (1 + 2 * n + n * (n - 1) / 2));
    for b in 0..space.register_dim() {
        let zeeman: f64 = (0..n)
            .map(|i| {
                let s = if b & masks[i] != 0 { 1.0 } else { -1.0 };
                0.5 * params.omega_q[i] * s
            })
            .sum();
        for m in 0..nf {
            let row = space.index(b, m);
            entries.push((row, row, C64::new(wr * m as f64 + zeeman + self_term, 0.0)));
            for i in 0..n {
                let half = 0.5 * params.g[i];
                if half == 0.0 {
                    continue;
                }
                let flipped = b ^ masks[i];
                if m + 1 < nf {
                    let v = half * ((m + 1) as f64).sqrt();
                    entries.push((space.index(flipped, m + 1), row, C64::new(v, 0.0)));
                }
                if m > 0 {
                    let v = half * (m as f64).sqrt();
                    entries.push((space.index(flipped, m - 1), row, C64::new(v, 0.0)));
                }
                for j in (i + 1)..n {
                    let v = 2.0 * params.g[i] * params.g[j] / (4.0 * wr);
                    if v != 0.0 {
                        entries.push((space.index(b ^ masks[i] ^ masks[j], m), row, C64::new(v, 0.0)));
                    }
                }
            }
        }
    }
    Ok(OperatorMatrix::from_triplets(space.dim(), &entries, true))
}

/// Extended Dicke Hamiltonian assembled from collective operators.
pub fn build_dicke_hamiltonian(
    omega_r: f64,
    g: f64,
    omega_q: f64,
    space: &HilbertSpace,
) -> Result<OperatorMatrix> {
    ModelParams::uniform(space.n_qubits, omega_r, g, omega_q).check_space(space)?;
    let n = space.n_qubits;
    let a = annihilator(space.n_fock)?;
    let quad = a.add(&a.adjoint())?;
    let sx = collective_spin(Axis::X, n)?;
    let sz = collective_spin(Axis::Z, n)?;
    let re = |x: f64| C64::new(x, 0.0);
    let h_r = embed(&number(space.n_fock)?, Factor::Resonator, space)?.scale(re(omega_r));
    let coupling = embed(&quad, Factor::Resonator, space)?
        .mul(&embed(&sx, Factor::Qubits, space)?)?
        .scale(re(g));
    let h_q = embed(&sz.scale(re(omega_q)), Factor::Qubits, space)?;
    let sx2 = embed(&sx.mul(&sx)?.scale(re(g * g / omega_r)), Factor::Qubits, space)?;
    h_r.add(&coupling)?.add(&h_q)?.add(&sx2)?.into_hermitian(1e-12)
}

/// `g = |φ₀| √(E_L ω_r / 2)` with `E_L` and `ω_r` in the same frequency units.
pub fn coupling_from_circuit(varphi0: f64, omega_r: f64, e_l: f64) -> Result<f64> {
    if !(omega_r > 0.0) || !(e_l > 0.0) {
        return Err(Error::invalid(format!(
            "omega_r and E_L must be positive, got {omega_r} and {e_l}"
        )));
    }
    Ok(varphi0.abs() * (e_l * omega_r / 2.0).sqrt())
}

/// Photon-number plus excitation parity `(−1)^{n + #up}`.
pub fn parity_operator(space: &HilbertSpace) -> OperatorMatrix {
    let diag: Vec<f64> = (0..space.dim())
        .map(|idx| {
            let (b, m) = space.split(idx);
            if (b.count_ones() as usize + m) % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    OperatorMatrix::from_diagonal(&diag)
}

/// Parity eigenvalue of a basis index, as 0 (even) or 1 (odd).
pub fn parity_of(space: &HilbertSpace, idx: usize) -> usize {
    let (b, m) = space.split(idx);
    (b.count_ones() as usize + m) % 2
}

/// `a + a†` on the full space.
pub fn resonator_quadrature(space: &HilbertSpace) -> Result<OperatorMatrix> {
    let a = annihilator(space.n_fock)?;
    embed(&a.add(&a.adjoint())?, Factor::Resonator, space)?.into_hermitian(0.0)
}

/// Conversion between the dimensionless `ω_r = 1` units and laboratory units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// `ω_r / 2π` in GHz.
    pub resonator_ghz: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self { resonator_ghz: 0.5 }
    }
}

impl UnitSystem {
    /// Frequency `f/h` in GHz expressed in units of `ω_r`.
    pub fn ghz_to_model(&self, f_ghz: f64) -> f64 {
        f_ghz / self.resonator_ghz
    }

    pub fn model_to_ghz(&self, w: f64) -> f64 {
        w * self.resonator_ghz
    }

    /// Time in units of `1/ω_r` converted to nanoseconds.
    pub fn time_to_ns(&self, t: f64) -> f64 {
        t / (2.0 * std::f64::consts::PI * self.resonator_ghz)
    }

    pub fn ns_to_time(&self, ns: f64) -> f64 {
        ns * 2.0 * std::f64::consts::PI * self.resonator_ghz
    }

    /// `k_B T / ħω_r` for a temperature in kelvin.
    pub fn kelvin_to_model(&self, kelvin: f64) -> f64 {
        const KB_OVER_H_GHZ: f64 = 20.836_619_12;
        kelvin * KB_OVER_H_GHZ / self.resonator_ghz
    }
}

/// Matrix-free action of `H(g, ω_q)` for time-dependent controls.
///
/// Uses `Σ_{ij} g_i g_j σ_x^iσ_x^j/(4ω_r) = X²/ω_r` with `X = Σ_i g_i σ_x^i/2`,
/// so one application costs `O(N · dim)`.
#[derive(Debug, Clone)]
pub struct ControlledHamiltonian {
    space: HilbertSpace,
    omega_r: f64,
    sqrt_n: Vec<f64>,
    masks: Vec<usize>,
}

impl ControlledHamiltonian {
    pub fn new(space: HilbertSpace, omega_r: f64) -> Result<Self> {
        if !(omega_r > 0.0) {
            return Err(Error::invalid("omega_r must be positive"));
        }
        let n = space.n_qubits;
        Ok(Self {
            space,
            omega_r,
            sqrt_n: (0..space.n_fock).map(|m| (m as f64).sqrt()).collect(),
            masks: (0..n).map(|i| 1usize << (n - 1 - i)).collect(),
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn omega_r(&self) -> f64 {
        self.omega_r
    }

    fn apply_x(&self, g: &[f64], psi: &[C64], out: &mut [C64]) {
        let nf = self.space.n_fock;
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (i, &mask) in self.masks.iter().enumerate() {
            let half = 0.5 * g[i];
            if half == 0.0 {
                continue;
            }
            for b in 0..self.space.register_dim() {
                let src = &psi[b * nf..(b + 1) * nf];
                let t = b ^ mask;
                let dst = &mut out[t * nf..(t + 1) * nf];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s * half;
                }
            }
        }
    }

    /// `out = H ψ`; `work` must have the full dimension.
    pub fn apply(&self, g: &[f64], omega_q: &[f64], psi: &[C64], out: &mut [C64], work: &mut [C64]) {
        let nf = self.space.n_fock;
        let wr = self.omega_r;
        self.apply_x(g, psi, work);
        // X²/ω_r acting on ψ
        self.apply_x(g, work, out);
        out.iter_mut().for_each(|v| *v /= wr);
        for b in 0..self.space.register_dim() {
            let zeeman: f64 = self
                .masks
                .iter()
                .zip(omega_q)
                .map(|(&m, &w)| if b & m != 0 { 0.5 * w } else { -0.5 * w })
                .sum();
            let base = b * nf;
            for m in 0..nf {
                let k = base + m;
                let mut acc = psi[k] * (wr * m as f64 + zeeman);
                if m + 1 < nf {
                    acc += work[k + 1] * self.sqrt_n[m + 1];
                }
                if m > 0 {
                    acc += work[k - 1] * self.sqrt_n[m];
                }
                out[k] += acc;
            }
        }
    }

    /// Sparse matrix at the given controls.
    pub fn to_operator(&self, g: &[f64], omega_q: &[f64]) -> Result<OperatorMatrix> {
        let params = ModelParams {
            omega_r: self.omega_r,
            g: g.to_vec(),
            omega_q: omega_q.to_vec(),
        };
        build_full_hamiltonian(&params, &self.space)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    #[test]
    fn full_matches_dicke() {
        for n in 2..=4 {
            let space = HilbertSpace::new(n, 6).unwrap();
            let p = ModelParams::uniform(n, 1.0, 1.7, 0.8);
            let full = build_full_hamiltonian(&p, &space).unwrap();
            let dicke = build_dicke_hamiltonian(1.0, 1.7, 0.8, &space).unwrap();
            assert!(full.sub(&dicke).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_spectrum() {
        let space = HilbertSpace::new(2, 4).unwrap();
        let p = ModelParams {
            omega_r: 1.0,
            g: vec![0.0, 0.0],
            omega_q: vec![0.7, 1.3],
        };
        let vals = hermitian_eigenvalues(&build_full_hamiltonian(&p, &space).unwrap().to_dense()).unwrap();
        let mut want = Vec::new();
        for m in 0..4 {
            for s1 in [-1.0, 1.0] {
                for s2 in [-1.0, 1.0] {
                    want.push(m as f64 + 0.35 * s1 + 0.65 * s2);
                }
            }
        }
        want.sort_by(f64::total_cmp);
        for (v, w) in vals.iter().zip(&want) {
            assert!((v - w).abs() < 1e-12);
        }
    }

    #[test]
    fn parity_commutes() {
        let space = HilbertSpace::new(3, 5).unwrap();
        let p = ModelParams {
            omega_r: 1.0,
            g: vec![0.5, 1.5, 2.5],
            omega_q: vec![0.3, 0.9, 1.1],
        };
        let h = build_full_hamiltonian(&p, &space).unwrap();
        let c = h.commutator(&parity_operator(&space)).unwrap();
        assert!(c.max_abs() < 1e-10);
    }

    #[test]
    fn matrix_free_matches_sparse() {
        let space = HilbertSpace::new(3, 7).unwrap();
        let g = [0.4, 1.1, 2.0];
        let w = [0.5, 1.0, 3.0];
        let ch = ControlledHamiltonian::new(space, 1.3).unwrap();
        let op = ch.to_operator(&g, &w).unwrap();
        let psi: Vec<C64> = (0..space.dim())
            .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let want = op.apply_vec(&psi);
        let mut out = vec![C64::new(0.0, 0.0); space.dim()];
        let mut work = out.clone();
        ch.apply(&g, &w, &psi, &mut out, &mut work);
        for (a, b) in out.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn circuit_coupling() {
        assert_eq!(coupling_from_circuit(0.0, 1.0, 5.14).unwrap(), 0.0);
        let g1 = coupling_from_circuit(0.3, 1.0, 5.14).unwrap();
        let g2 = coupling_from_circuit(0.6, 4.0, 5.14).unwrap();
        assert!((g2 / g1 - 4.0).abs() < 1e-12);
        assert!(coupling_from_circuit(0.3, 0.0, 5.14).is_err());
    }
}
