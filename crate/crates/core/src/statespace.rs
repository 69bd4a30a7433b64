//! Truncated qubit-register ⊗ Fock Hilbert spaces and the operators on them.
//!
//! Basis ordering is fixed everywhere: the register is the slow index with
//! qubit 0 as the most significant bit, the Fock number is the fast index,
//! so `index = q * n_fock + n`. A set bit is `|↑⟩`, and `σ_z|↑⟩ = +|↑⟩`.

use faer::Mat;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            _ => Err(Error::invalid(format!("unknown axis `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpace {
    pub n_qubits: usize,
    pub n_fock: usize,
}

impl HilbertSpace {
    pub fn new(n_qubits: usize, n_fock: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::invalid("n_qubits must be at least 1"));
        }
        if n_qubits > 16 {
            return Err(Error::invalid(format!("n_qubits = {n_qubits} is too large")));
        }
        if n_fock < 2 {
            return Err(Error::invalid(format!("n_fock must be at least 2, got {n_fock}")));
        }
        Ok(Self { n_qubits, n_fock })
    }

    pub fn register_dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.register_dim() * self.n_fock
    }

    pub fn index(&self, register: usize, n: usize) -> usize {
        register * self.n_fock + n
    }

    /// Inverse of [`HilbertSpace::index`]: `(register, n)`.
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_fock, idx % self.n_fock)
    }

    /// Local dimensions of the tensor factors: N qubits then the resonator.
    pub fn factors(&self) -> Vec<usize> {
        let mut f = vec![2; self.n_qubits];
        f.push(self.n_fock);
        f
    }
}

/// Sparse complex operator in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    mat: CsMat<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(mat: CsMat<C64>, hermitian: bool) -> Result<Self> {
        if mat.rows() != mat.cols() {
            return Err(Error::dims(format!(
                "operator must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let mat = if mat.is_csr() { mat } else { mat.to_csr() };
        Ok(Self { mat, hermitian })
    }

    pub fn from_triplets(dim: usize, entries: &[(usize, usize, C64)], hermitian: bool) -> Self {
        let mut tri = TriMat::with_capacity((dim, dim), entries.len());
        for &(i, j, v) in entries {
            tri.add_triplet(i, j, v);
        }
        Self {
            mat: tri.to_csr(),
            hermitian,
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let entries: Vec<_> = diag
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(|(i, &d)| (i, i, C64::new(d, 0.0)))
            .collect();
        Self::from_triplets(diag.len(), &entries, true)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: CsMat::eye(dim),
            hermitian: true,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: CsMat::zero((dim, dim)),
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn csr(&self) -> &CsMat<C64> {
        &self.mat
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat.get(i, j).copied().unwrap_or(ZERO)
    }

    /// `y = M x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim());
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut acc = ZERO;
            for (j, &v) in row.iter() {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    /// `y += alpha · M x`.
    pub fn apply_add(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut acc = ZERO;
            for (j, &v) in row.iter() {
                acc += v * x[j];
            }
            y[i] += alpha * acc;
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; x.len()];
        self.apply(x, &mut y);
        y
    }

    /// `⟨ψ|M|ψ⟩`.
    pub fn expectation(&self, psi: &[C64]) -> C64 {
        let mut acc = ZERO;
        for (i, row) in self.mat.outer_iterator().enumerate() {
            let mut r = ZERO;
            for (j, &v) in row.iter() {
                r += v * psi[j];
            }
            acc += psi[i].conj() * r;
        }
        acc
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut m = Mat::<C64>::zeros(n, n);
        for (i, row) in self.mat.outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let t = self.mat.transpose_view().to_csr();
        Self {
            mat: t.map(|v| v.conj()),
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            mat: self.mat.map(|v| v * c),
            hermitian: self.hermitian && c.im == 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
            hermitian: self.hermitian && other.hermitian,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-ONE))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            mat: &self.mat * &other.mat,
            hermitian: false,
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: sprs::kronecker_product(self.mat.view(), other.mat.view()),
            hermitian: self.hermitian && other.hermitian,
        }
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let adj = self.adjoint();
        let diff = &self.mat - &adj.mat;
        diff.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.data().iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.mat.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Marks the operator Hermitian after checking it to within `tol`.
    pub fn into_hermitian(mut self, tol: f64) -> Result<Self> {
        let err = self.hermiticity_error();
        if err > tol {
            return Err(Error::NonHermitian(err));
        }
        self.hermitian = true;
        Ok(self)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::dims(format!(
                "operator dims {} and {} differ",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

pub fn annihilator(n_fock: usize) -> Result<OperatorMatrix> {
    if n_fock < 2 {
        return Err(Error::invalid(format!("n_fock must be at least 2, got {n_fock}")));
    }
    let entries: Vec<_> = (1..n_fock)
        .map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0)))
        .collect();
    Ok(OperatorMatrix::from_triplets(n_fock, &entries, false))
}

pub fn number(n_fock: usize) -> Result<OperatorMatrix> {
    if n_fock < 2 {
        return Err(Error::invalid(format!("n_fock must be at least 2, got {n_fock}")));
    }
    let diag: Vec<f64> = (0..n_fock).map(|n| n as f64).collect();
    Ok(OperatorMatrix::from_diagonal(&diag))
}

/// Single-qubit Pauli matrix in the `(↓, ↑)` ordering.
pub fn pauli_2x2(axis: Axis) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, i], [-i, ZERO]],
        Axis::Z => [[-ONE, ZERO], [ZERO, ONE]],
    }
}

/// `σ_axis` on qubit `qubit` (0-based) of an `n`-qubit register.
pub fn pauli(qubit: usize, axis: Axis, n: usize) -> Result<OperatorMatrix> {
    if qubit >= n {
        return Err(Error::invalid(format!(
            "qubit index {qubit} out of range for {n} qubits"
        )));
    }
    let dim = 1usize << n;
    let mask = 1usize << (n - 1 - qubit);
    let entries: Vec<_> = (0..dim)
        .map(|b| {
            let up = b & mask != 0;
            match axis {
                Axis::X => (b ^ mask, b, ONE),
                Axis::Y => (b ^ mask, b, if up { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) }),
                Axis::Z => (b, b, if up { ONE } else { -ONE }),
            }
        })
        .collect();
    Ok(OperatorMatrix::from_triplets(dim, &entries, true))
}

/// `S_axis = Σ_i σ_axis^i / 2` on the register.
pub fn collective_spin(axis: Axis, n: usize) -> Result<OperatorMatrix> {
    weighted_spin(axis, &vec![1.0; n])
}

/// `Σ_i w_i σ_axis^i / 2`.
pub fn weighted_spin(axis: Axis, weights: &[f64]) -> Result<OperatorMatrix> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::invalid("spin operator needs at least one qubit"));
    }
    let mut acc = OperatorMatrix::zeros(1 << n);
    for (i, &w) in weights.iter().enumerate() {
        acc = acc.add(&pauli(i, axis, n)?.scale(C64::new(0.5 * w, 0.0)))?;
    }
    Ok(acc)
}

/// `S² = S_x² + S_y² + S_z²`.
pub fn spin_squared(n: usize) -> Result<OperatorMatrix> {
    let mut acc = OperatorMatrix::zeros(1 << n);
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let s = collective_spin(axis, n)?;
        acc = acc.add(&s.mul(&s)?)?;
    }
    acc.into_hermitian(1e-12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Qubits,
    Resonator,
}

/// Extends an operator on one factor by the identity on the other.
pub fn embed(op: &OperatorMatrix, which: Factor, space: &HilbertSpace) -> Result<OperatorMatrix> {
    match which {
        Factor::Qubits => {
            if op.dim() != space.register_dim() {
                return Err(Error::dims(format!(
                    "register operator has dim {}, expected {}",
                    op.dim(),
                    space.register_dim()
                )));
            }
            Ok(op.kron(&OperatorMatrix::identity(space.n_fock)))
        }
        Factor::Resonator => {
            if op.dim() != space.n_fock {
                return Err(Error::dims(format!(
                    "resonator operator has dim {}, expected {}",
                    op.dim(),
                    space.n_fock
                )));
            }
            Ok(OperatorMatrix::identity(space.register_dim()).kron(op))
        }
    }
}

/// Dense amplitude vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn basis(dim: usize, idx: usize) -> Self {
        let mut a = vec![ZERO; dim];
        a[idx] = ONE;
        Self { amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(self)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        crate::linalg::dot(&self.amplitudes, &other.amplitudes)
    }

    pub fn overlap_sqr(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut a = Vec::with_capacity(self.dim() * other.dim());
        for &x in &self.amplitudes {
            for &y in &other.amplitudes {
                a.push(x * y);
            }
        }
        Self { amplitudes: a }
    }
}

/// Register basis state from a spin pattern such as `"uudd"`, `"↑↑↓↓"` or
/// `"1100"`; the first character is qubit 0.
pub fn register_state(pattern: &str) -> Result<StateVector> {
    let bits: Vec<bool> = pattern
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '|' && *c != '>' && *c != '⟩')
        .map(|c| match c {
            'u' | 'U' | '↑' | '1' => Ok(true),
            'd' | 'D' | '↓' | '0' => Ok(false),
            _ => Err(Error::invalid(format!("bad spin character `{c}` in `{pattern}`"))),
        })
        .collect::<Result<_>>()?;
    if bits.is_empty() {
        return Err(Error::invalid("empty spin pattern"));
    }
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    Ok(StateVector::basis(1 << bits.len(), idx))
}

/// `|n⟩ ⊗ |register⟩` laid out in the fixed ordering.
pub fn product_state(space: &HilbertSpace, n: usize, register: &StateVector) -> Result<StateVector> {
    if register.dim() != space.register_dim() {
        return Err(Error::dims(format!(
            "register state has dim {}, expected {}",
            register.dim(),
            space.register_dim()
        )));
    }
    if n >= space.n_fock {
        return Err(Error::invalid(format!("Fock level {n} beyond truncation {}", space.n_fock)));
    }
    Ok(register.kron(&StateVector::basis(space.n_fock, n)))
}

/// Applies a 2x2 gate to qubit `qubit` of a vector laid out as
/// register ⊗ (inner factor of size `inner`).
pub fn apply_qubit_gate(amps: &mut [C64], gate: &[[C64; 2]; 2], qubit: usize, n_qubits: usize, inner: usize) {
    let stride = (1usize << (n_qubits - 1 - qubit)) * inner;
    let block = 2 * stride;
    for start in (0..amps.len()).step_by(block) {
        for k in start..start + stride {
            let a0 = amps[k];
            let a1 = amps[k + stride];
            amps[k] = gate[0][0] * a0 + gate[0][1] * a1;
            amps[k + stride] = gate[1][0] * a0 + gate[1][1] * a1;
        }
    }
}

/// The single-qubit rotation taking `|↓⟩ → (|↓⟩−|↑⟩)/√2` and
/// `|↑⟩ → (|↓⟩+|↑⟩)/√2`; columns are the x-basis states.
pub fn x_rotation() -> [[C64; 2]; 2] {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, h], [-h, h]]
}

/// Maps x-basis register coordinates to z-basis coordinates.
pub fn rotate_register_to_x(state: &StateVector, n_qubits: usize, inner: usize) -> StateVector {
    let mut amps = state.amplitudes.clone();
    let r = x_rotation();
    for q in 0..n_qubits {
        apply_qubit_gate(&mut amps, &r, q, n_qubits, inner);
    }
    StateVector::new(amps)
}

/// Dense density matrix.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub entries: Mat<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Mat<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::dims("density matrix must be square"));
        }
        Ok(Self { entries })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let a = &psi.amplitudes;
        Self {
            entries: Mat::from_fn(a.len(), a.len(), |i, j| a[i] * a[j].conj()),
        }
    }

    /// `Σ_k w_k |ψ_k⟩⟨ψ_k|`.
    pub fn mixture(states: &[(f64, StateVector)]) -> Result<Self> {
        let dim = states
            .first()
            .map(|(_, s)| s.dim())
            .ok_or_else(|| Error::invalid("empty mixture"))?;
        let mut m = Mat::<C64>::zeros(dim, dim);
        for (w, s) in states {
            if s.dim() != dim {
                return Err(Error::dims("mixture components differ in dimension"));
            }
            let a = &s.amplitudes;
            for j in 0..dim {
                let cj = a[j].conj() * *w;
                for i in 0..dim {
                    m[(i, j)] += a[i] * cj;
                }
            }
        }
        Ok(Self { entries: m })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            entries: Mat::from_fn(dim, dim, |i, j| {
                if i == j {
                    C64::new(1.0 / dim as f64, 0.0)
                } else {
                    ZERO
                }
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += self.entries[(i, j)].norm_sqr();
            }
        }
        acc
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `⟨φ|ρ|φ⟩`.
    pub fn expectation_pure(&self, phi: &StateVector) -> f64 {
        let a = &phi.amplitudes;
        let n = self.dim();
        let mut acc = ZERO;
        for j in 0..n {
            let mut col = ZERO;
            for i in 0..n {
                col += a[i].conj() * self.entries[(i, j)];
            }
            acc += col * a[j];
        }
        acc.re
    }

    /// `Tr{O ρ}`.
    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        let mut acc = ZERO;
        for (i, row) in op.csr().outer_iterator().enumerate() {
            for (j, &v) in row.iter() {
                acc += v * self.entries[(j, i)];
            }
        }
        acc
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        let herm = Mat::from_fn(n, n, |i, j| (self.entries[(i, j)] + self.entries[(j, i)].conj()) * 0.5);
        crate::linalg::hermitian_eigenvalues(&herm)
    }

    /// Checks Hermiticity, unit trace and positivity against the given bounds.
    pub fn validate(&self, herm_tol: f64, trace_tol: f64, neg_tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > herm_tol {
            return Err(Error::NonHermitian(h));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > trace_tol {
            return Err(Error::invalid(format!("density matrix trace {tr} differs from 1")));
        }
        let min = self.eigenvalues()?.first().copied().unwrap_or(0.0);
        if min < -neg_tol {
            return Err(Error::NegativeEigenvalue(min));
        }
        Ok(())
    }
}

/// Which factor(s) survive a partial trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Keep {
    Qubits,
    Resonator,
    SingleQubit(usize),
    QubitSubset(Vec<usize>),
}

/// Layout of the object being reduced: the full space or the register alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Full(HilbertSpace),
    Register(usize),
}

impl Layout {
    fn factors(&self) -> Vec<usize> {
        match self {
            Layout::Full(s) => s.factors(),
            Layout::Register(n) => vec![2; *n],
        }
    }

    fn n_qubits(&self) -> usize {
        match self {
            Layout::Full(s) => s.n_qubits,
            Layout::Register(n) => *n,
        }
    }

    pub fn dim(&self) -> usize {
        self.factors().iter().product()
    }

    fn kept(&self, keep: &Keep) -> Result<Vec<usize>> {
        let n = self.n_qubits();
        let check = |q: usize| {
            if q >= n {
                Err(Error::invalid(format!("qubit {q} out of range for {n} qubits")))
            } else {
                Ok(q)
            }
        };
        match keep {
            Keep::Qubits => Ok((0..n).collect()),
            Keep::Resonator => match self {
                Layout::Full(_) => Ok(vec![n]),
                Layout::Register(_) => Err(Error::invalid("no resonator factor to keep")),
            },
            Keep::SingleQubit(q) => Ok(vec![check(*q)?]),
            Keep::QubitSubset(qs) => {
                let mut v: Vec<usize> = qs.iter().map(|&q| check(q)).collect::<Result<_>>()?;
                v.sort_unstable();
                if v.windows(2).any(|w| w[0] == w[1]) || v.is_empty() {
                    return Err(Error::invalid(format!("invalid qubit subset {qs:?}")));
                }
                Ok(v)
            }
        }
    }
}

/// For every full index, its (kept index, traced index) pair, plus the
/// kept dimension.
fn split_indices(factors: &[usize], kept: &[usize]) -> (Vec<(usize, usize)>, usize, usize) {
    let dim: usize = factors.iter().product();
    let kept_dim: usize = kept.iter().map(|&k| factors[k]).product();
    let traced_dim = dim / kept_dim;
    let mut out = Vec::with_capacity(dim);
    let mut digits = vec![0usize; factors.len()];
    for _ in 0..dim {
        let (mut ki, mut ti) = (0, 0);
        for (f, (&d, &size)) in digits.iter().zip(factors).enumerate() {
            if kept.contains(&f) {
                ki = ki * size + d;
            } else {
                ti = ti * size + d;
            }
        }
        out.push((ki, ti));
        for f in (0..factors.len()).rev() {
            digits[f] += 1;
            if digits[f] < factors[f] {
                break;
            }
            digits[f] = 0;
        }
    }
    (out, kept_dim, traced_dim)
}

fn grouped(factors: &[usize], kept: &[usize]) -> (Vec<Vec<(usize, usize)>>, usize) {
    let (pairs, kept_dim, traced_dim) = split_indices(factors, kept);
    let mut groups = vec![Vec::with_capacity(kept_dim); traced_dim];
    for (i, (k, t)) in pairs.into_iter().enumerate() {
        groups[t].push((k, i));
    }
    (groups, kept_dim)
}

pub fn partial_trace(rho: &DensityMatrix, layout: Layout, keep: &Keep) -> Result<DensityMatrix> {
    if rho.dim() != layout.dim() {
        return Err(Error::dims(format!(
            "density matrix dim {} does not match layout dim {}",
            rho.dim(),
            layout.dim()
        )));
    }
    let kept = layout.kept(keep)?;
    let (groups, kd) = grouped(&layout.factors(), &kept);
    let mut out = Mat::<C64>::zeros(kd, kd);
    for g in &groups {
        for &(kj, j) in g {
            for &(ki, i) in g {
                out[(ki, kj)] += rho.entries[(i, j)];
            }
        }
    }
    Ok(DensityMatrix { entries: out })
}

/// Reduced density matrix of a pure state without forming `|ψ⟩⟨ψ|`.
pub fn partial_trace_pure(psi: &[C64], layout: Layout, keep: &Keep) -> Result<DensityMatrix> {
    if psi.len() != layout.dim() {
        return Err(Error::dims(format!(
            "state dim {} does not match layout dim {}",
            psi.len(),
            layout.dim()
        )));
    }
    if let (Layout::Full(space), Keep::Qubits) = (layout, keep) {
        return Ok(reduce_to_register(psi, &space));
    }
    let kept = layout.kept(keep)?;
    let (groups, kd) = grouped(&layout.factors(), &kept);
    let mut out = Mat::<C64>::zeros(kd, kd);
    for g in &groups {
        for &(kj, j) in g {
            let cj = psi[j].conj();
            for &(ki, i) in g {
                out[(ki, kj)] += psi[i] * cj;
            }
        }
    }
    Ok(DensityMatrix { entries: out })
}

/// `Tr_r |ψ⟩⟨ψ|` using the contiguous Fock layout.
pub fn reduce_to_register(psi: &[C64], space: &HilbertSpace) -> DensityMatrix {
    let rd = space.register_dim();
    let nf = space.n_fock;
    let mut out = Mat::<C64>::zeros(rd, rd);
    for q2 in 0..rd {
        let b = &psi[q2 * nf..(q2 + 1) * nf];
        for q1 in q2..rd {
            let a = &psi[q1 * nf..(q1 + 1) * nf];
            let v: C64 = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            out[(q1, q2)] = v;
            out[(q2, q1)] = v.conj();
        }
    }
    DensityMatrix { entries: out }
}

/// Population of the highest retained Fock level.
pub fn top_fock_population(psi: &[C64], space: &HilbertSpace) -> f64 {
    (0..space.register_dim())
        .map(|q| psi[space.index(q, space.n_fock - 1)].norm_sqr())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn ladder_entries() {
        let a = annihilator(3).unwrap();
        assert!(close(a.get(0, 1), ONE));
        assert!(close(a.get(1, 2), C64::new(2f64.sqrt(), 0.0)));
        assert_eq!(a.nnz(), 2);
        let n = a.adjoint().mul(&a).unwrap();
        assert!(close(n.get(2, 2), C64::new(2.0, 0.0)));
        assert!(annihilator(1).is_err());
    }

    #[test]
    fn truncated_commutator() {
        let nf = 6;
        let a = annihilator(nf).unwrap();
        let c = a.commutator(&a.adjoint()).unwrap();
        for i in 0..nf - 1 {
            for j in 0..nf - 1 {
                let want = if i == j { ONE } else { ZERO };
                assert!(close(c.get(i, j), want));
            }
        }
    }

    #[test]
    fn pauli_conventions() {
        let z = pauli(0, Axis::Z, 1).unwrap();
        assert!(close(z.get(1, 1), ONE));
        assert!(close(z.get(0, 0), -ONE));
        let xx = pauli(0, Axis::X, 2).unwrap().mul(&pauli(1, Axis::X, 2).unwrap()).unwrap();
        let down = register_state("dd").unwrap();
        let up = register_state("uu").unwrap();
        assert_eq!(xx.apply_vec(&down.amplitudes), up.amplitudes);
        assert!(pauli(2, Axis::X, 2).is_err());
    }

    #[test]
    fn spin_algebra() {
        let n = 3;
        let sx = collective_spin(Axis::X, n).unwrap();
        let sy = collective_spin(Axis::Y, n).unwrap();
        let sz = collective_spin(Axis::Z, n).unwrap();
        let c = sx.commutator(&sy).unwrap().sub(&sz.scale(C64::new(0.0, 1.0))).unwrap();
        assert!(c.max_abs() < 1e-12);
        let up = register_state("uu").unwrap();
        let sz2 = collective_spin(Axis::Z, 2).unwrap();
        assert!(close(sz2.expectation(&up.amplitudes), ONE));
    }

    #[test]
    fn s2_spectrum_two_qubits() {
        let vals = crate::linalg::hermitian_eigenvalues(&spin_squared(2).unwrap().to_dense()).unwrap();
        let want = [0.0, 2.0, 2.0, 2.0];
        for (v, w) in vals.iter().zip(want) {
            assert!((v - w).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_homomorphism() {
        let space = HilbertSpace::new(2, 5).unwrap();
        let a = annihilator(5).unwrap();
        let x = pauli(0, Axis::X, 2).unwrap();
        let ea = embed(&a, Factor::Resonator, &space).unwrap();
        let ex = embed(&x, Factor::Qubits, &space).unwrap();
        assert!(ea.commutator(&ex).unwrap().max_abs() < 1e-14);
        let lhs = ea.mul(&ea.adjoint()).unwrap();
        let rhs = embed(&a.mul(&a.adjoint()).unwrap(), Factor::Resonator, &space).unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-14);
        let id = embed(&OperatorMatrix::identity(4), Factor::Qubits, &space).unwrap();
        assert!(id.sub(&OperatorMatrix::identity(20)).unwrap().max_abs() == 0.0);
        assert!(embed(&a, Factor::Qubits, &space).is_err());
    }

    #[test]
    fn traces_of_product_and_bell() {
        let space = HilbertSpace::new(2, 3).unwrap();
        let dd = register_state("dd").unwrap();
        let psi = product_state(&space, 0, &dd).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let red = partial_trace(&rho, Layout::Full(space), &Keep::Qubits).unwrap();
        assert!(close(red.entries[(0, 0)], ONE));
        assert!((red.purity() - 1.0).abs() < 1e-12);

        let mut bell = register_state("uu").unwrap();
        bell.amplitudes[0] = ONE;
        let bell = bell.normalized().unwrap();
        let one = partial_trace_pure(&bell.amplitudes, Layout::Register(2), &Keep::SingleQubit(1)).unwrap();
        assert!(close(one.entries[(0, 0)], C64::new(0.5, 0.0)));
        assert!(close(one.entries[(0, 1)], ZERO));
        assert!((one.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn register_rotation_round_trip() {
        let s = register_state("ud").unwrap();
        let x = rotate_register_to_x(&s, 2, 1);
        assert!((x.norm() - 1.0).abs() < 1e-14);
        // |↑⟩_x ⊗ |↓⟩_x = (|↓⟩+|↑⟩)(|↓⟩−|↑⟩)/2
        let want = [0.5, -0.5, 0.5, -0.5];
        for (a, w) in x.amplitudes.iter().zip(want) {
            assert!(close(*a, C64::new(w, 0.0)));
        }
    }
}
