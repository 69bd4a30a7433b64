//! Four-junction flux qubit with two SQUID-tunable junctions: circuit
//! spectrum, flux-to-(ω_q, g) maps and coupled control-path synthesis.
//!
//! Energies are in GHz (E/h). The three independent phases are φ₁, φ₃ and
//! φ̃₄; modes 1 and 3 live in charge bases, mode 4 in a charge basis for
//! the bare circuit and in a harmonic-oscillator basis once the resonator
//! inductance term `E_L φ̃₄²/2` is added.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{lanczos_lowest, MonotoneCubic};
use crate::model::coupling_from_circuit;
use crate::schedules::SampledSchedule;
use crate::statespace::OperatorMatrix;
use crate::{Error, Result, C64};

/// Resonator constants that enter through `E_L` and the coupling conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonatorConstants {
    pub omega_r_ghz: f64,
    pub inductance_nh: f64,
    pub capacitance_pf: f64,
    pub impedance_ohm: f64,
}

impl Default for ResonatorConstants {
    fn default() -> Self {
        Self {
            omega_r_ghz: 0.5,
            inductance_nh: 63.7,
            capacitance_pf: 1.59,
            impedance_ohm: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircuitParams {
    pub alpha: f64,
    pub beta: f64,
    pub e_c: f64,
    pub e_j: f64,
    pub e_l: f64,
    /// Charge states `−n_charge..=n_charge` per periodic mode.
    pub n_charge: usize,
    /// Oscillator levels for mode 4 in the renormalised Hamiltonian.
    pub n_oscillator: usize,
    pub resonator: ResonatorConstants,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            beta: 6.0,
            e_c: 4.99,
            e_j: 99.7,
            e_l: 2.57,
            n_charge: 7,
            n_oscillator: 30,
            resonator: ResonatorConstants::default(),
        }
    }
}

impl CircuitParams {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("e_c", self.e_c),
            ("e_j", self.e_j),
            ("e_l", self.e_l),
            ("resonator.omega_r_ghz", self.resonator.omega_r_ghz),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                e.push(format!("{prefix}{name} must be positive, got {v}"));
            }
        }
        if self.n_charge < 3 {
            e.push(format!("{prefix}n_charge must be at least 3, got {}", self.n_charge));
        }
        if self.n_oscillator < 4 {
            e.push(format!("{prefix}n_oscillator must be at least 4, got {}", self.n_oscillator));
        }
        e
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.problems("");
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    /// `4E_C/(α+β+2αβ)`.
    fn kinetic_scale(&self) -> f64 {
        4.0 * self.e_c / (self.alpha + self.beta + 2.0 * self.alpha * self.beta)
    }
}

/// Magnetic frustrations in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPoint {
    pub f_alpha: f64,
    pub f_beta: f64,
    pub f_epsilon: f64,
}

impl FluxPoint {
    /// The point with `f̃_ε = π`.
    pub fn sweet_spot(f_alpha: f64, f_beta: f64) -> Self {
        Self {
            f_alpha,
            f_beta,
            f_epsilon: (2.0 * PI + f_alpha - f_beta) / 2.0,
        }
    }

    /// `f̃_ε = f_ε − (f_α − f_β)/2`.
    pub fn effective_epsilon(&self) -> f64 {
        self.f_epsilon - (self.f_alpha - self.f_beta) / 2.0
    }

    pub fn is_sweet_spot(&self) -> bool {
        let d = (self.effective_epsilon() - PI).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d) < 1e-12
    }
}

/// Matrices of one mode, all in the same truncated basis.
struct ModeOps {
    dim: usize,
    n: Vec<(usize, usize, C64)>,
    n2: Vec<(usize, usize, C64)>,
    /// `e^{iφ}`
    shift: Vec<(usize, usize, C64)>,
    phi: Vec<(usize, usize, C64)>,
    phi2: Vec<(usize, usize, C64)>,
}

fn charge_mode(nc: usize) -> ModeOps {
    let dim = 2 * nc + 1;
    let val = |i: usize| i as f64 - nc as f64;
    ModeOps {
        dim,
        n: (0..dim).map(|i| (i, i, C64::new(val(i), 0.0))).collect(),
        n2: (0..dim).map(|i| (i, i, C64::new(val(i) * val(i), 0.0))).collect(),
        shift: (0..dim - 1).map(|i| (i + 1, i, C64::new(1.0, 0.0))).collect(),
        phi: Vec::new(),
        phi2: Vec::new(),
    }
}

/// Generalised Laguerre polynomials `L_k^{(a)}(x)` for `k < len`.
fn laguerre(len: usize, a: f64, x: f64) -> Vec<f64> {
    let mut l = Vec::with_capacity(len);
    if len > 0 {
        l.push(1.0);
    }
    if len > 1 {
        l.push(1.0 + a - x);
    }
    for k in 1..len.saturating_sub(1) {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * l[k] - (kf + a) * l[k - 1]) / (kf + 1.0);
        l.push(next);
    }
    l
}

/// `⟨m|D(α)|n⟩` of the untruncated displacement operator for `m, n < dim`.
pub fn displacement_matrix(dim: usize, alpha: C64) -> Vec<Vec<C64>> {
    let x = alpha.norm_sqr();
    let pre = (-x / 2.0).exp();
    let mut d = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for delta in 0..dim {
        let lag = laguerre(dim - delta, delta as f64, x);
        for (k, lk) in lag.iter().enumerate() {
            // sqrt(k!/(k+δ)!)
            let ratio: f64 = ((k + 1)..=(k + delta)).map(|j| (j as f64).sqrt().recip()).product();
            let mag = pre * ratio * lk;
            d[k + delta][k] = alpha.powu(delta as u32) * mag;
            if delta > 0 {
                d[k][k + delta] = (-alpha.conj()).powu(delta as u32) * mag;
            }
        }
    }
    d
}

fn oscillator_mode(levels: usize, x0: f64) -> ModeOps {
    let sq = |k: usize| (k as f64).sqrt();
    let mut n = Vec::new();
    let mut n2 = Vec::new();
    let mut phi = Vec::new();
    let mut phi2 = Vec::new();
    let s2 = std::f64::consts::SQRT_2;
    for k in 0..levels {
        let kf = k as f64;
        n2.push((k, k, C64::new((2.0 * kf + 1.0) / (2.0 * x0 * x0), 0.0)));
        phi2.push((k, k, C64::new(x0 * x0 * (2.0 * kf + 1.0) / 2.0, 0.0)));
        if k + 1 < levels {
            let a = sq(k + 1) / (s2 * x0);
            n.push((k + 1, k, C64::new(0.0, a)));
            n.push((k, k + 1, C64::new(0.0, -a)));
            let b = x0 * sq(k + 1) / s2;
            phi.push((k + 1, k, C64::new(b, 0.0)));
            phi.push((k, k + 1, C64::new(b, 0.0)));
        }
        if k + 2 < levels {
            let c = sq(k + 1) * sq(k + 2);
            n2.push((k + 2, k, C64::new(-c / (2.0 * x0 * x0), 0.0)));
            n2.push((k, k + 2, C64::new(-c / (2.0 * x0 * x0), 0.0)));
            phi2.push((k + 2, k, C64::new(x0 * x0 * c / 2.0, 0.0)));
            phi2.push((k, k + 2, C64::new(x0 * x0 * c / 2.0, 0.0)));
        }
    }
    let d = displacement_matrix(levels, C64::new(0.0, x0 / s2));
    let shift = (0..levels)
        .flat_map(|i| (0..levels).map(move |j| (i, j)))
        .filter_map(|(i, j)| (d[i][j].norm() > 1e-300).then_some((i, j, d[i][j])))
        .collect();
    ModeOps {
        dim: levels,
        n,
        n2,
        shift,
        phi,
        phi2,
    }
}

/// Oscillator length of the quadratic part of the mode-4 Hamiltonian.
fn oscillator_length(p: &CircuitParams, fp: &FluxPoint) -> f64 {
    let a = p.alpha * (fp.f_alpha / 2.0).cos();
    let b = p.beta * (fp.f_beta / 2.0).cos();
    let k4 = p.kinetic_scale() * (1.0 + 2.0 * p.alpha);
    let curvature = p.e_l + p.e_j * (a.abs() + b.abs());
    (2.0 * k4 / curvature).powf(0.25)
}

/// Circuit Hamiltonian and the mode-4 phase operator.
struct Circuit {
    h: OperatorMatrix,
    phi4: Option<OperatorMatrix>,
}

fn build_circuit(p: &CircuitParams, fp: &FluxPoint, renormalized: bool, need_phi: bool) -> Result<Circuit> {
    p.validate()?;
    let m1 = charge_mode(p.n_charge);
    let m4 = if renormalized {
        oscillator_mode(p.n_oscillator, oscillator_length(p, fp))
    } else {
        charge_mode(p.n_charge)
    };
    let d = m1.dim;
    let d4 = m4.dim;
    let dim = d * d * d4;
    let idx = |i1: usize, i3: usize, i4: usize| (i1 * d + i3) * d4 + i4;
    let k = p.kinetic_scale();
    let (al, be) = (p.alpha, p.beta);
    let a_eff = al * (fp.f_alpha / 2.0).cos();
    let b_eff = be * (fp.f_beta / 2.0).cos();
    let eps = C64::from_polar(1.0, fp.effective_epsilon());
    let nval = |i: usize| i as f64 - p.n_charge as f64;
    let mut t: Vec<(usize, usize, C64)> = Vec::new();
    let re = |x: f64| C64::new(x, 0.0);

    for i1 in 0..d {
        for i3 in 0..d {
            let (n1, n3) = (nval(i1), nval(i3));
            let diag = k * ((al + be + al * be) * (n1 * n1 + n3 * n3) - 2.0 * al * be * n1 * n3);
            for i4 in 0..d4 {
                t.push((idx(i1, i3, i4), idx(i1, i3, i4), re(diag)));
            }
            for &(r, c, v) in &m4.n2 {
                t.push((idx(i1, i3, r), idx(i1, i3, c), v * (k * (1.0 + 2.0 * al))));
            }
            for &(r, c, v) in &m4.n {
                t.push((idx(i1, i3, r), idx(i1, i3, c), v * (-2.0 * al * k * (n1 + n3))));
            }
            for &(r, c, v) in &m4.shift {
                let half = v * (-p.e_j * b_eff / 2.0);
                t.push((idx(i1, i3, r), idx(i1, i3, c), half));
                t.push((idx(i1, i3, c), idx(i1, i3, r), half.conj()));
            }
            if renormalized {
                for &(r, c, v) in &m4.phi2 {
                    t.push((idx(i1, i3, r), idx(i1, i3, c), v * (p.e_l / 2.0)));
                }
            }
            for i4 in 0..d4 {
                if i1 + 1 < d {
                    t.push((idx(i1 + 1, i3, i4), idx(i1, i3, i4), re(-p.e_j / 2.0)));
                    t.push((idx(i1, i3, i4), idx(i1 + 1, i3, i4), re(-p.e_j / 2.0)));
                }
                if i3 + 1 < d {
                    t.push((idx(i1, i3 + 1, i4), idx(i1, i3, i4), re(-p.e_j / 2.0)));
                    t.push((idx(i1, i3, i4), idx(i1, i3 + 1, i4), re(-p.e_j / 2.0)));
                }
            }
            // −E_J A cos(φ₁+φ₃+φ̃₄+f̃_ε) as a three-mode hop
            if i1 + 1 < d && i3 + 1 < d {
                for &(r, c, v) in &m4.shift {
                    let val = eps * v * (-p.e_j * a_eff / 2.0);
                    let (row, col) = (idx(i1 + 1, i3 + 1, r), idx(i1, i3, c));
                    t.push((row, col, val));
                    t.push((col, row, val.conj()));
                }
            }
        }
    }
    let h = OperatorMatrix::from_triplets(dim, &t, true);
    let phi4 = if need_phi && renormalized {
        let mut tp = Vec::new();
        for i1 in 0..d {
            for i3 in 0..d {
                for &(r, c, v) in &m4.phi {
                    tp.push((idx(i1, i3, r), idx(i1, i3, c), v));
                }
            }
        }
        Some(OperatorMatrix::from_triplets(dim, &tp, true))
    } else {
        None
    };
    Ok(Circuit { h, phi4 })
}

/// Circuit Hamiltonian at `fp`, with or without the `E_L φ̃₄²/2` term.
pub fn qubit_hamiltonian(p: &CircuitParams, fp: &FluxPoint, include_renormalization: bool) -> Result<OperatorMatrix> {
    Ok(build_circuit(p, fp, include_renormalization, false)?.h)
}

/// Lowest `k` eigenpairs of a circuit Hamiltonian.
pub fn lowest_levels(h: &OperatorMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
    let scale = h.max_abs().max(1.0);
    let r = lanczos_lowest(|x, y| h.apply(x, y), h.dim(), k, 1e-9 * scale, 60, 200, 17)?;
    Ok((r.values, r.vectors))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitSpectrum {
    /// `(E_e − E_g)/ω_r`.
    pub omega_q: f64,
    /// `|⟨e|φ̃₄|g⟩|`.
    pub delta_phi_eg: f64,
    /// `|Im ⟨e|φ̃₄|g⟩|` in the time-reversal gauge.
    pub phase_residual: f64,
    pub g_over_omega_r: f64,
    /// `(E₂ − E₁)/(E₁ − E₀)`.
    pub third_level_ratio: f64,
    /// Third level within a tenth of the qubit gap of the excited state.
    pub ambiguous: bool,
}

/// Two-level reduction of the renormalised circuit at `fp`.
pub fn qubit_spectrum(p: &CircuitParams, fp: &FluxPoint) -> Result<QubitSpectrum> {
    let c = build_circuit(p, fp, true, true)?;
    let (vals, vecs) = lowest_levels(&c.h, 3)?;
    let phi = c.phi4.expect("renormalised circuit has a phase operator");
    let pv = phi.apply_vec(&vecs[0]);
    let m: C64 = vecs[1].iter().zip(&pv).map(|(a, b)| a.conj() * b).sum();
    let wr = p.resonator.omega_r_ghz;
    let gap = vals[1] - vals[0];
    let ratio = (vals[2] - vals[1]) / gap;
    // fix each eigenvector's phase by time reversal (charge inversion of
    // modes 1 and 3 with complex conjugation); ⟨e|φ̃₄|g⟩ is then real
    let d = 2 * p.n_charge + 1;
    let d4 = p.n_oscillator;
    let reverse = |v: &[C64]| -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for i1 in 0..d {
            for i3 in 0..d {
                for i4 in 0..d4 {
                    out[((d - 1 - i1) * d + (d - 1 - i3)) * d4 + i4] = v[(i1 * d + i3) * d4 + i4].conj();
                }
            }
        }
        out
    };
    let gauge = |v: &[C64]| -> C64 {
        let tv = reverse(v);
        let ov: C64 = v.iter().zip(&tv).map(|(a, b)| a.conj() * b).sum();
        C64::from_polar(1.0, ov.arg() / 2.0)
    };
    let phase_residual = (m * gauge(&vecs[1]).conj() * gauge(&vecs[0])).im.abs();
    Ok(QubitSpectrum {
        omega_q: gap / wr,
        delta_phi_eg: m.norm(),
        phase_residual,
        g_over_omega_r: coupling_from_circuit(2.0 * m.norm(), wr, p.e_l)? / wr,
        third_level_ratio: ratio,
        ambiguous: ratio < 0.1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Largest shift of the lowest two levels when `n_charge → n_charge+2`.
    pub charge_shift: f64,
    /// Same for `n_oscillator → n_oscillator+10`.
    pub oscillator_shift: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Truncation check of the renormalised circuit against `10⁻³ E_C`.
pub fn convergence_check(p: &CircuitParams, fp: &FluxPoint) -> Result<ConvergenceReport> {
    let lows = |q: &CircuitParams| -> Result<Vec<f64>> { Ok(lowest_levels(&qubit_hamiltonian(q, fp, true)?, 2)?.0) };
    let base = lows(p)?;
    let more_charge = lows(&CircuitParams {
        n_charge: p.n_charge + 2,
        ..*p
    })?;
    let more_osc = lows(&CircuitParams {
        n_oscillator: p.n_oscillator + 10,
        ..*p
    })?;
    let shift = |o: &[f64]| base.iter().zip(o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let tol = 1e-3 * p.e_c;
    let (cs, os) = (shift(&more_charge), shift(&more_osc));
    Ok(ConvergenceReport {
        charge_shift: cs,
        oscillator_shift: os,
        tolerance: tol,
        converged: cs < tol && os < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapePoint {
    pub f_alpha: f64,
    pub f_beta: f64,
    pub spectrum: Option<QubitSpectrum>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub f_alpha: Vec<f64>,
    pub f_beta: Vec<f64>,
    /// Row-major over `(f_alpha, f_beta)`.
    pub points: Vec<LandscapePoint>,
}

impl Landscape {
    pub fn get(&self, i: usize, j: usize) -> &LandscapePoint {
        &self.points[i * self.f_beta.len() + j]
    }

    fn values(&self, f: fn(&QubitSpectrum) -> f64) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().filter_map(move |p| p.spectrum.as_ref().map(f))
    }

    pub fn omega_q_range(&self) -> (f64, f64) {
        min_max(self.values(|s| s.omega_q))
    }

    pub fn g_range(&self) -> (f64, f64) {
        min_max(self.values(|s| s.g_over_omega_r))
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.failure.is_some()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        use crate::experiments::fmt_num as f;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["f_alpha", "f_beta", "omega_q", "g_over_omega_r", "third_level_ratio", "flag"])?;
        for p in &self.points {
            let (a, b, c, flag) = match (&p.spectrum, &p.failure) {
                (Some(s), _) => (
                    f(s.omega_q),
                    f(s.g_over_omega_r),
                    f(s.third_level_ratio),
                    if s.ambiguous { "ambiguous" } else { "" }.to_string(),
                ),
                (None, e) => ("nan".into(), "nan".into(), "nan".into(), e.clone().unwrap_or_default()),
            };
            w.write_record([f(p.f_alpha), f(p.f_beta), a, b, c, flag])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// Sweet-spot spectrum on a grid; failed points are recorded, not fatal.
pub fn flux_landscape(p: &CircuitParams, f_alpha: &[f64], f_beta: &[f64]) -> Result<Landscape> {
    p.validate()?;
    let grid: Vec<(f64, f64)> = f_alpha
        .iter()
        .flat_map(|&a| f_beta.iter().map(move |&b| (a, b)))
        .collect();
    let points = grid
        .par_iter()
        .map(|&(a, b)| match qubit_spectrum(p, &FluxPoint::sweet_spot(a, b)) {
            Ok(s) => LandscapePoint {
                f_alpha: a,
                f_beta: b,
                spectrum: Some(s),
                failure: None,
            },
            Err(e) => LandscapePoint {
                f_alpha: a,
                f_beta: b,
                spectrum: None,
                failure: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Landscape {
        f_alpha: f_alpha.to_vec(),
        f_beta: f_beta.to_vec(),
        points,
    })
}

/// Polyline in the `(f_α, f_β)` plane, traversed vertex by vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluxPath {
    /// Vertices in units of π.
    pub vertices: Vec<[f64; 2]>,
    /// Diagonalisation points per leg.
    pub samples_per_leg: usize,
}

impl Default for FluxPath {
    /// Clockwise loop from the origin through the strong-coupling corner.
    fn default() -> Self {
        Self {
            vertices: vec![[0.0, 0.0], [0.3, 0.96], [0.35, 0.5], [0.0, 0.0]],
            samples_per_leg: 24,
        }
    }
}

impl FluxPath {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if self.vertices.len() < 2 {
            e.push(format!("{prefix}vertices needs at least two points"));
        }
        if self.samples_per_leg < 4 {
            e.push(format!("{prefix}samples_per_leg must be at least 4"));
        }
        e
    }

    /// Flux point at path parameter `lambda ∈ [0, legs]`.
    pub fn point(&self, lambda: f64) -> FluxPoint {
        let legs = self.vertices.len() - 1;
        let lam = lambda.clamp(0.0, legs as f64);
        let leg = (lam.floor() as usize).min(legs - 1);
        let s = lam - leg as f64;
        let (a, b) = (self.vertices[leg], self.vertices[leg + 1]);
        FluxPoint::sweet_spot(PI * (a[0] + s * (b[0] - a[0])), PI * (a[1] + s * (b[1] - a[1])))
    }

    pub fn legs(&self) -> usize {
        self.vertices.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub lambda: f64,
    pub f_alpha: f64,
    pub f_beta: f64,
    pub omega_q: f64,
    pub g: f64,
}

/// Spectrum along the path, with nodes clustered towards each vertex.
pub fn path_profile(p: &CircuitParams, path: &FluxPath) -> Result<Vec<PathSample>> {
    let errs = path.problems("path.");
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let m = path.samples_per_leg;
    let mut lambdas = vec![0.0];
    for leg in 0..path.legs() {
        for j in 1..=m {
            let s = 0.5 - 0.5 * (PI * j as f64 / m as f64).cos();
            lambdas.push(leg as f64 + s);
        }
    }
    lambdas
        .par_iter()
        .map(|&l| {
            let fp = path.point(l);
            let s = qubit_spectrum(p, &fp)?;
            Ok(PathSample {
                lambda: l,
                f_alpha: fp.f_alpha,
                f_beta: fp.f_beta,
                omega_q: s.omega_q,
                g: s.g_over_omega_r,
            })
        })
        .collect()
}

/// A run of path samples along which `g` is strictly monotone.
#[derive(Debug, Clone)]
struct Branch {
    lambda_of: Vec<(f64, f64)>,
    increasing: bool,
}

fn branches(profile: &[PathSample]) -> Vec<Branch> {
    let mut out: Vec<Branch> = Vec::new();
    let mut cur: Vec<(f64, f64)> = vec![(profile[0].g, profile[0].lambda)];
    let mut dir: Option<bool> = None;
    for w in profile.windows(2) {
        let up = w[1].g > w[0].g;
        if w[1].g == w[0].g {
            continue;
        }
        if dir.is_some_and(|d| d != up) {
            out.push(Branch {
                lambda_of: std::mem::take(&mut cur),
                increasing: dir.unwrap(),
            });
            cur.push((w[0].g, w[0].lambda));
        }
        dir = Some(up);
        cur.push((w[1].g, w[1].lambda));
    }
    if cur.len() > 1 {
        out.push(Branch {
            lambda_of: cur,
            increasing: dir.unwrap_or(true),
        });
    }
    out
}

/// Coupled pulse table `(t, f_α, f_β, g, ω_q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTable {
    pub t: Vec<f64>,
    pub f_alpha: Vec<f64>,
    pub f_beta: Vec<f64>,
    pub g: Vec<f64>,
    pub omega_q: Vec<f64>,
}

impl PathTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        use crate::experiments::fmt_num as f;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "f_alpha", "f_beta", "g", "omega_q"])?;
        for i in 0..self.t.len() {
            w.write_record([f(self.t[i]), f(self.f_alpha[i]), f(self.f_beta[i]), f(self.g[i]), f(self.omega_q[i])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_schedule(&self, n_qubits: usize) -> Result<SampledSchedule> {
        SampledSchedule::new(n_qubits, self.t.clone(), self.g.clone(), self.omega_q.clone())
    }
}

/// Finds the flux points that realise the requested `g(t)` samples.
///
/// The request is split into monotone pieces, matched in order with the
/// monotone branches of `g` along the path, and inverted by bisection on
/// monotone-cubic interpolants. `ω_q` follows from the same interpolation
/// of the profile.
pub fn synthesize_path(profile: &[PathSample], path: &FluxPath, t: &[f64], g: &[f64]) -> Result<PathTable> {
    if t.len() != g.len() || t.len() < 2 {
        return Err(Error::invalid("pulse needs matching t and g with at least two samples"));
    }
    let lam: Vec<f64> = profile.iter().map(|s| s.lambda).collect();
    let wq_of = MonotoneCubic::new(lam.clone(), profile.iter().map(|s| s.omega_q).collect())?;
    let g_of = MonotoneCubic::new(lam.clone(), profile.iter().map(|s| s.g).collect())?;
    let brs = branches(profile);
    let mut out = PathTable {
        t: t.to_vec(),
        f_alpha: Vec::with_capacity(t.len()),
        f_beta: Vec::with_capacity(t.len()),
        g: g.to_vec(),
        omega_q: Vec::with_capacity(t.len()),
    };
    let mut bi = 0;
    let mut dir: Option<bool> = None;
    for (i, &gi) in g.iter().enumerate() {
        let step_dir = (i > 0 && (g[i] - g[i - 1]).abs() > 1e-9 * gi.abs().max(1.0)).then(|| g[i] > g[i - 1]);
        if let (Some(d), Some(s)) = (dir, step_dir) {
            if d != s {
                bi += 1;
            }
        }
        if step_dir.is_some() {
            dir = step_dir;
        }
        // a constant request stays at the first flux point that reaches it
        let want_up = dir.unwrap_or(true);
        while bi < brs.len() && brs[bi].increasing != want_up {
            bi += 1;
        }
        let Some(br) = brs.get(bi) else {
            return Err(Error::invalid(format!("pulse at t = {} has no matching monotone branch on the path", t[i])));
        };
        let (g_lo, g_hi) = min_max(br.lambda_of.iter().map(|(g, _)| *g));
        if gi < g_lo - 1e-9 || gi > g_hi + 1e-9 {
            return Err(Error::invalid(format!(
                "requested g/ω_r = {gi:.4} at t = {} lies outside the branch range [{g_lo:.4}, {g_hi:.4}]",
                t[i]
            )));
        }
        let (mut a, mut b) = (br.lambda_of.first().unwrap().1, br.lambda_of.last().unwrap().1);
        let target = gi.clamp(g_lo, g_hi);
        let sign = if br.increasing { 1.0 } else { -1.0 };
        for _ in 0..100 {
            let mid = 0.5 * (a + b);
            if sign * (g_of.eval(mid) - target) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let lambda = 0.5 * (a + b);
        let fp = path.point(lambda);
        out.f_alpha.push(fp.f_alpha);
        out.f_beta.push(fp.f_beta);
        out.omega_q.push(wq_of.eval(lambda));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm_hermitian;
    use faer::Mat;

    fn small() -> CircuitParams {
        CircuitParams {
            n_charge: 3,
            n_oscillator: 8,
            ..Default::default()
        }
    }

    #[test]
    fn displacement_matches_truncated_exponential() {
        let big = 80;
        let x0 = 0.45;
        let mut phi = Mat::<C64>::zeros(big, big);
        for k in 0..big - 1 {
            let v = C64::new(x0 * ((k + 1) as f64).sqrt() / std::f64::consts::SQRT_2, 0.0);
            phi[(k + 1, k)] = v;
            phi[(k, k + 1)] = v;
        }
        let e = expm_hermitian(&phi, C64::new(0.0, 1.0)).unwrap();
        let d = displacement_matrix(12, C64::new(0.0, x0 / std::f64::consts::SQRT_2));
        for i in 0..12 {
            for j in 0..12 {
                assert!((d[i][j] - e[(i, j)]).norm() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = small();
        for (a, b) in [(0.0, 0.0), (0.4, 1.3), (2.1, 2.9)] {
            for ren in [false, true] {
                let h = qubit_hamiltonian(&p, &FluxPoint::sweet_spot(a, b), ren).unwrap();
                assert!(h.hermiticity_error() < 1e-12);
            }
        }
    }

    #[test]
    fn alpha_junction_switches_off() {
        // with cos(f_α/2) = 0 the f̃_ε dependence disappears
        let p = small();
        let a = FluxPoint::sweet_spot(PI, 0.4);
        let b = FluxPoint {
            f_epsilon: a.f_epsilon + 1.1,
            ..a
        };
        let ha = qubit_hamiltonian(&p, &a, true).unwrap();
        let hb = qubit_hamiltonian(&p, &b, true).unwrap();
        assert!(ha.sub(&hb).unwrap().max_abs() < 1e-12);
        let c = FluxPoint {
            f_alpha: 0.0,
            ..b
        };
        let hc = qubit_hamiltonian(&p, &FluxPoint::sweet_spot(0.0, 0.4), true).unwrap();
        assert!(qubit_hamiltonian(&p, &c, true).unwrap().sub(&hc).unwrap().max_abs() > 1.0);
    }

    #[test]
    fn bare_circuit_is_periodic_in_both_frustrations() {
        let p = small();
        let fp = FluxPoint {
            f_alpha: 0.7,
            f_beta: 1.9,
            f_epsilon: 2.4,
        };
        let base = lowest_levels(&qubit_hamiltonian(&p, &fp, false).unwrap(), 2).unwrap().0;
        for shifted in [
            FluxPoint {
                f_alpha: fp.f_alpha + 2.0 * PI,
                ..fp
            },
            FluxPoint {
                f_beta: fp.f_beta + 2.0 * PI,
                ..fp
            },
        ] {
            let e = lowest_levels(&qubit_hamiltonian(&p, &shifted, false).unwrap(), 2).unwrap().0;
            for (a, b) in base.iter().zip(&e) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sweet_spot_constraint() {
        let fp = FluxPoint::sweet_spot(0.3, 1.7);
        assert!((fp.effective_epsilon() - PI).abs() < 1e-12);
        assert!(fp.is_sweet_spot());
    }

    #[test]
    fn branches_split_at_turning_points() {
        let prof: Vec<PathSample> = [0.2, 0.5, 1.0, 0.7, 0.3]
            .iter()
            .enumerate()
            .map(|(i, &g)| PathSample {
                lambda: i as f64,
                f_alpha: 0.0,
                f_beta: 0.0,
                omega_q: 1.0,
                g,
            })
            .collect();
        let b = branches(&prof);
        assert_eq!(b.len(), 2);
        assert!(b[0].increasing && !b[1].increasing);
        assert_eq!(b[1].lambda_of.first().unwrap().1, 2.0);
    }
}
