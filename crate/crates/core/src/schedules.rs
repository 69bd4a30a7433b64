//! Time-dependent controls `g_i(t)` and `ω_q^i(t)`.
//!
//! A [`ControlSchedule`] is a list of shaped segments; a [`SampledSchedule`]
//! interpolates an externally supplied table. Both implement [`Controls`],
//! the interface the integrators consume.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::MonotoneCubic;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Linear,
    /// `(1 − cos πτ)/2` smoothing of the segment fraction.
    Cosine,
    Hold,
}

impl Shape {
    pub fn weight(self, tau: f64) -> f64 {
        match self {
            Shape::Linear => tau,
            Shape::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * tau).cos()),
            Shape::Hold => 0.0,
        }
    }

    /// `d weight / dτ`.
    fn slope(self, tau: f64) -> f64 {
        match self {
            Shape::Linear => 1.0,
            Shape::Cosine => 0.5 * std::f64::consts::PI * (std::f64::consts::PI * tau).sin(),
            Shape::Hold => 0.0,
        }
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Shape::Linear),
            "cosine" => Ok(Shape::Cosine),
            "hold" => Ok(Shape::Hold),
            _ => Err(Error::invalid(format!("unknown ramp shape `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub duration: f64,
    pub shape: Shape,
    pub g_start: Vec<f64>,
    pub g_end: Vec<f64>,
    pub omega_q_start: Vec<f64>,
    pub omega_q_end: Vec<f64>,
}

impl Segment {
    /// Same profile for every qubit.
    pub fn uniform(n: usize, duration: f64, shape: Shape, g: (f64, f64), omega_q: (f64, f64)) -> Self {
        Self {
            duration,
            shape,
            g_start: vec![g.0; n],
            g_end: vec![g.1; n],
            omega_q_start: vec![omega_q.0; n],
            omega_q_end: vec![omega_q.1; n],
        }
    }

    fn eval_into(&self, tau: f64, g: &mut [f64], wq: &mut [f64]) {
        let w = self.shape.weight(tau.clamp(0.0, 1.0));
        for i in 0..g.len() {
            g[i] = self.g_start[i] + w * (self.g_end[i] - self.g_start[i]);
            wq[i] = self.omega_q_start[i] + w * (self.omega_q_end[i] - self.omega_q_start[i]);
        }
    }
}

/// Interface shared by every control source.
pub trait Controls: Send + Sync {
    fn n_qubits(&self) -> usize;

    /// Writes `g_i(t)` and `ω_q^i(t)`; times outside the support clamp.
    fn evaluate_into(&self, t: f64, g: &mut [f64], omega_q: &mut [f64]);

    /// End of the last segment or sample.
    fn duration(&self) -> f64;

    /// Times where the controls are not smooth; integrators step onto them.
    fn breakpoints(&self) -> Vec<f64>;

    /// Largest `|ω_q^i|` and `g_i` reached over the support.
    fn extremes(&self) -> (f64, f64);

    fn evaluate(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_qubits();
        let (mut g, mut w) = (vec![0.0; n], vec![0.0; n]);
        self.evaluate_into(t, &mut g, &mut w);
        (g, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSchedule {
    pub n_qubits: usize,
    pub segments: Vec<Segment>,
}

impl ControlSchedule {
    pub fn new(n_qubits: usize, segments: Vec<Segment>) -> Result<Self> {
        let s = Self { n_qubits, segments };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.segments.is_empty() {
            errs.push("schedule has no segments".to_string());
        }
        for (k, seg) in self.segments.iter().enumerate() {
            if !(seg.duration >= 0.0) || !seg.duration.is_finite() {
                errs.push(format!("segments[{k}].duration = {} must be finite and non-negative", seg.duration));
            }
            for (name, v) in [
                ("g_start", &seg.g_start),
                ("g_end", &seg.g_end),
                ("omega_q_start", &seg.omega_q_start),
                ("omega_q_end", &seg.omega_q_end),
            ] {
                if v.len() != self.n_qubits {
                    errs.push(format!("segments[{k}].{name} has {} entries, expected {}", v.len(), self.n_qubits));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    errs.push(format!("segments[{k}].{name} is not finite"));
                }
            }
            if seg.g_start.iter().chain(&seg.g_end).any(|g| *g < 0.0) {
                errs.push(format!("segments[{k}] has a negative coupling"));
            }
            if seg.shape == Shape::Hold && (seg.g_start != seg.g_end || seg.omega_q_start != seg.omega_q_end) {
                errs.push(format!("segments[{k}] is a hold with differing endpoints"));
            }
            if k > 0 {
                let prev = &self.segments[k - 1];
                let gap = prev
                    .g_end
                    .iter()
                    .zip(&seg.g_start)
                    .chain(prev.omega_q_end.iter().zip(&seg.omega_q_start))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if gap > 1e-12 {
                    errs.push(format!("segments[{k}] starts {gap:.3e} away from where segments[{}] ends", k - 1));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn t_f(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment boundaries from `0` to `t_f`.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = vec![0.0];
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Time derivatives `(dg_i/dt, dω_q^i/dt)` at `t` (right derivative at
    /// boundaries).
    pub fn derivative(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_qubits;
        let mut start = 0.0;
        for seg in &self.segments {
            let end = start + seg.duration;
            if seg.duration > 0.0 && t >= start && t < end {
                let tau = (t - start) / seg.duration;
                let r = seg.shape.slope(tau) / seg.duration;
                return (
                    (0..n).map(|i| r * (seg.g_end[i] - seg.g_start[i])).collect(),
                    (0..n).map(|i| r * (seg.omega_q_end[i] - seg.omega_q_start[i])).collect(),
                );
            }
            start = end;
        }
        (vec![0.0; n], vec![0.0; n])
    }

    /// Runs the segments backwards with start and end values swapped.
    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment {
                duration: s.duration,
                shape: s.shape,
                g_start: s.g_end.clone(),
                g_end: s.g_start.clone(),
                omega_q_start: s.omega_q_end.clone(),
                omega_q_end: s.omega_q_start.clone(),
            })
            .collect();
        Self {
            n_qubits: self.n_qubits,
            segments,
        }
    }

    /// Multiplies qubit `i`'s profiles by `1 + ε_i`.
    pub fn with_disorder(&self, freq: Option<&[f64]>, coupling: Option<&[f64]>) -> Result<Self> {
        let n = self.n_qubits;
        for eps in [freq, coupling].into_iter().flatten() {
            if eps.len() != n {
                return Err(Error::dims(format!("{} disorder factors for {n} qubits", eps.len())));
            }
        }
        let scale = |v: &[f64], eps: Option<&[f64]>| -> Vec<f64> {
            match eps {
                Some(e) => v.iter().zip(e).map(|(x, e)| x * (1.0 + e)).collect(),
                None => v.to_vec(),
            }
        };
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                duration: s.duration,
                shape: s.shape,
                g_start: scale(&s.g_start, coupling),
                g_end: scale(&s.g_end, coupling),
                omega_q_start: scale(&s.omega_q_start, freq),
                omega_q_end: scale(&s.omega_q_end, freq),
            })
            .collect();
        Self::new(n, segments)
    }

    /// Appends a hold at the final values.
    pub fn with_hold(mut self, duration: f64) -> Result<Self> {
        if duration > 0.0 {
            let last = self.segments.last().ok_or_else(|| Error::invalid("empty schedule"))?;
            let seg = Segment {
                duration,
                shape: Shape::Hold,
                g_start: last.g_end.clone(),
                g_end: last.g_end.clone(),
                omega_q_start: last.omega_q_end.clone(),
                omega_q_end: last.omega_q_end.clone(),
            };
            self.segments.push(seg);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        s.validate()?;
        Ok(s)
    }
}

impl Controls for ControlSchedule {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn evaluate_into(&self, t: f64, g: &mut [f64], omega_q: &mut [f64]) {
        let mut start = 0.0;
        for seg in &self.segments {
            let end = start + seg.duration;
            if seg.duration > 0.0 && t < end {
                seg.eval_into((t - start) / seg.duration, g, omega_q);
                return;
            }
            start = end;
        }
        if let Some(last) = self.segments.last() {
            last.eval_into(1.0, g, omega_q);
        }
    }

    fn duration(&self) -> f64 {
        self.t_f()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.boundaries()
    }

    fn extremes(&self) -> (f64, f64) {
        let mut w: f64 = 0.0;
        let mut g: f64 = 0.0;
        for s in &self.segments {
            for x in s.omega_q_start.iter().chain(&s.omega_q_end) {
                w = w.max(x.abs());
            }
            for x in s.g_start.iter().chain(&s.g_end) {
                g = g.max(x.abs());
            }
        }
        (w, g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundProtocolParams {
    pub n_qubits: usize,
    pub omega_r: f64,
    pub omega_max: f64,
    pub omega_min: f64,
    pub g_max: f64,
    pub g_min: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
    pub t_hold: f64,
    pub adiabatic_shape: Shape,
    pub fast_shape: Shape,
}

impl Default for GroundProtocolParams {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            omega_r: 1.0,
            omega_max: 20.0,
            omega_min: 0.5,
            g_max: 4.5,
            g_min: 0.1,
            t1: 6.5,
            t2: 6.5,
            t3: 0.5,
            t4: 0.5,
            t_hold: 1.0,
            adiabatic_shape: Shape::Cosine,
            fast_shape: Shape::Linear,
        }
    }
}

impl GroundProtocolParams {
    /// Every violated constraint, each prefixed with `prefix`.
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if self.n_qubits == 0 {
            e.push(format!("{prefix}n_qubits must be positive"));
        }
        if !(self.omega_r > 0.0) {
            e.push(format!("{prefix}omega_r must be positive"));
        }
        if !(self.omega_max > self.omega_r && self.omega_r > self.omega_min && self.omega_min > 0.0) {
            e.push(format!(
                "{prefix}need omega_max > omega_r > omega_min > 0, got {} / {} / {}",
                self.omega_max, self.omega_r, self.omega_min
            ));
        }
        if !(self.g_min >= 0.0 && self.g_max > self.g_min) {
            e.push(format!(
                "{prefix}need g_max > g_min >= 0, got {} / {}",
                self.g_max, self.g_min
            ));
        }
        for (name, v) in [
            ("t1", self.t1),
            ("t2", self.t2),
            ("t3", self.t3),
            ("t4", self.t4),
            ("t_hold", self.t_hold),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                e.push(format!("{prefix}{name} = {v} must be finite and non-negative"));
            }
        }
        e
    }

    /// End of the fourth stage, where the EEF window opens.
    pub fn t_decoupled(&self) -> f64 {
        self.t1 + self.t2 + self.t3 + self.t4
    }
}

/// Four-stage ground-state harvesting sequence plus the trailing hold.
pub fn ground_state_protocol(p: &GroundProtocolParams) -> Result<ControlSchedule> {
    let errs = p.problems("");
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let n = p.n_qubits;
    let segs = vec![
        Segment::uniform(n, p.t1, p.adiabatic_shape, (p.g_min, p.g_max), (p.omega_max, p.omega_max)),
        Segment::uniform(n, p.t2, p.adiabatic_shape, (p.g_max, p.g_max), (p.omega_max, p.omega_min)),
        Segment::uniform(n, p.t3, p.fast_shape, (p.g_max, p.g_min), (p.omega_min, p.omega_min)),
        Segment::uniform(n, p.t4, p.fast_shape, (p.g_min, p.g_min), (p.omega_min, p.omega_max)),
    ];
    ControlSchedule::new(n, segs)?.with_hold(p.t_hold)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SingletProtocolParams {
    pub n_qubits: usize,
    pub omega_r: f64,
    /// Starting (and final) frequency of every qubit.
    pub omega_max: f64,
    /// Low frequency of the first half of the register during the coupling ramp.
    pub omega_low_a: f64,
    /// Low frequency of the second half at the start of the coupling ramp;
    /// `None` means no offset.
    pub omega_low_b: Option<f64>,
    pub g_max: f64,
    /// Coupling held while the frequencies return; defaults to `g_max`.
    pub g_f: Option<f64>,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t_hold: f64,
    pub shape: Shape,
}

impl Default for SingletProtocolParams {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            omega_r: 1.0,
            omega_max: 5.0,
            omega_low_a: 0.48,
            omega_low_b: Some(0.35),
            g_max: 1.8,
            g_f: None,
            t1: 10.0,
            t2: 150.0,
            t3: 10.0,
            t_hold: 1.0,
            shape: Shape::Cosine,
        }
    }
}

impl SingletProtocolParams {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut e = Vec::new();
        if self.n_qubits != 2 && self.n_qubits != 4 {
            e.push(format!("{prefix}n_qubits must be 2 or 4, got {}", self.n_qubits));
        }
        if !(self.omega_r > 0.0) {
            e.push(format!("{prefix}omega_r must be positive"));
        }
        let lows = [Some(self.omega_low_a), self.omega_low_b];
        for w in lows.into_iter().flatten() {
            if !(w > 0.0 && w < self.omega_max) {
                e.push(format!("{prefix}low frequency {w} must lie in (0, omega_max)"));
            }
        }
        if !(self.g_max > 0.0) {
            e.push(format!("{prefix}g_max must be positive"));
        }
        if self.g_f.is_some_and(|g| !(g >= 0.0)) {
            e.push(format!("{prefix}g_f must be non-negative"));
        }
        for (name, v) in [("t1", self.t1), ("t2", self.t2), ("t3", self.t3), ("t_hold", self.t_hold)] {
            if !(v >= 0.0) || !v.is_finite() {
                e.push(format!("{prefix}{name} = {v} must be finite and non-negative"));
            }
        }
        e
    }

    pub fn t_end(&self) -> f64 {
        self.t1 + self.t2 + self.t3
    }
}

/// Three-stage singlet sequence: lower the frequencies with a pair offset,
/// raise the coupling while the offset closes, then restore the
/// frequencies at coupling `g_f`.
pub fn singlet_protocol(p: &SingletProtocolParams) -> Result<ControlSchedule> {
    let errs = p.problems("");
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let n = p.n_qubits;
    let a = p.omega_low_a;
    let b = p.omega_low_b.unwrap_or(a);
    let low: Vec<f64> = (0..n).map(|i| if i < n / 2 { a } else { b }).collect();
    let common = vec![a; n];
    let top = vec![p.omega_max; n];
    let zero = vec![0.0; n];
    let gmax = vec![p.g_max; n];
    let gf = vec![p.g_f.unwrap_or(p.g_max); n];
    let segs = vec![
        Segment {
            duration: p.t1,
            shape: p.shape,
            g_start: zero.clone(),
            g_end: zero,
            omega_q_start: top.clone(),
            omega_q_end: low.clone(),
        },
        Segment {
            duration: p.t2,
            shape: p.shape,
            g_start: vec![0.0; n],
            g_end: gmax.clone(),
            omega_q_start: low,
            omega_q_end: common.clone(),
        },
        Segment {
            duration: p.t3,
            shape: p.shape,
            g_start: gmax,
            g_end: gf,
            omega_q_start: common,
            omega_q_end: top,
        },
    ];
    ControlSchedule::new(n, segs)?.with_hold(p.t_hold)
}

/// Controls interpolated from a `(t, g, ω_q)` table with monotone cubics,
/// identical for every qubit up to optional disorder factors.
#[derive(Debug, Clone)]
pub struct SampledSchedule {
    n_qubits: usize,
    g: MonotoneCubic,
    omega_q: MonotoneCubic,
    g_factors: Vec<f64>,
    omega_factors: Vec<f64>,
    breaks: Vec<f64>,
}

impl SampledSchedule {
    pub fn new(n_qubits: usize, t: Vec<f64>, g: Vec<f64>, omega_q: Vec<f64>) -> Result<Self> {
        if t.len() < 2 || g.len() != t.len() || omega_q.len() != t.len() {
            return Err(Error::dims("sample table needs at least two rows of equal length"));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        if g.iter().any(|x| *x < 0.0) {
            return Err(Error::invalid("sampled couplings must be non-negative"));
        }
        let breaks = vec![t[0], *t.last().unwrap()];
        Ok(Self {
            n_qubits,
            g: MonotoneCubic::new(t.clone(), g)?,
            omega_q: MonotoneCubic::new(t, omega_q)?,
            g_factors: vec![1.0; n_qubits],
            omega_factors: vec![1.0; n_qubits],
            breaks,
        })
    }

    /// Adds extra non-smooth points (such as stage boundaries).
    pub fn with_breakpoints(mut self, extra: &[f64]) -> Self {
        self.breaks.extend_from_slice(extra);
        self.breaks.sort_by(f64::total_cmp);
        self.breaks.dedup();
        self
    }

    pub fn with_disorder(mut self, freq: Option<&[f64]>, coupling: Option<&[f64]>) -> Result<Self> {
        let n = self.n_qubits;
        if let Some(e) = freq {
            if e.len() != n {
                return Err(Error::dims("frequency disorder length"));
            }
            self.omega_factors = e.iter().map(|x| 1.0 + x).collect();
        }
        if let Some(e) = coupling {
            if e.len() != n {
                return Err(Error::dims("coupling disorder length"));
            }
            self.g_factors = e.iter().map(|x| 1.0 + x).collect();
        }
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        self.g.x()
    }

    pub fn g_samples(&self) -> &[f64] {
        self.g.y()
    }

    pub fn omega_samples(&self) -> &[f64] {
        self.omega_q.y()
    }

    /// Reads a CSV with header `t,g,omega_q`.
    pub fn from_csv<R: Read>(n_qubits: usize, reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Config(vec![format!("sample table is missing column `{name}`")]))
        };
        let (ct, cg, cw) = (col("t")?, col("g")?, col("omega_q")?);
        let (mut t, mut g, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |c: usize| -> Result<f64> {
                rec.get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(vec![format!("row {}: bad number in column {c}", line + 2)]))
            };
            t.push(parse(ct)?);
            g.push(parse(cg)?);
            w.push(parse(cw)?);
        }
        Self::new(n_qubits, t, g, w)
    }

    pub fn from_csv_path(n_qubits: usize, path: &Path) -> Result<Self> {
        Self::from_csv(n_qubits, std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "g", "omega_q"])?;
        for ((t, g), o) in self.times().iter().zip(self.g_samples()).zip(self.omega_samples()) {
            w.write_record([
                crate::experiments::fmt_num(*t),
                crate::experiments::fmt_num(*g),
                crate::experiments::fmt_num(*o),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl Controls for SampledSchedule {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn evaluate_into(&self, t: f64, g: &mut [f64], omega_q: &mut [f64]) {
        let gv = self.g.eval(t).max(0.0);
        let wv = self.omega_q.eval(t);
        for i in 0..self.n_qubits {
            g[i] = gv * self.g_factors[i];
            omega_q[i] = wv * self.omega_factors[i];
        }
    }

    fn duration(&self) -> f64 {
        *self.times().last().unwrap()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn extremes(&self) -> (f64, f64) {
        let w = self.omega_samples().iter().map(|x| x.abs()).fold(0.0, f64::max)
            * self.omega_factors.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let g = self.g_samples().iter().copied().fold(0.0, f64::max)
            * self.g_factors.iter().map(|x| x.abs()).fold(0.0, f64::max);
        (w, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_protocol_landmarks() {
        let p = GroundProtocolParams::default();
        let s = ground_state_protocol(&p).unwrap();
        assert!((s.t_f() - 15.0).abs() < 1e-12);
        let (g, w) = s.evaluate(0.0);
        assert_eq!((g[0], w[0]), (0.1, 20.0));
        let (g, w) = s.evaluate(13.0);
        assert!((g[0] - 4.5).abs() < 1e-12 && (w[0] - 0.5).abs() < 1e-12);
        let (g, w) = s.evaluate(100.0);
        assert_eq!((g[0], w[0]), (0.1, 20.0));
    }

    #[test]
    fn shapes() {
        let lin = Segment::uniform(1, 2.0, Shape::Linear, (0.0, 4.0), (1.0, 1.0));
        let s = ControlSchedule::new(1, vec![lin]).unwrap();
        assert!((s.evaluate(1.0).0[0] - 2.0).abs() < 1e-14);
        let cos = Segment::uniform(1, 2.0, Shape::Cosine, (0.0, 4.0), (1.0, 1.0));
        let s = ControlSchedule::new(1, vec![cos]).unwrap();
        assert!(s.derivative(0.0).0[0].abs() < 1e-14);
        assert!(s.derivative(2.0 - 1e-9).0[0].abs() < 1e-6);
    }

    #[test]
    fn zero_duration_stages() {
        let p = GroundProtocolParams {
            t3: 0.0,
            t4: 0.0,
            ..Default::default()
        };
        let s = ground_state_protocol(&p).unwrap();
        let (g, w) = s.evaluate(13.0);
        assert_eq!((g[0], w[0]), (0.1, 20.0));
    }

    #[test]
    fn rejects_bad_ordering() {
        let p = GroundProtocolParams {
            omega_min: 2.0,
            t3: -1.0,
            ..Default::default()
        };
        match ground_state_protocol(&p) {
            Err(Error::Config(e)) => assert_eq!(e.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toml_round_trip() {
        let s = ground_state_protocol(&GroundProtocolParams::default()).unwrap();
        let back = ControlSchedule::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn reversal_swaps_stage_order() {
        let s = ground_state_protocol(&GroundProtocolParams {
            t_hold: 0.0,
            ..Default::default()
        })
        .unwrap();
        let r = s.reversed();
        let d: Vec<f64> = r.segments.iter().map(|x| x.duration).collect();
        assert_eq!(d, vec![0.5, 0.5, 6.5, 6.5]);
        assert_eq!(r.evaluate(0.0), s.evaluate(s.t_f()));
    }

    #[test]
    fn singlet_endpoints() {
        let p = SingletProtocolParams::default();
        let s = singlet_protocol(&p).unwrap();
        let (g, w) = s.evaluate(p.t1);
        assert_eq!(g, vec![0.0; 4]);
        assert_eq!(w, vec![0.48, 0.48, 0.35, 0.35]);
        let (g, w) = s.evaluate(p.t1 + p.t2);
        assert!((g[0] - 1.8).abs() < 1e-12);
        assert!(w.iter().all(|x| (x - 0.48).abs() < 1e-12));
        let bad = SingletProtocolParams {
            n_qubits: 6,
            ..Default::default()
        };
        assert!(singlet_protocol(&bad).is_err());
    }

    #[test]
    fn sampled_csv_round_trip() {
        let s = SampledSchedule::new(2, vec![0.0, 1.0, 2.0], vec![0.1, 2.0, 0.1], vec![20.0, 1.0, 20.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SampledSchedule::from_csv(2, buf.as_slice()).unwrap();
        assert_eq!(back.times(), s.times());
        let (g, w) = back.evaluate(1.0);
        assert!((g[1] - 2.0).abs() < 1e-12 && (w[0] - 1.0).abs() < 1e-12);
        assert_eq!(back.evaluate(5.0).0[0], 0.1);
    }
}
