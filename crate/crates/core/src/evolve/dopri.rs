//! Dormand–Prince 5(4) stepping on complex vectors.

use crate::{Error, Result, C64};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Adaptive stepper with an absolute 2-norm error target per step.
pub(crate) struct Dopri5 {
    k: Vec<Vec<C64>>,
    stage: Vec<C64>,
    y_new: Vec<C64>,
    fsal_valid: bool,
    h: f64,
    pub tol: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub stats: StepStats,
}

impl Dopri5 {
    pub fn new(tol: f64, dt_max: f64, dt_min: f64) -> Self {
        Self {
            k: vec![Vec::new(); 7],
            stage: Vec::new(),
            y_new: Vec::new(),
            fsal_valid: false,
            h: dt_max.min(1e-3),
            tol,
            dt_max,
            dt_min,
            stats: StepStats {
                min_step: f64::INFINITY,
                ..Default::default()
            },
        }
    }

    /// Call after modifying the state outside the stepper.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn resize(&mut self, n: usize) {
        if self.stage.len() != n {
            for k in &mut self.k {
                k.resize(n, C64::new(0.0, 0.0));
            }
            self.stage.resize(n, C64::new(0.0, 0.0));
            self.y_new.resize(n, C64::new(0.0, 0.0));
            self.fsal_valid = false;
        }
    }

    /// Integrates `y` from `t` to exactly `t_end`.
    pub fn advance<F>(&mut self, f: &mut F, t: f64, t_end: f64, y: &mut Vec<C64>) -> Result<()>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        self.resize(y.len());
        let mut t = t;
        if !self.fsal_valid {
            f(t, y, &mut self.k[0]);
            self.stats.rhs_evals += 1;
            self.fsal_valid = true;
        }
        while t_end - t > 1e-14 * t_end.abs().max(1.0) {
            let remaining = t_end - t;
            let mut h = self.h.min(self.dt_max);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < self.dt_min && !last {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size {h:.3e} below the minimum {:.3e}", self.dt_min),
                });
            }
            for s in 1..7 {
                self.stage.copy_from_slice(y);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        let c = h * a;
                        for (st, kj) in self.stage.iter_mut().zip(&self.k[j]) {
                            *st += kj * c;
                        }
                    }
                }
                if s == 6 {
                    self.y_new.copy_from_slice(&self.stage);
                }
                f(t + C[s] * h, &self.stage, &mut self.k[s]);
            }
            self.stats.rhs_evals += 6;
            let mut err2 = 0.0;
            for i in 0..y.len() {
                let mut e = C64::new(0.0, 0.0);
                for (s, es) in E.iter().enumerate() {
                    if *es != 0.0 {
                        e += self.k[s][i] * *es;
                    }
                }
                err2 += (e * h).norm_sqr();
            }
            let err = err2.sqrt() / self.tol;
            if !err.is_finite() {
                return Err(Error::Integration {
                    t,
                    reason: "non-finite state during integration".into(),
                });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t_end } else { t + h };
                std::mem::swap(y, &mut self.y_new);
                self.k.swap(0, 6);
                self.stats.accepted += 1;
                self.stats.min_step = self.stats.min_step.min(h);
                self.stats.max_step = self.stats.max_step.max(h);
                // a truncated final step says nothing about the natural size
                if !last || factor < 1.0 {
                    self.h = (h * factor).min(self.dt_max);
                }
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
                if self.h < self.dt_min {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow ({:.3e})", self.h),
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotating_phase() {
        let w = 2.3;
        let mut f = |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = y[0] * C64::new(0.0, -w);
        };
        let mut s = Dopri5::new(1e-12, 0.05, 1e-12);
        let mut y = vec![C64::new(1.0, 0.0)];
        s.advance(&mut f, 0.0, 1.0, &mut y).unwrap();
        s.advance(&mut f, 1.0, 3.0, &mut y).unwrap();
        let want = C64::new(0.0, -w * 3.0).exp();
        assert!((y[0] - want).norm() < 1e-10);
    }
}
