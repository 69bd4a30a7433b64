//! Dense and iterative linear-algebra helpers shared by the physics modules.
//!
//! Dense work goes through `faer`; everything here operates on
//! `faer::Mat<C64>` / `faer::Mat<f64>` or on plain slices of amplitudes.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Eigen-decomposition of a dense Hermitian matrix, ascending eigenvalues.
pub fn hermitian_eigen(m: &Mat<C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigen-decomposition of a dense real symmetric matrix, ascending eigenvalues.
pub fn symmetric_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &Mat<C64>) -> Result<Vec<f64>> {
    let vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(vals)
}

/// `exp(factor · H)` for Hermitian `H` through its eigenbasis.
pub fn expm_hermitian(h: &Mat<C64>, factor: C64) -> Result<Mat<C64>> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let w = (factor * lam).exp();
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    Ok(&scaled * vecs.adjoint())
}

/// Matrix exponential of a small dense real matrix by scaling and squaring
/// with a truncated Taylor series.
pub fn expm_real(a: &Mat<f64>) -> Mat<f64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut result = Mat::<f64>::identity(n, n);
    let mut term = Mat::<f64>::identity(n, n);
    for k in 1..=14 {
        term = &term * &scaled;
        let inv = 1.0 / k as f64;
        for j in 0..n {
            for i in 0..n {
                term[(i, j)] *= inv;
                result[(i, j)] += term[(i, j)];
            }
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpairs of a Hermitian operator given only through its action.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalisation and thick restarts.
///
/// Each cycle extends the retained Ritz vectors by a Krylov block grown from
/// the residual of the worst unconverged Ritz pair, then performs a
/// Rayleigh-Ritz step on the whole basis. Iteration stops once every one of
/// the `k` lowest residuals `‖Hx − θx‖` is below `tol`.
pub fn lanczos_lowest<F>(
    apply: F,
    dim: usize,
    k: usize,
    tol: f64,
    cycle: usize,
    max_cycles: usize,
    seed: u64,
) -> Result<LanczosResult>
where
    F: Fn(&[C64], &mut [C64]),
{
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("lanczos: k = {k} for dim = {dim}")));
    }
    let cycle = cycle.max(k + 4).min(dim);
    let keep_n = (k + 3).min(cycle - 1).max(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        (0..dim)
            .map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect()
    };
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut images: Vec<Vec<C64>> = Vec::new();
    let mut start = random_vec(&mut rng);
    let mut scratch = vec![C64::new(0.0, 0.0); dim];
    let mut products = 0;
    let mut last_residuals = Vec::new();

    for _ in 0..max_cycles {
        let mut v = start.clone();
        for _ in 0..2 {
            orthogonalize(&mut v, &basis);
        }
        if norm(&v) < 1e-10 {
            v = random_vec(&mut rng);
            for _ in 0..2 {
                orthogonalize(&mut v, &basis);
            }
        }
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v);
        while images.len() < basis.len() {
            apply(&basis[images.len()], &mut scratch);
            products += 1;
            images.push(scratch.clone());
            if basis.len() >= cycle {
                break;
            }
            let mut w = scratch.clone();
            for _ in 0..2 {
                orthogonalize(&mut w, &basis);
            }
            let nw = norm(&w);
            if nw < 1e-12 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= nw);
            basis.push(w);
        }
        basis.truncate(images.len());
        let m = basis.len();
        let proj = Mat::<C64>::from_fn(m, m, |i, j| dot(&basis[i], &images[j]));
        let proj = Mat::<C64>::from_fn(m, m, |i, j| (proj[(i, j)] + proj[(j, i)].conj()) * 0.5);
        let (theta, y) = hermitian_eigen(&proj)?;
        let combine = |cols: &[Vec<C64>], r: usize| -> Vec<C64> {
            let mut x = vec![C64::new(0.0, 0.0); dim];
            for (j, col) in cols.iter().enumerate() {
                let c = y[(j, r)];
                for (xi, bi) in x.iter_mut().zip(col) {
                    *xi += c * bi;
                }
            }
            x
        };
        let nkeep = keep_n.min(m);
        let ritz: Vec<Vec<C64>> = (0..nkeep).map(|r| combine(&basis, r)).collect();
        let ritz_images: Vec<Vec<C64>> = (0..nkeep).map(|r| combine(&images, r)).collect();
        let residual_vecs: Vec<Vec<C64>> = (0..k)
            .map(|r| {
                ritz_images[r]
                    .iter()
                    .zip(&ritz[r])
                    .map(|(h, x)| h - x * theta[r])
                    .collect()
            })
            .collect();
        let residuals: Vec<f64> = residual_vecs.iter().map(|v| norm(v)).collect();
        if residuals.iter().all(|&r| r < tol) || m == dim {
            return Ok(LanczosResult {
                values: theta[..k].to_vec(),
                vectors: ritz[..k].to_vec(),
                residuals,
                iterations: products,
            });
        }
        let worst = residuals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        start = residual_vecs[worst].clone();
        basis = ritz;
        images = ritz_images;
        last_residuals = residuals;
    }
    Err(Error::Eigen(format!(
        "Lanczos did not converge after {products} products; residuals {last_residuals:?}"
    )))
}

fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    for b in basis {
        let c = dot(b, v);
        for (x, bi) in v.iter_mut().zip(b) {
            *x -= c * bi;
        }
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::invalid("monotone cubic needs at least two matching samples"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("interpolation abscissae must be strictly increasing"));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] <= 0.0 {
                    d[i] = 0.0;
                } else {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(MonotoneCubic { x, y, d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_real_matches_scalar_exponential() {
        let a = Mat::from_fn(1, 1, |_, _| -3.7);
        let e = expm_real(&a);
        assert!((e[(0, 0)] - (-3.7f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn expm_real_rotation() {
        let th = 1.3;
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => -th,
            (1, 0) => th,
            _ => 0.0,
        });
        let e = expm_real(&a);
        assert!((e[(0, 0)] - th.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - th.sin()).abs() < 1e-13);
    }

    #[test]
    fn lanczos_finds_lowest_of_diagonal() {
        let dim = 300;
        let diag: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64 * 0.01).collect();
        let res = lanczos_lowest(
            |x, y| {
                for i in 0..dim {
                    y[i] = x[i] * diag[i];
                }
            },
            dim,
            3,
            1e-8,
            60,
            200,
            1,
        )
        .unwrap();
        let mut sorted = diag.clone();
        sorted.sort_by(f64::total_cmp);
        for i in 0..3 {
            assert!((res.values[i] - sorted[i]).abs() < 1e-8, "{} vs {}", res.values[i], sorted[i]);
        }
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.2, 3.0, 3.1];
        let m = MonotoneCubic::new(x, y).unwrap();
        let mut prev = m.eval(0.0);
        for k in 1..=400 {
            let v = m.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!((m.eval(1.0) - 0.1).abs() < 1e-15);
    }
}
