use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Default number of Brownian steps on `[0, 1]`.
pub const DEFAULT_FINE_STEPS: usize = 1 << 12;

/// The limit pair `(W, 𝕎)` with `W` a Brownian motion of covariance `Σ` and
/// `𝕎(t) = ∫_0^t W ⊗ dW + tE` (Itô).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceLawSampler {
    pub sigma: Matrix,
    pub drift_e: Matrix,
    pub n_fine: usize,
    #[serde(skip)]
    factor: Option<Matrix>,
}

impl ReferenceLawSampler {
    pub fn new(sigma: Matrix, drift_e: Matrix) -> Result<Self> {
        Self::with_fine_steps(sigma, drift_e, DEFAULT_FINE_STEPS)
    }

    pub fn with_fine_steps(sigma: Matrix, drift_e: Matrix, n_fine: usize) -> Result<Self> {
        if sigma.dim() != drift_e.dim() {
            return Err(Error::Dimension {
                expected: sigma.dim(),
                got: drift_e.dim(),
            });
        }
        if n_fine == 0 {
            return domain("n_fine must be at least 1");
        }
        let factor = sigma.psd_factor()?;
        Ok(Self {
            sigma,
            drift_e,
            n_fine,
            factor: Some(factor),
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    fn factor(&self) -> Result<Matrix> {
        match &self.factor {
            Some(f) => Ok(f.clone()),
            None => self.sigma.psd_factor(),
        }
    }
}

/// One draw of `(W(1), 𝕎(1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitSample {
    pub w: Vec<f64>,
    pub ww: Matrix,
}

/// `count` independent draws; draw `i` uses stream `i` of `seed`.
pub fn sample_limit_pair(
    sampler: &ReferenceLawSampler,
    count: usize,
    seed: u64,
) -> Result<Vec<LimitSample>> {
    if count == 0 {
        return domain("count must be at least 1");
    }
    let l = sampler.factor()?;
    let d = sampler.dim();
    let steps = sampler.n_fine;
    let root_dt = (1.0 / steps as f64).sqrt();
    Ok(rng::replicate(seed, count, |_, r| {
        let mut w = vec![0.0; d];
        let mut ww = Matrix::zeros(d);
        let mut z = vec![0.0; d];
        for _ in 0..steps {
            for zi in z.iter_mut() {
                *zi = r.sample::<f64, _>(StandardNormal) * root_dt;
            }
            accumulate(&mut ww, &mut w, &l.mul_vec(&z));
        }
        ww.add_assign(&sampler.drift_e);
        LimitSample { w, ww }
    }))
}

/// Itô-sum convergence check: each replica is simulated on `2·n_fine` steps
/// and `𝕎(1)` is formed on both the fine and the pairwise-coarsened grid.
/// Returns, per entry, the mean fine-minus-coarse shift and the standard
/// error of the fine-grid mean of `𝕎(1)`.
pub fn resolution_shift(
    sampler: &ReferenceLawSampler,
    count: usize,
    seed: u64,
) -> Result<(Matrix, Matrix)> {
    if count < 2 {
        return domain("resolution_shift needs at least two replicas");
    }
    let l = sampler.factor()?;
    let d = sampler.dim();
    let steps = 2 * sampler.n_fine;
    let root_dt = (1.0 / steps as f64).sqrt();
    let pairs: Vec<(Matrix, Matrix)> = rng::replicate(seed, count, |_, r| {
        let (mut w_fine, mut w_coarse) = (vec![0.0; d], vec![0.0; d]);
        let (mut fine, mut coarse) = (Matrix::zeros(d), Matrix::zeros(d));
        let mut pending = vec![0.0; d];
        let mut z = vec![0.0; d];
        for k in 0..steps {
            for zi in z.iter_mut() {
                *zi = r.sample::<f64, _>(StandardNormal) * root_dt;
            }
            let dw = l.mul_vec(&z);
            accumulate(&mut fine, &mut w_fine, &dw);
            for (p, x) in pending.iter_mut().zip(&dw) {
                *p += x;
            }
            if k % 2 == 1 {
                accumulate(&mut coarse, &mut w_coarse, &pending);
                pending.iter_mut().for_each(|p| *p = 0.0);
            }
        }
        (fine, coarse)
    });
    let n = count as f64;
    let mut shift = Matrix::zeros(d);
    let mut mean = Matrix::zeros(d);
    for (f, c) in &pairs {
        shift.add_assign(&f.sub(c));
        mean.add_assign(f);
    }
    let (shift, mean) = (shift.scaled(1.0 / n), mean.scaled(1.0 / n));
    let mut var = Matrix::zeros(d);
    for (f, _) in &pairs {
        var.add_assign(&f.sub(&mean).map(|x| x * x));
    }
    Ok((shift, var.map(|x| (x / ((n - 1.0) * n)).sqrt())))
}

fn accumulate(ww: &mut Matrix, w: &mut [f64], dw: &[f64]) {
    let d = w.len();
    let a = ww.as_mut_slice();
    for p in 0..d {
        for q in 0..d {
            a[p * d + q] += w[p] * dw[q];
        }
    }
    for (x, dx) in w.iter_mut().zip(dw) {
        *x += dx;
    }
}
