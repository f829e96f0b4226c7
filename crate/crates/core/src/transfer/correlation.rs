use serde::{Deserialize, Serialize};

use super::{DecaySeries, GridFunction, NormKind, UlamOperator};
use crate::error::{domain, Error, Result};
use crate::maps::{InitialLaw, MapDescriptor, Observable, OrbitStream};
use crate::matrix::Matrix;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CorrelationSource {
    /// Grid quadrature `∫ (P^j v) ⊗ v dμ`.
    Ulam { grid_size: usize },
    /// Time averages over independent orbits, one batch per orbit.
    MonteCarlo {
        batches: usize,
        steps_per_batch: usize,
    },
}

/// Lag correlations `C_j = ∫ v ⊗ (v ∘ T^j) dμ` for `j = 0..=max_lag`.
#[derive(Clone, Debug)]
pub struct LagCorrelations {
    pub dim: usize,
    pub source: CorrelationSource,
    pub mean: Vec<Matrix>,
    pub stderr: Vec<Matrix>,
    per_batch: Vec<Vec<Matrix>>,
}

impl LagCorrelations {
    fn from_batches(dim: usize, source: CorrelationSource, per_batch: Vec<Vec<Matrix>>) -> Self {
        let lags = per_batch[0].len();
        let mut mean = Vec::with_capacity(lags);
        let mut stderr = Vec::with_capacity(lags);
        for j in 0..lags {
            let (m, s) = mean_and_stderr(per_batch.iter().map(|b| &b[j]), dim);
            mean.push(m);
            stderr.push(s);
        }
        Self {
            dim,
            source,
            mean,
            stderr,
            per_batch,
        }
    }

    pub fn max_lag(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn batches(&self) -> usize {
        self.per_batch.len()
    }

    /// Mean and standard error over batches of a statistic built from the
    /// lag correlations of one batch. A single batch has zero stderr.
    pub fn batch_statistic(&self, f: impl Fn(&[Matrix]) -> Matrix) -> (Matrix, Matrix) {
        let values: Vec<Matrix> = self.per_batch.iter().map(|b| f(b)).collect();
        mean_and_stderr(values.iter(), self.dim)
    }
}

fn mean_and_stderr<'a>(
    items: impl Iterator<Item = &'a Matrix> + Clone,
    dim: usize,
) -> (Matrix, Matrix) {
    let n = items.clone().count();
    let mut mean = Matrix::zeros(dim);
    for m in items.clone() {
        mean.add_assign(m);
    }
    let mean = mean.scaled(1.0 / n as f64);
    if n < 2 {
        return (mean, Matrix::zeros(dim));
    }
    let mut var = Matrix::zeros(dim);
    for m in items {
        var.add_assign(&m.sub(&mean).map(|x| x * x));
    }
    let stderr = var.map(|x| (x / ((n - 1) as f64 * n as f64)).sqrt());
    (mean, stderr)
}

/// Correlations by grid quadrature, `C_j = ∫ (P^j v) ⊗ v dμ`.
pub fn ulam_correlations(
    op: &UlamOperator,
    v: &GridFunction,
    max_lag: usize,
) -> Result<LagCorrelations> {
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut f = v.clone();
    for j in 0..=max_lag {
        lags.push(op.inner(&f, v)?);
        if j < max_lag {
            f = op.transfer(&f)?;
        }
    }
    Ok(LagCorrelations::from_batches(
        v.dim(),
        CorrelationSource::Ulam {
            grid_size: op.grid_size(),
        },
        vec![lags],
    ))
}

/// `Σ_t u_t ⊗ z_{t+j} / (n − j)` for `j ≤ max_lag`, rows of width `dim`.
fn lagged_products(u: &[f64], z: &[f64], dim: usize, max_lag: usize) -> Vec<Matrix> {
    let n = u.len() / dim;
    (0..=max_lag)
        .map(|j| {
            let mut acc = vec![0.0; dim * dim];
            for t in 0..n - j {
                let a = &u[t * dim..(t + 1) * dim];
                let b = &z[(t + j) * dim..(t + j + 1) * dim];
                for (p, &ap) in a.iter().enumerate() {
                    for (q, &bq) in b.iter().enumerate() {
                        acc[p * dim + q] += ap * bq;
                    }
                }
            }
            Matrix::from_row_major(dim, acc.into_iter().map(|x| x / (n - j) as f64).collect())
        })
        .collect()
}

fn record_values(stream: &mut OrbitStream<rng::Rng>, obs: &Observable, steps: usize) -> Vec<f64> {
    let d = obs.dim();
    let mut vals = vec![0.0; steps * d];
    for (p, out) in stream.take(steps).zip(vals.chunks_exact_mut(d)) {
        obs.eval_into(p, out);
    }
    vals
}

fn check_budget(max_lag: usize, orbit_budget: usize, batches: usize) -> Result<usize> {
    if batches < 2 {
        return domain("Monte Carlo correlations need at least 2 batches");
    }
    let steps = orbit_budget / batches;
    if steps <= 2 * max_lag {
        return Err(Error::Length {
            needed: 2 * max_lag * batches,
            available: orbit_budget,
        });
    }
    Ok(steps)
}

/// Correlations by time averages over `batches` independent orbits sharing
/// `orbit_budget` steps in total, each started from the invariant law.
pub fn mc_correlations(
    desc: &MapDescriptor,
    obs: &Observable,
    max_lag: usize,
    orbit_budget: usize,
    batches: usize,
    seed: u64,
) -> Result<LagCorrelations> {
    let steps = check_budget(max_lag, orbit_budget, batches)?;
    let d = obs.dim();
    let per_batch: Result<Vec<Vec<Matrix>>> = rng::replicate(seed, batches, |_, r| {
        let mut stream = OrbitStream::new(desc, InitialLaw::default(), r.clone())?;
        let vals = record_values(&mut stream, obs, steps);
        Ok(lagged_products(&vals, &vals, d, max_lag))
    })
    .into_iter()
    .collect();
    Ok(LagCorrelations::from_batches(
        d,
        CorrelationSource::MonteCarlo {
            batches,
            steps_per_batch: steps,
        },
        per_batch?,
    ))
}

/// `|∫ v (w ∘ T^n) dμ|` for scalar `v, w` and `n ≤ n_max`, with batch-mean
/// standard errors (32 batches).
pub fn correlation_decay(
    desc: &MapDescriptor,
    v: &Observable,
    w: &Observable,
    n_max: usize,
    orbit_budget: usize,
    seed: u64,
) -> Result<DecaySeries> {
    if v.dim() != 1 || w.dim() != 1 {
        return domain("correlation_decay takes scalar observables");
    }
    let batches = 32;
    let steps = check_budget(n_max, orbit_budget, batches)?;
    let per_batch: Result<Vec<Vec<Matrix>>> = rng::replicate(seed, batches, |_, r| {
        let mut stream = OrbitStream::new(desc, InitialLaw::default(), r.clone())?;
        let mut u = Vec::with_capacity(steps);
        let mut z = Vec::with_capacity(steps);
        for p in stream.by_ref().take(steps) {
            u.push(v.eval_scalar(p));
            z.push(w.eval_scalar(p));
        }
        Ok(lagged_products(&u, &z, 1, n_max))
    })
    .into_iter()
    .collect();
    let lags = LagCorrelations::from_batches(
        1,
        CorrelationSource::MonteCarlo {
            batches,
            steps_per_batch: steps,
        },
        per_batch?,
    );
    let norms = lags
        .mean
        .iter()
        .enumerate()
        .map(|(n, c)| (n, c[(0, 0)].abs()))
        .collect();
    let stderr = lags.stderr.iter().map(|s| s[(0, 0)]).collect();
    Ok(DecaySeries::new(NormKind::L1, norms, stderr, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::build_ulam;

    #[test]
    fn doubling_lag_correlations() {
        let desc = MapDescriptor::doubling();
        let v = Observable::centered_x();
        let s = correlation_decay(&desc, &v, &v, 8, 4_000_000, 3).unwrap();
        assert!((s.norms[0].1 - 1.0 / 12.0).abs() < 3.0 * s.stderr[0] + 1e-12);
        for &(n, c) in &s.norms {
            let exact = 0.5f64.powi(n as i32) / 12.0;
            assert!(
                (c - exact).abs() < 3.0 * s.stderr[n] + 1e-4,
                "n={n}: {c} vs {exact}"
            );
        }
    }

    #[test]
    fn cosine_correlations_vanish() {
        let desc = MapDescriptor::doubling();
        let w = Observable::custom("w", 1, 1.0, None, true, |p, o| o[0] = (p.base * 7.0).sin());
        let s = correlation_decay(&desc, &Observable::cosine(), &w, 6, 2_000_000, 5).unwrap();
        let mut outside = 0;
        for n in 1..=6 {
            if s.norms[n].1 > 3.0 * s.stderr[n] {
                outside += 1;
            }
        }
        assert!(outside <= 1, "{:?}", s.norms);
    }

    #[test]
    fn ulam_matches_closed_form() {
        let op = build_ulam(&MapDescriptor::doubling(), 1 << 12, 64).unwrap();
        let v = op.project(&Observable::centered_x()).unwrap();
        let c = ulam_correlations(&op, &v, 10).unwrap();
        for j in 0..=10 {
            let exact = 0.5f64.powi(j as i32) / 12.0;
            assert!((c.mean[j][(0, 0)] - exact).abs() < 1e-5, "{j}");
        }
        assert_eq!(c.batches(), 1);
    }

    #[test]
    fn budget_checks() {
        let d = MapDescriptor::doubling();
        assert!(mc_correlations(&d, &Observable::cosine(), 100, 1000, 8, 1).is_err());
        assert!(mc_correlations(&d, &Observable::cosine(), 1, 1000, 1, 1).is_err());
        assert!(correlation_decay(
            &d,
            &Observable::doubling_pair(),
            &Observable::cosine(),
            4,
            10_000,
            1
        )
        .is_err());
    }
}
