use std::path::Path;

use serde::Serialize;

use super::Ensemble;
use crate::decomposition::Decomposition;
use crate::error::{domain, Result};
use crate::matrix::Matrix;
use crate::transfer::{DecaySeries, LagCorrelations, NormKind, UlamOperator};

/// Default eigenvalue threshold below which `Σ` is declared degenerate.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-3;

/// A matrix estimate with entrywise standard errors (zero for quadrature).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Matrix,
    pub stderr: Matrix,
}

impl Estimate {
    pub fn exact(value: Matrix) -> Self {
        let d = value.dim();
        Self {
            value,
            stderr: Matrix::zeros(d),
        }
    }

    /// Largest entrywise `|a − b| / hypot(se_a, se_b)`; infinite when the
    /// estimates differ and both are exact.
    pub fn max_z(&self, other: &Self) -> f64 {
        let d = self.value.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let diff = (self.value[(i, j)] - other.value[(i, j)]).abs();
                let se = self.stderr[(i, j)].hypot(other.stderr[(i, j)]);
                let scale = 1e-12
                    * self.value[(i, j)]
                        .abs()
                        .max(other.value[(i, j)].abs())
                        .max(1.0);
                let z = if diff <= scale {
                    0.0
                } else if se > 0.0 {
                    diff / se
                } else {
                    f64::INFINITY
                };
                worst = worst.max(z);
            }
        }
        worst
    }

    /// Entrywise within `k` combined standard errors of `target`.
    pub fn within(&self, target: &Matrix, k: f64) -> bool {
        let d = self.value.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                (self.value[(i, j)] - target[(i, j)]).abs() <= k * self.stderr[(i, j)] + 1e-12
            })
        })
    }

    pub fn mean_stderr(&self) -> f64 {
        let s = self.stderr.as_slice();
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }
}

/// A truncated lag sum with the extrapolated size of the omitted tail.
#[derive(Clone, Debug, Serialize)]
pub struct LagSum {
    pub estimate: Estimate,
    pub lags: usize,
    /// Estimated Frobenius size of the omitted terms.
    pub tail: f64,
}

fn lag_sum(corr: &LagCorrelations, lags: usize, symmetrize: bool) -> Result<LagSum> {
    if lags == 0 {
        return domain("lag cutoff J must be at least 1");
    }
    if lags > corr.max_lag() {
        return domain(format!(
            "J = {lags} exceeds the {} recorded lags",
            corr.max_lag()
        ));
    }
    let d = corr.dim;
    let (value, stderr) = corr.batch_statistic(|c| {
        let mut s = if symmetrize {
            c[0].clone()
        } else {
            Matrix::zeros(d)
        };
        for cj in &c[1..=lags] {
            s.add_assign(cj);
            if symmetrize {
                s.add_assign(&cj.transpose());
            }
        }
        if symmetrize {
            s.symmetrized()
        } else {
            s
        }
    });
    let norms = (1..=lags).map(|j| (j, corr.mean[j].frobenius())).collect();
    let series = DecaySeries::new(NormKind::L1, norms, Vec::new(), lags + 1);
    let factor = if symmetrize { 2.0 } else { 1.0 };
    Ok(LagSum {
        estimate: Estimate { value, stderr },
        lags,
        tail: factor * series.extrapolated_tail(),
    })
}

/// Green-Kubo sum `C_0 + Σ_{j=1}^J (C_j + C_jᵀ)`.
pub fn sigma_green_kubo(corr: &LagCorrelations, lags: usize) -> Result<LagSum> {
    lag_sum(corr, lags, true)
}

/// Drift `E = Σ_{j=1}^J C_j` with `C_j = ∫ v ⊗ (v ∘ T^j) dμ`.
pub fn drift_matrix(corr: &LagCorrelations, lags: usize) -> Result<LagSum> {
    lag_sum(corr, lags, false)
}

/// Symmetrised ensemble mean of `W_n(1) ⊗ W_n(1)`.
pub fn sigma_direct(ensemble: &Ensemble) -> Result<Estimate> {
    if ensemble.len() < 2 {
        return domain("sigma_direct needs at least two replicas");
    }
    let (value, stderr) = ensemble.mean_of(|m| Matrix::outer(&m.w, &m.w));
    Ok(Estimate {
        value: value.symmetrized(),
        stderr,
    })
}

/// Grid quadrature of `∫ m ⊗ m dμ`.
pub fn sigma_martingale(op: &UlamOperator, dec: &Decomposition) -> Result<Matrix> {
    Ok(op.inner(&dec.mart, &dec.mart)?.symmetrized())
}

/// Eigen-analysis of a symmetrised covariance.
#[derive(Clone, Debug, Serialize)]
pub struct Degeneracy {
    pub degenerate: bool,
    pub tol: f64,
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvector of the smallest eigenvalue, signed so that its last
    /// nonzero component is positive; present only when degenerate.
    pub witness: Option<Vec<f64>>,
}

pub fn degeneracy_check(sigma: &Matrix, tol: f64) -> Degeneracy {
    let (values, vectors) = sigma.symmetric_eigen();
    let degenerate = values.first().is_some_and(|&l| l < tol);
    let witness = degenerate.then(|| {
        let mut c = vectors[0].clone();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let last = c
            .iter()
            .rev()
            .copied()
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(1.0);
        let s = last.signum() / norm;
        c.iter_mut().for_each(|x| *x *= s);
        c
    });
    Degeneracy {
        degenerate,
        tol,
        eigenvalues: values,
        witness,
    }
}

/// One pairwise comparison in a [`SigmaReport`].
#[derive(Clone, Debug, Serialize)]
pub struct Agreement {
    pub first: String,
    pub second: String,
    pub max_z: f64,
    pub agree: bool,
}

/// The `Σ` estimates of one experiment, their mutual agreement, the drift
/// and a degeneracy verdict on the most precise estimate.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaReport {
    pub sigma_direct: Option<Estimate>,
    pub sigma_green_kubo: Option<LagSum>,
    pub sigma_martingale: Option<Estimate>,
    pub drift_e: Option<LagSum>,
    pub agreement: Vec<Agreement>,
    pub degeneracy: Degeneracy,
}

impl SigmaReport {
    pub fn assemble(
        direct: Option<Estimate>,
        green_kubo: Option<LagSum>,
        martingale: Option<Estimate>,
        drift: Option<LagSum>,
        tol: f64,
    ) -> Result<Self> {
        let named: Vec<(&str, &Estimate)> = [
            ("direct", direct.as_ref()),
            ("green-kubo", green_kubo.as_ref().map(|g| &g.estimate)),
            ("martingale", martingale.as_ref()),
        ]
        .into_iter()
        .filter_map(|(n, e)| e.map(|e| (n, e)))
        .collect();
        let Some(best) = named
            .iter()
            .min_by(|a, b| a.1.mean_stderr().total_cmp(&b.1.mean_stderr()))
        else {
            return domain("a sigma report needs at least one estimate");
        };
        let degeneracy = degeneracy_check(&best.1.value, tol);
        let mut agreement = Vec::new();
        for (i, a) in named.iter().enumerate() {
            for b in &named[i + 1..] {
                let z = a.1.max_z(b.1);
                agreement.push(Agreement {
                    first: a.0.into(),
                    second: b.0.into(),
                    max_z: z,
                    agree: z <= 3.0,
                });
            }
        }
        Ok(Self {
            sigma_direct: direct,
            sigma_green_kubo: green_kubo,
            sigma_martingale: martingale,
            drift_e: drift,
            agreement,
            degeneracy,
        })
    }

    /// The estimate with the smallest mean standard error.
    pub fn best_sigma(&self) -> Option<Matrix> {
        [
            self.sigma_direct.as_ref(),
            self.sigma_green_kubo.as_ref().map(|g| &g.estimate),
            self.sigma_martingale.as_ref(),
        ]
        .into_iter()
        .flatten()
        .min_by(|a, b| a.mean_stderr().total_cmp(&b.mean_stderr()))
        .map(|e| e.value.clone())
    }

    pub fn all_agree(&self) -> bool {
        self.agreement.iter().all(|a| a.agree)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(std::fs::File::create(path)?, self)?;
        Ok(())
    }
}
