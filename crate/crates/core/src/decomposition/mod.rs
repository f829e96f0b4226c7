//! Martingale-coboundary decompositions.
//!
//! For a noninvertible base map the decomposition `v = m + χ∘T − χ` lives on
//! the Ulam grid with `χ = Σ_{j≥1} P^j v`. For the baker skew products the
//! two-sided version is assembled pointwise from conditional expectations
//! along stable fibers, see [`invertible_decomposition`].

mod fiber;
mod invertible;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::transfer::{apply_transfer, decay_series, GridFunction, NormKind, UlamOperator};

pub use fiber::{
    fiber_conditional_expectation, fiber_oscillation, BaseFunction, FiberLaw, FiberMethod,
    DEFAULT_BINS, QUADRATURE_NODES,
};
pub use invertible::{
    drift_identity_check, hybrid_criterion_diagnostic, invertible_decomposition, DriftIdentity,
    HybridConfig, HybridDiagnostic, InvertibleChecks, InvertibleConfig, InvertibleDecomposition,
    Parts,
};

/// Tolerance on `|P m|₁` beyond which the grid is considered too coarse.
pub const KER_P_LIMIT: f64 = 0.1;

/// Grid decomposition `v = m^{(k)} + χ∘T − χ + P^k v` with `χ = Σ_{j=1}^k P^j v`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub v: GridFunction,
    pub chi: GridFunction,
    pub mart: GridFunction,
    pub truncation_k: usize,
    /// `|P m|₁`.
    pub residual_ker_p: f64,
    /// `|m^{(k)} − m^{(2k)}|₂`.
    pub l2_cauchy_gap: f64,
    /// `|v − (m + χ∘T − χ)|₁`, which equals `|P^k v|₁` up to grid error.
    pub reconstruction_error: f64,
    /// `|P^k v|₁`, the truncation error bar.
    pub tail_norm: f64,
}

impl Decomposition {
    /// Rows `cell, component, v, chi, m` of the constant coefficients.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "component", "v", "chi", "m"])?;
        for k in 0..self.v.cells() {
            for c in 0..self.v.dim() {
                w.write_record([
                    k.to_string(),
                    c.to_string(),
                    format!("{:e}", self.v.coeff(k, 0)[c]),
                    format!("{:e}", self.chi.coeff(k, 0)[c]),
                    format!("{:e}", self.mart.coeff(k, 0)[c]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `Σ_{j=1}^k P^j v`.
pub fn chi_truncated(op: &UlamOperator, v: &GridFunction, k: usize) -> Result<GridFunction> {
    if k == 0 {
        return domain("truncation k must be at least 1");
    }
    let mut f = op.transfer(v)?;
    let mut chi = f.clone();
    for _ in 1..k {
        f = op.transfer(&f)?;
        chi.axpy(1.0, &f);
    }
    Ok(chi)
}

/// Smallest `k` with `|P^k v|₁ < 10⁻⁶` for doubling-type maps (capped at
/// 200), `40` for intermittent ones.
pub fn default_truncation(op: &UlamOperator, v: &GridFunction) -> Result<usize> {
    if !op.descriptor().has_doubling_base() {
        return Ok(40);
    }
    let mut f = v.clone();
    for k in 1..=200 {
        f = op.transfer(&f)?;
        if op.norm(&f, NormKind::L1)? < 1e-6 {
            return Ok(k);
        }
    }
    Ok(200)
}

/// `(m^{(k)}, χ^k_1, P^k v)`.
fn mart_k(
    op: &UlamOperator,
    v: &GridFunction,
    k: usize,
) -> Result<(GridFunction, GridFunction, GridFunction)> {
    let chi = chi_truncated(op, v, k)?;
    let tail = apply_transfer(op, v, k)?;
    let mut m = v.sub(&op.koopman(&chi)?);
    m.axpy(1.0, &chi);
    m.axpy(-1.0, &tail);
    Ok((m, chi, tail))
}

/// The martingale part `m^{(k)} = v − χ∘T + χ − P^k v`.
///
/// Fails with [`Error::UnderResolved`] when `|P m|₁ > 0.1`.
pub fn martingale_part(op: &UlamOperator, v: &GridFunction, k: usize) -> Result<Decomposition> {
    let (mart, chi, tail) = mart_k(op, v, k)?;
    let residual_ker_p = op.norm(&op.transfer(&mart)?, NormKind::L1)?;
    if residual_ker_p > KER_P_LIMIT {
        return Err(Error::UnderResolved(residual_ker_p));
    }
    let (m2, _, _) = mart_k(op, v, 2 * k)?;
    let l2_cauchy_gap = op.norm(&mart.sub(&m2), NormKind::L2)?;
    let mut rebuilt = mart.add(&op.koopman(&chi)?);
    rebuilt.axpy(-1.0, &chi);
    let reconstruction_error = op.norm(&v.sub(&rebuilt), NormKind::L1)?;
    let tail_norm = op.norm(&tail, NormKind::L1)?;
    Ok(Decomposition {
        v: v.clone(),
        chi,
        mart,
        truncation_k: k,
        residual_ker_p,
        l2_cauchy_gap,
        reconstruction_error,
        tail_norm,
    })
}

/// Both sides of `|m^{(k)} − m^{(ℓ)}|₂² ≤ 4|v|_∞ Σ_{n≥ℓ} |P^n v|₁`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CauchyBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl CauchyBound {
    /// The contract `lhs ≤ 1.2 rhs`.
    pub fn holds(&self) -> bool {
        self.lhs <= 1.2 * self.rhs + 1e-15
    }
}

/// The tail sum on the right is recorded up to `4k` and extrapolated from
/// the fitted decay beyond that.
pub fn l2_cauchy_bound_check(
    op: &UlamOperator,
    v: &GridFunction,
    ell: usize,
    k: usize,
) -> Result<CauchyBound> {
    if ell == 0 || ell >= k {
        return domain(format!("need 1 ≤ ell < k, got ell = {ell}, k = {k}"));
    }
    let (mk, _, _) = mart_k(op, v, k)?;
    let (ml, _, _) = mart_k(op, v, ell)?;
    let lhs = op.norm(&mk.sub(&ml), NormKind::L2)?.powi(2);
    let series = decay_series(op, v, 4 * k, NormKind::L1)?;
    let recorded: f64 = series
        .norms
        .iter()
        .filter(|&&(n, _)| n >= ell)
        .map(|&(_, x)| x)
        .sum();
    let sup = op.norm(v, NormKind::Linf)?;
    let rhs = 4.0 * sup * (recorded + series.extrapolated_tail());
    Ok(CauchyBound { lhs, rhs })
}
