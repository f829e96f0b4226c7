//! Ulam-Galerkin discretisation of the transfer operator.
//!
//! For a partition into cells `I_k` and a local basis `φ` the operator is
//! assembled from the cross-Gram matrix `A_{kl} = ∫ φ_k (φ_l ∘ T) dμ` and the
//! Gram diagonal `G_k = ∫ φ_k² dμ`:
//!
//! ```text
//! (P c)_l = Σ_k A_{kl} c_k / G_l,        (U c)_k = Σ_l A_{kl} c_l / G_k.
//! ```
//!
//! For the piecewise-constant basis this is the classical Ulam matrix:
//! `A_{kl} = μ(I_k) M_{lk}` where `M_{lk}` is the fraction of cell `k` mapped
//! into cell `l`, and `μ(I_k)` is the stationary vector of `M`. The
//! piecewise-linear basis is available for Lebesgue-preserving maps, where it
//! represents `P` on the doubling map without discretisation error.

mod correlation;
mod decay;
mod grid;
mod partition;
mod sparse;

pub use correlation::{
    correlation_decay, mc_correlations, ulam_correlations, CorrelationSource, LagCorrelations,
};
pub use decay::{DecaySeries, NormKind};
pub use grid::{Basis, GridFunction};
pub use partition::{Mesh, Partition};
pub use sparse::Csr;

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::maps::{MapDescriptor, Observable, Point};
use crate::matrix::Matrix;

/// Five-point Gauss-Legendre rule on `[0, 1]`.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_095),
    (0.230_765_344_947_158, 0.239_314_335_249_683),
    (0.5, 0.284_444_444_444_444),
    (0.769_234_655_052_842, 0.239_314_335_249_683),
    (0.953_089_922_969_332, 0.118_463_442_528_095),
];

const GAUSS2_OFFSET: f64 = 0.211_324_865_405_187_1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UlamConfig {
    pub cells: usize,
    pub samples_per_cell: usize,
    pub basis: Basis,
    pub mesh: Mesh,
}

impl Default for UlamConfig {
    fn default() -> Self {
        Self {
            cells: 4096,
            samples_per_cell: 64,
            basis: Basis::PiecewiseConstant,
            mesh: Mesh::Auto,
        }
    }
}

impl UlamConfig {
    pub fn new(cells: usize, samples_per_cell: usize) -> Self {
        Self {
            cells,
            samples_per_cell,
            ..Self::default()
        }
    }

    pub fn with_basis(mut self, basis: Basis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_mesh(mut self, mesh: Mesh) -> Self {
        self.mesh = mesh;
        self
    }
}

/// Immutable discretised transfer and Koopman operators.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    desc: MapDescriptor,
    partition: Partition,
    basis: Basis,
    samples_per_cell: usize,
    forward: Csr,
    weights: Vec<f64>,
    gram: Vec<f64>,
    transfer: Csr,
    koopman: Csr,
}

/// Lebesgue fractions of cell `k` mapped into each target cell, by exact
/// inversion of the two monotone branches.
///
/// Affine branches measure preimage lengths in image coordinates: near the
/// neutral fixed point the right-branch preimages `(y + 1) / 2` of tiny
/// target cells all round to `1/2` and their lengths would be lost.
fn exact_fractions(desc: &MapDescriptor, part: &Partition, k: usize) -> Vec<(usize, usize, f64)> {
    let (a, b, w) = (part.left(k), part.left(k) + part.width(k), part.width(k));
    let mut out = Vec::new();
    for (lo, hi, branch) in [(a, b.min(0.5), 0u8), (a.max(0.5), b, 1u8)] {
        if lo >= hi {
            continue;
        }
        let affine = branch == 1 || desc.has_doubling_base();
        let y_lo = desc.base_step(lo);
        let y_hi = if hi == 0.5 || hi == 1.0 {
            1.0
        } else {
            desc.base_step(hi)
        };
        let mut l = part.locate(y_lo);
        let (mut x_from, mut y_from) = (lo, y_lo);
        loop {
            let right = part.left(l) + part.width(l);
            let last = right >= y_hi || l + 1 == part.len();
            let y_to = if last { y_hi } else { right };
            let x_to = if last {
                hi
            } else {
                desc.base_preimage(right, branch).clamp(x_from, hi)
            };
            let len = if affine {
                0.5 * (y_to - y_from)
            } else {
                x_to - x_from
            };
            if len > 0.0 {
                out.push((l, k, len / w));
            }
            if last {
                break;
            }
            x_from = x_to;
            y_from = y_to;
            l += 1;
        }
    }
    out
}

/// Cross-Gram entries `∫_{I_k} ψ_p (ψ_q ∘ T) dx` of the linear basis by
/// composite two-point Gauss quadrature on `s / 2` panels per cell.
fn linear_cross_gram(
    desc: &MapDescriptor,
    part: &Partition,
    k: usize,
    s: usize,
) -> Vec<(usize, usize, f64)> {
    let (a, w) = (part.left(k), part.width(k));
    let h = 2.0 / s as f64;
    let mut out = Vec::with_capacity(4 * s);
    for j in 0..s / 2 {
        for sx in [
            h * (j as f64 + GAUSS2_OFFSET),
            h * (j as f64 + 1.0 - GAUSS2_OFFSET),
        ] {
            let y = desc.base_step(a + w * sx);
            let l = part.locate(y);
            let sy = ((y - part.left(l)) / part.width(l)).clamp(0.0, 1.0);
            for p in 0..2 {
                for q in 0..2 {
                    out.push((
                        2 * k + p,
                        2 * l + q,
                        w / s as f64 * Basis::psi(p, sx) * Basis::psi(q, sy),
                    ));
                }
            }
        }
    }
    out
}

/// Stationary vector of the column-stochastic matrix `m`, by power
/// iteration until every entry moves by less than `1e-14` relative.
fn stationary(m: &Csr, start: &[f64]) -> Vec<f64> {
    let mut pi = start.to_vec();
    let mut next = vec![0.0; pi.len()];
    for _ in 0..1_000_000 {
        m.mul_blocks(&pi, 1, &mut next);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let residual = pi
            .iter()
            .zip(&next)
            .filter(|(_, &b)| b > 0.0)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        std::mem::swap(&mut pi, &mut next);
        if residual < 1e-14 {
            break;
        }
    }
    pi
}

impl UlamOperator {
    pub fn build(desc: &MapDescriptor, cfg: &UlamConfig) -> Result<Self> {
        if desc.is_baker() {
            return domain(
                "no Ulam operator is built for baker kinds; discretise desc.base_map() instead",
            );
        }
        if cfg.samples_per_cell < 32 {
            return domain(format!(
                "samples_per_cell = {} is below 32",
                cfg.samples_per_cell
            ));
        }
        if cfg.basis == Basis::PiecewiseLinear {
            if !desc.preserves_lebesgue() {
                return domain("the piecewise-linear basis needs a Lebesgue-preserving map");
            }
            if !cfg.samples_per_cell.is_multiple_of(2) {
                return domain("the piecewise-linear basis needs an even samples_per_cell");
            }
        }
        let partition = Partition::for_map(desc, cfg.cells, cfg.mesh)?;
        let n = partition.len();
        let s = cfg.samples_per_cell;
        let nb = cfg.basis.functions();

        let fwd: Vec<(usize, usize, f64)> = (0..n)
            .into_par_iter()
            .flat_map_iter(|k| exact_fractions(desc, &partition, k))
            .collect();
        let cross: Vec<(usize, usize, f64)> = if nb == 2 {
            (0..n)
                .into_par_iter()
                .flat_map_iter(|k| linear_cross_gram(desc, &partition, k, s))
                .collect()
        } else {
            Vec::new()
        };
        let forward = Csr::from_triplets(n, n, fwd);
        for l in 0..n {
            if forward.row(l).next().is_none() {
                return Err(Error::EmptyCell(l));
            }
        }
        let widths: Vec<f64> = (0..n).map(|k| partition.width(k)).collect();
        let weights = if desc.preserves_lebesgue() {
            widths.clone()
        } else {
            stationary(&forward, &widths)
        };
        if let Some(k) = weights.iter().position(|&p| !(p > 0.0)) {
            return Err(Error::EmptyCell(k));
        }

        let (gram, transfer, koopman) = match cfg.basis {
            Basis::PiecewiseConstant => {
                let mut t = Vec::with_capacity(forward.nnz());
                for l in 0..n {
                    t.extend(
                        forward
                            .row(l)
                            .map(|(k, m)| (l, k, weights[k] * m / weights[l])),
                    );
                }
                (
                    weights.clone(),
                    Csr::from_triplets(n, n, t),
                    forward.transpose(),
                )
            }
            Basis::PiecewiseLinear => {
                let gram: Vec<f64> = widths.iter().flat_map(|&w| [w, w]).collect();
                let t = cross
                    .iter()
                    .map(|&(kp, lq, a)| (lq, kp, a / gram[lq]))
                    .collect();
                let u = cross
                    .iter()
                    .map(|&(kp, lq, a)| (kp, lq, a / gram[kp]))
                    .collect();
                (
                    gram,
                    Csr::from_triplets(2 * n, 2 * n, t),
                    Csr::from_triplets(2 * n, 2 * n, u),
                )
            }
        };
        Ok(Self {
            desc: *desc,
            partition,
            basis: cfg.basis,
            samples_per_cell: s,
            forward,
            weights,
            gram,
            transfer,
            koopman,
        })
    }

    pub fn descriptor(&self) -> &MapDescriptor {
        &self.desc
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn grid_size(&self) -> usize {
        self.partition.len()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn samples_per_cell(&self) -> usize {
        self.samples_per_cell
    }

    /// Invariant mass of each cell.
    pub fn cell_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Fraction of cell `j` mapped into cell `i`.
    pub fn forward_fraction(&self, i: usize, j: usize) -> f64 {
        self.forward.get(i, j)
    }

    pub fn forward_matrix(&self) -> &Csr {
        &self.forward
    }

    pub fn zeros(&self, dim: usize) -> GridFunction {
        GridFunction::zeros(self.grid_size(), self.basis, dim)
    }

    pub fn constant(&self, value: &[f64]) -> GridFunction {
        GridFunction::constant(self.grid_size(), self.basis, value)
    }

    /// Galerkin projection of a base-only observable.
    pub fn project(&self, obs: &Observable) -> Result<GridFunction> {
        if !obs.is_base_only() {
            return domain(format!(
                "observable {} depends on the fiber coordinate",
                obs.name()
            ));
        }
        let d = obs.dim();
        let nb = self.basis.functions();
        let mut coeffs = vec![0.0; self.grid_size() * nb * d];
        coeffs
            .par_chunks_mut(nb * d)
            .enumerate()
            .for_each(|(k, c)| {
                let (a, w) = (self.partition.left(k), self.partition.width(k));
                let mut buf = vec![0.0; d];
                for &(s, g) in &GAUSS5 {
                    obs.eval_into(Point::on_line(a + w * s), &mut buf);
                    for p in 0..nb {
                        let psi = Basis::psi(p, s);
                        for (ci, b) in c[p * d..(p + 1) * d].iter_mut().zip(&buf) {
                            *ci += g * psi * b;
                        }
                    }
                }
            });
        GridFunction::from_coeffs(self.grid_size(), self.basis, d, coeffs)
    }

    /// Projection with the invariant mean removed.
    pub fn project_centered(&self, obs: &Observable) -> Result<GridFunction> {
        let mut f = self.project(obs)?;
        let mean = self.integral(&f)?;
        f.shift(&mean);
        Ok(f)
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.cells() != self.grid_size() || f.basis() != self.basis {
            return Err(Error::Dimension {
                expected: self.grid_size(),
                got: f.cells(),
            });
        }
        Ok(())
    }

    /// `P f`.
    pub fn transfer(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let mut out = self.zeros(f.dim());
        self.transfer
            .mul_blocks(f.coeffs(), f.dim(), out.coeffs_mut());
        Ok(out)
    }

    /// `U f = f ∘ T` projected back onto the grid.
    pub fn koopman(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let mut out = self.zeros(f.dim());
        self.koopman
            .mul_blocks(f.coeffs(), f.dim(), out.coeffs_mut());
        Ok(out)
    }

    /// `∫ f dμ`.
    pub fn integral(&self, f: &GridFunction) -> Result<Vec<f64>> {
        self.check(f)?;
        let mut out = vec![0.0; f.dim()];
        for k in 0..self.grid_size() {
            for (o, c) in out.iter_mut().zip(f.coeff(k, 0)) {
                *o += self.weights[k] * c;
            }
        }
        Ok(out)
    }

    /// `∫ f ⊗ g dμ`.
    pub fn inner(&self, f: &GridFunction, g: &GridFunction) -> Result<Matrix> {
        self.check(f)?;
        f.check_compatible(g)?;
        let d = f.dim();
        let mut out = Matrix::zeros(d);
        for (dof, &gk) in self.gram.iter().enumerate() {
            let a = &f.coeffs()[dof * d..(dof + 1) * d];
            let b = &g.coeffs()[dof * d..(dof + 1) * d];
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += gk * a[i] * b[j];
                }
            }
        }
        Ok(out)
    }

    pub fn norm(&self, f: &GridFunction, p: NormKind) -> Result<f64> {
        self.check(f)?;
        let n = self.grid_size();
        let d = f.dim();
        let euclid = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(match (p, self.basis) {
            (NormKind::L1, Basis::PiecewiseConstant) => (0..n)
                .map(|k| self.weights[k] * euclid(f.coeff(k, 0)))
                .sum(),
            (NormKind::L1, Basis::PiecewiseLinear) if d == 1 => (0..n)
                .map(|k| {
                    self.weights[k] * grid::abs_linear_integral(f.coeff(k, 0)[0], f.coeff(k, 1)[0])
                })
                .sum(),
            (NormKind::L1, Basis::PiecewiseLinear) => (0..n)
                .map(|k| {
                    self.weights[k]
                        * GAUSS5
                            .iter()
                            .map(|&(s, g)| g * euclid(&f.value_in_cell(k, s)))
                            .sum::<f64>()
                })
                .sum(),
            (NormKind::L2, _) => (0..self.gram.len())
                .map(|dof| self.gram[dof] * euclid(&f.coeffs()[dof * d..(dof + 1) * d]).powi(2))
                .sum::<f64>()
                .sqrt(),
            (NormKind::Linf, Basis::PiecewiseConstant) => {
                (0..n).map(|k| euclid(f.coeff(k, 0))).fold(0.0, f64::max)
            }
            (NormKind::Linf, Basis::PiecewiseLinear) => (0..n)
                .map(|k| euclid(&f.value_in_cell(k, 0.0)).max(euclid(&f.value_in_cell(k, 1.0))))
                .fold(0.0, f64::max),
        })
    }

    /// Value of `f` at `x`.
    pub fn evaluate(&self, f: &GridFunction, x: f64) -> Vec<f64> {
        let k = self.partition.locate(x);
        let s = (x - self.partition.left(k)) / self.partition.width(k);
        f.value_in_cell(k, s)
    }

    /// Writes the dense cell-fraction matrix and cell weights.
    ///
    /// Layout (little endian): `b"ULAM"`, `u32` grid size `N`, `u64` byte
    /// offset of the weights; then `N × N` row-major `f64` entries with
    /// entry `(i, j)` the fraction of cell `j` mapped into cell `i`; then
    /// `N` cell weights.
    pub fn write_dense<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.grid_size();
        let offset = 16 + 8 * (n as u64) * (n as u64);
        out.write_all(b"ULAM")?;
        out.write_all(&(n as u32).to_le_bytes())?;
        out.write_all(&offset.to_le_bytes())?;
        for x in self.forward.to_dense() {
            out.write_all(&x.to_le_bytes())?;
        }
        for w in &self.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn save_dense(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_dense(file)
    }
}

/// Piecewise-constant Ulam operator on the default mesh.
pub fn build_ulam(
    desc: &MapDescriptor,
    cells: usize,
    samples_per_cell: usize,
) -> Result<UlamOperator> {
    UlamOperator::build(desc, &UlamConfig::new(cells, samples_per_cell))
}

/// `P^n v`; `n = 0` returns `v` unchanged.
pub fn apply_transfer(op: &UlamOperator, v: &GridFunction, n: usize) -> Result<GridFunction> {
    op.check(v)?;
    let mut f = v.clone();
    for _ in 0..n {
        f = op.transfer(&f)?;
    }
    Ok(f)
}

/// `|P(v ∘ T) − v|₁` on the grid.
pub fn koopman_check(op: &UlamOperator, v: &GridFunction) -> Result<f64> {
    let back = op.transfer(&op.koopman(v)?)?;
    op.norm(&back.sub(v), NormKind::L1)
}

/// `|P^n v|_p` for `n = 0..=n_max`.
pub fn decay_series(
    op: &UlamOperator,
    v: &GridFunction,
    n_max: usize,
    p: NormKind,
) -> Result<DecaySeries> {
    let mut norms = Vec::with_capacity(n_max + 1);
    let mut f = v.clone();
    for n in 0..=n_max {
        norms.push((n, op.norm(&f, p)?));
        if n < n_max {
            f = op.transfer(&f)?;
        }
    }
    Ok(DecaySeries::new(p, norms, vec![], 0))
}

/// The `L¹` Gordin series `|P^n v|₁`, `n ≤ n_max`, with the contraction
/// property `|P^n v|₁ ≤ |v|₁` enforced.
pub fn gordin_l1_diagnostic(
    op: &UlamOperator,
    v: &GridFunction,
    n_max: usize,
) -> Result<DecaySeries> {
    if n_max < 8 {
        return domain(format!("n_max = {n_max} is below 8"));
    }
    let series = decay_series(op, v, n_max, NormKind::L1)?;
    let v1 = series.norms[0].1;
    if let Some(&(n, x)) = series
        .norms
        .iter()
        .find(|&&(_, x)| x > v1 * (1.0 + 1e-9) + 1e-15)
    {
        return Err(Error::Invariant(format!(
            "|P^{n} v|_1 = {x:e} exceeds |v|_1 = {v1:e}"
        )));
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::BuiltinObservable;
    use proptest::prelude::*;

    fn doubling(n: usize) -> UlamOperator {
        build_ulam(&MapDescriptor::doubling(), n, 64).unwrap()
    }

    fn exact_l1(op: &UlamOperator, f: &GridFunction, g: impl Fn(f64) -> f64) -> f64 {
        let m = 64;
        (0..op.grid_size())
            .map(|k| {
                let (a, w) = (op.partition().left(k), op.partition().width(k));
                (0..m)
                    .map(|i| {
                        let s = (i as f64 + 0.5) / m as f64;
                        (f.value_in_cell(k, s)[0] - g(a + w * s)).abs() * w / m as f64
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn n4_preimage_weights() {
        let op = doubling(4);
        assert_eq!(op.forward_fraction(0, 0), 0.5);
        assert_eq!(op.forward_fraction(0, 2), 0.5);
        assert_eq!(op.forward_fraction(0, 1), 0.0);
        for j in 0..4 {
            let col: f64 = (0..4).map(|i| op.forward_fraction(i, j)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transfer_of_centered_x_halves_it() {
        let op = doubling(1 << 12);
        let v = op.project(&Observable::centered_x()).unwrap();
        let pv = apply_transfer(&op, &v, 1).unwrap();
        let err = exact_l1(&op, &pv, |x| (x - 0.5) / 2.0);
        assert!(err < 1e-3, "{err}");
        assert_eq!(apply_transfer(&op, &v, 0).unwrap(), v);
    }

    #[test]
    fn refinement_halves_error() {
        let err = |n| {
            let op = doubling(n);
            let pv = op
                .transfer(&op.project(&Observable::centered_x()).unwrap())
                .unwrap();
            exact_l1(&op, &pv, |x| (x - 0.5) / 2.0)
        };
        let ratio = err(1 << 11) / err(1 << 10);
        assert!((0.3..=0.8).contains(&ratio), "{ratio}");
    }

    #[test]
    fn cosine_is_annihilated() {
        let op = doubling(1 << 12);
        let v = op.project(&Observable::cosine()).unwrap();
        let pv = op.transfer(&v).unwrap();
        assert!(op.norm(&pv, NormKind::Linf).unwrap() < 1e-3);
    }

    #[test]
    fn constant_is_fixed_for_every_map() {
        for desc in [
            MapDescriptor::doubling(),
            MapDescriptor::lsv(0.25).unwrap(),
            MapDescriptor::lsv(0.6).unwrap(),
        ] {
            let op = build_ulam(&desc, 1024, 32).unwrap();
            let one = op.constant(&[1.0]);
            let p = apply_transfer(&op, &one, 5).unwrap();
            let dev = op.norm(&p.sub(&one), NormKind::Linf).unwrap();
            assert!(dev < 1e-10, "{desc:?}: {dev}");
            assert!((op.cell_weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn integrals_preserved() {
        let op = build_ulam(&MapDescriptor::lsv(0.25).unwrap(), 2048, 32).unwrap();
        let v = op.project(&Observable::cosine()).unwrap();
        let base = op.integral(&v).unwrap()[0];
        let mut f = v;
        for _ in 0..60 {
            f = op.transfer(&f).unwrap();
            assert!((op.integral(&f).unwrap()[0] - base).abs() < 1e-8);
        }
    }

    #[test]
    fn koopman_identity() {
        let op = doubling(1 << 12);
        let v = op.project(&Observable::centered_x()).unwrap();
        assert!(koopman_check(&op, &v).unwrap() < 5e-3);
        assert!(koopman_check(&op, &op.constant(&[2.0])).unwrap() < 1e-10);
        let lsv = build_ulam(&MapDescriptor::lsv(0.25).unwrap(), 1 << 12, 32).unwrap();
        let c = lsv.project(&Observable::cosine()).unwrap();
        assert!(koopman_check(&lsv, &c).unwrap() < 1e-2);
    }

    #[test]
    fn linear_basis_is_exact_for_doubling() {
        let cfg = UlamConfig::new(1 << 12, 64).with_basis(Basis::PiecewiseLinear);
        let op = UlamOperator::build(&MapDescriptor::doubling(), &cfg).unwrap();
        let v = op.project(&Observable::centered_x()).unwrap();
        let series = gordin_l1_diagnostic(&op, &v, 20).unwrap();
        for &(n, x) in &series.norms {
            let exact = 0.25 * 0.5f64.powi(n as i32);
            assert!((x / exact - 1.0).abs() < 1e-9, "n={n}: {x} vs {exact}");
        }
        assert!(koopman_check(&op, &v).unwrap() < 1e-12);
    }

    #[test]
    fn zero_series() {
        let op = doubling(256);
        let s = gordin_l1_diagnostic(&op, &op.zeros(1), 10).unwrap();
        assert!(s.norms.iter().all(|&(_, x)| x == 0.0));
        assert!(gordin_l1_diagnostic(&op, &op.zeros(1), 4).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(build_ulam(&MapDescriptor::uniform_baker(), 64, 32).is_err());
        assert!(build_ulam(&MapDescriptor::doubling(), 64, 16).is_err());
        assert!(build_ulam(&MapDescriptor::doubling(), 1, 32).is_err());
        let p1 = UlamConfig::new(64, 32).with_basis(Basis::PiecewiseLinear);
        assert!(UlamOperator::build(&MapDescriptor::lsv(0.3).unwrap(), &p1).is_err());
        let op = doubling(64);
        assert!(op
            .transfer(&GridFunction::zeros(32, Basis::PiecewiseConstant, 1))
            .is_err());
        assert!(op.project(&Observable::centered_y()).is_err());
    }

    #[test]
    fn dense_dump_header() {
        let op = doubling(8);
        let mut buf = Vec::new();
        op.write_dense(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"ULAM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 8);
        let off = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
        assert_eq!(off, 16 + 8 * 64);
        assert_eq!(buf.len(), off + 8 * 8);
        let w0 = f64::from_le_bytes(buf[off..off + 8].try_into().unwrap());
        assert_eq!(w0, 0.125);
    }

    #[test]
    fn lsv_cell_weights_follow_the_density_singularity() {
        let op = build_ulam(&MapDescriptor::lsv(0.5).unwrap(), 2048, 32).unwrap();
        let part = op.partition();
        let density = |k: usize| op.cell_weights()[k] / part.width(k);
        let near_zero = part.locate(1e-4);
        let mid = part.locate(0.7);
        assert!(density(near_zero) > 5.0 * density(mid));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn l1_contraction(gamma in 0.0f64..0.8, a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let op = build_ulam(&MapDescriptor::lsv(gamma).unwrap(), 512, 32).unwrap();
            let obs = Observable::custom("mix", 1, 2.0, None, true, move |p, out| {
                out[0] = a * (6.0 * p.base).sin() + b * p.base;
            });
            let v = op.project_centered(&obs).unwrap();
            let s = gordin_l1_diagnostic(&op, &v, 12).unwrap();
            prop_assert!(s.norms.iter().all(|&(_, x)| x <= s.norms[0].1 * (1.0 + 1e-9) + 1e-15));
        }
    }

    #[test]
    fn builtin_observables_project() {
        let op = doubling(128);
        let f = op
            .project(&Observable::builtin(BuiltinObservable::DoublingPair))
            .unwrap();
        assert_eq!(f.dim(), 2);
        let mean = op.integral(&f).unwrap();
        assert!(mean.iter().all(|m| m.abs() < 1e-3));
    }
}
