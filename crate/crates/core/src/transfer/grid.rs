use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local basis on each cell.
///
/// With `s ∈ [0, 1)` the relative position inside a cell, the constant basis
/// is `ψ₀ = 1` and the linear basis adds `ψ₁ = √3 (2s − 1)`, which is
/// orthonormal to `ψ₀` under normalised Lebesgue measure on the cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    #[default]
    PiecewiseConstant,
    PiecewiseLinear,
}

impl Basis {
    pub fn functions(self) -> usize {
        match self {
            Basis::PiecewiseConstant => 1,
            Basis::PiecewiseLinear => 2,
        }
    }

    #[inline]
    pub(crate) fn psi(p: usize, s: f64) -> f64 {
        if p == 0 {
            1.0
        } else {
            3f64.sqrt() * (2.0 * s - 1.0)
        }
    }
}

/// Coefficients of an `ℝ^d`-valued function in the cell basis.
///
/// Storage is cell-major, then basis function, then component.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    cells: usize,
    basis: Basis,
    dim: usize,
    coeffs: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(cells: usize, basis: Basis, dim: usize) -> Self {
        Self {
            cells,
            basis,
            dim,
            coeffs: vec![0.0; cells * basis.functions() * dim],
        }
    }

    pub fn from_coeffs(cells: usize, basis: Basis, dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = cells * basis.functions() * dim;
        if coeffs.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invariant(
                "grid function has non-finite coefficients".into(),
            ));
        }
        Ok(Self {
            cells,
            basis,
            dim,
            coeffs,
        })
    }

    /// The piecewise-constant function with the given per-cell values.
    pub fn from_cell_values(basis: Basis, dim: usize, values: &[f64]) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: values.len(),
            });
        }
        let cells = values.len() / dim;
        let mut f = Self::zeros(cells, basis, dim);
        for k in 0..cells {
            f.coeff_mut(k, 0)
                .copy_from_slice(&values[k * dim..(k + 1) * dim]);
        }
        Ok(f)
    }

    pub fn constant(cells: usize, basis: Basis, value: &[f64]) -> Self {
        let mut f = Self::zeros(cells, basis, value.len());
        for k in 0..cells {
            f.coeff_mut(k, 0).copy_from_slice(value);
        }
        f
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn coeff(&self, cell: usize, p: usize) -> &[f64] {
        let i = (cell * self.basis.functions() + p) * self.dim;
        &self.coeffs[i..i + self.dim]
    }

    #[inline]
    pub fn coeff_mut(&mut self, cell: usize, p: usize) -> &mut [f64] {
        let i = (cell * self.basis.functions() + p) * self.dim;
        &mut self.coeffs[i..i + self.dim]
    }

    /// Value at relative position `s` inside `cell`.
    pub fn value_in_cell(&self, cell: usize, s: f64) -> Vec<f64> {
        let mut out = self.coeff(cell, 0).to_vec();
        if self.basis == Basis::PiecewiseLinear {
            let psi = Basis::psi(1, s);
            for (o, c) in out.iter_mut().zip(self.coeff(cell, 1)) {
                *o += psi * c;
            }
        }
        out
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.cells != other.cells || self.basis != other.basis {
            return Err(Error::Dimension {
                expected: self.coeffs.len(),
                got: other.coeffs.len(),
            });
        }
        if self.dim != other.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: other.dim,
            });
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= a);
        out
    }

    /// Component `c` as a scalar grid function.
    pub fn component(&self, c: usize) -> Self {
        assert!(c < self.dim);
        let coeffs = self
            .coeffs
            .iter()
            .skip(c)
            .step_by(self.dim)
            .copied()
            .collect();
        Self {
            cells: self.cells,
            basis: self.basis,
            dim: 1,
            coeffs,
        }
    }

    /// Subtracts `mean` from the constant coefficients.
    pub fn shift(&mut self, mean: &[f64]) {
        for k in 0..self.cells {
            for (x, m) in self.coeff_mut(k, 0).iter_mut().zip(mean) {
                *x -= m;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}

/// `∫₀¹ |a + b √3 (2s − 1)| ds`.
pub(crate) fn abs_linear_integral(a: f64, b: f64) -> f64 {
    let r3 = 3f64.sqrt();
    let (lo, hi) = (a - r3 * b, a + r3 * b);
    if lo * hi >= 0.0 {
        return a.abs();
    }
    let root = lo.abs() / (lo.abs() + hi.abs());
    0.5 * (lo.abs() * root + hi.abs() * (1.0 - root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn abs_integral_matches_quadrature() {
        for &(a, b) in &[(0.3, 0.1), (0.0, 1.0), (-0.2, 0.5), (1.0, -0.1), (0.0, 0.0)] {
            let n = 200_000;
            let q: f64 = (0..n)
                .map(|i| {
                    let s = (i as f64 + 0.5) / n as f64;
                    (a + b * Basis::psi(1, s)).abs()
                })
                .sum::<f64>()
                / n as f64;
            assert!((abs_linear_integral(a, b) - q).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn component_and_layout() {
        let f = GridFunction::from_coeffs(
            2,
            Basis::PiecewiseLinear,
            2,
            (0..8).map(f64::from).collect(),
        )
        .unwrap();
        assert_eq!(f.coeff(1, 0), &[4.0, 5.0]);
        assert_eq!(f.component(1).coeffs(), &[1.0, 3.0, 5.0, 7.0]);
        assert!(GridFunction::from_coeffs(2, Basis::PiecewiseConstant, 1, vec![1.0]).is_err());
        assert!(GridFunction::from_coeffs(1, Basis::PiecewiseConstant, 1, vec![f64::NAN]).is_err());
    }
}
