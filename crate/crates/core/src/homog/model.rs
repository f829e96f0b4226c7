use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::matrix::Matrix;

/// `x ↦ out`, writing into a caller-provided buffer.
pub type Field = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Slow coefficients `a : ℝ^d → ℝ^d`, `b : ℝ^d → ℝ^{d×m}` and
/// `∂b`, stored as `db[α·d·m + β·m + γ] = ∂_α b^{βγ}`.
#[derive(Clone)]
pub struct SlowModel {
    pub dim: usize,
    pub noise_dim: usize,
    pub name: String,
    a: Field,
    b: Field,
    db: Field,
}

impl fmt::Debug for SlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SlowModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .finish()
    }
}

/// Choices of `g` in the planar example `a = (0, g)`, `b = diag(1, x¹)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanarDrift {
    /// `g(x) = −x²`, minus the second coordinate.
    #[default]
    NegSecond,
    /// `g(x) = −(x¹)²`.
    NegFirstSquared,
    /// `g ≡ 0`.
    Zero,
}

impl PlanarDrift {
    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            PlanarDrift::NegSecond => -x[1],
            PlanarDrift::NegFirstSquared => -x[0] * x[0],
            PlanarDrift::Zero => 0.0,
        }
    }
}

impl SlowModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        noise_dim: usize,
        a: Field,
        b: Field,
        db: Field,
    ) -> Self {
        Self {
            dim,
            noise_dim,
            name: name.into(),
            a,
            b,
            db,
        }
    }

    /// `a = (0, g(x))`, `b(x) = [[1, 0], [0, x¹]]`.
    pub fn planar(g: PlanarDrift) -> Self {
        Self::new(
            format!("planar/{g:?}"),
            2,
            2,
            Arc::new(move |x, out| {
                out[0] = 0.0;
                out[1] = g.eval(x);
            }),
            Arc::new(|x, out| {
                out.copy_from_slice(&[1.0, 0.0, 0.0, x[0]]);
            }),
            Arc::new(|_, out| {
                out.fill(0.0);
                // ∂_1 b^{22}
                out[3] = 1.0;
            }),
        )
    }

    /// Constant coefficients `a`, `b` (row-major `d × m`).
    pub fn constant(a: Vec<f64>, b: Vec<f64>, noise_dim: usize) -> Result<Self> {
        let d = a.len();
        if b.len() != d * noise_dim {
            return Err(Error::Dimension {
                expected: d * noise_dim,
                got: b.len(),
            });
        }
        Ok(Self::new(
            "constant",
            d,
            noise_dim,
            Arc::new(move |_, out| out.copy_from_slice(&a)),
            Arc::new(move |_, out| out.copy_from_slice(&b)),
            Arc::new(|_, out| out.fill(0.0)),
        ))
    }

    /// `a = 0`, `b = I`.
    pub fn additive(dim: usize) -> Self {
        let eye = Matrix::identity(dim).as_slice().to_vec();
        Self::constant(vec![0.0; dim], eye, dim).expect("square identity")
    }

    /// `d = m = 1`, `a = 0`, `b(x) = x`.
    pub fn linear_scalar() -> Self {
        Self::new(
            "linear-scalar",
            1,
            1,
            Arc::new(|_, out| out[0] = 0.0),
            Arc::new(|x, out| out[0] = x[0]),
            Arc::new(|_, out| out[0] = 1.0),
        )
    }

    pub fn a_into(&self, x: &[f64], out: &mut [f64]) {
        (self.a)(x, out)
    }

    pub fn b_into(&self, x: &[f64], out: &mut [f64]) {
        (self.b)(x, out)
    }

    pub fn db_into(&self, x: &[f64], out: &mut [f64]) {
        (self.db)(x, out)
    }

    pub fn drift_field(&self) -> Field {
        Arc::clone(&self.a)
    }

    pub fn diffusion_field(&self) -> Field {
        Arc::clone(&self.b)
    }
}

/// How the drift correction is weighted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Full correction, as in the planar example.
    #[default]
    Proposition,
    /// Correction multiplied by 1/2.
    LiteralHalf,
    /// No correction.
    Uncorrected,
}

impl Convention {
    pub fn weight(self) -> f64 {
        match self {
            Convention::Proposition => 1.0,
            Convention::LiteralHalf => 0.5,
            Convention::Uncorrected => 0.0,
        }
    }
}

/// `ã^β = a^β + w Σ_{α,γ,δ} E^{γδ} ∂_α b^{βδ} b^{αγ}` with `w` from the convention.
pub fn corrected_drift(model: &SlowModel, e: &Matrix, convention: Convention) -> Result<Field> {
    if e.dim() != model.noise_dim {
        return Err(Error::Dimension {
            expected: model.noise_dim,
            got: e.dim(),
        });
    }
    if model.dim == 0 {
        return domain("slow dimension must be positive");
    }
    let (d, m) = (model.dim, model.noise_dim);
    let w = convention.weight();
    let e = e.clone();
    let model = model.clone();
    Ok(Arc::new(move |x, out| {
        model.a_into(x, out);
        if w == 0.0 {
            return;
        }
        // stack buffers cover the small systems simulated here
        let (mut b_stack, mut db_stack) = ([0.0; 16], [0.0; 64]);
        let (mut b_heap, mut db_heap) = (Vec::new(), Vec::new());
        let b: &mut [f64] = if d * m <= 16 {
            &mut b_stack[..d * m]
        } else {
            b_heap.resize(d * m, 0.0);
            &mut b_heap
        };
        let db: &mut [f64] = if d * d * m <= 64 {
            &mut db_stack[..d * d * m]
        } else {
            db_heap.resize(d * d * m, 0.0);
            &mut db_heap
        };
        model.b_into(x, b);
        model.db_into(x, db);
        for (beta, o) in out.iter_mut().enumerate() {
            let mut c = 0.0;
            for alpha in 0..d {
                for gamma in 0..m {
                    let b_ag = b[alpha * m + gamma];
                    if b_ag == 0.0 {
                        continue;
                    }
                    for delta in 0..m {
                        c += e[(gamma, delta)] * db[alpha * d * m + beta * m + delta] * b_ag;
                    }
                }
            }
            *o += w * c;
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(f: &Field, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        f(x, &mut out);
        out
    }

    #[test]
    fn constant_b_has_no_correction() {
        let model = SlowModel::constant(vec![1.0, -2.0], vec![1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let e = Matrix::from_rows(&[vec![0.3, 0.1], vec![0.7, 0.2]]).unwrap();
        for conv in [Convention::Proposition, Convention::LiteralHalf] {
            assert_eq!(
                eval(&corrected_drift(&model, &e, conv).unwrap(), &[0.4, 0.9]),
                vec![1.0, -2.0]
            );
        }
    }

    #[test]
    fn planar_gets_e12() {
        let e = Matrix::from_rows(&[vec![1.0 / 12.0, 1.0 / 24.0], vec![0.0, 1.0 / 12.0]]).unwrap();
        let model = SlowModel::planar(PlanarDrift::NegSecond);
        let f = corrected_drift(&model, &e, Convention::Proposition).unwrap();
        let out = eval(&f, &[0.3, 0.5]);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - (-0.5 + 1.0 / 24.0)).abs() < 1e-15);
        let f = corrected_drift(&model, &e, Convention::Uncorrected).unwrap();
        assert_eq!(eval(&f, &[0.3, 0.5]), vec![0.0, -0.5]);
    }

    #[test]
    fn scalar_linear_gets_e_times_x() {
        let e = Matrix::diag(&[0.2]);
        let f = corrected_drift(&SlowModel::linear_scalar(), &e, Convention::Proposition).unwrap();
        assert!((eval(&f, &[1.5])[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        assert!(corrected_drift(
            &SlowModel::planar(PlanarDrift::Zero),
            &Matrix::zeros(3),
            Convention::Proposition
        )
        .is_err());
        assert!(SlowModel::constant(vec![0.0], vec![1.0, 2.0], 1).is_err());
    }

    proptest! {
        #[test]
        fn half_convention_is_half_the_correction(
            x in proptest::array::uniform2(-3.0f64..3.0),
            e in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let e = Matrix::from_row_major(2, e.to_vec());
            let model = SlowModel::planar(PlanarDrift::NegFirstSquared);
            let full = eval(&corrected_drift(&model, &e, Convention::Proposition).unwrap(), &x);
            let half = eval(&corrected_drift(&model, &e, Convention::LiteralHalf).unwrap(), &x);
            let none = eval(&corrected_drift(&model, &e, Convention::Uncorrected).unwrap(), &x);
            for k in 0..2 {
                prop_assert!(((half[k] - none[k]) - 0.5 * (full[k] - none[k])).abs() < 1e-12);
            }
        }
    }
}
