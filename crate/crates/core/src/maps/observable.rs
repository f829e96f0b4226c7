use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Point;

/// Catalogue of built-in observables.
///
/// `CenteredBase { mean }` is `x − mean`; the other variants are centred
/// for Lebesgue measure on the base (and on the fiber for baker kinds with
/// contraction 1/2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BuiltinObservable {
    /// `x − mean`.
    CenteredBase { mean: f64 },
    /// `cos 2πx`.
    Cosine,
    /// `cos 4πx − cos 2πx = h∘T − h` for the doubling map with `h = cos 2πx`.
    Coboundary,
    /// `(x − 1/2, (2x mod 1) − 1/2 + cos 2πx)`.
    DoublingPair,
    /// `(x − 1/2, (2x mod 1) − 1/2)`; the difference of the components is a coboundary.
    DegeneratePair,
    /// `fiber − mean`.
    CenteredFiber { mean: f64 },
    /// `(x − base_mean, y − fiber_mean)`.
    BakerPair { base_mean: f64, fiber_mean: f64 },
    /// Identically zero, of the given dimension.
    Zero { dim: usize },
}

type Evaluator = dyn Fn(Point, &mut [f64]) + Send + Sync;

#[derive(Clone)]
enum Kind {
    Builtin(BuiltinObservable),
    Custom(Arc<Evaluator>),
}

/// A bounded vector-valued observable `v : Λ → ℝ^d`.
#[derive(Clone)]
pub struct Observable {
    name: String,
    dim: usize,
    kind: Kind,
    sup_norm: f64,
    lipschitz: Option<f64>,
    base_only: bool,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Observable {
    pub fn builtin(b: BuiltinObservable) -> Self {
        use BuiltinObservable::*;
        let (name, dim, sup, lip, base_only) = match b {
            CenteredBase { mean } => ("centered-x", 1, mean.max(1.0 - mean), Some(1.0), true),
            Cosine => ("cos", 1, 1.0, Some(TAU), true),
            Coboundary => ("coboundary", 1, 2.0, Some(6.0 * PI), true),
            DoublingPair => ("doubling-pair", 2, (0.25 + 2.25f64).sqrt(), None, true),
            DegeneratePair => ("degenerate-pair", 2, 0.5f64.sqrt(), None, true),
            CenteredFiber { mean } => ("centered-y", 1, mean.max(1.0 - mean), Some(1.0), false),
            BakerPair {
                base_mean,
                fiber_mean,
            } => {
                let bx = base_mean.max(1.0 - base_mean);
                let by = fiber_mean.max(1.0 - fiber_mean);
                ("baker-pair", 2, bx.hypot(by), Some(1.0), false)
            }
            Zero { dim } => ("zero", dim, 0.0, Some(0.0), true),
        };
        Self {
            name: name.into(),
            dim,
            kind: Kind::Builtin(b),
            sup_norm: sup,
            lipschitz: lip,
            base_only,
        }
    }

    /// `x − 1/2`.
    pub fn centered_x() -> Self {
        Self::builtin(BuiltinObservable::CenteredBase { mean: 0.5 })
    }

    pub fn cosine() -> Self {
        Self::builtin(BuiltinObservable::Cosine)
    }

    pub fn coboundary() -> Self {
        Self::builtin(BuiltinObservable::Coboundary)
    }

    pub fn doubling_pair() -> Self {
        Self::builtin(BuiltinObservable::DoublingPair)
    }

    pub fn degenerate_pair() -> Self {
        Self::builtin(BuiltinObservable::DegeneratePair)
    }

    pub fn centered_y() -> Self {
        Self::builtin(BuiltinObservable::CenteredFiber { mean: 0.5 })
    }

    pub fn baker_pair() -> Self {
        Self::builtin(BuiltinObservable::BakerPair {
            base_mean: 0.5,
            fiber_mean: 0.5,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self::builtin(BuiltinObservable::Zero { dim })
    }

    /// A user-supplied observable. `base_only` declares that the value does
    /// not depend on the fiber coordinate.
    pub fn custom<F>(
        name: impl Into<String>,
        dim: usize,
        sup_norm: f64,
        lipschitz: Option<f64>,
        base_only: bool,
        f: F,
    ) -> Self
    where
        F: Fn(Point, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            kind: Kind::Custom(Arc::new(f)),
            sup_norm,
            lipschitz,
            base_only,
        }
    }

    /// Composition `self ∘ g` for a pointwise map `g`; bounds are kept, the
    /// Lipschitz bound is dropped.
    pub fn compose<G>(&self, name: impl Into<String>, g: G) -> Self
    where
        G: Fn(Point) -> Point + Send + Sync + 'static,
    {
        let inner = self.clone();
        let mut out = Self::custom(name, self.dim, self.sup_norm, None, false, move |p, out| {
            inner.eval_into(g(p), out)
        });
        out.base_only = false;
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.sup_norm
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn is_base_only(&self) -> bool {
        self.base_only
    }

    pub fn as_builtin(&self) -> Option<BuiltinObservable> {
        match self.kind {
            Kind::Builtin(b) => Some(b),
            Kind::Custom(_) => None,
        }
    }

    #[inline]
    pub fn eval_into(&self, p: Point, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            Kind::Builtin(b) => eval_builtin(*b, p, out),
            Kind::Custom(f) => f(p, out),
        }
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(p, &mut out);
        out
    }

    /// Scalar value; panics when `dim != 1`.
    #[inline]
    pub fn eval_scalar(&self, p: Point) -> f64 {
        assert_eq!(self.dim, 1, "eval_scalar on a vector observable");
        let mut out = [0.0];
        self.eval_into(p, &mut out);
        out[0]
    }

    /// Component `c` as a scalar observable.
    pub fn component(&self, c: usize) -> Self {
        assert!(c < self.dim);
        let inner = self.clone();
        let dim = self.dim;
        let mut out = Self::custom(
            format!("{}[{c}]", self.name),
            1,
            self.sup_norm,
            self.lipschitz,
            self.base_only,
            move |p, out| {
                let mut buf = [0.0; 8];
                let buf = &mut buf[..dim];
                inner.eval_into(p, buf);
                out[0] = buf[c];
            },
        );
        out.base_only = self.base_only;
        out
    }
}

#[inline]
fn eval_builtin(b: BuiltinObservable, p: Point, out: &mut [f64]) {
    use BuiltinObservable::*;
    let x = p.base;
    match b {
        CenteredBase { mean } => out[0] = x - mean,
        Cosine => out[0] = (TAU * x).cos(),
        Coboundary => out[0] = (2.0 * TAU * x).cos() - (TAU * x).cos(),
        DoublingPair => {
            out[0] = x - 0.5;
            out[1] = doubled(x) - 0.5 + (TAU * x).cos();
        }
        DegeneratePair => {
            out[0] = x - 0.5;
            out[1] = doubled(x) - 0.5;
        }
        CenteredFiber { mean } => out[0] = p.fiber - mean,
        BakerPair {
            base_mean,
            fiber_mean,
        } => {
            out[0] = x - base_mean;
            out[1] = p.fiber - fiber_mean;
        }
        Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
    }
}

#[inline]
fn doubled(x: f64) -> f64 {
    if x < 0.5 {
        2.0 * x
    } else {
        2.0 * x - 1.0
    }
}
