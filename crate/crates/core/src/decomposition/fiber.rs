//! Conditional expectations given the stable-fiber σ-algebra.
//!
//! For the baker skew products the stable leaves are the vertical fibers
//! `{x} × [0, 1)`, so `E₀ w` is a function of the base coordinate: the
//! average of `w(x, ·)` against the conditional law of the fiber given the
//! base. For the uniform baker the fiber coordinate is built from past
//! branch digits, which are independent of the base point; its law is the
//! self-similar measure of `y ↦ λy + b(1 − λ)` with a fair digit `b`
//! (Lebesgue for `λ = 1/2`). No closed form exists for the intermittent
//! baker, whose conditional law is estimated from a long orbit.

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::maps::{InitialLaw, MapDescriptor, MapKind, Observable, OrbitStream, Point};
use crate::rng;

pub const QUADRATURE_NODES: usize = 256;
pub const DEFAULT_BINS: usize = 512;

/// Fiber samples kept per bin of the binned law.
const BIN_SAMPLES: usize = 256;
/// Orbit points drawn per bin when building the binned law.
const POINTS_PER_BIN: usize = 1024;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberMethod {
    /// Exact quadrature when available (uniform baker), binned otherwise.
    #[default]
    Auto,
    ExactQuadrature,
    Binned,
}

impl FiberMethod {
    pub fn resolve(self, desc: &MapDescriptor) -> Self {
        match self {
            FiberMethod::Auto if desc.kind() == MapKind::UniformBaker => {
                FiberMethod::ExactQuadrature
            }
            FiberMethod::Auto => FiberMethod::Binned,
            m => m,
        }
    }
}

#[derive(Clone, Debug)]
enum LawKind {
    /// Equal-weight nodes, the same for every base point.
    Nodes(Vec<f64>),
    /// Equal-mass bins on the base with empirical fiber samples in each.
    Binned {
        edges: Vec<f64>,
        samples: Vec<Vec<f64>>,
    },
}

/// Conditional law of the fiber coordinate given the base coordinate,
/// represented by equally weighted atoms.
#[derive(Clone, Debug)]
pub struct FiberLaw {
    kind: LawKind,
}

impl FiberLaw {
    /// The self-similar law of the uniform baker with `nodes` atoms, a power
    /// of two. Atom `i` has the first `log₂ nodes` digits of `i` and the
    /// remaining digits replaced by their mean, which for `λ = 1/2` is the
    /// midpoint rule.
    pub fn exact(desc: &MapDescriptor, nodes: usize) -> Result<Self> {
        if desc.kind() != MapKind::UniformBaker {
            return domain("exact fiber quadrature needs the uniform baker");
        }
        if !nodes.is_power_of_two() || nodes < 2 {
            return domain(format!("quadrature size {nodes} is not a power of two"));
        }
        let lambda = desc.fiber_contraction();
        let depth = nodes.trailing_zeros() as i32;
        let atoms = (0..nodes)
            .map(|i| {
                // digit k is the branch taken k + 1 steps ago and carries weight λ^k
                let head: f64 = (0..depth)
                    .map(|k| ((i >> k) & 1) as f64 * (1.0 - lambda) * lambda.powi(k))
                    .sum();
                head + 0.5 * lambda.powi(depth)
            })
            .collect();
        Ok(Self {
            kind: LawKind::Nodes(atoms),
        })
    }

    /// Empirical law from `bins` equal-mass bins of an invariant-measure orbit.
    pub fn binned(desc: &MapDescriptor, bins: usize, seed: u64) -> Result<Self> {
        if !desc.is_baker() {
            return domain("fiber laws are defined for baker kinds only");
        }
        if bins == 0 {
            return domain("need at least one bin");
        }
        let mut stream = OrbitStream::new(desc, InitialLaw::default(), rng::stream(seed, 0))?;
        let mut pts: Vec<Point> = stream.by_ref().take(bins * POINTS_PER_BIN).collect();
        // shuffle before sorting so the kept samples of a bin are not
        // consecutive orbit points
        pts.shuffle(&mut rng::stream(seed, 1));
        let mut bases: Vec<f64> = pts.iter().map(|p| p.base).collect();
        bases.sort_by(f64::total_cmp);
        let mut edges = Vec::with_capacity(bins + 1);
        edges.push(0.0);
        for b in 1..bins {
            edges.push(bases[b * bases.len() / bins]);
        }
        edges.push(1.0);
        let mut samples = vec![Vec::new(); bins];
        for p in &pts {
            let b = locate(&edges, p.base);
            if samples[b].len() < BIN_SAMPLES {
                samples[b].push(p.fiber);
            }
        }
        if let Some(b) = samples.iter().position(Vec::is_empty) {
            return Err(Error::EmptyBin(b));
        }
        Ok(Self {
            kind: LawKind::Binned { edges, samples },
        })
    }

    pub fn for_method(
        desc: &MapDescriptor,
        method: FiberMethod,
        resolution: usize,
        seed: u64,
    ) -> Result<Self> {
        match method.resolve(desc) {
            FiberMethod::ExactQuadrature => Self::exact(desc, resolution),
            _ => Self::binned(desc, resolution, seed),
        }
    }

    /// Atoms of the conditional fiber law at base `x`.
    #[inline]
    pub fn atoms(&self, x: f64) -> &[f64] {
        match &self.kind {
            LawKind::Nodes(a) => a,
            LawKind::Binned { edges, samples } => &samples[locate(edges, x)],
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.kind, LawKind::Nodes(_))
    }
}

#[inline]
fn locate(edges: &[f64], x: f64) -> usize {
    edges
        .partition_point(|&e| e <= x)
        .saturating_sub(1)
        .min(edges.len() - 2)
}

#[derive(Clone, Debug)]
enum Repr {
    Quadrature { w: Observable, law: Arc<FiberLaw> },
    Binned { edges: Vec<f64>, values: Vec<f64> },
}

/// A function of the base coordinate, typically `E₀ w`.
#[derive(Clone, Debug)]
pub struct BaseFunction {
    dim: usize,
    repr: Repr,
}

impl BaseFunction {
    pub fn quadrature(w: Observable, law: Arc<FiberLaw>) -> Self {
        Self {
            dim: w.dim(),
            repr: Repr::Quadrature { w, law },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        match &self.repr {
            Repr::Quadrature { w, law } => {
                let atoms = law.atoms(x);
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut buf = vec![0.0; self.dim];
                for &y in atoms {
                    w.eval_into(Point::new(x, y), &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += b;
                    }
                }
                let n = atoms.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
            }
            Repr::Binned { edges, values } => {
                let b = locate(edges, x);
                out.copy_from_slice(&values[b * self.dim..(b + 1) * self.dim]);
            }
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// The function as a base-only observable, for projection onto a grid.
    pub fn to_observable(&self, sup_norm: f64) -> Observable {
        let f = self.clone();
        Observable::custom(
            "fiber-average",
            self.dim,
            sup_norm,
            None,
            true,
            move |p, out| f.eval_into(p.base, out),
        )
    }
}

/// `E₀ w` as a function of the base coordinate.
///
/// `resolution` is the number of quadrature atoms for
/// [`FiberMethod::ExactQuadrature`] and the number of equal-mass bins for
/// [`FiberMethod::Binned`]; the binned estimate averages `w` over orbit
/// points falling in each bin.
pub fn fiber_conditional_expectation(
    desc: &MapDescriptor,
    w: &Observable,
    method: FiberMethod,
    resolution: usize,
    seed: u64,
) -> Result<BaseFunction> {
    if !desc.is_baker() {
        return domain("conditional expectations along fibers need a baker kind");
    }
    match method.resolve(desc) {
        FiberMethod::ExactQuadrature => Ok(BaseFunction::quadrature(
            w.clone(),
            Arc::new(FiberLaw::exact(desc, resolution)?),
        )),
        _ => binned_expectation(desc, w, resolution, seed),
    }
}

fn binned_expectation(
    desc: &MapDescriptor,
    w: &Observable,
    bins: usize,
    seed: u64,
) -> Result<BaseFunction> {
    if bins == 0 {
        return domain("need at least one bin");
    }
    let d = w.dim();
    let mut stream = OrbitStream::new(desc, InitialLaw::default(), rng::stream(seed, 0))?;
    let pts: Vec<Point> = stream.by_ref().take(bins * POINTS_PER_BIN).collect();
    let mut bases: Vec<f64> = pts.iter().map(|p| p.base).collect();
    bases.sort_by(f64::total_cmp);
    let mut edges = Vec::with_capacity(bins + 1);
    edges.push(0.0);
    for b in 1..bins {
        edges.push(bases[b * bases.len() / bins]);
    }
    edges.push(1.0);
    let mut sums = vec![0.0; bins * d];
    let mut counts = vec![0usize; bins];
    let mut buf = vec![0.0; d];
    for &p in &pts {
        let b = locate(&edges, p.base);
        w.eval_into(p, &mut buf);
        for (s, x) in sums[b * d..(b + 1) * d].iter_mut().zip(&buf) {
            *s += x;
        }
        counts[b] += 1;
    }
    if let Some(b) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyBin(b));
    }
    for (b, &c) in counts.iter().enumerate() {
        sums[b * d..(b + 1) * d]
            .iter_mut()
            .for_each(|s| *s /= c as f64);
    }
    Ok(BaseFunction {
        dim: d,
        repr: Repr::Binned {
            edges,
            values: sums,
        },
    })
}

/// Diameter of `w({x} × [0, 1))` sampled at `nodes` equispaced fiber points.
pub fn fiber_oscillation(w: &Observable, x: f64, nodes: usize) -> f64 {
    let vals: Vec<Vec<f64>> = (0..nodes)
        .map(|i| {
            w.eval(Point::new(
                x,
                i as f64 / (nodes - 1).max(1) as f64 * (1.0 - 1e-12),
            ))
        })
        .collect();
    let mut diam: f64 = 0.0;
    for (i, a) in vals.iter().enumerate() {
        for b in &vals[i + 1..] {
            let d = a
                .iter()
                .zip(b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            diam = diam.max(d);
        }
    }
    diam
}
