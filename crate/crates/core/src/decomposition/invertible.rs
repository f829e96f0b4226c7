//! Two-sided decomposition for the baker skew products.
//!
//! Write `b_j = E₀(v ∘ T^j)`, a function of the base coordinate. Along the
//! stable leaf through `x`, `T^j(x, y) = (f^j x, c_j(x) + λ^j y)`, so for
//! `j ≥ 0` the value `b_j(x)` is an average of `v(f^j x, c_j(x) + λ^j ·)`
//! over the conditional fiber law. For `j < 0`, `b_j = P^{|j|} b_0` with `P`
//! the transfer operator of the base map, computed on an Ulam grid.
//!
//! With `a_j = b_j` for `j < 0` and `a_j = b_j − v∘T^j` for `j ≥ 0`,
//! `χ₋ = Σ_{j=1}^k a_{−j}`, `χ₊ = Σ_{j=0}^k a_j`, and
//!
//! ```text
//! m   = Σ_{j=−k+1}^{k+1} b_j − Σ_{j=−k}^{k} b_j ∘ T
//! v̂   = Σ_{j=0}^{k} (b_j − b_j ∘ T) + b_{k+1}
//! ```
//!
//! Both are functions of the base coordinate. The extra `b_{k+1}` in `v̂`
//! keeps `v = v̂ + χ₊∘T − χ₊` accurate to `|a_{k+1}|`: the bare
//! telescoping sum misses `v ∘ T^{k+1}`, which does not decay in `k`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::fiber::{BaseFunction, FiberLaw, FiberMethod, DEFAULT_BINS, QUADRATURE_NODES};
use crate::error::{domain, Result};
use crate::maps::{InitialLaw, MapDescriptor, Observable, OrbitStream, Point};
use crate::matrix::Matrix;
use crate::rng;
use crate::transfer::{
    mc_correlations, Basis, DecaySeries, GridFunction, NormKind, UlamConfig, UlamOperator,
};

/// Independent orbit segments used to sample the invariant measure.
const SAMPLE_STREAMS: usize = 32;

#[derive(Clone, Debug)]
pub struct InvertibleConfig {
    /// `None` picks `k` from the fiber-contraction bound and the base decay.
    pub truncation: Option<usize>,
    pub method: FiberMethod,
    /// Quadrature atoms or bins; defaults to 256 atoms, 512 bins.
    pub resolution: Option<usize>,
    /// Base Ulam grid; defaults to 4096 linear cells for doubling bases and
    /// 8192 graded constant cells otherwise.
    pub grid: Option<UlamConfig>,
    /// Sample points for the reconstruction check.
    pub samples: usize,
    /// Sample points for the `E₋₁ m` check.
    pub conditional_samples: usize,
    pub seed: u64,
}

impl Default for InvertibleConfig {
    fn default() -> Self {
        Self {
            truncation: None,
            method: FiberMethod::Auto,
            resolution: None,
            grid: None,
            samples: 100_000,
            conditional_samples: 10_000,
            seed: 0,
        }
    }
}

fn default_grid(desc: &MapDescriptor) -> UlamConfig {
    if desc.has_doubling_base() {
        UlamConfig::new(4096, 64).with_basis(Basis::PiecewiseLinear)
    } else {
        UlamConfig::new(8192, 64)
    }
}

/// Base orbit of `x` with fiber offsets: `T^j(x, y)` has base `base[j]` and
/// fiber `offset[j] + scale[j]·y`.
struct Leaf {
    base: Vec<f64>,
    offset: Vec<f64>,
    scale: Vec<f64>,
}

impl Leaf {
    fn new(desc: &MapDescriptor, x: f64, steps: usize) -> Self {
        let lambda = desc.fiber_contraction();
        let mut base = Vec::with_capacity(steps + 1);
        let mut offset = Vec::with_capacity(steps + 1);
        let mut scale = Vec::with_capacity(steps + 1);
        let (mut b, mut c, mut s) = (x, 0.0, 1.0);
        for _ in 0..=steps {
            base.push(b);
            offset.push(c);
            scale.push(s);
            let branch = if b < 0.5 { 0.0 } else { 1.0 };
            c = lambda * c + branch * (1.0 - lambda);
            s *= lambda;
            b = desc.base_step(b);
        }
        Self {
            base,
            offset,
            scale,
        }
    }

    #[inline]
    fn point(&self, j: usize, y: f64) -> Point {
        Point::new(self.base[j], self.offset[j] + self.scale[j] * y)
    }
}

/// The decomposition `v = m + χ∘T − χ`, `χ = χ₋ + χ₊`, evaluated pointwise.
#[derive(Clone, Debug)]
pub struct InvertibleDecomposition {
    desc: MapDescriptor,
    v: Observable,
    law: Arc<FiberLaw>,
    op: Arc<UlamOperator>,
    /// `b_{−j} = P^j b_0` for `j = 1..=k`.
    minus: Vec<GridFunction>,
    chi_minus: GridFunction,
    pub truncation_k: usize,
    /// `|b_{−n}|₁` for `n = 0..=k`.
    pub minus_norms: Vec<f64>,
    /// Bound on `Σ_{j>k} |a_j|_∞` from the fiber contraction.
    pub plus_tail_bound: f64,
}

/// Per-point values of the decomposition.
#[derive(Clone, Debug)]
pub struct Parts {
    pub v: Vec<f64>,
    pub chi_minus: Vec<f64>,
    pub chi_plus: Vec<f64>,
    /// `χ₊ ∘ T`.
    pub chi_plus_next: Vec<f64>,
    /// `χ₋ ∘ T`.
    pub chi_minus_next: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub mart: Vec<f64>,
}

impl InvertibleDecomposition {
    pub fn build(desc: &MapDescriptor, v: &Observable, cfg: &InvertibleConfig) -> Result<Self> {
        if !desc.is_baker() {
            return domain("the invertible decomposition needs a baker kind");
        }
        let method = cfg.method.resolve(desc);
        let resolution = cfg.resolution.unwrap_or(match method {
            FiberMethod::ExactQuadrature => QUADRATURE_NODES,
            _ => DEFAULT_BINS,
        });
        let law = Arc::new(FiberLaw::for_method(
            desc,
            method,
            resolution,
            rng::derive_seed(cfg.seed, "fiber-law"),
        )?);
        let grid = cfg.grid.unwrap_or_else(|| default_grid(desc));
        let op = Arc::new(UlamOperator::build(&desc.base_map(), &grid)?);
        let b0 = BaseFunction::quadrature(v.clone(), law.clone());
        let b0 = op.project(&b0.to_observable(v.sup_norm_bound()))?;

        let lambda = desc.fiber_contraction();
        let tail = |k: usize| match v.lipschitz_bound() {
            Some(lip) => lip * lambda.powi(k as i32 + 1) / (1.0 - lambda),
            None => f64::INFINITY,
        };
        let k = match cfg.truncation {
            Some(0) => return domain("truncation k must be at least 1"),
            Some(k) => k,
            None => {
                let plus = (1..=200).find(|&k| tail(k) < 1e-8).unwrap_or(40);
                let minus = if desc.has_doubling_base() {
                    let mut f = b0.clone();
                    let mut k = 200;
                    for j in 1..=200 {
                        f = op.transfer(&f)?;
                        if op.norm(&f, NormKind::L1)? < 1e-6 {
                            k = j;
                            break;
                        }
                    }
                    k
                } else {
                    40
                };
                plus.max(minus)
            }
        };

        let mut minus = Vec::with_capacity(k);
        let mut minus_norms = vec![op.norm(&b0, NormKind::L1)?];
        let mut f = b0;
        let mut chi_minus = op.zeros(v.dim());
        for _ in 0..k {
            f = op.transfer(&f)?;
            chi_minus.axpy(1.0, &f);
            minus_norms.push(op.norm(&f, NormKind::L1)?);
            minus.push(f.clone());
        }
        Ok(Self {
            desc: *desc,
            v: v.clone(),
            law,
            op,
            minus,
            chi_minus,
            truncation_k: k,
            minus_norms,
            plus_tail_bound: tail(k),
        })
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn descriptor(&self) -> &MapDescriptor {
        &self.desc
    }

    pub fn base_operator(&self) -> &UlamOperator {
        &self.op
    }

    /// `b_j(x)` for `j = 0..=upto`, flattened.
    fn plus_expectations(&self, leaf: &Leaf, x: f64, upto: usize) -> Vec<f64> {
        let d = self.dim();
        let atoms = self.law.atoms(x);
        let mut out = vec![0.0; d * (upto + 1)];
        let mut buf = vec![0.0; d];
        for j in 0..=upto {
            let acc = &mut out[j * d..(j + 1) * d];
            for &y in atoms {
                self.v.eval_into(leaf.point(j, y), &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            acc.iter_mut().for_each(|a| *a /= atoms.len() as f64);
        }
        out
    }

    /// `E₀(v ∘ T^j)(x)` for any integer `j`.
    pub fn conditional(&self, j: i64, x: f64) -> Vec<f64> {
        if j < 0 {
            let n = (-j) as usize;
            if n <= self.minus.len() {
                return self.op.evaluate(&self.minus[n - 1], x);
            }
            let mut f = self
                .minus
                .last()
                .cloned()
                .unwrap_or_else(|| self.op.zeros(self.dim()));
            for _ in self.minus.len()..n {
                f = self
                    .op
                    .transfer(&f)
                    .expect("grid function matches its operator");
            }
            return self.op.evaluate(&f, x);
        }
        let j = j as usize;
        let leaf = Leaf::new(&self.desc, x, j);
        self.plus_expectations(&leaf, x, j)[j * self.dim()..].to_vec()
    }

    /// `a_j(p)`.
    pub fn a(&self, j: i64, p: Point) -> Vec<f64> {
        let b = self.conditional(j, p.base);
        if j < 0 {
            return b;
        }
        let leaf = Leaf::new(&self.desc, p.base, j as usize);
        let vj = self.v.eval(leaf.point(j as usize, p.fiber));
        b.iter().zip(&vj).map(|(x, y)| x - y).collect()
    }

    pub fn chi_minus(&self, x: f64) -> Vec<f64> {
        self.op.evaluate(&self.chi_minus, x)
    }

    /// The martingale part at base `x`.
    pub fn mart(&self, x: f64) -> Vec<f64> {
        let (d, k) = (self.dim(), self.truncation_k);
        let leaf = Leaf::new(&self.desc, x, k + 1);
        let fx = leaf.base[1];
        let next = Leaf::new(&self.desc, fx, k);
        let bx = self.plus_expectations(&leaf, x, k + 1);
        let bf = self.plus_expectations(&next, fx, k);
        let chi_x = self.chi_minus(x);
        let last = self.op.evaluate(&self.minus[k - 1], x);
        let chi_f = self.chi_minus(fx);
        (0..d)
            .map(|c| {
                let plus: f64 = (0..=k + 1).map(|j| bx[j * d + c]).sum::<f64>()
                    - (0..=k).map(|j| bf[j * d + c]).sum::<f64>();
                chi_x[c] - last[c] - chi_f[c] + plus
            })
            .collect()
    }

    /// All parts at `p` in one pass.
    pub fn parts(&self, p: Point) -> Parts {
        let (d, k) = (self.dim(), self.truncation_k);
        let x = p.base;
        let leaf = Leaf::new(&self.desc, x, k + 1);
        let fx = leaf.base[1];
        let next = Leaf::new(&self.desc, fx, k);
        let bx = self.plus_expectations(&leaf, x, k + 1);
        let bf = self.plus_expectations(&next, fx, k);
        let vals: Vec<Vec<f64>> = (0..=k + 1)
            .map(|j| self.v.eval(leaf.point(j, p.fiber)))
            .collect();
        let chi_minus = self.chi_minus(x);
        let chi_minus_next = self.chi_minus(fx);
        let last = self.op.evaluate(&self.minus[k - 1], x);
        let mut out = Parts {
            v: vals[0].clone(),
            chi_minus: chi_minus.clone(),
            chi_plus: vec![0.0; d],
            chi_plus_next: vec![0.0; d],
            chi_minus_next: chi_minus_next.clone(),
            v_hat: vec![0.0; d],
            mart: vec![0.0; d],
        };
        for c in 0..d {
            let bx_sum: f64 = (0..=k).map(|j| bx[j * d + c]).sum();
            let bf_sum: f64 = (0..=k).map(|j| bf[j * d + c]).sum();
            out.chi_plus[c] = bx_sum - (0..=k).map(|j| vals[j][c]).sum::<f64>();
            out.chi_plus_next[c] = bf_sum - (1..=k + 1).map(|j| vals[j][c]).sum::<f64>();
            out.v_hat[c] = bx_sum - bf_sum + bx[(k + 1) * d + c];
            out.mart[c] =
                chi_minus[c] - last[c] - chi_minus_next[c] + bx_sum + bx[(k + 1) * d + c] - bf_sum;
        }
        out
    }

    /// `(P m)(y)` for the base transfer operator, from the two preimages of
    /// `y` weighted by `ρ(z) / (|f'(z)| ρ(y))`.
    fn transfer_of_mart(&self, y: f64) -> Vec<f64> {
        let base = self.desc.base_map();
        let density = |x: f64| {
            if base.has_doubling_base() {
                1.0
            } else {
                let part = self.op.partition();
                let c = part.locate(x);
                self.op.cell_weights()[c] / part.width(c)
            }
        };
        let slope = |z: f64| {
            if z >= 0.5 || base.has_doubling_base() {
                2.0
            } else {
                let g = base.gamma();
                1.0 + (1.0 + g) * 2f64.powf(g) * z.powf(g)
            }
        };
        let mut out = vec![0.0; self.dim()];
        let rho_y = density(y);
        for branch in [0u8, 1] {
            let z = base.base_preimage(y, branch);
            let w = density(z) / (slope(z) * rho_y);
            for (o, m) in out.iter_mut().zip(self.mart(z)) {
                *o += w * m;
            }
        }
        out
    }
}

/// Independent invariant-measure samples: `SAMPLE_STREAMS` orbit segments.
fn sample_points(desc: &MapDescriptor, count: usize, seed: u64) -> Result<Vec<Vec<Point>>> {
    let per = count.div_ceil(SAMPLE_STREAMS);
    rng::replicate(seed, SAMPLE_STREAMS, |_, r| {
        let s = OrbitStream::new(desc, InitialLaw::default(), r.clone())?;
        // spacing decorrelates samples within a segment
        Ok(s.step_by(7).take(per).collect())
    })
    .into_iter()
    .collect()
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Invertible decomposition with its empirical invariants.
#[derive(Clone, Debug, Serialize)]
pub struct InvertibleChecks {
    /// `|v − (v̂ + χ₊∘T − χ₊)|₂` over the sample.
    pub reconstruction_l2: f64,
    /// `|v − (m + χ∘T − χ)|₂`, equal to `|a_{−k} − a_{k+1}|₂`.
    pub full_reconstruction_l2: f64,
    /// `|E₋₁ m|₁`.
    pub e_minus1_l1: f64,
    pub samples: usize,
}

impl InvertibleChecks {
    pub fn holds(&self) -> bool {
        self.reconstruction_l2 < 1e-2 && self.e_minus1_l1 < 1e-2
    }
}

/// Builds the decomposition with truncation `k` and evaluates its
/// invariants on `cfg.samples` invariant-measure points.
///
/// `E₋₁ m = (P m) ∘ T` because `m` depends on the base alone, so the
/// conditional mean is evaluated through the base transfer operator.
pub fn invertible_decomposition(
    desc: &MapDescriptor,
    v: &Observable,
    k: Option<usize>,
    cfg: &InvertibleConfig,
) -> Result<(InvertibleDecomposition, InvertibleChecks)> {
    let mut cfg = cfg.clone();
    if k.is_some() {
        cfg.truncation = k;
    }
    let dec = InvertibleDecomposition::build(desc, v, &cfg)?;
    let pts: Vec<Point> = sample_points(
        desc,
        cfg.samples,
        rng::derive_seed(cfg.seed, "reconstruction"),
    )?
    .into_iter()
    .flatten()
    .take(cfg.samples)
    .collect();
    let (sq, sq_full): (f64, f64) = pts
        .par_iter()
        .map(|&p| {
            let q = dec.parts(p);
            let r: Vec<f64> = (0..q.v.len())
                .map(|c| q.v[c] - (q.v_hat[c] + q.chi_plus_next[c] - q.chi_plus[c]))
                .collect();
            let full: Vec<f64> = (0..q.v.len())
                .map(|c| {
                    let chi = q.chi_minus[c] + q.chi_plus[c];
                    let chi_next = q.chi_minus_next[c] + q.chi_plus_next[c];
                    q.v[c] - (q.mart[c] + chi_next - chi)
                })
                .collect();
            (euclid(&r).powi(2), euclid(&full).powi(2))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = pts.len() as f64;
    let cond: f64 = pts
        .par_iter()
        .take(cfg.conditional_samples)
        .map(|p| euclid(&dec.transfer_of_mart(p.base)))
        .sum::<f64>()
        / cfg.conditional_samples.min(pts.len()) as f64;
    let checks = InvertibleChecks {
        reconstruction_l2: (sq / n).sqrt(),
        full_reconstruction_l2: (sq_full / n).sqrt(),
        e_minus1_l1: cond,
        samples: pts.len(),
    };
    Ok((dec, checks))
}

#[derive(Clone, Debug)]
pub struct HybridConfig {
    pub method: FiberMethod,
    pub resolution: Option<usize>,
    pub grid: Option<UlamConfig>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            method: FiberMethod::Auto,
            resolution: None,
            grid: None,
            samples: 20_000,
            seed: 0,
        }
    }
}

/// The two series of the hybrid criterion.
#[derive(Clone, Debug, Serialize)]
pub struct HybridDiagnostic {
    /// `|E₀(v ∘ T^{−n})|₁`.
    pub series_minus: DecaySeries,
    /// `|E₀(v ∘ T^n) − v ∘ T^n|₂` with Monte Carlo standard errors.
    pub series_plus: DecaySeries,
}

/// Both halves of the hybrid `L¹`-`L²` Gordin criterion for `n ≤ n_max`.
pub fn hybrid_criterion_diagnostic(
    desc: &MapDescriptor,
    v: &Observable,
    n_max: usize,
    cfg: &HybridConfig,
) -> Result<HybridDiagnostic> {
    let inv_cfg = InvertibleConfig {
        truncation: Some(n_max.max(1)),
        method: cfg.method,
        resolution: cfg.resolution,
        grid: cfg.grid,
        seed: cfg.seed,
        ..InvertibleConfig::default()
    };
    let dec = InvertibleDecomposition::build(desc, v, &inv_cfg)?;
    let minus: Vec<(usize, f64)> = dec
        .minus_norms
        .iter()
        .take(n_max + 1)
        .copied()
        .enumerate()
        .collect();
    let series_minus = DecaySeries::new(NormKind::L1, minus, vec![], 0);

    let segments = sample_points(desc, cfg.samples, rng::derive_seed(cfg.seed, "hybrid"))?;
    let d = v.dim();
    // per segment: mean of |a_n|² for each n
    let per_segment: Vec<Vec<f64>> = segments
        .par_iter()
        .map(|seg| {
            let mut acc = vec![0.0; n_max + 1];
            for &p in seg {
                let leaf = Leaf::new(desc, p.base, n_max);
                let b = dec.plus_expectations(&leaf, p.base, n_max);
                for (n, a) in acc.iter_mut().enumerate() {
                    let vn = v.eval(leaf.point(n, p.fiber));
                    *a += (0..d).map(|c| (b[n * d + c] - vn[c]).powi(2)).sum::<f64>();
                }
            }
            acc.iter().map(|a| a / seg.len() as f64).collect()
        })
        .collect();
    let s = per_segment.len() as f64;
    let mut norms = Vec::with_capacity(n_max + 1);
    let mut stderr = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mean = per_segment.iter().map(|a| a[n]).sum::<f64>() / s;
        let var = per_segment
            .iter()
            .map(|a| (a[n] - mean).powi(2))
            .sum::<f64>()
            / (s - 1.0);
        let se_mean = (var / s).sqrt();
        let norm = mean.sqrt();
        norms.push((n, norm));
        stderr.push(if norm > 0.0 {
            se_mean / (2.0 * norm)
        } else {
            0.0
        });
    }
    let series_plus = DecaySeries::new(NormKind::L2, norms, stderr, 0);
    Ok(HybridDiagnostic {
        series_minus,
        series_plus,
    })
}

/// Both sides of `Σ_{j≥1} ∫ v ⊗ (v∘T^j) dμ = ∫ (χ ⊗ v − m ⊗ (χ₊∘T)) dμ`.
#[derive(Clone, Debug, Serialize)]
pub struct DriftIdentity {
    pub lhs: Matrix,
    pub lhs_stderr: Matrix,
    pub rhs: Matrix,
    pub rhs_stderr: Matrix,
    /// Truncation allowance added to the tolerance of every entry.
    pub allowance: f64,
    pub lags: usize,
}

impl DriftIdentity {
    /// `|lhs − rhs| ≤ 3 (combined stderr) + allowance` entrywise.
    pub fn holds(&self) -> bool {
        let d = self.lhs.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let se = self.lhs_stderr[(i, j)].hypot(self.rhs_stderr[(i, j)]);
                (self.lhs[(i, j)] - self.rhs[(i, j)]).abs() <= 3.0 * se + self.allowance
            })
        })
    }
}

/// Monte Carlo comparison of the two sides of the drift identity with
/// truncation `k`. The left side sums `lags` lag correlations from
/// `orbit_budget` orbit steps; the right side averages over
/// `orbit_budget / 64` sample points.
pub fn drift_identity_check(
    desc: &MapDescriptor,
    v: &Observable,
    k: Option<usize>,
    lags: usize,
    orbit_budget: usize,
    seed: u64,
) -> Result<DriftIdentity> {
    let cfg = InvertibleConfig {
        truncation: k,
        seed,
        ..InvertibleConfig::default()
    };
    let dec = InvertibleDecomposition::build(desc, v, &cfg)?;
    let d = v.dim();
    let corr = mc_correlations(
        desc,
        v,
        lags,
        orbit_budget,
        32,
        rng::derive_seed(seed, "drift-lhs"),
    )?;
    let sum_lags = |c: &[Matrix]| {
        let mut s = Matrix::zeros(d);
        for m in &c[1..] {
            s.add_assign(m);
        }
        s
    };
    let (lhs, lhs_stderr) = corr.batch_statistic(sum_lags);

    let segments = sample_points(
        desc,
        (orbit_budget / 64).max(SAMPLE_STREAMS * 2),
        rng::derive_seed(seed, "drift-rhs"),
    )?;
    let per_segment: Vec<Matrix> = segments
        .par_iter()
        .map(|seg| {
            let mut acc = Matrix::zeros(d);
            for &p in seg {
                let q = dec.parts(p);
                let chi: Vec<f64> = (0..d).map(|c| q.chi_minus[c] + q.chi_plus[c]).collect();
                acc.add_assign(&Matrix::outer(&chi, &q.v));
                acc.add_assign(&Matrix::outer(&q.mart, &q.chi_plus_next).scaled(-1.0));
            }
            acc.scaled(1.0 / seg.len() as f64)
        })
        .collect();
    let s = per_segment.len() as f64;
    let mut rhs = Matrix::zeros(d);
    per_segment.iter().for_each(|m| rhs.add_assign(m));
    let rhs = rhs.scaled(1.0 / s);
    let mut var = Matrix::zeros(d);
    per_segment
        .iter()
        .for_each(|m| var.add_assign(&m.sub(&rhs).map(|x| x * x)));
    let rhs_stderr = var.map(|x| (x / ((s - 1.0) * s)).sqrt());

    let k = dec.truncation_k;
    let minus_tail = DecaySeries::new(
        NormKind::L1,
        dec.minus_norms.iter().copied().enumerate().collect(),
        vec![],
        0,
    )
    .extrapolated_tail();
    let lag_tail = if lags >= k {
        minus_tail + dec.plus_tail_bound
    } else {
        f64::INFINITY
    };
    let sup = v.sup_norm_bound();
    let allowance =
        sup * (2.0 * dec.plus_tail_bound + 2.0 * dec.minus_norms[k] + minus_tail + lag_tail);
    Ok(DriftIdentity {
        lhs,
        lhs_stderr,
        rhs,
        rhs_stderr,
        allowance,
        lags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> InvertibleConfig {
        InvertibleConfig {
            grid: Some(UlamConfig::new(1024, 32).with_basis(Basis::PiecewiseLinear)),
            samples: 4000,
            conditional_samples: 1000,
            ..InvertibleConfig::default()
        }
    }

    #[test]
    fn base_only_observable_has_no_plus_part() {
        let desc = MapDescriptor::uniform_baker();
        let v = Observable::centered_x();
        let (dec, checks) = invertible_decomposition(&desc, &v, None, &quick()).unwrap();
        for &p in &[
            Point::new(0.1, 0.7),
            Point::new(0.63, 0.2),
            Point::new(0.9, 0.99),
        ] {
            let q = dec.parts(p);
            assert!(q.chi_plus[0].abs() < 1e-12 && q.chi_plus_next[0].abs() < 1e-12);
            assert!((q.v_hat[0] - q.v[0]).abs() < 1e-12);
            // m = 2v − v∘T for the doubling base
            let m = 2.0 * (p.base - 0.5) - (desc.base_step(p.base) - 0.5);
            assert!((q.mart[0] - m).abs() < 1e-6, "{} vs {m}", q.mart[0]);
        }
        assert!(checks.holds(), "{checks:?}");
        assert!(checks.full_reconstruction_l2 < 1e-5);
    }

    #[test]
    fn fiber_observable_reconstructs() {
        let desc = MapDescriptor::uniform_baker();
        let v = Observable::centered_y();
        let (dec, checks) = invertible_decomposition(&desc, &v, None, &quick()).unwrap();
        assert_eq!(dec.truncation_k, 27);
        assert!(dec.conditional(0, 0.3)[0].abs() < 1e-14);
        assert!(checks.holds(), "{checks:?}");
        assert!(checks.reconstruction_l2 < 1e-7);
        // v̂ is a function of the base coordinate
        let a = dec.parts(Point::new(0.37, 0.1)).v_hat[0];
        let b = dec.parts(Point::new(0.37, 0.8)).v_hat[0];
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_observable() {
        let desc = MapDescriptor::uniform_baker();
        let (dec, checks) =
            invertible_decomposition(&desc, &Observable::zero(2), Some(3), &quick()).unwrap();
        let q = dec.parts(Point::new(0.4, 0.4));
        for x in q
            .chi_minus
            .iter()
            .chain(&q.chi_plus)
            .chain(&q.v_hat)
            .chain(&q.mart)
        {
            assert_eq!(*x, 0.0);
        }
        assert_eq!(checks.reconstruction_l2, 0.0);
    }

    #[test]
    fn baker_pair_martingale_is_reverse_martingale_difference() {
        let desc = MapDescriptor::uniform_baker();
        let (_, checks) =
            invertible_decomposition(&desc, &Observable::baker_pair(), None, &quick()).unwrap();
        assert!(checks.holds(), "{checks:?}");
        assert!(checks.full_reconstruction_l2 < 1e-5, "{checks:?}");
    }

    #[test]
    fn hybrid_plus_series_obeys_contraction_bound() {
        let desc = MapDescriptor::uniform_baker();
        let v = Observable::baker_pair();
        let cfg = HybridConfig {
            samples: 4000,
            grid: quick().grid,
            ..HybridConfig::default()
        };
        let h = hybrid_criterion_diagnostic(&desc, &v, 12, &cfg).unwrap();
        for &(n, x) in &h.series_plus.norms {
            assert!(x <= 0.5f64.powi(n as i32), "n={n}: {x}");
        }
        assert!((h.series_plus.geometric_rate.unwrap() - 0.5).abs() < 0.05);
        let base = hybrid_criterion_diagnostic(&desc, &Observable::cosine(), 8, &cfg).unwrap();
        assert!(base.series_plus.norms.iter().all(|&(_, x)| x < 1e-12));
        // cos 2πx is in ker P, so only the n = 0 term of the minus series survives
        assert!(base.series_minus.norms[1].1 < 1e-3);
        assert!(hybrid_criterion_diagnostic(&MapDescriptor::doubling(), &v, 8, &cfg).is_err());
    }

    #[test]
    fn drift_identity_for_baker_pair() {
        let desc = MapDescriptor::uniform_baker();
        let v = Observable::baker_pair();
        let id = drift_identity_check(&desc, &v, None, 60, 1_000_000, 11).unwrap();
        assert!(id.holds(), "{id:?}");
        assert!((id.rhs[(0, 1)] - 0.25).abs() < 0.02, "{:?}", id.rhs);
        assert!((id.rhs[(0, 0)] - 1.0 / 12.0).abs() < 0.01);
    }
}
