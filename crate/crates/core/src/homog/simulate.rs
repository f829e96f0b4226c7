use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Field, SlowModel};
use crate::error::{domain, Error, Result};
use crate::maps::{stream_for, InitialLaw, MapDescriptor, Observable};
use crate::matrix::Matrix;
use crate::rng;
use crate::stats::{two_sample_compare, TestReport};

/// Trajectories leaving this ball are reported as [`Error::Blowup`].
pub const BLOWUP_RADIUS: f64 = 1e6;

/// Default number of macro-grid intervals on `[0, t_end]`.
pub const MACRO_POINTS: usize = 1000;

/// Number of steps of size `h` covering `[0, t]`, robust to `t/h` landing a
/// rounding error below an integer.
fn steps_to(t: f64, h: f64) -> usize {
    (t / h + 1e-9).floor() as usize
}

/// `x_{n+1} = x_n + ε² a(x_n) + ε b(x_n) v(y_n)` driven by the orbit
/// `y_n` of `fast`.
#[derive(Clone, Debug)]
pub struct FastSlowConfig {
    pub epsilon: f64,
    pub xi: Vec<f64>,
    pub model: SlowModel,
    pub fast: MapDescriptor,
    pub obs: Observable,
    pub law: InitialLaw,
    pub t_end: f64,
    pub record_points: usize,
}

impl FastSlowConfig {
    pub fn new(model: SlowModel, fast: MapDescriptor, obs: Observable, epsilon: f64) -> Self {
        let xi = vec![0.0; model.dim];
        Self {
            epsilon,
            xi,
            model,
            fast,
            obs,
            law: InitialLaw::default(),
            t_end: 1.0,
            record_points: MACRO_POINTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.1) {
            return domain(format!("epsilon = {} outside (0, 0.1]", self.epsilon));
        }
        if !(self.t_end > 0.0) || self.record_points == 0 {
            return domain("t_end must be positive and record_points at least 1");
        }
        if self.xi.len() != self.model.dim {
            return Err(Error::Dimension {
                expected: self.model.dim,
                got: self.xi.len(),
            });
        }
        if self.obs.dim() != self.model.noise_dim {
            return Err(Error::Dimension {
                expected: self.model.noise_dim,
                got: self.obs.dim(),
            });
        }
        self.law.validate(&self.fast)
    }

    /// Number of fast steps, `⌊t_end/ε²⌋`.
    pub fn steps(&self) -> usize {
        steps_to(self.t_end, self.epsilon * self.epsilon)
    }
}

/// A slow path sampled on the macro grid `t_k = k t_end / R`, `k = 0..=R`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlowPath {
    pub dim: usize,
    pub times: Vec<f64>,
    values: Vec<f64>,
}

impl SlowPath {
    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.times.len() - 1)
    }
}

/// Records `x_{⌊t_k/h⌋}` while stepping; `step(x, j)` advances `x_j → x_{j+1}`.
fn run_recorded(
    xi: &[f64],
    h: f64,
    t_end: f64,
    record_points: usize,
    mut step: impl FnMut(&mut [f64], usize),
) -> Result<SlowPath> {
    let d = xi.len();
    let times: Vec<f64> = (0..=record_points)
        .map(|k| t_end * k as f64 / record_points as f64)
        .collect();
    let targets: Vec<usize> = times.iter().map(|&t| steps_to(t, h)).collect();
    let mut values = Vec::with_capacity(times.len() * d);
    let mut x = xi.to_vec();
    let mut j = 0;
    for &target in &targets {
        while j < target {
            step(&mut x, j);
            j += 1;
            if let Some(big) = x.iter().map(|v| v.abs()).find(|v| !(v <= &BLOWUP_RADIUS)) {
                return Err(Error::Blowup(big));
            }
        }
        values.extend_from_slice(&x);
    }
    Ok(SlowPath {
        dim: d,
        times,
        values,
    })
}

fn fast_slow_replica(cfg: &FastSlowConfig, seed: u64, index: u64) -> Result<SlowPath> {
    let (d, m) = (cfg.model.dim, cfg.model.noise_dim);
    let eps = cfg.epsilon;
    let mut stream = stream_for(&cfg.fast, cfg.law, seed, index)?;
    let (mut a, mut b, mut v) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; m]);
    run_recorded(&cfg.xi, eps * eps, cfg.t_end, cfg.record_points, |x, _| {
        let y = stream.next().expect("orbit streams are infinite");
        cfg.obs.eval_into(y, &mut v);
        cfg.model.a_into(x, &mut a);
        cfg.model.b_into(x, &mut b);
        for beta in 0..d {
            let bv: f64 = (0..m).map(|g| b[beta * m + g] * v[g]).sum();
            x[beta] += eps * eps * a[beta] + eps * bv;
        }
    })
}

/// One fast-slow trajectory `x̂_ε(t) = x_{⌊t/ε²⌋}` (stream 0 of `seed`).
pub fn fast_slow_simulate(cfg: &FastSlowConfig, seed: u64) -> Result<SlowPath> {
    cfg.validate()?;
    fast_slow_replica(cfg, seed, 0)
}

/// Paths of every replica, in replica order.
#[derive(Clone, Debug)]
pub struct SlowEnsemble {
    pub label: String,
    pub paths: Vec<SlowPath>,
}

impl SlowEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.paths.first().map_or(0, |p| p.dim)
    }

    /// Component `c` of the terminal value across replicas.
    pub fn terminal(&self, c: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p.terminal()[c]).collect()
    }

    /// Columns `replica, t, x_0..`; every `stride`-th macro time is written.
    pub fn write_csv<W: Write>(&self, out: W, stride: usize) -> Result<()> {
        let d = self.dim();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["replica".to_string(), "t".to_string()];
        header.extend((0..d).map(|c| format!("x_{c}")));
        w.write_record(&header)?;
        for (r, p) in self.paths.iter().enumerate() {
            let last = p.times.len() - 1;
            for k in (0..=last).filter(|k| k % stride.max(1) == 0 || *k == last) {
                let mut row = vec![r.to_string(), format!("{:e}", p.times[k])];
                row.extend(p.value(k).iter().map(|x| format!("{x:e}")));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, stride: usize) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?, stride)
    }
}

pub fn fast_slow_ensemble(
    cfg: &FastSlowConfig,
    replicas: usize,
    seed: u64,
) -> Result<SlowEnsemble> {
    cfg.validate()?;
    let paths: Result<Vec<SlowPath>> = (0..replicas)
        .into_par_iter()
        .map(|i| fast_slow_replica(cfg, seed, i as u64))
        .collect();
    Ok(SlowEnsemble {
        label: format!("fast-slow/{}", cfg.model.name),
        paths: paths?,
    })
}

/// `dX = ã(X) dt + b(X) dW` with `W` of covariance `Σ`.
#[derive(Clone)]
pub struct SdeConfig {
    pub drift: Field,
    pub diffusion: Field,
    pub dim: usize,
    pub noise_dim: usize,
    pub sigma: Matrix,
    pub dt: f64,
    pub xi: Vec<f64>,
    pub t_end: f64,
    pub record_points: usize,
}

impl SdeConfig {
    /// The SDE with `model`'s diffusion and the given drift, on the time
    /// grid of a fast-slow run (`dt = ε²`).
    pub fn matching(fs: &FastSlowConfig, drift: Field, sigma: Matrix) -> Self {
        Self {
            drift,
            diffusion: fs.model.diffusion_field(),
            dim: fs.model.dim,
            noise_dim: fs.model.noise_dim,
            sigma,
            dt: fs.epsilon * fs.epsilon,
            xi: fs.xi.clone(),
            t_end: fs.t_end,
            record_points: fs.record_points,
        }
    }
}

fn sde_replica(cfg: &SdeConfig, l: &Matrix, seed: u64, index: u64) -> Result<SlowPath> {
    let (d, m) = (cfg.dim, cfg.noise_dim);
    let mut r = rng::stream(seed, index);
    let root = cfg.dt.sqrt();
    let (mut a, mut b, mut z) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; m]);
    run_recorded(&cfg.xi, cfg.dt, cfg.t_end, cfg.record_points, |x, _| {
        for zi in z.iter_mut() {
            *zi = r.sample::<f64, _>(StandardNormal) * root;
        }
        let dw = l.mul_vec(&z);
        (cfg.drift)(x, &mut a);
        (cfg.diffusion)(x, &mut b);
        for beta in 0..d {
            let bdw: f64 = (0..m).map(|g| b[beta * m + g] * dw[g]).sum();
            x[beta] += a[beta] * cfg.dt + bdw;
        }
    })
}

fn sde_factor(cfg: &SdeConfig) -> Result<Matrix> {
    if !(cfg.dt > 0.0) || !(cfg.t_end > 0.0) || cfg.record_points == 0 {
        return domain("the SDE needs dt > 0, t_end > 0 and at least one record point");
    }
    if cfg.sigma.dim() != cfg.noise_dim {
        return Err(Error::Dimension {
            expected: cfg.noise_dim,
            got: cfg.sigma.dim(),
        });
    }
    if cfg.xi.len() != cfg.dim {
        return Err(Error::Dimension {
            expected: cfg.dim,
            got: cfg.xi.len(),
        });
    }
    cfg.sigma.psd_factor()
}

/// Euler-Maruyama with Itô increments (stream 0 of `seed`).
pub fn euler_maruyama(cfg: &SdeConfig, seed: u64) -> Result<SlowPath> {
    let l = sde_factor(cfg)?;
    sde_replica(cfg, &l, seed, 0)
}

pub fn sde_ensemble(
    cfg: &SdeConfig,
    replicas: usize,
    seed: u64,
    label: impl Into<String>,
) -> Result<SlowEnsemble> {
    let l = sde_factor(cfg)?;
    let paths: Result<Vec<SlowPath>> = (0..replicas)
        .into_par_iter()
        .map(|i| sde_replica(cfg, &l, seed, i as u64))
        .collect();
    Ok(SlowEnsemble {
        label: label.into(),
        paths: paths?,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample statistic and its delta-method standard error.
fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let var = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn covariance_se(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    mean_se(&prods)
}

fn z_report(name: String, a: (f64, f64), b: (f64, f64)) -> TestReport {
    let se = a.1.hypot(b.1);
    let diff = (a.0 - b.0).abs();
    let z = if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    TestReport::threshold(name, z, 3.0, z <= 3.0).with_note(format!(
        "{:.6} vs {:.6} (combined stderr {se:.3e})",
        a.0, b.0
    ))
}

/// Terminal-value comparison: means, variances and covariances at 3
/// combined standard errors, plus a two-sample KS test per component.
pub fn homogenisation_compare(fs: &SlowEnsemble, sde: &SlowEnsemble) -> Result<Vec<TestReport>> {
    let d = fs.dim();
    if d != sde.dim() || fs.len() < 2 || sde.len() < 2 {
        return domain("ensembles must share a dimension and hold at least two replicas");
    }
    let xs: Vec<Vec<f64>> = (0..d).map(|c| fs.terminal(c)).collect();
    let ys: Vec<Vec<f64>> = (0..d).map(|c| sde.terminal(c)).collect();
    let sizes = vec![fs.len(), sde.len()];
    let mut out = Vec::new();
    for c in 0..d {
        out.push(z_report(
            format!("mean/{c}"),
            mean_se(&xs[c]),
            mean_se(&ys[c]),
        ));
    }
    for c in 0..d {
        out.push(z_report(
            format!("variance/{c}"),
            covariance_se(&xs[c], &xs[c]),
            covariance_se(&ys[c], &ys[c]),
        ));
    }
    for p in 0..d {
        for q in (p + 1)..d {
            out.push(z_report(
                format!("covariance/{p}{q}"),
                covariance_se(&xs[p], &xs[q]),
                covariance_se(&ys[p], &ys[q]),
            ));
        }
    }
    for c in 0..d {
        out.push(two_sample_compare(
            format!("ks/{c}"),
            &xs[c..=c],
            &ys[c..=c],
        )?);
    }
    for r in &mut out {
        r.sample_sizes = sizes.clone();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homog::{corrected_drift, Convention};
    use crate::stats::ks_normality;

    #[test]
    fn step_count_is_robust() {
        assert_eq!(steps_to(1.0, 0.01 * 0.01), 10_000);
        assert_eq!(steps_to(0.5, 1e-4), 5_000);
    }

    #[test]
    fn constant_field_is_linear_in_time() {
        let model = SlowModel::constant(vec![1.0, 0.0], vec![0.0; 4], 2).unwrap();
        let mut cfg = FastSlowConfig::new(
            model,
            MapDescriptor::doubling(),
            Observable::doubling_pair(),
            0.05,
        );
        cfg.xi = vec![0.5, -1.0];
        let path = fast_slow_simulate(&cfg, 1).unwrap();
        for (k, &t) in path.times.iter().enumerate() {
            let x = path.value(k);
            assert!((x[0] - 0.5 - t).abs() < 0.0025 + 1e-12, "{t} {x:?}");
            assert_eq!(x[1], -1.0);
        }
        assert_eq!(path.times.len(), MACRO_POINTS + 1);
    }

    #[test]
    fn zero_noise_matches_drift_only() {
        let model = SlowModel::constant(vec![1.0], vec![1.0], 1).unwrap();
        let cfg = FastSlowConfig::new(model, MapDescriptor::doubling(), Observable::zero(1), 0.05);
        assert!((fast_slow_simulate(&cfg, 2).unwrap().terminal()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_configs() {
        let mut cfg = FastSlowConfig::new(
            SlowModel::additive(1),
            MapDescriptor::doubling(),
            Observable::centered_x(),
            0.5,
        );
        assert!(fast_slow_simulate(&cfg, 1).is_err());
        cfg.epsilon = 0.05;
        cfg.xi = vec![0.0, 0.0];
        assert!(matches!(
            fast_slow_simulate(&cfg, 1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn blowup_is_reported() {
        let model = SlowModel::constant(vec![1e9], vec![0.0], 1).unwrap();
        let cfg = FastSlowConfig::new(
            model,
            MapDescriptor::doubling(),
            Observable::centered_x(),
            0.05,
        );
        assert!(matches!(fast_slow_simulate(&cfg, 1), Err(Error::Blowup(_))));
    }

    #[test]
    fn fast_slow_variance_is_sigma() {
        let cfg = FastSlowConfig::new(
            SlowModel::additive(1),
            MapDescriptor::doubling(),
            Observable::centered_x(),
            0.02,
        );
        let ens = fast_slow_ensemble(
            &FastSlowConfig {
                record_points: 10,
                ..cfg
            },
            1000,
            3,
        )
        .unwrap();
        let (v, se) = covariance_se(&ens.terminal(0), &ens.terminal(0));
        assert!((v - 0.25).abs() < 3.0 * se, "{v} ± {se}");
    }

    #[test]
    fn euler_maruyama_cases() {
        let fs = FastSlowConfig::new(
            SlowModel::additive(2),
            MapDescriptor::doubling(),
            Observable::doubling_pair(),
            0.05,
        );
        let cfg = SdeConfig {
            record_points: 4,
            ..SdeConfig::matching(&fs, fs.model.drift_field(), Matrix::identity(2))
        };
        let ens = sde_ensemble(&cfg, 2000, 4, "bm").unwrap();
        assert!(ks_normality("bm0", &ens.terminal(0), 1.0).unwrap().passed);
        assert!(ks_normality("bm1", &ens.terminal(1), 1.0).unwrap().passed);

        let model = SlowModel::linear_scalar();
        let mut fs = FastSlowConfig::new(
            model,
            MapDescriptor::doubling(),
            Observable::centered_x(),
            0.05,
        );
        fs.xi = vec![1.0];
        let cfg = SdeConfig {
            record_points: 4,
            ..SdeConfig::matching(&fs, fs.model.drift_field(), Matrix::identity(1))
        };
        let (m, se) = mean_se(&sde_ensemble(&cfg, 2000, 5, "gbm").unwrap().terminal(0));
        assert!((m - 1.0).abs() < 3.0 * se);

        let ode = SlowModel::constant(vec![2.0], vec![0.0], 1).unwrap();
        let fs = FastSlowConfig::new(
            ode,
            MapDescriptor::doubling(),
            Observable::centered_x(),
            0.05,
        );
        let x = euler_maruyama(
            &SdeConfig::matching(&fs, fs.model.drift_field(), Matrix::identity(1)),
            1,
        )
        .unwrap();
        assert!((x.terminal()[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn compare_identical_passes() {
        let fs = FastSlowConfig::new(
            SlowModel::additive(2),
            MapDescriptor::doubling(),
            Observable::doubling_pair(),
            0.05,
        );
        let e = Matrix::zeros(2);
        let drift = corrected_drift(&fs.model, &e, Convention::Proposition).unwrap();
        let cfg = SdeConfig {
            record_points: 2,
            ..SdeConfig::matching(&fs, drift, Matrix::identity(2))
        };
        let ens = sde_ensemble(&cfg, 300, 6, "a").unwrap();
        let reports = homogenisation_compare(&ens, &ens).unwrap();
        assert_eq!(reports.len(), 2 + 2 + 1 + 2);
        assert!(reports.iter().all(|r| r.passed));
        let mut buf = Vec::new();
        ens.write_csv(&mut buf, 1).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("replica,t,x_0,x_1\n"));
    }
}
