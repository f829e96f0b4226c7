use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{
    BasisChoice, CorrelationChoice, ExperimentConfig, ExperimentKind, ObservableSpec,
};
use crate::decomposition::{
    default_truncation, hybrid_criterion_diagnostic, invertible_decomposition, martingale_part,
    HybridConfig, InvertibleConfig, InvertibleDecomposition, KER_P_LIMIT,
};
use crate::error::{Error, Result};
use crate::homog::{
    corrected_drift, fast_slow_ensemble, homogenisation_compare, sde_ensemble, Convention,
    FastSlowConfig, SdeConfig, SlowModel,
};
use crate::maps::{
    sample_orbit, stream_for, BuiltinObservable, InitialLaw, MapDescriptor, Observable,
    DEFAULT_BURN_IN,
};
use crate::matrix::Matrix;
use crate::processes::{
    drift_matrix, iterated_path, run_ensemble, sigma_direct, sigma_green_kubo, sigma_martingale,
    wip_path, EnsembleSpec, Estimate, SigmaReport,
};
use crate::rng::derive_seed;
use crate::stats::{
    ks_normality, majority_pass, maximal_inequality_suite, sample_limit_pair, two_sample_compare,
    vote_seeds, zweimuller_robustness, MaximalSpec, ReferenceLawSampler, TestReport,
};
use crate::transfer::{
    gordin_l1_diagnostic, mc_correlations, ulam_correlations, Basis, LagCorrelations, UlamConfig,
    UlamOperator,
};

/// Paths sampled for the shuffle-identity check.
const SHUFFLE_PATHS: usize = 10;
/// Sample points written to the invertible decomposition CSV.
const PART_ROWS: usize = 1000;
/// Samples per batch for the Monte Carlo `∫ m ⊗ m` in the invertible setting.
const MART_BATCH: usize = 4096;
/// Macro times recorded per slow path; every tenth is written.
const SLOW_RECORD: usize = 100;

/// What an experiment hands back to the runner.
#[derive(Debug, Default)]
pub struct Outcome {
    /// The acceptance checks; the exit code is 0 iff all pass.
    pub verdicts: Vec<TestReport>,
    pub payload: Value,
}

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub desc: MapDescriptor,
    pub obs: Observable,
    pub seed: u64,
    out: PathBuf,
    artifacts: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let desc = cfg.map.descriptor()?;
        let obs = resolve_observable(cfg, &desc)?;
        Ok(Self {
            cfg,
            desc,
            obs,
            seed: cfg.master_seed,
            out: cfg.output_dir.clone(),
            artifacts: Vec::new(),
        })
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    fn sub_seed(&self, tag: &str) -> u64 {
        derive_seed(self.seed, tag)
    }

    /// Path of artifact `name` inside the output directory, recorded for the ledger.
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.out.join(name)
    }

    fn grid_ready(&self) -> bool {
        !self.desc.is_baker() && self.obs.is_base_only()
    }

    fn require_grid(&self, what: &str) -> Result<()> {
        if self.grid_ready() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{what} needs a base-only observable on a non-invertible map"
            )))
        }
    }

    fn operator(&self) -> Result<UlamOperator> {
        build_operator(self.cfg, &self.desc.base_map())
    }

    fn ensemble_spec(&self, tag: &str) -> EnsembleSpec {
        let p = &self.cfg.params;
        EnsembleSpec::new(
            self.desc,
            self.obs.clone(),
            p.n,
            p.replicas,
            self.sub_seed(tag),
        )
    }

    fn correlations(&self, op: Option<&UlamOperator>) -> Result<LagCorrelations> {
        let p = &self.cfg.params;
        match p.correlations {
            CorrelationChoice::Ulam => {
                self.require_grid("ulam correlations")?;
                let built;
                let op = match op {
                    Some(op) => op,
                    None => {
                        built = self.operator()?;
                        &built
                    }
                };
                ulam_correlations(op, &op.project_centered(&self.obs)?, p.lags)
            }
            CorrelationChoice::MonteCarlo => mc_correlations(
                &self.desc,
                &self.obs,
                p.lags,
                p.mc_budget,
                p.batches,
                self.sub_seed("green-kubo"),
            ),
        }
    }
}

fn build_operator(cfg: &ExperimentConfig, base: &MapDescriptor) -> Result<UlamOperator> {
    let p = &cfg.params;
    let basis = match p.basis {
        BasisChoice::Auto if base.preserves_lebesgue() => Basis::PiecewiseLinear,
        BasisChoice::Auto | BasisChoice::Constant => Basis::PiecewiseConstant,
        BasisChoice::Linear => Basis::PiecewiseLinear,
    };
    let spc = p.samples_per_cell + p.samples_per_cell % 2;
    UlamOperator::build(base, &UlamConfig::new(p.grid, spc).with_basis(basis))
}

/// Invariant mean of a base-only observable, on the Ulam grid of the base map.
fn invariant_mean(cfg: &ExperimentConfig, base: &MapDescriptor, obs: &Observable) -> Result<f64> {
    let op = build_operator(cfg, base)?;
    Ok(op.integral(&op.project(obs)?)?[0])
}

fn resolve_observable(cfg: &ExperimentConfig, desc: &MapDescriptor) -> Result<Observable> {
    let base = desc.base_map();
    let lebesgue = base.preserves_lebesgue();
    let needs = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "observable {:?} {what}",
                cfg.observable
            )))
        }
    };
    let raw_x = || Observable::builtin(BuiltinObservable::CenteredBase { mean: 0.0 });
    Ok(match cfg.observable {
        ObservableSpec::CenteredX => {
            needs(
                lebesgue,
                "is centred only on a Lebesgue-preserving base; use centered-base",
            )?;
            Observable::centered_x()
        }
        ObservableSpec::CenteredBase => {
            let mean = if lebesgue {
                0.5
            } else {
                invariant_mean(cfg, &base, &raw_x())?
            };
            Observable::builtin(BuiltinObservable::CenteredBase { mean })
        }
        ObservableSpec::Cosine => {
            needs(lebesgue, "is centred only on a Lebesgue-preserving base")?;
            Observable::cosine()
        }
        ObservableSpec::Coboundary => {
            needs(
                desc.has_doubling_base(),
                "is a coboundary only for the doubling map",
            )?;
            Observable::coboundary()
        }
        ObservableSpec::DoublingPair => {
            needs(desc.has_doubling_base(), "is defined for the doubling map")?;
            Observable::doubling_pair()
        }
        ObservableSpec::DegeneratePair => {
            needs(
                desc.has_doubling_base(),
                "is degenerate only for the doubling map",
            )?;
            Observable::degenerate_pair()
        }
        ObservableSpec::CenteredY | ObservableSpec::BakerPair => {
            needs(desc.is_baker(), "needs a baker map")?;
            let base_mean = if lebesgue {
                0.5
            } else {
                invariant_mean(cfg, &base, &raw_x())?
            };
            // the stationary fiber mean is the mass of the right branch
            let right = Observable::custom("right-branch", 1, 1.0, None, true, |p, out| {
                out[0] = if p.base >= 0.5 { 1.0 } else { 0.0 };
            });
            let fiber_mean = if lebesgue {
                0.5
            } else {
                invariant_mean(cfg, &base, &right)?
            };
            if cfg.observable == ObservableSpec::CenteredY {
                Observable::builtin(BuiltinObservable::CenteredFiber { mean: fiber_mean })
            } else {
                Observable::builtin(BuiltinObservable::BakerPair {
                    base_mean,
                    fiber_mean,
                })
            }
        }
    })
}

pub fn dispatch(ctx: &mut Context) -> Result<Outcome> {
    match ctx.cfg.experiment {
        ExperimentKind::DiagnoseGordin => diagnose_gordin(ctx),
        ExperimentKind::Decompose => decompose(ctx),
        ExperimentKind::Wip => wip(ctx),
        ExperimentKind::IteratedWip => iterated_wip(ctx),
        ExperimentKind::Sigma => sigma(ctx),
        ExperimentKind::Homogenise => homogenise(ctx),
        ExperimentKind::InequalitySuite => inequality_suite(ctx),
        ExperimentKind::Robustness => robustness(ctx),
    }
}

fn summable(name: &str, series: &crate::transfer::DecaySeries) -> TestReport {
    let total = series.norms.iter().map(|&(_, x)| x).sum::<f64>() + series.extrapolated_tail();
    let mut r = TestReport::threshold(name, total, f64::INFINITY, total.is_finite());
    if let Some(a) = series.fitted_exponent {
        r = r.with_note(format!("fitted exponent {a:.3}"));
    }
    if let Some(q) = series.geometric_rate {
        r = r.with_note(format!("geometric rate {q:.4}"));
    }
    r
}

fn diagnose_gordin(ctx: &mut Context) -> Result<Outcome> {
    let n_max = ctx.cfg.params.n_max;
    if !ctx.desc.is_baker() {
        ctx.require_grid("diagnose-gordin")?;
        let op = ctx.operator()?;
        let v = op.project_centered(&ctx.obs)?;
        let series = gordin_l1_diagnostic(&op, &v, n_max)?;
        series.save_csv(&ctx.artifact("gordin.csv"))?;
        return Ok(Outcome {
            verdicts: vec![summable("gordin-l1-summable", &series)],
            payload: json!({ "series": series }),
        });
    }
    let cfg = HybridConfig {
        seed: ctx.sub_seed("hybrid"),
        ..HybridConfig::default()
    };
    let hybrid = hybrid_criterion_diagnostic(&ctx.desc, &ctx.obs, n_max, &cfg)?;
    hybrid
        .series_minus
        .save_csv(&ctx.artifact("series_minus.csv"))?;
    hybrid
        .series_plus
        .save_csv(&ctx.artifact("series_plus.csv"))?;
    let mut verdicts = vec![summable("hybrid-minus-summable", &hybrid.series_minus)];
    if let Some(lip) = ctx.obs.lipschitz_bound() {
        let lambda = ctx.desc.fiber_contraction();
        let worst = hybrid
            .series_plus
            .norms
            .iter()
            .map(|&(n, x)| x / (lip * lambda.powi(n as i32)))
            .fold(0.0, f64::max);
        verdicts.push(
            TestReport::threshold("hybrid-plus-contraction", worst, 1.0, worst <= 1.0)
                .with_note("max over n of series_plus(n) / (Lip(v) λ^n)"),
        );
    }
    Ok(Outcome {
        verdicts,
        payload: json!({ "hybrid": hybrid }),
    })
}

fn decompose(ctx: &mut Context) -> Result<Outcome> {
    let k = ctx.cfg.params.truncation;
    if !ctx.desc.is_baker() {
        ctx.require_grid("decompose")?;
        let op = ctx.operator()?;
        let v = op.project_centered(&ctx.obs)?;
        let k = match k {
            Some(k) => k,
            None => default_truncation(&op, &v)?,
        };
        let dec = martingale_part(&op, &v, k)?;
        dec.save_csv(&ctx.artifact("decomposition.csv"))?;
        let verdicts = vec![
            TestReport::threshold(
                "ker-p",
                dec.residual_ker_p,
                KER_P_LIMIT,
                dec.residual_ker_p <= KER_P_LIMIT,
            ),
            TestReport::threshold(
                "reconstruction",
                dec.reconstruction_error,
                1e-2,
                dec.reconstruction_error < 1e-2,
            )
            .with_note(format!("truncation tail |P^k v|_1 = {:.3e}", dec.tail_norm)),
        ];
        return Ok(Outcome {
            verdicts,
            payload: json!({
                "truncation": k,
                "residual_ker_p": dec.residual_ker_p,
                "l2_cauchy_gap": dec.l2_cauchy_gap,
                "reconstruction_error": dec.reconstruction_error,
                "tail_norm": dec.tail_norm,
            }),
        });
    }
    let cfg = InvertibleConfig {
        seed: ctx.sub_seed("decomposition"),
        ..InvertibleConfig::default()
    };
    let (dec, checks) = invertible_decomposition(&ctx.desc, &ctx.obs, k, &cfg)?;
    let path = ctx.artifact("parts.csv");
    write_parts(&dec, &ctx.desc, ctx.sub_seed("parts"), &path)?;
    let verdicts = vec![
        TestReport::threshold(
            "reconstruction",
            checks.reconstruction_l2,
            1e-2,
            checks.reconstruction_l2 < 1e-2,
        ),
        TestReport::threshold(
            "e-minus-1-m",
            checks.e_minus1_l1,
            1e-2,
            checks.e_minus1_l1 < 1e-2,
        ),
    ];
    Ok(Outcome {
        verdicts,
        payload: json!({ "checks": checks }),
    })
}

/// Rows `base, fiber, component, v, m, chi_minus, chi_plus` at invariant sample points.
fn write_parts(
    dec: &InvertibleDecomposition,
    desc: &MapDescriptor,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record([
        "base",
        "fiber",
        "component",
        "v",
        "m",
        "chi_minus",
        "chi_plus",
    ])?;
    for p in stream_for(desc, InitialLaw::default(), seed, 0)?
        .step_by(7)
        .take(PART_ROWS)
    {
        let q = dec.parts(p);
        for c in 0..q.v.len() {
            w.write_record([
                format!("{:e}", p.base),
                format!("{:e}", p.fiber),
                c.to_string(),
                format!("{:e}", q.v[c]),
                format!("{:e}", q.mart[c]),
                format!("{:e}", q.chi_minus[c]),
                format!("{:e}", q.chi_plus[c]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Monte Carlo `∫ m ⊗ m dμ` for the invertible decomposition, with batch errors.
fn invertible_martingale_sigma(ctx: &Context) -> Result<Estimate> {
    let p = &ctx.cfg.params;
    let cfg = InvertibleConfig {
        truncation: p.truncation,
        seed: ctx.sub_seed("decomposition"),
        ..InvertibleConfig::default()
    };
    let dec = InvertibleDecomposition::build(&ctx.desc, &ctx.obs, &cfg)?;
    let d = ctx.obs.dim();
    let seed = ctx.sub_seed("martingale");
    let batches: Result<Vec<Matrix>> = (0..p.batches)
        .into_par_iter()
        .map(|b| {
            let mut acc = Matrix::zeros(d);
            for pt in stream_for(&ctx.desc, InitialLaw::default(), seed, b as u64)?
                .step_by(7)
                .take(MART_BATCH)
            {
                let m = dec.mart(pt.base);
                acc.add_assign(&Matrix::outer(&m, &m));
            }
            Ok(acc.scaled(1.0 / MART_BATCH as f64))
        })
        .collect();
    let batches = batches?;
    let nb = batches.len() as f64;
    let mut mean = Matrix::zeros(d);
    for b in &batches {
        mean.add_assign(b);
    }
    let mean = mean.scaled(1.0 / nb);
    let mut var = Matrix::zeros(d);
    for b in &batches {
        var.add_assign(&b.sub(&mean).map(|x| x * x));
    }
    Ok(Estimate {
        value: mean.symmetrized(),
        stderr: var.scaled(1.0 / (nb * (nb - 1.0))).map(f64::sqrt),
    })
}

/// Direct, Green-Kubo and martingale estimates of Σ plus the drift `E`.
fn sigma_report(ctx: &Context, direct: Estimate) -> Result<SigmaReport> {
    let p = &ctx.cfg.params;
    let op = if ctx.grid_ready() {
        Some(ctx.operator()?)
    } else {
        None
    };
    let corr = ctx.correlations(op.as_ref())?;
    let gk = sigma_green_kubo(&corr, p.lags)?;
    let drift = drift_matrix(&corr, p.lags)?;
    let mart = match &op {
        Some(op) => {
            let v = op.project_centered(&ctx.obs)?;
            let k = match p.truncation {
                Some(k) => k,
                None => default_truncation(op, &v)?,
            };
            Some(Estimate::exact(sigma_martingale(
                op,
                &martingale_part(op, &v, k)?,
            )?))
        }
        None if ctx.desc.is_baker() => Some(invertible_martingale_sigma(ctx)?),
        None => None,
    };
    SigmaReport::assemble(Some(direct), Some(gk), mart, Some(drift), p.degeneracy_tol)
}

fn agreement_verdicts(report: &SigmaReport) -> Vec<TestReport> {
    report
        .agreement
        .iter()
        .map(|a| {
            TestReport::threshold(
                format!("sigma-agreement/{}-{}", a.first, a.second),
                a.max_z,
                3.0,
                a.agree,
            )
        })
        .collect()
}

fn sigma(ctx: &mut Context) -> Result<Outcome> {
    let ens = run_ensemble(&ctx.ensemble_spec("direct"))?;
    let report = sigma_report(ctx, sigma_direct(&ens)?)?;
    report.save_json(&ctx.artifact("sigma.json"))?;
    Ok(Outcome {
        verdicts: agreement_verdicts(&report),
        payload: serde_json::to_value(&report)?,
    })
}

fn sigma_diagonal(ctx: &Context) -> Result<Vec<f64>> {
    let p = &ctx.cfg.params;
    let op = if ctx.grid_ready() {
        Some(ctx.operator()?)
    } else {
        None
    };
    let s = sigma_green_kubo(&ctx.correlations(op.as_ref())?, p.lags)?
        .estimate
        .value;
    Ok((0..s.dim()).map(|c| s[(c, c)]).collect())
}

fn orbit_for_path(ctx: &Context, tag: &str) -> Result<crate::maps::Orbit> {
    let p = &ctx.cfg.params;
    let steps = (p.horizon * p.n as f64).ceil() as usize;
    sample_orbit(
        &ctx.desc,
        &ctx.obs,
        None,
        steps.max(1),
        DEFAULT_BURN_IN,
        ctx.sub_seed(tag),
    )
}

fn wip(ctx: &mut Context) -> Result<Outcome> {
    let p = ctx.cfg.params.clone();
    let orbit = orbit_for_path(ctx, "path")?;
    wip_path(&orbit, p.n, p.horizon)?.save_csv(&ctx.artifact("path.csv"))?;
    let variances = sigma_diagonal(ctx)?;
    let mut per_seed = Vec::new();
    let mut verdicts = Vec::new();
    let seeds = vote_seeds(ctx.sub_seed("vote"));
    let mut runs = Vec::new();
    for (i, &s) in seeds.iter().enumerate() {
        let spec = EnsembleSpec::new(ctx.desc, ctx.obs.clone(), p.n, p.replicas, s);
        let ens = run_ensemble(&spec)?;
        if i == 0 {
            ens.save_csv(&ctx.artifact("ensemble.csv"))?;
        }
        runs.push(ens);
    }
    for (c, &var) in variances.iter().enumerate() {
        let reports: Vec<TestReport> = runs
            .iter()
            .zip(&seeds)
            .map(|(ens, &s)| {
                Ok(
                    ks_normality(format!("ks-normality/{c}"), &ens.w_component(c), var)?
                        .with_seed(s),
                )
            })
            .collect::<Result<_>>()?;
        let passes = reports.iter().filter(|r| r.passed).count();
        let ps: Vec<String> = reports
            .iter()
            .map(|r| format!("{:.4}", r.p_value.unwrap_or(f64::NAN)))
            .collect();
        verdicts.push(
            TestReport::threshold(
                format!("wip-normality/{c}"),
                passes as f64,
                2.0,
                majority_pass(&reports),
            )
            .with_note(format!(
                "seeds passing out of 3; p = [{}]; variance {var:.6}",
                ps.join(", ")
            )),
        );
        per_seed.extend(reports);
    }
    Ok(Outcome {
        verdicts,
        payload: json!({ "variances": variances, "per_seed": per_seed }),
    })
}

fn iterated_wip(ctx: &mut Context) -> Result<Outcome> {
    let p = ctx.cfg.params.clone();
    let d = ctx.obs.dim();
    let mut verdicts = Vec::new();

    let mut worst: f64 = 0.0;
    for i in 0..SHUFFLE_PATHS {
        let orbit = orbit_for_path(ctx, &format!("path-{i}"))?;
        let path = iterated_path(&orbit, p.n, p.horizon)?;
        worst = worst.max(path.shuffle_error().unwrap_or(f64::INFINITY));
        if i == 0 {
            path.save_csv(&ctx.artifact("path.csv"))?;
        }
    }
    verdicts.push(TestReport::threshold(
        "shuffle-identity",
        worst,
        1e-10,
        worst < 1e-10,
    ));

    let ens = run_ensemble(&ctx.ensemble_spec("ensemble"))?;
    ens.save_csv(&ctx.artifact("ensemble.csv"))?;
    let report = sigma_report(ctx, sigma_direct(&ens)?)?;
    report.save_json(&ctx.artifact("sigma.json"))?;
    let drift = report
        .drift_e
        .as_ref()
        .ok_or_else(|| Error::Invariant("missing drift".into()))?;

    let (mean, se) = ens.mean_ww();
    let mut z: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let s = se[(a, b)].hypot(drift.estimate.stderr[(a, b)]);
            let diff = (mean[(a, b)] - drift.estimate.value[(a, b)]).abs();
            z = z.max(if s > 0.0 {
                diff / s
            } else if diff < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            });
        }
    }
    verdicts.push(
        TestReport::threshold("iterated-mean", z, 3.0, z <= 3.0)
            .with_note("max over entries of |mean WW(1) - E| in combined stderr"),
    );

    let deg = &report.degeneracy;
    let mut deg_report = TestReport::threshold(
        "degeneracy",
        deg.eigenvalues.first().copied().unwrap_or(f64::NAN),
        deg.tol,
        true,
    )
    .with_note(if deg.degenerate {
        "degenerate"
    } else {
        "non-degenerate"
    });
    if let Some(wit) = &deg.witness {
        deg_report = deg_report.with_note(format!("witness {wit:?}"));
    }
    verdicts.push(deg_report);

    if deg.degenerate {
        verdicts.push(
            TestReport::threshold("reference-law", 0.0, 0.0, true)
                .with_note("skipped: the reference law needs a non-degenerate covariance"),
        );
    } else {
        let sigma = report
            .best_sigma()
            .ok_or_else(|| Error::Invariant("no sigma estimate".into()))?;
        let sampler = ReferenceLawSampler::new(sigma, drift.estimate.value.clone())?;
        let reference = sample_limit_pair(&sampler, p.replicas, ctx.sub_seed("reference"))?;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for a in 0..d {
            for b in 0..d {
                xs.push(ens.ww_entry(a, b));
                ys.push(reference.iter().map(|s| s.ww[(a, b)]).collect());
            }
        }
        verdicts.push(two_sample_compare("reference-law", &xs, &ys)?);
    }
    Ok(Outcome {
        verdicts,
        payload: json!({
            "sigma": report,
            "mean_ww": mean,
            "mean_ww_stderr": se,
            "shuffle_max_relative_error": worst,
        }),
    })
}

fn homogenise(ctx: &mut Context) -> Result<Outcome> {
    let p = ctx.cfg.params.clone();
    if ctx.obs.dim() != 2 {
        return Err(Error::Config(
            "homogenise drives the planar model and needs a 2-d observable".into(),
        ));
    }
    let model = SlowModel::planar(p.drift);
    let fs = FastSlowConfig {
        record_points: SLOW_RECORD,
        ..FastSlowConfig::new(model.clone(), ctx.desc, ctx.obs.clone(), p.epsilon)
    };
    let fast = fast_slow_ensemble(&fs, p.replicas, ctx.sub_seed("fast-slow"))?;
    fast.save_csv(&ctx.artifact("fast_slow.csv"), SLOW_RECORD / 10)?;

    let op = if ctx.grid_ready() {
        Some(ctx.operator()?)
    } else {
        None
    };
    let corr = ctx.correlations(op.as_ref())?;
    let sigma = sigma_green_kubo(&corr, p.lags)?.estimate.value;
    let e = drift_matrix(&corr, p.lags)?.estimate.value;

    let master = ctx.seed;
    let run = |conv: Convention, tag: &str| -> Result<_> {
        let drift = corrected_drift(&model, &e, conv)?;
        let cfg = SdeConfig::matching(&fs, drift, sigma.clone());
        sde_ensemble(&cfg, p.sde_replicas, derive_seed(master, tag), tag)
    };
    let sde = run(p.convention, "sde")?;
    sde.save_csv(&ctx.artifact("sde.csv"), SLOW_RECORD / 10)?;
    let mut verdicts = homogenisation_compare(&fast, &sde)?;
    let mut control = Vec::new();
    if p.convention != Convention::Uncorrected {
        let plain = run(Convention::Uncorrected, "sde-uncorrected")?;
        control = homogenisation_compare(&fast, &plain)?;
        let detected = control
            .iter()
            .find(|r| r.test_name == "mean/1")
            .map(|r| (r.statistic, !r.passed))
            .unwrap_or((f64::NAN, false));
        verdicts.push(
            TestReport::threshold("uncorrected-detected", detected.0, 3.0, detected.1)
                .with_note("the uncorrected SDE must fail the mean test on the second component"),
        );
    }
    Ok(Outcome {
        verdicts,
        payload: json!({ "sigma": sigma, "drift_e": e, "uncorrected": control }),
    })
}

fn inequality_suite(ctx: &mut Context) -> Result<Outcome> {
    ctx.require_grid("inequality-suite")?;
    let op = Arc::new(ctx.operator()?);
    let verdicts = maximal_inequality_suite(&MaximalSpec::new(ctx.ensemble_spec("maximal")), &op)?;
    Ok(Outcome {
        verdicts,
        payload: Value::Null,
    })
}

fn robustness(ctx: &mut Context) -> Result<Outcome> {
    let p = &ctx.cfg.params;
    let law = InitialLaw::Uniform {
        lo: p.nu_lo,
        hi: p.nu_hi,
    };
    let report = zweimuller_robustness(
        &ctx.desc,
        &ctx.obs,
        law,
        p.n,
        p.replicas,
        ctx.sub_seed("robustness"),
    )?;
    Ok(Outcome {
        verdicts: vec![report],
        payload: Value::Null,
    })
}

/// Writes `value` as pretty JSON followed by a newline.
pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}
