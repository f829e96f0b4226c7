//! Distributional tests: Kolmogorov-Smirnov normality and two-sample
//! comparisons, the simulated limit law of `(W, 𝕎)`, maximal-inequality
//! checks and the changed-initial-law robustness test.

mod inequality;
mod reference;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};
use crate::rng::derive_seed;

pub use inequality::{
    maximal_inequality_suite, zweimuller_robustness, MaximalSpec, RHS_SAFETY, SMALL_N,
};
pub use reference::{
    resolution_shift, sample_limit_pair, LimitSample, ReferenceLawSampler, DEFAULT_FINE_STEPS,
};

/// p-value floor for the distributional tests.
pub const P_FLOOR: f64 = 0.01;

/// Outcome of one statistical or threshold check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    /// Bound compared against for threshold checks.
    pub threshold: Option<f64>,
    pub passed: bool,
    pub sample_sizes: Vec<usize>,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

impl TestReport {
    pub fn threshold(
        name: impl Into<String>,
        statistic: f64,
        threshold: f64,
        passed: bool,
    ) -> Self {
        Self {
            test_name: name.into(),
            statistic,
            p_value: None,
            threshold: Some(threshold),
            passed,
            sample_sizes: Vec::new(),
            seed: None,
            notes: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of a KS distance `d` at effective sample size `ne`,
/// with Stephens' small-sample correction.
pub fn ks_p_value(d: f64, ne: f64) -> f64 {
    let root = ne.sqrt();
    kolmogorov_q((root + 0.12 + 0.11 / root) * d)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return domain("KS tests need at least one sample");
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return domain("KS samples must be finite");
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// One-sample KS test of `samples` against `N(0, variance)`.
pub fn ks_normality(name: impl Into<String>, samples: &[f64], variance: f64) -> Result<TestReport> {
    if !(variance > 0.0) {
        return domain(format!(
            "reference variance must be positive, got {variance}"
        ));
    }
    let s = sorted(samples)?;
    let normal =
        Normal::new(0.0, variance.sqrt()).map_err(|e| crate::Error::Domain(e.to_string()))?;
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    Ok(TestReport {
        test_name: name.into(),
        statistic: d,
        p_value: Some(p),
        threshold: None,
        passed: p > P_FLOOR,
        sample_sizes: vec![s.len()],
        seed: None,
        notes: Vec::new(),
    })
}

/// Two-sample KS distance and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok((d, ks_p_value(d, na * nb / (na + nb))))
}

/// Coordinatewise two-sample KS with a Bonferroni-adjusted p-value; the
/// statistic is the largest coordinate distance.
pub fn two_sample_compare(
    name: impl Into<String>,
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> Result<TestReport> {
    if a.len() != b.len() || a.is_empty() {
        return domain(
            "two_sample_compare needs the same nonzero number of coordinates on both sides",
        );
    }
    let mut d_max: f64 = 0.0;
    let mut p_min: f64 = 1.0;
    let mut notes = Vec::new();
    for (c, (x, y)) in a.iter().zip(b).enumerate() {
        let (d, p) = ks_two_sample(x, y)?;
        notes.push(format!("coordinate {c}: D = {d:.4}, p = {p:.4}"));
        d_max = d_max.max(d);
        p_min = p_min.min(p);
    }
    let p = (p_min * a.len() as f64).min(1.0);
    Ok(TestReport {
        test_name: name.into(),
        statistic: d_max,
        p_value: Some(p),
        threshold: None,
        passed: p > P_FLOOR,
        sample_sizes: vec![a[0].len(), b[0].len()],
        seed: None,
        notes,
    })
}

/// The three fixed seeds derived from `master` for majority-vote criteria.
pub fn vote_seeds(master: u64) -> [u64; 3] {
    [
        derive_seed(master, "vote-0"),
        derive_seed(master, "vote-1"),
        derive_seed(master, "vote-2"),
    ]
}

/// At least two of three reports passed.
pub fn majority_pass(reports: &[TestReport]) -> bool {
    2 * reports.iter().filter(|r| r.passed).count() > reports.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(seed: u64, n: usize, sd: f64) -> Vec<f64> {
        let mut r = stream(seed, 0);
        (0..n)
            .map(|_| sd * r.sample::<f64, _>(StandardNormal))
            .collect()
    }

    #[test]
    fn kolmogorov_reference_values() {
        // standard table values of the Kolmogorov distribution
        assert!((kolmogorov_q(1.36) - 0.0494).abs() < 1e-3);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 5e-4);
        assert!((kolmogorov_q(0.5) - 0.9639).abs() < 1e-3);
    }

    #[test]
    fn normality_null_and_constant() {
        let r = ks_normality("null", &normals(11, 2000, 1.0), 1.0).unwrap();
        assert!(r.passed, "{r:?}");
        let r = ks_normality("const", &vec![0.3; 2000], 1.0).unwrap();
        assert!(r.p_value.unwrap() < 1e-6);
        let r = ks_normality("scale", &normals(12, 2000, 2.0), 1.0).unwrap();
        assert!(!r.passed);
        assert!(ks_normality("bad", &[1.0], 0.0).is_err());
    }

    #[test]
    fn two_sample_cases() {
        let a = normals(1, 1000, 1.0);
        let r =
            two_sample_compare("same", std::slice::from_ref(&a), std::slice::from_ref(&a)).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value.unwrap() > 0.99);
        let far: Vec<f64> = a.iter().map(|x| x + 100.0).collect();
        let r = two_sample_compare("far", std::slice::from_ref(&a), &[far]).unwrap();
        assert!(r.p_value.unwrap() < 1e-6);
        let r = two_sample_compare(
            "indep",
            &[a, normals(2, 1000, 1.0)],
            &[normals(3, 800, 1.0), normals(4, 800, 1.0)],
        )
        .unwrap();
        assert!(r.passed);
        assert!(two_sample_compare("x", &[vec![1.0]], &[]).is_err());
    }

    #[test]
    fn majority_rule() {
        let pass = TestReport::threshold("t", 0.0, 1.0, true);
        let fail = TestReport::threshold("t", 2.0, 1.0, false);
        assert!(majority_pass(&[pass.clone(), fail.clone(), pass.clone()]));
        assert!(!majority_pass(&[pass, fail.clone(), fail]));
        let s = vote_seeds(5);
        assert!(s[0] != s[1] && s[1] != s[2]);
    }

    proptest! {
        #[test]
        fn ks_statistic_in_unit_interval(a in proptest::collection::vec(-5.0f64..5.0, 1..50),
                                         b in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
            let (d, p) = ks_two_sample(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert!((0.0..=1.0).contains(&p));
            let r = ks_normality("p", &a, 1.0).unwrap();
            prop_assert!(r.statistic >= 0.0 && r.statistic <= 1.0);
        }
    }
}
