use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

/// Least-squares line through `(x, y)`; returns `(slope, intercept, rss)`.
fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    Some((slope, intercept, rss))
}

/// A sequence of norms `|P^n v|` (or correlation magnitudes) indexed by `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecaySeries {
    pub p: NormKind,
    pub norms: Vec<(usize, f64)>,
    pub stderr: Vec<f64>,
    /// Log-log slope over the second half of the range.
    pub fitted_exponent: Option<f64>,
    /// Fitted per-step ratio over the second half of the range.
    pub geometric_rate: Option<f64>,
    pub tail_cutoff: usize,
    /// Sum of the recorded norms with `n ≥ tail_cutoff`.
    pub tail_sum: f64,
    pub warnings: Vec<String>,
    power_rss: Option<f64>,
    geometric_rss: Option<f64>,
}

impl DecaySeries {
    pub fn new(
        p: NormKind,
        norms: Vec<(usize, f64)>,
        stderr: Vec<f64>,
        tail_cutoff: usize,
    ) -> Self {
        let stderr = if stderr.is_empty() {
            vec![0.0; norms.len()]
        } else {
            stderr
        };
        assert_eq!(stderr.len(), norms.len());
        let n_max = norms.last().map_or(0, |&(n, _)| n);
        let fit_range: Vec<(usize, f64)> = norms
            .iter()
            .copied()
            .filter(|&(n, v)| n >= 1 && 2 * n >= n_max && v > 0.0)
            .collect();
        let log_log: Vec<(f64, f64)> = fit_range
            .iter()
            .map(|&(n, v)| ((n as f64).ln(), v.ln()))
            .collect();
        let lin_log: Vec<(f64, f64)> = fit_range.iter().map(|&(n, v)| (n as f64, v.ln())).collect();
        let power = linear_fit(&log_log);
        let geometric = linear_fit(&lin_log);

        let mut warnings = Vec::new();
        let bumps = norms
            .windows(2)
            .filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-9) + 1e-300)
            .count();
        if bumps > 0 {
            warnings.push(format!("series is non-monotone at {bumps} lags"));
        }
        if fit_range.len() < 3 && norms.iter().any(|&(_, v)| v > 0.0) {
            warnings.push("too few positive norms in the fit range".into());
        }
        let tail_sum = norms
            .iter()
            .filter(|&&(n, _)| n >= tail_cutoff)
            .map(|&(_, v)| v)
            .sum();
        Self {
            p,
            norms,
            stderr,
            fitted_exponent: power.map(|f| f.0),
            geometric_rate: geometric.map(|f| f.0.exp()),
            tail_cutoff,
            tail_sum,
            warnings,
            power_rss: power.map(|f| f.2),
            geometric_rss: geometric.map(|f| f.2),
        }
    }

    pub fn n_max(&self) -> usize {
        self.norms.last().map_or(0, |&(n, _)| n)
    }

    pub fn value(&self, n: usize) -> Option<f64> {
        self.norms.iter().find(|&&(m, _)| m == n).map(|&(_, v)| v)
    }

    /// Estimate of `Σ_{n > n_max}` from whichever of the geometric and
    /// power-law fits matches the fit range better. Infinite when the
    /// fitted decay is not summable.
    pub fn extrapolated_tail(&self) -> f64 {
        let Some(&(n_max, last)) = self.norms.last() else {
            return 0.0;
        };
        if last <= 0.0 {
            return 0.0;
        }
        let geometric = self
            .geometric_rate
            .filter(|&r| r < 1.0)
            .map(|r| last * r / (1.0 - r));
        let power = self
            .fitted_exponent
            .filter(|&a| a < -1.0)
            .map(|a| last * n_max as f64 / (-a - 1.0));
        match (geometric, power) {
            (Some(g), Some(p)) => {
                if self.geometric_rss.unwrap_or(f64::INFINITY)
                    <= self.power_rss.unwrap_or(f64::INFINITY)
                {
                    g
                } else {
                    p
                }
            }
            (Some(g), None) => g,
            (None, Some(p)) => p,
            (None, None) => {
                // no law fits once the sequence sits at round-off
                let peak = self.norms.iter().map(|&(_, x)| x).fold(0.0, f64::max);
                if last <= 64.0 * f64::EPSILON * peak {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "norm", "stderr"])?;
        for (&(n, v), s) in self.norms.iter().zip(&self.stderr) {
            w.write_record([n.to_string(), format!("{v:e}"), format!("{s:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_power_and_geometric_laws() {
        let power: Vec<_> = (0..=48)
            .map(|n| (n, 2.0 * ((n + 1) as f64).powf(-3.0)))
            .collect();
        let s = DecaySeries::new(NormKind::L1, power, vec![], 0);
        assert!((s.fitted_exponent.unwrap() + 3.0).abs() < 0.2);
        let geo: Vec<_> = (0..=48)
            .map(|n| (n, 0.25 * 0.5f64.powi(n as i32)))
            .collect();
        let g = DecaySeries::new(NormKind::L1, geo, vec![], 0);
        assert!((g.geometric_rate.unwrap() - 0.5).abs() < 1e-12);
        assert!((g.tail_sum - 0.5).abs() < 1e-12);
        assert!((g.extrapolated_tail() - 0.25 * 0.5f64.powi(48)).abs() < 1e-20);
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn zero_series_and_warnings() {
        let z = DecaySeries::new(
            NormKind::L1,
            (0..=10).map(|n| (n, 0.0)).collect(),
            vec![],
            0,
        );
        assert_eq!(z.tail_sum, 0.0);
        assert!(z.fitted_exponent.is_none());
        assert_eq!(z.extrapolated_tail(), 0.0);
        let bumpy = DecaySeries::new(
            NormKind::L2,
            vec![(0, 1.0), (1, 2.0), (2, 0.5), (3, 0.1)],
            vec![],
            1,
        );
        assert_eq!(bumpy.warnings.len(), 2);
        assert!((bumpy.tail_sum - 2.6).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let s = DecaySeries::new(
            NormKind::L1,
            vec![(0, 0.25), (1, 0.125)],
            vec![0.0, 0.01],
            0,
        );
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,norm,stderr\n0,2.5e-1,0e0\n"));
    }
}
