use std::io::Write;
use std::path::Path;

use crate::error::{domain, Error, Result};
use crate::maps::Orbit;

/// `(W_n, 𝕎_n)` sampled on the grid `t_i = i/n`, `i = 0..=⌊nK⌋`.
///
/// `W_n(t_i) = n^{-1/2} Σ_{j<i} v_j` and
/// `𝕎_n(t_i) = n^{-1} Σ_{0≤p<q<i} v_p ⊗ v_q`. Paths are stored row-major,
/// one row per grid time.
#[derive(Clone, Debug)]
pub struct PathPair {
    pub n: usize,
    pub horizon: f64,
    dim: usize,
    w: Vec<f64>,
    ww: Option<Vec<f64>>,
    /// `n^{-1} Σ_{j<i} v_j ⊗ v_j`, kept for the shuffle identity.
    quad: Option<Vec<f64>>,
}

fn steps_for(orbit: &Orbit, n: usize, horizon: f64) -> Result<usize> {
    if n == 0 || !(horizon > 0.0) {
        return domain(format!("need n ≥ 1 and K > 0, got n = {n}, K = {horizon}"));
    }
    let steps = (n as f64 * horizon).floor() as usize;
    if orbit.len() < steps {
        return Err(Error::Length {
            needed: steps,
            available: orbit.len(),
        });
    }
    Ok(steps)
}

/// The Birkhoff-sum path `W_n` on `[0, K]`.
pub fn wip_path(orbit: &Orbit, n: usize, horizon: f64) -> Result<PathPair> {
    let steps = steps_for(orbit, n, horizon)?;
    let d = orbit.dim();
    let scale = 1.0 / (n as f64).sqrt();
    let mut w = vec![0.0; (steps + 1) * d];
    let mut sum = vec![0.0; d];
    for i in 0..steps {
        for (s, x) in sum.iter_mut().zip(orbit.value(i)) {
            *s += x;
        }
        for (o, s) in w[(i + 1) * d..(i + 2) * d].iter_mut().zip(&sum) {
            *o = s * scale;
        }
    }
    Ok(PathPair {
        n,
        horizon,
        dim: d,
        w,
        ww: None,
        quad: None,
    })
}

/// `W_n` together with the iterated sums `𝕎_n`, built with the recurrence
/// `𝕎(t_{j+1}) = 𝕎(t_j) + (Σ_{i<j} v_i) ⊗ v_j / n`.
pub fn iterated_path(orbit: &Orbit, n: usize, horizon: f64) -> Result<PathPair> {
    let steps = steps_for(orbit, n, horizon)?;
    let d = orbit.dim();
    let dd = d * d;
    let scale = 1.0 / (n as f64).sqrt();
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; (steps + 1) * d];
    let mut ww = vec![0.0; (steps + 1) * dd];
    let mut quad = vec![0.0; (steps + 1) * dd];
    let mut sum = vec![0.0; d];
    let mut acc = vec![0.0; dd];
    let mut diag = vec![0.0; dd];
    for i in 0..steps {
        let v = orbit.value(i);
        for p in 0..d {
            for q in 0..d {
                acc[p * d + q] += sum[p] * v[q];
                diag[p * d + q] += v[p] * v[q];
            }
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        let r = i + 1;
        for (o, s) in w[r * d..(r + 1) * d].iter_mut().zip(&sum) {
            *o = s * scale;
        }
        for (o, a) in ww[r * dd..(r + 1) * dd].iter_mut().zip(&acc) {
            *o = a * inv_n;
        }
        for (o, a) in quad[r * dd..(r + 1) * dd].iter_mut().zip(&diag) {
            *o = a * inv_n;
        }
    }
    Ok(PathPair {
        n,
        horizon,
        dim: d,
        w,
        ww: Some(ww),
        quad: Some(quad),
    })
}

impl PathPair {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid times, `⌊nK⌋ + 1`.
    pub fn len(&self) -> usize {
        self.w.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn has_iterated(&self) -> bool {
        self.ww.is_some()
    }

    /// `W_n(t_i)`.
    pub fn w(&self, i: usize) -> &[f64] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    /// `𝕎_n(t_i)`, row-major `d × d`.
    pub fn ww(&self, i: usize) -> Option<&[f64]> {
        let dd = self.dim * self.dim;
        self.ww.as_ref().map(|ww| &ww[i * dd..(i + 1) * dd])
    }

    /// Grid index of the càdlàg value at time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        ((t * self.n as f64).floor().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn w_at(&self, t: f64) -> &[f64] {
        self.w(self.index_at(t))
    }

    pub fn ww_at(&self, t: f64) -> Option<&[f64]> {
        self.ww(self.index_at(t))
    }

    /// Largest relative defect of `W ⊗ W = 𝕎 + 𝕎ᵀ + n^{-1} Σ v ⊗ v` over
    /// the grid, or `None` for a path without iterated sums.
    pub fn shuffle_error(&self) -> Option<f64> {
        let (ww, quad) = (self.ww.as_ref()?, self.quad.as_ref()?);
        let d = self.dim;
        let dd = d * d;
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let w = self.w(i);
            for p in 0..d {
                for q in 0..d {
                    let lhs = w[p] * w[q];
                    let rhs =
                        ww[i * dd + p * d + q] + ww[i * dd + q * d + p] + quad[i * dd + p * d + q];
                    let scale = lhs.abs().max(rhs.abs()).max(quad[i * dd + p * d + q].abs());
                    if scale > 0.0 {
                        worst = worst.max((lhs - rhs).abs() / scale);
                    }
                }
            }
        }
        Some(worst)
    }

    /// Columns `t, w_0.., ww_00, ww_01, ..` (iterated columns only when present).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|p| format!("w_{p}")));
        if self.ww.is_some() {
            header.extend((0..d * d).map(|k| format!("ww_{}{}", k / d, k % d)));
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![format!("{:e}", self.time(i))];
            row.extend(self.w(i).iter().map(|x| format!("{x:e}")));
            if let Some(ww) = self.ww(i) {
                row.extend(ww.iter().map(|x| format!("{x:e}")));
            }
            w.write_record(&row)?;
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
    use crate::maps::{sample_orbit, MapDescriptor, Observable, Point};
    use proptest::prelude::*;

    #[test]
    fn hand_examples() {
        let alt = Orbit::from_values(1, vec![1.0, -1.0, 1.0, -1.0, 1.0]).unwrap();
        let p = wip_path(&alt, 4, 1.0).unwrap();
        assert_eq!(p.w_at(1.0), &[0.0]);
        assert_eq!(p.w_at(0.2), &[0.0]);
        assert_eq!(p.w(0), &[0.0]);

        let orbit = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::centered_x(),
            Some(Point::on_line(0.1)),
            3,
            0,
            0,
        )
        .unwrap();
        let p = wip_path(&orbit, 3, 1.0).unwrap();
        assert!((p.w_at(1.0)[0] + 0.8 / 3f64.sqrt()).abs() < 1e-15);

        let (a, b, c) = (0.3, -1.2, 2.5);
        let abc = Orbit::from_values(1, vec![a, b, c]).unwrap();
        let it = iterated_path(&abc, 3, 1.0).unwrap();
        assert!((it.ww_at(1.0).unwrap()[0] - (a * b + a * c + b * c) / 3.0).abs() < 1e-15);
        assert_eq!(it.ww(1).unwrap(), &[0.0]);
        assert_eq!(it.ww(0).unwrap(), &[0.0]);
    }

    #[test]
    fn length_errors() {
        let o = Orbit::from_values(1, vec![0.0; 10]).unwrap();
        assert!(matches!(
            wip_path(&o, 6, 2.0),
            Err(Error::Length {
                needed: 12,
                available: 10
            })
        ));
        assert!(iterated_path(&o, 0, 1.0).is_err());
    }

    #[test]
    fn shuffle_identity_on_orbit() {
        let orbit = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::doubling_pair(),
            None,
            20_000,
            100,
            5,
        )
        .unwrap();
        let p = iterated_path(&orbit, 10_000, 2.0).unwrap();
        assert_eq!(p.len(), 20_001);
        assert!(p.shuffle_error().unwrap() < 1e-10);
        assert!(wip_path(&orbit, 100, 1.0)
            .unwrap()
            .shuffle_error()
            .is_none());
    }

    #[test]
    fn csv_header() {
        let o = Orbit::from_values(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        iterated_path(&o, 2, 1.0)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,w_0,w_1,ww_00,ww_01,ww_10,ww_11\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn sign_symmetry(vals in proptest::collection::vec(-1.0f64..1.0, 2..64)) {
            let n = vals.len();
            let o = Orbit::from_values(1, vals.clone()).unwrap();
            let neg = Orbit::from_values(1, vals.iter().map(|x| -x).collect()).unwrap();
            let (a, b) = (iterated_path(&o, n, 1.0).unwrap(), iterated_path(&neg, n, 1.0).unwrap());
            for i in 0..a.len() {
                prop_assert!((a.w(i)[0] + b.w(i)[0]).abs() < 1e-12);
                prop_assert!((a.ww(i).unwrap()[0] - b.ww(i).unwrap()[0]).abs() < 1e-12);
            }
            prop_assert!(a.shuffle_error().unwrap() < 1e-10);
        }
    }
}
