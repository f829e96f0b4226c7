use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::maps::{stream_for, InitialLaw, MapDescriptor, Observable};
use crate::matrix::Matrix;

/// What to simulate: `replicas` independent orbits of length `n`, replica `i`
/// on stream `i` of `seed`.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    pub desc: MapDescriptor,
    pub obs: Observable,
    pub law: InitialLaw,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn new(desc: MapDescriptor, obs: Observable, n: usize, replicas: usize, seed: u64) -> Self {
        Self {
            desc,
            obs,
            law: InitialLaw::default(),
            n,
            replicas,
            seed,
        }
    }

    pub fn with_law(mut self, law: InitialLaw) -> Self {
        self.law = law;
        self
    }
}

/// `W_n(1)`, `𝕎_n(1)` and `max_{ℓ≤n} |Σ_{j<ℓ} v_j|²` of one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct Endpoint {
    pub w: Vec<f64>,
    pub ww: Matrix,
    pub max_sum_sq: f64,
}

/// Running `Σ v_j`, `Σ_{i<j} v_i ⊗ v_j` and the largest `|Σ_{j<ℓ} v_j|²`.
#[derive(Clone, Debug)]
pub struct EndpointAccumulator {
    dim: usize,
    sum: Vec<f64>,
    acc: Matrix,
    max_sum_sq: f64,
}

impl EndpointAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sum: vec![0.0; dim],
            acc: Matrix::zeros(dim),
            max_sum_sq: 0.0,
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        let d = self.dim;
        let a = self.acc.as_mut_slice();
        for p in 0..d {
            for q in 0..d {
                a[p * d + q] += self.sum[p] * v[q];
            }
        }
        for (s, x) in self.sum.iter_mut().zip(v) {
            *s += x;
        }
        self.max_sum_sq = self.max_sum_sq.max(self.sum.iter().map(|s| s * s).sum());
    }

    /// Endpoint normalised by `n`.
    pub fn finish(&self, n: usize) -> Endpoint {
        let scale = 1.0 / (n as f64).sqrt();
        Endpoint {
            w: self.sum.iter().map(|s| s * scale).collect(),
            ww: self.acc.scaled(1.0 / n as f64),
            max_sum_sq: self.max_sum_sq,
        }
    }
}

/// Endpoint of the first `n` values of `values`.
pub fn endpoint_of<I, V>(dim: usize, n: usize, values: I) -> Endpoint
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    let mut acc = EndpointAccumulator::new(dim);
    for v in values.into_iter().take(n) {
        acc.push(v.as_ref());
    }
    acc.finish(n)
}

/// Endpoints of every replica, in replica order.
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
    pub members: Vec<Endpoint>,
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<Ensemble> {
    if spec.n == 0 || spec.replicas == 0 {
        return domain("ensembles need n ≥ 1 and at least one replica");
    }
    spec.law.validate(&spec.desc)?;
    let d = spec.obs.dim();
    let members: Result<Vec<Endpoint>> = (0..spec.replicas)
        .into_par_iter()
        .map(|i| {
            let stream = stream_for(&spec.desc, spec.law, spec.seed, i as u64)?;
            let mut buf = vec![0.0; d];
            let mut acc = EndpointAccumulator::new(d);
            for p in stream.take(spec.n) {
                spec.obs.eval_into(p, &mut buf);
                acc.push(&buf);
            }
            Ok(acc.finish(spec.n))
        })
        .collect();
    Ok(Ensemble {
        dim: d,
        n: spec.n,
        seed: spec.seed,
        members: members?,
    })
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Component `c` of `W_n(1)` across replicas.
    pub fn w_component(&self, c: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.w[c]).collect()
    }

    /// Entry `(p, q)` of `𝕎_n(1)` across replicas.
    pub fn ww_entry(&self, p: usize, q: usize) -> Vec<f64> {
        self.members.iter().map(|m| m.ww[(p, q)]).collect()
    }

    /// Entrywise mean and standard error of `f(member)`.
    pub fn mean_of(&self, f: impl Fn(&Endpoint) -> Matrix) -> (Matrix, Matrix) {
        let n = self.len() as f64;
        let values: Vec<Matrix> = self.members.iter().map(f).collect();
        let mut mean = Matrix::zeros(self.dim);
        for v in &values {
            mean.add_assign(v);
        }
        let mean = mean.scaled(1.0 / n);
        let mut var = Matrix::zeros(self.dim);
        for v in &values {
            var.add_assign(&v.sub(&mean).map(|x| x * x));
        }
        let denom = if self.len() > 1 {
            (n - 1.0) * n
        } else {
            f64::INFINITY
        };
        (mean, var.map(|x| (x / denom).sqrt()))
    }

    /// Mean of `𝕎_n(1)` with standard errors.
    pub fn mean_ww(&self) -> (Matrix, Matrix) {
        self.mean_of(|m| m.ww.clone())
    }

    /// Columns `replica, w_0.., ww_00, ..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.dim;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["replica".to_string()];
        header.extend((0..d).map(|p| format!("w_{p}")));
        header.extend((0..d * d).map(|k| format!("ww_{}{}", k / d, k % d)));
        w.write_record(&header)?;
        for (i, m) in self.members.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(m.w.iter().map(|x| format!("{x:e}")));
            row.extend(m.ww.as_slice().iter().map(|x| format!("{x:e}")));
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
    use crate::maps::{sample_orbit, Point};
    use crate::processes::iterated_path;

    #[test]
    fn endpoint_matches_path() {
        let desc = MapDescriptor::doubling();
        let obs = Observable::doubling_pair();
        let orbit = sample_orbit(&desc, &obs, Some(Point::on_line(0.3)), 500, 0, 2).unwrap();
        let path = iterated_path(&orbit, 500, 1.0).unwrap();
        let e = endpoint_of(2, 500, (0..500).map(|j| orbit.value(j).to_vec()));
        let end = path.len() - 1;
        for p in 0..2 {
            assert!((e.w[p] - path.w(end)[p]).abs() < 1e-12);
            for q in 0..2 {
                assert!((e.ww[(p, q)] - path.ww(end).unwrap()[p * 2 + q]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reproducible_and_ordered() {
        let spec = EnsembleSpec::new(
            MapDescriptor::doubling(),
            Observable::centered_x(),
            200,
            16,
            9,
        );
        let a = run_ensemble(&spec).unwrap();
        let b = run_ensemble(&spec).unwrap();
        assert_eq!(a.members, b.members);
        let c = run_ensemble(&EnsembleSpec { seed: 10, ..spec }).unwrap();
        assert_ne!(a.members, c.members);
    }

    #[test]
    fn zero_observable() {
        let spec = EnsembleSpec::new(MapDescriptor::doubling(), Observable::zero(2), 50, 4, 1);
        let e = run_ensemble(&spec).unwrap();
        assert!(e
            .members
            .iter()
            .all(|m| m.max_sum_sq == 0.0 && m.ww.max_abs() == 0.0));
    }

    #[test]
    fn bad_law_rejected() {
        let spec = EnsembleSpec::new(
            MapDescriptor::doubling(),
            Observable::centered_x(),
            10,
            2,
            1,
        )
        .with_law(InitialLaw::Uniform { lo: 0.6, hi: 0.2 });
        assert!(run_ensemble(&spec).is_err());
    }
}
