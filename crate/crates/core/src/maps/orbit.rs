//! Orbit generation.
//!
//! Doubling-type base dynamics cannot be iterated naively in `f64`: each step
//! shifts one mantissa bit out and after about 55 steps every orbit collapses
//! onto the fixed point 0. The base coordinate of such maps is therefore held
//! as a 64-bit binary expansion. A step shifts the expansion left by one digit
//! and appends a fresh random digit at the far end, which is the exact
//! doubling map applied to a point drawn from the `2^-64`-cell of the current
//! value. Recorded coordinates are the expansion read back as `f64`, so short
//! orbits from dyadic-friendly starts (`0.1, 0.2, 0.4, ...`) are reproduced
//! exactly.

use rand::{Rng as _, RngCore};
use serde::{Deserialize, Serialize};

use super::{lsv_raw, MapDescriptor, Observable, Point, BELOW_ONE, LSV_FLOOR};
use crate::error::{domain, Error, Result};
use crate::rng::{self, Rng};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;

/// Default number of discarded iterates when sampling the invariant measure.
pub const DEFAULT_BURN_IN: usize = 10_000;

/// How the initial point of an orbit is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialLaw {
    /// A fixed starting point, no burn-in.
    Fixed { point: Point },
    /// Uniform start followed by `burn_in` discarded iterates.
    Invariant { burn_in: usize },
    /// Base coordinate uniform on `[lo, hi)` (fiber uniform), no burn-in.
    Uniform { lo: f64, hi: f64 },
}

impl Default for InitialLaw {
    fn default() -> Self {
        Self::Invariant {
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

impl InitialLaw {
    pub fn validate(&self, desc: &MapDescriptor) -> Result<()> {
        match *self {
            InitialLaw::Fixed { point } => {
                if !(0.0..1.0).contains(&point.base) {
                    return domain(format!("initial base {} outside [0, 1)", point.base));
                }
                if desc.is_baker() && !(0.0..1.0).contains(&point.fiber) {
                    return domain(format!("initial fiber {} outside [0, 1)", point.fiber));
                }
                Ok(())
            }
            InitialLaw::Invariant { .. } => Ok(()),
            InitialLaw::Uniform { lo, hi } => {
                if !(0.0 <= lo && lo < hi && hi <= 1.0) {
                    return domain(format!(
                        "initial interval [{lo}, {hi}) is not inside [0, 1]"
                    ));
                }
                Ok(())
            }
        }
    }

    fn burn_in(&self) -> usize {
        match *self {
            InitialLaw::Invariant { burn_in } => burn_in,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Base {
    /// Binary expansion of a doubling-type base coordinate.
    Bits {
        state: u64,
        reservoir: u64,
        left: u32,
    },
    Lsv {
        x: f64,
        gamma: f64,
    },
}

/// Infinite forward orbit; yields the current point, then advances.
#[derive(Clone, Debug)]
pub struct OrbitStream<R: RngCore> {
    base: Base,
    fiber: f64,
    baker: bool,
    lambda: f64,
    rng: R,
}

impl<R: RngCore> OrbitStream<R> {
    pub fn new(desc: &MapDescriptor, law: InitialLaw, mut rng: R) -> Result<Self> {
        law.validate(desc)?;
        let doubling = desc.has_doubling_base();
        // random doubling starts draw all 64 state bits; an f64 would leave
        // the low bits zero and they surface after about 53 steps
        let mut draw = |lo: f64, hi: f64| -> (f64, u64) {
            if doubling {
                let (a, b) = (to_bits(lo), to_bits(hi));
                let state = a + ((u128::from(b - a) * u128::from(rng.next_u64())) >> 64) as u64;
                (from_bits(state), state)
            } else {
                let x = (lo + (hi - lo) * rng.random::<f64>()).min(BELOW_ONE);
                (x, to_bits(x))
            }
        };
        let (base, state) = match law {
            InitialLaw::Fixed { point } => (point.base, to_bits(point.base)),
            InitialLaw::Invariant { .. } => draw(0.0, 1.0),
            InitialLaw::Uniform { lo, hi } => draw(lo, hi),
        };
        let fiber = match law {
            InitialLaw::Fixed { point } => point.fiber,
            _ if desc.is_baker() => rng.random(),
            _ => 0.0,
        };
        let base = if doubling {
            Base::Bits {
                state,
                reservoir: 0,
                left: 0,
            }
        } else {
            Base::Lsv {
                x: base.max(LSV_FLOOR),
                gamma: desc.gamma(),
            }
        };
        let mut s = Self {
            base,
            fiber: if desc.is_baker() { fiber } else { 0.0 },
            baker: desc.is_baker(),
            lambda: desc.fiber_contraction(),
            rng,
        };
        for _ in 0..law.burn_in() {
            s.advance();
        }
        Ok(s)
    }

    #[inline]
    pub fn point(&self) -> Point {
        let base = match self.base {
            Base::Bits { state, .. } => from_bits(state),
            Base::Lsv { x, .. } => x,
        };
        Point {
            base,
            fiber: self.fiber,
        }
    }

    #[inline]
    pub fn advance(&mut self) {
        let upper = match &mut self.base {
            Base::Bits {
                state,
                reservoir,
                left,
            } => {
                if *left == 0 {
                    *reservoir = self.rng.next_u64();
                    *left = 64;
                }
                let upper = *state >> 63 == 1;
                *state = (*state << 1) | (*reservoir & 1);
                *reservoir >>= 1;
                *left -= 1;
                upper
            }
            Base::Lsv { x, gamma } => {
                let upper = *x >= 0.5;
                *x = lsv_raw(*x, *gamma).max(LSV_FLOOR);
                upper
            }
        };
        if self.baker {
            let branch = if upper { 1.0 } else { 0.0 };
            self.fiber = self.lambda * self.fiber + branch * (1.0 - self.lambda);
        }
    }
}

impl<R: RngCore> Iterator for OrbitStream<R> {
    type Item = Point;

    fn next(&mut self) -> Option<Point> {
        let p = self.point();
        self.advance();
        Some(p)
    }
}

#[inline]
fn to_bits(x: f64) -> u64 {
    // saturating cast; x < 1 so overflow only on rounding at the very top
    (x * TWO_POW_64) as u64
}

#[inline]
fn from_bits(state: u64) -> f64 {
    (state as f64 / TWO_POW_64).min(BELOW_ONE)
}

/// A finite trajectory with its observable values.
#[derive(Clone, Debug)]
pub struct Orbit {
    pub points: Vec<Point>,
    values: Vec<f64>,
    dim: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Orbit {
    /// Records `n_steps` points of a stream, evaluating `obs` along the way.
    pub fn record<R: RngCore>(
        stream: &mut OrbitStream<R>,
        obs: &Observable,
        n_steps: usize,
        burn_in: usize,
        seed: u64,
    ) -> Self {
        let dim = obs.dim();
        let mut points = Vec::with_capacity(n_steps);
        let mut values = vec![0.0; n_steps * dim];
        for (p, out) in stream
            .take(n_steps)
            .zip(values.chunks_exact_mut(dim.max(1)))
        {
            obs.eval_into(p, &mut out[..dim]);
            points.push(p);
        }
        if dim == 0 {
            points.extend(stream.take(n_steps));
        }
        Self {
            points,
            values,
            dim,
            burn_in,
            seed,
        }
    }

    /// Builds an orbit from explicit observable values (used to feed
    /// hand-made sequences into the path functions).
    pub fn from_values(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: values.len(),
            });
        }
        let n = values.len() / dim;
        Ok(Self {
            points: vec![Point::default(); n],
            values,
            dim,
            burn_in: 0,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `v(points[j])`.
    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// All values, row-major `n_steps × dim`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Orbit of `desc` started at `x0` (or uniformly at random when `None`),
/// after `burn_in` discarded iterates.
pub fn sample_orbit(
    desc: &MapDescriptor,
    obs: &Observable,
    x0: Option<Point>,
    n_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Orbit> {
    if n_steps == 0 {
        return domain("n_steps must be at least 1");
    }
    let law = match x0 {
        Some(point) => InitialLaw::Fixed { point },
        None => InitialLaw::Invariant { burn_in: 0 },
    };
    let mut stream = OrbitStream::new(desc, law, rng::stream(seed, 0))?;
    for _ in 0..burn_in {
        stream.advance();
    }
    Ok(Orbit::record(&mut stream, obs, n_steps, burn_in, seed))
}

/// Convenience: stream with the given law on replica stream `index` of `seed`.
pub fn stream_for(
    desc: &MapDescriptor,
    law: InitialLaw,
    seed: u64,
    index: u64,
) -> Result<OrbitStream<Rng>> {
    OrbitStream::new(desc, law, rng::stream(seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_orbit_from_tenth() {
        let orbit = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::centered_x(),
            Some(Point::on_line(0.1)),
            3,
            0,
            1,
        )
        .unwrap();
        let xs: Vec<f64> = orbit.points.iter().map(|p| p.base).collect();
        assert_eq!(xs, vec![0.1, 0.2, 0.4]);
        assert_eq!(orbit.value(2), &[0.4 - 0.5]);
    }

    #[test]
    fn doubling_orbit_does_not_collapse() {
        let orbit = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::centered_x(),
            Some(Point::on_line(0.1)),
            5000,
            0,
            3,
        )
        .unwrap();
        let tail_mean: f64 = orbit.points[1000..].iter().map(|p| p.base).sum::<f64>() / 4000.0;
        assert!((tail_mean - 0.5).abs() < 0.05, "{tail_mean}");
        assert!(orbit.points.iter().all(|p| (0.0..1.0).contains(&p.base)));
    }

    #[test]
    fn doubling_time_average() {
        let n = 1_000_000;
        let orbit = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::centered_x(),
            None,
            n,
            0,
            11,
        )
        .unwrap();
        let vals = orbit.values();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * var.sqrt() / 1e3, "{mean}");
    }

    #[test]
    fn lsv_split_sample_agreement() {
        let desc = MapDescriptor::lsv(0.25).unwrap();
        let obs =
            Observable::builtin(super::super::BuiltinObservable::CenteredBase { mean: 0.456 });
        let orbit = sample_orbit(&desc, &obs, None, 1_000_000, DEFAULT_BURN_IN, 5).unwrap();
        let half = orbit.len() / 2;
        let a = orbit.values()[..half].iter().sum::<f64>() / half as f64;
        let b = orbit.values()[half..].iter().sum::<f64>() / half as f64;
        assert!((a - b).abs() < 1e-2, "{a} vs {b}");
    }

    #[test]
    fn determinism() {
        let desc = MapDescriptor::intermittent_baker(0.3).unwrap();
        let a = sample_orbit(&desc, &Observable::baker_pair(), None, 2000, 100, 42).unwrap();
        let b = sample_orbit(&desc, &Observable::baker_pair(), None, 2000, 100, 42).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.values(), b.values());
        let c = sample_orbit(&desc, &Observable::baker_pair(), None, 2000, 100, 43).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn gamma_zero_lsv_matches_doubling_orbits() {
        let a = sample_orbit(
            &MapDescriptor::lsv(0.0).unwrap(),
            &Observable::cosine(),
            None,
            500,
            10,
            9,
        )
        .unwrap();
        let b = sample_orbit(
            &MapDescriptor::doubling(),
            &Observable::cosine(),
            None,
            500,
            10,
            9,
        )
        .unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn baker_stream_matches_step() {
        let desc = MapDescriptor::uniform_baker();
        let orbit = sample_orbit(
            &desc,
            &Observable::baker_pair(),
            Some(Point::new(0.1, 0.3)),
            40,
            0,
            2,
        )
        .unwrap();
        for w in orbit.points.windows(2).take(40) {
            let stepped = desc.step(w[0]);
            assert!((stepped.fiber - w[1].fiber).abs() < 1e-15);
            assert!((stepped.base - w[1].base).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_law_respects_interval() {
        let desc = MapDescriptor::doubling();
        for i in 0..200 {
            let s = stream_for(&desc, InitialLaw::Uniform { lo: 0.0, hi: 0.5 }, 4, i).unwrap();
            assert!(s.point().base < 0.5);
        }
        assert!(InitialLaw::Uniform { lo: 0.6, hi: 0.5 }
            .validate(&desc)
            .is_err());
    }

    #[test]
    fn rejects_invalid_input() {
        let d = MapDescriptor::doubling();
        assert!(sample_orbit(&d, &Observable::cosine(), None, 0, 0, 1).is_err());
        assert!(sample_orbit(
            &d,
            &Observable::cosine(),
            Some(Point::on_line(1.0)),
            3,
            0,
            1
        )
        .is_err());
    }

    #[test]
    fn random_doubling_start_has_no_late_zero_bits() {
        // iterates 50..70 sit where truncated low bits of an f64 start would
        // surface; their mean must stay at 1/2
        let desc = MapDescriptor::doubling();
        for law in [
            InitialLaw::Uniform { lo: 0.0, hi: 0.5 },
            InitialLaw::Invariant { burn_in: 0 },
        ] {
            let mut total = 0.0;
            let streams = 4000;
            for i in 0..streams {
                let s = stream_for(&desc, law, 3, i).unwrap();
                total += s.skip(50).take(20).map(|p| p.base).sum::<f64>();
            }
            let mean = total / (20 * streams) as f64;
            assert!((mean - 0.5).abs() < 0.01, "{law:?}: {mean}");
        }
    }
}
