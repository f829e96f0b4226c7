//! Interval maps and their skew-product extensions.
//!
//! Four systems are provided:
//!
//! * the doubling map `x ↦ 2x mod 1`;
//! * the Liverani–Saussol–Vaienti intermittent map with parameter `γ ∈ [0, 1)`,
//!   `x ↦ x(1 + 2^γ x^γ)` on `[0, 1/2)` and `x ↦ 2x − 1` on `[1/2, 1)`;
//! * a uniform baker skew product over the doubling map;
//! * an intermittent baker skew product over the LSV map.
//!
//! The baker kinds act on `(base, fiber)` by moving the base with the base map
//! and contracting the fiber affinely into the sub-interval indexed by the
//! base branch: `fiber' = λ·fiber + branch·(1 − λ)`. Vertical fibers are the
//! stable leaves.
//!
//! The branch boundary `x = 1/2` belongs to the right branch.

mod observable;
mod orbit;

pub use observable::{BuiltinObservable, Observable};
pub use orbit::{sample_orbit, stream_for, InitialLaw, Orbit, OrbitStream, DEFAULT_BURN_IN};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Smallest value an LSV orbit is allowed to reach; prevents exact absorption
/// at the neutral fixed point.
pub const LSV_FLOOR: f64 = 1e-15;

/// Largest `f64` strictly below one.
pub const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Doubling,
    Lsv,
    UniformBaker,
    IntermittentBaker,
}

/// A validated choice of dynamical system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapDescriptor {
    kind: MapKind,
    gamma: f64,
    fiber_contraction: f64,
}

/// A point of the phase space. One-dimensional maps ignore `fiber` (kept 0).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub base: f64,
    pub fiber: f64,
}

impl Point {
    pub fn new(base: f64, fiber: f64) -> Self {
        Self { base, fiber }
    }

    pub fn on_line(base: f64) -> Self {
        Self { base, fiber: 0.0 }
    }

    fn check(&self, baker: bool) -> Result<()> {
        if !(0.0..1.0).contains(&self.base) {
            return domain(format!("base coordinate {} outside [0, 1)", self.base));
        }
        if baker && !(0.0..1.0).contains(&self.fiber) {
            return domain(format!("fiber coordinate {} outside [0, 1)", self.fiber));
        }
        Ok(())
    }
}

impl MapDescriptor {
    pub fn doubling() -> Self {
        Self {
            kind: MapKind::Doubling,
            gamma: 0.0,
            fiber_contraction: 0.5,
        }
    }

    pub fn lsv(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self {
            kind: MapKind::Lsv,
            gamma,
            fiber_contraction: 0.5,
        })
    }

    pub fn uniform_baker() -> Self {
        Self {
            kind: MapKind::UniformBaker,
            gamma: 0.0,
            fiber_contraction: 0.5,
        }
    }

    pub fn uniform_baker_with(fiber_contraction: f64) -> Result<Self> {
        check_contraction(fiber_contraction)?;
        Ok(Self {
            kind: MapKind::UniformBaker,
            gamma: 0.0,
            fiber_contraction,
        })
    }

    pub fn intermittent_baker(gamma: f64) -> Result<Self> {
        Self::intermittent_baker_with(gamma, 0.5)
    }

    pub fn intermittent_baker_with(gamma: f64, fiber_contraction: f64) -> Result<Self> {
        check_gamma(gamma)?;
        check_contraction(fiber_contraction)?;
        Ok(Self {
            kind: MapKind::IntermittentBaker,
            gamma,
            fiber_contraction,
        })
    }

    /// Builds a descriptor from raw parameters, validating ranges.
    pub fn new(kind: MapKind, gamma: f64, fiber_contraction: f64) -> Result<Self> {
        match kind {
            MapKind::Doubling => {
                if gamma != 0.0 {
                    return domain("the doubling map takes no gamma parameter");
                }
                Ok(Self::doubling())
            }
            MapKind::Lsv => Self::lsv(gamma),
            MapKind::UniformBaker => Self::uniform_baker_with(fiber_contraction),
            MapKind::IntermittentBaker => Self::intermittent_baker_with(gamma, fiber_contraction),
        }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn fiber_contraction(&self) -> f64 {
        self.fiber_contraction
    }

    pub fn is_baker(&self) -> bool {
        matches!(
            self.kind,
            MapKind::UniformBaker | MapKind::IntermittentBaker
        )
    }

    /// The doubling-type base dynamics (`Doubling`, or `Lsv` with `γ = 0`).
    pub fn has_doubling_base(&self) -> bool {
        match self.kind {
            MapKind::Doubling | MapKind::UniformBaker => true,
            MapKind::Lsv | MapKind::IntermittentBaker => self.gamma == 0.0,
        }
    }

    /// The interval map driving the base coordinate.
    pub fn base_map(&self) -> Self {
        match self.kind {
            MapKind::Doubling | MapKind::Lsv => *self,
            MapKind::UniformBaker => Self::doubling(),
            MapKind::IntermittentBaker => Self {
                kind: MapKind::Lsv,
                gamma: self.gamma,
                fiber_contraction: 0.5,
            },
        }
    }

    /// Whether Lebesgue measure on the base is invariant.
    pub fn preserves_lebesgue(&self) -> bool {
        self.has_doubling_base()
    }

    /// Base map without range checks.
    #[inline]
    pub fn base_step(&self, x: f64) -> f64 {
        if self.has_doubling_base() {
            if x < 0.5 {
                2.0 * x
            } else {
                2.0 * x - 1.0
            }
        } else {
            lsv_raw(x, self.gamma)
        }
    }

    /// One step of the full system without range checks.
    #[inline]
    pub fn step(&self, p: Point) -> Point {
        let base = self.base_step(p.base);
        if self.is_baker() {
            let lambda = self.fiber_contraction;
            let branch = branch_of(p.base);
            Point {
                base,
                fiber: lambda * p.fiber + branch * (1.0 - lambda),
            }
        } else {
            Point::on_line(base)
        }
    }

    /// Preimage of `x` under the given branch of the base map.
    pub fn base_preimage(&self, x: f64, branch: u8) -> f64 {
        if branch == 1 {
            return 0.5 * (x + 1.0);
        }
        if self.has_doubling_base() {
            0.5 * x
        } else {
            lsv_left_inverse(x, self.gamma)
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return domain(format!("gamma = {gamma} outside [0, 1)"));
    }
    Ok(())
}

fn check_contraction(lambda: f64) -> Result<()> {
    // λ > 1/2 makes the two fiber images overlap and the map non-injective
    if !(lambda > 0.0 && lambda <= 0.5) {
        return domain(format!("fiber contraction {lambda} outside (0, 1/2]"));
    }
    Ok(())
}

#[inline]
fn branch_of(x: f64) -> f64 {
    if x < 0.5 {
        0.0
    } else {
        1.0
    }
}

#[inline]
pub(crate) fn lsv_raw(x: f64, gamma: f64) -> f64 {
    if x < 0.5 {
        (x * (1.0 + 2f64.powf(gamma) * x.powf(gamma))).min(BELOW_ONE)
    } else {
        2.0 * x - 1.0
    }
}

/// One LSV step, `x(1 + 2^γ x^γ)` on `[0, 1/2)` and `2x − 1` on `[1/2, 1)`.
pub fn lsv_step(x: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..1.0).contains(&x) {
        return domain(format!("x = {x} outside [0, 1)"));
    }
    Ok(lsv_raw(x, gamma))
}

/// Inverse of the left LSV branch on `[0, 1)`.
pub(crate) fn lsv_left_inverse(y: f64, gamma: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let c = 2f64.powf(gamma);
    let (mut lo, mut hi) = (0.0_f64, y.min(0.5));
    let mut x = y / (1.0 + c * y.powf(gamma));
    for _ in 0..100 {
        let g = x * (1.0 + c * x.powf(gamma)) - y;
        if g > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let dg = 1.0 + c * (1.0 + gamma) * x.powf(gamma);
        let mut next = x - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// One step of a baker skew product.
pub fn baker_step(p: Point, desc: &MapDescriptor) -> Result<Point> {
    if !desc.is_baker() {
        return domain("baker_step requires a baker map");
    }
    p.check(true)?;
    Ok(desc.step(p))
}

/// Exact inverse of [`baker_step`].
///
/// The branch is read from the fiber: `fiber < λ` is branch 0 and
/// `fiber ≥ 1 − λ` is branch 1 (for `λ = 1/2`, `fiber < 1/2` is branch 0).
/// Points in the gap `[λ, 1 − λ)` have no preimage.
pub fn baker_inverse(p: Point, desc: &MapDescriptor) -> Result<Point> {
    if !desc.is_baker() {
        return domain("baker_inverse requires a baker map");
    }
    p.check(true)?;
    let lambda = desc.fiber_contraction;
    let branch = if p.fiber < lambda {
        0
    } else if p.fiber >= 1.0 - lambda {
        1
    } else {
        return domain(format!(
            "fiber {} lies in the gap of the fiber image",
            p.fiber
        ));
    };
    let fiber = ((p.fiber - branch as f64 * (1.0 - lambda)) / lambda).clamp(0.0, BELOW_ONE);
    let base = desc.base_preimage(p.base, branch).min(BELOW_ONE);
    Ok(Point { base, fiber })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lsv_examples() {
        assert_eq!(lsv_step(0.25, 0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(
            lsv_step(0.25, 0.5).unwrap(),
            0.426_776_695_3,
            epsilon = 1e-10
        );
        assert_eq!(lsv_step(0.75, 0.5).unwrap(), 0.5);
        // boundary belongs to the right branch
        assert_eq!(lsv_step(0.5, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn lsv_domain_errors() {
        assert!(lsv_step(1.0, 0.2).is_err());
        assert!(lsv_step(-0.1, 0.2).is_err());
        assert!(lsv_step(0.3, 1.0).is_err());
        assert!(lsv_step(0.3, -0.1).is_err());
        assert!(MapDescriptor::lsv(1.5).is_err());
    }

    #[test]
    fn lsv_branch_images_cover_unit_interval() {
        for gamma in [0.0, 0.1, 0.25, 0.49, 0.9] {
            let left_end = lsv_step(0.5 - 1e-12, gamma).unwrap();
            assert!(
                left_end < 1.0 && left_end > 1.0 - 1e-9,
                "{gamma}: {left_end}"
            );
            let right_end = lsv_step(BELOW_ONE, gamma).unwrap();
            assert!(right_end < 1.0 && right_end > 1.0 - 1e-15);
            assert_eq!(lsv_step(0.0, gamma).unwrap(), 0.0);
        }
    }

    #[test]
    fn gamma_zero_is_doubling() {
        let d = MapDescriptor::doubling();
        for i in 0..10_000 {
            let x = (i as f64 + 0.5) / 10_000.0;
            assert_eq!(lsv_step(x, 0.0).unwrap(), d.base_step(x));
        }
    }

    #[test]
    fn baker_examples() {
        let b = MapDescriptor::uniform_baker();
        assert_eq!(
            baker_step(Point::new(0.25, 0.5), &b).unwrap(),
            Point::new(0.5, 0.25)
        );
        assert_eq!(
            baker_step(Point::new(0.75, 0.0), &b).unwrap(),
            Point::new(0.5, 0.5)
        );
        assert_eq!(
            baker_inverse(Point::new(0.5, 0.25), &b).unwrap(),
            Point::new(0.25, 0.5)
        );
        assert_eq!(
            baker_inverse(Point::new(0.5, 0.5), &b).unwrap(),
            Point::new(0.75, 0.0)
        );
        assert!(baker_step(Point::new(0.2, 0.1), &MapDescriptor::doubling()).is_err());
        assert!(baker_step(Point::new(1.2, 0.1), &b).is_err());
    }

    #[test]
    fn contraction_range() {
        assert!(MapDescriptor::uniform_baker_with(0.6).is_err());
        assert!(MapDescriptor::uniform_baker_with(0.0).is_err());
        assert!(MapDescriptor::uniform_baker_with(0.3).is_ok());
        let b = MapDescriptor::uniform_baker_with(0.3).unwrap();
        assert!(baker_inverse(Point::new(0.4, 0.5), &b).is_err());
    }

    #[test]
    fn left_inverse_roundtrip() {
        for gamma in [0.1, 0.25, 0.75] {
            for i in 1..1000 {
                let x = i as f64 / 2000.0;
                let y = lsv_raw(x, gamma);
                assert_abs_diff_eq!(lsv_left_inverse(y, gamma), x, epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn baker_roundtrip(base in 0.0f64..1.0, fiber in 0.0f64..1.0, gamma in 0.0f64..0.9,
                           lambda in 0.05f64..=0.5, intermittent: bool) {
            let desc = if intermittent {
                MapDescriptor::intermittent_baker_with(gamma, lambda).unwrap()
            } else {
                MapDescriptor::uniform_baker_with(lambda).unwrap()
            };
            let p = Point::new(base, fiber);
            let q = baker_inverse(baker_step(p, &desc).unwrap(), &desc).unwrap();
            prop_assert!((q.base - p.base).abs() < 1e-12);
            prop_assert!((q.fiber - p.fiber).abs() < 1e-12);
        }

        #[test]
        fn fiber_contracts_by_lambda(base in 0.0f64..1.0, y1 in 0.0f64..1.0, y2 in 0.0f64..1.0,
                                     lambda in 0.05f64..=0.5) {
            let desc = MapDescriptor::uniform_baker_with(lambda).unwrap();
            let a = desc.step(Point::new(base, y1));
            let b = desc.step(Point::new(base, y2));
            prop_assert!(((a.fiber - b.fiber).abs() - lambda * (y1 - y2).abs()).abs() < 1e-15);
        }

        #[test]
        fn lsv_monotone_on_branches(x in 0.0f64..0.499, dx in 1e-9f64..1e-3, gamma in 0.0f64..0.99) {
            let y = (x + dx).min(0.4999999);
            prop_assert!(lsv_raw(y, gamma) >= lsv_raw(x, gamma));
            let (u, w) = (0.5 + x, (0.5 + y).min(BELOW_ONE));
            prop_assert!(lsv_raw(w, gamma) >= lsv_raw(u, gamma));
        }
    }
}
