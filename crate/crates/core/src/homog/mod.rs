//! Fast-slow systems driven by a chaotic map and their limiting SDEs.

mod model;
mod simulate;

pub use model::{corrected_drift, Convention, Field, PlanarDrift, SlowModel};
pub use simulate::{
    euler_maruyama, fast_slow_ensemble, fast_slow_simulate, homogenisation_compare, sde_ensemble,
    FastSlowConfig, SdeConfig, SlowEnsemble, SlowPath, BLOWUP_RADIUS, MACRO_POINTS,
};
