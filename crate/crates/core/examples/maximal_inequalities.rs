//! Empirical maximal moments of Birkhoff sums against the Rio-type and Doob
//! bounds for three observables.

use std::sync::Arc;

use iwip::maps::{MapDescriptor, Observable};
use iwip::processes::EnsembleSpec;
use iwip::stats::{maximal_inequality_suite, MaximalSpec};
use iwip::transfer::{Basis, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let desc = MapDescriptor::doubling();
    let op = Arc::new(UlamOperator::build(
        &desc,
        &UlamConfig::new(4096, 64).with_basis(Basis::PiecewiseLinear),
    )?);
    for obs in [
        Observable::centered_x(),
        Observable::cosine(),
        Observable::doubling_pair(),
    ] {
        let spec = MaximalSpec::new(EnsembleSpec::new(desc, obs, 10_000, 200, 3));
        for r in maximal_inequality_suite(&spec, &op)? {
            println!(
                "{:<28} lhs {:.3e}  bound {:.3e}  {}",
                r.test_name,
                r.statistic,
                r.threshold.unwrap_or(f64::NAN),
                if r.passed { "ok" } else { "VIOLATED" }
            );
        }
    }
    Ok(())
}
