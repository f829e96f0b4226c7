//! `W_n(1)` started from `U[0, 1/2)` without burn-in against the stationary
//! ensemble, for a short and a long orbit.

use iwip::maps::{InitialLaw, MapDescriptor, Observable};
use iwip::stats::zweimuller_robustness;

fn main() -> iwip::Result<()> {
    let nu = InitialLaw::Uniform { lo: 0.0, hi: 0.5 };
    for n in [4, 10_000] {
        let r = zweimuller_robustness(
            &MapDescriptor::doubling(),
            &Observable::centered_x(),
            nu,
            n,
            2000,
            4,
        )?;
        println!(
            "n = {n:5}  p = {:.4}  {}  {:?}",
            r.p_value.unwrap_or(f64::NAN),
            if r.passed { "same law" } else { "differs" },
            r.notes
        );
    }
    Ok(())
}
