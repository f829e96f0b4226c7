//! A coboundary has Σ = 0, and a pair whose difference is a coboundary has a
//! singular Σ whose null direction is recovered as a witness.

use iwip::decomposition::{default_truncation, martingale_part};
use iwip::maps::{MapDescriptor, Observable};
use iwip::processes::{degeneracy_check, sigma_martingale, DEFAULT_DEGENERACY_TOL};
use iwip::transfer::{UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let op = UlamOperator::build(&MapDescriptor::doubling(), &UlamConfig::new(4096, 64))?;
    for obs in [
        Observable::coboundary(),
        Observable::degenerate_pair(),
        Observable::doubling_pair(),
    ] {
        let v = op.project(&obs)?;
        let sigma = sigma_martingale(
            &op,
            &martingale_part(&op, &v, default_truncation(&op, &v)?)?,
        )?;
        let verdict = degeneracy_check(&sigma, DEFAULT_DEGENERACY_TOL);
        println!(
            "{:<16} eigenvalues {:?}  degenerate {}  witness {:?}",
            obs.name(),
            verdict.eigenvalues,
            verdict.degenerate,
            verdict.witness
        );
    }
    Ok(())
}
