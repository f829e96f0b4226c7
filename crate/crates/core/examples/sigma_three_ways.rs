//! Σ for `v = x − 1/2` under the doubling map from the ensemble variance of
//! `W_n(1)`, the Green-Kubo lag sum and `∫ m²`. All three should be near 1/4.

use iwip::decomposition::martingale_part;
use iwip::maps::{MapDescriptor, Observable};
use iwip::processes::{
    run_ensemble, sigma_direct, sigma_green_kubo, sigma_martingale, EnsembleSpec, Estimate,
    SigmaReport, DEFAULT_DEGENERACY_TOL,
};
use iwip::transfer::{mc_correlations, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let desc = MapDescriptor::doubling();
    let obs = Observable::centered_x();
    let ens = run_ensemble(&EnsembleSpec::new(desc, obs.clone(), 10_000, 1000, 1))?;
    let direct = sigma_direct(&ens)?;
    let gk = sigma_green_kubo(&mc_correlations(&desc, &obs, 60, 5_000_000, 32, 2)?, 60)?;
    let op = UlamOperator::build(&desc, &UlamConfig::new(4096, 64))?;
    let dec = martingale_part(&op, &op.project(&obs)?, 40)?;
    let mart = Estimate::exact(sigma_martingale(&op, &dec)?);
    let report = SigmaReport::assemble(
        Some(direct),
        Some(gk),
        Some(mart),
        None,
        DEFAULT_DEGENERACY_TOL,
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
