//! The uniform baker map: the two hybrid series, the invertible
//! decomposition checks and the drift identity for `(x − 1/2, y − 1/2)`.

use iwip::decomposition::{
    drift_identity_check, hybrid_criterion_diagnostic, invertible_decomposition, HybridConfig,
    InvertibleConfig,
};
use iwip::maps::{MapDescriptor, Observable};

fn main() -> iwip::Result<()> {
    let desc = MapDescriptor::uniform_baker();
    let obs = Observable::baker_pair();
    let hybrid = hybrid_criterion_diagnostic(&desc, &obs, 12, &HybridConfig::default())?;
    for (&(n, minus), &(_, plus)) in hybrid
        .series_minus
        .norms
        .iter()
        .zip(&hybrid.series_plus.norms)
        .step_by(3)
    {
        println!(
            "n = {n:2}  |E0(v o T^-n)|_1 = {minus:.3e}  |E0(v o T^n) - v o T^n|_2 = {plus:.3e}"
        );
    }
    let (_, checks) = invertible_decomposition(&desc, &obs, None, &InvertibleConfig::default())?;
    println!("{}", serde_json::to_string(&checks)?);
    let drift = drift_identity_check(&desc, &obs, None, 40, 1_000_000, 9)?;
    println!(
        "drift identity holds: {}  lhs {:?}  rhs {:?}",
        drift.holds(),
        drift.lhs.rows(),
        drift.rhs.rows()
    );
    Ok(())
}
