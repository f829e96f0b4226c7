//! Decay of `|P^n v|₁` for the doubling map (geometric) and for an LSV map
//! (polynomial, slope near `1 − 1/γ`).

use iwip::maps::{BuiltinObservable, MapDescriptor, Observable};
use iwip::transfer::{gordin_l1_diagnostic, Basis, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let doubling = UlamOperator::build(
        &MapDescriptor::doubling(),
        &UlamConfig::new(4096, 64).with_basis(Basis::PiecewiseLinear),
    )?;
    let v = doubling.project(&Observable::centered_x())?;
    let series = gordin_l1_diagnostic(&doubling, &v, 20)?;
    println!("doubling, v = x - 1/2");
    for &(n, x) in series.norms.iter().step_by(4) {
        println!(
            "  n = {n:2}  |P^n v|_1 = {x:.3e}  2^-n/4 = {:.3e}",
            0.25 * 0.5f64.powi(n as i32)
        );
    }

    let gamma = 0.25;
    let lsv = UlamOperator::build(&MapDescriptor::lsv(gamma)?, &UlamConfig::new(8192, 64))?;
    let x = Observable::builtin(BuiltinObservable::CenteredBase { mean: 0.0 });
    let series = gordin_l1_diagnostic(&lsv, &lsv.project_centered(&x)?, 48)?;
    println!(
        "lsv gamma = {gamma}: fitted exponent {:.2} (asymptotic {:.2}), tail estimate {:.2e}",
        series.fitted_exponent.unwrap_or(f64::NAN),
        1.0 - 1.0 / gamma,
        series.extrapolated_tail()
    );
    Ok(())
}
