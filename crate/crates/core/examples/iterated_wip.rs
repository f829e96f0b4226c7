//! The iterated sums `𝕎_n` of the two-dimensional doubling observable: the
//! shuffle identity on one path and the ensemble mean of `𝕎_n(1)` against
//! the drift `E`.

use iwip::maps::{sample_orbit, MapDescriptor, Observable};
use iwip::processes::{drift_matrix, iterated_path, run_ensemble, EnsembleSpec};
use iwip::transfer::{ulam_correlations, Basis, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let desc = MapDescriptor::doubling();
    let obs = Observable::doubling_pair();
    let orbit = sample_orbit(&desc, &obs, None, 20_000, 0, 5)?;
    let path = iterated_path(&orbit, 10_000, 2.0)?;
    println!(
        "shuffle identity, max relative error {:.1e}",
        path.shuffle_error().unwrap_or(f64::NAN)
    );
    println!("WW(2) = {:?}", path.ww_at(2.0));

    let op = UlamOperator::build(
        &desc,
        &UlamConfig::new(4096, 64).with_basis(Basis::PiecewiseLinear),
    )?;
    let e = drift_matrix(&ulam_correlations(&op, &op.project(&obs)?, 60)?, 60)?
        .estimate
        .value;
    let (mean, se) = run_ensemble(&EnsembleSpec::new(desc, obs, 10_000, 1000, 6))?.mean_ww();
    for p in 0..2 {
        for q in 0..2 {
            println!(
                "WW^{}{}(1): mean {:+.4} ± {:.4}, E = {:+.4}",
                p + 1,
                q + 1,
                mean[(p, q)],
                se[(p, q)],
                e[(p, q)]
            );
        }
    }
    Ok(())
}
