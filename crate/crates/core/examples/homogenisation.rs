//! A planar fast-slow system driven by the doubling map against its limiting
//! SDE, with and without the drift correction.

use iwip::homog::{
    corrected_drift, fast_slow_ensemble, homogenisation_compare, sde_ensemble, Convention,
    FastSlowConfig, PlanarDrift, SdeConfig, SlowModel,
};
use iwip::maps::{MapDescriptor, Observable};
use iwip::processes::{drift_matrix, sigma_green_kubo};
use iwip::transfer::{ulam_correlations, Basis, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let desc = MapDescriptor::doubling();
    let obs = Observable::doubling_pair();
    let model = SlowModel::planar(PlanarDrift::NegSecond);
    let fs = FastSlowConfig {
        record_points: 10,
        ..FastSlowConfig::new(model.clone(), desc, obs.clone(), 0.02)
    };
    let fast = fast_slow_ensemble(&fs, 1000, 1)?;

    let op = UlamOperator::build(
        &desc,
        &UlamConfig::new(4096, 64).with_basis(Basis::PiecewiseLinear),
    )?;
    let corr = ulam_correlations(&op, &op.project(&obs)?, 60)?;
    let sigma = sigma_green_kubo(&corr, 60)?.estimate.value;
    let e = drift_matrix(&corr, 60)?.estimate.value;
    for conv in [Convention::Proposition, Convention::Uncorrected] {
        let cfg = SdeConfig::matching(&fs, corrected_drift(&model, &e, conv)?, sigma.clone());
        let sde = sde_ensemble(&cfg, 10_000, 2, "sde")?;
        println!("{conv:?}");
        for r in homogenisation_compare(&fast, &sde)? {
            println!(
                "  {:<14} {:.3}  {}",
                r.test_name,
                r.p_value.unwrap_or(r.statistic),
                if r.passed { "ok" } else { "differs" }
            );
        }
    }
    Ok(())
}
