//! Splits `v = cos 2πx` into a martingale part and a coboundary on the Ulam
//! grid of the doubling map and checks `P m = 0`.

use iwip::decomposition::{default_truncation, martingale_part};
use iwip::maps::{MapDescriptor, Observable};
use iwip::transfer::{NormKind, UlamConfig, UlamOperator};

fn main() -> iwip::Result<()> {
    let op = UlamOperator::build(&MapDescriptor::doubling(), &UlamConfig::new(4096, 64))?;
    for obs in [Observable::cosine(), Observable::centered_x()] {
        let v = op.project(&obs)?;
        let k = default_truncation(&op, &v)?;
        let dec = martingale_part(&op, &v, k)?;
        println!(
            "{:<12} k = {k:2}  |Pm|_1 = {:.1e}  |m|_2 = {:.4}  |chi|_2 = {:.4}  reconstruction {:.1e}",
            obs.name(),
            dec.residual_ker_p,
            op.norm(&dec.mart, NormKind::L2)?,
            op.norm(&dec.chi, NormKind::L2)?,
            dec.reconstruction_error
        );
    }
    Ok(())
}
