//! Locate the saddle of the glued-loop fixture, trace its homoclinic loop,
//! and check the exponential approach rates at both ends.
//!
//! Run with: cargo run --release --example trace_loop

use loopdyn::dynsys::ForcedField;
use loopdyn::fixtures::GluedLoop;
use loopdyn::homoclinic::{check_asymptotics, compute_homoclinic, locate_saddle};
use std::sync::Arc;

fn main() -> anyhow::Result<()> {
    let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
    let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12)?;
    println!(
        "saddle at ({:.3e}, {:.3e}), rates alpha = {:.6}, beta = {:.6}",
        saddle.position.0, saddle.position.1, saddle.alpha, saddle.beta
    );

    let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-6)?;
    println!(
        "loop sampled on [{:.3}, {:.3}] with {} points, closure residual {:.2e}",
        -orbit.window.l_minus,
        orbit.window.l_plus,
        orbit.s_grid.len(),
        orbit.closure_residual
    );

    let asym = check_asymptotics(&orbit, &saddle)?;
    println!(
        "forward decay slope {:.6} (expect -alpha), backward {:.6} (expect -beta)",
        asym.forward_slope, asym.backward_slope
    );
    println!(
        "expansion-rate ratios: forward {:.6}, backward {:.6} (both expect 1)",
        asym.forward_e_ratio, asym.backward_e_ratio
    );
    Ok(())
}
