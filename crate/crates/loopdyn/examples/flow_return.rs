//! Evaluate the flow-induced return map of the forced glued loop on the
//! entry section and compare the measured exit coordinate against the
//! affine-plus-wave prediction.
//!
//! Run with: cargo run --release --example flow_return

use loopdyn::dynsys::{ConstantForcing, ForcedField};
use loopdyn::fixtures::GluedLoop;
use loopdyn::flowmap::{
    analytic_prediction, build_sections, estimate_k0hat, return_map_flow,
};
use loopdyn::homoclinic::{compute_homoclinic, locate_saddle};
use loopdyn::melnikov::{compute_acs_unchecked, rho_interval, wave_coefficients};
use std::f64::consts::TAU;
use std::sync::Arc;

fn main() -> anyhow::Result<()> {
    let omega = 2.0;
    let mu = 1e-6;
    let unforced = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
    let saddle = locate_saddle(&unforced, (0.0, 0.0), 1e-12)?;
    let orbit = compute_homoclinic(&unforced, &saddle, 0.05, 1e-6)?;
    let data = compute_acs_unchecked(&orbit, &ConstantForcing(1.0), omega, &saddle)?;
    let (r1, r2) = rho_interval(&data, 1e-12)?;
    let rho = 0.5 * (r1 + r2);
    let waves = wave_coefficients(&data, rho, &orbit)?;

    let field = ForcedField::new(
        Arc::new(GluedLoop::new(2.0, 1.0)),
        Arc::new(ConstantForcing(1.0)),
        mu,
        rho,
        omega,
    );
    let k0 = estimate_k0hat(&field, &saddle)?;
    let sections = build_sections(&orbit, mu, &waves, k0)?;
    println!("mu = {mu:.1e}, rho = {rho:.4}, periodic-orbit amplitude K0 = {k0:.4}");
    println!(
        "{:>8}  {:>10}  {:>10}  {:>9}  {:>8}  {:>8}",
        "theta0", "Z exit", "Z predicted", "rel err", "t outer", "t inner"
    );
    for i in 0..8 {
        let theta0 = TAU * i as f64 / 8.0;
        let s = return_map_flow(&field, &sections, 0.0, theta0, 1e-10)?;
        let pred = analytic_prediction(0.0, theta0, mu, &waves, &orbit, &saddle, omega)?;
        println!(
            "{theta0:>8.4}  {:>10.4}  {:>10.4}  {:>9.2e}  {:>8.4}  {:>8.4}",
            s.z_mid,
            pred.z_hat,
            (s.z_mid - pred.z_hat).abs() / pred.z_hat,
            s.t_outer,
            s.t_inner
        );
    }
    Ok(())
}
