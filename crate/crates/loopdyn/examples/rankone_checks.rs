//! Run the rank-one admissibility checks on the closed-form model family:
//! C1 convergence to the singular limit with derivatives, nondegenerate
//! dependence on the collapsed variable at the critical points (C3), and
//! bounded determinant distortion along the dissipation ladder (C4).
//!
//! Run with: cargo run --release --example rankone_checks

use loopdyn::asmodel::{circle_map, ladder_offset, ASParams};
use loopdyn::dynsys::wrap_angle;
use loopdyn::onedim::critical_set;
use loopdyn::rankone::{c1_check, c3_check, c4_distortion, model_family, GridSpec};
use std::f64::consts::TAU;

fn main() -> anyhow::Result<()> {
    let p = ASParams {
        alpha: 2.0,
        beta: 1.0,
        epsilon: 0.1,
        lambda: 0.05,
        xi1: 1.0,
        xi2: 0.3,
        b: 1.0,
        a_amp: 0.3,
        omega: 10.0,
        mu: 0.0,
    };
    let mu0 = 1e-3;
    let fam = model_family(p, mu0, 1..9);
    let grid = GridSpec::default();

    let c1 = c1_check(&fam, grid)?;
    println!("C1: fitted X-convergence exponent {:.4} (expect alpha/beta - 1 = 1)", c1.fitted_exponent_x);
    for r in c1.rows.iter().take(3) {
        println!(
            "  b = {:.3e}: sup|X| {:.3e}, phase gap {:.3e}, worst derivative gap {:.3e}",
            r.b,
            r.sup_x,
            r.sup_theta,
            r.sup_d1.max(r.sup_d2).max(r.sup_d3)
        );
    }

    // critical points of the limit circle map, shared phase grid over a
    let shift = ladder_offset(&p, mu0) as f64;
    let mut crits = Vec::new();
    for i in 0..5 {
        let a = TAU * i as f64 / 5.0;
        let f = circle_map(&p, wrap_angle(a + shift));
        let cs = critical_set(&f, 2048, 1e-12)?;
        crits.push((a, cs.iter().map(|c| c.theta).collect::<Vec<_>>()));
    }
    let c3 = c3_check(&fam, &crits, 1e-4);
    println!(
        "C3: min |d(phase limit)/dX| at criticals = {:.4e} (tol {:.0e}) -> {}",
        c3.min_derivative,
        c3.tol,
        if c3.pass { "pass" } else { "FAIL" }
    );

    let c4 = c4_distortion(&fam, grid, 100.0)?;
    println!(
        "C4: worst |det DF| sup/inf grid ratio = {:.4} (bound {}) -> {}",
        c4.worst_ratio,
        c4.bound,
        if c4.pass { "pass" } else { "FAIL" }
    );
    Ok(())
}
