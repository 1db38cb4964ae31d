//! Walk the dissipation ladder of the reparametrized model family and watch
//! the two-dimensional maps collapse onto their one-dimensional singular
//! limit: the X-component shrinks linearly in b_n while the phase component
//! converges to the limiting circle map.
//!
//! Run with: cargo run --release --example singular_ladder

use loopdyn::asmodel::{
    ladder_offset, map_f, reparametrize, singular_limit, ASParams, ASState,
};
use loopdyn::dynsys::wrap_angle;
use loopdyn::onedim::circ_diff;
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
    let a = 1.0;
    // The integer ladder offset enters the limit as a constant rotation.
    let shift = ladder_offset(&p, mu0) as f64;
    let limit = singular_limit(&p, wrap_angle(a + shift));

    println!("ladder offset N = {shift}, comparing against the limit at a + N (mod 2 pi)");
    println!("{:>3}  {:>12}  {:>12}  {:>12}", "n", "b_n", "sup |X1|", "sup phase gap");
    for n in 1..9u32 {
        let idx = reparametrize(&p, mu0, n, a);
        let mut pm = p;
        pm.mu = idx.mu_na;
        let (mut sup_x, mut sup_th) = (0.0f64, 0.0f64);
        for i in 0..21 {
            let x0 = 5.0 * i as f64 / 20.0;
            for j in 0..64 {
                let th0 = TAU * j as f64 / 64.0;
                let s = map_f(ASState::new(x0, th0), &pm)?;
                let (_, th_lim) = limit.apply(x0, th0);
                sup_x = sup_x.max(s.x.abs());
                sup_th = sup_th.max(circ_diff(s.theta, th_lim).abs());
            }
        }
        println!("{n:>3}  {:>12.4e}  {:>12.4e}  {:>12.4e}", idx.b_n, sup_x, sup_th);
    }
    Ok(())
}
