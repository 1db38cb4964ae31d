//! Iterate the closed-form return-map model and print a short orbit
//! together with the per-iterate phase advance, which grows like
//! (omega/beta) ln(1/mu).
//!
//! Run with: cargo run --release --example model_orbit

use loopdyn::asmodel::{jacobian_f, map_f, ASParams, ASState};

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
        omega: 100.0,
        mu: 1e-4,
    };
    println!(
        "model at omega/beta = {}, mu = {:.1e}; each iterate winds the phase ~{:.1} turns",
        p.omega / p.beta,
        p.mu,
        (p.omega / p.beta) * (1.0 / p.mu).ln() / std::f64::consts::TAU
    );

    let mut s = ASState::new(0.5, 0.7);
    println!("{:>4}  {:>12}  {:>10}  {:>12}", "n", "X", "theta", "|det DF|");
    for n in 0..12 {
        let j = jacobian_f(s, &p)?;
        let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
        println!("{n:>4}  {:>12.6e}  {:>10.6}  {:>12.6e}", s.x, s.theta, det);
        s = map_f(s, &p)?;
    }
    Ok(())
}
