//! Scan the return-map model over a dissipation grid at two frequency
//! ratios and classify every attractor: tame (sinks and invariant circles)
//! at a small ratio, chaotic across decades at a large one.
//!
//! Run with: cargo run --release --example chaos_scan

use loopdyn::asmodel::ASParams;
use loopdyn::diagnostics::{scan, summarize, ClassifySettings, ScanPoint};

fn params(omega: f64, mu: f64) -> ASParams {
    ASParams {
        alpha: 2.0,
        beta: 1.0,
        epsilon: 0.1,
        lambda: 0.05,
        xi1: 1.0,
        xi2: 0.3,
        b: 1.0,
        a_amp: 0.3,
        omega,
        mu,
    }
}

fn main() {
    let settings = ClassifySettings::default();
    for omega in [2.0, 100.0] {
        let mus: Vec<f64> = (0..40).map(|i| 1e-8 * 1e5f64.powf(i as f64 / 39.0)).collect();
        let points: Vec<ScanPoint> = mus
            .iter()
            .map(|&mu| ScanPoint {
                family: format!("omega-{omega}"),
                params: params(omega, mu),
                a: 0.0,
                b: mu,
            })
            .collect();
        let records = scan(&points, (0.5, 0.7), &settings, 7);
        let summary = summarize(&records);
        println!(
            "omega/beta = {omega}: {} chaotic, {} sinks, {} invariant circles, {} unresolved",
            summary.chaotic, summary.periodic_sink, summary.invariant_circle, summary.unresolved
        );
        for d in &summary.chaotic_fraction_per_decade {
            println!(
                "  mu decade [1e{}, 1e{}): {}/{} chaotic",
                d.exponent,
                d.exponent + 1,
                d.chaotic,
                d.total
            );
        }
    }
}
