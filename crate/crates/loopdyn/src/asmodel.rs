//! Closed-form return-map family near the forced homoclinic loop: the local
//! passage map `N`, the global map `M`, their composition `F` in rescaled
//! coordinates, the logarithmic reparametrization `(a, b_n)`, and the 1D
//! singular limit (an expanding circle-map family).

use crate::dynsys::wrap_angle;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;
use thiserror::Error;

/// Default upper end of the dissipation range.
pub const MU0_DEFAULT: f64 = 1e-3;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("y = {0} is on or below the stable manifold and never returns")]
    BelowStableManifold(f64),
    #[error("y = {0} leaves the local chart (epsilon = {1})")]
    OutsideLocalChart(f64, f64),
    #[error("nonpositive bracket {0} in the composed map")]
    NonpositiveBracket(f64),
}

/// Parameters of the model family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ASParams {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// Contraction factor of the global map.
    pub lambda: f64,
    /// Phase offset of the global map.
    pub xi1: f64,
    /// First-order phase response to the forcing amplitude.
    pub xi2: f64,
    /// Offset amplitude of the global map.
    pub b: f64,
    /// Relative wave amplitude (the model's `A`), in (0, 1).
    pub a_amp: f64,
    pub omega: f64,
    /// Dissipation parameter.
    pub mu: f64,
}

impl ASParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        if !(self.beta > 0.0 && self.alpha > self.beta) {
            return fail("need 0 < beta < alpha");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail("need epsilon in (0, 1)");
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail("need lambda in (0, 1)");
        }
        if !(self.xi1 > 0.0) {
            return fail("need xi1 > 0");
        }
        if !(self.b > 0.0) {
            return fail("need B > 0");
        }
        if !(self.a_amp > 0.0 && self.a_amp < 1.0) {
            return fail("need A_amp in (0, 1)");
        }
        if !(self.omega > 0.0) {
            return fail("need omega > 0");
        }
        if !(self.mu >= 0.0) {
            return fail("need mu >= 0");
        }
        Ok(())
    }

    /// `alpha / beta`, the saddle dissipation ratio (> 1).
    pub fn ratio(&self) -> f64 {
        self.alpha / self.beta
    }
}

/// State on the entry section, in rescaled coordinates `x = mu X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ASState {
    pub x: f64,
    pub theta: f64,
}

impl ASState {
    pub fn new(x: f64, theta: f64) -> Self {
        ASState { x, theta: wrap_angle(theta) }
    }
}

/// Index of a member of the two-parameter family: `b_n = mu_n` and the
/// phase-like parameter `a`, with `mu(n, a)` the actual dissipation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FamilyIndex {
    pub n: u32,
    pub a: f64,
    pub b_n: f64,
    pub mu_na: f64,
}

/// Local passage map by the saddle: enters at height `y_hat`, exits at
/// `x1 = eps^{1 - alpha/beta} y_hat^{alpha/beta}` with the logarithmic
/// phase delay.
pub fn map_n(
    y_hat: f64,
    theta_hat: f64,
    p: &ASParams,
) -> Result<(f64, f64), ModelError> {
    if y_hat <= 0.0 {
        return Err(ModelError::BelowStableManifold(y_hat));
    }
    if y_hat > p.epsilon {
        return Err(ModelError::OutsideLocalChart(y_hat, p.epsilon));
    }
    let r = p.ratio();
    let x1 = p.epsilon.powf(1.0 - r) * y_hat.powf(r);
    let theta1 = wrap_angle(theta_hat + (p.omega / p.beta) * (p.epsilon / y_hat).ln());
    Ok((x1, theta1))
}

/// Global map along the loop: affine in `x0`, with the sinusoidal wave in
/// the phase.
pub fn map_m(x0: f64, theta0: f64, p: &ASParams) -> (f64, f64) {
    let y_hat = p.lambda * x0 + p.mu * p.b * (1.0 + p.a_amp * theta0.sin());
    let theta_hat = wrap_angle(theta0 + p.xi1 + p.mu * p.xi2);
    (y_hat, theta_hat)
}

/// Bracket `lambda X0 + B (1 + A sin theta0)` of the composed map.
fn bracket(state: ASState, p: &ASParams) -> f64 {
    p.lambda * state.x + p.b * (1.0 + p.a_amp * state.theta.sin())
}

/// Composed return map in rescaled coordinates (`x = mu X`).
pub fn map_f(state: ASState, p: &ASParams) -> Result<ASState, ModelError> {
    if p.mu <= 0.0 {
        return Err(ModelError::InvalidParams("map_f needs mu > 0".into()));
    }
    let q = bracket(state, p);
    if q <= 0.0 {
        return Err(ModelError::NonpositiveBracket(q));
    }
    let r = p.ratio();
    let x1 = p.epsilon.powf(1.0 - r) * p.mu.powf(r - 1.0) * q.powf(r);
    let theta1 = state.theta
        + p.xi1
        + p.mu * p.xi2
        + (p.omega / p.beta) * (p.epsilon / (p.mu * q)).ln();
    Ok(ASState::new(x1, theta1))
}

/// Closed-form Jacobian of [`map_f`] (rows: dX1, dtheta1; columns: dX0,
/// dtheta0).
pub fn jacobian_f(state: ASState, p: &ASParams) -> Result<[[f64; 2]; 2], ModelError> {
    let q = bracket(state, p);
    if q <= 0.0 {
        return Err(ModelError::NonpositiveBracket(q));
    }
    let r = p.ratio();
    let k = p.epsilon.powf(1.0 - r) * p.mu.powf(r - 1.0);
    let dq_dx = p.lambda;
    let dq_dth = p.b * p.a_amp * state.theta.cos();
    let dx1_dq = k * r * q.powf(r - 1.0);
    let dth1_dq = -(p.omega / p.beta) / q;
    Ok([
        [dx1_dq * dq_dx, dx1_dq * dq_dth],
        [dth1_dq * dq_dx, 1.0 + dth1_dq * dq_dth],
    ])
}

/// Determinant of the Jacobian of [`map_f`] in closed form: the cross terms
/// cancel and the determinant is the product of the radial contraction and
/// the global contraction `lambda`.
pub fn det_f(state: ASState, p: &ASParams) -> Result<f64, ModelError> {
    let q = bracket(state, p);
    if q <= 0.0 {
        return Err(ModelError::NonpositiveBracket(q));
    }
    let r = p.ratio();
    let k = p.epsilon.powf(1.0 - r) * p.mu.powf(r - 1.0);
    Ok(k * r * q.powf(r - 1.0) * p.lambda)
}

/// `gamma(mu) = (omega/beta) ln(1/mu)`, the logarithmic parameter.
pub fn gamma(p: &ASParams, mu: f64) -> f64 {
    (p.omega / p.beta) * (1.0 / mu).ln()
}

/// The integer offset of the `mu_n` ladder: smallest integer exceeding
/// `gamma(mu0)`.
pub fn ladder_offset(p: &ASParams, mu0: f64) -> u32 {
    (gamma(p, mu0).floor() as u32) + 1
}

/// Member `(n, a)` of the reparametrized family: `mu_n` solves
/// `gamma(mu_n) = N + 2 pi (n - 1)` and `mu(n, a) = mu_n e^{-(beta/omega) a}`.
pub fn reparametrize(p: &ASParams, mu0: f64, n: u32, a: f64) -> FamilyIndex {
    assert!(n >= 1, "the family index starts at n = 1");
    let big_n = ladder_offset(p, mu0) as f64;
    let target = big_n + TAU * (n - 1) as f64;
    let b_n = (-(p.beta / p.omega) * target).exp();
    let mu_na = b_n * (-(p.beta / p.omega) * a).exp();
    FamilyIndex { n, a, b_n, mu_na }
}

/// The 1D singular limit of the family at parameter `a`: the X-component
/// collapses to 0 and the phase component becomes an expanding circle map
/// with an `X0`-dependent shear.
///
/// Note the integer ladder offset `N` contributes a constant rotation
/// `N mod 2 pi` to the finite-`mu` family; the family `F_{a, b_n}` converges
/// to this limit with parameter `a + N mod 2 pi`.
#[derive(Debug, Clone, Copy)]
pub struct SingularMap {
    pub params: ASParams,
    pub a: f64,
}

impl SingularMap {
    /// Full 2D image `(0, theta1)`.
    pub fn apply(&self, x0: f64, theta0: f64) -> (f64, f64) {
        (0.0, wrap_angle(self.lift_theta(x0, theta0)))
    }

    /// Unreduced phase component.
    pub fn lift_theta(&self, x0: f64, theta0: f64) -> f64 {
        let p = &self.params;
        let q = p.lambda * x0 + p.b * (1.0 + p.a_amp * theta0.sin());
        theta0 + p.xi1 + (p.omega / p.beta) * p.epsilon.ln() + self.a
            - (p.omega / p.beta) * q.ln()
    }
}

pub fn singular_limit(p: &ASParams, a: f64) -> SingularMap {
    SingularMap { params: *p, a }
}

/// Restriction of the singular limit to the invariant circle `X = 0`, with
/// derivatives in closed form.
#[derive(Debug, Clone, Copy)]
pub struct CircleMap {
    pub params: ASParams,
    pub a: f64,
}

pub fn circle_map(p: &ASParams, a: f64) -> CircleMap {
    CircleMap { params: *p, a }
}

impl CircleMap {
    /// Unreduced image (lift with the identity as linear part).
    pub fn lift(&self, theta: f64) -> f64 {
        SingularMap { params: self.params, a: self.a }.lift_theta(0.0, theta)
    }

    pub fn apply(&self, theta: f64) -> f64 {
        wrap_angle(self.lift(theta))
    }

    /// `f' = 1 - (omega/beta) A cos(theta) / (1 + A sin(theta))`.
    pub fn d1(&self, theta: f64) -> f64 {
        let p = &self.params;
        let w = 1.0 + p.a_amp * theta.sin();
        1.0 - (p.omega / p.beta) * p.a_amp * theta.cos() / w
    }

    /// `f'' = (omega/beta) (A sin(theta) + A^2) / (1 + A sin(theta))^2`.
    pub fn d2(&self, theta: f64) -> f64 {
        let p = &self.params;
        let a = p.a_amp;
        let w = 1.0 + a * theta.sin();
        (p.omega / p.beta) * (a * theta.sin() + a * a) / (w * w)
    }

    /// `f''' = (omega/beta) A cos(theta) (1 - A sin(theta) - 2 A^2)
    ///         / (1 + A sin(theta))^3`.
    pub fn d3(&self, theta: f64) -> f64 {
        let p = &self.params;
        let a = p.a_amp;
        let s = theta.sin();
        let w = 1.0 + a * s;
        (p.omega / p.beta) * a * theta.cos() * (1.0 - a * s - 2.0 * a * a) / (w * w * w)
    }
}

/// Dump an orbit of the model map as CSV (`iterate, X, theta`).
pub fn write_model_orbit_csv<W: Write>(
    states: &[ASState],
    w: W,
) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iterate", "X", "theta"])?;
    for (i, s) in states.iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            format!("{:.16e}", s.x),
            format!("{:.16e}", s.theta),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> ASParams {
        ASParams {
            alpha: 2.0,
            beta: 1.0,
            epsilon: 0.1,
            lambda: 0.5,
            xi1: 1.3,
            xi2: 0.7,
            b: 1.0,
            a_amp: 0.3,
            omega: 1.0,
            mu: 1e-5,
        }
    }

    #[test]
    fn local_map_reference_values() {
        let p = params();
        let (x1, th1) = map_n(0.01, 0.0, &p).unwrap();
        assert!((x1 - 1e-3).abs() < 1e-18);
        assert!((th1 - 10f64.ln()).abs() < 1e-14);
        // boundary: y = eps passes through instantly
        let (x1, th1) = map_n(p.epsilon, 0.4, &p).unwrap();
        assert!((x1 - p.epsilon).abs() < 1e-16);
        assert!((th1 - 0.4).abs() < 1e-15);
        // power-law scaling
        let (a, _) = map_n(0.02, 0.0, &p).unwrap();
        let (b, _) = map_n(0.01, 0.0, &p).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!(matches!(map_n(0.0, 0.0, &p), Err(ModelError::BelowStableManifold(_))));
        assert!(matches!(map_n(-0.1, 0.0, &p), Err(ModelError::BelowStableManifold(_))));
        assert!(matches!(map_n(0.2, 0.0, &p), Err(ModelError::OutsideLocalChart(..))));
    }

    #[test]
    fn global_map_reference_values() {
        let mut p = params();
        p.mu = 1e-3;
        p.a_amp = 0.5;
        let (y, th) = map_m(0.0, 0.0, &p);
        assert!((y - 1e-3).abs() < 1e-18);
        assert!((th - wrap_angle(p.xi1 + p.mu * p.xi2)).abs() < 1e-15);
        // maximum over theta0 at fixed x0
        let (y_max, _) = map_m(0.0, std::f64::consts::FRAC_PI_2, &p);
        assert!((y_max - p.mu * p.b * 1.5).abs() < 1e-18);
        // unperturbed limit
        p.mu = 0.0;
        let (y, th) = map_m(0.3, 1.0, &p);
        assert!((y - 0.15).abs() < 1e-16);
        assert!((th - wrap_angle(1.0 + p.xi1)).abs() < 1e-15);
    }

    #[test]
    fn composition_identity() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = ASState::new(rng.gen_range(0.0..10.0 * p.b), rng.gen_range(0.0..TAU));
            let f = map_f(s, &p).unwrap();
            // N o M on physical x = mu X, then rescale back.
            let (y_hat, th_hat) = map_m(p.mu * s.x, s.theta, &p);
            let (x1, th1) = map_n(y_hat, th_hat, &p).unwrap();
            assert!((f.x - x1 / p.mu).abs() < 1e-13 * (1.0 + f.x.abs()));
            let dth = wrap_angle(f.theta - th1 + std::f64::consts::PI) - std::f64::consts::PI;
            assert!(dth.abs() < 1e-12, "phase mismatch {dth}");
        }
    }

    #[test]
    fn mu_scaling_of_x_component() {
        let p1 = params();
        let mut p2 = params();
        p2.mu = p1.mu / 10.0;
        let s = ASState::new(2.0, 0.7);
        let f1 = map_f(s, &p1).unwrap();
        let f2 = map_f(s, &p2).unwrap();
        assert!((f2.x / f1.x - 0.1).abs() < 1e-13);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = params();
        let s = ASState::new(1.7, 2.1);
        let j = jacobian_f(s, &p).unwrap();
        let h = 1e-6;
        let num = |i: usize, dx: f64, dth: f64| -> f64 {
            let a = map_f(ASState { x: s.x + dx, theta: s.theta + dth }, &p).unwrap();
            let b = map_f(ASState { x: s.x - dx, theta: s.theta - dth }, &p).unwrap();
            if i == 0 {
                (a.x - b.x) / (2.0 * h)
            } else {
                let d = a.theta - b.theta;
                (wrap_angle(d + std::f64::consts::PI) - std::f64::consts::PI) / (2.0 * h)
            }
        };
        let fd = [
            [num(0, h, 0.0), num(0, 0.0, h)],
            [num(1, h, 0.0), num(1, 0.0, h)],
        ];
        for i in 0..2 {
            for j2 in 0..2 {
                let scale = 1.0 + fd[i][j2].abs();
                assert!((j[i][j2] - fd[i][j2]).abs() < 1e-6 * scale, "entry {i}{j2}");
            }
        }
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!((det - det_f(s, &p).unwrap()).abs() < 1e-12 * det.abs());
    }

    #[test]
    fn equivariance_mod_two_pi() {
        let p = params();
        let s1 = ASState::new(0.9, 1.1);
        let s2 = ASState::new(0.9, 1.1 + TAU);
        let (f1, f2) = (map_f(s1, &p).unwrap(), map_f(s2, &p).unwrap());
        assert_eq!(f1.x, f2.x);
        assert!((f1.theta - f2.theta).abs() < 1e-12);
    }

    #[test]
    fn reparametrization_identities() {
        let p = params();
        let mu0 = MU0_DEFAULT;
        for n in 1..6u32 {
            let i0 = reparametrize(&p, mu0, n, 0.0);
            assert_eq!(i0.mu_na, i0.b_n);
            let ia = reparametrize(&p, mu0, n, 1.7);
            assert!((gamma(&p, ia.mu_na) - gamma(&p, ia.b_n) - 1.7).abs() < 1e-10);
            let next = reparametrize(&p, mu0, n + 1, 0.0);
            let ratio = next.b_n / i0.b_n;
            assert!((ratio - (-TAU * p.beta / p.omega).exp()).abs() < 1e-15);
            assert!(i0.b_n <= mu0);
        }
    }

    #[test]
    fn singular_limit_convergence_and_rate() {
        let p = params();
        let a = 0.8;
        let mu0 = MU0_DEFAULT;
        let shift = ladder_offset(&p, mu0) as f64;
        let limit = singular_limit(&p, wrap_angle(a + shift));
        let mut sups = Vec::new();
        let mut xsups = Vec::new();
        let mut bs = Vec::new();
        for n in 1..=5u32 {
            let idx = reparametrize(&p, mu0, n, a);
            let mut pm = p;
            pm.mu = idx.mu_na;
            let mut sup: f64 = 0.0;
            let mut xsup: f64 = 0.0;
            for i in 0..100 {
                for j in 0..100 {
                    let x0 = 10.0 * p.b * i as f64 / 99.0;
                    let th0 = TAU * j as f64 / 100.0;
                    let f = map_f(ASState::new(x0, th0), &pm).unwrap();
                    let (_, th_lim) = limit.apply(x0, th0);
                    let dth = wrap_angle(f.theta - th_lim + std::f64::consts::PI)
                        - std::f64::consts::PI;
                    sup = sup.max(f.x.abs() + dth.abs());
                    xsup = xsup.max(f.x.abs());
                }
            }
            sups.push(sup);
            xsups.push(xsup);
            bs.push(idx.b_n);
        }
        for w in sups.windows(2) {
            assert!(w[1] < w[0], "sup discrepancy not decreasing: {sups:?}");
        }
        // log-log slope of sup |X1| against b_n: expect alpha/beta - 1 = 1.
        let n = bs.len() as f64;
        let xs: Vec<f64> = bs.iter().map(|b| b.ln()).collect();
        let ys: Vec<f64> = xsups.iter().map(|v| v.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let slope = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.1, "fitted exponent {slope}");
    }

    #[test]
    fn circle_map_derivatives_match_finite_differences() {
        let mut p = params();
        p.omega = 10.0; // omega/beta = 10
        let f = circle_map(&p, 0.3);
        let h = 1e-5;
        for k in 0..16 {
            let th = TAU * k as f64 / 16.0 + 0.05;
            let d1 = (f.lift(th + h) - f.lift(th - h)) / (2.0 * h);
            assert!((f.d1(th) - d1).abs() < 1e-7 * (1.0 + d1.abs()), "d1 at {th}");
            let d2 = (f.d1(th + h) - f.d1(th - h)) / (2.0 * h);
            assert!((f.d2(th) - d2).abs() < 1e-6 * (1.0 + d2.abs()), "d2 at {th}");
            let d3 = (f.d2(th + h) - f.d2(th - h)) / (2.0 * h);
            assert!((f.d3(th) - d3).abs() < 1e-5 * (1.0 + d3.abs()), "d3 at {th}");
        }
    }

    #[test]
    fn rigid_rotation_without_wave() {
        let mut p = params();
        // a_amp = 0 is outside ASParams' open interval; take the limit map
        // directly by evaluating the derivative formulas with a tiny
        // amplitude and checking the analytic degeneration.
        p.a_amp = 1e-300;
        let f = circle_map(&p, 0.0);
        let mut signs = 0;
        let mut prev = f.d1(0.0);
        for k in 1..=10000 {
            let th = TAU * k as f64 / 10000.0;
            let d = f.d1(th);
            assert!((d - 1.0).abs() < 1e-12);
            if (d < 1.0) != (prev < 1.0) {
                signs += 1;
            }
            prev = d;
        }
        let _ = signs;
    }

    #[test]
    fn two_critical_points_for_strong_expansion() {
        let mut p = params();
        p.omega = 100.0; // omega/beta = 100 >> 1
        let f = circle_map(&p, 0.0);
        let n = 10_000;
        let mut changes = 0;
        let mut prev = f.d1(0.0);
        for k in 1..=n {
            let th = TAU * k as f64 / n as f64;
            let d = f.d1(th);
            if (d < 0.0) != (prev < 0.0) {
                changes += 1;
            }
            prev = d;
        }
        assert_eq!(changes, 2, "expected exactly two critical points");
    }

    #[test]
    fn det_bounded_on_domain_uniformly_in_a() {
        let p = params();
        let mu0 = MU0_DEFAULT;
        for &a in &[0.0, 1.0, 2.0, 4.0, 6.0] {
            let idx = reparametrize(&p, mu0, 3, a);
            let mut pm = p;
            pm.mu = idx.mu_na;
            let mut lo = f64::MAX;
            let mut hi = f64::MIN;
            for i in 0..50 {
                for j in 0..50 {
                    let s = ASState::new(
                        10.0 * p.b * i as f64 / 49.0,
                        TAU * j as f64 / 50.0,
                    );
                    let d = det_f(s, &pm).unwrap();
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            assert!(lo > 0.0 && hi / lo < 100.0, "det ratio {}", hi / lo);
        }
    }

    #[test]
    fn orbit_csv_round_trip() {
        let p = params();
        let mut s = ASState::new(1.0, 0.5);
        let mut orbit = vec![s];
        for _ in 0..20 {
            s = map_f(s, &p).unwrap();
            orbit.push(s);
        }
        let mut buf = Vec::new();
        write_model_orbit_csv(&orbit, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().count() == 22);
        assert!(text.starts_with("iterate,X,theta"));
    }

    #[test]
    fn params_validation() {
        let mut p = params();
        assert!(p.validate().is_ok());
        p.beta = 3.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.a_amp = 1.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.lambda = 0.0;
        assert!(p.validate().is_err());
    }
}
