//! Splitting integrals along the homoclinic orbit: the constants `A`, `C`,
//! `S`, their truncations to the sample window, the admissible prefactor
//! interval `[rho1, rho2]`, the wave coefficients `c1`, `c2`, and the scales
//! `K1`, `P_L`.
//!
//! The integrands are `(u + v) * {h, cos(omega s), sin(omega s)} *
//! exp(-int_0^s E)`; beyond the truncation window the integrand is continued
//! as a pure exponential with the saddle rates, which gives closed-form tail
//! corrections (exact whenever the field is linear past the truncation
//! radius, as in the glued-loop fixture).

use crate::dynsys::ForcingProfile;
use crate::homoclinic::{HomoclinicOrbit, SaddleInfo, Window};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MelnikovError {
    #[error("window too short: tail estimate {tail} exceeds 1% of |A_L| = {a_l}")]
    EnlargeWindow { tail: f64, a_l: f64 },
    #[error("A vanishes within tolerance {0}: nondegeneracy (a) fails")]
    DegenerateA(f64),
    #[error("-rho * A_L = {0} is not positive: rho outside the admissible range")]
    WrongSign(f64),
    #[error("grid too coarse: need at least {0} samples")]
    GridTooCoarse(usize),
}

/// The splitting integrals and the admissible prefactor interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MelnikovData {
    pub a: f64,
    pub c: f64,
    pub s: f64,
    pub a_l: f64,
    pub c_l: f64,
    pub s_l: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub omega: f64,
    pub window: Window,
    /// Bound on `|A - A_L|` (and likewise for C, S) from the exponential
    /// tail model.
    pub tail_estimate: f64,
}

/// Coefficients of the leading-order wave term of the section map, plus the
/// scale factors of the affine part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub p_l: f64,
    pub rho: f64,
    /// `sqrt(c1^2 + c2^2)`; the admissible band is `(1/4, 1/2)`.
    pub band: f64,
    pub band_in_range: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H2Report {
    pub pass_a: bool,
    pub pass_b: bool,
    pub pass: bool,
    pub tol: f64,
    pub abs_a: f64,
    pub wave_amplitude: f64,
}

/// Exponential decay rates of the integrand beyond the window: `forward`
/// applies for `s > L+` (the rate is `beta`, from `exp(-int E)` with
/// `E -> beta` on the incoming leg) and `backward` for `s < -L-` (rate
/// `alpha`).
#[derive(Debug, Clone, Copy)]
pub struct TailRates {
    pub forward: f64,
    pub backward: f64,
}

impl TailRates {
    pub fn from_saddle(saddle: &SaddleInfo) -> Self {
        TailRates { forward: saddle.beta, backward: saddle.alpha }
    }
}

/// Fourth-order cumulative integral of uniformly sampled values (step `h`),
/// anchored at the first node. Uses the cubic Newton–Cotes rule for each
/// interval, with one-sided stencils at the ends.
pub fn cumulative_integral(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "need at least 4 samples");
    let mut cum = vec![0.0; n];
    // First interval: cubic through f[0..4], integrated over [0, h].
    cum[1] = cum[0] + h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]);
    for i in 1..n - 2 {
        cum[i + 1] =
            cum[i] + h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2]);
    }
    // Last interval: mirrored one-sided stencil.
    cum[n - 1] = cum[n - 2]
        + h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4]);
    cum
}

/// Composite Simpson on a uniform grid; falls back to the 3/8 rule for the
/// final panel when the interval count is odd.
pub fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1; // intervals
    assert!(n >= 4);
    let (n_simpson, tail) = if n % 2 == 0 { (n, 0.0) } else {
        // 3/8 rule over the last three intervals, Simpson over the rest.
        let m = f.len();
        (n - 3, 3.0 * h / 8.0 * (f[m - 4] + 3.0 * f[m - 3] + 3.0 * f[m - 2] + f[m - 1]))
    };
    let mut acc = f[0] + f[n_simpson];
    let mut i = 1;
    while i < n_simpson {
        acc += 4.0 * f[i];
        if i + 1 < n_simpson {
            acc += 2.0 * f[i + 1];
        }
        i += 2;
    }
    acc * h / 3.0 + tail
}

/// Cubic Lagrange interpolation of uniformly sampled values at parameter
/// `x` (in units of the grid step, measured from `f[0]`).
fn cubic_interp(f: &[f64], x: f64) -> f64 {
    let n = f.len();
    let i = (x.floor() as isize).clamp(1, n as isize - 3) as usize;
    let t = x - i as f64; // in [-1, 2] near the stencil center
    let (fm, f0, f1, f2) = (f[i - 1], f[i], f[i + 1], f[i + 2]);
    -fm * t * (t - 1.0) * (t - 2.0) / 6.0 + f0 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
        - f1 * (t + 1.0) * t * (t - 2.0) / 2.0
        + f2 * (t + 1.0) * t * (t - 1.0) / 6.0
}

/// Core quadrature: given uniform samples `s`, the weight `w = (u+v) h`, and
/// the expansion rate `e`, produce the truncated integrals and the
/// tail-corrected full integrals.
pub fn acs_from_samples(
    s: &[f64],
    w: &[f64],
    e: &[f64],
    omega: f64,
    rates: TailRates,
    window: Window,
) -> Result<MelnikovData, MelnikovError> {
    let data = acs_from_samples_unchecked(s, w, e, omega, rates, window)?;
    if data.tail_estimate > 0.01 * data.a_l.abs() {
        return Err(MelnikovError::EnlargeWindow {
            tail: data.tail_estimate,
            a_l: data.a_l,
        });
    }
    Ok(data)
}

/// Same as [`acs_from_samples`] but without the tail-size gate: the
/// truncated values `A_L`, `C_L`, `S_L` are always valid for the given
/// window; the corrected `A`, `C`, `S` carry the reported `tail_estimate`
/// as their error bar, whatever its size. Used when the window is dictated
/// externally (e.g. matched to flow sections).
pub fn acs_from_samples_unchecked(
    s: &[f64],
    w: &[f64],
    e: &[f64],
    omega: f64,
    rates: TailRates,
    window: Window,
) -> Result<MelnikovData, MelnikovError> {
    let n = s.len();
    if n < 8 {
        return Err(MelnikovError::GridTooCoarse(8));
    }
    let h = (s[n - 1] - s[0]) / (n - 1) as f64;

    // Inner integral int_0^s E, accumulated once, re-anchored at s = 0.
    let mut cum = cumulative_integral(e, h);
    let at_zero = cubic_interp(&cum, -s[0] / h);
    for c in cum.iter_mut() {
        *c -= at_zero;
    }

    let g: Vec<f64> = (0..n).map(|i| w[i] * (-cum[i]).exp()).collect();
    let gc: Vec<f64> = (0..n).map(|i| g[i] * (omega * s[i]).cos()).collect();
    let gs: Vec<f64> = (0..n).map(|i| g[i] * (omega * s[i]).sin()).collect();

    let a_l = simpson(&g, h);
    let c_l = simpson(&gc, h);
    let s_l = simpson(&gs, h);

    // Closed-form tails of g(end) * exp(-rate * (s - L+)) * {1, cos, sin}
    // over [L+, inf) and the mirrored backward version over (-inf, -L-].
    let (rf, rb) = (rates.forward, rates.backward);
    let (lp, lm) = (s[n - 1], s[0]);
    let (g_fwd, g_bwd) = (g[n - 1], g[0]);
    let (cp, sp) = ((omega * lp).cos(), (omega * lp).sin());
    let (cm, sm) = ((omega * lm).cos(), (omega * lm).sin());
    let df = rf * rf + omega * omega;
    let db = rb * rb + omega * omega;
    let tail_a = g_fwd / rf + g_bwd / rb;
    let tail_c = g_fwd * (rf * cp - omega * sp) / df + g_bwd * (rb * cm + omega * sm) / db;
    let tail_s = g_fwd * (rf * sp + omega * cp) / df + g_bwd * (rb * sm - omega * cm) / db;
    let tail_estimate = g_fwd.abs() / rf + g_bwd.abs() / rb;

    let a = a_l + tail_a;
    let c = c_l + tail_c;
    let s_full = s_l + tail_s;

    let wave = (c * c + s_full * s_full).sqrt();
    let (rho1, rho2) = if a != 0.0 {
        (-(202.0 / 99.0) * wave / a, -(396.0 / 101.0) * wave / a)
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(MelnikovData {
        a,
        c,
        s: s_full,
        a_l,
        c_l,
        s_l,
        rho1,
        rho2,
        omega,
        window,
        tail_estimate,
    })
}

/// Compute the splitting data for a homoclinic orbit under the forcing
/// profile `h` at frequency `omega`.
pub fn compute_acs(
    orbit: &HomoclinicOrbit,
    h: &dyn ForcingProfile,
    omega: f64,
    saddle: &SaddleInfo,
) -> Result<MelnikovData, MelnikovError> {
    let data = compute_acs_unchecked(orbit, h, omega, saddle)?;
    if data.tail_estimate > 0.01 * data.a_l.abs() {
        return Err(MelnikovError::EnlargeWindow {
            tail: data.tail_estimate,
            a_l: data.a_l,
        });
    }
    Ok(data)
}

/// Ungated variant of [`compute_acs`]; see [`acs_from_samples_unchecked`].
pub fn compute_acs_unchecked(
    orbit: &HomoclinicOrbit,
    h: &dyn ForcingProfile,
    omega: f64,
    saddle: &SaddleInfo,
) -> Result<MelnikovData, MelnikovError> {
    let w: Vec<f64> = orbit
        .ell
        .iter()
        .zip(&orbit.tangent)
        .map(|(p, t)| (t[0] + t[1]) * h.h(p[0], p[1]))
        .collect();
    acs_from_samples_unchecked(
        &orbit.s_grid,
        &w,
        &orbit.e_rate,
        omega,
        TailRates::from_saddle(saddle),
        orbit.window,
    )
}

/// Admissible prefactor interval, ordered `(min, max)`.
pub fn rho_interval(data: &MelnikovData, tol: f64) -> Result<(f64, f64), MelnikovError> {
    if data.a.abs() <= tol {
        return Err(MelnikovError::DegenerateA(tol));
    }
    let wave = (data.c * data.c + data.s * data.s).sqrt();
    let r1 = -(202.0 / 99.0) * wave / data.a;
    let r2 = -(396.0 / 101.0) * wave / data.a;
    Ok(if r1 <= r2 { (r1, r2) } else { (r2, r1) })
}

/// Wave coefficients and affine scales of the section map at a given
/// prefactor `rho`.
pub fn wave_coefficients(
    data: &MelnikovData,
    rho: f64,
    orbit: &HomoclinicOrbit,
) -> Result<WaveCoefficients, MelnikovError> {
    if -rho * data.a_l <= 0.0 {
        return Err(MelnikovError::WrongSign(-rho * data.a_l));
    }
    let lm = data.window.l_minus;
    let (cl, sl) = ((data.omega * lm).cos(), (data.omega * lm).sin());
    let c1 = (data.c_l * cl - data.s_l * sl) / (data.a_l * rho);
    let c2 = (data.s_l * cl + data.c_l * sl) / (data.a_l * rho);

    let cum = crate::homoclinic::cumulative_e(orbit);
    let int_forward = *cum.last().unwrap();
    let int_full = cum.last().unwrap() - cum.first().unwrap();
    let k1 = -rho * data.a_l * int_forward.exp();
    let p_l = int_full.exp();

    let band = (c1 * c1 + c2 * c2).sqrt();
    Ok(WaveCoefficients {
        c1,
        c2,
        k1,
        p_l,
        rho,
        band,
        band_in_range: band > 0.25 && band < 0.5,
    })
}

/// Nondegeneracy of the splitting data: `|A| > tol` and `C^2 + S^2 > tol^2`.
pub fn check_h2(data: &MelnikovData, tol: f64) -> H2Report {
    let wave = (data.c * data.c + data.s * data.s).sqrt();
    let pass_a = data.a.abs() > tol;
    let pass_b = wave > tol;
    H2Report {
        pass_a,
        pass_b,
        pass: pass_a && pass_b,
        tol,
        abs_a: data.a.abs(),
        wave_amplitude: wave,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{ConstantForcing, ForcedField};
    use crate::fixtures::GluedLoop;
    use crate::homoclinic::{compute_homoclinic, locate_saddle};
    use std::sync::Arc;

    fn synthetic(l: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        // u + v = e^{-|s|}, E = 0, h = 1, with s = 0 on a panel boundary.
        let s: Vec<f64> = (0..=n).map(|i| -l + 2.0 * l * i as f64 / n as f64).collect();
        let w: Vec<f64> = s.iter().map(|&x| (-x.abs()).exp()).collect();
        let e = vec![0.0; n + 1];
        (s, w, e)
    }

    fn synthetic_window(l: f64) -> Window {
        Window { l_minus: l, l_plus: l, epsilon: 0.05 }
    }

    #[test]
    fn synthetic_integrand_closed_forms() {
        let (s, w, e) = synthetic(10.0, 1 << 16);
        for &omega in &[1.0, 5.0, 20.0] {
            let d = acs_from_samples(
                &s,
                &w,
                &e,
                omega,
                TailRates { forward: 1.0, backward: 1.0 },
                synthetic_window(10.0),
            )
            .unwrap();
            assert!((d.a - 2.0).abs() < 1e-10, "A at omega {omega}: {}", d.a);
            let c_exact = 2.0 / (1.0 + omega * omega);
            assert!((d.c - c_exact).abs() < 1e-10, "C at omega {omega}: {}", d.c);
            assert!(d.s.abs() < 1e-12, "S at omega {omega}: {}", d.s);
        }
    }

    #[test]
    fn quadrature_fourth_order_convergence() {
        // Compare truncated values on nested grids against the finest one.
        let omega = 5.0;
        let exact = {
            let (s, w, e) = synthetic(10.0, 1 << 17);
            acs_from_samples(&s, &w, &e, omega, TailRates { forward: 1.0, backward: 1.0 },
                synthetic_window(10.0)).unwrap()
        };
        let mut errs = Vec::new();
        for k in [11usize, 12, 13] {
            let (s, w, e) = synthetic(10.0, 1 << k);
            let d = acs_from_samples(&s, &w, &e, omega, TailRates { forward: 1.0, backward: 1.0 },
                synthetic_window(10.0)).unwrap();
            errs.push((d.c_l - exact.c_l).abs());
        }
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1].max(1e-16);
            assert!(ratio > 8.0, "convergence ratio {ratio} below 4th order");
        }
    }

    #[test]
    fn rho_interval_reference_values() {
        let mut d = dummy_data();
        d.a = -1.0;
        d.c = 1.0;
        d.s = 0.0;
        let (r1, r2) = rho_interval(&d, 1e-12).unwrap();
        assert_eq!(r1, 202.0 / 99.0);
        assert_eq!(r2, 396.0 / 101.0);
        d.a = 1.0;
        let (r1, r2) = rho_interval(&d, 1e-12).unwrap();
        assert_eq!(r1, -396.0 / 101.0);
        assert_eq!(r2, -202.0 / 99.0);
        d.a = 0.0;
        assert!(rho_interval(&d, 1e-12).is_err());
    }

    fn dummy_data() -> MelnikovData {
        MelnikovData {
            a: 1.0,
            c: 0.0,
            s: 0.0,
            a_l: 1.0,
            c_l: 0.0,
            s_l: 0.0,
            rho1: f64::NAN,
            rho2: f64::NAN,
            omega: 1.0,
            window: synthetic_window(10.0),
            tail_estimate: 0.0,
        }
    }

    #[test]
    fn h2_report_cases() {
        let mut d = dummy_data();
        d.a = 2.0;
        d.c = 0.5;
        assert!(check_h2(&d, 1e-6).pass);
        d.a = 0.0;
        let r = check_h2(&d, 1e-6);
        assert!(!r.pass_a && r.pass_b && !r.pass);
        d.a = 2.0;
        d.c = 0.0;
        d.s = 0.0;
        let r = check_h2(&d, 1e-6);
        assert!(r.pass_a && !r.pass_b && !r.pass);
    }

    fn glued_pipeline(
        epsilon: f64,
        omega: f64,
        gated: bool,
    ) -> (MelnikovData, crate::homoclinic::HomoclinicOrbit) {
        let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
        let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12).unwrap();
        let orbit = compute_homoclinic(&field, &saddle, epsilon, 1e-6).unwrap();
        let h = ConstantForcing(1.0);
        let data = if gated {
            compute_acs(&orbit, &h, omega, &saddle).unwrap()
        } else {
            compute_acs_unchecked(&orbit, &h, omega, &saddle).unwrap()
        };
        (data, orbit)
    }

    #[test]
    fn tail_gate_trips_on_short_window() {
        let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
        let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12).unwrap();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-8).unwrap();
        let err = compute_acs(&orbit, &ConstantForcing(1.0), 2.0, &saddle).unwrap_err();
        assert!(matches!(err, MelnikovError::EnlargeWindow { .. }));
    }

    #[test]
    fn glued_loop_window_stability() {
        // The second window roughly doubles both L- and L+ relative to the
        // first; the tail-corrected integrals must agree.
        let (d1, _) = glued_pipeline(1e-2, 2.0, false);
        let (d2, _) = glued_pipeline(2e-5, 2.0, true);
        assert!((d1.a - d2.a).abs() < 1e-6, "A drift {}", (d1.a - d2.a).abs());
        assert!((d1.c - d2.c).abs() < 1e-6, "C drift {}", (d1.c - d2.c).abs());
        assert!((d1.s - d2.s).abs() < 1e-6, "S drift {}", (d1.s - d2.s).abs());
    }

    #[test]
    fn wave_band_at_interval_midpoint() {
        let (data, orbit) = glued_pipeline(5e-5, 2.0, true);
        let (r1, r2) = rho_interval(&data, 1e-9).unwrap();
        let rho = 0.5 * (r1 + r2);
        let wc = wave_coefficients(&data, rho, &orbit).unwrap();
        assert!(wc.band_in_range, "band {}", wc.band);
        // Algebraic identity for the amplitude.
        let ident = (data.c_l * data.c_l + data.s_l * data.s_l).sqrt()
            / (data.a_l * rho).abs();
        assert!((wc.band - ident).abs() < 1e-14);
        assert!(wc.k1 > 0.0 && wc.p_l > 0.0);
    }

    #[test]
    fn k1_scales_like_eps_to_beta_over_alpha() {
        // alpha = 2, beta = 1: K1 * eps^{1/2} should be bounded within a
        // factor of 3 across a dyadic range of eps.
        let mut vals = Vec::new();
        for &eps in &[0.1, 0.05, 0.025] {
            let (data, orbit) = glued_pipeline(eps, 2.0, false);
            let (r1, r2) = rho_interval(&data, 1e-9).unwrap();
            let wc = wave_coefficients(&data, 0.5 * (r1 + r2), &orbit).unwrap();
            vals.push(wc.k1 * eps.sqrt());
        }
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi / lo < 3.0, "extreme ratio {}", hi / lo);
    }

    #[test]
    fn phase_covariance_under_anchor_shift() {
        let (data, orbit) = glued_pipeline(5e-5, 2.0, true);
        let omega = data.omega;
        let h = orbit.s_grid[1] - orbit.s_grid[0];
        let delta = 150.0 * h;
        // Shift the anchor: s' = s - delta.
        let mut shifted = orbit.clone();
        for s in shifted.s_grid.iter_mut() {
            *s -= delta;
        }
        shifted.window.l_minus += delta;
        shifted.window.l_plus -= delta;
        let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
        let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12).unwrap();
        let d2 = compute_acs(&shifted, &ConstantForcing(1.0), omega, &saddle).unwrap();

        let inv1 = (data.c * data.c + data.s * data.s).sqrt() / data.a.abs();
        let inv2 = (d2.c * d2.c + d2.s * d2.s).sqrt() / d2.a.abs();
        assert!((inv1 - inv2).abs() < 1e-8, "invariant drift {}", (inv1 - inv2).abs());

        // (C, S) rotate by omega*delta up to the common scalar factor.
        let scale = d2.a / data.a;
        let c_pred = scale * (data.c * (omega * delta).cos() + data.s * (omega * delta).sin());
        let s_pred = scale * (data.s * (omega * delta).cos() - data.c * (omega * delta).sin());
        assert!((d2.c - c_pred).abs() < 1e-8, "C rotation {}", (d2.c - c_pred).abs());
        assert!((d2.s - s_pred).abs() < 1e-8, "S rotation {}", (d2.s - s_pred).abs());
    }

    #[test]
    fn rho_interval_nonempty_when_h2_passes() {
        let (data, _) = glued_pipeline(5e-5, 2.0, true);
        assert!(check_h2(&data, 1e-6).pass);
        let (r1, r2) = rho_interval(&data, 1e-6).unwrap();
        assert!(r2 > r1);
    }
}
