//! Flow-induced return map for the full forced system: entry/exit sections
//! anchored on the homoclinic loop, the two-stage return map (outer passage
//! along the loop, inner passage by the saddle), the leading-order analytic
//! prediction it is compared against, and the logarithmic passage-time law.

use crate::dynsys::{
    integrate_to_section_with_floor, integrate_with_tangent, DynError, ExtendedState,
    ForcedField, LineSection,
};
use crate::homoclinic::{cumulative_e, HomoclinicOrbit, SaddleInfo};
use crate::melnikov::WaveCoefficients;
use serde::Serialize;
use std::io::Write;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum FlowmapError {
    #[error("-rho * A = {0} must be positive (rho outside the valid interval)")]
    WrongSign(f64),
    #[error("entry coordinate Z0 = {0} outside the entry section range ±{1}")]
    OutsideEntry(f64, f64),
    #[error("outer-passage image z/mu = {z} missed the exit section range [{lo}, {hi}]")]
    MissedSigmaPlus { z: f64, lo: f64, hi: f64 },
    #[error("no return to the entry section: {0}")]
    NoReturn(String),
    #[error("periodic-orbit shooting failed: {0}")]
    Shooting(String),
    #[error(transparent)]
    Integration(#[from] DynError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SectionKind {
    /// Entry section, crossing the loop where it leaves the saddle region.
    SigmaMinus,
    /// Exit section, crossing the loop where it re-enters the saddle region.
    SigmaPlus,
}

/// A transverse section through the loop at a fixed orbit parameter, with
/// its one-dimensional normal chart `z -> point + z * normal`.
#[derive(Debug, Clone, Serialize)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub s_anchor: f64,
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub z_range: (f64, f64),
}

impl SectionSpec {
    pub fn to_point(&self, z: f64) -> [f64; 2] {
        [self.point[0] + z * self.normal[0], self.point[1] + z * self.normal[1]]
    }

    pub fn z_of(&self, q: [f64; 2]) -> f64 {
        (q[0] - self.point[0]) * self.normal[0] + (q[1] - self.point[1]) * self.normal[1]
    }

    /// Zero set of the section as a line condition; the value increases in
    /// the flow direction at the anchor, so crossings are detected with
    /// direction +1.
    pub fn line(&self) -> LineSection {
        LineSection {
            n: (self.tangent[0], self.tangent[1]),
            c: self.tangent[0] * self.point[0] + self.tangent[1] * self.point[1],
        }
    }

    pub fn width(&self) -> f64 {
        self.z_range.1 - self.z_range.0
    }
}

/// One evaluated return: rescaled entry/exit coordinates and the two
/// passage times (outer loop, inner saddle region).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReturnSample {
    pub z0: f64,
    pub theta0: f64,
    pub z1: f64,
    pub theta1: f64,
    pub t_outer: f64,
    pub t_inner: f64,
    pub mu: f64,
    /// Exit-section coordinate of the outer stage, in units of mu.
    pub z_mid: f64,
    /// Phase at the exit-section crossing.
    pub theta_mid: f64,
}

/// Build the entry/exit sections from the loop's endpoint frames.
///
/// The entry range is `±(K0 + 1) mu`; the exit range brackets the predicted
/// image `-rho A e^{beta L+} mu` by two orders of magnitude on each side.
pub fn build_sections(
    orbit: &HomoclinicOrbit,
    mu: f64,
    waves: &WaveCoefficients,
    k0hat: f64,
) -> Result<(SectionSpec, SectionSpec), FlowmapError> {
    let n = orbit.s_grid.len();
    let cum = cumulative_e(orbit);
    // K1 = -rho A e^{int_0^{L+} E}; peel the exponential factor back off to
    // recover -rho A.
    let minus_rho_a = waves.k1 * (-cum[n - 1]).exp();
    if minus_rho_a <= 0.0 {
        return Err(FlowmapError::WrongSign(minus_rho_a));
    }
    let frame = |i: usize| -> ([f64; 2], [f64; 2], [f64; 2]) {
        let p = orbit.ell[i];
        let t = orbit.tangent[i];
        (p, t, [t[1], -t[0]])
    };
    let (p_in, t_in, n_in) = frame(0);
    let (p_out, t_out, n_out) = frame(n - 1);
    let lp = orbit.window.l_plus;
    // beta from the terminal expansion rate (E -> beta on the incoming leg)
    let beta = orbit.e_rate[n - 1];
    let half = (k0hat + 1.0) * mu;
    let sigma_minus = SectionSpec {
        kind: SectionKind::SigmaMinus,
        s_anchor: orbit.s_grid[0],
        point: p_in,
        tangent: t_in,
        normal: n_in,
        z_range: (-half, half),
    };
    let lo = 0.1 * minus_rho_a * (k0hat + 1.0) * (beta * lp / 2.0).exp() * mu;
    let hi = 10.0 * minus_rho_a * (k0hat + 1.0) * (2.0 * beta * lp).exp() * mu;
    let sigma_plus = SectionSpec {
        kind: SectionKind::SigmaPlus,
        s_anchor: orbit.s_grid[n - 1],
        point: p_out,
        tangent: t_out,
        normal: n_out,
        z_range: (lo.min(hi), lo.max(hi)),
    };
    Ok((sigma_minus, sigma_plus))
}

/// Estimate the amplitude bound of the hyperbolic periodic orbit continuing
/// the saddle under the forcing: single shooting over one forcing period,
/// then the maximal excursion from the saddle in units of mu.
pub fn estimate_k0hat(field: &ForcedField, saddle: &SaddleInfo) -> Result<f64, FlowmapError> {
    if field.mu <= 0.0 {
        return Err(FlowmapError::Shooting("needs mu > 0".into()));
    }
    let period = std::f64::consts::TAU / field.omega;
    let mut p = [saddle.position.0, saddle.position.1];
    let mut converged = false;
    for _ in 0..40 {
        let start = ExtendedState::new(p[0], p[1], 0.0);
        let (traj, tb) = integrate_with_tangent(field, start, (0.0, period), 1e-12)?;
        let end = traj.end_state();
        let g = [end.x - p[0], end.y - p[1]];
        if g[0].abs().max(g[1].abs()) < 1e-13 {
            converged = true;
            break;
        }
        // Newton on the period map: (M - I) dp = -g
        let m = tb.jacobian_product;
        let a = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if det.abs() < 1e-14 {
            return Err(FlowmapError::Shooting("singular period-map Jacobian".into()));
        }
        p[0] -= (a[1][1] * g[0] - a[0][1] * g[1]) / det;
        p[1] -= (-a[1][0] * g[0] + a[0][0] * g[1]) / det;
    }
    if !converged {
        return Err(FlowmapError::Shooting("period shooting did not converge".into()));
    }
    let start = ExtendedState::new(p[0], p[1], 0.0);
    let (traj, _) = integrate_with_tangent(field, start, (0.0, period), 1e-12)?;
    let mut amp: f64 = 0.0;
    for (_, s) in traj.samples() {
        let dx = s.x - saddle.position.0;
        let dy = s.y - saddle.position.1;
        amp = amp.max((dx * dx + dy * dy).sqrt());
    }
    Ok(amp / field.mu)
}

/// Evaluate the flow-induced return map at one entry point `(Z0, theta0)`
/// (entry coordinate in units of mu).
pub fn return_map_flow(
    field: &ForcedField,
    sections: &(SectionSpec, SectionSpec),
    z0: f64,
    theta0: f64,
    tol: f64,
) -> Result<ReturnSample, FlowmapError> {
    let mu = field.mu;
    if mu <= 0.0 {
        return Err(FlowmapError::NoReturn(
            "mu = 0: the unforced orbit is asymptotic to the saddle".into(),
        ));
    }
    let (sm, sp) = sections;
    let half = sm.z_range.1;
    if z0.abs() * mu > half * (1.0 + 1e-12) {
        return Err(FlowmapError::OutsideEntry(z0, half / mu));
    }
    let p0 = sm.to_point(z0 * mu);
    let start = ExtendedState::new(p0[0], p0[1], theta0);

    // Outer passage: around the loop to the exit section. The loop time is
    // close to the orbit-parameter span, with margin.
    let window = sp.s_anchor - sm.s_anchor;
    let (mid, t_outer, _) = integrate_to_section_with_floor(
        field,
        start,
        &sp.line(),
        1,
        tol,
        window + 20.0,
        mu,
    )
    .map_err(|e| match e {
        DynError::NoCrossing { .. } => {
            FlowmapError::NoReturn("outer passage never reached the exit section".into())
        }
        other => FlowmapError::Integration(other),
    })?;
    let z_mid = sp.z_of([mid.x, mid.y]);
    if z_mid < sp.z_range.0 || z_mid > sp.z_range.1 {
        return Err(FlowmapError::MissedSigmaPlus {
            z: z_mid / mu,
            lo: sp.z_range.0 / mu,
            hi: sp.z_range.1 / mu,
        });
    }

    // Inner passage: by the saddle and back to the entry section; time
    // grows like beta^{-1} ln(1/mu).
    let t_cap = 5.0 * (1.0 / mu).ln() + 50.0;
    let (end, t_inner, _) = integrate_to_section_with_floor(
        field,
        mid,
        &sm.line(),
        1,
        tol,
        t_cap,
        mu * 1e-2,
    )
    .map_err(|e| match e {
        DynError::NoCrossing { .. } => {
            FlowmapError::NoReturn("inner passage exited without returning".into())
        }
        other => FlowmapError::Integration(other),
    })?;
    let z1 = sm.z_of([end.x, end.y]);
    Ok(ReturnSample {
        z0,
        theta0,
        z1: z1 / mu,
        theta1: end.theta,
        t_outer,
        t_inner,
        mu,
        z_mid: z_mid / mu,
        theta_mid: mid.theta,
    })
}

/// Leading-order prediction for one return, with all error terms dropped.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnalyticPrediction {
    /// Predicted exit coordinate (units of mu) after the outer passage.
    pub z_hat: f64,
    /// Predicted phase at the exit section.
    pub theta_hat: f64,
    /// Predicted entry coordinate (units of mu) after the full return.
    pub z1: f64,
    /// Predicted phase at the return.
    pub theta1: f64,
}

/// Outer stage: affine-in-`z` with the sinusoidal wave; inner stage: the
/// saddle power law with the logarithmic phase delay.
pub fn analytic_prediction(
    z0: f64,
    theta0: f64,
    mu: f64,
    waves: &WaveCoefficients,
    orbit: &HomoclinicOrbit,
    saddle: &SaddleInfo,
    omega: f64,
) -> Result<AnalyticPrediction, FlowmapError> {
    let z_hat = waves.k1 * (1.0 + waves.c1 * theta0.sin() + waves.c2 * theta0.cos())
        + waves.p_l * z0;
    if z_hat <= 0.0 {
        return Err(FlowmapError::WrongSign(z_hat));
    }
    let w = orbit.window;
    let theta_hat = theta0 + omega * (w.l_plus + w.l_minus);
    let r = saddle.alpha / saddle.beta;
    let eps = w.epsilon;
    let z1 = (mu / eps).powf(r - 1.0) * z_hat.powf(r);
    let theta1 = theta_hat + (omega / saddle.beta) * (eps / (mu * z_hat)).ln();
    Ok(AnalyticPrediction { z_hat, theta_hat, z1, theta1 })
}

/// Passage-time regression: inner times against `ln(1/mu)`.
#[derive(Debug, Clone, Serialize)]
pub struct PassageTimeReport {
    pub slope: f64,
    pub intercept: f64,
    /// `|slope * beta - 1| < 0.01`.
    pub pass: bool,
    pub max_abs_residual: f64,
    pub samples: Vec<(f64, f64)>,
    /// Surrogate for the inner-contraction bound: `mu^{-1} e^{-alpha T} < 1`
    /// for every sample.
    pub contraction_ok: bool,
}

/// Measure the inner passage time across a dissipation grid at a fixed
/// entry point and regress against `ln(1/mu)`; the slope must be `1/beta`.
pub fn passage_time_check(
    field_at: &dyn Fn(f64) -> ForcedField,
    orbit: &HomoclinicOrbit,
    saddle: &SaddleInfo,
    waves: &WaveCoefficients,
    mu_grid: &[f64],
    z0: f64,
    theta0: f64,
    tol: f64,
) -> Result<PassageTimeReport, FlowmapError> {
    assert!(mu_grid.len() >= 5, "need at least 5 dissipation values");
    let span = mu_grid.iter().fold((f64::MAX, f64::MIN), |a, &m| (a.0.min(m), a.1.max(m)));
    assert!(span.1 / span.0 >= 1e3, "grid must span at least 3 decades");
    let mut samples = Vec::new();
    for &mu in mu_grid {
        let field = field_at(mu);
        let k0 = estimate_k0hat(&field, saddle)?;
        let sections = build_sections(orbit, mu, waves, k0)?;
        let s = return_map_flow(&field, &sections, z0, theta0, tol)?;
        samples.push((mu, s.t_inner));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|&(m, _)| (1.0 / m).ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, t)| t).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0f64, f64::max);
    let contraction_ok = samples
        .iter()
        .all(|&(m, t)| (1.0 / m) * (-saddle.alpha * t).exp() < 1.0);
    Ok(PassageTimeReport {
        slope,
        intercept,
        pass: (slope * saddle.beta - 1.0).abs() < 0.01,
        max_abs_residual,
        samples,
        contraction_ok,
    })
}

/// Dump return samples as CSV.
pub fn write_samples_csv<W: Write>(samples: &[ReturnSample], w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["Z0", "theta0", "Z1", "theta1", "t_M", "t_N", "mu"])?;
    for s in samples {
        wtr.write_record([
            format!("{:.16e}", s.z0),
            format!("{:.16e}", s.theta0),
            format!("{:.16e}", s.z1),
            format!("{:.16e}", s.theta1),
            format!("{:.16e}", s.t_outer),
            format!("{:.16e}", s.t_inner),
            format!("{:.16e}", s.mu),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
