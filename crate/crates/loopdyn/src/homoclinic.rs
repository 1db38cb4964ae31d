//! Homoclinic-orbit computation for the unperturbed planar field: saddle
//! location, nonresonance check, shooting along the unstable manifold,
//! tangent frames `(u, v)` and the normal expansion rate `E(s)`, and the
//! decay-asymptotics cross-checks used to justify the Melnikov tail
//! corrections.

use crate::dynsys::{
    integrate_to_section_with_floor, integrate_with_floor, DynError, ExtendedState,
    ForcedField, LineSection, SectionCondition,
};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

/// Shooting offset along the unstable eigenvector, as a fraction of epsilon.
const SHOOT_OFFSET_FRACTION: f64 = 1e-8;
/// Default bounding box radius for "orbit escapes" detection.
const ESCAPE_RADIUS: f64 = 10.0;
/// Number of orbit samples (uniform in s over the truncation window).
const DEFAULT_SAMPLES: usize = 16384;

#[derive(Error, Debug)]
pub enum HomoclinicError {
    #[error("Newton iteration for the fixed point did not converge")]
    NewtonDiverged,
    #[error("fixed point is not a saddle: eigenvalues {0} and {1}")]
    NotASaddle(f64, f64),
    #[error("no loop: orbit escaped the bounding box (radius {0}) or never returned")]
    NoLoop(f64),
    #[error("no connection at these parameters: closure residual {residual}")]
    NoConnection {
        residual: f64,
        /// The orbit is still returned as data for continuation workflows.
        orbit: Box<HomoclinicOrbit>,
    },
    #[error("zero-velocity sample at s = {0}")]
    DegenerateSample(f64),
    #[error("window too short: fewer than {0} samples in the asymptotic tail")]
    InsufficientTail(usize),
    #[error(transparent)]
    Integration(#[from] DynError),
}

/// Saddle fixed point with its linearization data.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SaddleInfo {
    pub position: (f64, f64),
    /// Magnitude of the contracting eigenvalue.
    pub alpha: f64,
    /// Expanding eigenvalue.
    pub beta: f64,
    pub eigvec_stable: (f64, f64),
    pub eigvec_unstable: (f64, f64),
}

/// Sampled homoclinic loop with frames, expansion rate and window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicOrbit {
    /// Strictly increasing sample parameters over `[-L_minus, L_plus]`.
    pub s_grid: Vec<f64>,
    /// Points `(a(s), b(s))`.
    pub ell: Vec<[f64; 2]>,
    /// Unit tangents `(u(s), v(s))` (normalized velocity).
    pub tangent: Vec<[f64; 2]>,
    /// Normal expansion rate `E(s) = (v, -u) . J . (v, -u)^T`.
    pub e_rate: Vec<f64>,
    pub window: Window,
    /// Distance from the returning endpoint to the local stable manifold.
    pub closure_residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Window {
    pub l_minus: f64,
    pub l_plus: f64,
    pub epsilon: f64,
}

/// Nonresonance report: finite-depth check of
/// `|m alpha - n beta| > d1 (|m| + |n|)^{-d2}` over `m, n in [1, depth]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct H1Report {
    pub dissipative: bool,
    /// Pass is only claimed up to `search_depth`; the full condition is not
    /// machine-checkable.
    pub diophantine_pass: bool,
    /// `(m, n, |m alpha - n beta|, d1 (m + n)^{-d2})` for the tightest pair.
    pub worst_pair: (u32, u32, f64, f64),
    pub search_depth: u32,
}

/// Locate a saddle fixed point of the unforced planar field by Newton from
/// `guess`, and classify its linearization.
pub fn locate_saddle(
    field: &ForcedField,
    guess: (f64, f64),
    tol: f64,
) -> Result<SaddleInfo, HomoclinicError> {
    let (mut x, mut y) = guess;
    let mut converged = false;
    for _ in 0..80 {
        let (vx, vy) = field.planar.v(x, y);
        if (vx * vx + vy * vy).sqrt() < tol {
            converged = true;
            break;
        }
        let j = field.planar.jac(x, y);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-14 {
            return Err(HomoclinicError::NewtonDiverged);
        }
        let dx = (j[1][1] * vx - j[0][1] * vy) / det;
        let dy = (-j[1][0] * vx + j[0][0] * vy) / det;
        x -= dx;
        y -= dy;
        if !x.is_finite() || !y.is_finite() || x.abs() + y.abs() > 1e6 {
            return Err(HomoclinicError::NewtonDiverged);
        }
    }
    if !converged {
        let (vx, vy) = field.planar.v(x, y);
        if (vx * vx + vy * vy).sqrt() >= tol {
            return Err(HomoclinicError::NewtonDiverged);
        }
    }

    let j = field.planar.jac(x, y);
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc <= 0.0 || det >= 0.0 {
        return Err(HomoclinicError::NotASaddle(tr / 2.0, disc));
    }
    let sq = disc.sqrt();
    let lam1 = 0.5 * (tr - sq); // negative (det < 0)
    let lam2 = 0.5 * (tr + sq); // positive
    let eigvec = |lam: f64| -> (f64, f64) {
        // (J - lam I) v = 0; pick the better-conditioned row.
        let r0 = (j[0][0] - lam, j[0][1]);
        let r1 = (j[1][0], j[1][1] - lam);
        let (a, b) = if r0.0.abs() + r0.1.abs() >= r1.0.abs() + r1.1.abs() {
            r0
        } else {
            r1
        };
        let (vx, vy) = (-b, a);
        let n = (vx * vx + vy * vy).sqrt();
        let sign = if vx < 0.0 || (vx == 0.0 && vy < 0.0) { -1.0 } else { 1.0 };
        (sign * vx / n, sign * vy / n)
    };
    Ok(SaddleInfo {
        position: (x, y),
        alpha: -lam1,
        beta: lam2,
        eigvec_stable: eigvec(lam1),
        eigvec_unstable: eigvec(lam2),
    })
}

/// Finite-depth nonresonance check. The verdict means "holds up to depth";
/// exact rational resonances show up as pairs with value 0.
pub fn check_h1(alpha: f64, beta: f64, d1: f64, d2: f64, depth: u32) -> H1Report {
    assert!(depth >= 2, "depth must be at least 2");
    let mut pass = true;
    let mut worst = (1u32, 1u32, f64::INFINITY, 0.0);
    let mut worst_margin = f64::INFINITY;
    for m in 1..=depth {
        for n in 1..=depth {
            let value = (m as f64 * alpha - n as f64 * beta).abs();
            let bound = d1 * ((m + n) as f64).powf(-d2);
            if value <= bound {
                pass = false;
            }
            let margin = value / bound;
            if margin < worst_margin {
                worst_margin = margin;
                worst = (m, n, value, bound);
            }
        }
    }
    H1Report {
        dissipative: beta < alpha && beta > 0.0,
        diophantine_pass: pass,
        worst_pair: worst,
        search_depth: depth,
    }
}

struct RadiusSection {
    center: (f64, f64),
    radius: f64,
}

impl SectionCondition for RadiusSection {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        dx * dx + dy * dy - self.radius * self.radius
    }
    fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        (2.0 * (x - self.center.0), 2.0 * (y - self.center.1))
    }
}

/// Compute the homoclinic orbit of the unperturbed field by shooting a
/// distance `1e-8 * epsilon` along the unstable eigenvector and integrating
/// around the loop until it re-enters the `epsilon/2`-ball.
///
/// The s-parametrization anchors `s = 0` at the sample farthest from the
/// saddle (ties broken toward smaller s), and the truncation window ends
/// where the orbit crosses radius `epsilon/2` (outgoing and incoming).
pub fn compute_homoclinic(
    field: &ForcedField,
    saddle: &SaddleInfo,
    epsilon: f64,
    tol: f64,
) -> Result<HomoclinicOrbit, HomoclinicError> {
    assert!(field.mu == 0.0, "homoclinic computation requires the unperturbed field");
    let delta = SHOOT_OFFSET_FRACTION * epsilon;
    let (cx, cy) = saddle.position;
    let (ux, uy) = saddle.eigvec_unstable;
    let start = ExtendedState::new(cx + delta * ux, cy + delta * uy, 0.0);
    let r_trunc = 0.5 * epsilon;

    // Probe pass at coarse tolerance: does the orbit leave U_{eps/2}, stay in
    // the box, and come back?
    let t_grow = (r_trunc / delta).ln() / saddle.beta;
    let budget = 4.0 * t_grow + 100.0;
    let mut t_ret = None;
    {
        let mut state = start;
        let mut t_acc = 0.0;
        let mut left = false;
        'probe: while t_acc < budget {
            // Error floor at the launch offset keeps the control relative on
            // the exponentially small saddle legs; otherwise the absolute
            // part of the tolerance distorts the time parametrization there.
            let traj = integrate_with_floor(field, state, (0.0, 1.0), 1e-8, delta)?;
            for (tt, s) in traj.samples() {
                let r = ((s.x - cx).powi(2) + (s.y - cy).powi(2)).sqrt();
                if r > ESCAPE_RADIUS {
                    return Err(HomoclinicError::NoLoop(ESCAPE_RADIUS));
                }
                if !left && r > 2.0 * r_trunc {
                    left = true;
                }
                if left && r < r_trunc {
                    t_ret = Some(t_acc + tt);
                    break 'probe;
                }
            }
            state = traj.end_state();
            t_acc += 1.0;
        }
    }
    let t_ret = t_ret.ok_or(HomoclinicError::NoLoop(ESCAPE_RADIUS))?;

    // Accurate pass: event detection on the inward crossing of r = eps/2.
    let section = RadiusSection { center: saddle.position, radius: r_trunc };
    let (q_in, t_in, traj) = integrate_to_section_with_floor(
        field,
        start,
        &section,
        -1,
        // Transverse noise near the return is amplified by the unstable
        // rate; integrate well below the requested closure tolerance.
        tol.min(1e-12),
        t_ret + 2.0,
        delta,
    )?;

    // Outgoing crossing of the same radius: first sign change along the
    // stored trajectory, refined by bisection on the dense output.
    let t_out = {
        let samples = traj.samples();
        let mut bracket = None;
        for w in samples.windows(2) {
            let (t0, s0) = w[0];
            let (t1, s1) = w[1];
            if section.value(s0.x, s0.y) < 0.0 && section.value(s1.x, s1.y) >= 0.0 {
                bracket = Some((t0, t1));
                break;
            }
        }
        let (mut lo, mut hi) = bracket.ok_or(HomoclinicError::NoLoop(ESCAPE_RADIUS))?;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let (x, y) = traj.eval_xy(mid);
            if section.value(x, y) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // Anchor s = 0 at the point of maximal distance from the saddle.
    let t_anchor = {
        let samples = traj.samples();
        let mut best_t = t_out;
        let mut best_r = f64::NEG_INFINITY;
        for &(t, s) in &samples {
            if t < t_out || t > t_in {
                continue;
            }
            let r = ((s.x - cx).powi(2) + (s.y - cy).powi(2)).sqrt();
            if r > best_r {
                best_r = r;
                best_t = t;
            }
        }
        // Polish by solving d(r^2)/dt = 2 (p - c) . V(p) = 0: bisection on
        // the derivative is first-order accurate in the interpolation noise,
        // unlike extremizing the (flat) distance itself.
        let drv = |t: f64| {
            let (x, y) = traj.eval_xy(t);
            let (vx, vy) = field.planar.v(x, y);
            (x - cx) * vx + (y - cy) * vy
        };
        let mut a = (best_t - 0.2).max(t_out);
        let mut b = (best_t + 0.2).min(t_in);
        if drv(a) > 0.0 && drv(b) < 0.0 {
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if drv(mid) > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
        }
        0.5 * (a + b)
    };

    let l_minus = t_anchor - t_out;
    let l_plus = t_in - t_anchor;

    // Closure residual: component of the returning point along the unstable
    // eigenvector (distance to the local stable manifold, to linear order).
    let closure_residual = {
        let (dx, dy) = (q_in.x - cx, q_in.y - cy);
        let (sx, sy) = saddle.eigvec_stable;
        let det = sx * uy - sy * ux;
        ((dx * (-sy) + dy * sx) / det).abs()
    };

    // Uniform s-grid over the window, sampled from the dense output.
    let n = DEFAULT_SAMPLES;
    let mut s_grid = Vec::with_capacity(n + 1);
    let mut ell = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = -l_minus + (l_plus + l_minus) * i as f64 / n as f64;
        let (x, y) = traj.eval_xy(t_anchor + s);
        s_grid.push(s);
        ell.push([x, y]);
    }

    let mut orbit = HomoclinicOrbit {
        s_grid,
        ell,
        tangent: Vec::new(),
        e_rate: Vec::new(),
        window: Window { l_minus, l_plus, epsilon },
        closure_residual,
    };
    frames_and_e(&mut orbit, field)?;

    if closure_residual > tol {
        return Err(HomoclinicError::NoConnection {
            residual: closure_residual,
            orbit: Box::new(orbit),
        });
    }
    Ok(orbit)
}

/// Fill the unit tangent frames `(u, v)` and the normal expansion rate
/// `E(s) = (v, -u) . J(l(s)) . (v, -u)^T` from the field.
pub fn frames_and_e(
    orbit: &mut HomoclinicOrbit,
    field: &ForcedField,
) -> Result<(), HomoclinicError> {
    let mut tangent = Vec::with_capacity(orbit.ell.len());
    let mut e_rate = Vec::with_capacity(orbit.ell.len());
    for (i, p) in orbit.ell.iter().enumerate() {
        let (vx, vy) = field.planar.v(p[0], p[1]);
        let speed = (vx * vx + vy * vy).sqrt();
        if speed < 1e-300 {
            return Err(HomoclinicError::DegenerateSample(orbit.s_grid[i]));
        }
        let (u, v) = (vx / speed, vy / speed);
        let j = field.planar.jac(p[0], p[1]);
        let n = [v, -u];
        let e = n[0] * (j[0][0] * n[0] + j[0][1] * n[1])
            + n[1] * (j[1][0] * n[0] + j[1][1] * n[1]);
        tangent.push([u, v]);
        e_rate.push(e);
    }
    orbit.tangent = tangent;
    orbit.e_rate = e_rate;
    Ok(())
}

/// Decay-asymptotics fit over the truncation window tails.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    /// Least-squares slope of `ln |l(s)|` over the forward tail (expect `-alpha`).
    pub forward_slope: f64,
    /// Slope of `ln |l(-s)|` over the backward tail (expect `-beta`).
    pub backward_slope: f64,
    /// `int_0^{L+} E ds / (beta L+)` (expect -> 1 as the window grows).
    pub forward_e_ratio: f64,
    /// Mean of `E` over the backward tail (samples inside `U_eps`) divided by
    /// `-alpha` (expect -> 1; the full `int_{-L-}^0 E` is anchor-dependent).
    pub backward_e_ratio: f64,
    /// Spread of the partial sums of `int (E + alpha) ds` over the last
    /// backward decade (convergence indicator).
    pub backward_tail_spread: f64,
}

/// Cumulative integral of `E` from `s = 0`, trapezoidal on the sample grid.
/// Returns the value at every grid node.
pub fn cumulative_e(orbit: &HomoclinicOrbit) -> Vec<f64> {
    let n = orbit.s_grid.len();
    let mut cum = vec![0.0; n];
    // index of s = 0 neighborhood: grid is uniform from -L- to L+
    for i in 1..n {
        let ds = orbit.s_grid[i] - orbit.s_grid[i - 1];
        cum[i] = cum[i - 1] + 0.5 * (orbit.e_rate[i] + orbit.e_rate[i - 1]) * ds;
    }
    // shift so the value at the node nearest s = 0 interpolates to zero
    let mut k = 0;
    for (i, &s) in orbit.s_grid.iter().enumerate() {
        if s <= 0.0 {
            k = i;
        }
    }
    let (s0, s1) = (orbit.s_grid[k], orbit.s_grid[(k + 1).min(n - 1)]);
    let frac = if s1 > s0 { -s0 / (s1 - s0) } else { 0.0 };
    let at_zero = cum[k] + frac * (cum[(k + 1).min(n - 1)] - cum[k]);
    for c in cum.iter_mut() {
        *c -= at_zero;
    }
    cum
}

/// Check the exponential decay rates and the `E`-integral asymptotics
/// against the saddle eigenvalues.
pub fn check_asymptotics(
    orbit: &HomoclinicOrbit,
    saddle: &SaddleInfo,
) -> Result<AsymptoticsReport, HomoclinicError> {
    let (cx, cy) = saddle.position;
    let radius =
        |p: &[f64; 2]| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();

    // Tail = samples inside U_epsilon at each end.
    let eps = orbit.window.epsilon;
    let fit = |idx: Vec<usize>| -> Result<f64, HomoclinicError> {
        if idx.len() < 16 {
            return Err(HomoclinicError::InsufficientTail(16));
        }
        let xs: Vec<f64> = idx.iter().map(|&i| orbit.s_grid[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| radius(&orbit.ell[i]).ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, y) in xs.iter().zip(&ys) {
            num += (x - mx) * (y - my);
            den += (x - mx) * (x - mx);
        }
        Ok(num / den)
    };
    let n = orbit.s_grid.len();
    let fwd_idx: Vec<usize> = (0..n).filter(|&i| orbit.s_grid[i] > 0.0 && radius(&orbit.ell[i]) < eps).collect();
    let bwd_idx: Vec<usize> = (0..n).filter(|&i| orbit.s_grid[i] < 0.0 && radius(&orbit.ell[i]) < eps).collect();
    let forward_slope = fit(fwd_idx)?;
    // Backward: slope of ln |l(-s)| vs s is -(slope of ln |l(s)| vs s).
    let backward_slope = -fit(bwd_idx.clone())?;

    let cum = cumulative_e(orbit);
    let forward_e_ratio = cum[n - 1] / (saddle.beta * orbit.window.l_plus);
    let backward_e_ratio = {
        let (&i0, &i1) = (bwd_idx.first().unwrap(), bwd_idx.last().unwrap());
        let span = orbit.s_grid[i1] - orbit.s_grid[i0];
        (cum[i1] - cum[i0]) / (-saddle.alpha * span)
    };

    // Partial sums of int (E + alpha) over the backward tail: successive
    // values over the innermost decade of radii should be nearly constant.
    let mut spread = 0.0;
    if let (Some(&first), Some(&last)) = (bwd_idx.first(), bwd_idx.last()) {
        let _ = last;
        let base = cum[first] + saddle.alpha * orbit.s_grid[first];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &bwd_idx {
            let v = cum[i] + saddle.alpha * orbit.s_grid[i] - base;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        spread = hi - lo;
    }

    Ok(AsymptoticsReport {
        forward_slope,
        backward_slope,
        forward_e_ratio,
        backward_e_ratio,
        backward_tail_spread: spread,
    })
}

/// Export the orbit as CSV with columns `s, a, b, u, v, E` at 17 significant
/// digits.
pub fn write_orbit_csv<W: Write>(orbit: &HomoclinicOrbit, w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["s", "a", "b", "u", "v", "E"])?;
    for i in 0..orbit.s_grid.len() {
        wtr.write_record([
            format!("{:.16e}", orbit.s_grid[i]),
            format!("{:.16e}", orbit.ell[i][0]),
            format!("{:.16e}", orbit.ell[i][1]),
            format!("{:.16e}", orbit.tangent[i][0]),
            format!("{:.16e}", orbit.tangent[i][1]),
            format!("{:.16e}", orbit.e_rate[i]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read an orbit back from the CSV produced by [`write_orbit_csv`]. The
/// window and closure residual are not part of the CSV; they must be
/// supplied (the CLI stores them in a sidecar JSON).
pub fn read_orbit_csv<R: Read>(
    r: R,
    window: Window,
    closure_residual: f64,
) -> anyhow::Result<HomoclinicOrbit> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut orbit = HomoclinicOrbit {
        s_grid: vec![],
        ell: vec![],
        tangent: vec![],
        e_rate: vec![],
        window,
        closure_residual,
    };
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> anyhow::Result<f64> { Ok(rec[i].parse::<f64>()?) };
        orbit.s_grid.push(f(0)?);
        orbit.ell.push([f(1)?, f(2)?]);
        orbit.tangent.push([f(3)?, f(4)?]);
        orbit.e_rate.push(f(5)?);
    }
    Ok(orbit)
}

/// Section through a point of the orbit, oriented along the inward normal
/// `e(s) = (v, -u)`: the line through `l(s)` spanned by `e(s)`, crossed when
/// the tangential coordinate hits zero. Used by the flow-map module.
pub fn normal_line_section(point: [f64; 2], tangent: [f64; 2]) -> LineSection {
    // Crossing condition: (p - point) . (u, v) = 0.
    LineSection {
        n: (tangent[0], tangent[1]),
        c: point[0] * tangent[0] + point[1] * tangent[1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{CubicSaddle, GluedLoop, LinearSaddle, RotationField};
    use std::sync::Arc;

    fn glued() -> (ForcedField, SaddleInfo) {
        let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0)));
        let saddle = locate_saddle(&field, (0.01, -0.02), 1e-12).unwrap();
        (field, saddle)
    }

    #[test]
    fn locate_saddle_linear() {
        let field = ForcedField::unforced(Arc::new(LinearSaddle { alpha: 2.0, beta: 1.0 }));
        let s = locate_saddle(&field, (0.01, -0.02), 1e-12).unwrap();
        assert!(s.position.0.abs() < 1e-12 && s.position.1.abs() < 1e-12);
        assert!((s.alpha - 2.0).abs() < 1e-12);
        assert!((s.beta - 1.0).abs() < 1e-12);
        assert!((s.eigvec_stable.0.abs() - 1.0).abs() < 1e-12);
        assert!((s.eigvec_unstable.1.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locate_saddle_cubic_matches_analytic_jacobian() {
        let field = ForcedField::unforced(Arc::new(CubicSaddle { alpha: 2.0, beta: 1.0 }));
        let s = locate_saddle(&field, (0.03, 0.02), 1e-13).unwrap();
        assert!(s.position.0.abs() < 1e-10 && s.position.1.abs() < 1e-10);
        assert!((s.alpha - 2.0).abs() < 1e-10);
        assert!((s.beta - 1.0).abs() < 1e-10);
    }

    #[test]
    fn locate_saddle_rejects_center() {
        let field = ForcedField::unforced(Arc::new(RotationField));
        let err = locate_saddle(&field, (0.0, 0.0), 1e-10).unwrap_err();
        assert!(matches!(err, HomoclinicError::NotASaddle(..)));
    }

    #[test]
    fn h1_resonant_pair_fails() {
        let r = check_h1(2.0, 1.0, 0.1, 2.0, 10);
        assert!(r.dissipative);
        assert!(!r.diophantine_pass);
        assert_eq!((r.worst_pair.0, r.worst_pair.1), (1, 2));
        assert_eq!(r.worst_pair.2, 0.0);
    }

    #[test]
    fn h1_sqrt2_passes_to_depth_50() {
        let r = check_h1(2.0f64.sqrt(), 1.0, 0.01, 2.0, 50);
        assert!(r.diophantine_pass);
        assert!(r.dissipative);
    }

    #[test]
    fn h1_wrong_order_not_dissipative() {
        let r = check_h1(1.0, 2.0, 0.01, 2.0, 10);
        assert!(!r.dissipative);
    }

    #[test]
    fn glued_loop_closure_and_curve_agreement() {
        let (field, saddle) = glued();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        assert!(orbit.closure_residual < 1e-9, "residual {}", orbit.closure_residual);
        // Every sample within 1e-6 of the prescribed curve. Inside the chart
        // span's reach the nearest-point chart applies; closer to the saddle
        // the curve is exactly an axis.
        let g = GluedLoop::new(2.0, 1.0);
        for p in orbit.ell.iter().step_by(16) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r > 0.15 {
                let s = g.debug_nearest(p[0], p[1]);
                let (q, _) = g.curve_point(s);
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                assert!(d < 1e-6, "sample off the prescribed curve by {d}");
            } else {
                assert!(p[0].abs().min(p[1].abs()) < 1e-9, "tail sample off the axis");
            }
        }
        // Truncation endpoints inside [eps/2, 2 eps].
        for p in [&orbit.ell[0], orbit.ell.last().unwrap()] {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r >= 0.5 * 0.05 - 1e-9 && r <= 2.0 * 0.05);
        }
    }

    #[test]
    fn linear_saddle_has_no_loop() {
        let field = ForcedField::unforced(Arc::new(LinearSaddle { alpha: 2.0, beta: 1.0 }));
        let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12).unwrap();
        let err = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap_err();
        assert!(matches!(err, HomoclinicError::NoLoop(_)));
    }

    #[test]
    fn detuned_loop_reports_broken_connection() {
        let field = ForcedField::unforced(Arc::new(GluedLoop::new(2.0, 1.0).with_detune(1e-3)));
        let saddle = locate_saddle(&field, (0.0, 0.0), 1e-12).unwrap();
        match compute_homoclinic(&field, &saddle, 0.05, 1e-9) {
            Err(HomoclinicError::NoConnection { residual, .. }) => {
                assert!(residual > 1e-4 && residual < 0.3, "residual {residual}");
            }
            other => panic!("expected broken connection, got {other:?}"),
        }
    }

    #[test]
    fn frames_unit_and_orthogonal() {
        let (field, saddle) = glued();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        for t in &orbit.tangent {
            let norm = (t[0] * t[0] + t[1] * t[1]).sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn e_rate_axis_legs_and_midslope() {
        let (field, saddle) = glued();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        // Incoming leg (s near L+, on the x-axis): E = beta. Outgoing leg: -alpha.
        let n = orbit.s_grid.len();
        assert!((orbit.e_rate[n - 1] - 1.0).abs() < 1e-8);
        assert!((orbit.e_rate[0] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn asymptotics_match_designed_rates() {
        let (field, saddle) = glued();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        let rep = check_asymptotics(&orbit, &saddle).unwrap();
        assert!((rep.forward_slope + 2.0).abs() < 0.1, "forward {}", rep.forward_slope);
        assert!((rep.backward_slope + 1.0).abs() < 0.05, "backward {}", rep.backward_slope);
        assert!((rep.forward_e_ratio - 1.0).abs() < 0.05, "fwd ratio {}", rep.forward_e_ratio);
        assert!((rep.backward_e_ratio - 1.0).abs() < 0.05, "bwd ratio {}", rep.backward_e_ratio);
        assert!(rep.backward_tail_spread < 1e-3, "spread {}", rep.backward_tail_spread);
    }

    #[test]
    fn e_rate_stable_under_resampling() {
        // E depends only on position and tangent direction: recomputing the
        // frames on the same samples is exactly reproducible, and nearby
        // samples vary smoothly.
        let (field, saddle) = glued();
        let mut orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        let before = orbit.e_rate.clone();
        frames_and_e(&mut orbit, &field).unwrap();
        for (a, b) in before.iter().zip(&orbit.e_rate) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trip() {
        let (field, saddle) = glued();
        let orbit = compute_homoclinic(&field, &saddle, 0.05, 1e-9).unwrap();
        let mut buf = Vec::new();
        write_orbit_csv(&orbit, &mut buf).unwrap();
        let back = read_orbit_csv(&buf[..], orbit.window, orbit.closure_residual).unwrap();
        assert_eq!(orbit.s_grid.len(), back.s_grid.len());
        for i in 0..orbit.s_grid.len() {
            assert_eq!(orbit.s_grid[i], back.s_grid[i]);
            assert_eq!(orbit.ell[i], back.ell[i]);
            assert_eq!(orbit.e_rate[i], back.e_rate[i]);
        }
    }
}
