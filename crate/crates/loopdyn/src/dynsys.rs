//! Deterministic ODE integration for planar periodically forced systems.
//!
//! The systems have the shape
//!
//! ```text
//! x' = V_x(x, y) - mu * (rho * h(x, y) + sin theta)
//! y' = V_y(x, y) + mu * (rho * h(x, y) + sin theta)
//! theta' = omega
//! ```
//!
//! `theta` is affine in `t` and is never part of the numeric state: it is
//! reconstructed as `theta0 + omega * (t - t_start)`, so the forcing phase has
//! no integration drift even over passage times of order `ln(1/mu)`.
//!
//! Integration is embedded Dormand–Prince 5(4) with the standard quartic
//! dense-output interpolant. On top of the embedded error estimate, each step
//! must keep the interpolant's midpoint defect `|P'(t) - F(P(t))|` below
//! `10 * tol`; this is what makes dense-output queries (and hence section
//! crossings) trustworthy at the integrator tolerance.

use std::sync::Arc;
use thiserror::Error;

/// Section-crossing residual target used by the bisection + Newton polish.
const CROSSING_RESIDUAL: f64 = 1e-12;
/// Transversality floor: |dS/dt| at a crossing must exceed this.
const TRANSVERSALITY_FLOOR: f64 = 1e-10;
/// Hard cap on accepted steps per call.
const MAX_STEPS: usize = 4_000_000;

/// Autonomous planar part of the vector field, with its (x, y)-Jacobian.
pub trait PlanarField: Send + Sync {
    fn v(&self, x: f64, y: f64) -> (f64, f64);
    fn jac(&self, x: f64, y: f64) -> [[f64; 2]; 2];
}

/// Spatial forcing profile `h(x, y)` with gradient.
pub trait ForcingProfile: Send + Sync {
    fn h(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> (f64, f64);
}

/// `h` identically equal to a constant.
pub struct ConstantForcing(pub f64);

impl ForcingProfile for ConstantForcing {
    fn h(&self, _x: f64, _y: f64) -> f64 {
        self.0
    }
    fn grad(&self, _x: f64, _y: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// A planar field plus the additive periodic forcing channel: the full data
/// of the forced system (planar part, `h`, `mu`, `rho`, `omega`).
#[derive(Clone)]
pub struct ForcedField {
    pub planar: Arc<dyn PlanarField>,
    pub h: Arc<dyn ForcingProfile>,
    pub mu: f64,
    pub rho: f64,
    pub omega: f64,
}

impl ForcedField {
    pub fn new(
        planar: Arc<dyn PlanarField>,
        h: Arc<dyn ForcingProfile>,
        mu: f64,
        rho: f64,
        omega: f64,
    ) -> Self {
        assert!(mu >= 0.0, "mu must be nonnegative");
        assert!(omega.is_finite(), "omega must be finite");
        ForcedField { planar, h, mu, rho, omega }
    }

    /// Unforced system (`mu = 0`): just the planar field.
    pub fn unforced(planar: Arc<dyn PlanarField>) -> Self {
        ForcedField {
            planar,
            h: Arc::new(ConstantForcing(0.0)),
            mu: 0.0,
            rho: 0.0,
            omega: 1.0,
        }
    }

    pub fn with_forcing(&self, mu: f64, rho: f64, omega: f64) -> Self {
        ForcedField { mu, rho, omega, ..self.clone() }
    }

    /// Right-hand side of the (x, y) subsystem at forcing phase `theta`.
    pub fn rhs(&self, x: f64, y: f64, theta: f64) -> (f64, f64) {
        let (vx, vy) = self.planar.v(x, y);
        if self.mu == 0.0 {
            return (vx, vy);
        }
        let force = self.mu * (self.rho * self.h.h(x, y) + theta.sin());
        (vx - force, vy + force)
    }

    /// (x, y)-Jacobian of the right-hand side at forcing phase `theta`.
    pub fn jac(&self, x: f64, y: f64, _theta: f64) -> [[f64; 2]; 2] {
        let mut j = self.planar.jac(x, y);
        if self.mu != 0.0 && self.rho != 0.0 {
            let (hx, hy) = self.h.grad(x, y);
            j[0][0] -= self.mu * self.rho * hx;
            j[0][1] -= self.mu * self.rho * hy;
            j[1][0] += self.mu * self.rho * hx;
            j[1][1] += self.mu * self.rho * hy;
        }
        j
    }

    /// Divergence of the (x, y) right-hand side (for the Liouville identity).
    pub fn divergence(&self, x: f64, y: f64, theta: f64) -> f64 {
        let j = self.jac(x, y, theta);
        j[0][0] + j[1][1]
    }
}

/// State of the extended system; `theta` is kept reduced to `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let r = theta % two_pi;
    if r < 0.0 {
        r + two_pi
    } else {
        r
    }
}

impl ExtendedState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        ExtendedState { x, y, theta: wrap_angle(theta) }
    }
}

#[derive(Error, Debug)]
pub enum DynError {
    #[error("step size underflow at t = {t} (stiff or blow-up region); last good state ({x}, {y})")]
    StepUnderflow { t: f64, x: f64, y: f64 },
    #[error("step budget exhausted after {steps} accepted steps at t = {t}")]
    StepBudget { t: f64, steps: usize },
    #[error("no section crossing before t_max = {t_max}")]
    NoCrossing { t_max: f64 },
    #[error("tangential section crossing at t = {t} (|dS/dt| = {rate} below transversality floor)")]
    DegenerateCrossing { t: f64, rate: f64 },
    #[error("zero-velocity sample: cannot normalize tangent at ({x}, {y})")]
    DegenerateSample { x: f64, y: f64 },
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b - b_hat: error estimator weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Weights for the fifth dense-output coefficient.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its dense-output coefficients for `n` components.
#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    ta: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    /// Interpolated value at `ta + theta * h`, `theta` in [0, 1].
    fn eval(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + t1 * (self.r[2][i] + theta * (self.r[3][i] + t1 * self.r[4][i])));
        }
        out
    }

    /// Time derivative of the interpolant at `ta + theta * h`.
    fn deriv(&self, theta: f64) -> [f64; N] {
        let t1 = 1.0 - theta;
        let mut out = [0.0; N];
        for i in 0..N {
            let dp = self.r[1][i]
                + (1.0 - 2.0 * theta) * self.r[2][i]
                + theta * (2.0 - 3.0 * theta) * self.r[3][i]
                + 2.0 * theta * t1 * (1.0 - 2.0 * theta) * self.r[4][i];
            out[i] = dp / self.h;
        }
        out
    }
}

fn dense_coeffs<const N: usize>(
    y0: &[f64; N],
    y1: &[f64; N],
    h: f64,
    k: &[[f64; N]; 7],
) -> [[f64; N]; 5] {
    let mut r = [[0.0; N]; 5];
    for i in 0..N {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        r[0][i] = y0[i];
        r[1][i] = ydiff;
        r[2][i] = bspl;
        r[3][i] = ydiff - h * k[6][i] - bspl;
        let mut c5 = 0.0;
        for (j, d) in D.iter().enumerate() {
            c5 += d * k[j][i];
        }
        r[4][i] = h * c5;
    }
    r
}

/// Generic adaptive driver. `f(t, y)` must be smooth on the traversed region;
/// `t` runs from `t0` to `t1` in either direction.
struct Integration<const N: usize> {
    steps: Vec<DenseStep<N>>,
    nodes: Vec<(f64, [f64; N])>,
    y_end: [f64; N],
}

fn integrate_adaptive<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    t1: f64,
    y0: [f64; N],
    tol: f64,
    abs_floor: f64,
) -> Result<Integration<N>, DynError> {
    assert!(tol > 0.0 && tol <= 1e-3, "tol must be in (0, 1e-3]");
    assert!(abs_floor > 0.0, "absolute error floor must be positive");
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut steps = Vec::new();
    let mut nodes = vec![(t0, y0)];
    if span == 0.0 {
        return Ok(Integration { steps, nodes, y_end: y0 });
    }

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let fnorm: f64 = k1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ynorm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut h = dir * (0.01 * (1.0 + ynorm) / (1.0 + fnorm)).min(span);
    let mut accepted = 0usize;

    while (t - t1) * dir < 0.0 {
        if h.abs() > (t1 - t).abs() {
            h = t1 - t;
        }
        if h.abs() < 1e-14 * (1.0 + t.abs()) {
            return Err(DynError::StepUnderflow { t, x: y[0], y: y[1] });
        }

        // Stage evaluations (FSAL: k[6] is reused as the next k1).
        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ys[i] += h * acc;
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y1 = y;
        for i in 0..N {
            let mut acc = 0.0;
            for j in 0..6 {
                acc += A[6][j] * k[j][i];
            }
            y1[i] += h * acc;
        }

        // Embedded error estimate. All components share one weight based on
        // the largest state component: a tiny component riding along a large
        // one only needs accuracy relative to the overall state size.
        let ymax = (0..N)
            .map(|i| y[i].abs().max(y1[i].abs()))
            .fold(0.0f64, f64::max);
        let scale = tol * (abs_floor + ymax);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for j in 0..7 {
                e += E[j] * k[j][i];
            }
            let r = h * e / scale;
            err += r * r;
        }
        let err = (err / N as f64).sqrt();

        // Dense-output defect at the step midpoint.
        let r = dense_coeffs(&y, &y1, h, &k);
        let step = DenseStep { ta: t, h, r };
        let mid = step.eval(0.5);
        let dmid = step.deriv(0.5);
        let fmid = f(t + 0.5 * h, &mid);
        let mid_max = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dscale = tol * 5.0 * (abs_floor + mid_max);
        let mut defect: f64 = 0.0;
        for i in 0..N {
            let d = (dmid[i] - fmid[i]) / dscale;
            defect += d * d;
        }
        let defect = (defect / N as f64).sqrt();

        let worst = err.max(defect);
        if worst <= 1.0 {
            t += h;
            y = y1;
            k1 = k[6];
            steps.push(step);
            nodes.push((t, y));
            accepted += 1;
            if accepted > MAX_STEPS {
                return Err(DynError::StepBudget { t, steps: accepted });
            }
            let grow = if worst == 0.0 {
                5.0
            } else {
                // err shrinks like h^5, the defect like h^3: use the defect's
                // exponent whenever it is the binding constraint.
                let p = if defect >= err { 3.0 } else { 5.0 };
                (0.9 * worst.powf(-1.0 / p)).clamp(0.2, 5.0)
            };
            h *= grow;
        } else {
            let p = if defect >= err { 3.0 } else { 5.0 };
            h *= (0.9 * worst.powf(-1.0 / p)).clamp(0.1, 0.9);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(DynError::StepUnderflow { t, x: y[0], y: y[1] });
        }
    }

    Ok(Integration { steps, nodes, y_end: y })
}

/// Dense-output trajectory of the (x, y) subsystem, with the exact affine
/// phase `theta(t) = theta0 + omega * (t - t_start)` attached.
#[derive(Debug)]
pub struct Trajectory {
    pub t_start: f64,
    pub t_end: f64,
    pub theta0: f64,
    pub omega: f64,
    steps: Vec<DenseStep<2>>,
    nodes: Vec<(f64, [f64; 2])>,
    /// Interpolation order of the dense output (quartic polynomial).
    pub interpolation_order: usize,
}

impl Trajectory {
    pub fn theta_at(&self, t: f64) -> f64 {
        wrap_angle(self.theta0 + self.omega * (t - self.t_start))
    }

    fn step_index_at(&self, t: f64) -> usize {
        // Steps are ordered in traversal direction; binary search on ta.
        let forward = self.t_end >= self.t_start;
        let mut lo = 0usize;
        let mut hi = self.steps.len();
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let ta = self.steps[mid].ta;
            if (forward && ta <= t) || (!forward && ta >= t) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Dense-output query; `t` must lie within the span.
    pub fn eval(&self, t: f64) -> ExtendedState {
        let (x, y) = self.eval_xy(t);
        ExtendedState::new(x, y, self.theta0 + self.omega * (t - self.t_start))
    }

    pub fn eval_xy(&self, t: f64) -> (f64, f64) {
        if self.steps.is_empty() {
            let (t0, y) = self.nodes[0];
            debug_assert_eq!(t, t0);
            return (y[0], y[1]);
        }
        let s = &self.steps[self.step_index_at(t)];
        let v = s.eval((t - s.ta) / s.h);
        (v[0], v[1])
    }

    /// Time derivative of the dense interpolant at `t`.
    pub fn deriv_xy(&self, t: f64) -> (f64, f64) {
        let s = &self.steps[self.step_index_at(t)];
        let v = s.deriv((t - s.ta) / s.h);
        (v[0], v[1])
    }

    /// Accepted step endpoints as (t, state) samples.
    pub fn samples(&self) -> Vec<(f64, ExtendedState)> {
        self.nodes
            .iter()
            .map(|&(t, y)| {
                (t, ExtendedState::new(y[0], y[1], self.theta0 + self.omega * (t - self.t_start)))
            })
            .collect()
    }

    pub fn end_state(&self) -> ExtendedState {
        let &(t, y) = self.nodes.last().unwrap();
        ExtendedState::new(y[0], y[1], self.theta0 + self.omega * (t - self.t_start))
    }
}

/// Flow-map derivative block over the integrated span.
#[derive(Debug, Clone, Copy)]
pub struct TangentBlock {
    pub jacobian_product: [[f64; 2]; 2],
}

impl TangentBlock {
    pub fn det(&self) -> f64 {
        let m = self.jacobian_product;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

/// Integrate the forced system over `t_span = (t0, t1)` (either direction).
pub fn integrate(
    field: &ForcedField,
    start: ExtendedState,
    t_span: (f64, f64),
    tol: f64,
) -> Result<Trajectory, DynError> {
    integrate_with_floor(field, start, t_span, tol, 1.0)
}

/// [`integrate`] with an explicit absolute-error floor: component error
/// weights are `tol * (abs_floor + |y|)`. A small floor keeps the control
/// relative on exponentially small components (passages near a saddle);
/// the default floor of 1 matches the usual `atol = rtol` convention.
pub fn integrate_with_floor(
    field: &ForcedField,
    start: ExtendedState,
    t_span: (f64, f64),
    tol: f64,
    abs_floor: f64,
) -> Result<Trajectory, DynError> {
    let (t0, t1) = t_span;
    let theta0 = start.theta;
    let omega = field.omega;
    let f = move |t: f64, y: &[f64; 2]| -> [f64; 2] {
        let theta = theta0 + omega * (t - t0);
        let (dx, dy) = field.rhs(y[0], y[1], theta);
        [dx, dy]
    };
    let out = integrate_adaptive(&f, t0, t1, [start.x, start.y], tol, abs_floor)?;
    Ok(Trajectory {
        t_start: t0,
        t_end: t1,
        theta0,
        omega,
        steps: out.steps,
        nodes: out.nodes,
        interpolation_order: 4,
    })
}

/// Implicit scalar section condition on the plane.
pub trait SectionCondition {
    fn value(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> (f64, f64);
}

/// The line `n . (x, y) = c`.
pub struct LineSection {
    pub n: (f64, f64),
    pub c: f64,
}

impl SectionCondition for LineSection {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.n.0 * x + self.n.1 * y - self.c
    }
    fn grad(&self, _x: f64, _y: f64) -> (f64, f64) {
        self.n
    }
}

/// Integrate forward until the section condition crosses zero in the given
/// direction (`+1`: value increasing, `-1`: decreasing, `0`: either).
///
/// The crossing is bracketed on the dense output and polished by bisection
/// followed by Newton iterations to a section residual below `tol`
/// (and at least to the built-in `1e-12` target when `tol` is looser).
pub fn integrate_to_section(
    field: &ForcedField,
    start: ExtendedState,
    section: &dyn SectionCondition,
    direction: i8,
    tol: f64,
    t_max: f64,
) -> Result<(ExtendedState, f64, Trajectory), DynError> {
    integrate_to_section_with_floor(field, start, section, direction, tol, t_max, 1.0)
}

/// [`integrate_to_section`] with an explicit absolute-error floor (see
/// [`integrate_with_floor`]).
pub fn integrate_to_section_with_floor(
    field: &ForcedField,
    start: ExtendedState,
    section: &dyn SectionCondition,
    direction: i8,
    tol: f64,
    t_max: f64,
    abs_floor: f64,
) -> Result<(ExtendedState, f64, Trajectory), DynError> {
    let traj = integrate_with_floor(field, start, (0.0, t_max), tol, abs_floor)?;
    let residual_target = CROSSING_RESIDUAL.max(tol * 1e-4).min(tol);

    // Scan accepted steps for a sign change; subdivide each step to avoid
    // missing double crossings inside one step.
    const SUBS: usize = 8;
    let mut hit: Option<(f64, f64, f64)> = None; // (tc, x, y)
    'scan: {
        let mut prev_t = 0.0;
        let mut prev_v = section.value(start.x, start.y);
        for step in &traj.steps {
            for j in 1..=SUBS {
                let t = step.ta + step.h * j as f64 / SUBS as f64;
                let p = step.eval(j as f64 / SUBS as f64);
                let v = section.value(p[0], p[1]);
                let crossed =
                    (prev_v < 0.0 && v >= 0.0) || (prev_v > 0.0 && v <= 0.0);
                if crossed {
                    // Bisection bracket [prev_t, t], then Newton.
                    let mut lo = prev_t;
                    let mut hi = t;
                    let mut vlo = prev_v;
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let (x, y) = traj.eval_xy(mid);
                        let vm = section.value(x, y);
                        if (vm < 0.0) == (vlo < 0.0) {
                            lo = mid;
                            vlo = vm;
                        } else {
                            hi = mid;
                        }
                        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
                            break;
                        }
                    }
                    let mut tc = 0.5 * (lo + hi);
                    let mut rate = 0.0;
                    for _ in 0..8 {
                        let (x, y) = traj.eval_xy(tc);
                        let v = section.value(x, y);
                        let (gx, gy) = section.grad(x, y);
                        let theta = traj.theta_at(tc);
                        let (dx, dy) = field.rhs(x, y, theta);
                        rate = gx * dx + gy * dy;
                        if rate.abs() < TRANSVERSALITY_FLOOR {
                            return Err(DynError::DegenerateCrossing {
                                t: tc,
                                rate: rate.abs(),
                            });
                        }
                        let dt = v / rate;
                        tc -= dt;
                        if dt.abs() < 1e-16 * (1.0 + tc.abs()) {
                            break;
                        }
                    }
                    tc = tc.clamp(prev_t.min(t), prev_t.max(t));
                    let (x, y) = traj.eval_xy(tc);
                    let res = section.value(x, y);
                    // Direction filter (sign of dS/dt) and rejection of the
                    // immediate crossing at t = 0.
                    let dir_ok = match direction {
                        0 => true,
                        d => (d as f64) * rate > 0.0,
                    };
                    if dir_ok && tc > 1e-12 && res.abs() <= residual_target.max(1e-10) {
                        hit = Some((tc, x, y));
                        break 'scan;
                    }
                }
                prev_t = t;
                prev_v = v;
            }
        }
    }
    match hit {
        Some((tc, x, y)) => {
            let state = ExtendedState::new(x, y, traj.theta0 + traj.omega * tc);
            Ok((state, tc, traj))
        }
        None => Err(DynError::NoCrossing { t_max }),
    }
}

/// Integrate the forced system together with its (x, y) variational flow.
pub fn integrate_with_tangent(
    field: &ForcedField,
    start: ExtendedState,
    t_span: (f64, f64),
    tol: f64,
) -> Result<(Trajectory, TangentBlock), DynError> {
    let (t0, t1) = t_span;
    let theta0 = start.theta;
    let omega = field.omega;
    let f = move |t: f64, y: &[f64; 6]| -> [f64; 6] {
        let theta = theta0 + omega * (t - t0);
        let (dx, dy) = field.rhs(y[0], y[1], theta);
        let j = field.jac(y[0], y[1], theta);
        // y[2..6] is the 2x2 matrix M (row major); M' = J M.
        [
            dx,
            dy,
            j[0][0] * y[2] + j[0][1] * y[4],
            j[0][0] * y[3] + j[0][1] * y[5],
            j[1][0] * y[2] + j[1][1] * y[4],
            j[1][0] * y[3] + j[1][1] * y[5],
        ]
    };
    let y0 = [start.x, start.y, 1.0, 0.0, 0.0, 1.0];
    let out = integrate_adaptive(&f, t0, t1, y0, tol, 1.0)?;
    let m = out.y_end;
    let steps = out
        .steps
        .iter()
        .map(|s| DenseStep::<2> {
            ta: s.ta,
            h: s.h,
            r: {
                let mut r = [[0.0; 2]; 5];
                for (ri, si) in r.iter_mut().zip(s.r.iter()) {
                    ri[0] = si[0];
                    ri[1] = si[1];
                }
                r
            },
        })
        .collect();
    let nodes = out.nodes.iter().map(|&(t, y)| (t, [y[0], y[1]])).collect();
    Ok((
        Trajectory {
            t_start: t0,
            t_end: t1,
            theta0,
            omega,
            steps,
            nodes,
            interpolation_order: 4,
        },
        TangentBlock { jacobian_product: [[m[2], m[3]], [m[4], m[5]]] },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{HamiltonianFish, LinearSaddle, RotationField};

    fn saddle(alpha: f64, beta: f64) -> ForcedField {
        ForcedField::unforced(Arc::new(LinearSaddle { alpha, beta }))
    }

    #[test]
    fn linear_saddle_closed_form() {
        let field = saddle(2.0, 1.0).with_forcing(0.0, 0.0, 3.0);
        let start = ExtendedState::new(1.0, 0.5, 0.7);
        let t_end = 1.3;
        let traj = integrate(&field, start, (0.0, t_end), 1e-10).unwrap();
        let end = traj.end_state();
        assert!((end.x - (-2.0 * t_end).exp()).abs() < 1e-9);
        assert!((end.y - 0.5 * t_end.exp()).abs() < 1e-9);
        assert!((end.theta - wrap_angle(0.7 + 3.0 * t_end)).abs() < 1e-12);
    }

    #[test]
    fn decoupled_exponential() {
        let field = saddle(2.0, 1.0);
        let traj = integrate(&field, ExtendedState::new(1.0, 0.0, 0.0), (0.0, 1.0), 1e-10).unwrap();
        let end = traj.end_state();
        assert!((end.x - (-2.0f64).exp()).abs() < 1e-10);
        assert_eq!(end.y, 0.0);
    }

    #[test]
    fn hamiltonian_energy_conserved() {
        let field = ForcedField::unforced(Arc::new(HamiltonianFish));
        let start = ExtendedState::new(0.5, 0.0, 0.0);
        let e0 = HamiltonianFish::energy(start.x, start.y);
        let traj = integrate(&field, start, (0.0, 20.0), 1e-10).unwrap();
        for (_, s) in traj.samples() {
            assert!((HamiltonianFish::energy(s.x, s.y) - e0).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_output_residual_below_ten_tol() {
        let field = ForcedField::unforced(Arc::new(HamiltonianFish));
        let tol = 1e-10;
        let traj = integrate(&field, ExtendedState::new(0.5, 0.0, 0.0), (0.0, 10.0), tol).unwrap();
        // midpoint of every accepted step: interpolant derivative vs field
        for step in 0..traj.samples().len() - 1 {
            let (ta, _) = traj.samples()[step];
            let (tb, _) = traj.samples()[step + 1];
            let tm = 0.5 * (ta + tb);
            let (x, y) = traj.eval_xy(tm);
            let (dx, dy) = traj.deriv_xy(tm);
            let (fx, fy) = field.rhs(x, y, traj.theta_at(tm));
            let res = ((dx - fx).powi(2) + (dy - fy).powi(2)).sqrt();
            assert!(res < 10.0 * tol * (1.0 + x.abs().max(y.abs())), "residual {res} at t = {tm}");
        }
    }

    #[test]
    fn theta_advance_exact() {
        let field = saddle(1.5, 0.5).with_forcing(1e-3, 2.0, 7.3);
        let traj =
            integrate(&field, ExtendedState::new(0.1, 0.1, 1.0), (0.0, 5.0), 1e-8).unwrap();
        for (t, s) in traj.samples() {
            let expect = wrap_angle(1.0 + 7.3 * t);
            assert!((s.theta - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn time_reversal_consistency() {
        let field = ForcedField::unforced(Arc::new(HamiltonianFish));
        let tol = 1e-10;
        let start = ExtendedState::new(0.4, 0.1, 0.0);
        let fwd = integrate(&field, start, (0.0, 5.0), tol).unwrap();
        let mid = fwd.end_state();
        let back = integrate(&field, mid, (5.0, 0.0), tol).unwrap();
        let end = back.end_state();
        assert!((end.x - start.x).abs() < 100.0 * tol);
        assert!((end.y - start.y).abs() < 100.0 * tol);
    }

    #[test]
    fn section_crossing_linear_saddle() {
        // start (eps, y0, 0), section {y = eps}: crossing at (1/beta) ln(eps/y0)
        let beta = 1.0;
        let field = saddle(2.0, beta);
        let eps = 0.1;
        let y0 = 0.01;
        let section = LineSection { n: (0.0, 1.0), c: eps };
        let (state, tc, _) = integrate_to_section(
            &field,
            ExtendedState::new(eps, y0, 0.0),
            &section,
            1,
            1e-10,
            20.0,
        )
        .unwrap();
        assert!((tc - (eps / y0).ln() / beta).abs() < 1e-9);
        assert!((state.y - eps).abs() < 1e-11);
    }

    #[test]
    fn section_no_return_when_x_decays() {
        // forward flow from (eps, y0): x only decays, never re-crosses x = eps
        let field = saddle(2.0, 1.0);
        let section = LineSection { n: (1.0, 0.0), c: 0.1 };
        let err = integrate_to_section(
            &field,
            ExtendedState::new(0.1, 0.01, 0.0),
            &section,
            0,
            1e-10,
            5.0,
        )
        .unwrap_err();
        assert!(matches!(err, DynError::NoCrossing { .. }));
    }

    #[test]
    fn rotation_period_two_pi() {
        let field = ForcedField::unforced(Arc::new(RotationField));
        let section = LineSection { n: (0.0, 1.0), c: 0.0 };
        let (_, tc, _) = integrate_to_section(
            &field,
            ExtendedState::new(1.0, 0.0, 0.0),
            &section,
            1,
            1e-10,
            10.0,
        )
        .unwrap();
        assert!((tc - std::f64::consts::TAU).abs() < 1e-8, "period {tc}");
    }

    #[test]
    fn tangent_linear_saddle_diagonal() {
        let field = saddle(2.0, 1.0);
        let (_, tb) =
            integrate_with_tangent(&field, ExtendedState::new(0.3, 0.2, 0.0), (0.0, 1.5), 1e-10)
                .unwrap();
        let m = tb.jacobian_product;
        assert!((m[0][0] - (-3.0f64).exp()).abs() < 1e-9);
        assert!((m[1][1] - 1.5f64.exp()).abs() < 1e-9);
        assert!(m[0][1].abs() < 1e-12 && m[1][0].abs() < 1e-12);
    }

    #[test]
    fn tangent_rotation_matrix() {
        let field = ForcedField::unforced(Arc::new(RotationField));
        let t = std::f64::consts::FRAC_PI_2;
        let (_, tb) =
            integrate_with_tangent(&field, ExtendedState::new(1.0, 0.0, 0.0), (0.0, t), 1e-10)
                .unwrap();
        let m = tb.jacobian_product;
        let expect = [[0.0, -1.0], [1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - expect[i][j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn tangent_matches_finite_differences_and_liouville() {
        use crate::fixtures::CubicSaddle;
        let field = ForcedField::unforced(Arc::new(CubicSaddle { alpha: 2.0, beta: 1.0 }));
        let start = ExtendedState::new(0.2, -0.1, 0.0);
        let t_end = 1.0;
        let tol = 1e-10;
        let (traj, tb) = integrate_with_tangent(&field, start, (0.0, t_end), tol).unwrap();
        // finite differences of the flow map
        let h = 1e-6;
        let flow = |x: f64, y: f64| {
            let t = integrate(&field, ExtendedState::new(x, y, 0.0), (0.0, t_end), tol).unwrap();
            let e = t.end_state();
            (e.x, e.y)
        };
        let (xp, yp) = flow(start.x + h, start.y);
        let (xm, ym) = flow(start.x - h, start.y);
        let (xq, yq) = flow(start.x, start.y + h);
        let (xn, yn) = flow(start.x, start.y - h);
        let fd = [
            [(xp - xm) / (2.0 * h), (xq - xn) / (2.0 * h)],
            [(yp - ym) / (2.0 * h), (yq - yn) / (2.0 * h)],
        ];
        for i in 0..2 {
            for j in 0..2 {
                let scale = 1.0 + fd[i][j].abs();
                assert!(
                    (tb.jacobian_product[i][j] - fd[i][j]).abs() < 1e-4 * scale,
                    "entry ({i},{j}): {} vs {}",
                    tb.jacobian_product[i][j],
                    fd[i][j]
                );
            }
        }
        // Liouville: det = exp(integral of divergence along the orbit)
        let n = 2000;
        let mut acc = 0.0;
        for k in 0..n {
            let t = t_end * (k as f64 + 0.5) / n as f64;
            let (x, y) = traj.eval_xy(t);
            acc += field.divergence(x, y, traj.theta_at(t)) * (t_end / n as f64);
        }
        assert!(
            (tb.det() - acc.exp()).abs() < 1e-6 * acc.exp().abs(),
            "det {} vs Liouville {}",
            tb.det(),
            acc.exp()
        );
    }
}
