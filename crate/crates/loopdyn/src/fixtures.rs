//! Built-in test systems.
//!
//! The centerpiece is [`GluedLoop`]: a planar field constructed *around* a
//! prescribed closed curve so that the curve is an exact homoclinic orbit of
//! a dissipative saddle at the origin. The curve is
//!
//! * the exact linear-saddle orbit `(0, R0 e^{beta (s - S-)})` on the +y axis
//!   for `s <= S-`,
//! * the exact orbit `(R0 e^{-alpha (s - S+)}, 0)` on the +x axis for
//!   `s >= S+`,
//! * a quarter-circle arc through the first quadrant in between,
//!
//! joined with C-infinity flat steps, so the curve is smooth and coincides
//! with the axes near the origin. The field is the exact linear saddle
//! `(-alpha x, beta y)` inside the ball `r <= R_LIN_IN`, and a tube field
//! `V(p) = gamma'(s*) + c(s*) z n(s*)` (nearest-point chart, `n = (v, -u)`)
//! outside `R_LIN_OUT`, blended radially. On the curve the two pieces agree,
//! so the loop is an exact orbit of the blended field with the prescribed
//! parametrization, and the normal expansion rate along the curve is exactly
//! `-alpha` on the outgoing leg, `c(s)` in the tube, `beta` on the incoming
//! leg.

use crate::dynsys::PlanarField;
use crate::jet::{smooth_step, Jet2};

/// Pure linear saddle: `x' = -alpha x`, `y' = beta y`.
pub struct LinearSaddle {
    pub alpha: f64,
    pub beta: f64,
}

impl PlanarField for LinearSaddle {
    fn v(&self, x: f64, y: f64) -> (f64, f64) {
        (-self.alpha * x, self.beta * y)
    }
    fn jac(&self, _x: f64, _y: f64) -> [[f64; 2]; 2] {
        [[-self.alpha, 0.0], [0.0, self.beta]]
    }
}

/// Rigid rotation `x' = -y`, `y' = x` (period 2*pi; a center, not a saddle).
pub struct RotationField;

impl PlanarField for RotationField {
    fn v(&self, x: f64, y: f64) -> (f64, f64) {
        (-y, x)
    }
    fn jac(&self, _x: f64, _y: f64) -> [[f64; 2]; 2] {
        [[0.0, -1.0], [1.0, 0.0]]
    }
}

/// Unforced Hamiltonian test field `x' = y`, `y' = x - x^2`, conserving
/// `H = y^2/2 - x^2/2 + x^3/3`. Divergence-free (Liouville determinant 1).
pub struct HamiltonianFish;

impl HamiltonianFish {
    pub fn energy(x: f64, y: f64) -> f64 {
        0.5 * y * y - 0.5 * x * x + x * x * x / 3.0
    }
}

impl PlanarField for HamiltonianFish {
    fn v(&self, x: f64, y: f64) -> (f64, f64) {
        (y, x - x * x)
    }
    fn jac(&self, x: f64, _y: f64) -> [[f64; 2]; 2] {
        [[0.0, 1.0], [1.0 - 2.0 * x, 0.0]]
    }
}

/// Saddle with quadratic higher-order terms and an analytic Jacobian:
/// `x' = -alpha x + y^2`, `y' = beta y + x^2`.
pub struct CubicSaddle {
    pub alpha: f64,
    pub beta: f64,
}

impl PlanarField for CubicSaddle {
    fn v(&self, x: f64, y: f64) -> (f64, f64) {
        (-self.alpha * x + y * y, self.beta * y + x * x)
    }
    fn jac(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [[-self.alpha, 2.0 * y], [2.0 * x, self.beta]]
    }
}

const R_LIN_IN: f64 = 0.4;
const R_LIN_OUT: f64 = 0.6;
/// Saturation half-width of the tube chart's normal coordinate.
const Z_MAX: f64 = 0.3;
/// The loop's s-anchors: axis tails are exact outside `[S_MINUS, S_PLUS]`.
const S_MINUS: f64 = -1.0;
const S_PLUS: f64 = 1.0;
/// Blend width of the curve's tail-to-arc transition.
const TAU: f64 = 0.5;
/// The normal expansion rate in the tube ramps from `-alpha` to `beta` over
/// this s-window (kept short so the integral of E matches the asymptotic
/// slopes closely at desk-scale windows).
const C_RAMP: (f64, f64) = (-0.2, 0.0);

/// Glued-loop fixture: exact homoclinic loop with prescribed rates.
pub struct GluedLoop {
    pub alpha: f64,
    pub beta: f64,
    /// Loop radius scale (distance of the arc from the origin).
    pub r0: f64,
    /// Connection-breaking detuning: a normal push of this size applied on
    /// the arc. Zero gives the exact homoclinic connection.
    pub detune: f64,
    s_lo: f64,
    s_hi: f64,
}

#[derive(Debug, Clone, Copy)]
struct CurvePoint {
    /// position
    p: [f64; 2],
    /// velocity gamma'
    dp: [f64; 2],
    /// acceleration gamma''
    ddp: [f64; 2],
    /// normal rate c(s) and its derivative
    c: f64,
    c_d: f64,
    /// detuning bump and its derivative
    bump: f64,
    bump_d: f64,
}

impl GluedLoop {
    pub fn new(alpha: f64, beta: f64) -> Self {
        assert!(alpha > 0.0 && beta > 0.0, "rates must be positive");
        // Chart range: cover the curve down to well inside the linear ball.
        let reach = (1.0f64 / (0.25 * R_LIN_IN)).ln();
        GluedLoop {
            alpha,
            beta,
            r0: 1.0,
            detune: 0.0,
            s_lo: S_MINUS - reach / beta,
            s_hi: S_PLUS + reach / alpha,
        }
    }

    pub fn with_detune(mut self, detune: f64) -> Self {
        self.detune = detune;
        self
    }

    /// The prescribed curve and its first two s-derivatives.
    fn curve(&self, s: f64) -> CurvePoint {
        let sj = Jet2::var(s);
        let w_plus = smooth_step((sj - (S_PLUS - TAU)) * (1.0 / TAU));
        let w_minus = smooth_step((Jet2::c(S_MINUS + TAU) - sj) * (1.0 / TAU));
        let w_arc = -w_plus - w_minus + 1.0;

        let half_pi = std::f64::consts::FRAC_PI_2;
        let psi = (sj - S_MINUS) * (half_pi / (S_PLUS - S_MINUS));
        let arc_x = psi.sin() * self.r0;
        let arc_y = psi.cos() * self.r0;
        let tail_p = (-(sj - S_PLUS) * self.alpha).exp() * self.r0;
        let tail_m = ((sj - S_MINUS) * self.beta).exp() * self.r0;

        let x = w_plus * tail_p + w_arc * arc_x;
        let y = w_minus * tail_m + w_arc * arc_y;

        let c = (smooth_step((sj - C_RAMP.0) * (1.0 / (C_RAMP.1 - C_RAMP.0)))
            * (self.alpha + self.beta))
            + (-self.alpha);
        // Bump supported on the arc only (used by the detuned variant).
        let bump = smooth_step((sj + 0.8) * (1.0 / 0.3))
            * (-smooth_step((sj - 0.2) * (1.0 / 0.3)) + 1.0);

        CurvePoint {
            p: [x.v, y.v],
            dp: [x.d, y.d],
            ddp: [x.dd, y.dd],
            c: c.v,
            c_d: c.d,
            bump: bump.v,
            bump_d: bump.d,
        }
    }

    /// Exposed for fixture-level tests and downstream oracles.
    pub fn curve_point(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let cp = self.curve(s);
        (cp.p, cp.dp)
    }

    pub fn chart_span(&self) -> (f64, f64) {
        (self.s_lo, self.s_hi)
    }

    /// Nearest-point parameter on the curve, via a three-branch initial
    /// guess (arc angle, either axis tail) followed by Newton on
    /// `(p - gamma(s)) . gamma'(s) = 0`.
    fn nearest_s(&self, x: f64, y: f64) -> f64 {
        let r = (x * x + y * y).sqrt().max(1e-12);
        let phi = x.atan2(y).clamp(0.0, std::f64::consts::FRAC_PI_2);
        let mut candidates = [f64::NAN; 3];
        candidates[0] = S_MINUS
            + phi / std::f64::consts::FRAC_PI_2 * (S_PLUS - S_MINUS);
        if x > 1e-12 {
            candidates[1] = (S_PLUS + (self.r0 / x.min(self.r0)).ln() / self.alpha).min(self.s_hi);
        }
        if y > 1e-12 {
            candidates[2] = (S_MINUS - (self.r0 / y.min(self.r0)).ln() / self.beta).max(self.s_lo);
        }
        let _ = r;
        let dist2 = |s: f64| {
            let cp = self.curve(s);
            (x - cp.p[0]).powi(2) + (y - cp.p[1]).powi(2)
        };
        let mut best = candidates[0];
        let mut best_d = f64::INFINITY;
        for &cand in &candidates {
            if cand.is_nan() {
                continue;
            }
            let d = dist2(cand);
            if d < best_d {
                best_d = d;
                best = cand;
            }
        }
        // Local scan around the winning candidate: the curvature in the
        // blend zones is large enough that raw Newton from the candidate can
        // hop branches.
        const SCAN_HALF_WIDTH: f64 = 0.4;
        const SCAN_POINTS: i32 = 16;
        let center = best;
        for i in -SCAN_POINTS..=SCAN_POINTS {
            let s = (center + SCAN_HALF_WIDTH * i as f64 / SCAN_POINTS as f64)
                .clamp(self.s_lo, self.s_hi);
            let d = dist2(s);
            if d < best_d {
                best_d = d;
                best = s;
            }
        }
        let mut s = best;
        let max_step = SCAN_HALF_WIDTH / SCAN_POINTS as f64;
        for _ in 0..40 {
            let cp = self.curve(s);
            let rx = x - cp.p[0];
            let ry = y - cp.p[1];
            let g = rx * cp.dp[0] + ry * cp.dp[1];
            let gd = -(cp.dp[0] * cp.dp[0] + cp.dp[1] * cp.dp[1])
                + rx * cp.ddp[0]
                + ry * cp.ddp[1];
            if gd.abs() < 1e-14 {
                break;
            }
            let step = (g / gd).clamp(-max_step, max_step);
            s = (s - step).clamp(self.s_lo, self.s_hi);
            if step.abs() < 1e-15 * (1.0 + s.abs()) {
                break;
            }
        }
        s
    }

    #[doc(hidden)]
    pub fn debug_nearest(&self, x: f64, y: f64) -> f64 {
        self.nearest_s(x, y)
    }

    /// Tube field and Jacobian at a point with chart data at `s*`.
    fn tube(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let s = self.nearest_s(x, y);
        let cp = self.curve(s);
        let speed2 = cp.dp[0] * cp.dp[0] + cp.dp[1] * cp.dp[1];
        let speed = speed2.sqrt();
        let tx = cp.dp[0] / speed;
        let ty = cp.dp[1] / speed;
        // Inward normal n = (v, -u) for unit tangent (u, v).
        let nx = ty;
        let ny = -tx;
        let rx = x - cp.p[0];
        let ry = y - cp.p[1];
        let z = rx * nx + ry * ny;
        // Saturate the normal coordinate; identical to z through second
        // order at the curve, keeps the extension tame far from it.
        let zs = Z_MAX * (z / Z_MAX).tanh();
        let dzs = 1.0 / (z / Z_MAX).cosh().powi(2);

        let push = self.detune * cp.bump;
        let vx = cp.dp[0] + cp.c * zs * nx + push * nx;
        let vy = cp.dp[1] + cp.c * zs * ny + push * ny;

        // ds*/dp = gamma' / D with D = |gamma'|^2 - (p - gamma) . gamma''.
        let dd = speed2 - (rx * cp.ddp[0] + ry * cp.ddp[1]);
        let (dsx, dsy) = (cp.dp[0] / dd, cp.dp[1] / dd);
        // T' = (gamma'' - T (T . gamma'')) / |gamma'|; n' = rot(T').
        let tdotddp = tx * cp.ddp[0] + ty * cp.ddp[1];
        let tpx = (cp.ddp[0] - tx * tdotddp) / speed;
        let tpy = (cp.ddp[1] - ty * tdotddp) / speed;
        let npx = tpy;
        let npy = -tpx;

        // dV/dp = (gamma'' + (c' zs + detune * bump') n + (c zs + push) n')
        //         (x) ds*/dp  +  c dzs n (x) dzs/dp,   dz/dp = n exactly.
        let wx = cp.ddp[0]
            + (cp.c_d * zs + self.detune * cp.bump_d) * nx
            + (cp.c * zs + push) * npx;
        let wy = cp.ddp[1]
            + (cp.c_d * zs + self.detune * cp.bump_d) * ny
            + (cp.c * zs + push) * npy;
        let j = [
            [wx * dsx + cp.c * dzs * nx * nx, wx * dsy + cp.c * dzs * nx * ny],
            [wy * dsx + cp.c * dzs * ny * nx, wy * dsy + cp.c * dzs * ny * ny],
        ];
        ([vx, vy], j)
    }
}

impl PlanarField for GluedLoop {
    fn v(&self, x: f64, y: f64) -> (f64, f64) {
        let r = (x * x + y * y).sqrt();
        if r <= R_LIN_IN {
            return (-self.alpha * x, self.beta * y);
        }
        let w = smooth_step(Jet2::var((r - R_LIN_IN) / (R_LIN_OUT - R_LIN_IN))).v;
        let (vt, _) = self.tube(x, y);
        if w >= 1.0 {
            return (vt[0], vt[1]);
        }
        (
            (1.0 - w) * (-self.alpha * x) + w * vt[0],
            (1.0 - w) * (self.beta * y) + w * vt[1],
        )
    }

    fn jac(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let r = (x * x + y * y).sqrt();
        let lin_j = [[-self.alpha, 0.0], [0.0, self.beta]];
        if r <= R_LIN_IN {
            return lin_j;
        }
        let wj = smooth_step(Jet2::var((r - R_LIN_IN) / (R_LIN_OUT - R_LIN_IN)));
        let (vt, jt) = self.tube(x, y);
        if wj.v >= 1.0 && wj.d == 0.0 {
            return jt;
        }
        let w = wj.v;
        let wp = wj.d / (R_LIN_OUT - R_LIN_IN);
        let (gx, gy) = (wp * x / r, wp * y / r);
        let lin_v = [-self.alpha * x, self.beta * y];
        let dv = [vt[0] - lin_v[0], vt[1] - lin_v[1]];
        let mut j = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                j[i][k] = (1.0 - w) * lin_j[i][k] + w * jt[i][k];
            }
        }
        j[0][0] += dv[0] * gx;
        j[0][1] += dv[0] * gy;
        j[1][0] += dv[1] * gx;
        j[1][1] += dv[1] * gy;
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_tails_are_exact_axis_orbits() {
        let g = GluedLoop::new(2.0, 1.0);
        for &s in &[1.0, 1.5, 2.3, 3.0] {
            let (p, dp) = g.curve_point(s);
            assert!((p[0] - (-(s - S_PLUS) * 2.0).exp()).abs() < 1e-14);
            assert_eq!(p[1], 0.0);
            assert!((dp[0] + 2.0 * p[0]).abs() < 1e-12);
        }
        for &s in &[-1.0, -2.0, -4.0] {
            let (p, dp) = g.curve_point(s);
            assert_eq!(p[0], 0.0);
            assert!((p[1] - (s - S_MINUS).exp()).abs() < 1e-14);
            assert!((dp[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_velocity_never_vanishes_and_stays_outside_blend_ring() {
        let g = GluedLoop::new(2.0, 1.0);
        let mut min_speed = f64::INFINITY;
        for i in 0..=2000 {
            let s = -1.0 + 2.0 * i as f64 / 2000.0;
            let (p, dp) = g.curve_point(s);
            let speed = (dp[0] * dp[0] + dp[1] * dp[1]).sqrt();
            min_speed = min_speed.min(speed);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r > 0.9, "arc dips toward the blend ring at s = {s}: r = {r}");
        }
        assert!(min_speed > 0.3, "min curve speed {min_speed}");
    }

    #[test]
    fn field_on_curve_equals_curve_velocity() {
        let g = GluedLoop::new(2.0, 1.0);
        for i in 0..=400 {
            let s = -4.0 + 7.0 * i as f64 / 400.0;
            let (p, dp) = g.curve_point(s);
            let (vx, vy) = g.v(p[0], p[1]);
            let err = ((vx - dp[0]).powi(2) + (vy - dp[1]).powi(2)).sqrt();
            assert!(err < 1e-9, "field-curve mismatch {err} at s = {s}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = GluedLoop::new(2.0, 1.0);
        let pts = [
            (0.1, 0.05),
            (0.5, 0.02),
            (0.7, 0.72),
            (0.05, 0.8),
            (0.98, 0.05),
            (0.45, 0.46),
        ];
        let h = 1e-6;
        for &(x, y) in &pts {
            let j = g.jac(x, y);
            for (col, (dx, dy)) in [(0, (h, 0.0)), (1, (0.0, h))] {
                let (vpx, vpy) = g.v(x + dx, y + dy);
                let (vmx, vmy) = g.v(x - dx, y - dy);
                let fd = [(vpx - vmx) / (2.0 * h), (vpy - vmy) / (2.0 * h)];
                assert!(
                    (j[0][col] - fd[0]).abs() < 2e-5 * (1.0 + fd[0].abs()),
                    "J[0][{col}] at ({x}, {y}): {} vs {}",
                    j[0][col],
                    fd[0]
                );
                assert!(
                    (j[1][col] - fd[1]).abs() < 2e-5 * (1.0 + fd[1].abs()),
                    "J[1][{col}] at ({x}, {y}): {} vs {}",
                    j[1][col],
                    fd[1]
                );
            }
        }
    }

    #[test]
    fn normal_expansion_rate_on_curve_has_the_designed_profile() {
        let g = GluedLoop::new(2.0, 1.0);
        // E = n . J . n with n = (v, -u): exactly beta for s >= 0, exactly
        // -alpha for s <= -0.2, smooth in between.
        let e_at = |s: f64| {
            let (p, dp) = g.curve_point(s);
            let speed = (dp[0] * dp[0] + dp[1] * dp[1]).sqrt();
            let (u, v) = (dp[0] / speed, dp[1] / speed);
            let j = g.jac(p[0], p[1]);
            let n = [v, -u];
            n[0] * (j[0][0] * n[0] + j[0][1] * n[1]) + n[1] * (j[1][0] * n[0] + j[1][1] * n[1])
        };
        for &s in &[0.0, 0.3, 0.9, 1.4, 2.0, 3.5] {
            assert!((e_at(s) - 1.0).abs() < 1e-8, "E({s}) = {}", e_at(s));
        }
        for &s in &[-0.3, -0.8, -1.3, -2.5, -4.0] {
            assert!((e_at(s) + 2.0).abs() < 1e-8, "E({s}) = {}", e_at(s));
        }
        let mid = e_at(-0.1);
        assert!(mid > -2.0 && mid < 1.0);
    }

    #[test]
    fn detuned_loop_pushes_the_field_off_the_curve_on_the_arc() {
        let g = GluedLoop::new(2.0, 1.0).with_detune(1e-2);
        let (p, dp) = g.curve_point(-0.3);
        let (vx, vy) = g.v(p[0], p[1]);
        let err = ((vx - dp[0]).powi(2) + (vy - dp[1]).powi(2)).sqrt();
        assert!(err > 5e-3 && err < 2e-2, "detune push magnitude {err}");
        // Tails unaffected: the bump is supported on the arc.
        let (p, dp) = g.curve_point(2.0);
        let (vx, vy) = g.v(p[0], p[1]);
        assert!(((vx - dp[0]).powi(2) + (vy - dp[1]).powi(2)).sqrt() < 1e-12);
    }
}
