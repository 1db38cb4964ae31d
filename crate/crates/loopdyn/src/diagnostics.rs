//! Lyapunov exponents, attractor classification, parameter scans, and
//! Birkhoff-average spread for two-dimensional return maps.
//!
//! The map under study is anything implementing [`Map2D`] — chiefly the
//! closed-form return-map family from [`crate::asmodel`] via [`ModelMap`],
//! but the diagnostics are generic so toy fixtures with known exponents can
//! calibrate them.

use crate::asmodel::{jacobian_f, map_f, ASParams, ASState};
use crate::dynsys::wrap_angle;
use crate::onedim::circ_dist;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DiagnosticsError {
    #[error("orbit left the domain at iterate {iterate}: {reason}")]
    OrbitEscaped { iterate: usize, reason: String },
    #[error("budget too small: need n >= {min_n} after transient >= {min_transient}")]
    BudgetTooSmall { min_n: usize, min_transient: usize },
    #[error("need at least {0} starts for a spread report")]
    TooFewStarts(usize),
    #[error("tangent vector collapsed to zero at iterate {0}")]
    DegenerateTangent(usize),
}

/// Minimum number of averaged iterates for a Lyapunov estimate.
pub const MIN_ITERATES: usize = 10_000;
/// Minimum discarded transient before averaging.
pub const MIN_TRANSIENT: usize = 1_000;

/// A smooth map of the cylinder `(x, theta)` with Jacobian.
///
/// `step` returns `Err` with a reason when the state leaves the domain of
/// the map; every diagnostic treats that as an escaped orbit.
pub trait Map2D: Sync {
    fn step(&self, x: f64, theta: f64) -> Result<(f64, f64), String>;
    fn jacobian(&self, x: f64, theta: f64) -> Result<[[f64; 2]; 2], String>;

    /// Lifted (unreduced) phase advance of one step. The default assumes
    /// the advance is less than half a turn; maps with large rotation
    /// numbers per iterate must override it.
    fn theta_advance(&self, x: f64, theta: f64) -> Result<f64, String> {
        let (_, th1) = self.step(x, theta)?;
        let mut d = th1 - theta;
        while d > std::f64::consts::PI {
            d -= TAU;
        }
        while d <= -std::f64::consts::PI {
            d += TAU;
        }
        Ok(d)
    }
}

/// The composed return-map family in rescaled coordinates.
pub struct ModelMap {
    pub params: ASParams,
}

impl Map2D for ModelMap {
    fn step(&self, x: f64, theta: f64) -> Result<(f64, f64), String> {
        let s = map_f(ASState::new(x, theta), &self.params).map_err(|e| e.to_string())?;
        Ok((s.x, s.theta))
    }

    fn jacobian(&self, x: f64, theta: f64) -> Result<[[f64; 2]; 2], String> {
        jacobian_f(ASState::new(x, theta), &self.params).map_err(|e| e.to_string())
    }

    fn theta_advance(&self, x: f64, theta: f64) -> Result<f64, String> {
        let p = &self.params;
        let q = p.lambda * x + p.b * (1.0 + p.a_amp * theta.sin());
        if q <= 0.0 {
            return Err(format!("nonpositive bracket {q}"));
        }
        Ok(p.xi1 + p.mu * p.xi2 + (p.omega / p.beta) * (p.epsilon / (p.mu * q)).ln())
    }
}

/// Lyapunov exponents of one orbit, with the determinant average that must
/// equal their sum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LyapunovEstimate {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Orbit average of `ln |det DF|`; equals `lambda1 + lambda2` up to
    /// roundoff (the re-orthonormalized tangent sums telescope).
    pub mean_log_det: f64,
    pub n_used: usize,
    pub transient_dropped: usize,
}

impl LyapunovEstimate {
    /// `|lambda1 + lambda2 - <ln |det DF|>|`.
    pub fn sum_identity_gap(&self) -> f64 {
        (self.lambda1 + self.lambda2 - self.mean_log_det).abs()
    }
}

/// Lyapunov exponents by tangent iteration with per-step Gram–Schmidt
/// re-orthonormalization, sorted `lambda1 >= lambda2`.
pub fn lyapunov(
    map: &dyn Map2D,
    start: (f64, f64),
    n: usize,
    transient: usize,
) -> Result<LyapunovEstimate, DiagnosticsError> {
    if n < MIN_ITERATES || transient < MIN_TRANSIENT {
        return Err(DiagnosticsError::BudgetTooSmall {
            min_n: MIN_ITERATES,
            min_transient: MIN_TRANSIENT,
        });
    }
    let escape = |iterate: usize, reason: String| DiagnosticsError::OrbitEscaped { iterate, reason };
    let (mut x, mut th) = start;
    for i in 0..transient {
        let (x1, th1) = map.step(x, th).map_err(|r| escape(i, r))?;
        x = x1;
        th = th1;
    }
    let (mut v1, mut v2) = ([1.0_f64, 0.0_f64], [0.0_f64, 1.0_f64]);
    let (mut s1, mut s2, mut sd) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..n {
        let j = map.jacobian(x, th).map_err(|r| escape(transient + i, r))?;
        let apply = |v: [f64; 2]| [j[0][0] * v[0] + j[0][1] * v[1], j[1][0] * v[0] + j[1][1] * v[1]];
        let w1 = apply(v1);
        let w2 = apply(v2);
        let n1 = (w1[0] * w1[0] + w1[1] * w1[1]).sqrt();
        if n1 == 0.0 {
            return Err(DiagnosticsError::DegenerateTangent(transient + i));
        }
        v1 = [w1[0] / n1, w1[1] / n1];
        let dot = w2[0] * v1[0] + w2[1] * v1[1];
        let o2 = [w2[0] - dot * v1[0], w2[1] - dot * v1[1]];
        let n2 = (o2[0] * o2[0] + o2[1] * o2[1]).sqrt();
        if n2 == 0.0 {
            return Err(DiagnosticsError::DegenerateTangent(transient + i));
        }
        v2 = [o2[0] / n2, o2[1] / n2];
        s1 += n1.ln();
        s2 += n2.ln();
        sd += (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs().max(1e-300).ln();
        let (x1, th1) = map.step(x, th).map_err(|r| escape(transient + i, r))?;
        x = x1;
        th = th1;
    }
    let (mut l1, mut l2) = (s1 / n as f64, s2 / n as f64);
    if l2 > l1 {
        std::mem::swap(&mut l1, &mut l2);
    }
    Ok(LyapunovEstimate {
        lambda1: l1,
        lambda2: l2,
        mean_log_det: sd / n as f64,
        n_used: n,
        transient_dropped: transient,
    })
}

/// Verdict of [`classify_attractor`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AttractorClass {
    PeriodicSink { period: usize },
    InvariantCircle,
    Chaotic,
    Unresolved,
}

impl AttractorClass {
    pub fn label(&self) -> String {
        match self {
            AttractorClass::PeriodicSink { period } => format!("periodic-sink({period})"),
            AttractorClass::InvariantCircle => "invariant-circle".to_string(),
            AttractorClass::Chaotic => "chaotic".to_string(),
            AttractorClass::Unresolved => "unresolved".to_string(),
        }
    }
}

/// Thresholds and budgets for attractor classification.
#[derive(Debug, Clone, Copy)]
pub struct ClassifySettings {
    /// `lambda1` above this (on every confirming seed) means chaotic.
    pub chaos_threshold: f64,
    /// `|lambda1|` below this qualifies for the invariant-circle test.
    pub zero_band: f64,
    /// Longest cycle searched for by direct recurrence.
    pub period_max: usize,
    /// State-recurrence tolerance for cycle detection.
    pub period_tol: f64,
    /// Relative within-bin spread allowed by the 1D-curve test.
    pub curve_residual_tol: f64,
    /// Number of independent starts confirming a chaotic verdict.
    pub confirm_seeds: usize,
    pub n: usize,
    pub transient: usize,
}

impl Default for ClassifySettings {
    fn default() -> Self {
        ClassifySettings {
            chaos_threshold: 0.01,
            zero_band: 0.01,
            period_max: 1_000,
            period_tol: 1e-8,
            curve_residual_tol: 0.2,
            confirm_seeds: 3,
            n: MIN_ITERATES,
            transient: MIN_TRANSIENT,
        }
    }
}

fn detect_period(
    map: &dyn Map2D,
    start: (f64, f64),
    settings: &ClassifySettings,
    transient: usize,
) -> Result<Option<usize>, String> {
    let (mut x, mut th) = start;
    for _ in 0..transient {
        let s = map.step(x, th)?;
        x = s.0;
        th = s.1;
    }
    let (x0, th0) = (x, th);
    let scale = 1.0 + x0.abs();
    for p in 1..=settings.period_max {
        let s = map.step(x, th)?;
        x = s.0;
        th = s.1;
        if (x - x0).abs() / scale < settings.period_tol
            && circ_dist(th, th0) < settings.period_tol
        {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

/// True if the sampled orbit closure looks like the graph of a curve over
/// `theta`: most phase bins are visited and the within-bin `x`-spread is
/// small relative to the overall `x`-spread.
fn curve_test(samples: &[(f64, f64)], tol: f64) -> bool {
    const BINS: usize = 64;
    let mut lo = [f64::INFINITY; BINS];
    let mut hi = [f64::NEG_INFINITY; BINS];
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, th) in samples {
        let u = wrap_angle(th) + std::f64::consts::PI;
        let b = ((u / TAU * BINS as f64) as usize).min(BINS - 1);
        lo[b] = lo[b].min(x);
        hi[b] = hi[b].max(x);
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    let overall = xmax - xmin;
    let mut filled = 0usize;
    let mut spread_sum = 0.0;
    for b in 0..BINS {
        if hi[b] >= lo[b] {
            filled += 1;
            spread_sum += hi[b] - lo[b];
        }
    }
    // a locked orbit on an attracting circle closes on finitely many points,
    // so demand only that the visited phases span the circle coarsely
    if filled * 4 < BINS {
        return false;
    }
    let mean_spread = spread_sum / filled as f64;
    overall == 0.0 || mean_spread <= tol * overall.max(1e-300)
}

/// Classify the attractor reached from `start`. Escaped orbits yield
/// `Unresolved`; this never fails.
pub fn classify_attractor(
    map: &dyn Map2D,
    start: (f64, f64),
    settings: &ClassifySettings,
    seed: u64,
) -> (AttractorClass, Option<LyapunovEstimate>) {
    let lya = match lyapunov(map, start, settings.n, settings.transient) {
        Ok(l) => l,
        Err(_) => return (AttractorClass::Unresolved, None),
    };
    // cycles first: a detected recurrence with a contracting top exponent.
    // A weak sink needs ~ln(1/tol)/|lambda1| iterates to settle within the
    // recurrence tolerance, so the settling transient scales with 1/|lambda1|.
    if lya.lambda1 < 0.0 {
        let settle = ((1.0 / settings.period_tol).ln() / lya.lambda1.abs().max(1e-12)) as usize;
        let transient = settings.transient.max(settle.min(2_000_000));
        if let Ok(Some(p)) = detect_period(map, start, settings, transient) {
            return (AttractorClass::PeriodicSink { period: p }, Some(lya));
        }
    }
    // chaotic: top exponent above threshold, confirmed from independent starts
    if lya.lambda1 > settings.chaos_threshold {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut confirmed = 1usize;
        for _ in 1..settings.confirm_seeds {
            let x0 = start.0 * rng.gen_range(0.5..1.5) + 1e-6;
            let th0 = rng.gen_range(0.0..TAU);
            match lyapunov(map, (x0, th0), settings.n, settings.transient) {
                Ok(l) if l.lambda1 > settings.chaos_threshold => confirmed += 1,
                _ => {}
            }
        }
        if confirmed >= settings.confirm_seeds {
            return (AttractorClass::Chaotic, Some(lya));
        }
        return (AttractorClass::Unresolved, Some(lya));
    }
    // invariant circle: neutral top exponent and a 1D orbit closure
    if lya.lambda1.abs() <= settings.zero_band {
        let mut samples = Vec::with_capacity(2_000);
        let (mut x, mut th) = start;
        let mut ok = true;
        for i in 0..(settings.transient + 2_000) {
            match map.step(x, th) {
                Ok((x1, th1)) => {
                    x = x1;
                    th = th1;
                    if i >= settings.transient {
                        samples.push((x, th));
                    }
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && curve_test(&samples, settings.curve_residual_tol) {
            return (AttractorClass::InvariantCircle, Some(lya));
        }
    }
    (AttractorClass::Unresolved, Some(lya))
}

/// Rotation-number estimate from the lifted phase displacement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RotationEstimate {
    /// Fractional part of the mean advance per iterate, in `[0, 1)`.
    pub value: f64,
    /// Mean lifted advance per iterate (turns, unreduced).
    pub mean_turns: f64,
    /// `|estimate(n) - estimate(n/2)|`: stability indicator, never an
    /// irrationality claim.
    pub stability_gap: f64,
}

pub fn rotation_number(
    map: &dyn Map2D,
    start: (f64, f64),
    n: usize,
    transient: usize,
) -> Result<RotationEstimate, DiagnosticsError> {
    if n < 2 {
        return Err(DiagnosticsError::BudgetTooSmall { min_n: 2, min_transient: 0 });
    }
    let escape = |iterate: usize, reason: String| DiagnosticsError::OrbitEscaped { iterate, reason };
    let (mut x, mut th) = start;
    for i in 0..transient {
        let s = map.step(x, th).map_err(|r| escape(i, r))?;
        x = s.0;
        th = s.1;
    }
    let mut total = 0.0_f64;
    let mut half = 0.0_f64;
    for i in 0..n {
        let adv = map.theta_advance(x, th).map_err(|r| escape(transient + i, r))?;
        total += adv;
        if i < n / 2 {
            half = total;
        }
        let s = map.step(x, th).map_err(|r| escape(transient + i, r))?;
        x = s.0;
        th = s.1;
    }
    let mean_turns = total / TAU / n as f64;
    let est_half = half / TAU / (n / 2) as f64;
    Ok(RotationEstimate {
        value: mean_turns.rem_euclid(1.0),
        mean_turns,
        stability_gap: (mean_turns.rem_euclid(1.0) - est_half.rem_euclid(1.0)).abs(),
    })
}

/// One row of a parameter scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub family: String,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub omega: f64,
    pub rho: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sum_identity_gap: f64,
    pub class: String,
    pub rotation_number: Option<f64>,
    /// Birkhoff mean of `sin theta` along the diagnostic orbit.
    pub birkhoff_mean: f64,
    /// Second moment of the same observable.
    pub birkhoff_second_moment: f64,
    pub iterates_used: usize,
    pub transient_dropped: usize,
    pub error: Option<String>,
}

/// One scan point: a family label plus the fully specified map parameters
/// and the `(a, b)` coordinates it came from.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub family: String,
    pub params: ASParams,
    pub a: f64,
    pub b: f64,
}

fn birkhoff_moments(
    map: &dyn Map2D,
    start: (f64, f64),
    n: usize,
    transient: usize,
) -> Result<(f64, f64), String> {
    let (mut x, mut th) = start;
    for _ in 0..transient {
        let s = map.step(x, th)?;
        x = s.0;
        th = s.1;
    }
    let (mut m1, mut m2) = (0.0_f64, 0.0_f64);
    for _ in 0..n {
        let v = th.sin();
        m1 += v;
        m2 += v * v;
        let s = map.step(x, th)?;
        x = s.0;
        th = s.1;
    }
    Ok((m1 / n as f64, m2 / n as f64))
}

fn scan_one(point: &ScanPoint, start: (f64, f64), settings: &ClassifySettings, seed: u64) -> ScanRecord {
    let map = ModelMap { params: point.params };
    let mut rec = ScanRecord {
        family: point.family.clone(),
        a: point.a,
        b: point.b,
        mu: point.params.mu,
        omega: point.params.omega,
        rho: None,
        lambda1: f64::NAN,
        lambda2: f64::NAN,
        sum_identity_gap: f64::NAN,
        class: AttractorClass::Unresolved.label(),
        rotation_number: None,
        birkhoff_mean: f64::NAN,
        birkhoff_second_moment: f64::NAN,
        iterates_used: settings.n,
        transient_dropped: settings.transient,
        error: None,
    };
    let (class, lya) = classify_attractor(&map, start, settings, seed);
    rec.class = class.label();
    match lya {
        Some(l) => {
            rec.lambda1 = l.lambda1;
            rec.lambda2 = l.lambda2;
            rec.sum_identity_gap = l.sum_identity_gap();
        }
        None => {
            rec.error = Some("orbit escaped during exponent estimation".to_string());
            return rec;
        }
    }
    match birkhoff_moments(&map, start, settings.n, settings.transient) {
        Ok((m1, m2)) => {
            rec.birkhoff_mean = m1;
            rec.birkhoff_second_moment = m2;
        }
        Err(e) => rec.error = Some(e),
    }
    if let Ok(rot) = rotation_number(&map, start, settings.n, settings.transient) {
        rec.rotation_number = Some(rot.value);
    }
    rec
}

/// Run a scan over the given points. Points are independent and processed
/// in parallel; the output order matches the input order, and failures are
/// recorded per point without aborting the scan.
pub fn scan(
    points: &[ScanPoint],
    start: (f64, f64),
    settings: &ClassifySettings,
    seed: u64,
) -> Vec<ScanRecord> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| scan_one(p, start, settings, seed.wrapping_add(i as u64)))
        .collect()
}

/// Chaotic fraction within one decade of the dissipation parameter.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct DecadeFraction {
    /// Decade `[10^e, 10^{e+1})` of `mu`.
    pub exponent: i32,
    pub total: usize,
    pub chaotic: usize,
    pub fraction: f64,
}

/// Order-invariant reduction of a scan.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScanSummary {
    pub total: usize,
    pub chaotic: usize,
    pub periodic_sink: usize,
    pub invariant_circle: usize,
    pub unresolved: usize,
    pub failed: usize,
    pub chaotic_fraction_per_decade: Vec<DecadeFraction>,
}

pub fn summarize(records: &[ScanRecord]) -> ScanSummary {
    use std::collections::BTreeMap;
    let mut decades: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    let mut s = ScanSummary {
        total: records.len(),
        chaotic: 0,
        periodic_sink: 0,
        invariant_circle: 0,
        unresolved: 0,
        failed: 0,
        chaotic_fraction_per_decade: Vec::new(),
    };
    for r in records {
        let chaotic = r.class == "chaotic";
        if chaotic {
            s.chaotic += 1;
        } else if r.class.starts_with("periodic-sink") {
            s.periodic_sink += 1;
        } else if r.class == "invariant-circle" {
            s.invariant_circle += 1;
        } else {
            s.unresolved += 1;
        }
        if r.error.is_some() {
            s.failed += 1;
        }
        if r.mu > 0.0 && r.mu.is_finite() {
            let e = r.mu.log10().floor() as i32;
            let d = decades.entry(e).or_insert((0, 0));
            d.0 += 1;
            if chaotic {
                d.1 += 1;
            }
        }
    }
    for (e, (total, chaotic)) in decades {
        s.chaotic_fraction_per_decade.push(DecadeFraction {
            exponent: e,
            total,
            chaotic,
            fraction: chaotic as f64 / total as f64,
        });
    }
    s
}

/// Birkhoff-average spread from many random starts.
#[derive(Debug, Clone, Serialize)]
pub struct SpreadReport {
    pub means: Vec<f64>,
    /// `max - min` of the averages at the full length `n`.
    pub spread: f64,
    /// Same spread at length `n/4` of the same orbits.
    pub spread_quarter: f64,
    /// Standard deviation of the averages at `n` and at `n/4`.
    pub std_full: f64,
    pub std_quarter: f64,
    /// True when the spread shrinks with `n` (the single-basin signature);
    /// coexisting basins keep the spread pinned and are flagged here.
    pub converged: bool,
    pub n: usize,
    pub starts: usize,
}

fn std_dev(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Birkhoff averages of `observable` from `starts` random initial points
/// drawn inside `x_range x [0, 2 pi)` with a seeded generator.
pub fn birkhoff_genericity(
    map: &dyn Map2D,
    observable: &(dyn Fn(f64, f64) -> f64 + Sync),
    x_range: (f64, f64),
    starts: usize,
    n: usize,
    seed: u64,
) -> Result<SpreadReport, DiagnosticsError> {
    if starts < 20 {
        return Err(DiagnosticsError::TooFewStarts(20));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inits: Vec<(f64, f64)> = (0..starts)
        .map(|_| (rng.gen_range(x_range.0..=x_range.1), rng.gen_range(0.0..TAU)))
        .collect();
    let sums: Vec<(f64, f64)> = inits
        .par_iter()
        .map(|&(x0, th0)| {
            let (mut x, mut th) = (x0, th0);
            for _ in 0..MIN_TRANSIENT {
                match map.step(x, th) {
                    Ok(s) => {
                        x = s.0;
                        th = s.1;
                    }
                    Err(_) => return (f64::NAN, f64::NAN),
                }
            }
            let (mut acc, mut quarter) = (0.0_f64, 0.0_f64);
            for i in 0..n {
                acc += observable(x, th);
                if i + 1 == n / 4 {
                    quarter = acc / (n / 4) as f64;
                }
                match map.step(x, th) {
                    Ok(s) => {
                        x = s.0;
                        th = s.1;
                    }
                    Err(_) => return (f64::NAN, f64::NAN),
                }
            }
            (acc / n as f64, quarter)
        })
        .collect();
    let full: Vec<f64> = sums.iter().map(|s| s.0).filter(|v| v.is_finite()).collect();
    let quarter: Vec<f64> = sums.iter().map(|s| s.1).filter(|v| v.is_finite()).collect();
    if full.len() < 20 {
        return Err(DiagnosticsError::OrbitEscaped {
            iterate: 0,
            reason: "too many starts escaped".to_string(),
        });
    }
    let spread = full.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - full.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread_quarter = quarter.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - quarter.iter().cloned().fold(f64::INFINITY, f64::min);
    let std_full = std_dev(&full);
    let std_quarter = std_dev(&quarter);
    // single-basin: averages tighten with n; pinned spread means the starts
    // are split across basins (or the averages do not converge at all)
    let converged = std_full <= 0.9 * std_quarter + 1e-12;
    Ok(SpreadReport {
        means: full,
        spread,
        spread_quarter,
        std_full,
        std_quarter,
        converged,
        n,
        starts,
    })
}

/// Write scan records as CSV.
pub fn write_records_csv<W: Write>(records: &[ScanRecord], w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "family",
        "a",
        "b",
        "mu",
        "omega",
        "lambda1",
        "lambda2",
        "sum_identity_gap",
        "class",
        "rotation_number",
        "birkhoff_mean",
        "birkhoff_second_moment",
        "iterates_used",
        "transient_dropped",
        "error",
    ])?;
    for r in records {
        wtr.write_record([
            r.family.clone(),
            format!("{:?}", r.a),
            format!("{:?}", r.b),
            format!("{:?}", r.mu),
            format!("{:?}", r.omega),
            format!("{:?}", r.lambda1),
            format!("{:?}", r.lambda2),
            format!("{:?}", r.sum_identity_gap),
            r.class.clone(),
            r.rotation_number.map(|v| format!("{v:?}")).unwrap_or_default(),
            format!("{:?}", r.birkhoff_mean),
            format!("{:?}", r.birkhoff_second_moment),
            r.iterates_used.to_string(),
            r.transient_dropped.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write scan records as JSON lines.
pub fn write_records_jsonl<W: Write>(records: &[ScanRecord], mut w: W) -> anyhow::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Plot-ready columnar dump: one `(a, lambda1)` pair per line.
pub fn write_lambda_dump<W: Write>(records: &[ScanRecord], w: W) -> anyhow::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["a", "lambda1"])?;
    for r in records {
        wtr.write_record([format!("{:?}", r.a), format!("{:?}", r.lambda1)])?;
    }
    wtr.flush()?;
    Ok(())
}
