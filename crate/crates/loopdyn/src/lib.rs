//! Numerical toolkit for rank-one chaos from periodically forced dissipative
//! homoclinic loops.
//!
//! The pipeline mirrors the analysis it implements:
//!
//! 1. [`homoclinic`] — locate the dissipative saddle, compute the unperturbed
//!    homoclinic orbit by shooting, build tangent frames and the normal
//!    expansion rate `E(s)`, check the nonresonance hypothesis.
//! 2. [`melnikov`] — splitting integrals `A`, `C`, `S`, the admissible
//!    prefactor interval, wave coefficients and the scales `K1`, `P_L`.
//! 3. [`asmodel`] — the closed-form Afraimovich–Shilnikov return-map family,
//!    its logarithmic reparametrization and 1D singular limit.
//! 4. [`onedim`] + [`rankone`] — Misiurewicz-type verification of the circle
//!    family and the rank-one admissibility conditions (C1), (C3), (C4).
//! 5. [`flowmap`] — the flow-induced return map on sections near the saddle,
//!    compared against the analytic leading-order prediction.
//! 6. [`diagnostics`] — Lyapunov exponents, attractor classification,
//!    parameter scans, Birkhoff-average spread.
//!
//! Everything is built on [`dynsys`] (adaptive dense-output integration with
//! event detection) and exercised against the ground-truth fixtures in
//! [`fixtures`], chiefly a "glued-loop" vector field constructed around a
//! prescribed closed curve so the homoclinic orbit is known exactly.

pub mod asmodel;
pub mod config;
pub mod diagnostics;
pub mod dynsys;
pub mod fixtures;
pub mod flowmap;
pub mod homoclinic;
pub mod jet;
pub mod melnikov;
pub mod onedim;
pub mod rankone;

pub use dynsys::{ExtendedState, ForcedField, PlanarField, Trajectory};
