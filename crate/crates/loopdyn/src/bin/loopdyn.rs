//! Batch front end: configuration parsing, pipeline orchestration
//! (orbit -> integrals -> maps -> scans), and file emission.
//!
//! Exit codes: 0 success, 2 validation failure, 3 numeric failure (with a
//! witness file in the output directory).

use clap::{Parser, Subcommand};
use loopdyn::asmodel::{
    map_f, reparametrize, singular_limit, ASState,
};
use loopdyn::config::{RunConfig, EXIT_NUMERIC, EXIT_VALIDATION};
use loopdyn::diagnostics::{
    scan as run_scan, summarize, write_lambda_dump, write_records_csv, write_records_jsonl,
    ClassifySettings, ScanPoint, MIN_ITERATES, MIN_TRANSIENT,
};
use loopdyn::dynsys::{wrap_angle, ConstantForcing, ForcedField};
use loopdyn::flowmap::{
    analytic_prediction, build_sections, estimate_k0hat, passage_time_check, return_map_flow,
    write_samples_csv,
};
use loopdyn::homoclinic::{
    check_asymptotics, check_h1, compute_homoclinic, locate_saddle, read_orbit_csv,
    write_orbit_csv, HomoclinicOrbit, SaddleInfo, Window,
};
use loopdyn::melnikov::{compute_acs, compute_acs_unchecked, rho_interval, wave_coefficients, MelnikovData};
use loopdyn::onedim::{critical_set, default_delta0, verify_misiurewicz};
use loopdyn::rankone::{c1_check, c3_check, c4_distortion, model_family, GridSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "loopdyn", about = "Forced homoclinic-loop analysis pipeline")]
struct Cli {
    /// Configuration file (defaults are used when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 = default (overrides the config).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Numeric tolerance (overrides the config).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Locate the saddle and the unperturbed homoclinic orbit.
    Homoclinic,
    /// Splitting integrals and the admissible prefactor interval.
    Melnikov,
    /// The closed-form return-map family.
    Asmap {
        #[command(subcommand)]
        sub: AsmapCmd,
    },
    /// The flow-induced return map on sections near the saddle.
    Flow {
        #[command(subcommand)]
        sub: FlowCmd,
    },
    /// Verification reports.
    Verify {
        #[command(subcommand)]
        sub: VerifyCmd,
    },
    /// Parameter scans.
    Scan {
        #[command(subcommand)]
        sub: ScanCmd,
    },
}

#[derive(Subcommand)]
enum AsmapCmd {
    /// Iterate the map at fixed parameters and dump the orbit.
    Iterate,
    /// Classify attractors over the (a, n) grid.
    Scan,
    /// Convergence table of the family toward its 1D singular limit.
    SingularLimit,
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Sample the flow-induced return map and compare with the analytic
    /// leading-order prediction.
    ReturnMap,
    /// Passage-time regression across the dissipation grid.
    PassageTime,
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Misiurewicz-type conditions for the singular circle family.
    Misiurewicz,
    /// C^3 convergence of the family to its singular limit.
    C1,
    /// Nondegenerate transverse dependence at the critical points.
    C3,
    /// Bounded determinant distortion.
    C4,
    /// Flow return map against the analytic prediction, with trapping.
    Flow,
}

#[derive(Subcommand)]
enum ScanCmd {
    /// Lyapunov exponents and attractor classes over the parameter grid.
    Lyapunov,
}

/// Failures are split by exit code: validation errors (bad config or
/// missing inputs) exit 2; numeric failures exit 3 and leave a witness.
enum CmdError {
    Validation(String),
    Numeric(String),
}

type CmdResult = Result<(), CmdError>;

fn validation<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Validation(e.to_string())
}

fn numeric<E: std::fmt::Display>(e: E) -> CmdError {
    CmdError::Numeric(e.to_string())
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return EXIT_VALIDATION;
            }
        },
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("config error: {e}");
        return EXIT_VALIDATION;
    }
    if cfg.threads > 0 {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    if let Err(e) = fs::create_dir_all(&cfg.out_dir) {
        eprintln!("cannot create output directory {}: {e}", cfg.out_dir.display());
        return EXIT_VALIDATION;
    }
    let command_name = command_label(&cli.cmd);
    match dispatch(&cfg, &cli.cmd) {
        Ok(()) => 0,
        Err(CmdError::Validation(msg)) => {
            eprintln!("{command_name}: {msg}");
            EXIT_VALIDATION
        }
        Err(CmdError::Numeric(msg)) => {
            eprintln!("{command_name}: numeric failure: {msg}");
            let witness = serde_json::json!({
                "command": command_name,
                "error": msg,
                "config_fingerprint": cfg.fingerprint(),
            });
            let path = cfg.out_dir.join("witness.json");
            if let Err(e) = fs::write(&path, serde_json::to_vec_pretty(&witness).unwrap()) {
                eprintln!("cannot write witness file: {e}");
            } else {
                eprintln!("witness written to {}", path.display());
            }
            EXIT_NUMERIC
        }
    }
}

fn command_label(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Homoclinic => "homoclinic",
        Cmd::Melnikov => "melnikov",
        Cmd::Asmap { sub: AsmapCmd::Iterate } => "asmap iterate",
        Cmd::Asmap { sub: AsmapCmd::Scan } => "asmap scan",
        Cmd::Asmap { sub: AsmapCmd::SingularLimit } => "asmap singular-limit",
        Cmd::Flow { sub: FlowCmd::ReturnMap } => "flow return-map",
        Cmd::Flow { sub: FlowCmd::PassageTime } => "flow passage-time",
        Cmd::Verify { sub: VerifyCmd::Misiurewicz } => "verify misiurewicz",
        Cmd::Verify { sub: VerifyCmd::C1 } => "verify c1",
        Cmd::Verify { sub: VerifyCmd::C3 } => "verify c3",
        Cmd::Verify { sub: VerifyCmd::C4 } => "verify c4",
        Cmd::Verify { sub: VerifyCmd::Flow } => "verify flow",
        Cmd::Scan { sub: ScanCmd::Lyapunov } => "scan lyapunov",
    }
}

fn dispatch(cfg: &RunConfig, cmd: &Cmd) -> CmdResult {
    match cmd {
        Cmd::Homoclinic => cmd_homoclinic(cfg),
        Cmd::Melnikov => cmd_melnikov(cfg),
        Cmd::Asmap { sub: AsmapCmd::Iterate } => cmd_asmap_iterate(cfg),
        Cmd::Asmap { sub: AsmapCmd::Scan } => cmd_scan(cfg, false),
        Cmd::Asmap { sub: AsmapCmd::SingularLimit } => cmd_singular_limit(cfg),
        Cmd::Flow { sub: FlowCmd::ReturnMap } => cmd_flow_return(cfg),
        Cmd::Flow { sub: FlowCmd::PassageTime } => cmd_flow_passage(cfg),
        Cmd::Verify { sub: VerifyCmd::Misiurewicz } => cmd_verify_misiurewicz(cfg),
        Cmd::Verify { sub: VerifyCmd::C1 } => cmd_verify_c1(cfg),
        Cmd::Verify { sub: VerifyCmd::C3 } => cmd_verify_c3(cfg),
        Cmd::Verify { sub: VerifyCmd::C4 } => cmd_verify_c4(cfg),
        Cmd::Verify { sub: VerifyCmd::Flow } => cmd_verify_flow(cfg),
        Cmd::Scan { sub: ScanCmd::Lyapunov } => cmd_scan(cfg, true),
    }
}

/// Write a CSV body under a fingerprint comment line.
fn write_csv_file(cfg: &RunConfig, name: &str, body: &[u8]) -> CmdResult {
    let mut out = format!("# config-fingerprint: {}\n", cfg.fingerprint()).into_bytes();
    out.extend_from_slice(body);
    fs::write(cfg.out_dir.join(name), out).map_err(validation)
}

/// Write a report as JSON with the fingerprint embedded.
fn write_json_file<T: Serialize>(cfg: &RunConfig, name: &str, report: &T) -> CmdResult {
    let value = serde_json::json!({
        "config_fingerprint": cfg.fingerprint(),
        "report": report,
    });
    fs::write(cfg.out_dir.join(name), serde_json::to_vec_pretty(&value).map_err(validation)?)
        .map_err(validation)
}

fn unforced_field(cfg: &RunConfig) -> Result<ForcedField, CmdError> {
    Ok(ForcedField::unforced(cfg.planar_field().map_err(validation)?))
}

fn saddle_and_orbit(cfg: &RunConfig) -> Result<(ForcedField, SaddleInfo, HomoclinicOrbit), CmdError> {
    let field = unforced_field(cfg)?;
    let saddle = locate_saddle(&field, (0.0, 0.0), cfg.tol.min(1e-9)).map_err(numeric)?;
    let orbit =
        compute_homoclinic(&field, &saddle, cfg.epsilon, cfg.tol).map_err(|e| {
            CmdError::Numeric(format!("no homoclinic loop: {e}"))
        })?;
    Ok((field, saddle, orbit))
}

#[derive(Serialize)]
struct HomoclinicReport {
    saddle: SaddleInfo,
    window: Window,
    closure_residual: f64,
    h1: loopdyn::homoclinic::H1Report,
    asymptotics: Option<loopdyn::homoclinic::AsymptoticsReport>,
}

fn cmd_homoclinic(cfg: &RunConfig) -> CmdResult {
    let (_, saddle, orbit) = saddle_and_orbit(cfg)?;
    let h1 = check_h1(saddle.alpha, saddle.beta, 0.1, 2.0, 40);
    if !h1.diophantine_pass {
        eprintln!(
            "warning: nonresonance check failed (worst pair {:?}); analysis proceeds at user risk",
            h1.worst_pair
        );
    }
    let asymptotics = check_asymptotics(&orbit, &saddle).ok();
    let mut body = Vec::new();
    write_orbit_csv(&orbit, &mut body).map_err(numeric)?;
    write_csv_file(cfg, "orbit.csv", &body)?;
    let report = HomoclinicReport {
        saddle,
        window: orbit.window,
        closure_residual: orbit.closure_residual,
        h1,
        asymptotics,
    };
    write_json_file(cfg, "homoclinic.json", &report)?;
    println!(
        "homoclinic: orbit with {} samples, closure residual {:.3e} -> {}",
        orbit.s_grid.len(),
        orbit.closure_residual,
        cfg.out_dir.join("orbit.csv").display()
    );
    Ok(())
}

/// Load the orbit written by `homoclinic` (CSV + JSON sidecar).
fn load_orbit(cfg: &RunConfig) -> Result<(SaddleInfo, HomoclinicOrbit), CmdError> {
    let meta_path = cfg.out_dir.join("homoclinic.json");
    let csv_path = cfg.out_dir.join("orbit.csv");
    if !meta_path.exists() || !csv_path.exists() {
        return Err(CmdError::Validation(format!(
            "missing {} or {}; run the homoclinic command first",
            csv_path.display(),
            meta_path.display()
        )));
    }
    let meta: serde_json::Value =
        serde_json::from_slice(&fs::read(&meta_path).map_err(validation)?).map_err(validation)?;
    let report = &meta["report"];
    let saddle: SaddleInfo =
        serde_json::from_value(report["saddle"].clone()).map_err(validation)?;
    let window: Window = serde_json::from_value(report["window"].clone()).map_err(validation)?;
    let residual = report["closure_residual"].as_f64().unwrap_or(f64::NAN);
    let text = fs::read_to_string(&csv_path).map_err(validation)?;
    let body = text.strip_prefix('#').map(|rest| {
        // drop the fingerprint comment line
        rest.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default()
    });
    let body = body.unwrap_or(text);
    let orbit = read_orbit_csv(body.as_bytes(), window, residual).map_err(validation)?;
    Ok((saddle, orbit))
}

#[derive(Serialize)]
struct MelnikovReport {
    data: MelnikovData,
    rho_interval: (f64, f64),
    rho_used: f64,
    waves: loopdyn::melnikov::WaveCoefficients,
}

/// When `gated` the 1% tail-accuracy gate applies (the `melnikov` command);
/// the flow commands compare at 5% and use the ungated integrals, carrying
/// the tail estimate in the report instead.
fn melnikov_pipeline(
    cfg: &RunConfig,
    saddle: &SaddleInfo,
    orbit: &HomoclinicOrbit,
    gated: bool,
) -> Result<MelnikovReport, CmdError> {
    let h = ConstantForcing(1.0);
    let data = if gated {
        compute_acs(orbit, &h, cfg.omega, saddle).map_err(numeric)?
    } else {
        compute_acs_unchecked(orbit, &h, cfg.omega, saddle).map_err(numeric)?
    };
    let interval = rho_interval(&data, cfg.tol).map_err(numeric)?;
    let rho = cfg.rho.unwrap_or(0.5 * (interval.0 + interval.1));
    let waves = wave_coefficients(&data, rho, orbit).map_err(numeric)?;
    Ok(MelnikovReport { data, rho_interval: interval, rho_used: rho, waves })
}

fn cmd_melnikov(cfg: &RunConfig) -> CmdResult {
    let (saddle, orbit) = load_orbit(cfg)?;
    let report = melnikov_pipeline(cfg, &saddle, &orbit, true)?;
    write_json_file(cfg, "melnikov.json", &report)?;
    println!(
        "melnikov: A = {:.6e}, wave = {:.6e}, rho interval [{:.6}, {:.6}], band |c| = {:.4} -> {}",
        report.data.a,
        (report.data.c * report.data.c + report.data.s * report.data.s).sqrt(),
        report.rho_interval.0,
        report.rho_interval.1,
        report.waves.band,
        cfg.out_dir.join("melnikov.json").display()
    );
    Ok(())
}

fn cmd_asmap_iterate(cfg: &RunConfig) -> CmdResult {
    let p = cfg.model_params(cfg.mu_max);
    p.validate().map_err(validation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = ASState::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..TAU));
    let mut states = Vec::with_capacity(cfg.iterates + 1);
    states.push(state);
    for i in 0..cfg.iterates {
        state = map_f(state, &p)
            .map_err(|e| CmdError::Numeric(format!("iterate {i}: {e}")))?;
        states.push(state);
    }
    let mut body = Vec::new();
    loopdyn::asmodel::write_model_orbit_csv(&states, &mut body).map_err(numeric)?;
    write_csv_file(cfg, "model_orbit.csv", &body)?;
    println!(
        "asmap iterate: {} states -> {}",
        states.len(),
        cfg.out_dir.join("model_orbit.csv").display()
    );
    Ok(())
}

fn scan_points(cfg: &RunConfig) -> Vec<ScanPoint> {
    let base = cfg.model_params(cfg.mu_max);
    let mut points = Vec::new();
    for n in cfg.n_min..=cfg.n_max {
        for k in 0..cfg.a_steps {
            let a = TAU * k as f64 / cfg.a_steps as f64;
            let idx = reparametrize(&base, cfg.mu0, n, a);
            let mut p = base;
            p.mu = idx.mu_na;
            points.push(ScanPoint {
                family: format!("model-n{n}"),
                params: p,
                a,
                b: idx.b_n,
            });
        }
    }
    points
}

fn cmd_scan(cfg: &RunConfig, lambda_dump: bool) -> CmdResult {
    let points = scan_points(cfg);
    let settings = ClassifySettings {
        n: cfg.iterates.max(MIN_ITERATES),
        transient: cfg.transient.max(MIN_TRANSIENT),
        ..ClassifySettings::default()
    };
    let records = run_scan(&points, (0.5, 0.7), &settings, cfg.seed);
    let summary = summarize(&records);
    let mut body = Vec::new();
    write_records_csv(&records, &mut body).map_err(numeric)?;
    write_csv_file(cfg, "scan_records.csv", &body)?;
    let mut jl = Vec::new();
    write_records_jsonl(&records, &mut jl).map_err(numeric)?;
    fs::write(cfg.out_dir.join("scan_records.jsonl"), jl).map_err(validation)?;
    write_json_file(cfg, "scan_summary.json", &summary)?;
    if lambda_dump {
        let mut dump = Vec::new();
        write_lambda_dump(&records, &mut dump).map_err(numeric)?;
        write_csv_file(cfg, "lambda1.csv", &dump)?;
    }
    println!(
        "scan: {} points -> {} chaotic, {} sinks, {} circles, {} unresolved ({} failed)",
        summary.total,
        summary.chaotic,
        summary.periodic_sink,
        summary.invariant_circle,
        summary.unresolved,
        summary.failed
    );
    Ok(())
}

fn cmd_singular_limit(cfg: &RunConfig) -> CmdResult {
    let base = cfg.model_params(cfg.mu_max);
    base.validate().map_err(validation)?;
    let shift = loopdyn::asmodel::ladder_offset(&base, cfg.mu0) as f64;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["n", "b_n", "sup_x", "sup_theta"]).map_err(numeric)?;
    let a_probe = 1.0;
    let nx = 40;
    let ntheta = 60;
    for n in cfg.n_min..=cfg.n_max {
        let idx = reparametrize(&base, cfg.mu0, n, a_probe);
        let mut p = base;
        p.mu = idx.mu_na;
        let limit = singular_limit(&base, wrap_angle(a_probe + shift));
        let (mut sup_x, mut sup_th) = (0.0_f64, 0.0_f64);
        for j in 0..nx {
            let x = 10.0 * j as f64 / (nx - 1) as f64;
            for k in 0..ntheta {
                let th = TAU * k as f64 / ntheta as f64;
                let s = map_f(ASState::new(x, th), &p)
                    .map_err(|e| CmdError::Numeric(e.to_string()))?;
                let (_, th_lim) = limit.apply(x, th);
                sup_x = sup_x.max(s.x.abs());
                let mut d = s.theta - th_lim;
                while d > std::f64::consts::PI {
                    d -= TAU;
                }
                while d <= -std::f64::consts::PI {
                    d += TAU;
                }
                sup_th = sup_th.max(d.abs());
            }
        }
        wtr.write_record([
            n.to_string(),
            format!("{:?}", idx.b_n),
            format!("{sup_x:?}"),
            format!("{sup_th:?}"),
        ])
        .map_err(numeric)?;
    }
    let body = wtr.into_inner().map_err(numeric)?;
    write_csv_file(cfg, "singular_limit.csv", &body)?;
    println!(
        "asmap singular-limit: ladder n in [{}, {}] -> {}",
        cfg.n_min,
        cfg.n_max,
        cfg.out_dir.join("singular_limit.csv").display()
    );
    Ok(())
}

struct FlowSetup {
    field: ForcedField,
    saddle: SaddleInfo,
    orbit: HomoclinicOrbit,
    waves: loopdyn::melnikov::WaveCoefficients,
    k0hat: f64,
    sections: (loopdyn::flowmap::SectionSpec, loopdyn::flowmap::SectionSpec),
}

fn flow_setup(cfg: &RunConfig, mu: f64) -> Result<FlowSetup, CmdError> {
    let (base, saddle, orbit) = saddle_and_orbit(cfg)?;
    let mel = melnikov_pipeline(cfg, &saddle, &orbit, false)?;
    // The unforced base carries a zero forcing profile; rebuild with the
    // unit profile so the rho term actually acts.
    let field = ForcedField::new(
        Arc::clone(&base.planar),
        Arc::new(ConstantForcing(1.0)),
        mu,
        mel.rho_used,
        cfg.omega,
    );
    let k0hat = estimate_k0hat(&field, &saddle).map_err(numeric)?;
    let sections = build_sections(&orbit, mu, &mel.waves, k0hat).map_err(numeric)?;
    Ok(FlowSetup { field, saddle, orbit, waves: mel.waves, k0hat, sections })
}

fn cmd_flow_return(cfg: &RunConfig) -> CmdResult {
    let setup = flow_setup(cfg, cfg.mu_max)?;
    let mut samples = Vec::new();
    for k in 0..cfg.a_steps {
        let theta0 = TAU * k as f64 / cfg.a_steps as f64;
        let s = return_map_flow(&setup.field, &setup.sections, 0.0, theta0, cfg.tol)
            .map_err(numeric)?;
        samples.push(s);
    }
    let mut body = Vec::new();
    write_samples_csv(&samples, &mut body).map_err(numeric)?;
    write_csv_file(cfg, "flow_return.csv", &body)?;
    println!(
        "flow return-map: {} samples at mu = {:.3e} -> {}",
        samples.len(),
        cfg.mu_max,
        cfg.out_dir.join("flow_return.csv").display()
    );
    Ok(())
}

fn cmd_flow_passage(cfg: &RunConfig) -> CmdResult {
    if cfg.mu_steps < 5 {
        return Err(CmdError::Validation(
            "passage-time regression needs mu_steps >= 5".to_string(),
        ));
    }
    let (_base, saddle, orbit) = saddle_and_orbit(cfg)?;
    let mel = melnikov_pipeline(cfg, &saddle, &orbit, false)?;
    let planar = cfg.planar_field().map_err(validation)?;
    let rho = mel.rho_used;
    let omega = cfg.omega;
    let field_at = move |mu: f64| {
        ForcedField::new(Arc::clone(&planar), Arc::new(ConstantForcing(1.0)), mu, rho, omega)
    };
    let report = passage_time_check(
        &field_at,
        &orbit,
        &saddle,
        &mel.waves,
        &cfg.mu_grid(),
        0.0,
        1.0,
        cfg.tol,
    )
    .map_err(numeric)?;
    write_json_file(cfg, "flow_passage.json", &report)?;
    println!(
        "flow passage-time: slope {:.6} (target {:.6}), {}",
        report.slope,
        1.0 / saddle.beta,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        return Err(CmdError::Numeric(format!(
            "passage-time slope {} deviates from 1/beta = {}",
            report.slope,
            1.0 / saddle.beta
        )));
    }
    Ok(())
}

fn cmd_verify_misiurewicz(cfg: &RunConfig) -> CmdResult {
    let p = cfg.model_params(cfg.mu_max);
    p.validate().map_err(validation)?;
    let grid = cfg.grid.max(1024);
    let horizon = cfg.horizon.max(50);
    let mut lines = Vec::new();
    let mut passing = 0usize;
    for k in 0..cfg.a_steps {
        let a = TAU * k as f64 / cfg.a_steps as f64;
        let cm = loopdyn::asmodel::circle_map(&p, a);
        let entry = match critical_set(&cm, grid, cfg.tol) {
            Ok(critical) if !critical.is_empty() => {
                let delta0 = default_delta0(&critical);
                match verify_misiurewicz(&cm, &critical, delta0, horizon, grid) {
                    Ok(report) => {
                        if report.pass {
                            passing += 1;
                        }
                        serde_json::json!({ "a": a, "report": report })
                    }
                    Err(e) => serde_json::json!({ "a": a, "error": e.to_string() }),
                }
            }
            Ok(_) => serde_json::json!({
                "a": a,
                "error": "no critical points: the circle map is a diffeomorphism at these parameters",
            }),
            Err(e) => serde_json::json!({ "a": a, "error": e.to_string() }),
        };
        lines.push(serde_json::to_string(&entry).map_err(numeric)?);
    }
    fs::write(cfg.out_dir.join("misiurewicz.jsonl"), lines.join("\n") + "\n")
        .map_err(validation)?;
    println!(
        "verify misiurewicz: {passing}/{} parameters pass (horizon {horizon}) -> {}",
        cfg.a_steps,
        cfg.out_dir.join("misiurewicz.jsonl").display()
    );
    Ok(())
}

fn ladder_range(cfg: &RunConfig) -> std::ops::Range<u32> {
    // the convergence table needs at least four rungs
    let end = cfg.n_max.max(cfg.n_min + 3) + 1;
    cfg.n_min..end
}

fn cmd_verify_c1(cfg: &RunConfig) -> CmdResult {
    let p = cfg.model_params(0.0);
    let fam = model_family(p, cfg.mu0, ladder_range(cfg));
    let table = c1_check(&fam, GridSpec::default()).map_err(numeric)?;
    write_json_file(cfg, "c1.json", &table)?;
    println!(
        "verify c1: {} rungs, fitted X-exponent {:.4} (target {:.4})",
        table.rows.len(),
        table.fitted_exponent_x,
        p.alpha / p.beta - 1.0
    );
    Ok(())
}

fn cmd_verify_c3(cfg: &RunConfig) -> CmdResult {
    let p = cfg.model_params(0.0);
    let cm = loopdyn::asmodel::circle_map(&p, 0.0);
    let critical = critical_set(&cm, cfg.grid.max(1024), cfg.tol).map_err(numeric)?;
    if critical.is_empty() {
        return Err(CmdError::Numeric(
            "no critical points: the singular circle map is a diffeomorphism; \
             increase omega/beta or the wave amplitude"
                .to_string(),
        ));
    }
    let thetas: Vec<f64> = critical.iter().map(|c| c.theta).collect();
    let pairs: Vec<(f64, Vec<f64>)> = (0..cfg.a_steps)
        .map(|k| (TAU * k as f64 / cfg.a_steps as f64, thetas.clone()))
        .collect();
    let fam = model_family(p, cfg.mu0, ladder_range(cfg));
    let report = c3_check(&fam, &pairs, 1e-4);
    write_json_file(cfg, "c3.json", &report)?;
    println!(
        "verify c3: min |d theta / dX| = {:.6e} at (a, c) = ({:.4}, {:.4}) -> {}",
        report.min_derivative,
        report.witness.0,
        report.witness.1,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        return Err(CmdError::Numeric(format!(
            "transverse derivative {} below tolerance {}",
            report.min_derivative, report.tol
        )));
    }
    Ok(())
}

fn cmd_verify_c4(cfg: &RunConfig) -> CmdResult {
    let p = cfg.model_params(0.0);
    let fam = model_family(p, cfg.mu0, ladder_range(cfg));
    let report = c4_distortion(&fam, GridSpec::default(), 100.0).map_err(numeric)?;
    write_json_file(cfg, "c4.json", &report)?;
    println!(
        "verify c4: worst distortion ratio {:.4} (bound {}) -> {}",
        report.worst_ratio,
        report.bound,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        return Err(CmdError::Numeric(format!(
            "distortion ratio {} exceeds bound {}",
            report.worst_ratio, report.bound
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct FlowVerifyReport {
    mu: f64,
    k0hat: f64,
    max_rel_err_z: f64,
    max_phase_err: f64,
    trapped: bool,
    tol_rel: f64,
    pass: bool,
}

fn cmd_verify_flow(cfg: &RunConfig) -> CmdResult {
    let setup = flow_setup(cfg, cfg.mu_max)?;
    let mu = cfg.mu_max;
    let mut max_rel = 0.0_f64;
    let mut max_phase = 0.0_f64;
    let mut trapped = true;
    for k in 0..cfg.a_steps {
        let theta0 = TAU * k as f64 / cfg.a_steps as f64;
        for z0 in [-0.5 * setup.k0hat, 0.0, 0.5 * setup.k0hat] {
            let s = return_map_flow(&setup.field, &setup.sections, z0, theta0, cfg.tol)
                .map_err(numeric)?;
            let pred = analytic_prediction(
                z0,
                theta0,
                mu,
                &setup.waves,
                &setup.orbit,
                &setup.saddle,
                cfg.omega,
            )
            .map_err(numeric)?;
            max_rel = max_rel.max((s.z_mid - pred.z_hat).abs() / pred.z_hat.abs());
            let mut d = s.theta_mid - pred.theta_hat;
            while d > std::f64::consts::PI {
                d -= TAU;
            }
            while d <= -std::f64::consts::PI {
                d += TAU;
            }
            max_phase = max_phase.max(d.abs());
            trapped &= s.z1.abs() <= setup.k0hat + 1.0;
        }
    }
    let report = FlowVerifyReport {
        mu,
        k0hat: setup.k0hat,
        max_rel_err_z: max_rel,
        max_phase_err: max_phase,
        trapped,
        tol_rel: 0.05,
        pass: max_rel < 0.05 && trapped,
    };
    write_json_file(cfg, "flow_verify.json", &report)?;
    println!(
        "verify flow: max |Z - prediction|/|prediction| = {:.4}, phase err {:.4}, trapping {} -> {}",
        report.max_rel_err_z,
        report.max_phase_err,
        report.trapped,
        if report.pass { "pass" } else { "FAIL" }
    );
    if !report.pass {
        return Err(CmdError::Numeric(format!(
            "flow comparison failed: rel err {}, trapped {}",
            report.max_rel_err_z, report.trapped
        )));
    }
    Ok(())
}
