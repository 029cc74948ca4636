//! The four subcommands. Each returns its exit code, the JSON payload, CSV
//! rows and a human summary; writing them out is left to the caller.

use serde::Serialize;
use std::fmt::Write as _;

use super::config::{FlowMode, RunConfig, SurfaceConfig};
use super::report::{num, opt, to_json};
use crate::ambient::{ModelClass, ModelParams};
use crate::canonical::critical_mean_curvature;
use crate::error::{Error, Result};
use crate::surface::{geometry_field, GeometryField, Immersion};
use crate::verify::{convergence_study, is_closed, run_checks, CheckId, CheckReport, CheckStatus, Tolerances};
use crate::willmore::{
    el_residual, flow_normal_graph, flow_radius_family, willmore_energy, ElResidual, EnergyBreakdown, FlowState,
    GraphFlow, GraphFlowOptions, RadiusFlow, RadiusFlowOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub json: String,
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
    pub text: String,
}

#[derive(Serialize)]
struct ModelEcho {
    kappa: f64,
    tau: f64,
    anisotropy: f64,
    class: ModelClass,
}

impl From<&ModelParams> for ModelEcho {
    fn from(m: &ModelParams) -> Self {
        Self {
            kappa: m.kappa(),
            tau: m.tau(),
            anisotropy: m.anisotropy(),
            class: m.class(),
        }
    }
}

#[derive(Serialize)]
struct GridEcho {
    nu: usize,
    nv: usize,
}

fn build(cfg: &RunConfig) -> Result<(Immersion, GeometryField)> {
    let imm = cfg.surface.build(&cfg.model)?;
    let grid = imm.grid(cfg.grid.nu, cfg.grid.nv)?;
    let gf = geometry_field(&imm, &grid)?;
    Ok((imm, gf))
}

#[derive(Serialize)]
struct VerifySummary {
    passed: usize,
    failed: usize,
    inapplicable: usize,
    all_passed: bool,
}

#[derive(Serialize)]
struct VerifyPayload<'a> {
    command: &'static str,
    config: &'a RunConfig,
    model: ModelEcho,
    surface: &'static str,
    grid: GridEcho,
    closed: bool,
    area: f64,
    tolerances: Tolerances,
    checks: Vec<CheckReport>,
    summary: VerifySummary,
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let ids = cfg.checks.resolve()?;
    let (_, gf) = build(cfg)?;
    let tol = cfg.tolerances.apply(Tolerances::for_field(&gf));
    let checks = run_checks(&gf, &ids, &tol);
    let count = |s: CheckStatus| checks.iter().filter(|c| c.status == s).count();
    let summary = VerifySummary {
        passed: count(CheckStatus::Pass),
        failed: count(CheckStatus::Fail),
        inapplicable: count(CheckStatus::Inapplicable),
        all_passed: checks.iter().all(|c| c.passed),
    };
    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(
            text,
            "{:<30} {:<12} residual {:>10.3e}  gate {:>9.2e}{}",
            c.id.as_str(),
            format!("{:?}", c.status).to_lowercase(),
            c.pointwise_max_residual,
            c.tolerance,
            c.integral_value.map(|v| format!("  integral {v:.3e}")).unwrap_or_default()
        );
    }
    let _ = writeln!(
        text,
        "{} passed, {} failed, {} inapplicable",
        summary.passed, summary.failed, summary.inapplicable
    );
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.id.as_str().to_string(),
                format!("{:?}", c.status).to_lowercase(),
                num(c.pointwise_max_residual),
                num(c.tolerance),
                opt(c.integral_value),
                num(c.integral_tolerance),
                c.equality.map(|e| e.to_string()).unwrap_or_default(),
            ]
        })
        .collect();
    let exit_code = if summary.all_passed { EXIT_OK } else { EXIT_TOLERANCE };
    let payload = VerifyPayload {
        command: "verify",
        config: cfg,
        model: (&cfg.model).into(),
        surface: gf.kind.name(),
        grid: GridEcho {
            nu: gf.grid.nu,
            nv: gf.grid.nv,
        },
        closed: is_closed(&gf),
        area: gf.area(),
        tolerances: tol,
        checks,
        summary,
    };
    Ok(Outcome {
        exit_code,
        json: to_json(&payload)?,
        csv_header: vec![
            "check",
            "status",
            "pointwise_max_residual",
            "tolerance",
            "integral_value",
            "integral_tolerance",
            "equality",
        ],
        csv_rows: rows,
        text,
    })
}

#[derive(Serialize)]
struct EnergyPayload<'a> {
    command: &'static str,
    config: &'a RunConfig,
    model: ModelEcho,
    surface: &'static str,
    grid: GridEcho,
    energy: EnergyBreakdown,
    euler_lagrange: ElResidual,
    critical_h: Option<f64>,
    note: Option<&'static str>,
}

pub fn cmd_energy(cfg: &RunConfig) -> Result<Outcome> {
    let (_, gf) = build(cfg)?;
    let energy = willmore_energy(&gf);
    let el = el_residual(&gf);
    let note = (!is_closed(&gf)).then_some("open surface: values are per period cell");
    let mut text = String::new();
    let _ = writeln!(text, "W           = {:.10e}", energy.w);
    let _ = writeln!(text, "int H^2 dA  = {:.10e}", energy.integral_h2);
    let _ = writeln!(text, "int Kbar dA = {:.10e}", energy.integral_kbar);
    let _ = writeln!(text, "area        = {:.10e}", energy.area);
    let _ = writeln!(text, "max |EL|    = {:.3e}  rms {:.3e}", el.max_abs, el.rms);
    if let Some(n) = note {
        let _ = writeln!(text, "{n}");
    }
    let rows = [
        ("w", energy.w),
        ("integral_h2", energy.integral_h2),
        ("integral_kbar", energy.integral_kbar),
        ("area", energy.area),
        ("el_max", el.max_abs),
        ("el_rms", el.rms),
        ("el_integral", el.integral),
    ]
    .iter()
    .map(|(k, v)| vec![k.to_string(), num(*v)])
    .collect();
    let payload = EnergyPayload {
        command: "energy",
        config: cfg,
        model: (&cfg.model).into(),
        surface: gf.kind.name(),
        grid: GridEcho {
            nu: gf.grid.nu,
            nv: gf.grid.nv,
        },
        energy,
        euler_lagrange: el,
        critical_h: critical_mean_curvature(&cfg.model),
        note,
    };
    Ok(Outcome {
        exit_code: EXIT_OK,
        json: to_json(&payload)?,
        csv_header: vec!["quantity", "value"],
        csv_rows: rows,
        text,
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum FlowResult {
    Radius(RadiusFlow),
    Graph(GraphFlow),
    Collapsed { error: String, state: FlowState },
}

#[derive(Serialize)]
struct FlowPayload<'a> {
    command: &'static str,
    config: &'a RunConfig,
    model: ModelEcho,
    mode: FlowMode,
    converged: bool,
    result: FlowResult,
}

fn trajectory_rows(state: &FlowState) -> Vec<Vec<String>> {
    state
        .trajectory
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                num(s.param),
                num(s.energy),
                num(s.grad_norm),
                num(s.step_size),
            ]
        })
        .collect()
}

pub fn cmd_flow(cfg: &RunConfig) -> Result<Outcome> {
    let fc = cfg.flow;
    if !fc.enabled {
        return Err(Error::Config("flow is disabled in the config".into()));
    }
    let mut text = String::new();
    let (result, state, exit_code, converged) = match fc.mode {
        FlowMode::Radius => {
            let opts = RadiusFlowOptions {
                max_steps: fc.max_steps,
                tol: fc.tol,
                ..Default::default()
            };
            match flow_radius_family(&cfg.model, fc.r0, &opts) {
                Ok(f) => {
                    let _ = writeln!(text, "r_final     = {:.12}", f.r_final);
                    let _ = writeln!(text, "H(r_final)  = {:.12}", f.h_final);
                    let _ = writeln!(text, "|dW/dr|     = {:.3e}", f.dw_dr_final.abs());
                    let _ = writeln!(text, "|H - 0|     = {:.3e}", f.distance_to_minimal);
                    match (f.critical_h, f.distance_to_critical) {
                        (Some(t), Some(d)) => {
                            let _ = writeln!(text, "target H    = {t:.12}  (distance {d:.3e})");
                        }
                        _ => {}
                    }
                    if let Some(n) = &f.note {
                        let _ = writeln!(text, "{n}");
                    }
                    let converged = f.state.converged();
                    // max_steps = 0 asks for the initial state only
                    let code = if converged || fc.max_steps == 0 { EXIT_OK } else { EXIT_TOLERANCE };
                    let state = f.state.clone();
                    (FlowResult::Radius(f), state, code, converged)
                }
                Err(Error::StepCollapse { trajectory, step, attempts }) => {
                    let error = format!("line search failed {attempts} times at step {step}");
                    let _ = writeln!(text, "{error}");
                    let state = *trajectory;
                    (
                        FlowResult::Collapsed {
                            error,
                            state: state.clone(),
                        },
                        state,
                        EXIT_TOLERANCE,
                        false,
                    )
                }
                Err(e) => return Err(e),
            }
        }
        FlowMode::Graph => {
            let imm = cfg.surface.build(&cfg.model)?;
            let grid = imm.grid(cfg.grid.nu, cfg.grid.nv)?;
            let opts = GraphFlowOptions {
                max_steps: fc.max_steps,
                grad_tol: fc.tol,
                ..Default::default()
            };
            match flow_normal_graph(&imm, &grid, &opts) {
                Ok(f) => {
                    let e = f.state.energies();
                    let _ = writeln!(
                        text,
                        "steps {}  W {:.10e} -> {:.10e}  max |G| {:.3e}",
                        e.len() - 1,
                        e[0],
                        e[e.len() - 1],
                        f.grad_max_final
                    );
                    let converged = f.state.converged();
                    let state = f.state.clone();
                    // best effort: running out of steps is not a failure
                    (FlowResult::Graph(f), state, EXIT_OK, converged)
                }
                Err(Error::StepCollapse { trajectory, step, attempts }) => {
                    let error = format!("line search failed {attempts} times at step {step}");
                    let _ = writeln!(text, "{error}");
                    let state = *trajectory;
                    (
                        FlowResult::Collapsed {
                            error,
                            state: state.clone(),
                        },
                        state,
                        EXIT_TOLERANCE,
                        false,
                    )
                }
                Err(e) => return Err(e),
            }
        }
    };
    let payload = FlowPayload {
        command: "flow",
        config: cfg,
        model: (&cfg.model).into(),
        mode: fc.mode,
        converged,
        result,
    };
    Ok(Outcome {
        exit_code,
        json: to_json(&payload)?,
        csv_header: vec!["step", "param", "energy", "grad_norm", "step_size"],
        csv_rows: trajectory_rows(&state),
        text,
    })
}

#[derive(Serialize)]
struct ConvergencePayload<'a> {
    command: &'static str,
    config: &'a RunConfig,
    model: ModelEcho,
    surface: &'a SurfaceConfig,
    report: crate::verify::ConvergenceReport,
}

/// Reruns one check on the perturbed torus (the configured one when the
/// config names a perturbed surface, the default one otherwise).
pub fn cmd_convergence(cfg: &RunConfig) -> Result<Outcome> {
    let id: CheckId = cfg.convergence.check.parse()?;
    let surface = match &cfg.surface {
        s @ SurfaceConfig::Perturbed { .. } => s.clone(),
        _ => SurfaceConfig::Perturbed {
            r: 0.6,
            epsilon: 0.05,
            modes: [2, 3],
        },
    };
    let imm = surface.build(&cfg.model)?;
    if cfg.convergence.sizes.len() < 2 {
        return Err(Error::Config("convergence needs at least two grid sizes".into()));
    }
    let report = convergence_study(id, &cfg.convergence.sizes, |n| geometry_field(&imm, &imm.grid(n, n)?))?;
    let mut text = String::new();
    for s in &report.subs {
        let _ = writeln!(
            text,
            "{:<26} slope {:>6.2}  {}{}",
            s.name,
            s.slope,
            if s.passed { "pass" } else { "FAIL" },
            if s.exact { "  (roundoff at every size)" } else { "" }
        );
    }
    let _ = writeln!(text, "{}: overall slope {:.2}", id, report.slope);
    let mut rows = Vec::new();
    for s in &report.subs {
        for (k, r) in s.residuals.iter().enumerate() {
            rows.push(vec![
                s.name.to_string(),
                report.sizes[k].to_string(),
                num(report.spacing[k]),
                num(*r),
            ]);
        }
    }
    let exit_code = if report.passed { EXIT_OK } else { EXIT_TOLERANCE };
    let payload = ConvergencePayload {
        command: "convergence",
        config: cfg,
        model: (&cfg.model).into(),
        surface: &surface,
        report,
    };
    Ok(Outcome {
        exit_code,
        json: to_json(&payload)?,
        csv_header: vec!["sub", "n", "h", "residual"],
        csv_rows: rows,
        text,
    })
}
