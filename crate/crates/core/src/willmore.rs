//! The Willmore functional `W = int (H^2 + Kbar) dA`, its first variation and
//! two descent flows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ambient::{AmbientVector, ModelParams};
use crate::canonical::{critical_mean_curvature, hopf_torus, HopfTorusSpec};
use crate::error::{Error, Result};
use crate::surface::{geometry_field, GeometryField, Grid, Immersion};
use crate::verify::{euler_lagrange_field, variation_gradient_field, Derived};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub w: f64,
    pub integral_h2: f64,
    pub integral_kbar: f64,
    pub area: f64,
}

/// `Kbar = tau^2 + (kappa - 4 tau^2) C^2`, the ambient sectional curvature of
/// the tangent plane.
pub fn willmore_energy(gf: &GeometryField) -> EnergyBreakdown {
    let (t2, k4) = (gf.model.tau().powi(2), gf.model.anisotropy());
    let h2: Vec<f64> = gf.h.iter().map(|h| h * h).collect();
    let kbar: Vec<f64> = gf.c.iter().map(|c| t2 + k4 * c * c).collect();
    let (integral_h2, integral_kbar) = (gf.integrate(&h2), gf.integrate(&kbar));
    EnergyBreakdown {
        w: integral_h2 + integral_kbar,
        integral_h2,
        integral_kbar,
        area: gf.area(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElResidual {
    #[serde(skip)]
    pub field: Vec<f64>,
    pub max_abs: f64,
    /// `sqrt(int r^2 dA / Area)`.
    pub rms: f64,
    pub integral: f64,
}

/// Left-hand side of the stationarity equation, nodewise.
pub fn el_residual(gf: &GeometryField) -> ElResidual {
    let d = Derived::new(gf);
    let field = euler_lagrange_field(gf, &d);
    let sq: Vec<f64> = field.iter().map(|v| v * v).collect();
    ElResidual {
        max_abs: gf.max_abs(&field),
        rms: (gf.integrate(&sq) / gf.area()).sqrt(),
        integral: gf.integrate(&field),
        field,
    }
}

/// Density `G` with `dW/dt = int G f dA` for the variation `f N`.
pub fn variation_gradient(gf: &GeometryField) -> Vec<f64> {
    variation_gradient_field(gf, &Derived::new(gf))
}

/// Largest gap between the closed-form `Ric(N, N)` and the contraction of the
/// numerically differentiated curvature tensor, over every `stride`-th node.
pub fn ricci_gap(gf: &GeometryField, stride: usize) -> Result<f64> {
    let chart = gf.chart;
    (0..gf.len())
        .into_par_iter()
        .step_by(stride.max(1))
        .map(|k| {
            let numeric = chart.ricci_numeric(&gf.jets[k].x, &gf.n[k])?;
            Ok((numeric - gf.model.ricci_normal(gf.c[k])).abs())
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Smooth periodic test function made of a few low Fourier modes, with
/// coefficients drawn from a seeded generator.
pub fn random_smooth_field(grid: &Grid, seed: u64, max_mode: i32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for m in 0..=max_mode {
        for n in -max_mode..=max_mode {
            let amp: f64 = rng.gen_range(-1.0..1.0) / (1.0 + (m * m + n * n) as f64);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((m as f64, n as f64, amp, phase));
        }
    }
    let (ku, kv) = (std::f64::consts::TAU / grid.lu, std::f64::consts::TAU / grid.lv);
    (0..grid.len())
        .map(|k| {
            let (u, v) = grid.coords(k);
            terms
                .iter()
                .map(|(m, n, a, p)| a * (m * ku * u + n * kv * v + p).cos())
                .sum()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientCheck {
    pub delta: f64,
    /// `(W(X + delta f N) - W(X - delta f N)) / (2 delta)`.
    pub fd_derivative: f64,
    /// `int G f dA`.
    pub predicted: f64,
    pub abs_gap: f64,
    pub relative_gap: f64,
}

/// Central difference of `W` along `f N` against the first-variation formula.
/// The displaced surfaces are nodal, so their derivatives come from finite
/// differences on `grid`.
pub fn gradient_check(imm: &Immersion, grid: &Grid, f: &[f64], delta: f64) -> Result<GradientCheck> {
    if f.len() != grid.len() {
        return Err(Error::Grid("test function has the wrong length".into()));
    }
    let gf = geometry_field(imm, grid)?;
    let g = variation_gradient(&gf);
    let gfd: Vec<f64> = g.iter().zip(f).map(|(g, f)| g * f).collect();
    let predicted = gf.integrate(&gfd);
    let energy_at = |sign: f64| -> Result<f64> {
        let offsets: Vec<AmbientVector> = gf.n.iter().zip(f).map(|(n, f)| n * (sign * delta * f)).collect();
        let moved = imm.displaced(grid, &offsets)?;
        Ok(willmore_energy(&geometry_field(&moved, grid)?).w)
    };
    let fd_derivative = (energy_at(1.0)? - energy_at(-1.0)?) / (2.0 * delta);
    let abs_gap = (fd_derivative - predicted).abs();
    let denom = fd_derivative.abs().max(predicted.abs());
    Ok(GradientCheck {
        delta,
        fd_derivative,
        predicted,
        abs_gap,
        relative_gap: if denom > 0.0 { abs_gap / denom } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowStep {
    pub step: usize,
    /// `r` for the torus family, the largest nodal offset for the graph flow.
    pub param: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub step_size: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxSteps,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowState {
    pub trajectory: Vec<FlowStep>,
    pub step_size: f64,
    pub termination: Termination,
    /// Accumulated signed normal offset per node (graph flow only).
    #[serde(skip)]
    pub offsets: Vec<f64>,
}

impl FlowState {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn last(&self) -> &FlowStep {
        self.trajectory.last().expect("trajectory holds the initial state")
    }

    pub fn energies(&self) -> Vec<f64> {
        self.trajectory.iter().map(|s| s.energy).collect()
    }

    /// Whether the energies never increase beyond `slack` between steps.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.trajectory.windows(2).all(|w| w[1].energy <= w[0].energy + slack)
    }
}

/// Accepting a step needs the Armijo decrease, or, once energy differences
/// drop to roundoff, a decrease of the gradient itself.
fn roundoff(w: f64) -> f64 {
    64.0 * f64::EPSILON * w.abs().max(1.0)
}

const ARMIJO: f64 = 1e-4;
pub const MAX_BACKTRACKS: usize = 50;
/// Radii the family flow may visit.
pub const RADIUS_RANGE: (f64, f64) = (0.02, 0.98);
/// The family has constant fields, so a coarse grid is exact up to roundoff.
pub const RADIUS_FLOW_GRID: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadiusPoint {
    pub r: f64,
    pub w: f64,
    pub dw_dr: f64,
    pub h: f64,
    pub el_max: f64,
}

/// `W(r)` of `hopf_torus(r)` and `dW/dr = int G <X_r, N> dA`.
pub fn radius_energy(model: &ModelParams, r: f64) -> Result<RadiusPoint> {
    let imm = hopf_torus(&HopfTorusSpec::new(*model, r)?)?;
    let gf = geometry_field(&imm, &imm.grid(RADIUS_FLOW_GRID, RADIUS_FLOW_GRID)?)?;
    let d = Derived::new(&gf);
    let g = variation_gradient_field(&gf, &d);
    let el = euler_lagrange_field(&gf, &d);
    // eta = arccos r, so X_r = -(1 - r^2)^(-1/2) d_eta
    let x_r = AmbientVector::new(-1.0 / (1.0 - r * r).sqrt(), 0.0, 0.0);
    let integrand: Vec<f64> = (0..gf.len())
        .map(|k| {
            let m = gf.chart.metric_at(&gf.jets[k].x).map(|m| m.inner(&x_r, &gf.n[k]));
            g[k] * m.unwrap_or(f64::NAN)
        })
        .collect();
    Ok(RadiusPoint {
        r,
        w: willmore_energy(&gf).w,
        dw_dr: gf.integrate(&integrand),
        h: gf.h.iter().sum::<f64>() / gf.len() as f64,
        el_max: gf.max_abs(&el),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadiusFlowOptions {
    pub max_steps: usize,
    /// Stop once `|dW/dr|` is at most this.
    pub tol: f64,
    pub initial_step: f64,
}

impl Default for RadiusFlowOptions {
    fn default() -> Self {
        Self {
            max_steps: 500,
            tol: 1e-8,
            initial_step: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusFlow {
    pub state: FlowState,
    pub r_final: f64,
    pub h_final: f64,
    pub dw_dr_final: f64,
    pub el_max_final: f64,
    /// `W(r + s) - 2 W(r) + W(r - s)` over `s^2` at the limit.
    pub second_difference: f64,
    pub critical_h: Option<f64>,
    pub distance_to_minimal: f64,
    pub distance_to_critical: Option<f64>,
    pub note: Option<String>,
}

/// Projected gradient descent on `W(r)` over the Hopf tori, with Armijo
/// backtracking. After each accepted step the secant curvature of `W` sets the
/// next trial step.
pub fn flow_radius_family(model: &ModelParams, r0: f64, opts: &RadiusFlowOptions) -> Result<RadiusFlow> {
    let (lo, hi) = RADIUS_RANGE;
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::Precondition(format!("initial radius must lie in (0, 1), got {r0}")));
    }
    let mut cur = radius_energy(model, r0.clamp(lo, hi))?;
    let mut s = opts.initial_step;
    let mut state = FlowState {
        trajectory: vec![FlowStep {
            step: 0,
            param: cur.r,
            energy: cur.w,
            grad_norm: cur.dw_dr.abs(),
            step_size: s,
        }],
        step_size: s,
        termination: Termination::MaxSteps,
        offsets: Vec::new(),
    };
    for step in 1..=opts.max_steps {
        if cur.dw_dr.abs() <= opts.tol {
            break;
        }
        let mut attempts = 0;
        let next = loop {
            let r_new = (cur.r - s * cur.dw_dr).clamp(lo, hi);
            let cand = radius_energy(model, r_new)?;
            let moved = cur.r - r_new;
            let armijo = cand.w <= cur.w - ARMIJO * cur.dw_dr * moved;
            let flat = cand.w <= cur.w + roundoff(cur.w) && cand.dw_dr.abs() < cur.dw_dr.abs();
            if moved != 0.0 && (armijo || flat) {
                break cand;
            }
            s *= 0.5;
            attempts += 1;
            if attempts >= MAX_BACKTRACKS {
                state.step_size = s;
                return Err(Error::StepCollapse {
                    step,
                    attempts,
                    trajectory: Box::new(state),
                });
            }
        };
        let curvature = (next.dw_dr - cur.dw_dr) / (next.r - cur.r);
        s = if curvature > 0.0 { 1.0 / curvature } else { 2.0 * s };
        cur = next;
        state.trajectory.push(FlowStep {
            step,
            param: cur.r,
            energy: cur.w,
            grad_norm: cur.dw_dr.abs(),
            step_size: s,
        });
    }
    state.step_size = s;
    if cur.dw_dr.abs() <= opts.tol {
        state.termination = Termination::Converged;
    }
    let ds = 1e-3 * cur.r.min(1.0 - cur.r);
    let (wp, wm) = (radius_energy(model, cur.r + ds)?.w, radius_energy(model, cur.r - ds)?.w);
    let critical_h = critical_mean_curvature(model);
    let note = match critical_h {
        None => Some(format!(
            "no Hopf torus with H != 0 is Willmore-critical for kappa = {}, tau = {} (needs kappa < 2 tau^2)",
            model.kappa(),
            model.tau()
        )),
        Some(_) => None,
    };
    Ok(RadiusFlow {
        r_final: cur.r,
        h_final: cur.h,
        dw_dr_final: cur.dw_dr,
        el_max_final: cur.el_max,
        second_difference: (wp - 2.0 * cur.w + wm) / (ds * ds),
        critical_h,
        distance_to_minimal: cur.h.abs(),
        distance_to_critical: critical_h.map(|t| (cur.h.abs() - t).abs()),
        note,
        state,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub r: f64,
    pub w: f64,
    pub kind: CriticalKind,
}

/// Critical points of `W(r)` from dense sampling on the open radius range,
/// each refined by a parabola through the neighbouring samples.
pub fn dense_radius_oracle(model: &ModelParams, samples: usize) -> Result<Vec<CriticalPoint>> {
    let (lo, hi) = RADIUS_RANGE;
    let step = (hi - lo) / (samples - 1) as f64;
    let w: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| radius_energy(model, lo + step * i as f64).map(|p| p.w))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..samples - 1 {
        let (a, b, c) = (w[i - 1], w[i], w[i + 1]);
        let kind = if b < a && b <= c {
            CriticalKind::Minimum
        } else if b > a && b >= c {
            CriticalKind::Maximum
        } else {
            continue;
        };
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        out.push(CriticalPoint {
            r: lo + step * (i as f64 + shift),
            w: b - 0.25 * (a - c) * shift,
            kind,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphFlowOptions {
    pub max_steps: usize,
    /// Stop once `max |G|` is at most this.
    pub grad_tol: f64,
    /// Trial step as a multiple of `h^4`, also the cap on the step.
    pub step_factor: f64,
}

impl Default for GraphFlowOptions {
    fn default() -> Self {
        Self {
            max_steps: 20,
            grad_tol: 1e-6,
            step_factor: 0.02,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphFlow {
    pub state: FlowState,
    pub grad_max_final: f64,
    pub c_max_final: f64,
    #[serde(skip)]
    pub surface: Immersion,
}

/// Explicit descent `x <- x - s G N` on the nodes of `grid`, with Armijo
/// backtracking and the step capped at `step_factor h^4`.
pub fn flow_normal_graph(imm: &Immersion, grid: &Grid, opts: &GraphFlowOptions) -> Result<GraphFlow> {
    let cap = opts.step_factor * grid.h().powi(4);
    let mut cur = imm.displaced(grid, &vec![AmbientVector::zeros(); grid.len()])?;
    let mut gf = geometry_field(&cur, grid)?;
    let mut g = variation_gradient(&gf);
    let mut w = willmore_energy(&gf).w;
    let mut offsets = vec![0.0; grid.len()];
    let max_offset = |o: &[f64]| o.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut s = cap;
    let mut state = FlowState {
        trajectory: vec![FlowStep {
            step: 0,
            param: 0.0,
            energy: w,
            grad_norm: gf.max_abs(&g),
            step_size: s,
        }],
        step_size: s,
        termination: Termination::MaxSteps,
        offsets: Vec::new(),
    };
    for step in 1..=opts.max_steps {
        if gf.max_abs(&g) <= opts.grad_tol {
            break;
        }
        let g2: Vec<f64> = g.iter().map(|v| v * v).collect();
        let slope = gf.integrate(&g2);
        let mut attempts = 0;
        let accepted = loop {
            let disp: Vec<AmbientVector> = gf.n.iter().zip(&g).map(|(n, g)| n * (-s * g)).collect();
            let trial = cur
                .displaced(grid, &disp)
                .and_then(|c| geometry_field(&c, grid).map(|f| (c, f)));
            if let Ok((c, f)) = trial {
                let wn = willmore_energy(&f).w;
                if wn <= w - ARMIJO * s * slope {
                    break (c, f, wn);
                }
            }
            s *= 0.5;
            attempts += 1;
            if attempts >= MAX_BACKTRACKS {
                state.step_size = s;
                state.offsets = offsets;
                return Err(Error::StepCollapse {
                    step,
                    attempts,
                    trajectory: Box::new(state),
                });
            }
        };
        for (o, gk) in offsets.iter_mut().zip(&g) {
            *o -= s * gk;
        }
        (cur, gf, w) = accepted;
        g = variation_gradient(&gf);
        state.trajectory.push(FlowStep {
            step,
            param: max_offset(&offsets),
            energy: w,
            grad_norm: gf.max_abs(&g),
            step_size: s,
        });
        s = (2.0 * s).min(cap);
    }
    state.step_size = s;
    if gf.max_abs(&g) <= opts.grad_tol {
        state.termination = Termination::Converged;
    }
    state.offsets = offsets;
    Ok(GraphFlow {
        grad_max_final: gf.max_abs(&g),
        c_max_final: gf.max_abs(&gf.c),
        state,
        surface: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{clifford_torus, critical_radius, perturbed_torus, product_slice};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0).unwrap()
    }

    fn field(imm: &Immersion, n: usize) -> GeometryField {
        geometry_field(imm, &imm.grid(n, n).unwrap()).unwrap()
    }

    #[test]
    fn clifford_energy_is_16_pi_squared() {
        let e = willmore_energy(&field(&clifford_torus(&unit()).unwrap(), 32));
        let target = 16.0 * PI * PI;
        assert!((e.w / target - 1.0).abs() < 1e-12);
        assert!((e.area / target - 1.0).abs() < 1e-12);
        assert!((e.w - e.integral_h2 - e.integral_kbar).abs() < 1e-12);
    }

    #[test]
    fn hopf_energy_constant_density_and_mirror() {
        let m = unit();
        let gf = field(&hopf_torus(&HopfTorusSpec::new(m, 0.6).unwrap()).unwrap(), 32);
        let e = willmore_energy(&gf);
        let h = gf.h[0];
        assert!((e.w - (h * h + 1.0) * e.area).abs() < 1e-10 * e.w);
        let a = radius_energy(&m, 0.6).unwrap().w;
        let b = radius_energy(&m, 0.8).unwrap().w;
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn slice_energy_is_kappa_area() {
        let model = ModelParams::new(2.0, 0.0).unwrap();
        let e = willmore_energy(&field(&product_slice(&model, 0.0).unwrap(), 64));
        assert!((e.w - 2.0 * e.area).abs() < 1e-12 * e.w);
    }

    #[test]
    fn euler_lagrange_anchors() {
        let m = unit();
        assert!(el_residual(&field(&clifford_torus(&m).unwrap(), 32)).max_abs < 1e-8);
        let cr = critical_radius(&m).unwrap();
        let gf = field(&hopf_torus(&HopfTorusSpec::new(m, cr.r).unwrap()).unwrap(), 32);
        assert!(el_residual(&gf).max_abs < 1e-8);
        let gf = field(&hopf_torus(&HopfTorusSpec::new(m, 0.6).unwrap()).unwrap(), 32);
        assert!(el_residual(&gf).max_abs > 0.05);
    }

    #[test]
    fn ricci_closed_form_matches_numeric() {
        let gf = field(&perturbed_torus(&unit(), 0.6, 0.05, (2, 3)).unwrap(), 32);
        assert!(ricci_gap(&gf, 37).unwrap() < 1e-5);
    }

    #[test]
    fn radius_derivative_matches_difference_quotient() {
        let m = unit();
        let p = radius_energy(&m, 0.45).unwrap();
        let d = 1e-5;
        let fd = (radius_energy(&m, 0.45 + d).unwrap().w - radius_energy(&m, 0.45 - d).unwrap().w) / (2.0 * d);
        assert!((fd - p.dw_dr).abs() < 1e-6 * p.dw_dr.abs().max(1.0), "{fd} vs {}", p.dw_dr);
        assert!(radius_energy(&m, FRAC_1_SQRT_2).unwrap().dw_dr.abs() < 1e-9);
    }

    #[test]
    fn gradient_check_zero_and_generic() {
        let imm = perturbed_torus(&unit(), 0.6, 0.05, (2, 3)).unwrap();
        let grid = imm.grid(48, 48).unwrap();
        let zero = gradient_check(&imm, &grid, &vec![0.0; grid.len()], 1e-4).unwrap();
        assert_eq!(zero.fd_derivative, 0.0);
        assert!(zero.predicted.abs() < 1e-14);
        let f = random_smooth_field(&grid, 7, 2);
        let gc = gradient_check(&imm, &grid, &f, 1e-4).unwrap();
        assert!(gc.relative_gap < 1e-3, "{gc:?}");
    }

    #[test]
    fn random_fields_are_deterministic() {
        let grid = Grid::new(16, 16, 2.0 * PI, 2.0 * PI).unwrap();
        assert_eq!(random_smooth_field(&grid, 3, 2), random_smooth_field(&grid, 3, 2));
        assert_ne!(random_smooth_field(&grid, 3, 2), random_smooth_field(&grid, 4, 2));
    }

    #[test]
    fn radius_flow_reaches_critical_torus() {
        let m = unit();
        let flow = flow_radius_family(&m, 0.4, &RadiusFlowOptions::default()).unwrap();
        assert!(flow.state.converged());
        assert!(flow.dw_dr_final.abs() <= 1e-8);
        assert!(flow.state.is_monotone(1e-12 * flow.state.trajectory[0].energy));
        let near = flow.distance_to_minimal.min(flow.distance_to_critical.unwrap());
        assert!(near < 1e-6, "{flow:#?}");
    }

    #[test]
    fn radius_flow_at_clifford_stays() {
        let flow = flow_radius_family(&unit(), FRAC_1_SQRT_2, &RadiusFlowOptions::default()).unwrap();
        assert_eq!(flow.state.trajectory.len(), 1);
        assert!(flow.state.converged());
    }

    #[test]
    fn radius_flow_without_critical_torus_notes_it() {
        let m = ModelParams::new(3.0, 1.0).unwrap();
        let flow = flow_radius_family(&m, 0.4, &RadiusFlowOptions::default()).unwrap();
        assert!(flow.note.is_some() && flow.critical_h.is_none());
        let zero = RadiusFlowOptions {
            max_steps: 0,
            ..Default::default()
        };
        assert_eq!(flow_radius_family(&m, 0.4, &zero).unwrap().state.trajectory.len(), 1);
    }

    #[test]
    fn graph_flow_clifford_is_fixed() {
        let imm = clifford_torus(&unit()).unwrap();
        let flow = flow_normal_graph(&imm, &imm.grid(32, 32).unwrap(), &GraphFlowOptions::default()).unwrap();
        assert!(flow.grad_max_final <= 1e-6);
        assert_eq!(flow.state.trajectory.len(), 1);
    }

    #[test]
    fn graph_flow_decreases_energy() {
        let imm = perturbed_torus(&unit(), FRAC_1_SQRT_2, 0.02, (2, 3)).unwrap();
        let opts = GraphFlowOptions {
            max_steps: 10,
            ..Default::default()
        };
        let flow = flow_normal_graph(&imm, &imm.grid(32, 32).unwrap(), &opts).unwrap();
        let e = flow.state.energies();
        assert_eq!(e.len(), 11);
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    }

    #[test]
    fn graph_flow_keeps_hopf_symmetry() {
        let imm = hopf_torus(&HopfTorusSpec::new(unit(), 0.6).unwrap()).unwrap();
        let opts = GraphFlowOptions {
            max_steps: 5,
            ..Default::default()
        };
        let flow = flow_normal_graph(&imm, &imm.grid(32, 32).unwrap(), &opts).unwrap();
        let e = flow.state.energies();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
        assert!(flow.c_max_final <= 1e-6);
    }
}
