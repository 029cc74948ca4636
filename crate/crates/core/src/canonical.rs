//! Closed-form model surfaces: Hopf tori, the Clifford torus, Hopf cylinders,
//! slices of product spaces and normally perturbed Hopf tori.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::sync::Arc;

use crate::ambient::{Chart, ModelParams};
use crate::error::{Error, Result};
use crate::surface::{geometry_field, Immersion, Jet, SurfaceKind};

/// Grid used when only the (constant) mean curvature of a Hopf torus matters.
pub const RADIUS_GRID: usize = 64;

/// Lower end of the bracket searched for the critical radius.
const RADIUS_BRACKET_LO: f64 = 0.05;

/// The Hopf torus `{|z| = r, |w| = sqrt(1 - r^2)}` of a Berger sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HopfTorusSpec {
    pub r: f64,
    pub model: ModelParams,
}

impl HopfTorusSpec {
    pub fn new(model: ModelParams, r: f64) -> Result<Self> {
        if !model.is_berger_sphere() {
            return Err(Error::Model(format!(
                "Hopf tori live in Berger spheres (kappa > 0, tau != 0), got kappa = {}, tau = {}",
                model.kappa(),
                model.tau()
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Precondition(format!("torus radius must lie in (0, 1), got {r}")));
        }
        Ok(Self { r, model })
    }

    pub fn eta(&self) -> f64 {
        self.r.acos()
    }

    /// `r <-> sqrt(1 - r^2)` swaps the two factors of C^2.
    pub fn mirror(&self) -> f64 {
        (1.0 - self.r * self.r).sqrt()
    }
}

/// The torus is parametrized as `(u, v) -> (eta, phi1, phi2)` with the angle
/// order chosen so that `H > 0` for `r < 1/sqrt(2)`. The normal is then
/// `sigma (sqrt(kappa)/2) d_eta`; `sigma` is returned alongside.
fn hopf_layout(chart: &Chart) -> Result<(bool, f64)> {
    // With phi1 = u the normal points along -d_eta for a right-handed chart,
    // which is the side where the torus curves towards |z| = 1 and H > 0.
    let swap = chart.orientation().sign() < 0.0;
    let m = chart.metric_at(&Vector3::new(PI / 4.0, 0.0, 0.0))?;
    let (xu, xv) = angle_frame(swap);
    let n = m.cross(chart.orientation(), &xu, &xv);
    Ok((swap, n[0].signum()))
}

fn angle_frame(swap: bool) -> (Vector3<f64>, Vector3<f64>) {
    let (a, b) = (Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0));
    if swap {
        (b, a)
    } else {
        (a, b)
    }
}

/// Hopf coordinates of a torus `eta = eta(u, v)` with the given angle order.
fn eta_graph<F>(chart: Chart, kind: SurfaceKind, swap: bool, eta: F) -> Immersion
where
    F: Fn(f64, f64) -> [f64; 6] + Send + Sync + 'static,
{
    let eta = Arc::new(eta);
    let place = move |e: f64, u: f64, v: f64| if swap { Vector3::new(e, v, u) } else { Vector3::new(e, u, v) };
    let (fu, fv) = angle_frame(swap);
    let winding = [fu * TAU, fv * TAU];
    let eta_pos = eta.clone();
    let position = Arc::new(move |u: f64, v: f64| place(eta_pos(u, v)[0], u, v));
    let jet = Arc::new(move |u: f64, v: f64| {
        let [e, eu, ev, euu, euv, evv] = eta(u, v);
        let d = Vector3::new(1.0, 0.0, 0.0);
        Jet {
            x: place(e, u, v),
            xu: fu + d * eu,
            xv: fv + d * ev,
            xuu: d * euu,
            xuv: d * euv,
            xvv: d * evv,
        }
    });
    Immersion::from_map(chart, kind, (TAU, TAU), winding, position).with_jet(jet)
}

pub fn hopf_torus(spec: &HopfTorusSpec) -> Result<Immersion> {
    let chart = Chart::hopf(spec.model)?;
    let (swap, _) = hopf_layout(&chart)?;
    let eta = spec.eta();
    let kind = if (spec.r - FRAC_1_SQRT_2).abs() < 1e-15 {
        SurfaceKind::Clifford
    } else {
        SurfaceKind::HopfTorus
    };
    Ok(eta_graph(chart, kind, swap, move |_, _| [eta, 0.0, 0.0, 0.0, 0.0, 0.0]))
}

pub fn clifford_torus(model: &ModelParams) -> Result<Immersion> {
    hopf_torus(&HopfTorusSpec::new(*model, FRAC_1_SQRT_2)?)
}

/// Point of S^3 in C^2 for torus parameters, for use with the Hopf projection.
pub fn hopf_torus_point(spec: &HopfTorusSpec, u: f64, v: f64) -> (Complex64, Complex64) {
    let w = spec.mirror();
    (Complex64::from_polar(spec.r, u), Complex64::from_polar(w, v))
}

/// Mean curvature of `hopf_torus(r)` (constant over the torus).
pub fn hopf_mean_curvature(model: &ModelParams, r: f64) -> Result<f64> {
    let imm = hopf_torus(&HopfTorusSpec::new(*model, r)?)?;
    let gf = geometry_field(&imm, &imm.grid(RADIUS_GRID, RADIUS_GRID)?)?;
    Ok(gf.h.iter().sum::<f64>() / gf.len() as f64)
}

/// Radius of the Willmore-critical Hopf torus with `H = sqrt((2 tau^2 - kappa)/2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalRadius {
    pub r: f64,
    pub mirror: f64,
    pub h: f64,
    pub target_h: f64,
}

pub fn critical_mean_curvature(model: &ModelParams) -> Option<f64> {
    let (k, t) = (model.kappa(), model.tau());
    (model.is_berger_sphere() && k < 2.0 * t * t).then(|| ((2.0 * t * t - k) / 2.0).sqrt())
}

pub fn critical_radius(model: &ModelParams) -> Result<CriticalRadius> {
    if !model.is_berger_sphere() {
        return Err(Error::Model("critical Hopf tori need a Berger sphere".into()));
    }
    let target = critical_mean_curvature(model).ok_or(Error::NoCriticalTorus {
        kappa: model.kappa(),
        tau: model.tau(),
    })?;
    let f = |r: f64| hopf_mean_curvature(model, r).map(|h| h - target);
    let (mut lo, mut hi) = (RADIUS_BRACKET_LO, FRAC_1_SQRT_2 - 1e-6);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::Precondition(format!(
            "mean curvature does not bracket the target on [{lo}, {hi}]: {flo}, {fhi}"
        )));
    }
    let mut best = (lo, flo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 || fm == 0.0 {
            break;
        }
    }
    let r = best.0;
    Ok(CriticalRadius {
        r,
        mirror: (1.0 - r * r).sqrt(),
        h: best.1 + target,
        target_h: target,
    })
}

/// Base curve of a Hopf cylinder in the BCV chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSpec {
    /// Coordinate circle `x^2 + y^2 = radius^2` around the origin.
    /// Curves are traversed clockwise so that `H = k_g / 2` for counterclockwise input.
    Circle { radius: f64 },
    /// The x-axis, periodic with the given length (flat base only).
    Line { length: f64 },
    /// Closed curve through periodic samples, interpolated trigonometrically.
    Samples { points: Vec<[f64; 2]> },
}

impl CurveSpec {
    /// Geodesic curvature of a circle in the base, when constant.
    pub fn geodesic_curvature(&self, model: &ModelParams) -> Option<f64> {
        match self {
            CurveSpec::Circle { radius } => Some(1.0 / radius - model.kappa() * radius / 4.0),
            CurveSpec::Line { .. } => Some(0.0),
            CurveSpec::Samples { .. } => None,
        }
    }
}

/// Trigonometric interpolant of periodic samples with analytic derivatives.
struct TrigCurve {
    coef: Vec<(f64, Complex64)>,
}

impl TrigCurve {
    fn new(points: &[[f64; 2]]) -> Self {
        let m = points.len();
        let half = (m / 2) as isize;
        let mut coef = Vec::new();
        for k in -half..=half {
            if m % 2 == 0 && k == half {
                continue;
            }
            let c: Complex64 = points
                .iter()
                .enumerate()
                .map(|(j, p)| Complex64::new(p[0], p[1]) * Complex64::from_polar(1.0, -(k as f64) * TAU * j as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64;
            coef.push((k as f64, c));
        }
        Self { coef }
    }

    /// Value and first two derivatives at `s` (period 2 pi).
    fn eval(&self, s: f64) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, c) in &self.coef {
            let e = *c * Complex64::from_polar(1.0, k * s);
            out[0] += e;
            out[1] += e * Complex64::new(0.0, *k);
            out[2] += e * (-k * k);
        }
        out
    }
}

/// Vertical lines over a base curve, `(s, t) -> (alpha(s), t)`, periodic in `t`
/// with period `height` (the BCV metric does not depend on `z`).
pub fn hopf_cylinder(model: &ModelParams, curve: &CurveSpec, height: f64) -> Result<Immersion> {
    let chart = Chart::bcv(*model);
    if !(height > 0.0) {
        return Err(Error::Precondition("cylinder height must be positive".into()));
    }
    let vertical = Vector3::new(0.0, 0.0, 1.0);
    // (value, derivative, second derivative) of the base curve and the s-period
    type Base = Arc<dyn Fn(f64) -> [Complex64; 3] + Send + Sync>;
    let (base, period, shift): (Base, f64, Vector3<f64>) = match curve {
        CurveSpec::Circle { radius } => {
            let rho = *radius;
            if !(rho > 0.0) || (model.kappa() < 0.0 && rho * rho * -model.kappa() >= 4.0) {
                return Err(Error::Precondition(format!("circle radius {rho} outside the chart")));
            }
            // clockwise, so the normal points inwards and H = k_g / 2 > 0
            let f = move |s: f64| {
                let e = Complex64::from_polar(rho, -s);
                [e, -e * Complex64::i(), -e]
            };
            (Arc::new(f), TAU, Vector3::zeros())
        }
        CurveSpec::Line { length } => {
            if model.kappa() != 0.0 {
                return Err(Error::Precondition("periodic straight lines need a flat base (kappa = 0)".into()));
            }
            let f = |s: f64| [Complex64::new(s, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            (Arc::new(f), *length, Vector3::new(*length, 0.0, 0.0))
        }
        CurveSpec::Samples { points } => {
            if points.len() < 4 {
                return Err(Error::Precondition("need at least four curve samples".into()));
            }
            let tc = TrigCurve::new(points);
            // traversed backwards for the same reason as the circle
            let f = move |s: f64| {
                let [p, dp, ddp] = tc.eval(-s);
                [p, -dp, ddp]
            };
            (Arc::new(f), TAU, Vector3::zeros())
        }
    };
    // irregularity check on a fine sampling
    for k in 0..256 {
        let s = period * k as f64 / 256.0;
        let [p, dp, _] = base(s);
        if dp.norm() < 1e-12 {
            return Err(Error::Precondition(format!("base curve is not regular at s = {s}")));
        }
        if !chart.contains(&Vector3::new(p.re, p.im, 0.0)) {
            return Err(Error::Precondition("base curve leaves the chart".into()));
        }
    }
    let to3 = |c: Complex64| Vector3::new(c.re, c.im, 0.0);
    let b1 = base.clone();
    let position = Arc::new(move |s: f64, t: f64| to3(b1(s)[0]) + vertical * t);
    let jet = Arc::new(move |s: f64, t: f64| {
        let [p, dp, ddp] = base(s);
        Jet {
            x: to3(p) + vertical * t,
            xu: to3(dp),
            xv: vertical,
            xuu: to3(ddp),
            xuv: Vector3::zeros(),
            xvv: Vector3::zeros(),
        }
    });
    Ok(Immersion::from_map(chart, SurfaceKind::Cylinder, (period, height), [shift, vertical * height], position).with_jet(jet))
}

/// Angular distance of the polar caps left out of pointwise slice checks.
pub const SLICE_CAP: f64 = 0.3;

/// The slice `z = z0` of `S^2(kappa) x R`, parametrized as a double cover of
/// the sphere by `(theta, phi)` in `[0, 2 pi)^2` through stereographic
/// coordinates. Nodes are shifted half a cell off the poles.
pub fn product_slice(model: &ModelParams, z0: f64) -> Result<Immersion> {
    if model.tau() != 0.0 {
        return Err(Error::Model(format!("slices are totally geodesic only for tau = 0, got tau = {}", model.tau())));
    }
    if model.kappa() <= 0.0 {
        return Err(Error::Precondition("closed slices need kappa > 0".into()));
    }
    let chart = Chart::bcv(*model);
    let s = 1.0 / model.kappa().sqrt();
    let jet = move |th: f64, ph: f64| {
        let half = 0.5 * th;
        let (sec2, tan) = (1.0 / half.cos().powi(2), half.tan());
        let r = 2.0 * s * tan;
        let r1 = s * sec2;
        let r2 = s * sec2 * tan;
        let (sp, cp) = ph.sin_cos();
        let radial = Vector3::new(cp, sp, 0.0);
        let angular = Vector3::new(-sp, cp, 0.0);
        Jet {
            x: radial * r + Vector3::new(0.0, 0.0, z0),
            xu: radial * r1,
            xv: angular * r,
            xuu: radial * r2,
            xuv: angular * r1,
            xvv: -radial * r,
        }
    };
    let position = Arc::new(move |th: f64, ph: f64| jet(th, ph).x);
    let mask = Arc::new(|th: f64, _: f64| th.sin().abs() >= SLICE_CAP.sin());
    Ok(Immersion::from_map(chart, SurfaceKind::Slice, (TAU, TAU), [Vector3::zeros(); 2], position)
        .with_jet(Arc::new(jet))
        .with_mask(mask)
        .with_sheets(2)
        .with_cell_offset(0.5, 0.0))
}

/// Normal graph `X + eps cos(m u) cos(n v) N` over a Hopf torus. The base
/// normal is a multiple of `d_eta`, so the graph stays a torus `eta(u, v)`.
pub fn perturbed_torus(model: &ModelParams, r: f64, eps: f64, modes: (u32, u32)) -> Result<Immersion> {
    let spec = HopfTorusSpec::new(*model, r)?;
    let chart = Chart::hopf(*model)?;
    let (swap, sigma) = hopf_layout(&chart)?;
    let eta0 = spec.eta();
    let amp = eps * sigma * model.kappa().sqrt() / 2.0;
    if eta0 - amp.abs() <= 0.0 || eta0 + amp.abs() >= PI / 2.0 {
        return Err(Error::Precondition(format!(
            "perturbation amplitude {eps} leaves the Hopf chart around r = {r}"
        )));
    }
    let (m, n) = (modes.0 as f64, modes.1 as f64);
    let kind = if eps == 0.0 { SurfaceKind::HopfTorus } else { SurfaceKind::Perturbed };
    Ok(eta_graph(chart, kind, swap, move |u, v| {
        let (su, cu) = (m * u).sin_cos();
        let (sv, cv) = (n * v).sin_cos();
        [
            eta0 + amp * cu * cv,
            -amp * m * su * cv,
            -amp * n * cu * sv,
            -amp * m * m * cu * cv,
            amp * m * n * su * sv,
            -amp * n * n * cu * cv,
        ]
    }))
}
