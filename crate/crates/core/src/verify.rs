//! Named residuals for every identity, inequality and equality case, evaluated
//! on a [`GeometryField`].

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::surface::{
    cheng_yau, covariant_shape_derivative, covariant_vector, divergence, laplace_beltrami, rough_laplacian,
    surface_gradient, Grid, GeometryField, ShapeDerivatives, SurfaceKind,
};

/// Pointwise gate at 128 x 128 on a unit-scale model, scaled by `h^2`.
pub const POINTWISE_AT_128: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Structural,
    Simons,
    ChengYauDivergence,
    DivergenceLemma,
    DivergenceUv,
    RotatedT,
    Kato,
    ReverseKato,
    EulerLagrange,
    WillmoreInequality,
    ExtrinsicInequality,
    ExtrinsicInequalityPositive,
}

impl CheckId {
    pub const ALL: [CheckId; 12] = [
        CheckId::Structural,
        CheckId::Simons,
        CheckId::ChengYauDivergence,
        CheckId::DivergenceLemma,
        CheckId::DivergenceUv,
        CheckId::RotatedT,
        CheckId::Kato,
        CheckId::ReverseKato,
        CheckId::EulerLagrange,
        CheckId::WillmoreInequality,
        CheckId::ExtrinsicInequality,
        CheckId::ExtrinsicInequalityPositive,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckId::Structural => "structural",
            CheckId::Simons => "simons",
            CheckId::ChengYauDivergence => "cheng_yau_divergence",
            CheckId::DivergenceLemma => "divergence_lemma",
            CheckId::DivergenceUv => "divergence_uv",
            CheckId::RotatedT => "rotated_t",
            CheckId::Kato => "kato",
            CheckId::ReverseKato => "reverse_kato",
            CheckId::EulerLagrange => "euler_lagrange",
            CheckId::WillmoreInequality => "willmore_inequality",
            CheckId::ExtrinsicInequality => "extrinsic_inequality",
            CheckId::ExtrinsicInequalityPositive => "extrinsic_inequality_positive",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckId::ALL
            .iter()
            .find(|c| c.as_str() == s)
            .copied()
            .ok_or_else(|| Error::UnknownCheck(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubResidual {
    pub name: &'static str,
    pub max_abs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub id: CheckId,
    pub status: CheckStatus,
    pub passed: bool,
    pub pointwise_max_residual: f64,
    pub integral_value: Option<f64>,
    pub tolerance: f64,
    pub integral_tolerance: f64,
    /// Equality-case flag for inequalities.
    pub equality: Option<bool>,
    pub subs: Vec<SubResidual>,
    /// Extra named values, in a fixed order.
    #[serde(serialize_with = "as_map")]
    pub values: Vec<(&'static str, f64)>,
    pub note: Option<String>,
    pub nu: usize,
    pub nv: usize,
    /// Integrals only gate on closed surfaces.
    #[serde(skip)]
    closed: bool,
}

fn as_map<S: serde::Serializer>(values: &[(&'static str, f64)], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(values.iter().map(|(k, v)| (*k, *v)))
}

impl CheckReport {
    fn new(id: CheckId, gf: &GeometryField, tol: &Tolerances) -> Self {
        Self {
            id,
            status: CheckStatus::Pass,
            passed: true,
            pointwise_max_residual: 0.0,
            integral_value: None,
            tolerance: tol.pointwise,
            integral_tolerance: 0.0,
            equality: None,
            subs: Vec::new(),
            values: Vec::new(),
            note: None,
            nu: gf.grid.nu,
            nv: gf.grid.nv,
            closed: is_closed(gf),
        }
    }

    pub fn is_applicable(&self) -> bool {
        self.status != CheckStatus::Inapplicable
    }

    pub fn sub(&self, name: &str) -> Option<&SubResidual> {
        self.subs.iter().find(|s| s.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    fn push(&mut self, name: &'static str, gf: &GeometryField, field: &[f64]) {
        self.subs.push(SubResidual {
            name,
            max_abs: gf.max_abs(field),
            integral: None,
        });
    }

    fn push_integral(&mut self, name: &'static str, gf: &GeometryField, field: &[f64], integrand: &[f64]) {
        self.subs.push(SubResidual {
            name,
            max_abs: gf.max_abs(field),
            integral: Some(gf.integrate(integrand)),
        });
    }

    /// Gate the largest sub residual and the largest integral.
    fn settle(mut self) -> Self {
        self.pointwise_max_residual = self.subs.iter().map(|s| s.max_abs).fold(0.0, f64::max);
        let integral = self
            .subs
            .iter()
            .filter_map(|s| s.integral)
            .fold(None, |acc: Option<f64>, v| match acc {
                Some(a) if a.abs() >= v.abs() => Some(a),
                _ => Some(v),
            });
        self.integral_value = integral;
        let ok_point = self.pointwise_max_residual <= self.tolerance;
        let ok_int = !self.closed || integral.map_or(true, |v| v.abs() <= self.integral_tolerance);
        self.passed = ok_point && ok_int;
        self.status = if self.passed { CheckStatus::Pass } else { CheckStatus::Fail };
        self
    }

    fn inapplicable(mut self, why: impl Into<String>) -> Self {
        self.status = CheckStatus::Inapplicable;
        self.passed = true;
        self.note = Some(why.into());
        self
    }

    fn verdict(mut self, ok: bool) -> Self {
        self.passed = ok;
        self.status = if ok { CheckStatus::Pass } else { CheckStatus::Fail };
        self
    }
}

/// Hopf cylinders are one period of an open surface: pointwise checks only.
pub fn is_closed(gf: &GeometryField) -> bool {
    gf.kind != SurfaceKind::Cylinder
}

/// Tolerance policy. Pointwise gates scale like `max(1, |kappa| + tau^2) h^2`;
/// integral gates scale with the area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Pointwise identity gate; `None` means derived from the grid.
    pub pointwise: f64,
    /// Relative gate for integrals of divergences, times field scale and area.
    pub integral: f64,
    /// Relative gate (times area) for equality cases.
    pub equality: f64,
    pub kato: f64,
    pub reverse_kato: f64,
    /// Gap between two assemblies of the same expression.
    pub cross_assembly: f64,
    /// Spread of `Ke` under which it counts as constant.
    pub constant_ke: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pointwise: POINTWISE_AT_128,
            integral: 1e-8,
            equality: 1e-7,
            kato: 1e-6,
            reverse_kato: 1e-8,
            cross_assembly: 1e-9,
            constant_ke: 1e-6,
        }
    }
}

impl Tolerances {
    /// Defaults with the pointwise gate scaled to `gf`.
    pub fn for_field(gf: &GeometryField) -> Self {
        Self {
            pointwise: pointwise_gate(&gf.grid, gf.model.kappa(), gf.model.tau()),
            ..Self::default()
        }
    }
}

pub fn pointwise_gate(grid: &Grid, kappa: f64, tau: f64) -> f64 {
    let h128 = std::f64::consts::TAU / 128.0;
    let scale = (kappa.abs() + tau * tau).max(1.0);
    scale * POINTWISE_AT_128 * (grid.h() / h128).powi(2)
}

/// Fields shared by several checks, computed once per surface.
pub struct Derived {
    pub k4: f64,
    pub tau: f64,
    pub sd: ShapeDerivatives,
    pub jt: Vec<Vector2<f64>>,
    pub at_t: Vec<f64>,
    pub phi_t_t: Vec<f64>,
    pub phi_t_jt: Vec<f64>,
    pub grad_c: Vec<Vector2<f64>>,
    pub norm_grad_c2: Vec<f64>,
    pub nabla_t: Vec<Matrix2<f64>>,
    pub div_t: Vec<f64>,
    pub norm_nabla_t2: Vec<f64>,
    pub norm_t2: Vec<f64>,
    pub lap_h: Vec<f64>,
    pub lap_ke: Vec<f64>,
    pub cy_2h: Vec<f64>,
    pub t_h: Vec<f64>,
    pub t_div_t: Vec<f64>,
    pub half_grad_t2: Vec<Vector2<f64>>,
    pub nabla_t_t: Vec<Vector2<f64>>,
    pub p_grad_2h: Vec<Vector2<f64>>,
}

impl Derived {
    pub fn new(gf: &GeometryField) -> Self {
        let n = gf.len();
        let k4 = gf.model.anisotropy();
        let tau = gf.model.tau();
        let sd = covariant_shape_derivative(gf);
        let jt = gf.rotate_j(&gf.t);
        let mut at_t = vec![0.0; n];
        let mut phi_t_t = vec![0.0; n];
        let mut phi_t_jt = vec![0.0; n];
        for k in 0..n {
            let t = gf.t[k];
            at_t[k] = gf.inner(k, &(gf.a[k] * t), &t);
            phi_t_t[k] = gf.inner(k, &(gf.phi[k] * t), &t);
            phi_t_jt[k] = gf.inner(k, &(gf.phi[k] * t), &jt[k]);
        }
        let grad_c = surface_gradient(gf, &gf.c);
        let norm_grad_c2 = (0..n).map(|k| gf.norm2(k, &grad_c[k])).collect();
        let nabla_t = covariant_vector(gf, &gf.t);
        let div_t = divergence(gf, &gf.t);
        let norm_nabla_t2 = (0..n).map(|k| gf.norm2_op(k, &nabla_t[k])).collect();
        let norm_t2: Vec<f64> = (0..n).map(|k| gf.norm2(k, &gf.t[k])).collect();
        let two_h: Vec<f64> = gf.h.iter().map(|h| 2.0 * h).collect();
        let t_h = (0..n).map(|k| gf.inner(k, &sd.grad_h[k], &gf.t[k])).collect();
        let t_div_t = gf.along_t(&div_t);
        let half_grad_t2 = surface_gradient(gf, &norm_t2).into_iter().map(|v| v * 0.5).collect();
        let nabla_t_t = (0..n).map(|k| nabla_t[k] * gf.t[k]).collect();
        let p_grad_2h = (0..n)
            .map(|k| (Matrix2::identity() * (2.0 * gf.h[k]) - gf.a[k]) * (sd.grad_h[k] * 2.0))
            .collect();
        Self {
            k4,
            tau,
            jt,
            at_t,
            phi_t_t,
            phi_t_jt,
            grad_c,
            norm_grad_c2,
            nabla_t,
            div_t,
            norm_nabla_t2,
            norm_t2,
            lap_h: laplace_beltrami(gf, &gf.h),
            lap_ke: laplace_beltrami(gf, &gf.ke),
            cy_2h: cheng_yau(gf, &two_h),
            t_h,
            t_div_t,
            half_grad_t2,
            nabla_t_t,
            p_grad_2h,
            sd,
        }
    }

    /// `|grad C|^2` from the algebraic identity
    /// `2H<Phi T, T> + 2 tau <Phi T, J T> + (|Phi|^2 + Ke + tau^2)|T|^2`.
    pub fn grad_c_formula(&self, gf: &GeometryField, k: usize) -> f64 {
        2.0 * gf.h[k] * self.phi_t_t[k]
            + 2.0 * self.tau * self.phi_t_jt[k]
            + (gf.norm_phi2[k] + gf.ke[k] + self.tau * self.tau) * self.norm_t2[k]
    }
}

fn field_scale(fields: &[&[f64]]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.iter())
        .map(|v| v.abs())
        .fold(1.0, f64::max)
}

fn map_nodes<F: Fn(usize) -> f64 + Sync + Send>(gf: &GeometryField, f: F) -> Vec<f64> {
    (0..gf.len()).into_par_iter().map(f).collect()
}

/// Structural identities: `|T|^2 = 1 - C^2`, integrability, `div T = 2CH`,
/// `4H^2 = |A|^2 + 2Ke`, Gauss, the curvature relation, Codazzi,
/// `tr(nabla A)`, and the principal-frame form of `<A T, J T>`.
pub fn check_structural(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::Structural, gf, tol);
    let (k4, tau) = (d.k4, d.tau);
    r.push("unit_t", gf, &map_nodes(gf, |k| d.norm_t2[k] - (1.0 - gf.c[k] * gf.c[k])));
    r.push(
        "integrability_t",
        gf,
        &map_nodes(gf, |k| {
            let m = d.nabla_t[k] - (gf.a[k] - gf.j[k] * tau) * gf.c[k];
            gf.norm2_op(k, &m).sqrt()
        }),
    );
    r.push(
        "integrability_c",
        gf,
        &map_nodes(gf, |k| {
            let v = d.grad_c[k] + (gf.a[k] + gf.j[k] * tau) * gf.t[k];
            gf.norm2(k, &v).sqrt()
        }),
    );
    r.push("div_t", gf, &map_nodes(gf, |k| d.div_t[k] - 2.0 * gf.c[k] * gf.h[k]));
    r.push(
        "mean_curvature_identity",
        gf,
        &map_nodes(gf, |k| 4.0 * gf.h[k] * gf.h[k] - gf.norm_a2[k] - 2.0 * gf.ke[k]),
    );
    r.push("gauss_curvature", gf, &map_nodes(gf, |k| gf.k_gauss[k] - gf.k_gauss_eq[k]));
    r.push(
        "curvature_relation",
        gf,
        &map_nodes(gf, |k| {
            2.0 * gf.k_gauss[k] - 2.0 * tau * tau - 2.0 * k4 * gf.c[k] * gf.c[k] - 2.0 * gf.ke[k]
        }),
    );
    r.push(
        "codazzi",
        gf,
        &map_nodes(gf, |k| {
            // X = d_u, Y = d_v; divided by sqrt(det g) to read in an orthonormal frame
            let b = &d.sd.nabla[k];
            let t_low = gf.g[k] * gf.t[k];
            let lhs = b[1].column(0) - b[0].column(1);
            let rhs = (Vector2::new(0.0, 1.0) * t_low[0] - Vector2::new(1.0, 0.0) * t_low[1]) * (k4 * gf.c[k]);
            gf.norm2(k, &(lhs - rhs)).sqrt() / gf.sqrt_det[k]
        }),
    );
    r.push(
        "trace_nabla_a",
        gf,
        &map_nodes(gf, |k| {
            let v = d.sd.trace[k] - d.sd.grad_h[k] * 2.0 - gf.t[k] * (gf.c[k] * k4);
            gf.norm2(k, &v).sqrt()
        }),
    );
    r.push(
        "principal_frame",
        gf,
        &map_nodes(gf, |k| {
            if gf.norm_phi2[k] < 1e-10 {
                return 0.0;
            }
            let f1 = Vector2::new(1.0 / gf.g[k][(0, 0)].sqrt(), 0.0);
            let f2 = gf.j[k] * f1;
            let frame = Matrix2::from_columns(&[f1, f2]);
            let s = frame.transpose() * gf.g[k] * gf.a[k] * frame;
            let s = (s + s.transpose()) * 0.5;
            let eig = SymmetricEigen::new(s);
            let e1 = frame * eig.eigenvectors.column(0);
            let e2 = gf.j[k] * e1;
            let l1 = gf.inner(k, &(gf.a[k] * e1), &e1);
            let l2 = gf.inner(k, &(gf.a[k] * e2), &e2);
            let t = gf.t[k];
            let lhs = gf.inner(k, &(gf.a[k] * t), &d.jt[k]);
            lhs - (l2 - l1) * gf.inner(k, &t, &e1) * gf.inner(k, &t, &e2)
        }),
    );
    r.settle()
}

/// Simons-type formula for the Cheng-Yau operator, with the Weitzenboeck
/// formula for the rough Laplacian as a sub-check.
pub fn check_simons(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::Simons, gf, tol);
    let rhs = simons_rhs(gf, d);
    r.push("simons", gf, &map_nodes(gf, |k| d.cy_2h[k] - rhs[k]));
    let lap_a = rough_laplacian(gf, &d.sd);
    let lap_norm_a2 = laplace_beltrami(gf, &gf.norm_a2);
    r.push(
        "weitzenbock",
        gf,
        &map_nodes(gf, |k| 0.5 * lap_norm_a2[k] - d.sd.norm2[k] - gf.inner_op(k, &lap_a[k], &gf.a[k])),
    );
    r.settle()
}

fn simons_rhs(gf: &GeometryField, d: &Derived) -> Vec<f64> {
    let (k4, tau) = (d.k4, d.tau);
    map_nodes(gf, |k| {
        let c2 = gf.c[k] * gf.c[k];
        d.lap_ke[k] + d.sd.norm2[k] - 4.0 * d.sd.norm_grad_h2[k]
            + gf.norm_phi2[k] * (2.0 * gf.ke[k] + k4 * (5.0 * c2 - 1.0) + 2.0 * tau * tau)
            - 2.0 * k4 * (gf.h[k] * d.phi_t_t[k] + tau * d.phi_t_jt[k])
    })
}

/// `div(P(2 grad H)) = box(2H) - 2C(kappa - 4tau^2) T(H)` pointwise, and the
/// integral of the right-hand side.
pub fn check_cheng_yau_divergence(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::ChengYauDivergence, gf, tol);
    let div = divergence(gf, &d.p_grad_2h);
    let rhs = map_nodes(gf, |k| d.cy_2h[k] - 2.0 * gf.c[k] * d.k4 * d.t_h[k]);
    r.integral_tolerance = 10.0 * tol.integral * field_scale(&[&d.cy_2h]) * gf.area();
    r.push_integral("divergence", gf, &map_nodes(gf, |k| div[k] - rhs[k]), &rhs);
    r.settle()
}

/// Divergence formulae (a), (b), (c) for fields built from `T`, plus the
/// closed forms of `|nabla T|^2` and `|T| grad|T|`.
pub fn check_divergence_lemma(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::DivergenceLemma, gf, tol);
    let tau = d.tau;
    let k = &gf.k_gauss;
    let div_a = divergence(gf, &d.nabla_t_t);
    let dt_t: Vec<Vector2<f64>> = (0..gf.len()).map(|n| gf.t[n] * d.div_t[n]).collect();
    let div_b = divergence(gf, &dt_t);
    let div_c = divergence(gf, &d.half_grad_t2);
    let rhs_a = map_nodes(gf, |n| {
        k[n] * d.norm_t2[n] + d.t_div_t[n] + d.norm_nabla_t2[n] - 4.0 * tau * tau * gf.c[n] * gf.c[n]
    });
    let rhs_b = map_nodes(gf, |n| d.t_div_t[n] + 4.0 * gf.h[n] * gf.h[n] * gf.c[n] * gf.c[n]);
    let rhs_c = map_nodes(gf, |n| {
        k[n] * d.norm_t2[n] + d.t_div_t[n] + d.norm_nabla_t2[n]
            - 2.0 * tau * tau * d.norm_t2[n]
            - 2.0 * tau * d.phi_t_jt[n]
    });
    r.integral_tolerance = tol.integral * field_scale(&[&rhs_a, &rhs_b, &rhs_c]) * gf.area();
    r.push_integral("divergence_a", gf, &map_nodes(gf, |n| div_a[n] - rhs_a[n]), &div_a);
    r.push_integral("divergence_b", gf, &map_nodes(gf, |n| div_b[n] - rhs_b[n]), &div_b);
    r.push_integral("divergence_c", gf, &map_nodes(gf, |n| div_c[n] - rhs_c[n]), &div_c);
    r.push(
        "grad_t_norm",
        gf,
        &map_nodes(gf, |n| d.norm_nabla_t2[n] - gf.c[n] * gf.c[n] * (gf.norm_a2[n] + 2.0 * tau * tau)),
    );
    r.push(
        "t_grad_t",
        gf,
        &map_nodes(gf, |n| {
            let v = d.half_grad_t2[n] - (gf.a[n] + gf.j[n] * tau) * gf.t[n] * gf.c[n];
            gf.norm2(n, &v).sqrt()
        }),
    );
    r.settle()
}

/// The two auxiliary fields `U`, `V` and their divergence formulae.
pub fn aux_fields(gf: &GeometryField, d: &Derived) -> (Vec<Vector2<f64>>, Vec<Vector2<f64>>) {
    let k4 = d.k4;
    (0..gf.len())
        .map(|n| {
            let dtt = gf.t[n] * d.div_t[n];
            let u = d.p_grad_2h[n] + (d.nabla_t_t[n] - d.half_grad_t2[n] + dtt) * k4;
            let v = d.p_grad_2h[n] + (d.half_grad_t2[n] + dtt - d.nabla_t_t[n]) * k4;
            (u, v)
        })
        .unzip()
}

pub fn check_divergence_uv(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::DivergenceUv, gf, tol);
    let (k4, tau) = (d.k4, d.tau);
    let (u, v) = aux_fields(gf, d);
    let (div_u, div_v) = (divergence(gf, &u), divergence(gf, &v));
    let common = map_nodes(gf, |n| d.lap_ke[n] + d.sd.norm2[n] - 4.0 * d.sd.norm_grad_h2[n]);
    let rhs_u = map_nodes(gf, |n| {
        let c2 = gf.c[n] * gf.c[n];
        common[n] + 2.0 * gf.norm_phi2[n] * (gf.ke[n] + k4 * (4.0 * c2 - 1.0) + tau * tau)
            - 2.0 * k4 * (2.0 * gf.h[n] * d.phi_t_t[n] + (gf.ke[n] - tau * tau) * (1.0 - 3.0 * c2))
    });
    let rhs_v = map_nodes(gf, |n| {
        let c2 = gf.c[n] * gf.c[n];
        common[n] + 2.0 * gf.norm_phi2[n] * (gf.ke[n] + 3.0 * k4 * c2 + tau * tau)
            - 2.0 * k4 * (d.grad_c_formula(gf, n) - 2.0 * (gf.ke[n] + tau * tau) * c2)
    });
    r.integral_tolerance = tol.integral * field_scale(&[&rhs_u, &rhs_v]) * gf.area();
    r.push_integral("divergence_u", gf, &map_nodes(gf, |n| div_u[n] - rhs_u[n]), &div_u);
    r.push_integral("divergence_v", gf, &map_nodes(gf, |n| div_v[n] - rhs_v[n]), &div_v);
    r.push("grad_c_norm", gf, &map_nodes(gf, |n| d.norm_grad_c2[n] - d.grad_c_formula(gf, n)));
    r.settle()
}

/// `div J(T) = 2 tau C` and `div(tau C J(T)) = -tau <Phi T, J T> - tau^2 (1 - 3C^2)`.
pub fn check_rotated_t(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::RotatedT, gf, tol);
    let tau = d.tau;
    let div_jt = divergence(gf, &d.jt);
    let scaled: Vec<Vector2<f64>> = (0..gf.len()).map(|n| d.jt[n] * (tau * gf.c[n])).collect();
    let div_scaled = divergence(gf, &scaled);
    let rhs = map_nodes(gf, |n| -tau * d.phi_t_jt[n] - tau * tau * (1.0 - 3.0 * gf.c[n] * gf.c[n]));
    r.integral_tolerance = tol.integral * field_scale(&[&rhs]) * gf.area();
    r.push("div_jt", gf, &map_nodes(gf, |n| div_jt[n] - 2.0 * tau * gf.c[n]));
    r.push_integral("div_tau_c_jt", gf, &map_nodes(gf, |n| div_scaled[n] - rhs[n]), &div_scaled);
    r.settle()
}

/// Kato-type inequality `|nabla A|^2 >= 3|grad H|^2 + 2(kappa - 4tau^2) C <grad H, T>`.
pub fn check_kato(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::Kato, gf, tol);
    let defect = kato_defect(gf, d);
    let min = masked_min(gf, &defect);
    r.tolerance = tol.kato;
    r.subs.push(SubResidual {
        name: "violation",
        max_abs: (-min).max(0.0),
        integral: None,
    });
    r.values.push(("min_defect", min));
    r.values.push(("max_defect", -masked_min(gf, &defect.iter().map(|v| -v).collect::<Vec<_>>())));
    r.settle()
}

pub fn kato_defect(gf: &GeometryField, d: &Derived) -> Vec<f64> {
    map_nodes(gf, |n| d.sd.norm2[n] - 3.0 * d.sd.norm_grad_h2[n] - 2.0 * d.k4 * gf.c[n] * d.t_h[n])
}

fn masked_min(gf: &GeometryField, f: &[f64]) -> f64 {
    f.iter()
        .zip(&gf.mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min)
}

/// Whether `Ke` is a negative constant, judged by its spread.
pub fn constant_negative_ke(gf: &GeometryField, tol: &Tolerances) -> (bool, f64, f64) {
    let n = gf.len() as f64;
    let mean = gf.ke.iter().sum::<f64>() / n;
    let std = (gf.ke.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n).sqrt();
    let max = gf.ke.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (std <= tol.constant_ke && max < 0.0, std, max)
}

/// Reverse inequality `|nabla A|^2 <= 4 |grad H|^2` for constant `Ke < 0`.
pub fn check_reverse_kato(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::ReverseKato, gf, tol);
    r.tolerance = tol.reverse_kato;
    let (ok, std, max) = constant_negative_ke(gf, tol);
    r.values.push(("ke_std", std));
    r.values.push(("ke_max", max));
    if !ok {
        return r.inapplicable("extrinsic curvature is not a negative constant");
    }
    let defect = map_nodes(gf, |n| 4.0 * d.sd.norm_grad_h2[n] - d.sd.norm2[n]);
    let min = masked_min(gf, &defect);
    r.values.push(("min_defect", min));
    r.subs.push(SubResidual {
        name: "violation",
        max_abs: (-min).max(0.0),
        integral: None,
    });
    let r = r.settle();
    let eq = gf.max_abs(&defect) <= tol.reverse_kato;
    CheckReport { equality: Some(eq), ..r }
}

/// The stationarity equation of the Willmore functional, and the normal
/// variation gradient `G`, which must agree with it identically.
pub fn euler_lagrange_field(gf: &GeometryField, d: &Derived) -> Vec<f64> {
    let k4 = d.k4;
    map_nodes(gf, |n| {
        let c2 = gf.c[n] * gf.c[n];
        d.lap_h[n] + (gf.norm_phi2[n] + k4 * (1.0 + c2)) * gf.h[n] - 2.0 * k4 * d.at_t[n]
    })
}

pub fn variation_gradient_field(gf: &GeometryField, d: &Derived) -> Vec<f64> {
    let k4 = d.k4;
    map_nodes(gf, |n| {
        let (h, c2) = (gf.h[n], gf.c[n] * gf.c[n]);
        let ric = gf.model.ricci_normal(gf.c[n]);
        d.lap_h[n] + (ric + gf.norm_a2[n]) * h - 2.0 * h * (h * h + gf.kbar[n])
            + 2.0 * k4 * (2.0 * h * c2 - d.at_t[n])
    })
}

pub fn check_euler_lagrange(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::EulerLagrange, gf, tol);
    let el = euler_lagrange_field(gf, d);
    let g = variation_gradient_field(gf, d);
    let scale = field_scale(&[&el, &g]);
    r.tolerance = tol.cross_assembly * scale;
    r.push("gradient_vs_equation", gf, &map_nodes(gf, |n| g[n] - el[n]));
    let el_max = gf.max_abs(&el);
    let el_l2 = (gf.integrate(&el.iter().map(|v| v * v).collect::<Vec<_>>()) / gf.area()).sqrt();
    r.values.push(("el_max", el_max));
    r.values.push(("el_rms", el_l2));
    let r = r.settle();
    CheckReport {
        equality: Some(el_max <= tol.pointwise),
        ..r
    }
}

const OPEN: &str = "integral statement needs a closed surface";

/// `I1` of the Willmore-surface integral inequality.
pub fn willmore_integral(gf: &GeometryField, d: &Derived) -> f64 {
    let (k4, tau) = (d.k4, d.tau);
    let t2 = tau * tau;
    let f = map_nodes(gf, |n| {
        let (p2, c2) = (gf.norm_phi2[n], gf.c[n] * gf.c[n]);
        p2 * p2 - (2.0 * t2 - k4 * (1.0 - 3.0 * c2)) * p2
            - k4 * (d.norm_grad_c2[n] + (gf.ke[n] + t2) * (1.0 - 5.0 * c2) + 2.0 * t2 * (1.0 - 3.0 * c2))
    });
    gf.integrate_masked(&f)
}

pub fn check_willmore_inequality(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::WillmoreInequality, gf, tol);
    let i1 = willmore_integral(gf, d);
    let area = gf.masked_area();
    let el_max = gf.max_abs(&euler_lagrange_field(gf, d));
    r.integral_value = Some(i1);
    r.integral_tolerance = tol.equality * area;
    r.values.push(("i1", i1));
    r.values.push(("i1_over_area", i1 / area));
    r.values.push(("el_max", el_max));
    r.equality = Some(i1.abs() <= tol.equality * area);
    if !r.closed {
        return r.inapplicable(OPEN);
    }
    if el_max > tol.pointwise {
        return r.inapplicable("surface is not Willmore-stationary (Euler-Lagrange residual above gate)");
    }
    r.verdict(i1 >= -tol.equality * area)
}

/// Both sides of the constant-`Ke` integral inequality.
pub fn extrinsic_sides(gf: &GeometryField, d: &Derived) -> (f64, f64) {
    let (k4, tau) = (d.k4, d.tau);
    let lhs = map_nodes(gf, |n| {
        gf.norm_phi2[n] * (gf.ke[n] + k4 * (4.0 * gf.c[n] * gf.c[n] - 1.0) + tau * tau)
    });
    let q = map_nodes(gf, |n| {
        2.0 * gf.h[n] * d.phi_t_t[n] + (gf.ke[n] - tau * tau) * (1.0 - 3.0 * gf.c[n] * gf.c[n])
    });
    (gf.integrate_masked(&lhs), k4 * gf.integrate_masked(&q))
}

pub fn check_extrinsic_inequality(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::ExtrinsicInequality, gf, tol);
    let (lhs, rhs) = extrinsic_sides(gf, d);
    let area = gf.masked_area();
    r.integral_value = Some(lhs - rhs);
    r.integral_tolerance = tol.equality * area;
    r.values.push(("lhs", lhs));
    r.values.push(("rhs", rhs));
    r.equality = Some((lhs - rhs).abs() <= tol.equality * area);
    if !r.closed {
        return r.inapplicable(OPEN);
    }
    if !constant_negative_ke(gf, tol).0 {
        return r.inapplicable("extrinsic curvature is not a negative constant");
    }
    r.verdict(lhs - rhs >= -tol.equality * area)
}

/// `I2` of the inequality valid when `kappa - 4 tau^2 > 0`.
pub fn positive_integral(gf: &GeometryField, d: &Derived) -> f64 {
    let (k4, tau) = (d.k4, d.tau);
    let f = map_nodes(gf, |n| {
        let c2 = gf.c[n] * gf.c[n];
        (3.0 * k4 * c2 + gf.ke[n] + tau * tau) * gf.norm_phi2[n] + 2.0 * k4 * (gf.ke[n] + tau * tau) * c2
    });
    gf.integrate_masked(&f)
}

pub fn check_extrinsic_inequality_positive(gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    let mut r = CheckReport::new(CheckId::ExtrinsicInequalityPositive, gf, tol);
    let i2 = positive_integral(gf, d);
    let area = gf.masked_area();
    r.integral_value = Some(i2);
    r.integral_tolerance = tol.equality * area;
    r.values.push(("i2", i2));
    r.equality = Some(i2.abs() <= tol.equality * area);
    if !r.closed {
        return r.inapplicable(OPEN);
    }
    if d.k4 <= 0.0 {
        return r.inapplicable("needs kappa - 4 tau^2 > 0");
    }
    if !constant_negative_ke(gf, tol).0 {
        return r.inapplicable("extrinsic curvature is not a negative constant");
    }
    r.verdict(i2 >= -tol.equality * area)
}

pub fn run_check(id: CheckId, gf: &GeometryField, d: &Derived, tol: &Tolerances) -> CheckReport {
    match id {
        CheckId::Structural => check_structural(gf, d, tol),
        CheckId::Simons => check_simons(gf, d, tol),
        CheckId::ChengYauDivergence => check_cheng_yau_divergence(gf, d, tol),
        CheckId::DivergenceLemma => check_divergence_lemma(gf, d, tol),
        CheckId::DivergenceUv => check_divergence_uv(gf, d, tol),
        CheckId::RotatedT => check_rotated_t(gf, d, tol),
        CheckId::Kato => check_kato(gf, d, tol),
        CheckId::ReverseKato => check_reverse_kato(gf, d, tol),
        CheckId::EulerLagrange => check_euler_lagrange(gf, d, tol),
        CheckId::WillmoreInequality => check_willmore_inequality(gf, d, tol),
        CheckId::ExtrinsicInequality => check_extrinsic_inequality(gf, d, tol),
        CheckId::ExtrinsicInequalityPositive => check_extrinsic_inequality_positive(gf, d, tol),
    }
}

/// Run the given checks, in the given order.
pub fn run_checks(gf: &GeometryField, ids: &[CheckId], tol: &Tolerances) -> Vec<CheckReport> {
    let d = Derived::new(gf);
    ids.par_iter().map(|id| run_check(*id, gf, &d, tol)).collect()
}

/// Residuals of one check across resolutions and the fitted order.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub check: CheckId,
    pub sizes: Vec<usize>,
    pub spacing: Vec<f64>,
    /// Per sub residual: name, residual per size, fitted slope, verdict.
    pub subs: Vec<SubConvergence>,
    pub slope: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubConvergence {
    pub name: &'static str,
    pub residuals: Vec<f64>,
    pub slope: f64,
    /// Residual at roundoff level at every size: exact algebraic identity.
    pub exact: bool,
    pub passed: bool,
}

pub const MIN_SLOPE: f64 = 1.8;
/// Below this a residual is roundoff and carries no order information.
pub const ROUNDOFF_FLOOR: f64 = 1e-11;

/// Least-squares slope of `log r` against `log h`.
pub fn fit_slope(h: &[f64], r: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(r).map(|(h, r)| (h.ln(), r.max(1e-300).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Rerun `check` on `make(n)` for every `n` in `sizes`.
pub fn convergence_study<F>(check: CheckId, sizes: &[usize], make: F) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<GeometryField>,
{
    let mut reports = Vec::new();
    let mut spacing = Vec::new();
    for &n in sizes {
        let gf = make(n)?;
        spacing.push(gf.grid.h());
        let tol = Tolerances::for_field(&gf);
        let d = Derived::new(&gf);
        reports.push(run_check(check, &gf, &d, &tol));
    }
    let names: Vec<&'static str> = reports[0].subs.iter().map(|s| s.name).collect();
    let subs: Vec<SubConvergence> = names
        .iter()
        .map(|name| {
            let residuals: Vec<f64> = reports.iter().map(|r| r.sub(name).map_or(0.0, |s| s.max_abs)).collect();
            let exact = residuals.iter().all(|r| *r <= ROUNDOFF_FLOOR);
            let slope = fit_slope(&spacing, &residuals);
            SubConvergence {
                name,
                passed: exact || slope >= MIN_SLOPE,
                residuals,
                slope,
                exact,
            }
        })
        .collect();
    let overall: Vec<f64> = reports.iter().map(|r| r.pointwise_max_residual).collect();
    let slope = fit_slope(&spacing, &overall);
    Ok(ConvergenceReport {
        check,
        sizes: sizes.to_vec(),
        spacing,
        passed: subs.iter().all(|s| s.passed),
        subs,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::ModelParams;
    use crate::canonical::{clifford_torus, hopf_torus, perturbed_torus, product_slice, HopfTorusSpec};
    use crate::surface::{geometry_field, Immersion};

    fn field(imm: &Immersion, n: usize) -> GeometryField {
        geometry_field(imm, &imm.grid(n, n).unwrap()).unwrap()
    }

    fn unit() -> ModelParams {
        ModelParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn check_ids_round_trip() {
        for id in CheckId::ALL {
            assert_eq!(id.as_str().parse::<CheckId>().unwrap(), id);
        }
        assert!(matches!("prop".parse::<CheckId>(), Err(Error::UnknownCheck(_))));
    }

    #[test]
    fn slope_of_power_law() {
        let h = [0.4, 0.2, 0.1];
        let r: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        assert!((fit_slope(&h, &r) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clifford_passes_everything() {
        let gf = field(&clifford_torus(&unit()).unwrap(), 32);
        let reports = run_checks(&gf, &CheckId::ALL, &Tolerances::for_field(&gf));
        assert_eq!(reports.len(), 12);
        for r in &reports {
            assert!(r.passed, "{r:#?}");
            if r.is_applicable() {
                assert!(r.pointwise_max_residual <= 1e-8, "{r:#?}");
            }
        }
    }

    #[test]
    fn hopf_torus_equality_flags() {
        let gf = field(&hopf_torus(&HopfTorusSpec::new(unit(), 0.6).unwrap()).unwrap(), 32);
        let tol = Tolerances::for_field(&gf);
        let d = Derived::new(&gf);
        let rk = check_reverse_kato(&gf, &d, &tol);
        assert_eq!(rk.equality, Some(true));
        let ex = check_extrinsic_inequality(&gf, &d, &tol);
        assert!(ex.passed && ex.equality == Some(true), "{ex:#?}");
        let wi = check_willmore_inequality(&gf, &d, &tol);
        assert_eq!(wi.status, CheckStatus::Inapplicable);
        assert!(wi.value("i1").unwrap().is_finite());
    }

    #[test]
    fn perturbed_torus_generic_status() {
        let gf = field(&perturbed_torus(&unit(), 0.6, 0.05, (2, 3)).unwrap(), 64);
        let tol = Tolerances::for_field(&gf);
        let d = Derived::new(&gf);
        assert_eq!(check_reverse_kato(&gf, &d, &tol).status, CheckStatus::Inapplicable);
        assert_eq!(check_extrinsic_inequality(&gf, &d, &tol).status, CheckStatus::Inapplicable);
        assert!(check_kato(&gf, &d, &tol).passed);
        let el = check_euler_lagrange(&gf, &d, &tol);
        assert!(el.passed, "{el:#?}");
    }

    #[test]
    fn slice_reduces_to_trivial_identities() {
        let gf = field(&product_slice(&ModelParams::new(1.0, 0.0).unwrap(), 0.0).unwrap(), 64);
        let reports = run_checks(&gf, &CheckId::ALL, &Tolerances::for_field(&gf));
        for r in &reports {
            assert!(r.passed, "{r:#?}");
        }
    }
}
