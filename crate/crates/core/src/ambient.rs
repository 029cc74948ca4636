//! The homogeneous space E(kappa, tau) in explicit coordinates.
//!
//! Two charts are provided. The BCV chart is the region of R^3 with the
//! metric `lambda^2 (dx^2 + dy^2) + (dz + tau lambda (y dx - x dy))^2`,
//! `lambda = 1 / (1 + kappa (x^2 + y^2) / 4)`. The Hopf chart covers a Berger
//! sphere by `(eta, phi1, phi2) -> (cos eta e^{i phi1}, sin eta e^{i phi2})`
//! with the pulled back Berger metric. Both expose metric data with analytic
//! first derivatives, the Levi-Civita connection, curvature, the oriented
//! cross product and the unit vertical Killing field.
//!
//! Curvature follows the sign convention
//! `R(X,Y)Z = D_{[X,Y]}Z - [D_X, D_Y]Z`, i.e. the negative of the usual one.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub type AmbientPoint = Vector3<f64>;
pub type AmbientVector = Vector3<f64>;

/// Default step for ambient finite differences.
pub const AMBIENT_STEP: f64 = 1e-5;

/// The pair (kappa, tau) with `kappa != 4 tau^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct ModelParams {
    kappa: f64,
    tau: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct RawModel {
    kappa: f64,
    tau: f64,
}

impl TryFrom<RawModel> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        ModelParams::new(raw.kappa, raw.tau)
    }
}

impl From<ModelParams> for RawModel {
    fn from(m: ModelParams) -> Self {
        RawModel { kappa: m.kappa, tau: m.tau }
    }
}

/// Which geometry a model describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    BergerSphere,
    Heisenberg,
    UniversalCoverPsl2,
    Product,
}

impl ModelParams {
    pub fn new(kappa: f64, tau: f64) -> Result<Self> {
        if !kappa.is_finite() || !tau.is_finite() {
            return Err(Error::Model(format!("non-finite parameters ({kappa}, {tau})")));
        }
        let anisotropy = kappa - 4.0 * tau * tau;
        if anisotropy.abs() <= 1e-12 * kappa.abs().max(1.0) {
            return Err(Error::Model(format!(
                "kappa = 4 tau^2 excluded (kappa = {kappa}, tau = {tau})"
            )));
        }
        Ok(Self { kappa, tau })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `kappa - 4 tau^2`, nonzero by construction.
    pub fn anisotropy(&self) -> f64 {
        self.kappa - 4.0 * self.tau * self.tau
    }

    pub fn class(&self) -> ModelClass {
        if self.tau == 0.0 {
            ModelClass::Product
        } else if self.kappa > 0.0 {
            ModelClass::BergerSphere
        } else if self.kappa == 0.0 {
            ModelClass::Heisenberg
        } else {
            ModelClass::UniversalCoverPsl2
        }
    }

    pub fn is_berger_sphere(&self) -> bool {
        self.class() == ModelClass::BergerSphere
    }

    /// Sectional curvature of a plane whose unit normal makes angle cosine `c`
    /// with the vertical field.
    pub fn plane_sectional_curvature(&self, c: f64) -> f64 {
        self.tau * self.tau + self.anisotropy() * c * c
    }

    /// `Ric(N, N)` for a unit vector with vertical component `c`.
    pub fn ricci_normal(&self, c: f64) -> f64 {
        self.kappa - 2.0 * self.tau * self.tau - self.anisotropy() * c * c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Bcv,
    Hopf,
}

impl ChartKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChartKind::Bcv => "bcv",
            ChartKind::Hopf => "hopf",
        }
    }
}

/// Orientation of a chart relative to its coordinate basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Right,
    Left,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Right => 1.0,
            Orientation::Left => -1.0,
        }
    }
}

/// Metric components, their first derivatives and the Christoffel symbols at
/// one point. `dg[l]` is the matrix of `d g_ij / dx^l`, `gamma[k][(i, j)]` is
/// `Gamma^k_ij`.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub g: Matrix3<f64>,
    pub g_inv: Matrix3<f64>,
    pub sqrt_det: f64,
    pub dg: [Matrix3<f64>; 3],
    pub gamma: [Matrix3<f64>; 3],
}

impl MetricData {
    fn assemble(g: Matrix3<f64>, dg: [Matrix3<f64>; 3]) -> Self {
        let det = g.determinant();
        let g_inv = g.try_inverse().expect("metric is positive definite");
        let mut lowered = [Matrix3::zeros(); 3];
        for (l, low) in lowered.iter_mut().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    low[(i, j)] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
            }
        }
        let mut gamma = [Matrix3::zeros(); 3];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for i in 0..3 {
                for j in i..3 {
                    let v: f64 = (0..3).map(|l| g_inv[(k, l)] * lowered[l][(i, j)]).sum();
                    gk[(i, j)] = v;
                    gk[(j, i)] = v;
                }
            }
        }
        Self {
            g,
            g_inv,
            sqrt_det: det.sqrt(),
            dg,
            gamma,
        }
    }

    pub fn inner(&self, x: &AmbientVector, y: &AmbientVector) -> f64 {
        x.dot(&(self.g * y))
    }

    pub fn norm(&self, x: &AmbientVector) -> f64 {
        self.inner(x, x).sqrt()
    }

    /// `Gamma(X, Y)^k = Gamma^k_ij X^i Y^j`.
    pub fn christoffel(&self, x: &AmbientVector, y: &AmbientVector) -> AmbientVector {
        Vector3::from_fn(|k, _| x.dot(&(self.gamma[k] * y)))
    }

    /// Oriented cross product: `<X ^ Y, W> = vol(X, Y, W)`.
    pub fn cross(&self, orientation: Orientation, x: &AmbientVector, y: &AmbientVector) -> AmbientVector {
        self.g_inv * x.cross(y) * (orientation.sign() * self.sqrt_det)
    }
}

/// A coordinate chart of E(kappa, tau).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chart {
    kind: ChartKind,
    model: ModelParams,
}

impl Chart {
    pub fn bcv(model: ModelParams) -> Self {
        Self { kind: ChartKind::Bcv, model }
    }

    /// Hopf coordinates on a Berger sphere.
    pub fn hopf(model: ModelParams) -> Result<Self> {
        if !model.is_berger_sphere() {
            return Err(Error::Model(format!(
                "Hopf coordinates need a Berger sphere (kappa > 0, tau != 0), got kappa = {}, tau = {}",
                model.kappa(),
                model.tau()
            )));
        }
        Ok(Self { kind: ChartKind::Hopf, model })
    }

    pub fn new(kind: ChartKind, model: ModelParams) -> Result<Self> {
        match kind {
            ChartKind::Bcv => Ok(Self::bcv(model)),
            ChartKind::Hopf => Self::hopf(model),
        }
    }

    pub fn kind(&self) -> ChartKind {
        self.kind
    }

    pub fn model(&self) -> ModelParams {
        self.model
    }

    /// Open coordinate intervals of the chart. The BCV chart for `kappa < 0`
    /// is further restricted to the disk `x^2 + y^2 < 4 / (-kappa)`.
    pub fn domain_bounds(&self) -> [(f64, f64); 3] {
        let inf = f64::INFINITY;
        match self.kind {
            ChartKind::Bcv if self.model.kappa() < 0.0 => {
                let r = 2.0 / (-self.model.kappa()).sqrt();
                [(-r, r), (-r, r), (-inf, inf)]
            }
            ChartKind::Bcv => [(-inf, inf); 3],
            ChartKind::Hopf => [(0.0, FRAC_PI_2), (-inf, inf), (-inf, inf)],
        }
    }

    pub fn contains(&self, p: &AmbientPoint) -> bool {
        if !p.iter().all(|c| c.is_finite()) {
            return false;
        }
        match self.kind {
            ChartKind::Bcv => {
                let k = self.model.kappa();
                k >= 0.0 || 1.0 + 0.25 * k * (p.x * p.x + p.y * p.y) > 0.0
            }
            ChartKind::Hopf => p.x > 0.0 && p.x < FRAC_PI_2,
        }
    }

    fn check(&self, p: &AmbientPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain {
                chart: self.kind.name(),
                point: [p.x, p.y, p.z],
            })
        }
    }

    /// Orientation making `D_X xi = tau X ^ xi` hold.
    ///
    /// The BCV chart is right handed. In Hopf coordinates `xi` carries the
    /// sign of `tau`, so the coordinate basis is positive only for `tau > 0`.
    pub fn orientation(&self) -> Orientation {
        match self.kind {
            ChartKind::Bcv => Orientation::Right,
            ChartKind::Hopf => {
                if self.model.tau() > 0.0 {
                    Orientation::Right
                } else {
                    Orientation::Left
                }
            }
        }
    }

    fn metric_components(&self, p: &AmbientPoint) -> (Matrix3<f64>, [Matrix3<f64>; 3]) {
        let kappa = self.model.kappa();
        let tau = self.model.tau();
        match self.kind {
            ChartKind::Bcv => {
                let (x, y) = (p.x, p.y);
                let lam = 1.0 / (1.0 + 0.25 * kappa * (x * x + y * y));
                let lam_x = -0.5 * kappa * x * lam * lam;
                let lam_y = -0.5 * kappa * y * lam * lam;
                // one-form dz + a dx + b dy
                let a = tau * lam * y;
                let b = -tau * lam * x;
                let a_d = [tau * lam_x * y, tau * (lam_y * y + lam), 0.0];
                let b_d = [-tau * (lam_x * x + lam), -tau * lam_y * x, 0.0];
                let lam_d = [lam_x, lam_y, 0.0];
                let l2 = lam * lam;
                let g = Matrix3::new(
                    l2 + a * a, a * b, a, //
                    a * b, l2 + b * b, b, //
                    a, b, 1.0,
                );
                let mut dg = [Matrix3::zeros(); 3];
                for (l, d) in dg.iter_mut().enumerate() {
                    let dl2 = 2.0 * lam * lam_d[l];
                    let (da, db) = (a_d[l], b_d[l]);
                    *d = Matrix3::new(
                        dl2 + 2.0 * a * da, da * b + a * db, da, //
                        da * b + a * db, dl2 + 2.0 * b * db, db, //
                        da, db, 0.0,
                    );
                }
                (g, dg)
            }
            ChartKind::Hopf => {
                let eta = p.x;
                let scale = 4.0 / kappa;
                let beta = (4.0 * tau * tau - kappa) / kappa;
                let (s_eta, c_eta) = eta.sin_cos();
                let c = c_eta * c_eta;
                let s = s_eta * s_eta;
                let dc = -2.0 * s_eta * c_eta;
                let ds = -dc;
                let g = scale
                    * Matrix3::new(
                        1.0, 0.0, 0.0, //
                        0.0, c + beta * c * c, beta * c * s, //
                        0.0, beta * c * s, s + beta * s * s,
                    );
                let d_eta = scale
                    * Matrix3::new(
                        0.0, 0.0, 0.0, //
                        0.0, dc + 2.0 * beta * c * dc, beta * (dc * s + c * ds), //
                        0.0, beta * (dc * s + c * ds), ds + 2.0 * beta * s * ds,
                    );
                (g, [d_eta, Matrix3::zeros(), Matrix3::zeros()])
            }
        }
    }

    /// Metric, analytic first derivatives and Christoffel symbols at `p`.
    pub fn metric_at(&self, p: &AmbientPoint) -> Result<MetricData> {
        self.check(p)?;
        let (g, dg) = self.metric_components(p);
        Ok(MetricData::assemble(g, dg))
    }

    /// Same as [`Chart::metric_at`] but with metric derivatives taken by
    /// central differences of step `h`.
    pub fn metric_at_fd(&self, p: &AmbientPoint, h: f64) -> Result<MetricData> {
        self.check(p)?;
        let (g, _) = self.metric_components(p);
        let mut dg = [Matrix3::zeros(); 3];
        for (l, d) in dg.iter_mut().enumerate() {
            let e = Vector3::ith(l, h);
            let (pp, pm) = (p + e, p - e);
            self.check(&pp)?;
            self.check(&pm)?;
            *d = (self.metric_components(&pp).0 - self.metric_components(&pm).0) / (2.0 * h);
        }
        Ok(MetricData::assemble(g, dg))
    }

    fn metric_with(&self, p: &AmbientPoint, scheme: MetricDerivatives) -> Result<MetricData> {
        match scheme {
            MetricDerivatives::Analytic => self.metric_at(p),
            MetricDerivatives::FiniteDifference { step } => self.metric_at_fd(p, step),
        }
    }

    /// The unit vertical Killing field at `p`.
    pub fn killing_xi(&self, p: &AmbientPoint) -> Result<AmbientVector> {
        self.check(p)?;
        Ok(match self.kind {
            ChartKind::Bcv => Vector3::new(0.0, 0.0, 1.0),
            ChartKind::Hopf => {
                let f = self.model.kappa() / (4.0 * self.model.tau());
                Vector3::new(0.0, f, f)
            }
        })
    }

    /// `D_X Y` at `p` for a vector field `Y` given in chart components.
    /// The directional derivative of the components is a central difference
    /// along `X` with step [`AMBIENT_STEP`].
    pub fn covariant_derivative<F>(&self, p: &AmbientPoint, x: &AmbientVector, field: F) -> Result<AmbientVector>
    where
        F: Fn(&AmbientPoint) -> Result<AmbientVector>,
    {
        let metric = self.metric_at(p)?;
        let y = field(p)?;
        if x.iter().all(|c| *c == 0.0) {
            return Ok(Vector3::zeros());
        }
        let h = AMBIENT_STEP;
        let (pp, pm) = (p + x * h, p - x * h);
        self.check(&pp)?;
        self.check(&pm)?;
        let dy = (field(&pp)? - field(&pm)?) / (2.0 * h);
        let out = dy + metric.christoffel(x, &y);
        if !out.iter().all(|c| c.is_finite()) {
            return Err(Error::Precondition("vector field is not differentiable at the point".into()));
        }
        Ok(out)
    }

    /// Riemann tensor components in the usual convention,
    /// `Rstd[l][k][i][j] = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik`,
    /// with Christoffel derivatives by central differences of step `step`.
    fn riemann_std(&self, p: &AmbientPoint, scheme: NumericCurvature) -> Result<[[[[f64; 3]; 3]; 3]; 3]> {
        let h = scheme.step;
        let center = self.metric_with(p, scheme.metric)?;
        let mut dgamma = [[Matrix3::<f64>::zeros(); 3]; 3]; // dgamma[i][l] = d_i Gamma^l
        for (i, dgi) in dgamma.iter_mut().enumerate() {
            let e = Vector3::ith(i, h);
            let plus = self.metric_with(&(p + e), scheme.metric)?;
            let minus = self.metric_with(&(p - e), scheme.metric)?;
            for l in 0..3 {
                dgi[l] = (plus.gamma[l] - minus.gamma[l]) / (2.0 * h);
            }
        }
        let gm = &center.gamma;
        let mut r = [[[[0.0; 3]; 3]; 3]; 3];
        for l in 0..3 {
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let mut v = dgamma[i][l][(j, k)] - dgamma[j][l][(i, k)];
                        for m in 0..3 {
                            v += gm[l][(i, m)] * gm[m][(j, k)] - gm[l][(j, m)] * gm[m][(i, k)];
                        }
                        r[l][k][i][j] = v;
                    }
                }
            }
        }
        Ok(r)
    }

    /// `R(X,Y)Z` from numerically differentiated Christoffel symbols, in the
    /// `D_{[X,Y]} - [D_X, D_Y]` convention.
    pub fn curvature_numeric(
        &self,
        p: &AmbientPoint,
        x: &AmbientVector,
        y: &AmbientVector,
        z: &AmbientVector,
    ) -> Result<AmbientVector> {
        self.curvature_numeric_with(p, x, y, z, NumericCurvature::default())
    }

    pub fn curvature_numeric_with(
        &self,
        p: &AmbientPoint,
        x: &AmbientVector,
        y: &AmbientVector,
        z: &AmbientVector,
        scheme: NumericCurvature,
    ) -> Result<AmbientVector> {
        let r = self.riemann_std(p, scheme)?;
        let mut out = Vector3::zeros();
        for l in 0..3 {
            let mut v = 0.0;
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        v += r[l][k][i][j] * z[k] * x[i] * y[j];
                    }
                }
            }
            out[l] = -v;
        }
        Ok(out)
    }

    /// `Ric(V, V)` by tracing the numerically computed curvature tensor.
    pub fn ricci_numeric(&self, p: &AmbientPoint, v: &AmbientVector) -> Result<f64> {
        let r = self.riemann_std(p, NumericCurvature::default())?;
        let mut ric = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..3 {
                    ric += r[i][k][i][j] * v[j] * v[k];
                }
            }
        }
        Ok(ric)
    }
}

/// How metric derivatives are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricDerivatives {
    Analytic,
    FiniteDifference { step: f64 },
}

/// Scheme for [`Chart::curvature_numeric_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericCurvature {
    pub step: f64,
    pub metric: MetricDerivatives,
}

impl Default for NumericCurvature {
    fn default() -> Self {
        Self {
            step: AMBIENT_STEP,
            metric: MetricDerivatives::Analytic,
        }
    }
}

/// Closed-form curvature tensor of E(kappa, tau):
///
/// ```text
/// R(X,Y)Z = (k - 3t^2)(<X,Z>Y - <Y,Z>X)
///         + (k - 4t^2)<Z,xi>(<Y,xi>X - <X,xi>Y)
///         + (k - 4t^2)(<Y,Z><X,xi> - <X,Z><Y,xi>) xi
/// ```
pub fn curvature_closed_form(
    model: &ModelParams,
    metric: &MetricData,
    xi: &AmbientVector,
    x: &AmbientVector,
    y: &AmbientVector,
    z: &AmbientVector,
) -> AmbientVector {
    let ip = |a: &AmbientVector, b: &AmbientVector| metric.inner(a, b);
    let k3 = model.kappa() - 3.0 * model.tau() * model.tau();
    let k4 = model.anisotropy();
    let (xz, yz) = (ip(x, z), ip(y, z));
    let (xxi, yxi, zxi) = (ip(x, xi), ip(y, xi), ip(z, xi));
    (y * xz - x * yz) * k3 + (x * yxi - y * xxi) * (k4 * zxi) + xi * (k4 * (yz * xxi - xz * yxi))
}

/// Hopf coordinates `(eta, phi1, phi2)` of a point of S^3 in C^2.
pub fn hopf_coords_to_c2(p: &AmbientPoint) -> (Complex64, Complex64) {
    let (eta, a, b) = (p.x, p.y, p.z);
    (
        Complex64::from_polar(eta.cos(), a),
        Complex64::from_polar(eta.sin(), b),
    )
}

/// The Hopf fibration `(z, w) -> (1/sqrt(kappa)) (z conj(w), (|z|^2 - |w|^2) / 2)`.
pub fn hopf_project(z: Complex64, w: Complex64, model: &ModelParams) -> Result<[f64; 3]> {
    if model.kappa() <= 0.0 {
        return Err(Error::Precondition("Hopf projection needs kappa > 0".into()));
    }
    let n = z.norm_sqr() + w.norm_sqr();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("|z|^2 + |w|^2 = {n}, expected 1")));
    }
    let s = 1.0 / model.kappa().sqrt();
    let zw = z * w.conj();
    Ok([s * zw.re, s * zw.im, s * 0.5 * (z.norm_sqr() - w.norm_sqr())])
}
