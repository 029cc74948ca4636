use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use super::fd::{d_u, d_v, diff8, Axis};
use super::grid::Grid;
use super::immersion::{Immersion, Jet, SurfaceKind};
use crate::ambient::{curvature_closed_form, AmbientVector, Chart, ModelParams};
use crate::error::{Error, Result};

/// Extrinsic and intrinsic geometry of an immersion sampled on a grid.
///
/// Tangent vectors are stored in the coordinate basis `{X_u, X_v}`, operators
/// as mixed `(1,1)` matrices acting on those components. `christoffel[k]` holds
/// the surface symbols `Gamma^k_ij` of the induced metric.
#[derive(Clone, Debug)]
pub struct GeometryField {
    pub grid: Grid,
    pub chart: Chart,
    pub model: ModelParams,
    pub kind: SurfaceKind,
    pub sheets: u32,
    pub mask: Vec<bool>,
    pub jets: Vec<Jet>,
    pub xi: Vec<AmbientVector>,
    /// Unit normal `(X_u ^ X_v) / |X_u ^ X_v|`.
    pub n: Vec<AmbientVector>,
    pub g: Vec<Matrix2<f64>>,
    pub g_inv: Vec<Matrix2<f64>>,
    pub sqrt_det: Vec<f64>,
    /// Second fundamental form `<D_{X_i} X_j, N>`.
    pub second: Vec<Matrix2<f64>>,
    /// Shape operator `A = -D N`, mixed components.
    pub a: Vec<Matrix2<f64>>,
    pub h: Vec<f64>,
    pub ke: Vec<f64>,
    pub c: Vec<f64>,
    pub t: Vec<Vector2<f64>>,
    /// Rotation `J(V) = N ^ V`, mixed components.
    pub j: Vec<Matrix2<f64>>,
    pub phi: Vec<Matrix2<f64>>,
    pub norm_a2: Vec<f64>,
    pub norm_phi2: Vec<f64>,
    /// Ambient sectional curvature of the tangent plane from the curvature tensor.
    pub kbar: Vec<f64>,
    /// Intrinsic curvature from the induced metric alone.
    pub k_gauss: Vec<f64>,
    /// Curvature from the Gauss equation, `Kbar + Ke`.
    pub k_gauss_eq: Vec<f64>,
    pub christoffel: Vec<[Matrix2<f64>; 2]>,
}

struct Pointwise {
    xi: AmbientVector,
    n: AmbientVector,
    g: Matrix2<f64>,
    g_inv: Matrix2<f64>,
    sqrt_det: f64,
    second: Matrix2<f64>,
    t: Vector2<f64>,
    c: f64,
    j: Matrix2<f64>,
    kbar: f64,
}

fn pointwise(chart: &Chart, jet: &Jet, idx: usize, grid: &Grid) -> Result<Pointwise> {
    let m = chart.metric_at(&jet.x)?;
    let xi = chart.killing_xi(&jet.x)?;
    let (xu, xv) = (jet.xu, jet.xv);
    let guu = m.inner(&xu, &xu);
    let guv = m.inner(&xu, &xv);
    let gvv = m.inner(&xv, &xv);
    let det = guu * gvv - guv * guv;
    if !(det.is_finite() && det > 1e-14 * guu * gvv) {
        let (i, j) = grid.node(idx);
        return Err(Error::Regularity { i, j, det });
    }
    let g = Matrix2::new(guu, guv, guv, gvv);
    let g_inv = Matrix2::new(gvv, -guv, -guv, guu) / det;
    let orient = chart.orientation();
    let cross = m.cross(orient, &xu, &xv);
    let n = cross / m.norm(&cross);
    let sff = |xij: &AmbientVector, a: &AmbientVector, b: &AmbientVector| m.inner(&(xij + m.christoffel(a, b)), &n);
    let huu = sff(&jet.xuu, &xu, &xu);
    let huv = sff(&jet.xuv, &xu, &xv);
    let hvv = sff(&jet.xvv, &xv, &xv);
    let second = Matrix2::new(huu, huv, huv, hvv);
    let c = m.inner(&n, &xi);
    let t = g_inv * Vector2::new(m.inner(&xi, &xu), m.inner(&xi, &xv));
    let lowered_j = |col: &AmbientVector| {
        let r = m.cross(orient, &n, col);
        Vector2::new(m.inner(&xu, &r), m.inner(&xv, &r))
    };
    let j = g_inv * Matrix2::from_columns(&[lowered_j(&xu), lowered_j(&xv)]);
    let r = curvature_closed_form(&chart.model(), &m, &xi, &xu, &xv, &xv);
    let kbar = -m.inner(&r, &xu) / det;
    Ok(Pointwise {
        xi,
        n,
        g,
        g_inv,
        sqrt_det: det.sqrt(),
        second,
        t,
        c,
        j,
        kbar,
    })
}

/// Evaluate the full geometry of `imm` on `grid`.
pub fn geometry_field(imm: &Immersion, grid: &Grid) -> Result<GeometryField> {
    let chart = imm.chart();
    let jets = imm.sample_jets(grid)?;
    let pts: Vec<Pointwise> = jets
        .par_iter()
        .enumerate()
        .map(|(k, jet)| pointwise(&chart, jet, k, grid))
        .collect::<Result<_>>()?;

    let g: Vec<Matrix2<f64>> = pts.iter().map(|p| p.g).collect();
    let g_inv: Vec<Matrix2<f64>> = pts.iter().map(|p| p.g_inv).collect();
    let a: Vec<Matrix2<f64>> = pts.iter().map(|p| p.g_inv * p.second).collect();
    let h: Vec<f64> = a.iter().map(|a| 0.5 * a.trace()).collect();
    let ke: Vec<f64> = a.iter().map(|a| a.determinant()).collect();
    let phi: Vec<Matrix2<f64>> = a.iter().zip(&h).map(|(a, h)| a - Matrix2::identity() * *h).collect();
    let norm_a2: Vec<f64> = a.iter().map(|a| (a * a).trace()).collect();
    let norm_phi2: Vec<f64> = norm_a2.iter().zip(&h).map(|(a2, h)| a2 - 2.0 * h * h).collect();
    let christoffel = surface_christoffel(grid, &g, &g_inv);
    let k_gauss = intrinsic_curvature(grid, &g, &g_inv);
    let k_gauss_eq: Vec<f64> = pts.iter().zip(&ke).map(|(p, ke)| p.kbar + ke).collect();

    Ok(GeometryField {
        grid: *grid,
        chart,
        model: chart.model(),
        kind: imm.kind(),
        sheets: imm.sheets(),
        mask: imm.node_mask(grid),
        xi: pts.iter().map(|p| p.xi).collect(),
        n: pts.iter().map(|p| p.n).collect(),
        sqrt_det: pts.iter().map(|p| p.sqrt_det).collect(),
        second: pts.iter().map(|p| p.second).collect(),
        c: pts.iter().map(|p| p.c).collect(),
        t: pts.iter().map(|p| p.t).collect(),
        j: pts.iter().map(|p| p.j).collect(),
        kbar: pts.iter().map(|p| p.kbar).collect(),
        jets,
        g,
        g_inv,
        a,
        h,
        ke,
        phi,
        norm_a2,
        norm_phi2,
        k_gauss,
        k_gauss_eq,
        christoffel,
    })
}

fn surface_christoffel(grid: &Grid, g: &[Matrix2<f64>], g_inv: &[Matrix2<f64>]) -> Vec<[Matrix2<f64>; 2]> {
    christoffel_from(g_inv, d_u(grid, g), d_v(grid, g))
}

fn christoffel_from(g_inv: &[Matrix2<f64>], dgu: Vec<Matrix2<f64>>, dgv: Vec<Matrix2<f64>>) -> Vec<[Matrix2<f64>; 2]> {
    (0..g_inv.len())
        .into_par_iter()
        .map(|k| {
            let dg = [dgu[k], dgv[k]];
            // lowered[l](i, j) = Gamma_{l, ij}
            let mut lowered = [Matrix2::zeros(); 2];
            for (l, low) in lowered.iter_mut().enumerate() {
                for i in 0..2 {
                    for j in 0..2 {
                        low[(i, j)] = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                }
            }
            let gi = g_inv[k];
            [
                lowered[0] * gi[(0, 0)] + lowered[1] * gi[(0, 1)],
                lowered[0] * gi[(1, 0)] + lowered[1] * gi[(1, 1)],
            ]
        })
        .collect()
}

/// Gauss curvature from the metric alone. Two stacked differentiations, so
/// eighth-order stencils keep it from swamping the comparison with the
/// Gauss equation on curved metrics such as the round sphere.
fn intrinsic_curvature(grid: &Grid, g: &[Matrix2<f64>], g_inv: &[Matrix2<f64>]) -> Vec<f64> {
    let gamma = christoffel_from(g_inv, diff8(grid, g, Axis::U), diff8(grid, g, Axis::V));
    let packed: Vec<Gam> = gamma.iter().map(|x| Gam(*x)).collect();
    let gam_u = diff8(grid, &packed, Axis::U);
    let gam_v = diff8(grid, &packed, Axis::V);
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let gm = &gamma[k];
            let d = [gam_u[k].0, gam_v[k].0];
            // R^l_{2 1 2} = d_1 Gamma^l_22 - d_2 Gamma^l_12 + Gamma^l_1m Gamma^m_22 - Gamma^l_2m Gamma^m_12
            let r = |l: usize| {
                let mut v = d[0][l][(1, 1)] - d[1][l][(0, 1)];
                for m in 0..2 {
                    v += gm[l][(0, m)] * gm[m][(1, 1)] - gm[l][(1, m)] * gm[m][(0, 1)];
                }
                v
            };
            let gk = g[k];
            (gk[(0, 0)] * r(0) + gk[(0, 1)] * r(1)) / gk.determinant()
        })
        .collect()
}

/// Pair of matrices that can be differenced as one field value.
#[derive(Clone, Copy, Debug)]
struct Gam([Matrix2<f64>; 2]);

impl std::ops::Add for Gam {
    type Output = Gam;
    fn add(self, o: Gam) -> Gam {
        Gam([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl std::ops::Sub for Gam {
    type Output = Gam;
    fn sub(self, o: Gam) -> Gam {
        Gam([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl std::ops::Mul<f64> for Gam {
    type Output = Gam;
    fn mul(self, s: f64) -> Gam {
        Gam([self.0[0] * s, self.0[1] * s])
    }
}

impl GeometryField {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn inner(&self, k: usize, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
        a.dot(&(self.g[k] * b))
    }

    pub fn norm2(&self, k: usize, a: &Vector2<f64>) -> f64 {
        self.inner(k, a, a)
    }

    /// `<S, B>` for mixed tensors, i.e. `tr(S^T g B g^-1)`.
    pub fn inner_op(&self, k: usize, s: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
        (s.transpose() * self.g[k] * b * self.g_inv[k]).trace()
    }

    pub fn norm2_op(&self, k: usize, s: &Matrix2<f64>) -> f64 {
        self.inner_op(k, s, s)
    }

    /// Chart components of a tangent vector.
    pub fn push_forward(&self, k: usize, v: &Vector2<f64>) -> Vector3<f64> {
        self.jets[k].xu * v[0] + self.jets[k].xv * v[1]
    }

    /// `(Gamma_k)(i, l) = Gamma^i_{kl}`: the connection matrix along direction `k`.
    pub fn connection(&self, node: usize, k: usize) -> Matrix2<f64> {
        let gm = &self.christoffel[node];
        Matrix2::new(gm[0][(k, 0)], gm[0][(k, 1)], gm[1][(k, 0)], gm[1][(k, 1)])
    }

    /// Largest absolute value over the masked nodes.
    pub fn max_abs(&self, f: &[f64]) -> f64 {
        f.iter()
            .zip(&self.mask)
            .filter(|(_, m)| **m)
            .map(|(v, _)| v.abs())
            .fold(0.0, f64::max)
    }

    pub fn area(&self) -> f64 {
        self.integrate(&vec![1.0; self.len()])
    }

    /// `int f dA`, trapezoidal on the periodic grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.len());
        let cell = self.grid.hu() * self.grid.hv();
        let s: f64 = f.iter().zip(&self.sqrt_det).map(|(f, w)| f * w).sum();
        s * cell / self.sheets as f64
    }

    /// `int f dA` over the masked region only.
    pub fn integrate_masked(&self, f: &[f64]) -> f64 {
        let g: Vec<f64> = f.iter().zip(&self.mask).map(|(f, m)| if *m { *f } else { 0.0 }).collect();
        self.integrate(&g)
    }

    pub fn masked_area(&self) -> f64 {
        self.integrate_masked(&vec![1.0; self.len()])
    }

    /// `J(V)` at every node.
    pub fn rotate_j(&self, v: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
        self.j.iter().zip(v).map(|(j, v)| j * v).collect()
    }

    /// `T(f) = <grad f, T>` from the differential.
    pub fn along_t(&self, f: &[f64]) -> Vec<f64> {
        let fu = d_u(&self.grid, f);
        let fv = d_v(&self.grid, f);
        (0..self.len()).map(|k| fu[k] * self.t[k][0] + fv[k] * self.t[k][1]).collect()
    }
}
