//! Differential operators on a [`GeometryField`].
//!
//! Divergence and the Laplace-Beltrami operator use the conservative form
//! `(1/sqrt g) d_i(sqrt g V^i)`, so discrete integrals of divergences vanish
//! to roundoff on closed surfaces.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;

use super::fd::{d_u, d_v};
use super::geometry::GeometryField;

pub type TangentField = Vec<Vector2<f64>>;
pub type ScalarField = Vec<f64>;
pub type OperatorField = Vec<Matrix2<f64>>;

/// `g^{-1} df`.
pub fn surface_gradient(gf: &GeometryField, f: &[f64]) -> TangentField {
    let fu = d_u(&gf.grid, f);
    let fv = d_v(&gf.grid, f);
    (0..gf.len()).map(|k| gf.g_inv[k] * Vector2::new(fu[k], fv[k])).collect()
}

/// Covariant Hessian `d_i d_j f - Gamma^k_ij d_k f` (lowered, symmetric).
pub fn surface_hessian(gf: &GeometryField, f: &[f64]) -> OperatorField {
    let grid = &gf.grid;
    let fu = d_u(grid, f);
    let fv = d_v(grid, f);
    let fuu = d_u(grid, &fu);
    let fuv = d_v(grid, &fu);
    let fvu = d_u(grid, &fv);
    let fvv = d_v(grid, &fv);
    (0..gf.len())
        .map(|k| {
            let gm = &gf.christoffel[k];
            let mixed = 0.5 * (fuv[k] + fvu[k]);
            Matrix2::new(fuu[k], mixed, mixed, fvv[k]) - gm[0] * fu[k] - gm[1] * fv[k]
        })
        .collect()
}

/// Hessian as an operator, `g^{-1} Hess f`.
pub fn hessian_operator(gf: &GeometryField, f: &[f64]) -> OperatorField {
    surface_hessian(gf, f).iter().zip(&gf.g_inv).map(|(h, gi)| gi * h).collect()
}

pub fn divergence(gf: &GeometryField, v: &[Vector2<f64>]) -> ScalarField {
    let wu: Vec<f64> = v.iter().zip(&gf.sqrt_det).map(|(v, s)| v[0] * s).collect();
    let wv: Vec<f64> = v.iter().zip(&gf.sqrt_det).map(|(v, s)| v[1] * s).collect();
    let du = d_u(&gf.grid, &wu);
    let dv = d_v(&gf.grid, &wv);
    (0..gf.len()).map(|k| (du[k] + dv[k]) / gf.sqrt_det[k]).collect()
}

pub fn laplace_beltrami(gf: &GeometryField, f: &[f64]) -> ScalarField {
    divergence(gf, &surface_gradient(gf, f))
}

/// `nabla V` as the operator `X -> nabla_X V`; entry `(i, k)` is `(nabla_k V)^i`.
pub fn covariant_vector(gf: &GeometryField, v: &[Vector2<f64>]) -> OperatorField {
    let vu = d_u(&gf.grid, v);
    let vv = d_v(&gf.grid, v);
    (0..gf.len())
        .map(|k| {
            let cu = vu[k] + gf.connection(k, 0) * v[k];
            let cv = vv[k] + gf.connection(k, 1) * v[k];
            Matrix2::from_columns(&[cu, cv])
        })
        .collect()
}

/// `nabla_k S` for a field of mixed operators, both directions.
pub fn covariant_operator(gf: &GeometryField, s: &[Matrix2<f64>]) -> Vec<[Matrix2<f64>; 2]> {
    let su = d_u(&gf.grid, s);
    let sv = d_v(&gf.grid, s);
    (0..gf.len())
        .into_par_iter()
        .map(|k| {
            let (cu, cv) = (gf.connection(k, 0), gf.connection(k, 1));
            [su[k] + cu * s[k] - s[k] * cu, sv[k] + cv * s[k] - s[k] * cv]
        })
        .collect()
}

/// Covariant derivative of the shape operator and the scalars built from it.
#[derive(Clone, Debug)]
pub struct ShapeDerivatives {
    /// `nabla[k] = nabla_k A`, so `nabla A(X, Y) = (nabla_Y A) X`.
    pub nabla: Vec<[Matrix2<f64>; 2]>,
    pub norm2: ScalarField,
    pub grad_h: TangentField,
    pub norm_grad_h2: ScalarField,
    /// `tr(nabla A) = sum_i (nabla_{e_i} A) e_i`.
    pub trace: TangentField,
}

pub fn covariant_shape_derivative(gf: &GeometryField) -> ShapeDerivatives {
    let nabla = covariant_operator(gf, &gf.a);
    let grad_h = surface_gradient(gf, &gf.h);
    let n = gf.len();
    let mut norm2 = vec![0.0; n];
    let mut trace = vec![Vector2::zeros(); n];
    for k in 0..n {
        let gi = gf.g_inv[k];
        let b = &nabla[k];
        let mut s = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                s += gi[(p, q)] * (b[p].transpose() * gf.g[k] * b[q] * gi).trace();
            }
        }
        norm2[k] = s;
        let mut tr = Vector2::zeros();
        for p in 0..2 {
            for q in 0..2 {
                tr += b[p].column(q) * gi[(p, q)];
            }
        }
        trace[k] = tr;
    }
    let norm_grad_h2 = (0..n).map(|k| gf.norm2(k, &grad_h[k])).collect();
    ShapeDerivatives {
        nabla,
        norm2,
        grad_h,
        norm_grad_h2,
        trace,
    }
}

/// Rough Laplacian `sum_i (nabla_{e_i} nabla A)(., e_i)` from a second
/// covariant differentiation, trace taken last.
pub fn rough_laplacian(gf: &GeometryField, sd: &ShapeDerivatives) -> OperatorField {
    let bu: Vec<Matrix2<f64>> = sd.nabla.iter().map(|b| b[0]).collect();
    let bv: Vec<Matrix2<f64>> = sd.nabla.iter().map(|b| b[1]).collect();
    // d[l][k] = d_l (nabla_k A)
    let d = [[d_u(&gf.grid, &bu), d_u(&gf.grid, &bv)], [d_v(&gf.grid, &bu), d_v(&gf.grid, &bv)]];
    (0..gf.len())
        .into_par_iter()
        .map(|node| {
            let gm = &gf.christoffel[node];
            let b = &sd.nabla[node];
            let conn = [gf.connection(node, 0), gf.connection(node, 1)];
            let gi = gf.g_inv[node];
            let mut out = Matrix2::zeros();
            for l in 0..2 {
                for k in 0..2 {
                    let mut second = d[l][k][node] + conn[l] * b[k] - b[k] * conn[l];
                    for m in 0..2 {
                        second -= b[m] * gm[m][(l, k)];
                    }
                    out += second * gi[(k, l)];
                }
            }
            out
        })
        .collect()
}

/// Cheng-Yau operator `tr(P o Hess f)` with `P = 2H I - A`.
pub fn cheng_yau(gf: &GeometryField, f: &[f64]) -> ScalarField {
    let hess = hessian_operator(gf, f);
    (0..gf.len())
        .map(|k| {
            let p = Matrix2::identity() * (2.0 * gf.h[k]) - gf.a[k];
            (p * hess[k]).trace()
        })
        .collect()
}
