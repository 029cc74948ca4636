//! Fourth-order periodic finite differences.

use nalgebra::Vector3;
use rayon::prelude::*;
use std::ops::{Add, Sub, Mul};

use super::grid::Grid;
use super::immersion::Jet;

/// Anything that can be differenced: scalars, small vectors and matrices.
pub trait FieldValue: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> FieldValue for T where T: Copy + Send + Sync + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    U,
    V,
}

fn neighbor(grid: &Grid, idx: usize, axis: Axis, k: isize) -> usize {
    let (i, j) = grid.node(idx);
    match axis {
        Axis::U => grid.index(Grid::wrap(i as isize + k, grid.nu).0, j),
        Axis::V => grid.index(i, Grid::wrap(j as isize + k, grid.nv).0),
    }
}

fn spacing(grid: &Grid, axis: Axis) -> f64 {
    match axis {
        Axis::U => grid.hu(),
        Axis::V => grid.hv(),
    }
}

#[inline]
fn d1_stencil<T: FieldValue>(m2: T, m1: T, p1: T, p2: T, h: f64) -> T {
    ((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * h))
}

#[inline]
fn d2_stencil<T: FieldValue>(m2: T, m1: T, c: T, p1: T, p2: T, h: f64) -> T {
    ((p1 + m1) * 16.0 - (p2 + m2) - c * 30.0) * (1.0 / (12.0 * h * h))
}

/// First derivative along `axis`.
pub fn diff<T: FieldValue>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    assert_eq!(f.len(), grid.len());
    let h = spacing(grid, axis);
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let at = |k| f[neighbor(grid, idx, axis, k)];
            d1_stencil(at(-2), at(-1), at(1), at(2), h)
        })
        .collect()
}

/// Eighth-order first derivative. Only the intrinsic curvature
/// cross-check uses it: it differentiates the metric twice.
pub fn diff8<T: FieldValue>(grid: &Grid, f: &[T], axis: Axis) -> Vec<T> {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    assert_eq!(f.len(), grid.len());
    let h = spacing(grid, axis);
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let at = |k| f[neighbor(grid, idx, axis, k)];
            let mut acc = (at(1) - at(-1)) * W[0];
            for (k, w) in W.iter().enumerate().skip(1) {
                let k = k as isize + 1;
                acc = acc + (at(k) - at(-k)) * *w;
            }
            acc * (1.0 / h)
        })
        .collect()
}

pub fn d_u<T: FieldValue>(grid: &Grid, f: &[T]) -> Vec<T> {
    diff(grid, f, Axis::U)
}

pub fn d_v<T: FieldValue>(grid: &Grid, f: &[T]) -> Vec<T> {
    diff(grid, f, Axis::V)
}

/// Jets of a lattice of positions that is periodic up to a translation:
/// `X(u + lu, v) = X(u, v) + winding[0]`, `X(u, v + lv) = X(u, v) + winding[1]`.
pub fn position_jets(grid: &Grid, x: &[Vector3<f64>], winding: &[Vector3<f64>; 2]) -> Vec<Jet> {
    assert_eq!(x.len(), grid.len());
    let (hu, hv) = (grid.hu(), grid.hv());
    let fetch = |i: isize, j: isize| {
        let (ii, wu) = Grid::wrap(i, grid.nu);
        let (jj, wv) = Grid::wrap(j, grid.nv);
        x[grid.index(ii, jj)] + winding[0] * wu as f64 + winding[1] * wv as f64
    };
    let xu_of = |i: isize, j: isize| d1_stencil(fetch(i - 2, j), fetch(i - 1, j), fetch(i + 1, j), fetch(i + 2, j), hu);
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i, j) = grid.node(idx);
            let (i, j) = (i as isize, j as isize);
            let c = fetch(i, j);
            Jet {
                x: c,
                xu: xu_of(i, j),
                xv: d1_stencil(fetch(i, j - 2), fetch(i, j - 1), fetch(i, j + 1), fetch(i, j + 2), hv),
                xuu: d2_stencil(fetch(i - 2, j), fetch(i - 1, j), c, fetch(i + 1, j), fetch(i + 2, j), hu),
                xuv: d1_stencil(xu_of(i, j - 2), xu_of(i, j - 1), xu_of(i, j + 1), xu_of(i, j + 2), hv),
                xvv: d2_stencil(fetch(i, j - 2), fetch(i, j - 1), c, fetch(i, j + 1), fetch(i, j + 2), hv),
            }
        })
        .collect()
}
