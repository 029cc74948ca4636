use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform periodic grid on the parameter torus `[u0, u0 + lu) x [v0, v0 + lv)`.
/// Node `(i, j)` sits at `(u0 + i hu, v0 + j hv)` and is stored at `i * nv + j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub nu: usize,
    pub nv: usize,
    pub lu: f64,
    pub lv: f64,
    pub u0: f64,
    pub v0: f64,
}

impl Grid {
    pub const MIN_NODES: usize = 16;

    pub fn new(nu: usize, nv: usize, lu: f64, lv: f64) -> Result<Self> {
        if nu < Self::MIN_NODES || nv < Self::MIN_NODES {
            return Err(Error::Grid(format!(
                "need at least {} nodes per direction, got {nu} x {nv}",
                Self::MIN_NODES
            )));
        }
        if !(lu > 0.0 && lv > 0.0 && lu.is_finite() && lv.is_finite()) {
            return Err(Error::Grid(format!("periods must be positive, got {lu} x {lv}")));
        }
        Ok(Self { nu, nv, lu, lv, u0: 0.0, v0: 0.0 })
    }

    /// Shift the node lattice, e.g. by half a cell to avoid a singular row.
    pub fn with_origin(mut self, u0: f64, v0: f64) -> Self {
        self.u0 = u0;
        self.v0 = v0;
        self
    }

    /// Same periods and origin with a different resolution.
    pub fn resized(&self, nu: usize, nv: usize) -> Result<Self> {
        let mut g = Self::new(nu, nv, self.lu, self.lv)?;
        // keep offsets proportional to the cell size
        g.u0 = self.u0 / self.hu() * g.hu();
        g.v0 = self.v0 / self.hv() * g.hv();
        Ok(g)
    }

    pub fn hu(&self) -> f64 {
        self.lu / self.nu as f64
    }

    pub fn hv(&self) -> f64 {
        self.lv / self.nv as f64
    }

    /// The coarser of the two spacings.
    pub fn h(&self) -> f64 {
        self.hu().max(self.hv())
    }

    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn node(&self, idx: usize) -> (usize, usize) {
        (idx / self.nv, idx % self.nv)
    }

    pub fn u(&self, i: usize) -> f64 {
        self.u0 + i as f64 * self.hu()
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v0 + j as f64 * self.hv()
    }

    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.node(idx);
        (self.u(i), self.v(j))
    }

    /// Periodic index plus the number of periods crossed.
    pub fn wrap(i: isize, n: usize) -> (usize, isize) {
        let n = n as isize;
        (i.rem_euclid(n) as usize, i.div_euclid(n))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nu == other.nu
            && self.nv == other.nv
            && (self.lu - other.lu).abs() <= 1e-12 * self.lu
            && (self.lv - other.lv).abs() <= 1e-12 * self.lv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_coarse_grids() {
        assert!(Grid::new(8, 32, 1.0, 1.0).is_err());
        assert!(Grid::new(32, 32, 0.0, 1.0).is_err());
    }

    #[test]
    fn indexing_round_trip() {
        let g = Grid::new(16, 24, 1.0, 2.0).unwrap();
        for idx in [0, 5, 23, 24, 383] {
            let (i, j) = g.node(idx);
            assert_eq!(g.index(i, j), idx);
        }
        assert_eq!(Grid::wrap(-1, 16), (15, -1));
        assert_eq!(Grid::wrap(17, 16), (1, 1));
    }

    #[test]
    fn resize_keeps_half_cell_offset() {
        let g = Grid::new(16, 16, 1.0, 1.0).unwrap().with_origin(0.5 / 16.0, 0.0);
        let r = g.resized(32, 32).unwrap();
        assert!((r.u0 - 0.5 / 32.0).abs() < 1e-15);
    }
}
