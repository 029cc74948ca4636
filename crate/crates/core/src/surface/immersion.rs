use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use super::fd::position_jets;
use super::grid::Grid;
use crate::ambient::{AmbientPoint, AmbientVector, Chart};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    HopfTorus,
    Clifford,
    Cylinder,
    Slice,
    Perturbed,
    Custom,
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::HopfTorus => "hopf_torus",
            SurfaceKind::Clifford => "clifford",
            SurfaceKind::Cylinder => "cylinder",
            SurfaceKind::Slice => "slice",
            SurfaceKind::Perturbed => "perturbed",
            SurfaceKind::Custom => "custom",
        }
    }
}

/// Position and partial derivatives up to second order at one parameter point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub x: AmbientPoint,
    pub xu: AmbientVector,
    pub xv: AmbientVector,
    pub xuu: AmbientVector,
    pub xuv: AmbientVector,
    pub xvv: AmbientVector,
}

pub type PositionFn = Arc<dyn Fn(f64, f64) -> AmbientPoint + Send + Sync>;
pub type JetFn = Arc<dyn Fn(f64, f64) -> Jet + Send + Sync>;
pub type MaskFn = Arc<dyn Fn(f64, f64) -> bool + Send + Sync>;

#[derive(Clone)]
enum Source {
    Map { position: PositionFn, jet: Option<JetFn> },
    Nodes { grid: Grid, positions: Vec<AmbientPoint> },
}

/// A doubly periodic map from the parameter torus into a chart.
///
/// Periodicity is up to a constant translation of chart coordinates
/// (`winding`), which covers angle coordinates and vertical translations.
/// `sheets` counts how often the parameter torus covers the surface; integrals
/// are divided by it. The optional mask marks parameters where pointwise
/// checks are meaningful (it never affects integrals).
#[derive(Clone)]
pub struct Immersion {
    chart: Chart,
    kind: SurfaceKind,
    periods: (f64, f64),
    winding: [AmbientVector; 2],
    sheets: u32,
    source: Source,
    mask: Option<MaskFn>,
    /// Node lattice offset in units of the cell size.
    cell_offset: (f64, f64),
}

impl fmt::Debug for Immersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Immersion")
            .field("chart", &self.chart)
            .field("kind", &self.kind)
            .field("periods", &self.periods)
            .field("winding", &self.winding)
            .field("sheets", &self.sheets)
            .field("nodal", &matches!(self.source, Source::Nodes { .. }))
            .finish()
    }
}

impl Immersion {
    pub fn from_map(chart: Chart, kind: SurfaceKind, periods: (f64, f64), winding: [AmbientVector; 2], position: PositionFn) -> Self {
        Self {
            chart,
            kind,
            periods,
            winding,
            sheets: 1,
            source: Source::Map { position, jet: None },
            mask: None,
            cell_offset: (0.0, 0.0),
        }
    }

    /// Immersion known only at the nodes of `grid`; derivatives come from
    /// finite differences.
    pub fn from_nodes(chart: Chart, kind: SurfaceKind, grid: Grid, positions: Vec<AmbientPoint>, winding: [AmbientVector; 2]) -> Result<Self> {
        if positions.len() != grid.len() {
            return Err(Error::Grid(format!("{} positions for {} nodes", positions.len(), grid.len())));
        }
        Ok(Self {
            chart,
            kind,
            periods: (grid.lu, grid.lv),
            winding,
            sheets: 1,
            source: Source::Nodes { grid, positions },
            mask: None,
            cell_offset: (grid.u0 / grid.hu(), grid.v0 / grid.hv()),
        })
    }

    pub fn with_jet(mut self, jet: JetFn) -> Self {
        if let Source::Map { jet: j, .. } = &mut self.source {
            *j = Some(jet);
        }
        self
    }

    pub fn with_mask(mut self, mask: MaskFn) -> Self {
        self.mask = Some(mask);
        self
    }

    /// Shift the default node lattice by a fraction of a cell.
    pub fn with_cell_offset(mut self, du: f64, dv: f64) -> Self {
        self.cell_offset = (du, dv);
        self
    }

    pub fn with_sheets(mut self, sheets: u32) -> Self {
        self.sheets = sheets.max(1);
        self
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn periods(&self) -> (f64, f64) {
        self.periods
    }

    pub fn winding(&self) -> [AmbientVector; 2] {
        self.winding
    }

    pub fn sheets(&self) -> u32 {
        self.sheets
    }

    pub fn has_analytic_jet(&self) -> bool {
        matches!(self.source, Source::Map { jet: Some(_), .. })
    }

    /// A grid with `nu x nv` nodes matching the periods.
    pub fn grid(&self, nu: usize, nv: usize) -> Result<Grid> {
        match &self.source {
            Source::Nodes { grid, .. } if grid.nu == nu && grid.nv == nv => Ok(*grid),
            Source::Nodes { .. } => Err(Error::Grid("nodal immersion cannot be resampled".into())),
            Source::Map { .. } => {
                let g = Grid::new(nu, nv, self.periods.0, self.periods.1)?;
                Ok(g.with_origin(self.cell_offset.0 * g.hu(), self.cell_offset.1 * g.hv()))
            }
        }
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        let (lu, lv) = self.periods;
        if (grid.lu - lu).abs() > 1e-12 * lu || (grid.lv - lv).abs() > 1e-12 * lv {
            return Err(Error::Grid(format!(
                "grid periods {} x {} do not match immersion periods {lu} x {lv}",
                grid.lu, grid.lv
            )));
        }
        if let Source::Nodes { grid: own, .. } = &self.source {
            if !own.same_shape(grid) || own.u0 != grid.u0 || own.v0 != grid.v0 {
                return Err(Error::Grid("nodal immersion evaluated on a different grid".into()));
            }
        }
        Ok(())
    }

    pub fn node_positions(&self, grid: &Grid) -> Result<Vec<AmbientPoint>> {
        self.check_grid(grid)?;
        Ok(match &self.source {
            Source::Nodes { positions, .. } => positions.clone(),
            Source::Map { position, .. } => (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let (u, v) = grid.coords(k);
                    position(u, v)
                })
                .collect(),
        })
    }

    /// Jets at every node, analytic when available.
    pub fn sample_jets(&self, grid: &Grid) -> Result<Vec<Jet>> {
        self.check_grid(grid)?;
        let jets = match &self.source {
            Source::Map { jet: Some(jet), .. } => (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let (u, v) = grid.coords(k);
                    jet(u, v)
                })
                .collect(),
            _ => position_jets(grid, &self.node_positions(grid)?, &self.winding),
        };
        Ok(jets)
    }

    pub fn node_mask(&self, grid: &Grid) -> Vec<bool> {
        match &self.mask {
            None => vec![true; grid.len()],
            Some(m) => (0..grid.len())
                .map(|k| {
                    let (u, v) = grid.coords(k);
                    m(u, v)
                })
                .collect(),
        }
    }

    /// Nodal immersion displaced by `offsets` (chart components) at each node.
    pub fn displaced(&self, grid: &Grid, offsets: &[AmbientVector]) -> Result<Self> {
        let base = self.node_positions(grid)?;
        if offsets.len() != base.len() {
            return Err(Error::Grid("offset field has the wrong length".into()));
        }
        let positions: Vec<AmbientPoint> = base.iter().zip(offsets).map(|(p, d)| p + d).collect();
        for p in &positions {
            if !self.chart.contains(p) {
                return Err(Error::Domain {
                    chart: self.chart.kind().name(),
                    point: [p.x, p.y, p.z],
                });
            }
        }
        let mut out = Self::from_nodes(self.chart, self.kind, *grid, positions, self.winding)?;
        out.sheets = self.sheets;
        out.mask = self.mask.clone();
        Ok(out)
    }

    /// Same immersion with the jets dropped, so derivatives come from the
    /// finite-difference path.
    pub fn without_jet(&self) -> Self {
        let mut out = self.clone();
        if let Source::Map { jet, .. } = &mut out.source {
            *jet = None;
        }
        out
    }
}
