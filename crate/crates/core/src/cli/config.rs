//! Run configuration: TOML, or JSON when the file ends in `.json`.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::ambient::{ChartKind, ModelParams};
use crate::canonical::{
    clifford_torus, critical_radius, hopf_cylinder, hopf_torus, perturbed_torus, product_slice, CurveSpec,
    HopfTorusSpec,
};
use crate::error::{Error, Result};
use crate::surface::Immersion;
use crate::verify::{CheckId, Tolerances};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `"all"` or a list of check ids.
    #[serde(default)]
    pub checks: CheckSelection,
    pub model: ModelParams,
    /// Optional; must agree with the chart the surface lives in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartKind>,
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSelection {
    Named(String),
    List(Vec<String>),
}

impl Default for CheckSelection {
    fn default() -> Self {
        CheckSelection::Named("all".into())
    }
}

impl CheckSelection {
    pub fn resolve(&self) -> Result<Vec<CheckId>> {
        match self {
            CheckSelection::Named(s) if s == "all" => Ok(CheckId::ALL.to_vec()),
            CheckSelection::Named(s) => Ok(vec![s.parse()?]),
            CheckSelection::List(v) => v.iter().map(|s| s.parse()).collect(),
        }
    }
}

fn default_r() -> f64 {
    0.6
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_modes() -> [u32; 2] {
    [2, 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    HopfTorus {
        r: f64,
    },
    Clifford {},
    /// The Hopf torus with `H = sqrt((2 tau^2 - kappa)/2)`.
    Critical {},
    Perturbed {
        #[serde(default = "default_r")]
        r: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_modes")]
        modes: [u32; 2],
    },
    Cylinder {
        curve: CurveSpec,
        height: f64,
    },
    Slice {
        #[serde(default)]
        z0: f64,
    },
}

impl SurfaceConfig {
    pub fn chart_kind(&self) -> ChartKind {
        match self {
            SurfaceConfig::Cylinder { .. } | SurfaceConfig::Slice { .. } => ChartKind::Bcv,
            _ => ChartKind::Hopf,
        }
    }

    pub fn build(&self, model: &ModelParams) -> Result<Immersion> {
        match self {
            SurfaceConfig::HopfTorus { r } => hopf_torus(&HopfTorusSpec::new(*model, *r)?),
            SurfaceConfig::Clifford {} => clifford_torus(model),
            SurfaceConfig::Critical {} => hopf_torus(&HopfTorusSpec::new(*model, critical_radius(model)?.r)?),
            SurfaceConfig::Perturbed { r, epsilon, modes } => perturbed_torus(model, *r, *epsilon, (modes[0], modes[1])),
            SurfaceConfig::Cylinder { curve, height } => hopf_cylinder(model, curve, *height),
            SurfaceConfig::Slice { z0 } => product_slice(model, *z0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nu: usize,
    pub nv: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nu: 128, nv: 128 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    /// Descent over the Hopf-torus family.
    Radius,
    /// Nodal descent along `-G N` on the configured surface.
    Graph,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub enabled: bool,
    pub mode: FlowMode,
    pub r0: f64,
    pub max_steps: usize,
    pub tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mode: FlowMode::Radius,
            r0: 0.4,
            max_steps: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub check: String,
    pub sizes: Vec<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            check: CheckId::Simons.as_str().into(),
            sizes: vec![32, 64, 128, 256],
        }
    }
}

/// Absolute overrides of the default tolerance policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointwise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kato: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reverse_kato: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_assembly: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant_ke: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, mut t: Tolerances) -> Tolerances {
        let pick = |o: Option<f64>, d: f64| o.unwrap_or(d);
        t.pointwise = pick(self.pointwise, t.pointwise);
        t.integral = pick(self.integral, t.integral);
        t.equality = pick(self.equality, t.equality);
        t.kato = pick(self.kato, t.kato);
        t.reverse_kato = pick(self.reverse_kato, t.reverse_kato);
        t.cross_assembly = pick(self.cross_assembly, t.cross_assembly);
        t.constant_ke = pick(self.constant_ke, t.constant_ke);
        t
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_str_as(text: &str, json: bool) -> Result<Self> {
        let cfg: RunConfig = if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str_as(&text, json)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(chart) = self.chart {
            let needed = self.surface.chart_kind();
            if chart != needed {
                return Err(Error::Config(format!(
                    "surface lives in the {} chart, config asks for {}",
                    needed.name(),
                    chart.name()
                )));
            }
        }
        if self.grid.nu < 16 || self.grid.nv < 16 {
            return Err(Error::Config("grids need at least 16 nodes per direction".into()));
        }
        self.checks.resolve()?;
        Ok(())
    }

    pub fn with_grid(mut self, n: Option<usize>) -> Self {
        if let Some(n) = n {
            self.grid = GridConfig { nu: n, nv: n };
        }
        self
    }
}
