//! Experiment configuration files (TOML).
//!
//! ```toml
//! experiment = "barycentre"
//! output_dir = "out/river-barycentre"
//!
//! [geometry]
//! name = "river"
//! beta = 5.0
//!
//! [dataset]
//! kind = "river_band"
//! n = 200
//! seed = 7
//! noise_sigma = 0.1
//!
//! [solver]
//! tol = 1e-2
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use isogeo_core::{registry, LineSearchConfig, QuadratureConfig};
use serde::{Deserialize, Serialize};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "ISOGEO_OUTPUT_DIR";

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Geodesic,
    Barycentre,
    Kmeans,
    Inverse,
    Ratios,
    Rankr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub geodesic: Option<GeodesicSpec>,
    #[serde(default)]
    pub kmeans: Option<KMeansSpec>,
    #[serde(default)]
    pub ratios: Option<RatiosSpec>,
    #[serde(default)]
    pub inverse: Option<InverseSpec>,
    #[serde(default)]
    pub rankr: Option<RankSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Registry name plus numeric parameters, e.g. `name = "river"`, `beta = 5.0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub name: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    RiverBand,
    SpiralBand,
    Band,
    TwoClusters,
    Grid,
    CustomPoints,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Range of the along-band parameter (bands).
    #[serde(default)]
    pub param_range: Option<[f64; 2]>,
    /// One along-band parameter range per cluster (`two_clusters`).
    #[serde(default)]
    pub ranges: Option<Vec<[f64; 2]>>,
    /// Per-axis `[lo, hi]` of a regular grid with `n` points per axis (`grid`).
    #[serde(default)]
    pub extent: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub labels: Option<Vec<usize>>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub r0: f64,
    pub c: f64,
    pub max_backtracks: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = LineSearchConfig::default();
        SolverSpec {
            r0: d.r0,
            c: d.c,
            max_backtracks: d.max_backtracks,
            max_iters: d.max_iters,
            tol: d.tol,
        }
    }
}

impl SolverSpec {
    pub fn line_search(&self) -> LineSearchConfig {
        LineSearchConfig {
            r0: self.r0,
            c: self.c,
            max_backtracks: self.max_backtracks,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub panel_tol: f64,
    pub refine_tol: f64,
    pub max_bracket_doublings: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        let d = QuadratureConfig::default();
        QuadratureSpec {
            panels: d.panels,
            nodes_per_panel: d.nodes_per_panel,
            panel_tol: d.panel_tol,
            refine_tol: d.refine_tol,
            max_bracket_doublings: d.max_bracket_doublings,
        }
    }
}

impl QuadratureSpec {
    pub fn config(&self) -> QuadratureConfig {
        QuadratureConfig {
            panels: self.panels,
            nodes_per_panel: self.nodes_per_panel,
            panel_tol: self.panel_tol,
            refine_tol: self.refine_tol,
            max_bracket_doublings: self.max_bracket_doublings,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KMeansSpec {
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldChoice {
    #[default]
    Iso,
    Plain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatiosSpec {
    /// Per-axis `[lo, hi]` of the evaluation grid.
    pub extent: Vec<[f64; 2]>,
    pub steps: usize,
    #[serde(default)]
    pub field: FieldChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Seeded `rows × d` matrix with standard normal entries.
    #[default]
    Gaussian,
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseSpec {
    /// φ-coordinates of the submanifold's base point.
    pub phi_base: Vec<f64>,
    /// φ-coordinate direction of the 1D submanifold.
    pub phi_direction: Vec<f64>,
    #[serde(default)]
    pub operator: OperatorKind,
    /// Rows of the Gaussian forward operator.
    #[serde(default = "one")]
    pub rows: usize,
    #[serde(default)]
    pub seed: u64,
    /// Submanifold coordinate of the ground truth; `b = A x_true + noise`.
    #[serde(default)]
    pub truth: Option<f64>,
    /// Explicit data vector, used instead of `truth`.
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Submanifold coordinate of the starting point.
    pub start: f64,
    /// Range and resolution of the brute-force objective profile.
    pub param_range: [f64; 2],
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Number of points of the convexity-term profile along the range.
    #[serde(default = "default_profile_points")]
    pub profile_points: usize,
}

fn default_grid_points() -> usize {
    100_000
}

fn default_profile_points() -> usize {
    401
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSpec {
    pub rank: usize,
    /// Defaults to the closed-form barycentre of the data.
    #[serde(default)]
    pub base: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// `output_dir`, unless overridden by the environment.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn dim(&self) -> Result<usize, ConfigError> {
        registry::build(&self.geometry.name, &self.geometry.params)
            .map(|d| d.dim())
            .map_err(|e| ConfigError(format!("[geometry]: {e}")))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = self.dim()?;
        self.solver
            .line_search()
            .validate()
            .map_err(|e| ConfigError(format!("[solver]: {e}")))?;
        self.quadrature
            .config()
            .validate()
            .map_err(|e| ConfigError(format!("[quadrature]: {e}")))?;
        if let Some(ds) = &self.dataset {
            ds.validate(d, &self.geometry.name)?;
        }

        let needs_data = |what: &str| -> Result<&DatasetSpec, ConfigError> {
            self.dataset
                .as_ref()
                .ok_or_else(|| ConfigError(format!("the {what} experiment needs a [dataset] section")))
        };
        match self.experiment {
            ExperimentKind::Geodesic => {
                let Some(g) = &self.geodesic else {
                    return invalid("the geodesic experiment needs a [geodesic] section");
                };
                if g.from.len() != d || g.to.len() != d {
                    return invalid(format!("[geodesic]: from/to must have {d} coordinates"));
                }
                if g.samples < 2 {
                    return invalid("[geodesic]: samples must be at least 2");
                }
            }
            ExperimentKind::Barycentre => {
                needs_data("barycentre")?;
            }
            ExperimentKind::Kmeans => {
                let ds = needs_data("kmeans")?;
                let Some(k) = &self.kmeans else {
                    return invalid("the kmeans experiment needs a [kmeans] section");
                };
                if k.k == 0 {
                    return invalid("[kmeans]: k must be positive");
                }
                if ds.kind == DatasetKind::TwoClusters && k.k > 2 * ds.n {
                    return invalid("[kmeans]: k exceeds the number of points");
                }
            }
            ExperimentKind::Ratios => {
                needs_data("ratios")?;
                let Some(r) = &self.ratios else {
                    return invalid("the ratios experiment needs a [ratios] section");
                };
                if r.extent.len() != d {
                    return invalid(format!("[ratios]: extent needs {d} ranges"));
                }
                if r.steps < 2 {
                    return invalid("[ratios]: steps must be at least 2");
                }
                check_ranges("[ratios].extent", &r.extent)?;
            }
            ExperimentKind::Inverse => {
                let Some(inv) = &self.inverse else {
                    return invalid("the inverse experiment needs an [inverse] section");
                };
                if inv.phi_base.len() != d || inv.phi_direction.len() != d {
                    return invalid(format!("[inverse]: phi_base/phi_direction need {d} coordinates"));
                }
                if inv.rows == 0 || inv.grid_points < 2 || inv.profile_points < 2 {
                    return invalid("[inverse]: rows must be positive and point counts at least 2");
                }
                let rows = match inv.operator {
                    OperatorKind::Gaussian => inv.rows,
                    OperatorKind::Identity => d,
                };
                match (&inv.b, inv.truth) {
                    (Some(b), None) if b.len() == rows => {}
                    (Some(_), None) => return invalid(format!("[inverse]: b needs {rows} entries")),
                    (None, Some(_)) => {}
                    _ => return invalid("[inverse]: give exactly one of `truth` and `b`"),
                }
                if inv.noise_sigma < 0.0 {
                    return invalid("[inverse]: noise_sigma must be non-negative");
                }
                check_ranges("[inverse].param_range", &[inv.param_range])?;
            }
            ExperimentKind::Rankr => {
                needs_data("rankr")?;
                let Some(r) = &self.rankr else {
                    return invalid("the rankr experiment needs a [rankr] section");
                };
                if r.rank == 0 || r.rank > d {
                    return invalid(format!("[rankr]: rank must be in 1..={d}"));
                }
                if r.base.as_ref().is_some_and(|b| b.len() != d) {
                    return invalid(format!("[rankr]: base needs {d} coordinates"));
                }
            }
        }
        Ok(())
    }
}

fn check_ranges(what: &str, ranges: &[[f64; 2]]) -> Result<(), ConfigError> {
    for r in ranges {
        if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
            return invalid(format!("{what}: range {r:?} must satisfy lo < hi"));
        }
    }
    Ok(())
}

impl DatasetSpec {
    fn validate(&self, d: usize, geometry: &str) -> Result<(), ConfigError> {
        if self.n == 0 {
            return invalid("[dataset]: n must be at least 1");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid("[dataset]: noise_sigma must be non-negative");
        }
        let stochastic = matches!(
            self.kind,
            DatasetKind::RiverBand | DatasetKind::SpiralBand | DatasetKind::Band | DatasetKind::TwoClusters
        );
        if stochastic && self.seed.is_none() {
            return invalid("[dataset]: seed is required for sampled datasets");
        }
        match self.kind {
            DatasetKind::RiverBand if geometry != "river" => {
                return invalid("[dataset]: river_band needs the river geometry (use `band` otherwise)");
            }
            DatasetKind::SpiralBand if geometry != "spiral" => {
                return invalid("[dataset]: spiral_band needs the spiral geometry (use `band` otherwise)");
            }
            DatasetKind::TwoClusters => {
                let Some(ranges) = &self.ranges else {
                    return invalid("[dataset]: two_clusters needs `ranges`");
                };
                if ranges.len() != 2 {
                    return invalid("[dataset]: two_clusters needs exactly two ranges");
                }
                check_ranges("[dataset].ranges", ranges)?;
            }
            DatasetKind::Grid => {
                let Some(extent) = &self.extent else {
                    return invalid("[dataset]: grid needs `extent`");
                };
                if extent.len() != d {
                    return invalid(format!("[dataset]: grid extent needs {d} ranges"));
                }
                check_ranges("[dataset].extent", extent)?;
            }
            DatasetKind::CustomPoints => {
                let Some(points) = &self.points else {
                    return invalid("[dataset]: custom_points needs `points`");
                };
                if points.is_empty() || points.iter().any(|p| p.len() != d) {
                    return invalid(format!("[dataset]: points must be non-empty lists of {d} coordinates"));
                }
                if self.labels.as_ref().is_some_and(|l| l.len() != points.len()) {
                    return invalid("[dataset]: labels must match points in length");
                }
            }
            _ => {}
        }
        if let Some(r) = self.param_range {
            check_ranges("[dataset].param_range", &[r])?;
        }
        Ok(())
    }
}
