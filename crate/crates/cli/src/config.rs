//! Pipeline configuration (TOML).

use std::path::{Path, PathBuf};

use geomgt::marginal::{MarginalMode, Tails};
use geomgt::sampledata::ColumnMap;
use geomgt::simulate::{GridSpec, NeighborhoodSpec, TbParams, DEFAULT_HARMONICS, DEFAULT_LINES};
use geomgt::spatial::{Direction, FitSpec, Spherical, VariogramModel};
use geomgt::transforms::{FaParams, Method, MethodParams, PpmtParams, RbigParams, RotationKind, DEFAULT_ITERATIONS};
use geomgt::validate::{SynthKind, SynthSpec, DEFAULT_REPLICATES};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub decluster: DeclusterConfig,
    #[serde(default)]
    pub transform: TransformConfig,
    #[serde(default)]
    pub maf: MafConfig,
    #[serde(default)]
    pub variogram: VariogramConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub neighborhood: NeighborhoodSpec,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

fn one() -> usize {
    1
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Sample table; relative paths resolve against the output directory.
    #[serde(default = "default_input")]
    pub path: PathBuf,
    #[serde(default = "comma")]
    pub delimiter: char,
    #[serde(default = "default_columns")]
    pub columns: ColumnMap,
}

fn default_input() -> PathBuf {
    PathBuf::from("samples.csv")
}

fn comma() -> char {
    ','
}

fn default_columns() -> ColumnMap {
    ColumnMap {
        x: "x".into(),
        y: "y".into(),
        z: Some("z".into()),
        variables: vec!["v1".into(), "v2".into()],
        weight: None,
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        Self { path: default_input(), delimiter: comma(), columns: default_columns() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclusterConfig {
    /// Cell size; no declustering when absent.
    pub cell: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    pub method: Method,
    pub iterations: usize,
    /// Histogram-equalization bins for RBIG with PCA rotations.
    pub bins: usize,
    /// Back-transform rule for scores beyond the extreme table knots.
    pub tails: Tails,
    pub sigma0: f64,
    pub sigma1: f64,
    pub chain: usize,
    pub steps: usize,
    pub restarts: usize,
    pub index_order: usize,
    /// Seed override for the transform; derived from the base seed otherwise.
    pub seed: Option<u64>,
}

impl Default for TransformConfig {
    fn default() -> Self {
        let fa = FaParams::default();
        let pp = PpmtParams::default();
        Self {
            method: Method::RbigPca,
            iterations: DEFAULT_ITERATIONS,
            bins: MarginalMode::DEFAULT_BINS,
            tails: Tails::Clamp,
            sigma0: fa.sigma0,
            sigma1: fa.sigma1,
            chain: fa.chain,
            steps: fa.steps,
            restarts: pp.restarts,
            index_order: pp.index_order,
            seed: None,
        }
    }
}

impl TransformConfig {
    /// Method parameters; flow factors are re-standardized so that the
    /// transposed MAF matrix inverts exactly.
    pub fn params(&self, seed: u64) -> MethodParams {
        match self.method {
            Method::RbigPca | Method::RbigIca => MethodParams::Rbig(RbigParams {
                iterations: self.iterations,
                rotation: if self.method == Method::RbigPca { RotationKind::Pca } else { RotationKind::Ica },
                marginal: if self.method == Method::RbigPca {
                    MarginalMode::HistogramEqualization { bins: self.bins }
                } else {
                    MarginalMode::NormalScore
                },
                ..RbigParams::default()
            }),
            Method::Ppmt => MethodParams::Ppmt(PpmtParams {
                iterations: self.iterations,
                restarts: self.restarts,
                index_order: self.index_order,
                seed: self.seed.unwrap_or(seed),
            }),
            Method::Fa => MethodParams::Fa(FaParams {
                sigma0: self.sigma0,
                sigma1: self.sigma1,
                steps: self.steps,
                chain: self.chain,
                standardize_output: true,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MafConfig {
    pub enabled: bool,
    pub lag: f64,
    /// Half-width of the lag class; half the variogram lag width by default.
    pub tolerance: Option<f64>,
}

impl Default for MafConfig {
    fn default() -> Self {
        Self { enabled: true, lag: 50.0, tolerance: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionSet {
    Omni,
    HorizontalVertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariogramConfig {
    pub lag_width: f64,
    pub lag_count: usize,
    pub directions: DirectionSet,
    pub angle_tolerance_deg: f64,
    /// Lag width for the vertical direction; `lag_width` when absent.
    pub vertical_lag_width: Option<f64>,
    pub fit: FitSpec,
}

impl Default for VariogramConfig {
    fn default() -> Self {
        Self {
            lag_width: 25.0,
            lag_count: 12,
            directions: DirectionSet::Omni,
            angle_tolerance_deg: 22.5,
            vertical_lag_width: None,
            fit: FitSpec { total_sill: Some(1.0), ..FitSpec::default() },
        }
    }
}

impl VariogramConfig {
    pub fn directions(&self) -> Vec<(Direction, f64)> {
        match self.directions {
            DirectionSet::Omni => vec![(Direction::Omni, self.lag_width)],
            DirectionSet::HorizontalVertical => vec![
                (Direction::Horizontal { tolerance_deg: self.angle_tolerance_deg }, self.lag_width),
                (
                    Direction::Vertical { tolerance_deg: self.angle_tolerance_deg },
                    self.vertical_lag_width.unwrap_or(self.lag_width),
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub realizations: usize,
    pub lines: usize,
    pub harmonics: usize,
    pub standardize: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { realizations: 10, lines: DEFAULT_LINES, harmonics: DEFAULT_HARMONICS, standardize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub energy_replicates: usize,
    /// Report the fraction of simulated pairs with second ≤ first variable.
    pub inequality: bool,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self { energy_replicates: DEFAULT_REPLICATES, inequality: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub n: usize,
    #[serde(default = "default_extent")]
    pub extent: [f64; 3],
    #[serde(default = "default_nugget")]
    pub nugget: f64,
    /// `(sill, horizontal range, vertical range)` per spherical structure.
    #[serde(default = "default_structures")]
    pub structures: Vec<[f64; 3]>,
    #[serde(default = "default_synth_lines")]
    pub lines: usize,
    #[serde(default = "default_synth_harmonics")]
    pub harmonics: usize,
}

fn default_extent() -> [f64; 3] {
    [1000.0, 1000.0, 0.0]
}

fn default_nugget() -> f64 {
    0.05
}

fn default_structures() -> Vec<[f64; 3]> {
    vec![[0.95, 200.0, 200.0]]
}

fn default_synth_lines() -> usize {
    DEFAULT_LINES
}

fn default_synth_harmonics() -> usize {
    DEFAULT_HARMONICS
}

impl SynthConfig {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            kind: self.kind,
            n: self.n,
            extent: self.extent,
            model: VariogramModel {
                nugget: self.nugget,
                structures: self
                    .structures
                    .iter()
                    .map(|s| Spherical { sill: s[0], range_h: s[1], range_v: s[2] })
                    .collect(),
            },
            seed,
            tb: TbParams { lines: self.lines, harmonics: self.harmonics, standardize: false },
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        for seed in std::iter::once(self.seed).chain(self.transform.seed) {
            if seed > i64::MAX as u64 {
                return bad(format!("seed {seed} exceeds the TOML integer range"));
            }
        }
        if self.simulation.realizations == 0 {
            return bad("realization count must be at least 1".into());
        }
        let t = &self.transform;
        if t.iterations == 0 || t.bins < 2 || t.steps == 0 || t.chain == 0 || t.restarts == 0 {
            return bad("transform iterations, steps, chain and restarts must be positive and bins at least 2".into());
        }
        if !(t.sigma0 > 0.0 && t.sigma1 > t.sigma0) {
            return bad("flow bandwidths must satisfy 0 < sigma0 < sigma1".into());
        }
        if self.maf.enabled && !(self.maf.lag > 0.0) {
            return bad("MAF lag must be positive".into());
        }
        if !(self.variogram.lag_width > 0.0) || self.variogram.lag_count == 0 {
            return bad("variogram lag width and count must be positive".into());
        }
        if let Some(c) = self.decluster.cell {
            if c.iter().any(|v| !(*v > 0.0)) {
                return bad("declustering cell sizes must be positive".into());
            }
        }
        if self.input.columns.variables.is_empty() {
            return bad("at least one variable column is required".into());
        }
        if self.validation.energy_replicates == 0 {
            return bad("energy replicates must be at least 1".into());
        }
        self.grid.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.neighborhood.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.simulation.lines < geomgt::simulate::MIN_LINES || self.simulation.harmonics == 0 {
            return bad(format!("simulation needs at least {} lines and one harmonic", geomgt::simulate::MIN_LINES));
        }
        if let Some(s) = &self.synth {
            if s.n < 100 {
                return bad("synthetic cases need n ≥ 100".into());
            }
        }
        Ok(())
    }

    /// Input table path, resolved against the output directory when relative.
    pub fn input_path(&self) -> PathBuf {
        if self.input.path.is_absolute() {
            self.input.path.clone()
        } else {
            self.output.join(&self.input.path)
        }
    }
}
