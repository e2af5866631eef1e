//! Pipeline stages and their artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use geomgt::marginal::{build_gaussian_table, MarginalMode};
use geomgt::rng::derive_seed;
use geomgt::sampledata::{cell_decluster, load_samples, write_samples, ColumnMap, SampleTable};
use geomgt::simulate::{simulate_conditional, RealizationSet, SimParams};
use geomgt::spatial::{
    decorrelation_metrics, experimental_variograms, fit_variogram, grid_variograms, maf_apply, maf_fit, maf_invert,
    DecorrelationMetrics, Direction, LagSpec, MafModel, VariogramModel, VariogramSet,
};
use geomgt::stats::{pearson, spearman, weighted_pearson, weighted_quantile, weighted_spearman};
use geomgt::transforms::{fit_transform, mgt_inverse_with};
use geomgt::validate::{
    cdf_rmse, energy_test, hz_test, synth_case, variogram_rmse, CorrelationReproduction, PairRmse, SynthKind,
    ValidationReport,
};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageContext};
use crate::modelfile::{file_digest, load_model, save_model, ModelBundle, Provenance};

/// Keys for per-stage seeds derived from the base seed.
pub const SEED_SYNTH: u64 = 1;
pub const SEED_TRANSFORM: u64 = 2;
pub const SEED_SIMULATE: u64 = 3;
pub const SEED_ENERGY: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Decluster,
    FitTransform,
    Maf,
    Vario,
    Simulate,
    BackTransform,
    Validate,
    Synth,
    All,
}

impl Stage {
    /// Stages run by `all`, in order.
    pub const PIPELINE: [Stage; 7] = [
        Stage::Decluster,
        Stage::FitTransform,
        Stage::Maf,
        Stage::Vario,
        Stage::Simulate,
        Stage::BackTransform,
        Stage::Validate,
    ];

    pub const ALL: [Stage; 9] = [
        Stage::Decluster,
        Stage::FitTransform,
        Stage::Maf,
        Stage::Vario,
        Stage::Simulate,
        Stage::BackTransform,
        Stage::Validate,
        Stage::Synth,
        Stage::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Decluster => "decluster",
            Stage::FitTransform => "fit-transform",
            Stage::Maf => "maf",
            Stage::Vario => "vario",
            Stage::Simulate => "simulate",
            Stage::BackTransform => "back-transform",
            Stage::Validate => "validate",
            Stage::Synth => "synth",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| CliError::Config(format!("unknown stage `{s}`")))
    }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn declustered(&self) -> PathBuf {
        self.root.join("declustered.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }
    pub fn factors(&self) -> PathBuf {
        self.root.join("factors.csv")
    }
    pub fn fit_diagnostics(&self) -> PathBuf {
        self.root.join("fit_diagnostics.csv")
    }
    pub fn maf_factors(&self) -> PathBuf {
        self.root.join("maf_factors.csv")
    }
    pub fn decorrelation_csv(&self) -> PathBuf {
        self.root.join("decorrelation.csv")
    }
    pub fn decorrelation_json(&self) -> PathBuf {
        self.root.join("decorrelation.json")
    }
    pub fn variograms(&self) -> PathBuf {
        self.root.join("variograms")
    }
    pub fn vario_fit(&self) -> PathBuf {
        self.root.join("vario_fit.csv")
    }
    pub fn gaussian(&self) -> PathBuf {
        self.root.join("realizations").join("gaussian")
    }
    pub fn original(&self) -> PathBuf {
        self.root.join("realizations").join("original")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("validation_report.json")
    }
    pub fn tables(&self) -> PathBuf {
        self.root.join("validation")
    }
    pub fn manifest(&self, stage: Stage) -> PathBuf {
        self.root.join("manifests").join(format!("{stage}.json"))
    }
    pub fn timing(&self, stage: Stage) -> PathBuf {
        self.root.join("timing").join(format!("{stage}.json"))
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/")
    }
}

/// Wall-clock record of one stage; written even when the stage fails.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub status: String,
    pub error: Option<String>,
    pub wall_seconds: f64,
    /// Seconds per realization (back-transform only).
    pub per_realization: Vec<f64>,
}

/// Runs a stage with `config.workers` threads.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> CliResult<()> {
    config.validate()?;
    fs::create_dir_all(&config.output).map_err(|e| CliError::io(&config.output, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| timed(config, stage))
}

fn timed(config: &PipelineConfig, stage: Stage) -> CliResult<()> {
    let layout = Layout::new(&config.output);
    let start = Instant::now();
    let mut timing = StageTiming { stage: stage.name().into(), ..Default::default() };
    let result = execute(config, stage, &mut timing);
    timing.wall_seconds = start.elapsed().as_secs_f64();
    match &result {
        Ok(()) => timing.status = "ok".into(),
        Err(e) => {
            timing.status = "failed".into();
            timing.error = Some(e.to_string());
        }
    }
    let written = write_json(&layout.timing(stage), &timing);
    result.and(written)
}

fn execute(config: &PipelineConfig, stage: Stage, timing: &mut StageTiming) -> CliResult<()> {
    let ctx = Ctx { config, layout: Layout::new(&config.output), stage };
    match stage {
        Stage::All => Stage::PIPELINE.into_iter().try_for_each(|s| timed(config, s)),
        Stage::Synth => ctx.synth(),
        Stage::Decluster => ctx.decluster(),
        Stage::FitTransform => ctx.fit_transform(),
        Stage::Maf => ctx.maf(),
        Stage::Vario => ctx.vario(),
        Stage::Simulate => ctx.simulate(),
        Stage::BackTransform => ctx.back_transform(timing),
        Stage::Validate => ctx.validate(),
    }
}

/// Configuration text without run-location settings (worker count, output
/// directory), so artifacts compare equal across those.
pub fn config_echo(config: &PipelineConfig) -> String {
    let mut value = toml::Table::try_from(config).expect("configuration serializes");
    value.remove("workers");
    value.remove("output");
    toml::to_string(&value).expect("configuration serializes")
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<D> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("`{}`: {e}", path.display())))
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fresh_dir(dir: &Path) -> CliResult<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Realization files in `dir`, sorted by name.
pub fn realization_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("realization_") && n.ends_with(".csv"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    Ok(files)
}

/// Reads a `node,x,y,z,<variables>` realization file into nodes × d.
pub fn read_realization(path: &Path) -> CliResult<Array2<f64>> {
    let bad = |m: String| CliError::Integrity(format!("`{}`: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let d = r.headers().map_err(|e| bad(e.to_string()))?.len().saturating_sub(4);
    if d == 0 {
        return Err(bad("no variable columns".into()));
    }
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        for f in rec.iter().skip(4) {
            data.push(f.parse::<f64>().map_err(|e| bad(e.to_string()))?);
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, d), data).map_err(|e| bad(e.to_string()))
}

fn factor_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn direction_name(d: &Direction) -> &'static str {
    match d {
        Direction::Omni => "omni",
        Direction::Horizontal { .. } => "horizontal",
        Direction::Vertical { .. } => "vertical",
    }
}

/// Normal scores of each column under the sample weights.
fn normal_scores(table: &SampleTable<f64>) -> geomgt::Result<Array2<f64>> {
    let w = table.weights().to_vec();
    let mut out = Array2::zeros((table.len(), table.dim()));
    for j in 0..table.dim() {
        let col = table.column(j);
        let t = build_gaussian_table(&col, &w, MarginalMode::NormalScore)?;
        for (i, v) in col.iter().enumerate() {
            out[[i, j]] = t.forward(*v)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Decorrelation {
    fit_lag: f64,
    mgt: DecorrelationMetrics<f64>,
    maf: Option<DecorrelationMetrics<f64>>,
    mgt_tau_mean: Option<f64>,
    mgt_kappa_mean: Option<f64>,
    maf_tau_mean: Option<f64>,
    maf_kappa_mean: Option<f64>,
}

struct Ctx<'a> {
    config: &'a PipelineConfig,
    layout: Layout,
    stage: Stage,
}

impl Ctx<'_> {
    fn name(&self) -> &'static str {
        self.stage.name()
    }

    fn require(&self, path: &Path) -> CliResult<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(CliError::Dependency { stage: self.name().into(), path: path.to_path_buf() })
        }
    }

    fn delimiter(&self) -> u8 {
        self.config.input.delimiter as u8
    }

    /// Reads a table written by an earlier stage (`x,y,z,<names>,weight`).
    fn read_table(&self, path: &Path, names: &[String]) -> CliResult<SampleTable<f64>> {
        self.require(path)?;
        let map = ColumnMap {
            x: "x".into(),
            y: "y".into(),
            z: Some("z".into()),
            variables: names.to_vec(),
            weight: Some("weight".into()),
        };
        let (t, report) = load_samples(path, &map, b',').stage(self.name())?;
        if report.dropped > 0 {
            return Err(CliError::Integrity(format!("`{}` has {} unreadable rows", path.display(), report.dropped)));
        }
        Ok(t)
    }

    fn write_table(&self, table: &SampleTable<f64>, path: &Path) -> CliResult<()> {
        write_samples(table, path, b',').stage(self.name())
    }

    fn load_bundle(&self) -> CliResult<ModelBundle> {
        let p = self.layout.model();
        self.require(&p)?;
        load_model(&p)
    }

    fn manifest(&self, inputs: &[PathBuf], outputs: &[PathBuf], details: serde_json::Value) -> CliResult<()> {
        let digests = |paths: &[PathBuf]| -> CliResult<BTreeMap<String, String>> {
            paths.iter().map(|p| Ok((self.layout.relative(p), file_digest(p)?))).collect()
        };
        let m = json!({
            "stage": self.name(),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "seed": self.config.seed,
            "config": config_echo(self.config),
            "inputs": digests(inputs)?,
            "outputs": digests(outputs)?,
            "details": details,
        });
        write_json(&self.layout.manifest(self.stage), &m)
    }

    fn synth(&self) -> CliResult<()> {
        let s = self
            .config
            .synth
            .as_ref()
            .ok_or_else(|| CliError::Config("the synth stage needs a [synth] section".into()))?;
        let spec = s.spec(derive_seed(self.config.seed, SEED_SYNTH));
        let table: SampleTable<f64> = synth_case(&spec).stage(self.name())?;
        let path = self.config.input_path();
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        write_samples(&table, &path, self.delimiter()).stage(self.name())?;
        self.manifest(&[], &[path], json!({ "spec": spec }))
    }

    fn decluster(&self) -> CliResult<()> {
        let input = self.config.input_path();
        self.require(&input)?;
        let (table, report) =
            load_samples::<f64>(&input, &self.config.input.columns, self.delimiter()).stage(self.name())?;
        let table = match self.config.decluster.cell {
            Some(cell) => {
                let w = cell_decluster(&table, cell).stage(self.name())?;
                table.reweighted(w).stage(self.name())?
            }
            None => table,
        };
        let out = self.layout.declustered();
        self.write_table(&table, &out)?;
        self.manifest(
            &[input],
            &[out],
            json!({ "rows_read": report.rows_read, "dropped": report.dropped, "kept": table.len() }),
        )
    }

    fn fit_transform(&self) -> CliResult<()> {
        let names = self.config.input.columns.variables.clone();
        let src = self.layout.declustered();
        let table = self.read_table(&src, &names)?;
        let params = self.config.transform.params(derive_seed(self.config.seed, SEED_TRANSFORM));
        let (mgt, factors) = fit_transform(table.values(), Some(table.weights()), &params).stage(self.name())?;
        let ftable = table.with_values(factors, factor_names("f", names.len())).stage(self.name())?;
        let (fpath, dpath, mpath) = (self.layout.factors(), self.layout.fit_diagnostics(), self.layout.model());
        self.write_table(&ftable, &fpath)?;
        write_rows(
            &dpath,
            &header(&["step", "diagnostic"]),
            mgt.diagnostics.iter().enumerate().map(|(i, v)| vec![(i + 1).to_string(), v.to_string()]),
        )?;
        let bundle = ModelBundle {
            method: mgt.method,
            variables: names,
            mgt,
            maf: None,
            variograms: Vec::new(),
            provenance: Provenance {
                input_digest: file_digest(&src)?,
                seed: self.config.seed,
                timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config: config_echo(self.config),
            },
        };
        save_model(&bundle, &mpath)?;
        self.manifest(&[src], &[mpath, fpath, dpath], json!({ "method": params.method(), "params": params }))
    }

    fn maf(&self) -> CliResult<()> {
        let mut bundle = self.load_bundle()?;
        let d = bundle.mgt.dim;
        let fpath = self.layout.factors();
        let factors = self.read_table(&fpath, &factor_names("f", d))?;
        let cfg = &self.config.maf;
        let maf = if cfg.enabled {
            let tol = cfg.tolerance.unwrap_or(self.config.variogram.lag_width / 2.0);
            maf_fit(factors.values(), factors.coords(), cfg.lag, tol).stage(self.name())?
        } else {
            MafModel::identity(d)
        };
        let mafs = maf_apply(&maf, factors.values()).stage(self.name())?;
        let mtable = factors.with_values(mafs, factor_names("maf", d)).stage(self.name())?;

        // Decorrelation against the normal scores of the original variables.
        let src = self.layout.declustered();
        let original = self.read_table(&src, &bundle.variables)?;
        let scores = normal_scores(&original).stage(self.name())?;
        let lags = LagSpec::new(self.config.variogram.lag_width, self.config.variogram.lag_count);
        let vario = |v: ArrayView2<f64>| experimental_variograms(factors.coords(), v, &lags, Direction::Omni);
        let reference = vario(scores.view()).stage(self.name())?;
        let mgt_m =
            decorrelation_metrics(&vario(factors.values()).stage(self.name())?, &reference).stage(self.name())?;
        let maf_m = if cfg.enabled {
            Some(decorrelation_metrics(&vario(mtable.values()).stage(self.name())?, &reference).stage(self.name())?)
        } else {
            None
        };
        let (mgt_tau_mean, mgt_kappa_mean) = mgt_m.means_up_to(cfg.lag);
        let (maf_tau_mean, maf_kappa_mean) = maf_m.as_ref().map_or((None, None), |m| m.means_up_to(cfg.lag));
        let deco = Decorrelation {
            fit_lag: cfg.lag,
            mgt: mgt_m,
            maf: maf_m,
            mgt_tau_mean,
            mgt_kappa_mean,
            maf_tau_mean,
            maf_kappa_mean,
        };

        let (mpath, ocsv, ojson, model) = (
            self.layout.maf_factors(),
            self.layout.decorrelation_csv(),
            self.layout.decorrelation_json(),
            self.layout.model(),
        );
        self.write_table(&mtable, &mpath)?;
        write_rows(
            &ocsv,
            &header(&["lag", "tau_mgt", "kappa_mgt", "tau_maf", "kappa_maf"]),
            (0..deco.mgt.lags.len()).map(|k| {
                let m = deco.maf.as_ref();
                vec![
                    deco.mgt.lags[k].to_string(),
                    opt(deco.mgt.tau[k]),
                    opt(deco.mgt.kappa[k]),
                    opt(m.and_then(|m| m.tau[k])),
                    opt(m.and_then(|m| m.kappa[k])),
                ]
            }),
        )?;
        write_json(&ojson, &deco)?;
        bundle.maf = cfg.enabled.then_some(maf);
        bundle.variograms.clear();
        save_model(&bundle, &model)?;
        self.manifest(&[fpath, src], &[model, mpath, ocsv, ojson], json!({ "enabled": cfg.enabled }))
    }

    fn vario(&self) -> CliResult<()> {
        let mut bundle = self.load_bundle()?;
        let d = bundle.mgt.dim;
        let fpath = self.layout.maf_factors();
        let f = self.read_table(&fpath, &factor_names("maf", d))?;
        let vc = &self.config.variogram;
        let dir = self.layout.variograms();
        fresh_dir(&dir)?;
        let mut sets = Vec::new();
        let mut outputs = Vec::new();
        for (direction, width) in vc.directions() {
            let set = experimental_variograms(f.coords(), f.values(), &LagSpec::new(width, vc.lag_count), direction)
                .stage(self.name())?;
            let p = dir.join(format!("{}.csv", direction_name(&direction)));
            set.write_csv(&p).stage(self.name())?;
            outputs.push(p);
            sets.push(set);
        }
        let refs: Vec<&VariogramSet<f64>> = sets.iter().collect();
        let fits =
            (0..d).map(|v| fit_variogram(&refs, v, &vc.fit)).collect::<geomgt::Result<Vec<_>>>().stage(self.name())?;
        let fit_path = self.layout.vario_fit();
        write_rows(
            &fit_path,
            &header(&["variable", "component", "sill", "range_h", "range_v", "objective", "rmse"]),
            fits.iter().enumerate().flat_map(|(v, fit)| {
                let name = format!("maf{}", v + 1);
                let m = &fit.model;
                let mut rows = vec![vec![
                    name.clone(),
                    "nugget".into(),
                    m.nugget.to_string(),
                    String::new(),
                    String::new(),
                    fit.objective.to_string(),
                    fit.rmse.to_string(),
                ]];
                rows.extend(m.structures.iter().enumerate().map(|(k, s)| {
                    vec![
                        name.clone(),
                        format!("spherical{}", k + 1),
                        s.sill.to_string(),
                        s.range_h.to_string(),
                        s.range_v.to_string(),
                        fit.objective.to_string(),
                        fit.rmse.to_string(),
                    ]
                }));
                rows
            }),
        )?;
        bundle.variograms = fits.into_iter().map(|f| f.model).collect();
        let model = self.layout.model();
        save_model(&bundle, &model)?;
        outputs.push(fit_path);
        outputs.push(model);
        self.manifest(&[fpath], &outputs, json!({ "models": bundle.variograms }))
    }

    fn simulate(&self) -> CliResult<()> {
        self.require(&self.layout.vario_fit())?;
        let bundle = self.load_bundle()?;
        let d = bundle.mgt.dim;
        if bundle.variograms.len() != d {
            return Err(CliError::Dependency { stage: self.name().into(), path: self.layout.vario_fit() });
        }
        let fpath = self.layout.maf_factors();
        let f = self.read_table(&fpath, &factor_names("maf", d))?;
        let sc = &self.config.simulation;
        let params = SimParams {
            realizations: sc.realizations,
            lines: sc.lines,
            harmonics: sc.harmonics,
            seed: derive_seed(self.config.seed, SEED_SIMULATE),
            standardize: sc.standardize,
        };
        let set = simulate_conditional(
            &bundle.variograms,
            &self.config.grid,
            f.coords(),
            f.values(),
            f.names(),
            &self.config.neighborhood,
            &params,
        )
        .stage(self.name())?;
        let dir = self.layout.gaussian();
        fresh_dir(&dir)?;
        let files = set.write_all(&dir).stage(self.name())?;
        let seeds: Vec<Vec<u64>> = (0..set.len()).map(|r| (0..d).map(|v| set.seed_of(v, r)).collect()).collect();
        self.manifest(
            &[fpath, self.layout.model()],
            &files,
            json!({
                "base_seed": params.seed,
                "params": params,
                "grid": self.config.grid,
                "neighborhood": self.config.neighborhood,
                "models": bundle.variograms,
                "realization_seeds": seeds,
            }),
        )
    }

    fn back_transform(&self, timing: &mut StageTiming) -> CliResult<()> {
        let bundle = self.load_bundle()?;
        let inputs = realization_files(&self.layout.gaussian())?;
        if inputs.is_empty() {
            return Err(CliError::Dependency {
                stage: self.name().into(),
                path: self.layout.gaussian().join("realization_0000.csv"),
            });
        }
        let dir = self.layout.original();
        fresh_dir(&dir)?;
        let mut outputs = Vec::with_capacity(inputs.len());
        for (r, path) in inputs.iter().enumerate() {
            let start = Instant::now();
            let y = read_realization(path)?;
            // MAF inverse first, then the multi-Gaussian inverse.
            let factors = match &bundle.maf {
                Some(m) => maf_invert(m, y.view()).stage(self.name())?,
                None => y,
            };
            let x = mgt_inverse_with(&bundle.mgt, factors.view(), self.config.transform.tails).stage(self.name())?;
            let set = RealizationSet {
                grid: self.config.grid,
                names: bundle.variables.clone(),
                base_seed: 0,
                fields: vec![x],
            };
            let out = dir.join(format!("realization_{r:04}.csv"));
            set.write_csv(0, &out).stage(self.name())?;
            outputs.push(out);
            timing.per_realization.push(start.elapsed().as_secs_f64());
        }
        let mut all_inputs = inputs;
        all_inputs.push(self.layout.model());
        self.manifest(
            &all_inputs,
            &outputs,
            json!({
                "maf_inverse_applied": bundle.maf.is_some(),
                "tails": self.config.transform.tails,
                "realizations": outputs.len(),
            }),
        )
    }

    fn validate(&self) -> CliResult<()> {
        let bundle = self.load_bundle()?;
        let d = bundle.mgt.dim;
        let src = self.layout.declustered();
        let original = self.read_table(&src, &bundle.variables)?;
        let fpath = self.layout.factors();
        let factors = self.read_table(&fpath, &factor_names("f", d))?;
        let mpath = self.layout.maf_factors();
        let mafs = self.read_table(&mpath, &factor_names("maf", d))?;
        let deco_path = self.layout.decorrelation_json();
        self.require(&deco_path)?;
        let deco: Decorrelation = read_json(&deco_path)?;
        let bt_manifest = self.layout.manifest(Stage::BackTransform);
        self.require(&bt_manifest)?;
        let bt: serde_json::Value = read_json(&bt_manifest)?;
        let maf_applied = bt["details"]["maf_inverse_applied"].as_bool().unwrap_or(false);

        let gfiles = realization_files(&self.layout.gaussian())?;
        let ofiles = realization_files(&self.layout.original())?;
        if gfiles.is_empty() {
            return Err(CliError::Dependency {
                stage: self.name().into(),
                path: self.layout.gaussian().join("realization_0000.csv"),
            });
        }
        if ofiles.len() != gfiles.len() {
            return Err(CliError::Dependency {
                stage: self.name().into(),
                path: self.layout.original().join("realization_0000.csv"),
            });
        }
        let sims = ofiles.iter().map(|p| read_realization(p)).collect::<CliResult<Vec<_>>>()?;
        let gauss = gfiles.iter().map(|p| read_realization(p)).collect::<CliResult<Vec<_>>>()?;
        if sims.iter().chain(&gauss).any(|s| s.ncols() != d) {
            return Err(CliError::Integrity("realization files do not match the model dimension".into()));
        }

        let w = original.weights().to_vec();
        let mut report = ValidationReport { variables: bundle.variables.clone(), ..Default::default() };

        // Histograms.
        let probs: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
        let mut cdf_rows = Vec::new();
        for j in 0..d {
            let orig = original.column(j);
            let pooled: Vec<f64> = sims.iter().flat_map(|s| s.column(j).to_vec()).collect();
            report.cdf_rmse.push(cdf_rmse(&orig, &w, &pooled).stage(self.name())?);
            let q = weighted_quantile(&orig, &w, &[0.25, 0.75]);
            report.interquartile_range.push(q[1] - q[0]);
            let qo = weighted_quantile(&orig, &w, &probs);
            let qs = weighted_quantile(&pooled, &vec![1.0; pooled.len()], &probs);
            for k in 0..probs.len() {
                cdf_rows.push(vec![
                    bundle.variables[j].clone(),
                    (k + 1).to_string(),
                    qo[k].to_string(),
                    qs[k].to_string(),
                ]);
            }
        }

        // Spatial variability in normal-score units.
        let vc = &self.config.variogram;
        let grid = &self.config.grid;
        let mut curve_rows = Vec::new();
        for (direction, width) in vc.directions() {
            let lags = LagSpec::new(width, vc.lag_count);
            let reference =
                experimental_variograms(mafs.coords(), mafs.values(), &lags, direction).stage(self.name())?;
            let sets = gauss
                .par_iter()
                .map(|g| grid_variograms(grid.counts, grid.cell, g.view(), &lags, direction))
                .collect::<geomgt::Result<Vec<_>>>()
                .stage(self.name())?;
            let rmse = variogram_rmse(&reference, &sets).stage(self.name())?;
            let dname = direction_name(&direction);
            for i in 0..d {
                for j in i..d {
                    report.variogram_rmse.push(PairRmse { direction: dname.into(), pair: (i, j), rmse: rmse[[i, j]] });
                    for k in 0..reference.len() {
                        let defined: Vec<f64> =
                            sets.iter().filter(|s| s.is_defined(k)).map(|s| s.gamma[k][[i, j]]).collect();
                        let mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
                        curve_rows.push(vec![
                            dname.into(),
                            reference.lags[k].to_string(),
                            i.to_string(),
                            j.to_string(),
                            opt(reference.is_defined(k).then(|| reference.gamma[k][[i, j]])),
                            opt(mean),
                        ]);
                    }
                }
            }
        }

        // Bivariate relationships.
        let mut corr_rows = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let (a, b) = (original.column(i), original.column(j));
                let op = weighted_pearson(&a, &b, &w).unwrap_or(f64::NAN);
                let os = weighted_spearman(&a, &b, &w).unwrap_or(f64::NAN);
                let per: Vec<(f64, f64)> = sims
                    .par_iter()
                    .map(|s| {
                        let (x, y) = (s.column(i).to_vec(), s.column(j).to_vec());
                        (pearson(&x, &y).unwrap_or(f64::NAN), spearman(&x, &y).unwrap_or(f64::NAN))
                    })
                    .collect();
                for (r, (p, s)) in per.iter().enumerate() {
                    corr_rows.push(vec![r.to_string(), i.to_string(), j.to_string(), p.to_string(), s.to_string()]);
                }
                report.correlations.push(CorrelationReproduction::new(
                    (i, j),
                    (op, os),
                    per.iter().map(|p| p.0).collect(),
                    per.iter().map(|p| p.1).collect(),
                ));
            }
        }

        // Multivariate normality of the training factors.
        report.mvn.push(hz_test(factors.values()).stage(self.name())?);
        report.mvn.push(
            energy_test(
                factors.values(),
                self.config.validation.energy_replicates,
                derive_seed(self.config.seed, SEED_ENERGY),
            )
            .stage(self.name())?,
        );

        report.tau_kappa_mgt = Some(deco.mgt);
        report.tau_kappa_maf = deco.maf;
        let inequality = self.config.validation.inequality
            || self.config.synth.as_ref().is_some_and(|s| s.kind == SynthKind::Inequality);
        if inequality && d >= 2 {
            let (ok, total) = sims.iter().fold((0usize, 0usize), |(ok, total), s| {
                let holds = s.axis_iter(Axis(0)).filter(|row| row[1] <= row[0]).count();
                (ok + holds, total + s.nrows())
            });
            report.inequality_fraction = Some(ok as f64 / total as f64);
        }
        report.maf_bypassed = self.config.maf.enabled && !maf_applied;

        let rpath = self.layout.report();
        write_json(&rpath, &report)?;
        let tdir = self.layout.tables();
        fs::create_dir_all(&tdir).map_err(|e| CliError::io(&tdir, e))?;
        let (tc, tq, tb, tv) = (
            tdir.join("correlations.csv"),
            tdir.join("cdf_quantiles.csv"),
            tdir.join("correlation_boxes.csv"),
            tdir.join("variogram_curves.csv"),
        );
        write_rows(&tc, &header(&["realization", "i", "j", "pearson", "spearman"]), corr_rows)?;
        write_rows(&tq, &header(&["variable", "percentile", "original", "simulated"]), cdf_rows)?;
        write_rows(&tv, &header(&["direction", "lag", "i", "j", "reference", "simulated_mean"]), curve_rows)?;
        let box_rows = report.correlations.iter().flat_map(|c| {
            [("pearson", c.original_pearson, c.pearson_box), ("spearman", c.original_spearman, c.spearman_box)].map(
                |(kind, orig, bx)| {
                    let mut row = vec![c.pair.0.to_string(), c.pair.1.to_string(), kind.into(), orig.to_string()];
                    match bx {
                        Some(b) => row.extend([b.min, b.q1, b.median, b.q3, b.max].map(|v| v.to_string())),
                        None => row.extend(std::iter::repeat_n(String::new(), 5)),
                    }
                    row.push(bx.is_some_and(|b| b.iqr_contains(orig)).to_string());
                    row
                },
            )
        });
        write_rows(
            &tb,
            &header(&[
                "i",
                "j",
                "coefficient",
                "original",
                "min",
                "q1",
                "median",
                "q3",
                "max",
                "iqr_contains_original",
            ]),
            box_rows,
        )?;
        let mut inputs = vec![src, fpath, mpath, deco_path, bt_manifest];
        inputs.extend(gfiles);
        inputs.extend(ofiles);
        self.manifest(&inputs, &[rpath, tc, tq, tb, tv], json!({}))
    }
}

/// Reads the validation report of a finished run.
pub fn read_report(layout: &Layout) -> CliResult<ValidationReport> {
    read_json(&layout.report())
}

/// Reads the decorrelation means (τ, κ) for MGT and MGT+MAF.
pub fn read_decorrelation_means(layout: &Layout) -> CliResult<[Option<f64>; 4]> {
    let d: Decorrelation = read_json(&layout.decorrelation_json())?;
    Ok([d.mgt_tau_mean, d.mgt_kappa_mean, d.maf_tau_mean, d.maf_kappa_mean])
}

/// Reads the fitted factor variogram models from the model file.
pub fn fitted_models(layout: &Layout) -> CliResult<Vec<VariogramModel<f64>>> {
    Ok(load_model(&layout.model())?.variograms)
}
