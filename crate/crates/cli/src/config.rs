//! Sweep configuration: the JSON schema behind `--config`, its validation,
//! and the conversion into library pipeline types.
//!
//! Relative paths in a config are resolved against the config file's own
//! directory, so a config checked in next to its data keeps working from
//! any working directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use turbench::deblur::DeblurMethod;
use turbench::eval::{DeblurStage, Pipeline, Restorer, SsimOptions, DEFAULT_TIMEOUT};
use turbench::sim::SweepGrid;
use turbench::stabilize::{FlowMethod, FlowOptions, Regularizer, StabilizerSpec};
use turbench::{Error, Result};

/// Everything a full sweep needs. `grid`, `metrics` and `workers` fall back
/// to defaults; the rest is required so a config can't silently run with a
/// wrong seed or directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gt_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub results_dir: PathBuf,
    #[serde(default)]
    pub grid: SweepGrid,
    pub master_seed: u64,
    pub pipelines: Vec<PipelineConfig>,
    #[serde(default)]
    pub metrics: SsimOptions,
    /// Worker threads; omit to use every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// One entry of `pipelines`: either a builtin stabilize(+deblur) chain or
/// an external command template.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    /// `mean` or `mg`; omit for external pipelines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilizer: Option<String>,
    /// `tv` or `nltv` (mg only, default tv).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg: Option<String>,
    /// `lk` or `tvl1` (mg only, default lk).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deblur: Option<DeblurConfig>,
    /// Shell command with `{in}` and `{out}` placeholders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<String>,
    /// External command budget in seconds (default 600).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_s: Option<f64>,
}

/// Deconvolution stage of a builtin pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeblurConfig {
    /// `wiener`, `lr` or `tv`.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nsr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Candidate Fried parameters in meters; presence switches the stage to
    /// the semi-blind grid search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0_grid: Option<Vec<f64>>,
}

fn config_err(detail: impl Into<String>) -> Error {
    Error::Config(detail.into())
}

/// Loads, resolves and validates a config file. Schema violations come
/// back with serde_json's line/column positions.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.gt_dir, &mut cfg.dataset_dir, &mut cfg.results_dir] {
        if p.is_relative() {
            *p = base.join(&p);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (p, name) in [
            (&self.gt_dir, "gt_dir"),
            (&self.dataset_dir, "dataset_dir"),
            (&self.results_dir, "results_dir"),
        ] {
            if p.as_os_str().is_empty() {
                return Err(config_err(format!("{name} must not be empty")));
            }
        }
        self.grid.validate()?;
        self.metrics.validate()?;
        if let Some(w) = self.workers {
            if w < 1 {
                return Err(config_err("workers must be >= 1"));
            }
        }
        if self.pipelines.is_empty() {
            return Err(config_err("at least one pipeline is required"));
        }
        let mut names = HashSet::new();
        for p in &self.pipelines {
            if !names.insert(p.name.as_str()) {
                return Err(config_err(format!("duplicate pipeline name {:?}", p.name)));
            }
        }
        // Converting exercises every per-pipeline check.
        self.build_pipelines().map(|_| ())
    }

    pub fn build_pipelines(&self) -> Result<Vec<Pipeline>> {
        self.pipelines.iter().map(|p| p.to_pipeline()).collect()
    }

    /// Worker count to run with: CLI override, then config, then all cores.
    pub fn effective_workers(&self, cli_override: Option<usize>) -> usize {
        cli_override
            .or(self.workers)
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            })
            .max(1)
    }
}

impl PipelineConfig {
    pub fn to_pipeline(&self) -> Result<Pipeline> {
        let at = |detail: String| config_err(format!("pipeline {:?}: {detail}", self.name));
        if self.name.is_empty() {
            return Err(config_err("pipeline name must not be empty"));
        }
        match (&self.external, &self.stabilizer) {
            (Some(_), Some(_)) => {
                Err(at("set either `external` or `stabilizer`, not both".into()))
            }
            (None, None) => Err(at("needs `stabilizer` (mean|mg) or `external`".into())),
            (Some(command), None) => {
                if self.reg.is_some() || self.flow.is_some() || self.deblur.is_some() {
                    return Err(at("`reg`/`flow`/`deblur` do not apply to external commands".into()));
                }
                let timeout = match self.timeout_s {
                    None => DEFAULT_TIMEOUT,
                    Some(s) if s > 0.0 && s.is_finite() => Duration::from_secs_f64(s),
                    Some(s) => return Err(at(format!("timeout_s = {s} must be finite and > 0"))),
                };
                let p = Pipeline {
                    name: self.name.clone(),
                    restorer: Restorer::External {
                        command: command.clone(),
                        timeout,
                    },
                };
                p.validate()?;
                Ok(p)
            }
            (None, Some(stab)) => {
                if self.timeout_s.is_some() {
                    return Err(at("`timeout_s` only applies to external commands".into()));
                }
                let spec = match stab.as_str() {
                    "mean" => {
                        if self.reg.is_some() || self.flow.is_some() {
                            return Err(at("`reg`/`flow` only apply to the mg stabilizer".into()));
                        }
                        StabilizerSpec::temporal_average()
                    }
                    "mg" => {
                        let reg = match self.reg.as_deref().unwrap_or("tv") {
                            "tv" => Regularizer::Tv,
                            "nltv" => Regularizer::Nltv,
                            other => return Err(at(format!("unknown reg {other:?} (tv|nltv)"))),
                        };
                        let mut flow = FlowOptions::default();
                        flow.method = match self.flow.as_deref().unwrap_or("lk") {
                            "lk" => FlowMethod::LucasKanade,
                            "tvl1" => FlowMethod::Tvl1,
                            other => return Err(at(format!("unknown flow {other:?} (lk|tvl1)"))),
                        };
                        StabilizerSpec::mao_gilles_spec(reg, flow)
                    }
                    "median" => {
                        return Err(at(
                            "median is available through the `stabilize` command but not in \
                             sweep pipelines; use mean or mg"
                                .into(),
                        ))
                    }
                    other => return Err(at(format!("unknown stabilizer {other:?} (mean|mg)"))),
                };
                let deblur = self.deblur.as_ref().map(|d| d.to_stage(&self.name)).transpose()?;
                let mut p = Pipeline::builtin(spec, deblur);
                p.name = self.name.clone();
                p.validate()?;
                Ok(p)
            }
        }
    }
}

impl DeblurConfig {
    fn to_stage(&self, pipeline: &str) -> Result<DeblurStage> {
        let at = |detail: String| config_err(format!("pipeline {pipeline:?} deblur: {detail}"));
        let method = match self.method.as_str() {
            "wiener" => DeblurMethod::Wiener,
            "lr" => DeblurMethod::LucyRichardson,
            "tv" => DeblurMethod::TvDeconv,
            other => return Err(at(format!("unknown method {other:?} (wiener|lr|tv)"))),
        };
        let mut stage = match &self.r0_grid {
            None => DeblurStage::model_kernel(method),
            Some(grid) => DeblurStage::semi_blind(method, grid.clone()),
        };
        if let Some(nsr) = self.nsr {
            if method != DeblurMethod::Wiener {
                return Err(at("`nsr` only applies to wiener".into()));
            }
            stage.nsr = nsr;
        }
        if let Some(iters) = self.iters {
            match method {
                DeblurMethod::LucyRichardson => stage.lr_iterations = iters,
                DeblurMethod::TvDeconv => stage.tv_iterations = iters,
                DeblurMethod::Wiener => {
                    return Err(at("`iters` does not apply to wiener".into()))
                }
            }
        }
        if let Some(lambda) = self.lambda {
            if method != DeblurMethod::TvDeconv {
                return Err(at("`lambda` only applies to tv".into()));
            }
            stage.tv_lambda = lambda;
        }
        stage.validate()?;
        Ok(stage)
    }
}

/// Parses a compact grid override like `L=1,2,3;a=1,5,9;b=14,16`. Omitted
/// axes keep the default sweep values.
pub fn parse_grid_spec(s: &str) -> Result<SweepGrid> {
    let mut grid = SweepGrid::default();
    for part in s.split(';').filter(|p| !p.trim().is_empty()) {
        let (axis, values) = part
            .split_once('=')
            .ok_or_else(|| config_err(format!("grid part {part:?} is not axis=v1,v2,...")))?;
        let values = values.trim();
        match axis.trim() {
            "L" => {
                grid.distances_km = parse_list(values, |v| v.parse::<f64>().ok())
                    .ok_or_else(|| config_err(format!("bad distance list {values:?}")))?
            }
            "a" => {
                grid.a_values = parse_list(values, |v| v.parse::<u32>().ok())
                    .ok_or_else(|| config_err(format!("bad a list {values:?}")))?
            }
            "b" => {
                grid.b_values = parse_list(values, |v| v.parse::<u32>().ok())
                    .ok_or_else(|| config_err(format!("bad b list {values:?}")))?
            }
            other => {
                return Err(config_err(format!("unknown grid axis {other:?} (L, a or b)")))
            }
        }
    }
    grid.validate()?;
    Ok(grid)
}

fn parse_list<T>(s: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .map(|v| parse(v.trim()))
        .collect::<Option<Vec<T>>>()?;
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}
