//! The six subcommands. Each returns the process exit code: 0 success,
//! 1 usage/config error (mapped in main), 2 partial failures, 3 fatal.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use turbench::deblur::{deconvolve, semiblind_deconvolve, DeblurMethod, DeblurSpec};
use turbench::eval::{
    aggregate, evaluate, read_records, render_table, EvalSummary, GroupBy, GroupStat, Pipeline,
    Restorer,
};
use turbench::par;
use turbench::raster::{load_image, save_image};
use turbench::sim::{
    build_dataset, fitting_kernel_size, load_sequence_dir, long_exposure_kernel, DatasetManifest,
    SequenceParamsFile, TurbulenceParams,
};
use turbench::stabilize::{
    stabilize, temporal_median, FlowMethod, FlowOptions, Regularizer, StabilizeResult,
    StabilizerSpec,
};
use turbench::{Error, Result};

use crate::config::{load_config, parse_grid_spec, RunConfig};

/// Flags shared by every subcommand.
pub struct GlobalOpts {
    pub config: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

impl GlobalOpts {
    fn require_config(&self) -> Result<RunConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("--config <file> is required here".into()))?;
        let mut cfg = load_config(path)?;
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        Ok(cfg)
    }
}

fn workers_or_all(n: Option<usize>) -> usize {
    n.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

// ---------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub gt_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub grid: Option<String>,
}

/// Builds the degraded-sequence dataset. Flags override the config; either
/// source may supply each value.
pub fn cmd_simulate(args: &SimulateArgs, global: &GlobalOpts) -> Result<i32> {
    let cfg = match &global.config {
        Some(path) => Some({
            let mut c = load_config(path)?;
            if let Some(seed) = global.seed {
                c.master_seed = seed;
            }
            c
        }),
        None => None,
    };
    let gt_dir = args
        .gt_dir
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.gt_dir.clone()))
        .ok_or_else(|| Error::Config("simulate needs --gt-dir or a config".into()))?;
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| cfg.as_ref().map(|c| c.dataset_dir.clone()))
        .ok_or_else(|| Error::Config("simulate needs --out-dir or a config".into()))?;
    let seed = global
        .seed
        .or(cfg.as_ref().map(|c| c.master_seed))
        .ok_or_else(|| Error::Config("simulate needs --seed or a config".into()))?;
    let grid = match &args.grid {
        Some(spec) => parse_grid_spec(spec)?,
        None => cfg.as_ref().map(|c| c.grid.clone()).unwrap_or_default(),
    };

    let workers = workers_or_all(global.workers.or(cfg.as_ref().and_then(|c| c.workers)));
    let started = Instant::now();
    let manifest = par::with_workers(workers, || build_dataset(&gt_dir, &grid, &out_dir, seed))?;
    println!(
        "wrote {} sequences ({} grid cells) to {} in {:.1} s",
        manifest.rows.len(),
        grid.combinations().len(),
        out_dir.display(),
        started.elapsed().as_secs_f64()
    );
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    Ok(0)
}

// --------------------------------------------------------------- stabilize

pub struct StabilizeArgs {
    pub input: PathBuf,
    pub method: String,
    pub reg: String,
    pub flow: String,
    pub out: PathBuf,
}

/// What `stabilize` records next to its output image.
#[derive(Serialize)]
struct StabilizeSidecar<'a> {
    method: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reg: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flow: Option<&'a str>,
    outer_iterations: Option<usize>,
    fusion_mu: Option<f64>,
    /// Fusion objective after each outer iteration (mg only).
    objectives: Vec<f64>,
    wall_ms: f64,
}

pub fn cmd_stabilize(args: &StabilizeArgs, global: &GlobalOpts) -> Result<i32> {
    let seq = load_sequence_dir(&args.input)?;
    let started = Instant::now();
    let workers = workers_or_all(global.workers);
    let (result, spec) = par::with_workers(workers, || -> Result<_> {
        match args.method.as_str() {
            "mean" => {
                let spec = StabilizerSpec::temporal_average();
                Ok((stabilize(&seq, &spec)?, Some(spec)))
            }
            "median" => Ok((
                StabilizeResult {
                    image: temporal_median(&seq)?,
                    objectives: Vec::new(),
                },
                None,
            )),
            "mg" => {
                let reg = match args.reg.as_str() {
                    "tv" => Regularizer::Tv,
                    "nltv" => Regularizer::Nltv,
                    other => return Err(Error::Config(format!("unknown --reg {other:?}"))),
                };
                let mut flow = FlowOptions::default();
                flow.method = match args.flow.as_str() {
                    "lk" => FlowMethod::LucasKanade,
                    "tvl1" => FlowMethod::Tvl1,
                    other => return Err(Error::Config(format!("unknown --flow {other:?}"))),
                };
                let spec = StabilizerSpec::mao_gilles_spec(reg, flow);
                Ok((stabilize(&seq, &spec)?, Some(spec)))
            }
            other => Err(Error::Config(format!(
                "unknown --method {other:?} (mean|median|mg)"
            ))),
        }
    })?;
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    save_image(&args.out, &result.image)?;
    let is_mg = args.method == "mg";
    let sidecar = StabilizeSidecar {
        method: &args.method,
        reg: is_mg.then_some(args.reg.as_str()),
        flow: is_mg.then_some(args.flow.as_str()),
        outer_iterations: spec.as_ref().filter(|_| is_mg).map(|s| s.outer_iterations),
        fusion_mu: spec.as_ref().filter(|_| is_mg).map(|s| s.fusion_mu),
        objectives: result.objectives,
        wall_ms,
    };
    let sidecar_path = args.out.with_file_name("stabilize.json");
    fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).expect("sidecar serialize"),
    )
    .map_err(|e| Error::io(&sidecar_path, e))?;
    println!(
        "stabilized {} frames -> {} ({:.0} ms)",
        seq.len(),
        args.out.display(),
        wall_ms
    );
    Ok(0)
}

// ------------------------------------------------------------------ deblur

pub struct DeblurArgs {
    pub input: PathBuf,
    pub method: String,
    pub nsr: Option<f64>,
    pub iters: Option<usize>,
    pub lambda: Option<f64>,
    pub semiblind: bool,
    pub r0_grid: Vec<f64>,
    pub params: PathBuf,
    pub out: PathBuf,
}

/// Scenario parameters from either a sequence sidecar (params.json with
/// scene bookkeeping) or a bare parameter file.
fn load_params(path: &Path) -> Result<TurbulenceParams> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if let Ok(sidecar) = serde_json::from_str::<SequenceParamsFile>(&text) {
        return Ok(sidecar.params);
    }
    serde_json::from_str::<TurbulenceParams>(&text).map_err(|e| Error::CorruptFile {
        path: path.to_path_buf(),
        detail: format!("neither a sequence sidecar nor bare scenario parameters: {e}"),
    })
}

pub fn cmd_deblur(args: &DeblurArgs, global: &GlobalOpts) -> Result<i32> {
    let img = load_image(&args.input)?;
    let params = load_params(&args.params)?;
    let method = match args.method.as_str() {
        "wiener" => DeblurMethod::Wiener,
        "lr" => DeblurMethod::LucyRichardson,
        "tv" => DeblurMethod::TvDeconv,
        other => {
            return Err(Error::Config(format!(
                "unknown --method {other:?} (wiener|lr|tv)"
            )))
        }
    };
    if args.semiblind && args.r0_grid.is_empty() {
        return Err(Error::Config("--semiblind needs --r0-grid 0.01,0.02,...".into()));
    }
    if !args.semiblind && !args.r0_grid.is_empty() {
        return Err(Error::Config("--r0-grid only applies with --semiblind".into()));
    }

    let size = fitting_kernel_size(img.width(), img.height());
    let override_spec = |mut spec: DeblurSpec| -> Result<DeblurSpec> {
        if let Some(nsr) = args.nsr {
            spec.nsr = nsr;
        }
        if let Some(iters) = args.iters {
            match method {
                DeblurMethod::LucyRichardson => spec.lr_iterations = iters,
                DeblurMethod::TvDeconv => spec.tv_iterations = iters,
                DeblurMethod::Wiener => {
                    return Err(Error::Config("--iters does not apply to wiener".into()))
                }
            }
        }
        if let Some(lambda) = args.lambda {
            if method != DeblurMethod::TvDeconv {
                return Err(Error::Config("--lambda only applies to tv".into()));
            }
            spec.tv_lambda = lambda;
        }
        spec.validate()?;
        Ok(spec)
    };

    let workers = workers_or_all(global.workers);
    let restored = par::with_workers(workers, || -> Result<_> {
        if args.semiblind {
            let spec = override_spec(DeblurSpec::semi_blind(method, args.r0_grid.clone()))?;
            let (restored, r0) = semiblind_deconvolve(&img, &params, &spec)?;
            println!("chosen r0 = {r0} m");
            Ok(restored)
        } else {
            let kernel = long_exposure_kernel(&params, size)?;
            let spec = override_spec(DeblurSpec::with_kernel(method, kernel.clone()))?;
            deconvolve(&img, &kernel, &spec)
        }
    })?;
    save_image(&args.out, &restored)?;
    println!("deblurred {} -> {}", args.input.display(), args.out.display());
    Ok(0)
}

// --------------------------------------------------------------------- run

/// Machine-readable record of one `run` invocation.
#[derive(Serialize)]
struct RunManifestFile<'a> {
    version: &'a str,
    config: &'a RunConfig,
    workers: usize,
    stages_ms: StageTimes,
    rows: RowCounts,
}

#[derive(Serialize)]
struct StageTimes {
    simulate: f64,
    evaluate: f64,
}

#[derive(Serialize)]
struct RowCounts {
    total: usize,
    ok: usize,
    failed: usize,
    from_cache: usize,
}

/// First program word of a shell command template, for the fail-fast
/// existence check. Leading VAR=value assignments are skipped.
fn first_program(command: &str) -> Option<&str> {
    command.split_whitespace().find(|t| !t.contains('='))
}

fn program_on_path(prog: &str) -> bool {
    if prog.contains('/') {
        return Path::new(prog).exists();
    }
    std::env::var_os("PATH")
        .map(|path| std::env::split_paths(&path).any(|dir| dir.join(prog).is_file()))
        .unwrap_or(false)
}

/// Every external pipeline's program must resolve before any sequence is
/// touched; a typo should not surface as 320 timeout rows an hour later.
fn check_external_programs(pipelines: &[Pipeline]) -> Result<()> {
    for p in pipelines {
        if let Restorer::External { command, .. } = &p.restorer {
            let prog = first_program(command).ok_or_else(|| {
                Error::Config(format!("pipeline {:?}: empty external command", p.name))
            })?;
            if !program_on_path(prog) {
                return Err(Error::Config(format!(
                    "pipeline {:?}: external program {prog:?} not found",
                    p.name
                )));
            }
        }
    }
    Ok(())
}

/// Full sweep: build the dataset if its manifest is missing, evaluate every
/// pipeline, write `results.csv` and `run.json` under `results_dir`.
pub fn cmd_run(global: &GlobalOpts) -> Result<i32> {
    let cfg = global.require_config()?;
    let pipelines = cfg.build_pipelines()?;
    check_external_programs(&pipelines)?;
    let workers = cfg.effective_workers(global.workers);

    let manifest_path = DatasetManifest::csv_path(&cfg.dataset_dir);
    let sim_start = Instant::now();
    let manifest = if manifest_path.is_file() {
        log::info!("reusing dataset manifest {}", manifest_path.display());
        DatasetManifest::load(&manifest_path)?
    } else {
        par::with_workers(workers, || {
            build_dataset(&cfg.gt_dir, &cfg.grid, &cfg.dataset_dir, cfg.master_seed)
        })?
    };
    let simulate_ms = sim_start.elapsed().as_secs_f64() * 1e3;

    fs::create_dir_all(&cfg.results_dir).map_err(|e| Error::io(&cfg.results_dir, e))?;
    let csv = cfg.results_dir.join("results.csv");
    let eval_start = Instant::now();
    let summary: EvalSummary =
        par::with_workers(workers, || evaluate(&manifest, &pipelines, &csv, &cfg.metrics))?;
    let evaluate_ms = eval_start.elapsed().as_secs_f64() * 1e3;

    let run_json = cfg.results_dir.join("run.json");
    let record = RunManifestFile {
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        workers,
        stages_ms: StageTimes {
            simulate: simulate_ms,
            evaluate: evaluate_ms,
        },
        rows: RowCounts {
            total: summary.total,
            ok: summary.ok,
            failed: summary.failed,
            from_cache: summary.from_cache,
        },
    };
    fs::write(
        &run_json,
        serde_json::to_string_pretty(&record).expect("run manifest serialize"),
    )
    .map_err(|e| Error::io(&run_json, e))?;

    println!(
        "{}: {} ok, {} failed, {} cached of {} tasks",
        csv.display(),
        summary.ok,
        summary.failed,
        summary.from_cache,
        summary.total
    );
    Ok(if summary.failed > 0 { 2 } else { 0 })
}

// ------------------------------------------------------------------ report

pub struct ReportArgs {
    pub csv: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub by: Option<String>,
}

fn write_group_csv(path: &Path, stats: &[GroupStat]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    let mut out = String::from("group,mean_psnr,sd_psnr,mean_ssim,sd_ssim,n,inf_psnr\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.group,
            fmt(s.mean_psnr),
            fmt(s.sd_psnr),
            fmt(s.mean_ssim),
            fmt(s.sd_ssim),
            s.n,
            s.inf_psnr
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Aggregates a results CSV into one table per grouping (all four by
/// default) plus a plain-text summary.
pub fn cmd_report(args: &ReportArgs, global: &GlobalOpts) -> Result<i32> {
    let csv = match (&args.csv, &global.config) {
        (Some(p), _) => p.clone(),
        (None, Some(_)) => global.require_config()?.results_dir.join("results.csv"),
        (None, None) => return Err(Error::Config("report needs --csv or a config".into())),
    };
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).join("reports"));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let records = read_records(&csv)?;
    let groupings: Vec<(GroupBy, &str)> = match &args.by {
        Some(s) => {
            let by: GroupBy = s.parse()?;
            vec![(by, table_name(by))]
        }
        None => vec![
            (GroupBy::Overall, "overall"),
            (GroupBy::Distance, "by_distance"),
            (GroupBy::Cn2, "by_cn2"),
            (GroupBy::Stabilizer, "by_stabilizer"),
        ],
    };

    let mut summary = String::new();
    for (by, name) in &groupings {
        let stats = aggregate(&records, *by);
        write_group_csv(&out_dir.join(format!("{name}.csv")), &stats)?;
        summary.push_str(&format!("== {name} ==\n{}\n", render_table(&stats)));
    }
    let summary_path = out_dir.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;
    print!("{summary}");
    println!(
        "wrote {} table(s) + summary.txt to {}",
        groupings.len(),
        out_dir.display()
    );
    Ok(0)
}

fn table_name(by: GroupBy) -> &'static str {
    match by {
        GroupBy::Overall => "overall",
        GroupBy::Distance => "by_distance",
        GroupBy::Cn2 => "by_cn2",
        GroupBy::Stabilizer => "by_stabilizer",
    }
}

// --------------------------------------------------------------- validate

pub fn cmd_validate_config(global: &GlobalOpts) -> Result<i32> {
    let cfg = global.require_config()?;
    let pipelines = cfg.build_pipelines()?;
    check_external_programs(&pipelines)?;
    println!(
        "config ok: {} pipeline(s), {} grid cell(s), seed {}",
        pipelines.len(),
        cfg.grid.combinations().len(),
        cfg.master_seed
    );
    Ok(0)
}
