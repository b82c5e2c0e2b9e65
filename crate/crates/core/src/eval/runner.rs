//! Benchmark driver: runs every (sequence, pipeline) pair, scores the
//! restored image against the ground truth, and maintains one results CSV.
//!
//! The CSV is the unit of progress. Finished rows (`status = ok`) survive a
//! rerun untouched, everything else is recomputed, and the file is rewritten
//! atomically in one canonical order — so a crashed sweep can be resumed by
//! running the same command again, and two runs with different worker counts
//! produce the same rows.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::deblur::{deconvolve, semiblind_deconvolve, DeblurMethod, DeblurSpec, KernelChoice};
use crate::error::{Error, Result};
use crate::eval::external::{run_external_restorer_with, task_workdir, DEFAULT_TIMEOUT};
use crate::eval::{metrics, SsimOptions};
use crate::par;
use crate::raster::{load_image, Image, Kernel};
use crate::sim::{
    fitting_kernel_size, format_km, load_sequence_dir, long_exposure_kernel, DatasetManifest,
    ManifestRow,
};
use crate::stabilize::{stabilize, StabilizerSpec};

/// Exact column order of the results CSV.
pub(crate) const CSV_HEADER: &str =
    "scene_id,L_km,a,b,cn2,stabilizer,deblurrer,status,psnr_db,ssim,ssim_mode,wall_ms";

/// Outcome of one (sequence, pipeline) task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    /// Restored and scored.
    Ok,
    /// Pipeline or scoring failed; details go to the log, not the CSV.
    Error,
    /// External command exceeded its wall-clock budget.
    Timeout,
    /// External command exited 0 but never wrote its output file.
    MissingOutput,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Error => "error",
            RowStatus::Timeout => "timeout",
            RowStatus::MissingOutput => "missing_output",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(RowStatus::Ok),
            "error" => Some(RowStatus::Error),
            "timeout" => Some(RowStatus::Timeout),
            "missing_output" => Some(RowStatus::MissingOutput),
            _ => None,
        }
    }
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub scene_id: String,
    pub l_km: f64,
    pub a: u32,
    pub b: u32,
    pub cn2: f64,
    pub stabilizer: String,
    pub deblurrer: String,
    pub status: RowStatus,
    /// `None` on failure; `f64::INFINITY` (written `inf`) on a perfect match.
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    /// SSIM variant label, recorded so mixed CSVs can't be averaged blindly.
    pub ssim_mode: String,
    pub wall_ms: f64,
}

impl EvalRecord {
    /// Resume/merge identity: everything that names the task, nothing that
    /// came out of it.
    fn key(&self) -> (String, u64, u32, u32, String, String) {
        (
            self.scene_id.clone(),
            self.l_km.to_bits(),
            self.a,
            self.b,
            self.stabilizer.clone(),
            self.deblurrer.clone(),
        )
    }
}

/// Deconvolution stage of a builtin pipeline. The kernel is not stored
/// here because it depends on the sequence: each task either rebuilds the
/// model kernel from the sequence's own recorded parameters, or runs the
/// semi-blind grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct DeblurStage {
    pub method: DeblurMethod,
    pub nsr: f64,
    pub lr_iterations: usize,
    pub tv_lambda: f64,
    pub tv_iterations: usize,
    /// `None`: kernel from the sequence's params. `Some`: semi-blind search
    /// over these candidate Fried parameters (meters).
    pub r0_grid: Option<Vec<f64>>,
}

impl DeblurStage {
    /// Stage that trusts the recorded scenario parameters.
    pub fn model_kernel(method: DeblurMethod) -> Self {
        let d = DeblurSpec::with_kernel(method, Kernel::delta(3).expect("odd size"));
        DeblurStage {
            method,
            nsr: d.nsr,
            lr_iterations: d.lr_iterations,
            tv_lambda: d.tv_lambda,
            tv_iterations: d.tv_iterations,
            r0_grid: None,
        }
    }

    /// Stage that searches `r0_grid` for the kernel parameter.
    pub fn semi_blind(method: DeblurMethod, r0_grid: Vec<f64>) -> Self {
        DeblurStage {
            r0_grid: Some(r0_grid),
            ..DeblurStage::model_kernel(method)
        }
    }

    fn to_spec(&self, kernel: KernelChoice) -> DeblurSpec {
        DeblurSpec {
            method: self.method,
            nsr: self.nsr,
            lr_iterations: self.lr_iterations,
            tv_lambda: self.tv_lambda,
            tv_iterations: self.tv_iterations,
            kernel,
        }
    }

    /// A spec with the right kernel *variant* but a placeholder kernel, good
    /// enough for labels and validation before any sequence is loaded.
    fn placeholder_spec(&self) -> DeblurSpec {
        let kernel = match &self.r0_grid {
            None => KernelChoice::Fixed(Kernel::delta(3).expect("odd size")),
            Some(g) => KernelChoice::SemiBlind { r0_grid: g.clone() },
        };
        self.to_spec(kernel)
    }

    pub fn validate(&self) -> Result<()> {
        self.placeholder_spec().validate()
    }

    pub fn label(&self) -> String {
        self.placeholder_spec().label()
    }
}

/// What actually restores a sequence.
#[derive(Debug, Clone)]
pub enum Restorer {
    /// In-process: stabilize, then optionally deconvolve.
    Builtin {
        stabilizer: StabilizerSpec,
        deblur: Option<DeblurStage>,
    },
    /// Shell command with `{in}`/`{out}` placeholders, run per sequence.
    External { command: String, timeout: Duration },
}

/// A named restorer. For builtin pipelines the CSV's `stabilizer` and
/// `deblurrer` columns come from the algorithm labels; for external ones the
/// pipeline name fills the `stabilizer` column and `deblurrer` is
/// `External`, so plug-ins group like any other method.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub name: String,
    pub restorer: Restorer,
}

impl Pipeline {
    /// Builtin pipeline named after its stage labels.
    pub fn builtin(stabilizer: StabilizerSpec, deblur: Option<DeblurStage>) -> Self {
        let name = match &deblur {
            None => stabilizer.label(),
            Some(d) => format!("{}+{}", stabilizer.label(), d.label()),
        };
        Pipeline {
            name,
            restorer: Restorer::Builtin { stabilizer, deblur },
        }
    }

    /// External pipeline with the default timeout.
    pub fn external(name: impl Into<String>, command: impl Into<String>) -> Self {
        Pipeline {
            name: name.into(),
            restorer: Restorer::External {
                command: command.into(),
                timeout: DEFAULT_TIMEOUT,
            },
        }
    }

    pub fn stabilizer_label(&self) -> String {
        match &self.restorer {
            Restorer::Builtin { stabilizer, .. } => stabilizer.label(),
            Restorer::External { .. } => self.name.clone(),
        }
    }

    pub fn deblurrer_label(&self) -> String {
        match &self.restorer {
            Restorer::Builtin { deblur, .. } => {
                deblur.as_ref().map(|d| d.label()).unwrap_or_else(|| "none".into())
            }
            Restorer::External { .. } => "External".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::arg("pipeline name must not be empty"));
        }
        match &self.restorer {
            Restorer::Builtin { stabilizer, deblur } => {
                stabilizer.validate()?;
                if let Some(d) = deblur {
                    d.validate()?;
                }
            }
            Restorer::External { command, timeout } => {
                if !command.contains("{in}") || !command.contains("{out}") {
                    return Err(Error::arg(format!(
                        "external pipeline {:?}: command must contain {{in}} and {{out}}",
                        self.name
                    )));
                }
                if timeout.is_zero() {
                    return Err(Error::arg(format!(
                        "external pipeline {:?}: timeout must be positive",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Tally of one [`evaluate`] call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSummary {
    pub csv: PathBuf,
    /// Tasks in scope: sequences x pipelines.
    pub total: usize,
    /// Rows carried over from an earlier run.
    pub from_cache: usize,
    /// Newly computed rows that came back `ok`.
    pub ok: usize,
    /// Newly computed rows with any failure status.
    pub failed: usize,
}

/// Runs every pipeline on every manifest row and (re)writes `out_csv`.
///
/// Failures of individual tasks become `error`/`timeout`/`missing_output`
/// rows and the sweep keeps going; only unusable configuration or an
/// unwritable CSV abort the call. External pipelines get a work directory
/// per task next to the CSV, named `<csv stem>_external/`.
pub fn evaluate(
    manifest: &DatasetManifest,
    pipelines: &[Pipeline],
    out_csv: &Path,
    ssim_opts: &SsimOptions,
) -> Result<EvalSummary> {
    if pipelines.is_empty() {
        return Err(Error::arg("no pipelines to evaluate"));
    }
    ssim_opts.validate()?;
    let mut seen = HashSet::new();
    for p in pipelines {
        p.validate()?;
        if !seen.insert((p.stabilizer_label(), p.deblurrer_label())) {
            return Err(Error::arg(format!(
                "pipelines collide on CSV labels ({}, {})",
                p.stabilizer_label(),
                p.deblurrer_label()
            )));
        }
    }

    let cached = load_cache(out_csv, manifest, pipelines)?;
    let ext_root = external_root(out_csv);

    // One task per (sequence, pipeline) not already answered by the cache.
    struct Task<'a> {
        row: &'a ManifestRow,
        pipeline: &'a Pipeline,
    }
    let mut tasks = Vec::new();
    for row in &manifest.rows {
        for p in pipelines {
            let key = (
                row.scene_id.clone(),
                row.l_km.to_bits(),
                row.a,
                row.b,
                p.stabilizer_label(),
                p.deblurrer_label(),
            );
            if !cached.contains_key(&key) {
                tasks.push(Task { row, pipeline: p });
            }
        }
    }

    let new_records = par::map_indexed(tasks.len(), |i| {
        let t = &tasks[i];
        run_task(manifest, t.row, t.pipeline, &ext_root, ssim_opts)
    });

    let ok = new_records.iter().filter(|r| r.status == RowStatus::Ok).count();
    let failed = new_records.len() - ok;

    let mut records: Vec<EvalRecord> = cached.into_values().chain(new_records).collect();
    sort_canonical(&mut records);
    write_records(out_csv, &records)?;

    Ok(EvalSummary {
        csv: out_csv.to_path_buf(),
        total: manifest.rows.len() * pipelines.len(),
        from_cache: records.len() - tasks.len(),
        ok,
        failed,
    })
}

/// `ok` rows of an existing CSV that still belong to the current scope,
/// keyed for the resume check. Rows for sequences or pipelines no longer in
/// scope are dropped so the output always mirrors the request.
fn load_cache(
    out_csv: &Path,
    manifest: &DatasetManifest,
    pipelines: &[Pipeline],
) -> Result<HashMap<(String, u64, u32, u32, String, String), EvalRecord>> {
    let mut cache = HashMap::new();
    if !out_csv.exists() {
        return Ok(cache);
    }
    let scope_rows: HashSet<(String, u64, u32, u32)> = manifest
        .rows
        .iter()
        .map(|r| (r.scene_id.clone(), r.l_km.to_bits(), r.a, r.b))
        .collect();
    let scope_pipelines: HashSet<(String, String)> = pipelines
        .iter()
        .map(|p| (p.stabilizer_label(), p.deblurrer_label()))
        .collect();
    let mut dropped = 0usize;
    for r in read_records(out_csv)? {
        let in_scope = scope_rows.contains(&(r.scene_id.clone(), r.l_km.to_bits(), r.a, r.b))
            && scope_pipelines.contains(&(r.stabilizer.clone(), r.deblurrer.clone()));
        if r.status == RowStatus::Ok && in_scope {
            cache.insert(r.key(), r);
        } else {
            dropped += 1;
        }
    }
    if dropped > 0 {
        log::info!(
            "{}: recomputing {dropped} row(s) that were failed, stale or out of scope",
            out_csv.display()
        );
    }
    Ok(cache)
}

fn external_root(out_csv: &Path) -> PathBuf {
    let stem = out_csv
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("results");
    out_csv
        .parent()
        .unwrap_or(Path::new("."))
        .join(format!("{stem}_external"))
}

/// Executes one task end to end; never fails, failures become the row's
/// status.
fn run_task(
    manifest: &DatasetManifest,
    row: &ManifestRow,
    pipeline: &Pipeline,
    ext_root: &Path,
    ssim_opts: &SsimOptions,
) -> EvalRecord {
    let dir = manifest.sequence_dir(row);
    let started = Instant::now();
    let restored = match &pipeline.restorer {
        Restorer::Builtin { stabilizer, deblur } => run_builtin(&dir, stabilizer, deblur.as_ref()),
        Restorer::External { command, timeout } => {
            let combo = row.path.rsplit('/').next().unwrap_or(&row.path);
            let workdir = task_workdir(ext_root, &row.scene_id, combo, &pipeline.name);
            run_external_restorer_with(&dir, command, &workdir, *timeout)
        }
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;

    let mut record = EvalRecord {
        scene_id: row.scene_id.clone(),
        l_km: row.l_km,
        a: row.a,
        b: row.b,
        cn2: row.cn2,
        stabilizer: pipeline.stabilizer_label(),
        deblurrer: pipeline.deblurrer_label(),
        status: RowStatus::Error,
        psnr_db: None,
        ssim: None,
        ssim_mode: ssim_opts.mode.label().to_string(),
        wall_ms,
    };

    let scored = restored.and_then(|img| {
        let gt = load_image(&dir.join("gt.png"))?;
        let p = metrics::psnr(&gt, &img)?;
        let s = metrics::ssim(&gt, &img, ssim_opts)?;
        Ok((p, s))
    });
    match scored {
        Ok((p, s)) => {
            record.status = RowStatus::Ok;
            record.psnr_db = Some(p);
            record.ssim = Some(s);
        }
        Err(e) => {
            record.status = match &e {
                Error::ExternalTimeout(_) => RowStatus::Timeout,
                Error::ExternalMissingOutput(_) => RowStatus::MissingOutput,
                _ => RowStatus::Error,
            };
            log::warn!(
                "{} {} [{} / {}]: {e}",
                row.scene_id,
                row.path,
                record.stabilizer,
                record.deblurrer
            );
        }
    }
    record
}

fn run_builtin(
    dir: &Path,
    stabilizer: &StabilizerSpec,
    deblur: Option<&DeblurStage>,
) -> Result<Image> {
    let seq = load_sequence_dir(dir)?;
    let mut img = stabilize(&seq, stabilizer)?.image;
    if let Some(stage) = deblur {
        let size = fitting_kernel_size(img.width(), img.height());
        img = match &stage.r0_grid {
            None => {
                let kernel = long_exposure_kernel(seq.params(), size)?;
                let spec = stage.to_spec(KernelChoice::Fixed(kernel.clone()));
                deconvolve(&img, &kernel, &spec)?
            }
            Some(grid) => {
                let spec = stage.to_spec(KernelChoice::SemiBlind {
                    r0_grid: grid.clone(),
                });
                semiblind_deconvolve(&img, seq.params(), &spec)?.0
            }
        };
    }
    Ok(img)
}

/// Scene, then distance, then turbulence cell, then pipeline — the order is
/// part of the format so diffs between runs stay meaningful.
fn sort_canonical(records: &mut [EvalRecord]) {
    records.sort_by(|x, y| {
        x.scene_id
            .cmp(&y.scene_id)
            .then(x.l_km.total_cmp(&y.l_km))
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
            .then(x.stabilizer.cmp(&y.stabilizer))
            .then(x.deblurrer.cmp(&y.deblurrer))
    });
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_infinite() && v > 0.0 => "inf".into(),
        Some(v) => format!("{v:.6}"),
    }
}

/// Writes the CSV atomically: the full contents go to a sibling `.tmp` file
/// that is renamed over the target, so a crash can't leave a half-written
/// results file.
pub fn write_records(path: &Path, records: &[EvalRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    wtr.write_record(CSV_HEADER.split(',')).expect("header");
    for r in records {
        wtr.write_record([
            r.scene_id.as_str(),
            &format_km(r.l_km),
            &r.a.to_string(),
            &r.b.to_string(),
            &format!("{:e}", r.cn2),
            &r.stabilizer,
            &r.deblurrer,
            r.status.as_str(),
            &fmt_metric(r.psnr_db),
            &fmt_metric(r.ssim),
            &r.ssim_mode,
            &format!("{:.3}", r.wall_ms),
        ])
        .expect("csv row");
    }
    let bytes = wtr.into_inner().expect("csv buffer");
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a results CSV back, validating the header and every field.
pub fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let bad = |line: u64, detail: String| Error::MalformedCsv {
        path: path.to_path_buf(),
        line,
        detail,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| bad(0, e.to_string()))?;
    {
        let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
        let expect: Vec<&str> = CSV_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expect {
            return Err(bad(1, format!("unexpected header {headers:?}")));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize, name: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(line, format!("bad {name} {:?}", field(i))))
        };
        let int = |i: usize, name: &str| -> Result<u32> {
            field(i)
                .parse::<u32>()
                .map_err(|_| bad(line, format!("bad {name} {:?}", field(i))))
        };
        let metric = |i: usize, name: &str| -> Result<Option<f64>> {
            match field(i) {
                "" => Ok(None),
                "inf" => Ok(Some(f64::INFINITY)),
                s => Ok(Some(s.parse::<f64>().map_err(|_| {
                    bad(line, format!("bad {name} {s:?}"))
                })?)),
            }
        };
        if rec.len() != 12 {
            return Err(bad(line, format!("expected 12 fields, got {}", rec.len())));
        }
        out.push(EvalRecord {
            scene_id: field(0).to_string(),
            l_km: num(1, "L_km")?,
            a: int(2, "a")?,
            b: int(3, "b")?,
            cn2: num(4, "cn2")?,
            stabilizer: field(5).to_string(),
            deblurrer: field(6).to_string(),
            status: RowStatus::parse(field(7))
                .ok_or_else(|| bad(line, format!("bad status {:?}", field(7))))?,
            psnr_db: metric(8, "psnr_db")?,
            ssim: metric(9, "ssim")?,
            ssim_mode: field(10).to_string(),
            wall_ms: num(11, "wall_ms")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::save_image;
    use crate::sim::{SequenceParamsFile, TurbulenceParams};
    use tempfile::TempDir;

    fn record(scene: &str, stab: &str) -> EvalRecord {
        EvalRecord {
            scene_id: scene.into(),
            l_km: 2.0,
            a: 5,
            b: 15,
            cn2: 5e-15,
            stabilizer: stab.into(),
            deblurrer: "none".into(),
            status: RowStatus::Ok,
            psnr_db: Some(24.5),
            ssim: Some(0.75),
            ssim_mode: "windowed".into(),
            wall_ms: 12.0,
        }
    }

    #[test]
    fn header_is_exact() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("r.csv");
        write_records(&path, &[]).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "scene_id,L_km,a,b,cn2,stabilizer,deblurrer,status,psnr_db,ssim,ssim_mode,wall_ms\n"
        );
    }

    #[test]
    fn records_round_trip_including_sentinels() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("r.csv");
        let mut inf = record("a", "Temporal_Average");
        inf.psnr_db = Some(f64::INFINITY);
        inf.ssim = Some(1.0);
        let mut failed = record("b", "TV-LK");
        failed.status = RowStatus::Timeout;
        failed.psnr_db = None;
        failed.ssim = None;
        let rows = vec![inf, failed, record("c", "NLTV-TVL1")];
        write_records(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains(",inf,1.000000,"), "inf sentinel missing:\n{text}");
        assert!(text.contains(",timeout,,,"), "failed row should leave metrics empty:\n{text}");
        assert_eq!(read_records(&path).unwrap(), rows);
    }

    #[test]
    fn malformed_rows_name_the_line() {
        let tmp = TempDir::new().unwrap();
        let path = tmp.path().join("r.csv");
        fs::write(
            &path,
            format!("{CSV_HEADER}\ns,2,5,15,5e-15,X,none,ok,1.0,0.5,windowed,3\ns,2,5,15,5e-15,X,none,nope,1.0,0.5,windowed,3\n"),
        )
        .unwrap();
        match read_records(&path).unwrap_err() {
            Error::MalformedCsv { line, detail, .. } => {
                assert_eq!(line, 3, "{detail}");
                assert!(detail.contains("status"), "{detail}");
            }
            other => panic!("expected MalformedCsv, got {other:?}"),
        }
        fs::write(&path, "scene,stab\n").unwrap();
        assert!(matches!(
            read_records(&path).unwrap_err(),
            Error::MalformedCsv { line: 1, .. }
        ));
    }

    /// A sequence directory whose frames are exact copies of the ground
    /// truth: the cheapest possible fixture, and the one case where a mean
    /// stabilizer must reproduce the ground truth bit for bit.
    fn clean_sequence_dir(root: &Path, scene: &str, n_frames: usize, side: usize) -> ManifestRow {
        let rel = format!("{scene}/L2km_a5_b15");
        let dir = root.join(&rel);
        fs::create_dir_all(&dir).unwrap();
        let gt = Image::from_fn(side, side, 255.0, |x, y| {
            (((x * 7 + y * 13) % 47) * 5) as f64
        })
        .unwrap();
        save_image(&dir.join("gt.png"), &gt).unwrap();
        for i in 0..n_frames {
            save_image(&dir.join(format!("frame_{i:03}.png")), &gt).unwrap();
        }
        let mut params = TurbulenceParams::for_scenario(2.0, 5e-15);
        params.num_frames = n_frames;
        let sidecar = SequenceParamsFile {
            scene_id: scene.into(),
            l_km: 2.0,
            a: 5,
            b: 15,
            seed: 1,
            params,
        };
        fs::write(
            dir.join("params.json"),
            serde_json::to_string_pretty(&sidecar).unwrap(),
        )
        .unwrap();
        ManifestRow {
            scene_id: scene.into(),
            l_km: 2.0,
            a: 5,
            b: 15,
            cn2: 5e-15,
            seed: 1,
            path: rel,
            n_frames,
        }
    }

    fn tiny_manifest(root: &Path, scenes: &[&str]) -> DatasetManifest {
        let rows = scenes
            .iter()
            .map(|s| clean_sequence_dir(root, s, 4, 16))
            .collect();
        DatasetManifest {
            root: root.to_path_buf(),
            rows,
            warnings: Vec::new(),
        }
    }

    fn mean_pipeline() -> Pipeline {
        Pipeline::builtin(StabilizerSpec::temporal_average(), None)
    }

    #[test]
    fn perfect_restoration_hits_the_sentinels() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s"]);
        let csv = tmp.path().join("results.csv");
        let summary = evaluate(&manifest, &[mean_pipeline()], &csv, &SsimOptions::default()).unwrap();
        assert_eq!((summary.total, summary.ok, summary.failed, summary.from_cache), (1, 1, 0, 0));
        let rows = read_records(&csv).unwrap();
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(r.status, RowStatus::Ok);
        assert_eq!(r.psnr_db, Some(f64::INFINITY));
        assert_eq!(r.ssim, Some(1.0));
        assert_eq!(r.stabilizer, "Temporal_Average");
        assert_eq!(r.deblurrer, "none");
        assert_eq!(r.ssim_mode, "windowed");
        assert!(r.wall_ms >= 0.0);
        let text = fs::read_to_string(&csv).unwrap();
        assert!(text.contains(",ok,inf,1.000000,windowed,"), "{text}");
    }

    #[test]
    fn finished_rows_survive_a_rerun_untouched() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s", "t"]);
        let csv = tmp.path().join("results.csv");
        let opts = SsimOptions::default();
        let pipes = [mean_pipeline()];
        evaluate(&manifest, &pipes, &csv, &opts).unwrap();
        let first = fs::read_to_string(&csv).unwrap();

        let summary = evaluate(&manifest, &pipes, &csv, &opts).unwrap();
        assert_eq!((summary.from_cache, summary.ok), (2, 0));
        // Everything came from the cache, including wall times, so the file
        // is reproduced byte for byte.
        assert_eq!(fs::read_to_string(&csv).unwrap(), first);
    }

    #[test]
    fn failed_rows_are_recomputed_on_resume() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s"]);
        let csv = tmp.path().join("results.csv");
        let mut poisoned = record("s", "Temporal_Average");
        poisoned.status = RowStatus::Error;
        poisoned.psnr_db = None;
        poisoned.ssim = None;
        write_records(&csv, &[poisoned]).unwrap();

        let summary = evaluate(&manifest, &[mean_pipeline()], &csv, &SsimOptions::default()).unwrap();
        assert_eq!((summary.from_cache, summary.ok), (0, 1));
        let rows = read_records(&csv).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, RowStatus::Ok);
    }

    #[test]
    fn external_outcomes_map_to_statuses() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s"]);
        let csv = tmp.path().join("results.csv");
        let mut slow = Pipeline::external("Slow", "sleep 30; cp {in}/gt.png {out}");
        if let Restorer::External { timeout, .. } = &mut slow.restorer {
            *timeout = Duration::from_millis(100);
        }
        let pipes = [
            Pipeline::external("CopyGT", "cp {in}/gt.png {out}"),
            Pipeline::external("Broken", "cp {in}/gt.png {out}; exit 9"),
            Pipeline::external("Quiet", "true {in} {out}"),
            slow,
        ];
        let summary = evaluate(&manifest, &pipes, &csv, &SsimOptions::default()).unwrap();
        assert_eq!((summary.ok, summary.failed), (1, 3));
        let by_name: HashMap<String, RowStatus> = read_records(&csv)
            .unwrap()
            .into_iter()
            .map(|r| (r.stabilizer.clone(), r.status))
            .collect();
        assert_eq!(by_name["CopyGT"], RowStatus::Ok);
        assert_eq!(by_name["Broken"], RowStatus::Error);
        assert_eq!(by_name["Quiet"], RowStatus::MissingOutput);
        assert_eq!(by_name["Slow"], RowStatus::Timeout);
        let rows = read_records(&csv).unwrap();
        let perfect = rows.iter().find(|r| r.stabilizer == "CopyGT").unwrap();
        assert_eq!(perfect.deblurrer, "External");
        assert_eq!(perfect.psnr_db, Some(f64::INFINITY));
    }

    #[test]
    fn rows_come_out_in_canonical_order() {
        let tmp = TempDir::new().unwrap();
        let mut manifest = tiny_manifest(tmp.path(), &["b", "a"]);
        manifest.rows.reverse(); // scrambled input order must not matter
        let csv = tmp.path().join("results.csv");
        let pipes = [
            Pipeline::external("ZCopy", "cp {in}/gt.png {out}"),
            mean_pipeline(),
        ];
        evaluate(&manifest, &pipes, &csv, &SsimOptions::default()).unwrap();
        let got: Vec<(String, String)> = read_records(&csv)
            .unwrap()
            .into_iter()
            .map(|r| (r.scene_id, r.stabilizer))
            .collect();
        let want: Vec<(String, String)> = [
            ("a", "Temporal_Average"),
            ("a", "ZCopy"),
            ("b", "Temporal_Average"),
            ("b", "ZCopy"),
        ]
        .iter()
        .map(|(s, p)| (s.to_string(), p.to_string()))
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn colliding_pipeline_labels_are_rejected() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s"]);
        let csv = tmp.path().join("results.csv");
        let pipes = [mean_pipeline(), mean_pipeline()];
        let err = evaluate(&manifest, &pipes, &csv, &SsimOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err:?}");
    }

    #[test]
    fn builtin_deblur_stage_runs_and_labels_itself() {
        let tmp = TempDir::new().unwrap();
        let manifest = tiny_manifest(tmp.path(), &["s"]);
        // Re-blur the frames with the scenario kernel so the deblur stage
        // has something real to invert.
        let row = &manifest.rows[0];
        let dir = manifest.sequence_dir(row);
        let gt = load_image(&dir.join("gt.png")).unwrap();
        let params = TurbulenceParams::for_scenario(row.l_km, row.cn2);
        let kernel = long_exposure_kernel(&params, fitting_kernel_size(16, 16)).unwrap();
        let blurred = crate::raster::convolve_fft(&gt, &kernel).unwrap();
        for i in 0..row.n_frames {
            save_image(&dir.join(format!("frame_{i:03}.png")), &blurred).unwrap();
        }

        let csv = tmp.path().join("results.csv");
        let deblurred = Pipeline::builtin(
            StabilizerSpec::temporal_average(),
            Some(DeblurStage::model_kernel(DeblurMethod::Wiener)),
        );
        assert_eq!(deblurred.name, "Temporal_Average+Wiener");
        let pipes = [mean_pipeline(), deblurred];
        let summary = evaluate(&manifest, &pipes, &csv, &SsimOptions::default()).unwrap();
        assert_eq!(summary.ok, 2);
        let by_deb: HashMap<String, f64> = read_records(&csv)
            .unwrap()
            .into_iter()
            .map(|r| (r.deblurrer.clone(), r.psnr_db.unwrap()))
            .collect();
        // Inverting the right kernel must beat leaving the blur in place.
        assert!(
            by_deb["Wiener"] > by_deb["none"] + 3.0,
            "deblurred {} vs blurred {}",
            by_deb["Wiener"],
            by_deb["none"]
        );
    }

    #[test]
    fn semi_blind_labels_carry_the_suffix() {
        let stage = DeblurStage::semi_blind(DeblurMethod::TvDeconv, vec![0.01, 0.05]);
        assert_eq!(stage.label(), "TV-SB");
        let p = Pipeline::builtin(StabilizerSpec::temporal_average(), Some(stage));
        assert_eq!(p.name, "Temporal_Average+TV-SB");
        assert_eq!(p.deblurrer_label(), "TV-SB");
    }

    #[test]
    fn missing_sequence_becomes_an_error_row_not_a_crash() {
        let tmp = TempDir::new().unwrap();
        let mut manifest = tiny_manifest(tmp.path(), &["s"]);
        manifest.rows[0].path = "s/does_not_exist".into();
        let csv = tmp.path().join("results.csv");
        let summary = evaluate(&manifest, &[mean_pipeline()], &csv, &SsimOptions::default()).unwrap();
        assert_eq!((summary.ok, summary.failed), (0, 1));
        let rows = read_records(&csv).unwrap();
        assert_eq!(rows[0].status, RowStatus::Error);
        assert_eq!(rows[0].psnr_db, None);
    }
}
