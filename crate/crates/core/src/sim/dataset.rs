//! Sweep-dataset builder: every (ground truth, grid cell) pair becomes one
//! sequence directory with frames, the cropped ground truth, and a
//! params.json sidecar; a manifest CSV indexes the whole tree.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::raster::{load_image, save_image, Image, Sequence};
use crate::sim::params::{cn2_of, SweepGrid, TurbulenceParams};
use crate::sim::seed;
use crate::sim::degrade::simulate_sequence;

/// Ground truths are center-cut to this side before simulation; smaller
/// images are used as-is.
const GT_CROP_SIDE: usize = 256;

/// One sequence directory in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub scene_id: String,
    #[serde(rename = "L_km")]
    pub l_km: f64,
    pub a: u32,
    pub b: u32,
    pub cn2: f64,
    pub seed: u64,
    /// Directory path relative to the dataset root.
    pub path: String,
    pub n_frames: usize,
}

/// Index of a generated dataset: rows for every sequence plus warnings
/// about inputs that had to be skipped.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub warnings: Vec<String>,
}

/// Sidecar recorded next to each sequence's frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceParamsFile {
    pub scene_id: String,
    pub l_km: f64,
    pub a: u32,
    pub b: u32,
    pub seed: u64,
    #[serde(flatten)]
    pub params: TurbulenceParams,
}

impl DatasetManifest {
    pub fn csv_path(root: &Path) -> PathBuf {
        root.join("manifest.csv")
    }

    /// Writes `manifest.csv` under the dataset root. Warnings are recorded
    /// as `#`-prefixed comment lines above the header.
    pub fn save(&self) -> Result<PathBuf> {
        let path = Self::csv_path(&self.root);
        let mut out = String::new();
        for w in &self.warnings {
            out.push_str(&format!("# warning: {}\n", w.replace('\n', " ")));
        }
        out.push_str("scene_id,L_km,a,b,cn2,seed,path,n_frames\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:e},{},{},{}\n",
                r.scene_id,
                format_km(r.l_km),
                r.a,
                r.b,
                r.cn2,
                r.seed,
                r.path,
                r.n_frames
            ));
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads a manifest back; `#` lines are skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::MalformedCsv {
                path: path.to_path_buf(),
                line: 0,
                detail: e.to_string(),
            })?;
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<ManifestRow>().enumerate() {
            rows.push(rec.map_err(|e| Error::MalformedCsv {
                path: path.to_path_buf(),
                line: (i + 2) as u64,
                detail: e.to_string(),
            })?);
        }
        Ok(DatasetManifest {
            root: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            rows,
            warnings: Vec::new(),
        })
    }

    /// Absolute directory of a row's sequence.
    pub fn sequence_dir(&self, row: &ManifestRow) -> PathBuf {
        self.root.join(&row.path)
    }
}

/// `L<km>km_a<a>_b<b>` with the km value printed without a trailing `.0`.
fn combo_dir_name(l_km: f64, a: u32, b: u32) -> String {
    format!("L{}km_a{a}_b{b}", format_km(l_km))
}

pub(crate) fn format_km(l_km: f64) -> String {
    if l_km.fract() == 0.0 {
        format!("{}", l_km as i64)
    } else {
        format!("{l_km}")
    }
}

/// Builds the full sweep dataset. For every readable ground truth in
/// `gt_dir` (PNG/PGM, sorted by file name) and every grid cell, simulates a
/// sequence seeded by `hash(master_seed, scene, L, a, b)` and writes
/// `<scene>/<combo>/{gt.png, frame_*.png, params.json}` under `out_dir`.
/// Unreadable inputs are skipped with a warning; an empty input set is an
/// error. Generation is parallel over sequences and bit-reproducible.
pub fn build_dataset(
    gt_dir: &Path,
    grid: &SweepGrid,
    out_dir: &Path,
    master_seed: u64,
) -> Result<DatasetManifest> {
    grid.validate()?;
    let entries = fs::read_dir(gt_dir).map_err(|e| Error::io(gt_dir, e))?;
    let mut gt_paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()),
                Some(ref e) if e == "png" || e == "pgm"
            )
        })
        .collect();
    gt_paths.sort();
    if gt_paths.is_empty() {
        return Err(Error::arg(format!(
            "no ground-truth images (png/pgm) in {}",
            gt_dir.display()
        )));
    }

    let mut warnings = Vec::new();
    let mut scenes: Vec<(String, Image)> = Vec::new();
    for p in &gt_paths {
        let scene_id = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("scene")
            .to_string();
        match load_image(p) {
            Ok(img) => scenes.push((scene_id, img.center_crop(GT_CROP_SIDE))),
            Err(e) => {
                log::warn!("skipping unreadable ground truth {}: {e}", p.display());
                warnings.push(format!("skipped unreadable ground truth {}: {e}", p.display()));
            }
        }
    }
    if scenes.is_empty() {
        return Err(Error::arg("no readable ground-truth images"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let combos = grid.combinations();
    let jobs: Vec<(usize, (f64, u32, u32))> = (0..scenes.len())
        .flat_map(|s| combos.iter().map(move |c| (s, *c)))
        .collect();

    let rows = par::try_map_indexed(jobs.len(), |j| {
        let (scene_idx, (l_km, a, b)) = jobs[j];
        let (scene_id, gt) = &scenes[scene_idx];
        let seq_seed = seed::sequence_seed(master_seed, scene_id, l_km, a, b);
        let params = TurbulenceParams::for_scenario(l_km, cn2_of(a, b));
        let seq = simulate_sequence(gt, &params, seq_seed)?.with_scene_id(scene_id.clone());

        let rel = format!("{scene_id}/{}", combo_dir_name(l_km, a, b));
        let dir = out_dir.join(&rel);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        save_image(&dir.join("gt.png"), gt)?;
        for (i, frame) in seq.frames().iter().enumerate() {
            save_image(&dir.join(format!("frame_{i:03}.png")), frame)?;
        }
        let sidecar = SequenceParamsFile {
            scene_id: scene_id.clone(),
            l_km,
            a,
            b,
            seed: seq_seed,
            params: params.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("params serialize");
        let jp = dir.join("params.json");
        fs::write(&jp, json).map_err(|e| Error::io(&jp, e))?;

        Ok(ManifestRow {
            scene_id: scene_id.clone(),
            l_km,
            a,
            b,
            cn2: cn2_of(a, b),
            seed: seq_seed,
            path: rel,
            n_frames: params.num_frames,
        })
    })?;

    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        rows,
        warnings,
    };
    manifest.save()?;
    Ok(manifest)
}

/// Reads a sequence directory (frames + params.json) back into a
/// `Sequence`. Directories produced by hand only need the frame files and
/// the sidecar.
pub fn load_sequence_dir(dir: &Path) -> Result<Sequence> {
    let sidecar_path = dir.join("params.json");
    let text = fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
    let sidecar: SequenceParamsFile =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile {
            path: sidecar_path.clone(),
            detail: e.to_string(),
        })?;
    let mut frames = Vec::with_capacity(sidecar.params.num_frames);
    for i in 0..sidecar.params.num_frames {
        frames.push(load_image(&dir.join(format!("frame_{i:03}.png")))?);
    }
    Sequence::new(frames, sidecar.params.clone(), sidecar.scene_id, sidecar.seed)
}
