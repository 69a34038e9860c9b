//! Metadata CSV and mask loading shared by the commands.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::Deserialize;
use segfair_core::volume::{load_mask, parse_nifti, resample_nearest};
use segfair_core::{CaseRecord, MaskFormat, Rating, VoxelMask};

use crate::config::{parse_triple, Settings};
use crate::error::{input, CliError, Result};

/// Share of cases that may be excluded before a run is aborted.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.20;

#[derive(Debug, Deserialize)]
struct MetadataRow {
    case_id: String,
    age: String,
    expert1: String,
    expert2: String,
    #[serde(default)]
    gold_path: String,
    #[serde(default)]
    silver_path: String,
    #[serde(default)]
    pred_path: String,
}

fn non_empty(s: String) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Cases in file order. Duplicate ids and unparsable fields are input errors.
pub fn read_metadata(path: &Path) -> Result<Vec<CaseRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut seen = BTreeSet::new();
    let mut cases = Vec::new();
    for (line, row) in reader.deserialize::<MetadataRow>().enumerate() {
        let row = row.map_err(|e| CliError::io(path, e))?;
        let at = |field: &str, e: String| CliError::Input(format!("{}: row {}: {field}: {e}", path.display(), line + 2));
        let age: u32 = row.age.parse().map_err(|e: std::num::ParseIntError| at("age", e.to_string()))?;
        let e1: Rating = row.expert1.parse().map_err(|e: segfair_core::cohort::CohortError| at("expert1", e.to_string()))?;
        let e2: Rating = row.expert2.parse().map_err(|e: segfair_core::cohort::CohortError| at("expert2", e.to_string()))?;
        if !seen.insert(row.case_id.clone()) {
            return Err(at("case_id", format!("duplicate id {:?}", row.case_id)));
        }
        let mut rec = CaseRecord::new(row.case_id, age, e1, e2);
        rec.masks.gold = non_empty(row.gold_path);
        rec.masks.silver = non_empty(row.silver_path);
        rec.masks.prediction = non_empty(row.pred_path);
        cases.push(rec);
    }
    if cases.is_empty() {
        return Err(CliError::Input(format!("{}: no cases", path.display())));
    }
    Ok(cases)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resample {
    Native,
    Spacing([f64; 3]),
}

impl Resample {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        match s.get("resample").unwrap_or("1") {
            "native" | "none" => Ok(Resample::Native),
            v => {
                let sp = parse_triple::<f64>("resample", v)?;
                if sp.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return Err(CliError::Input(format!("resample = {v:?}: spacing must be positive")));
                }
                Ok(Resample::Spacing(sp))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaskDirs {
    pub gold: PathBuf,
    pub silver: PathBuf,
    pub pred: PathBuf,
}

impl MaskDirs {
    /// Directories default to `gold/`, `silver/` and `pred/` beside the
    /// metadata file.
    pub fn from_settings(s: &Settings, metadata: &Path) -> Self {
        let base = metadata.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = |key: &str, sub: &str| s.path(key).unwrap_or_else(|| base.join(sub));
        Self {
            gold: dir("gold_dir", "gold"),
            silver: dir("silver_dir", "silver"),
            pred: dir("pred_dir", "pred"),
        }
    }
}

pub fn resolve(dir: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

fn read_any(path: &Path) -> std::result::Result<VoxelMask, String> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if name.ends_with(".nii.gz") {
        let file = std::fs::File::open(path).map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        GzDecoder::new(file).read_to_end(&mut bytes).map_err(|e| e.to_string())?;
        return parse_nifti(&bytes).map_err(|e| e.to_string());
    }
    load_mask(path, MaskFormat::from_path(path)).map_err(|e| e.to_string())
}

/// Loads and resamples one mask; errors are reasons for excluding a case.
pub fn load(path: &Path, resample: Resample) -> std::result::Result<VoxelMask, String> {
    let m = read_any(path).map_err(|e| format!("{}: {e}", path.display()))?;
    match resample {
        Resample::Native => Ok(m),
        Resample::Spacing(t) => resample_nearest(&m, t).map_err(|e| format!("{}: {e}", path.display())),
    }
}

#[derive(Debug, Clone, serde::Serialize, PartialEq)]
pub struct Exclusion {
    pub case_id: String,
    pub reason: String,
}

pub fn check_exclusions(total: usize, excluded: &[Exclusion]) -> Result<()> {
    for e in excluded {
        log::warn!("excluding {}: {}", e.case_id, e.reason);
    }
    let frac = excluded.len() as f64 / total.max(1) as f64;
    if frac > MAX_EXCLUDED_FRACTION {
        return Err(CliError::Input(format!(
            "{} of {total} cases excluded ({:.1}% > {:.0}%)",
            excluded.len(),
            frac * 100.0,
            MAX_EXCLUDED_FRACTION * 100.0
        )));
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(input)?;
    text.push('\n');
    write_text(path, &text)
}

/// Empty string for missing values.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub struct CsvOut {
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        write_text(path, &String::from_utf8(bytes).map_err(input)?)
    }
}
