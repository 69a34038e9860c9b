//! Synthetic cohorts with injected label and prediction bias.
//!
//! Gold tumors are single digitized ellipsoids. Silver and prediction masks
//! are derived from gold by [`perturb_mask`]: whole-layer erosions (positive
//! magnitude) or dilations (negative magnitude), then independent flips over
//! the surface band.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cohort::{AgeGroup, CaseRecord, MaskRefs, Rating};
use crate::metrics::{self, MetricError};
use crate::rng;
use crate::volume::{self, dilate, erode, surface_voxels, VolumeError, VoxelMask};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("ellipsoid does not cover any voxel centre")]
    EmptyEllipsoid,
    #[error("cannot perturb an empty mask")]
    EmptyInput,
    #[error("perturbation by {layers} layers annihilated the mask")]
    Annihilated { layers: f64 },
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Per-group generation law. Radii are equivalent-sphere radii in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupLaw {
    pub radius_mean_mm: f64,
    pub radius_std_mm: f64,
    /// Layers removed from gold to form silver (negative: added).
    pub label_bias: f64,
    /// Layers removed from gold to form the prediction (negative: added).
    pub pred_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_per_group: usize,
    pub grid: [usize; 3],
    pub spacing: [f64; 3],
    pub groups: BTreeMap<AgeGroup, GroupLaw>,
    pub flip_rate: f64,
    /// Half-width of the uniform log-axis jitter that turns spheres into
    /// volume-preserving ellipsoids.
    pub axis_jitter: f64,
    /// Half-width in mm of the uniform centre offset from the grid centre.
    pub center_jitter_mm: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let law = |m, s| GroupLaw {
            radius_mean_mm: m,
            radius_std_mm: s,
            label_bias: 0.0,
            pred_bias: 0.0,
        };
        let groups = BTreeMap::from([
            (AgeGroup::Young, law(7.13, 0.558)),
            (AgeGroup::Middle, law(6.55, 0.58)),
            (AgeGroup::Older, law(6.0, 0.6)),
        ]);
        Self {
            n_per_group: 60,
            grid: [48, 48, 48],
            spacing: [1.0; 3],
            groups,
            flip_rate: 0.0,
            axis_jitter: 0.15,
            center_jitter_mm: 2.0,
            seed: 0,
        }
    }
}

/// Radii beyond this many standard deviations are clipped.
const RADIUS_CLIP_SD: f64 = 4.0;

impl SynthConfig {
    pub fn law(&self, g: AgeGroup) -> Option<&GroupLaw> {
        self.groups.get(&g)
    }

    pub fn law_mut(&mut self, g: AgeGroup) -> &mut GroupLaw {
        self.groups.entry(g).or_insert(GroupLaw {
            radius_mean_mm: 6.0,
            radius_std_mm: 0.6,
            label_bias: 0.0,
            pred_bias: 0.0,
        })
    }

    pub fn set_all_biases(&mut self, label: f64, pred: f64) {
        for law in self.groups.values_mut() {
            law.label_bias = label;
            law.pred_bias = pred;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_per_group == 0 || self.groups.is_empty() {
            return bad("need n_per_group >= 1 and at least one group".into());
        }
        if self.grid.iter().any(|&d| d == 0) || self.spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad(format!("grid {:?} / spacing {:?}", self.grid, self.spacing));
        }
        if !(0.0..=1.0).contains(&self.flip_rate) {
            return bad(format!("flip_rate {} outside [0, 1]", self.flip_rate));
        }
        if !(self.axis_jitter >= 0.0 && self.axis_jitter < 1.0) || !(self.center_jitter_mm >= 0.0) {
            return bad("axis_jitter must be in [0, 1) and center_jitter_mm >= 0".into());
        }
        let half_extent = (0..3)
            .map(|a| self.grid[a] as f64 * self.spacing[a] / 2.0)
            .fold(f64::INFINITY, f64::min);
        for (g, law) in &self.groups {
            if !(law.radius_mean_mm > 0.0) || !(law.radius_std_mm >= 0.0) {
                return bad(format!("{g}: radius law must have mean > 0 and std >= 0"));
            }
            if !law.label_bias.is_finite() || !law.pred_bias.is_finite() {
                return bad(format!("{g}: bias magnitudes must be finite"));
            }
            let max_axis = (law.radius_mean_mm + RADIUS_CLIP_SD * law.radius_std_mm)
                * (2.0 * self.axis_jitter).exp()
                + self.center_jitter_mm
                + law.pred_bias.abs().max(law.label_bias.abs()) * self.spacing.iter().copied().fold(0.0, f64::max);
            if max_axis >= half_extent {
                return bad(format!(
                    "{g}: tumors up to {max_axis:.2} mm from centre do not fit half-extent {half_extent:.2} mm"
                ));
            }
        }
        Ok(())
    }
}

/// Voxel occupied iff its centre lies inside the axis-aligned ellipsoid.
pub fn ellipsoid_mask(center: [f64; 3], radii: [f64; 3], grid: [usize; 3], spacing: [f64; 3]) -> Result<VoxelMask> {
    if radii.iter().any(|&r| !(r > 0.0)) {
        return Err(SynthError::Config(format!("radii {radii:?} must be positive")));
    }
    let m = VoxelMask::from_fn(grid, spacing, |x, y, z| {
        let p = [x, y, z];
        (0..3)
            .map(|a| {
                let c = (p[a] as f64 + 0.5) * spacing[a];
                ((c - center[a]) / radii[a]).powi(2)
            })
            .sum::<f64>()
            <= 1.0
    })?;
    if !m.has_occupied() {
        return Err(SynthError::EmptyEllipsoid);
    }
    Ok(m)
}

/// `floor(|layers|)` erosions (dilations for negative `layers`), then each
/// voxel of the surface band flips with probability `flip_rate`. The band is
/// the surface of the morphed mask plus its unoccupied 6-neighbours.
pub fn perturb_mask(m: &VoxelMask, layers: f64, flip_rate: f64, seed: u64) -> Result<VoxelMask> {
    if !m.has_occupied() {
        return Err(SynthError::EmptyInput);
    }
    if !layers.is_finite() || !(0.0..=1.0).contains(&flip_rate) {
        return Err(SynthError::Config(format!("layers {layers}, flip_rate {flip_rate}")));
    }
    let steps = layers.abs().floor() as usize;
    let mut out = m.clone();
    for _ in 0..steps {
        out = if layers > 0.0 { erode(&out) } else { dilate(&out) };
        if !out.has_occupied() {
            return Err(SynthError::Annihilated { layers });
        }
    }
    if flip_rate > 0.0 {
        let mut band: Vec<usize> = Vec::new();
        for c in surface_voxels(&out).coords {
            band.push(out.index(c[0], c[1], c[2]));
            out.for_each_neighbor6(c, |n, _| {
                if !out.data()[n] {
                    band.push(n);
                }
            });
        }
        band.sort_unstable();
        band.dedup();
        let mut rng = rng::stream(seed, "perturb");
        let flips: Vec<usize> = band.into_iter().filter(|_| rng.random::<f64>() < flip_rate).collect();
        for idx in flips {
            let [x, y, z] = out.coords(idx);
            let v = out.get(x, y, z);
            out.set(x, y, z, !v);
        }
        if !out.has_occupied() {
            return Err(SynthError::Annihilated { layers });
        }
    }
    Ok(out)
}

/// Expert 1 rates from silver Dice.
pub fn rating_from_dice(dice: f64) -> Rating {
    if dice >= 0.75 {
        Rating::Good
    } else if dice >= 0.5 {
        Rating::Acceptable
    } else if dice > 0.0 {
        Rating::Poor
    } else {
        Rating::Missed
    }
}

/// Expert 2 rates from silver HD95 in mm (`None`: undefined distance).
pub fn rating_from_hd95(hd95: Option<f64>) -> Rating {
    match hd95 {
        Some(h) if h <= 12.0 => Rating::Good,
        Some(h) if h <= 20.0 => Rating::Acceptable,
        Some(h) if h.is_finite() => Rating::Poor,
        _ => Rating::Missed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InjectedBias {
    pub label_bias: f64,
    pub pred_bias: f64,
    pub flip_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCase {
    pub record: CaseRecord,
    pub gold: VoxelMask,
    pub silver: VoxelMask,
    pub pred: VoxelMask,
    pub radii_mm: [f64; 3],
    pub injected: InjectedBias,
}

pub fn case_id(group: AgeGroup, index: usize) -> String {
    format!("syn_{}_{:04}", group.label().to_lowercase(), index)
}

fn gen_case(cfg: &SynthConfig, group: AgeGroup, law: &GroupLaw, index: usize) -> Result<SynthCase> {
    let id = case_id(group, index);
    let mut shape = rng::stream(cfg.seed, &format!("case/{id}/shape"));
    let r = if law.radius_std_mm > 0.0 {
        let normal = Normal::new(law.radius_mean_mm, law.radius_std_mm).expect("validated");
        let lo = (law.radius_mean_mm - RADIUS_CLIP_SD * law.radius_std_mm).max(0.5 * law.radius_mean_mm);
        let hi = law.radius_mean_mm + RADIUS_CLIP_SD * law.radius_std_mm;
        normal.sample(&mut shape).clamp(lo, hi)
    } else {
        law.radius_mean_mm
    };
    let mut logs: [f64; 3] = std::array::from_fn(|_| {
        if cfg.axis_jitter > 0.0 {
            shape.random_range(-cfg.axis_jitter..=cfg.axis_jitter)
        } else {
            0.0
        }
    });
    let mean_log = logs.iter().sum::<f64>() / 3.0;
    logs.iter_mut().for_each(|l| *l -= mean_log);
    let radii = logs.map(|l| r * l.exp());
    let center: [f64; 3] = std::array::from_fn(|a| {
        let mid = cfg.grid[a] as f64 * cfg.spacing[a] / 2.0;
        if cfg.center_jitter_mm > 0.0 {
            mid + shape.random_range(-cfg.center_jitter_mm..=cfg.center_jitter_mm)
        } else {
            mid
        }
    });
    let gold = ellipsoid_mask(center, radii, cfg.grid, cfg.spacing)?;
    let silver = perturb_mask(&gold, law.label_bias, cfg.flip_rate, rng::derive_seed(cfg.seed, &format!("case/{id}/silver")))?;
    let pred = perturb_mask(&gold, law.pred_bias, cfg.flip_rate, rng::derive_seed(cfg.seed, &format!("case/{id}/pred")))?;

    let (lo, hi) = group.synthetic_age_range();
    let age = rng::stream(cfg.seed, &format!("case/{id}/age")).random_range(lo..=hi);
    let silver_dice = metrics::dice(&silver, &gold)?;
    let silver_hd95 = metrics::hd95(&silver, &gold)?;
    let mut record = CaseRecord::new(id.clone(), age, rating_from_dice(silver_dice), rating_from_hd95(silver_hd95))
        .with_silver_metrics(silver_dice, silver_hd95);
    record.masks = MaskRefs {
        gold: Some(mask_file_name(&id)),
        silver: Some(mask_file_name(&id)),
        prediction: Some(mask_file_name(&id)),
    };
    Ok(SynthCase {
        record,
        gold,
        silver,
        pred,
        radii_mm: radii,
        injected: InjectedBias {
            label_bias: law.label_bias,
            pred_bias: law.pred_bias,
            flip_rate: cfg.flip_rate,
        },
    })
}

pub fn mask_file_name(case_id: &str) -> String {
    format!("{case_id}.sfm")
}

/// Cases ordered by group, then index. Each case depends only on
/// `(seed, case_id)`, so generation runs in parallel.
pub fn gen_cohort(cfg: &SynthConfig) -> Result<Vec<SynthCase>> {
    cfg.validate()?;
    let jobs: Vec<(AgeGroup, &GroupLaw, usize)> = cfg
        .groups
        .iter()
        .flat_map(|(g, law)| (0..cfg.n_per_group).map(move |i| (*g, law, i)))
        .collect();
    jobs.par_iter()
        .map(|&(g, law, i)| gen_case(cfg, g, law, i))
        .collect()
}

pub const METADATA_HEADER: &str = "case_id,age,expert1,expert2,gold_path,silver_path,pred_path";

/// Writes `gold/`, `silver/`, `pred/` raw-v1 masks and `metadata.csv` under
/// `dir`. Mask paths in the CSV are file names relative to their directory.
pub fn write_cohort(cases: &[SynthCase], dir: &Path) -> Result<PathBuf> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SynthError::Io { path, source }
    };
    for sub in ["gold", "silver", "pred"] {
        fs::create_dir_all(dir.join(sub)).map_err(io(&dir.join(sub)))?;
    }
    let meta_path = dir.join("metadata.csv");
    let mut meta = Vec::new();
    writeln!(meta, "{METADATA_HEADER}").expect("in-memory write");
    for c in cases {
        let name = mask_file_name(&c.record.case_id);
        volume::save_mask(&c.gold, &dir.join("gold").join(&name))?;
        volume::save_mask(&c.silver, &dir.join("silver").join(&name))?;
        volume::save_mask(&c.pred, &dir.join("pred").join(&name))?;
        writeln!(
            meta,
            "{},{},{},{},{name},{name},{name}",
            c.record.case_id, c.record.age, c.record.expert1, c.record.expert2
        )
        .expect("in-memory write");
    }
    fs::write(&meta_path, meta).map_err(io(&meta_path))?;
    Ok(meta_path)
}
