use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use segfair_core::metrics::{elongation, sphericity, tumor_volume};
use segfair_core::stats::{mean_std, welch_ttest, MeanStd, TTestResult};
use segfair_core::{AgeGroup, CaseRecord};

use crate::context::{Provenance, RunContext, SCHEMA_VERSION};
use crate::error::Result;
use crate::ingest::{self, check_exclusions, fmt_opt, CsvOut, Exclusion, MaskDirs, Resample};
use crate::svg::box_plots;

#[derive(Debug, Clone, Copy)]
struct Shape {
    volume: f64,
    sphericity: Option<f64>,
    elongation: Option<f64>,
}

const FEATURES: [&str; 3] = ["volume_mm3", "sphericity", "elongation"];

impl Shape {
    fn feature(&self, name: &str) -> Option<f64> {
        match name {
            "volume_mm3" => Some(self.volume),
            "sphericity" => self.sphericity,
            "elongation" => self.elongation,
            _ => None,
        }
    }
}

fn measure(rec: &CaseRecord, dirs: &MaskDirs, resample: Resample) -> std::result::Result<Shape, String> {
    let rel = rec.masks.gold.as_deref().ok_or("no gold mask listed")?;
    let m = ingest::load(&ingest::resolve(&dirs.gold, rel), resample)?;
    if !m.has_occupied() {
        return Err("gold mask is empty".into());
    }
    Ok(Shape {
        volume: tumor_volume(&m),
        sphericity: sphericity(&m).ok(),
        elongation: elongation(&m),
    })
}

#[derive(Serialize)]
struct PairTest {
    feature: &'static str,
    group_a: AgeGroup,
    group_b: AgeGroup,
    mean_ratio: Option<f64>,
    test: TTestResult,
}

#[derive(Serialize)]
struct MorphOut {
    schema_version: u32,
    provenance: Provenance,
    n_cases: usize,
    excluded: Vec<Exclusion>,
    groups: BTreeMap<AgeGroup, BTreeMap<&'static str, Option<MeanStd>>>,
    tests: Vec<PairTest>,
    warnings: Vec<String>,
}

pub fn run(ctx: &RunContext) -> Result<()> {
    let metadata = ctx.metadata()?;
    let cases = ingest::read_metadata(&metadata)?;
    let dirs = MaskDirs::from_settings(&ctx.settings, &metadata);
    let resample = Resample::from_settings(&ctx.settings)?;
    let shapes: Vec<_> = cases.par_iter().map(|c| measure(c, &dirs, resample)).collect();

    let mut csv = CsvOut::new(&["case_id", "age", "age_group", "status", "volume_mm3", "sphericity", "elongation"]);
    let mut excluded = Vec::new();
    let mut by_group: BTreeMap<AgeGroup, Vec<Shape>> = BTreeMap::new();
    for (c, s) in cases.iter().zip(shapes) {
        match s {
            Ok(s) => {
                csv.row([
                    c.case_id.clone(),
                    c.age.to_string(),
                    c.age_group.to_string(),
                    "ok".into(),
                    s.volume.to_string(),
                    fmt_opt(s.sphericity),
                    fmt_opt(s.elongation),
                ]);
                by_group.entry(c.age_group).or_default().push(s);
            }
            Err(reason) => {
                csv.row([
                    c.case_id.clone(),
                    c.age.to_string(),
                    c.age_group.to_string(),
                    format!("excluded: {reason}"),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
                excluded.push(Exclusion {
                    case_id: c.case_id.clone(),
                    reason,
                });
            }
        }
    }
    check_exclusions(cases.len(), &excluded)?;
    csv.save(&ctx.path("morph_cases.csv"))?;

    let values = |g: &AgeGroup, f: &str| -> Vec<f64> { by_group[g].iter().filter_map(|s| s.feature(f)).collect() };
    let mut groups = BTreeMap::new();
    for g in by_group.keys() {
        let stats = FEATURES.iter().map(|f| (*f, mean_std(&values(g, f)).ok())).collect();
        groups.insert(*g, stats);
    }
    let mut warnings = Vec::new();
    let present: Vec<AgeGroup> = by_group.keys().copied().collect();
    if present.len() < 2 {
        let w = format!("only {} age group(s) present; no between-group tests", present.len());
        log::warn!("{w}");
        warnings.push(w);
    }
    let mut tests = Vec::new();
    for f in FEATURES {
        for (i, a) in present.iter().enumerate() {
            for b in &present[i + 1..] {
                let (va, vb) = (values(a, f), values(b, f));
                match welch_ttest(&va, &vb) {
                    Ok(test) => {
                        let ma = va.iter().sum::<f64>() / va.len() as f64;
                        let mb = vb.iter().sum::<f64>() / vb.len() as f64;
                        tests.push(PairTest {
                            feature: f,
                            group_a: *a,
                            group_b: *b,
                            mean_ratio: (mb != 0.0).then(|| ma / mb),
                            test,
                        });
                    }
                    Err(e) => warnings.push(format!("{f} {a} vs {b}: {e}")),
                }
            }
        }
        let series: Vec<(String, Vec<f64>)> = present.iter().map(|g| (g.to_string(), values(g, f))).collect();
        let svg = box_plots(&format!("{f} by age group"), f, &series, ctx.timestamp());
        ingest::write_text(&ctx.path(&format!("fig2_{f}.svg")), &svg)?;
    }
    ingest::write_json(
        &ctx.path("morph.json"),
        &MorphOut {
            schema_version: SCHEMA_VERSION,
            provenance: ctx.provenance(),
            n_cases: cases.len(),
            excluded,
            groups,
            tests,
            warnings,
        },
    )
}
