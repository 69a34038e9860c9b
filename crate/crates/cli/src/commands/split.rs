use rayon::prelude::*;
use serde::Serialize;
use segfair_core::cohort::{build_manifest, CohortError, Design, ManifestOptions, DEFAULT_FOLDS, DEFAULT_N_EASY, DEFAULT_N_HARD};
use segfair_core::metrics::{dice, hd95};
use segfair_core::{CaseRecord, SplitManifest};

use crate::context::{Provenance, RunContext};
use crate::error::{input, CliError, Result};
use crate::ingest::{self, check_exclusions, CsvOut, Exclusion, MaskDirs, Resample};

fn needs_tiers(design: Design) -> bool {
    matches!(design, Design::SwapYoung | Design::SwapOlder | Design::DiffBal)
}

fn with_tier(rec: &CaseRecord, dirs: &MaskDirs, resample: Resample) -> std::result::Result<CaseRecord, String> {
    let gold_rel = rec.masks.gold.as_deref().ok_or("no gold mask listed")?;
    let silver_rel = rec.masks.silver.as_deref().ok_or("no silver mask listed")?;
    let gold = ingest::load(&ingest::resolve(&dirs.gold, gold_rel), resample)?;
    let silver = ingest::load(&ingest::resolve(&dirs.silver, silver_rel), resample)?;
    let d = dice(&silver, &gold).map_err(|e| e.to_string())?;
    let h = hd95(&silver, &gold).map_err(|e| e.to_string())?;
    Ok(rec.clone().with_silver_metrics(d, h))
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    #[serde(flatten)]
    manifest: &'a SplitManifest,
    provenance: Provenance,
    excluded: Vec<Exclusion>,
}

fn cohort_error(e: CohortError) -> CliError {
    match e {
        CohortError::InsufficientGroup { .. } | CohortError::InsufficientStratum { .. } | CohortError::GroupSmallerThanK { .. } => {
            CliError::Infeasible(e.to_string())
        }
        other => CliError::Input(other.to_string()),
    }
}

pub fn run(ctx: &RunContext) -> Result<()> {
    let design: Design = ctx.settings.require("design")?.parse().map_err(input)?;
    let metadata = ctx.metadata()?;
    let mut cases = ingest::read_metadata(&metadata)?;
    let mut excluded = Vec::new();
    if needs_tiers(design) {
        let dirs = MaskDirs::from_settings(&ctx.settings, &metadata);
        let resample = Resample::from_settings(&ctx.settings)?;
        let tiered: Vec<_> = cases.par_iter().map(|c| with_tier(c, &dirs, resample)).collect();
        let total = cases.len();
        cases = cases
            .iter()
            .zip(tiered)
            .filter_map(|(c, r)| match r {
                Ok(t) => Some(t),
                Err(reason) => {
                    excluded.push(Exclusion {
                        case_id: c.case_id.clone(),
                        reason,
                    });
                    None
                }
            })
            .collect();
        check_exclusions(total, &excluded)?;
    }
    let options = ManifestOptions {
        folds: ctx.settings.parse_or("folds", DEFAULT_FOLDS)?,
        n_per_group: ctx.settings.parse("per_group")?,
        n_easy: ctx.settings.parse_or("n_easy", DEFAULT_N_EASY)?,
        n_hard: ctx.settings.parse_or("n_hard", DEFAULT_N_HARD)?,
    };
    let manifest = build_manifest(design, &cases, ctx.seed, options).map_err(cohort_error)?;
    manifest.validate().map_err(|v| CliError::Internal(v.0))?;

    let mut csv = CsvOut::new(&["case_id", "age_group", "tier", "difficulty", "fold", "label_source"]);
    let folds = manifest.validation_folds();
    let sources: std::collections::BTreeMap<&str, String> =
        manifest.entries.iter().map(|e| (e.case_id.as_str(), e.label_source.to_string())).collect();
    for c in cases.iter().filter(|c| folds.contains_key(&c.case_id)) {
        csv.row([
            c.case_id.clone(),
            c.age_group.to_string(),
            c.tier.map(|t| t.to_string()).unwrap_or_default(),
            c.difficulty().map(|d| d.to_string()).unwrap_or_default(),
            folds[&c.case_id].to_string(),
            sources[c.case_id.as_str()].clone(),
        ]);
    }
    csv.save(&ctx.path(&format!("split_{design}.csv")))?;
    ingest::write_json(
        &ctx.path(&format!("manifest_{design}.json")),
        &ManifestFile {
            manifest: &manifest,
            provenance: ctx.provenance(),
            excluded,
        },
    )?;
    log::info!("{design}: {} cases in {} folds", folds.len(), manifest.folds);
    Ok(())
}
