use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use segfair_core::fairness::{audit_groups, gap_extremes, relative_change, BiasComparison, FairnessReport, DEFAULT_THRESHOLD};
use segfair_core::metrics::{dice, hd95, CaseMetrics};
use segfair_core::stats::{anova_oneway, ols_fit, AnovaResult, RegressionResult};
use segfair_core::{AgeGroup, CaseRecord};

use crate::context::{Provenance, RunContext, SCHEMA_VERSION};
use crate::error::{input, CliError, Result};
use crate::ingest::{self, check_exclusions, fmt_opt, CsvOut, Exclusion, MaskDirs, Resample};
use crate::svg::{scatter_with_fit, ScatterPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct PairMetrics {
    dice: f64,
    hd95: Option<f64>,
}

struct Evaluated {
    record: CaseRecord,
    pred_gold: CaseMetrics,
    pred_silver: Option<PairMetrics>,
    silver_gold: Option<PairMetrics>,
}

/// One scored case within a comparison.
pub struct Scored {
    pub case_id: String,
    pub group: String,
    pub age: Option<f64>,
    pub dice: f64,
    pub hd95: Option<f64>,
}

pub struct Comparison {
    pub name: &'static str,
    pub role: &'static str,
    pub rows: Vec<Scored>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapMetric {
    Dice,
    Hd95,
}

impl GapMetric {
    fn label(self) -> &'static str {
        match self {
            GapMetric::Dice => "dice",
            GapMetric::Hd95 => "hd95",
        }
    }
}

pub struct AuditSettings {
    pub threshold: f64,
    pub pair: (String, String),
    pub gap_metric: GapMetric,
}

pub fn parse_pair(v: &str) -> Result<(String, String)> {
    let parts: Vec<&str> = v.split(['/', ',']).map(str::trim).collect();
    if parts.len() != 2 {
        return Err(CliError::Input(format!("pair = {v:?}: expected two groups like Young/Older")));
    }
    let canon = |s: &str| -> Result<String> { Ok(s.parse::<AgeGroup>().map_err(input)?.to_string()) };
    let (a, b) = (canon(parts[0])?, canon(parts[1])?);
    if a == b {
        return Err(CliError::Input(format!("pair = {v:?}: groups must differ")));
    }
    Ok((a, b))
}

impl AuditSettings {
    pub fn from_context(ctx: &RunContext) -> Result<Self> {
        let threshold = ctx.settings.parse_or("threshold", DEFAULT_THRESHOLD)?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(CliError::Input(format!("threshold {threshold} outside (0, 1)")));
        }
        let pair = parse_pair(ctx.settings.get("pair").unwrap_or("Young/Older"))?;
        let gap_metric = match ctx.settings.get("gap_metric").unwrap_or("dice") {
            "dice" => GapMetric::Dice,
            "hd95" => GapMetric::Hd95,
            other => return Err(CliError::Input(format!("gap_metric {other:?}: expected dice or hd95"))),
        };
        Ok(Self { threshold, pair, gap_metric })
    }
}

fn evaluate(rec: &CaseRecord, dirs: &MaskDirs, resample: Resample) -> std::result::Result<Evaluated, String> {
    let gold_rel = rec.masks.gold.as_deref().ok_or("no gold mask listed")?;
    let pred_rel = rec.masks.prediction.as_deref().ok_or("no prediction mask listed")?;
    let gold = ingest::load(&ingest::resolve(&dirs.gold, gold_rel), resample)?;
    let pred = ingest::load(&ingest::resolve(&dirs.pred, pred_rel), resample)?;
    let pred_gold = CaseMetrics::compute(&pred, &gold).map_err(|e| format!("prediction vs gold: {e}"))?;
    let silver = match rec.masks.silver.as_deref() {
        Some(rel) => match ingest::load(&ingest::resolve(&dirs.silver, rel), resample) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("{}: silver unavailable, skipping silver comparisons: {e}", rec.case_id);
                None
            }
        },
        None => None,
    };
    let mut record = rec.clone();
    let (pred_silver, silver_gold) = match &silver {
        Some(s) => {
            let pair = |a, b| -> std::result::Result<PairMetrics, String> {
                Ok(PairMetrics {
                    dice: dice(a, b).map_err(|e| e.to_string())?,
                    hd95: hd95(a, b).map_err(|e| e.to_string())?,
                })
            };
            let sg = pair(s, &gold)?;
            record = record.with_silver_metrics(sg.dice, sg.hd95);
            (Some(pair(&pred, s)?), Some(sg))
        }
        None => (None, None),
    };
    Ok(Evaluated {
        record,
        pred_gold,
        pred_silver,
        silver_gold,
    })
}

#[derive(Serialize)]
struct GapOut {
    metric: &'static str,
    value: f64,
    best: String,
    worst: String,
}

#[derive(Serialize)]
struct ComparisonOut {
    role: &'static str,
    n: usize,
    gap: Option<GapOut>,
    report: FairnessReport,
}

#[derive(Serialize)]
struct FairnessOut {
    schema_version: u32,
    provenance: Provenance,
    threshold: f64,
    pair: (String, String),
    n_cases: usize,
    excluded: Vec<Exclusion>,
    comparisons: BTreeMap<&'static str, ComparisonOut>,
    /// Gap measured against silver relative to the gap against gold.
    biased_ruler: Option<BiasComparison>,
}

#[derive(Serialize)]
struct ComparisonStats {
    dice_vs_age: Option<RegressionResult>,
    hd95_vs_age: Option<RegressionResult>,
    anova_dice: Option<AnovaResult>,
    anova_hd95: Option<AnovaResult>,
}

#[derive(Serialize)]
struct StatsOut {
    schema_version: u32,
    provenance: Provenance,
    comparisons: BTreeMap<&'static str, ComparisonStats>,
}

fn group_lists<F: Fn(&Scored) -> Option<f64>>(rows: &[Scored], f: F) -> BTreeMap<String, Vec<f64>> {
    let mut by: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = f(r) {
            by.entry(r.group.clone()).or_default().push(v);
        }
    }
    by
}

fn regression<F: Fn(&Scored) -> Option<f64>>(rows: &[Scored], f: F) -> Option<RegressionResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| Some((r.age?, f(r)?))).unzip();
    ols_fit(&x, &y).ok()
}

fn anova<F: Fn(&Scored) -> Option<f64>>(rows: &[Scored], f: F) -> Option<AnovaResult> {
    let lists: Vec<Vec<f64>> = group_lists(rows, f).into_values().collect();
    anova_oneway(&lists).ok()
}

fn selected_gap(rows: &[Scored], metric: GapMetric) -> Option<GapOut> {
    let (lists, higher_is_better) = match metric {
        GapMetric::Dice => (group_lists(rows, |r| Some(r.dice)), true),
        GapMetric::Hd95 => (group_lists(rows, |r| r.hd95), false),
    };
    let means: Vec<(String, f64)> = lists
        .into_iter()
        .map(|(g, v)| (g, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    let e = gap_extremes(&means, higher_is_better).ok()?;
    Some(GapOut {
        metric: metric.label(),
        value: e.gap,
        best: e.best,
        worst: e.worst,
    })
}

/// Writes `fairness.json`, `stats.json` and one figure per comparison.
pub fn summarize(
    ctx: &RunContext,
    cfg: &AuditSettings,
    comparisons: &[Comparison],
    n_cases: usize,
    excluded: Vec<Exclusion>,
) -> Result<()> {
    let mut fair = BTreeMap::new();
    let mut stats = BTreeMap::new();
    let pair = (cfg.pair.0.as_str(), cfg.pair.1.as_str());
    for c in comparisons {
        if c.rows.is_empty() {
            log::warn!("comparison {} has no cases; omitted", c.name);
            continue;
        }
        let scores: Vec<(&str, f64)> = c.rows.iter().map(|r| (r.group.as_str(), r.dice)).collect();
        let mut report = audit_groups(&scores, cfg.threshold, pair).map_err(|e| CliError::Input(format!("{}: {e}", c.name)))?;
        report.ols = regression(&c.rows, |r| Some(r.dice));
        let st = ComparisonStats {
            dice_vs_age: report.ols.clone(),
            hd95_vs_age: regression(&c.rows, |r| r.hd95),
            anova_dice: anova(&c.rows, |r| Some(r.dice)),
            anova_hd95: anova(&c.rows, |r| r.hd95),
        };
        let points: Vec<ScatterPoint> = c
            .rows
            .iter()
            .filter_map(|r| Some(ScatterPoint { x: r.age?, y: r.dice, group: r.group.as_str() }))
            .collect();
        if !points.is_empty() {
            let annotation = st
                .dice_vs_age
                .as_ref()
                .map(|o| format!("Dice = {:.4} + {:.5} * age   R2 = {:.3}   p = {:.3e}", o.intercept, o.slope, o.r2, o.p_slope));
            let svg = scatter_with_fit(
                &format!("Dice vs age ({})", c.name),
                "age (years)",
                "Dice",
                &points,
                st.dice_vs_age.as_ref().map(|o| (o.slope, o.intercept)),
                annotation.as_deref(),
                ctx.timestamp(),
            );
            ingest::write_text(&ctx.path(&format!("fig1_dice_age_{}.svg", c.name)), &svg)?;
        }
        fair.insert(
            c.name,
            ComparisonOut {
                role: c.role,
                n: c.rows.len(),
                gap: selected_gap(&c.rows, cfg.gap_metric),
                report,
            },
        );
        stats.insert(c.name, st);
    }
    let gap_of = |name: &str| fair.get(name).and_then(|c: &ComparisonOut| c.gap.as_ref()).map(|g| g.value);
    let biased_ruler = match (gap_of("pred_vs_silver"), gap_of("pred_vs_gold")) {
        (Some(observed), Some(truth)) => Some(relative_change(observed, truth)),
        _ => None,
    };
    ingest::write_json(
        &ctx.path("fairness.json"),
        &FairnessOut {
            schema_version: SCHEMA_VERSION,
            provenance: ctx.provenance(),
            threshold: cfg.threshold,
            pair: cfg.pair.clone(),
            n_cases,
            excluded,
            comparisons: fair,
            biased_ruler,
        },
    )?;
    ingest::write_json(
        &ctx.path("stats.json"),
        &StatsOut {
            schema_version: SCHEMA_VERSION,
            provenance: ctx.provenance(),
            comparisons: stats,
        },
    )
}

const CASES_HEADER: &[&str] = &[
    "case_id",
    "age",
    "age_group",
    "expert1",
    "expert2",
    "tier",
    "difficulty",
    "status",
    "dice_pred_gold",
    "hd95_pred_gold",
    "dice_pred_silver",
    "hd95_pred_silver",
    "dice_silver_gold",
    "hd95_silver_gold",
    "volume_mm3",
    "sphericity",
    "elongation",
];

fn run_masks(ctx: &RunContext, cfg: &AuditSettings) -> Result<()> {
    let metadata = ctx.metadata()?;
    let cases = ingest::read_metadata(&metadata)?;
    let dirs = MaskDirs::from_settings(&ctx.settings, &metadata);
    let resample = Resample::from_settings(&ctx.settings)?;
    let results: Vec<std::result::Result<Evaluated, String>> = cases.par_iter().map(|c| evaluate(c, &dirs, resample)).collect();

    let mut csv = CsvOut::new(CASES_HEADER);
    let mut evaluated = Vec::new();
    let mut excluded = Vec::new();
    for (case, res) in cases.iter().zip(results) {
        match res {
            Ok(e) => {
                let r = &e.record;
                let pg = &e.pred_gold;
                csv.row([
                    r.case_id.clone(),
                    r.age.to_string(),
                    r.age_group.to_string(),
                    r.expert1.to_string(),
                    r.expert2.to_string(),
                    r.tier.map(|t| t.to_string()).unwrap_or_default(),
                    r.difficulty().map(|d| d.to_string()).unwrap_or_default(),
                    "ok".to_string(),
                    pg.dice.to_string(),
                    fmt_opt(pg.hd95_mm),
                    fmt_opt(e.pred_silver.map(|p| p.dice)),
                    fmt_opt(e.pred_silver.and_then(|p| p.hd95)),
                    fmt_opt(e.silver_gold.map(|p| p.dice)),
                    fmt_opt(e.silver_gold.and_then(|p| p.hd95)),
                    pg.volume_mm3.to_string(),
                    fmt_opt(pg.sphericity),
                    fmt_opt(pg.elongation),
                ]);
                evaluated.push(e);
            }
            Err(reason) => {
                let mut row = vec![
                    case.case_id.clone(),
                    case.age.to_string(),
                    case.age_group.to_string(),
                    case.expert1.to_string(),
                    case.expert2.to_string(),
                    String::new(),
                    String::new(),
                    format!("excluded: {reason}"),
                ];
                row.resize(CASES_HEADER.len(), String::new());
                csv.row(row);
                excluded.push(Exclusion {
                    case_id: case.case_id.clone(),
                    reason,
                });
            }
        }
    }
    check_exclusions(cases.len(), &excluded)?;
    csv.save(&ctx.path("cases.csv"))?;

    let scored = |f: &dyn Fn(&Evaluated) -> Option<(f64, Option<f64>)>| -> Vec<Scored> {
        evaluated
            .iter()
            .filter_map(|e| {
                let (dice, hd95) = f(e)?;
                Some(Scored {
                    case_id: e.record.case_id.clone(),
                    group: e.record.age_group.to_string(),
                    age: Some(e.record.age as f64),
                    dice,
                    hd95,
                })
            })
            .collect()
    };
    let comparisons = [
        Comparison {
            name: "pred_vs_gold",
            role: "true",
            rows: scored(&|e| Some((e.pred_gold.dice, e.pred_gold.hd95_mm))),
        },
        Comparison {
            name: "pred_vs_silver",
            role: "observed",
            rows: scored(&|e| e.pred_silver.map(|p| (p.dice, p.hd95))),
        },
        Comparison {
            name: "silver_vs_gold",
            role: "label_quality",
            rows: scored(&|e| e.silver_gold.map(|p| (p.dice, p.hd95))),
        },
    ];
    summarize(ctx, cfg, &comparisons, cases.len(), excluded)
}

#[derive(Deserialize)]
struct ScoreRow {
    case_id: String,
    age_group: String,
    dice: f64,
    #[serde(default)]
    hd95: Option<f64>,
    #[serde(default)]
    age: Option<f64>,
}

/// Audits precomputed per-case scores (`case_id,age_group,dice[,hd95][,age]`).
fn run_scores(ctx: &RunContext, cfg: &AuditSettings, path: &Path) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut rows = Vec::new();
    for row in reader.deserialize::<ScoreRow>() {
        let r = row.map_err(|e| CliError::io(path, e))?;
        let group = r.age_group.parse::<AgeGroup>().map(|g| g.to_string()).unwrap_or(r.age_group);
        if !r.dice.is_finite() {
            return Err(CliError::Input(format!("{}: dice must be finite", r.case_id)));
        }
        rows.push(Scored {
            case_id: r.case_id,
            group,
            age: r.age,
            dice: r.dice,
            hd95: r.hd95,
        });
    }
    let mut csv = CsvOut::new(&["case_id", "age", "age_group", "dice", "hd95"]);
    for r in &rows {
        csv.row([r.case_id.clone(), fmt_opt(r.age), r.group.clone(), r.dice.to_string(), fmt_opt(r.hd95)]);
    }
    csv.save(&ctx.path("cases.csv"))?;
    let n = rows.len();
    summarize(
        ctx,
        cfg,
        &[Comparison {
            name: "scores",
            role: "fixture",
            rows,
        }],
        n,
        Vec::new(),
    )
}

pub fn run(ctx: &RunContext) -> Result<()> {
    let cfg = AuditSettings::from_context(ctx)?;
    match ctx.settings.path("scores") {
        Some(p) => run_scores(ctx, &cfg, &p),
        None => run_masks(ctx, &cfg),
    }
}
