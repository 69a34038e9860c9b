use std::collections::BTreeMap;

use serde::Serialize;
use segfair_core::embedding::{density_1d, evaluate_embedding, tsne, ClusterEval, FeatureMatrix, KlPoint, TsneParams};
use segfair_core::AgeGroup;

use crate::context::{Provenance, RunContext, SCHEMA_VERSION};
use crate::error::{input, CliError, Result};
use crate::ingest::{self, CsvOut};
use crate::svg::{embedding_with_density, ScatterPoint};

const DENSITY_BINS: usize = 30;

/// Rows sorted by case id. Header must be `case_id,f0,f1,...`.
fn read_features(path: &std::path::Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let header = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    if header.get(0) != Some("case_id") || header.len() < 2 {
        return Err(CliError::Input(format!("{}: header must be case_id,f0,f1,...", path.display())));
    }
    let mut rows = BTreeMap::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let id = rec[0].to_string();
        let values = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| CliError::Input(format!("{}: row {}: {e}", path.display(), n + 2)))?;
        if rows.insert(id.clone(), values).is_some() {
            return Err(CliError::Input(format!("{}: duplicate case_id {id:?}", path.display())));
        }
    }
    Ok(rows.into_iter().collect())
}

#[derive(Serialize)]
struct ClusterOut {
    schema_version: u32,
    provenance: Provenance,
    n: usize,
    dims: usize,
    params: TsneParams,
    evaluation: ClusterEval,
    kl_trace: Vec<KlPoint>,
    max_perplexity_error: f64,
    unmatched_metadata: Vec<String>,
}

pub fn run(ctx: &RunContext) -> Result<()> {
    let metadata = ctx.metadata()?;
    let features_path = ctx.settings.path("features").ok_or_else(|| CliError::Input("missing required setting \"features\"".into()))?;
    let cases = ingest::read_metadata(&metadata)?;
    let groups: BTreeMap<&str, AgeGroup> = cases.iter().map(|c| (c.case_id.as_str(), c.age_group)).collect();
    let features = read_features(&features_path)?;

    let unknown: Vec<&str> = features.iter().map(|(id, _)| id.as_str()).filter(|id| !groups.contains_key(id)).collect();
    if !unknown.is_empty() {
        return Err(CliError::Input(format!("feature rows without metadata: {}", unknown.join(", "))));
    }
    let have: std::collections::BTreeSet<&str> = features.iter().map(|(id, _)| id.as_str()).collect();
    let unmatched_metadata: Vec<String> = groups.keys().filter(|id| !have.contains(*id)).map(|s| s.to_string()).collect();
    if !unmatched_metadata.is_empty() {
        log::warn!("{} metadata cases have no features", unmatched_metadata.len());
    }

    let ids: Vec<String> = features.iter().map(|(id, _)| id.clone()).collect();
    let labels: Vec<AgeGroup> = ids.iter().map(|id| groups[id.as_str()]).collect();
    let matrix = FeatureMatrix::new(features.into_iter().map(|(_, v)| v).collect(), labels.clone()).map_err(input)?;

    let mut params = TsneParams::for_n(matrix.n(), ctx.seed);
    params.perplexity = ctx.settings.parse_or("perplexity", params.perplexity)?;
    params.iters = ctx.settings.parse_or("iters", params.iters)?;
    params.learning_rate = ctx.settings.parse_or("learning_rate", params.learning_rate)?;
    let result = tsne(&matrix, &params).map_err(input)?;
    let label_idx = matrix.label_indices();
    let evaluation = evaluate_embedding(&result.embedding, &label_idx, ctx.seed).map_err(input)?;

    let mut csv = CsvOut::new(&["case_id", "t1", "t2", "age_group"]);
    for ((id, p), g) in ids.iter().zip(&result.embedding).zip(&labels) {
        csv.row([id.clone(), p[0].to_string(), p[1].to_string(), g.to_string()]);
    }
    csv.save(&ctx.path("embedding.csv"))?;

    let points: Vec<ScatterPoint> = result
        .embedding
        .iter()
        .zip(&labels)
        .map(|(p, g)| ScatterPoint { x: p[0], y: p[1], group: g.label() })
        .collect();
    let mut densities = Vec::new();
    for g in AgeGroup::ALL {
        let xs: Vec<f64> = points.iter().filter(|p| p.group == g.label()).map(|p| p.x).collect();
        if let Ok(d) = density_1d(&xs, DENSITY_BINS) {
            densities.push((g.to_string(), d));
        }
    }
    let svg = embedding_with_density("Feature embedding by age group", &points, &densities, ctx.timestamp());
    ingest::write_text(&ctx.path("fig3_embedding.svg"), &svg)?;

    let max_perplexity_error = result
        .row_perplexity
        .iter()
        .map(|p| (p - params.perplexity).abs())
        .fold(0.0, f64::max);
    ingest::write_json(
        &ctx.path("cluster_eval.json"),
        &ClusterOut {
            schema_version: SCHEMA_VERSION,
            provenance: ctx.provenance(),
            n: matrix.n(),
            dims: matrix.d(),
            params,
            evaluation,
            kl_trace: result.kl_trace,
            max_perplexity_error,
            unmatched_metadata,
        },
    )
}
