//! Group fairness quantities: beneficial-outcome rate, demographic parity
//! difference (DPD), disparate impact ratio (DIR), the fairness gap between
//! the best and worst subgroup means, and relative gap changes across runs.
//!
//! A case has the beneficial outcome when its Dice is strictly above the
//! threshold (default 0.8). DIR below 0.8 flags adverse impact (four-fifths
//! rule); exactly 0.8 does not.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::stats::{anova_oneway, mean_std, AnovaResult, RegressionResult};

pub const DEFAULT_THRESHOLD: f64 = 0.8;
pub const FOUR_FIFTHS: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum FairnessError {
    #[error("empty score list")]
    EmptyScores,
    #[error("threshold {0} outside (0, 1)")]
    BadThreshold(f64),
    #[error("fairness gap needs at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("comparison group {0:?} has no cases")]
    MissingGroup(String),
}

pub type Result<T> = std::result::Result<T, FairnessError>;

pub fn beneficial_rate(scores: &[f64], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(FairnessError::EmptyScores);
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FairnessError::BadThreshold(threshold));
    }
    let hits = scores.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / scores.len() as f64)
}

pub fn dpd(rate_a: f64, rate_b: f64) -> f64 {
    (rate_a - rate_b).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirValue {
    pub value: f64,
    /// Both rates were zero; `value` is 1.0 by convention.
    pub degenerate: bool,
}

pub fn dir(rate_a: f64, rate_b: f64) -> DirValue {
    let hi = rate_a.max(rate_b);
    if hi == 0.0 {
        return DirValue {
            value: 1.0,
            degenerate: true,
        };
    }
    DirValue {
        value: rate_a.min(rate_b) / hi,
        degenerate: false,
    }
}

/// Max minus min of the group means.
pub fn fairness_gap<S: AsRef<str>>(group_means: &[(S, f64)]) -> Result<f64> {
    Ok(gap_extremes(group_means, true)?.gap)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapExtremes {
    pub gap: f64,
    pub best: String,
    pub worst: String,
}

/// Fairness gap together with the best and worst groups. With
/// `higher_is_better = false` (e.g. HD95) the lowest mean is the best group.
pub fn gap_extremes<S: AsRef<str>>(
    group_means: &[(S, f64)],
    higher_is_better: bool,
) -> Result<GapExtremes> {
    if group_means.len() < 2 {
        return Err(FairnessError::TooFewGroups(group_means.len()));
    }
    let (mut lo, mut hi) = (&group_means[0], &group_means[0]);
    for g in &group_means[1..] {
        if g.1 < lo.1 {
            lo = g;
        }
        if g.1 > hi.1 {
            hi = g;
        }
    }
    let (best, worst) = if higher_is_better { (hi, lo) } else { (lo, hi) };
    Ok(GapExtremes {
        gap: hi.1 - lo.1,
        best: best.0.as_ref().to_string(),
        worst: worst.0.as_ref().to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasComparison {
    pub gap_ref: f64,
    pub gap_new: f64,
    /// `(gap_new - gap_ref) / gap_ref`; `None` when `gap_ref` is 0.
    pub relative_change: Option<f64>,
}

pub fn relative_change(gap_new: f64, gap_ref: f64) -> BiasComparison {
    BiasComparison {
        gap_ref,
        gap_new,
        relative_change: (gap_ref > 0.0).then(|| (gap_new - gap_ref) / gap_ref),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupOutcome {
    pub group: String,
    pub n: usize,
    pub mean_dice: f64,
    pub std_dice: Option<f64>,
    pub beneficial_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessReport {
    pub groups: Vec<GroupOutcome>,
    pub comparison_pair: (String, String),
    pub threshold: f64,
    pub dpd: f64,
    pub dir: f64,
    pub dir_degenerate: bool,
    pub fairness_gap: f64,
    pub best_group: String,
    pub worst_group: String,
    pub adverse_impact: bool,
    /// `None` when some group has fewer than two cases.
    pub anova: Option<AnovaResult>,
    pub ols: Option<RegressionResult>,
}

/// Per-group Dice lists in label order.
fn group_scores<S: AsRef<str>>(cases: &[(S, f64)]) -> BTreeMap<String, Vec<f64>> {
    let mut by_group: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (g, s) in cases {
        by_group.entry(g.as_ref().to_string()).or_default().push(*s);
    }
    by_group
}

pub fn audit_groups<S: AsRef<str>>(
    cases: &[(S, f64)],
    threshold: f64,
    comparison_pair: (&str, &str),
) -> Result<FairnessReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(FairnessError::BadThreshold(threshold));
    }
    let by_group = group_scores(cases);
    for name in [comparison_pair.0, comparison_pair.1] {
        if !by_group.contains_key(name) {
            return Err(FairnessError::MissingGroup(name.to_string()));
        }
    }
    let mut groups = Vec::with_capacity(by_group.len());
    for (name, scores) in &by_group {
        let ms = mean_std(scores).map_err(|_| FairnessError::EmptyScores)?;
        groups.push(GroupOutcome {
            group: name.clone(),
            n: scores.len(),
            mean_dice: ms.mean,
            std_dice: ms.std,
            beneficial_rate: beneficial_rate(scores, threshold)?,
        });
    }
    let rate = |name: &str| {
        groups
            .iter()
            .find(|g| g.group == name)
            .map(|g| g.beneficial_rate)
            .expect("checked above")
    };
    let (ra, rb) = (rate(comparison_pair.0), rate(comparison_pair.1));
    let dir_value = dir(ra, rb);
    let means: Vec<(&str, f64)> = groups.iter().map(|g| (g.group.as_str(), g.mean_dice)).collect();
    let extremes = if means.len() >= 2 {
        gap_extremes(&means, true)?
    } else {
        GapExtremes {
            gap: 0.0,
            best: means[0].0.to_string(),
            worst: means[0].0.to_string(),
        }
    };
    let lists: Vec<&Vec<f64>> = by_group.values().collect();
    let anova = anova_oneway(&lists.iter().map(|v| v.as_slice()).collect::<Vec<_>>()).ok();
    Ok(FairnessReport {
        groups,
        comparison_pair: (comparison_pair.0.to_string(), comparison_pair.1.to_string()),
        threshold,
        dpd: dpd(ra, rb),
        dir: dir_value.value,
        dir_degenerate: dir_value.degenerate,
        fairness_gap: extremes.gap,
        best_group: extremes.best,
        worst_group: extremes.worst,
        adverse_impact: dir_value.value < FOUR_FIFTHS,
        anova,
        ols: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn beneficial_rate_is_strict() {
        assert_eq!(beneficial_rate(&[0.9, 0.9, 0.9], 0.8).unwrap(), 1.0);
        assert_eq!(beneficial_rate(&[0.8], 0.8).unwrap(), 0.0);
        assert_eq!(beneficial_rate(&[0.85, 0.75, 0.9, 0.5], 0.8).unwrap(), 0.5);
        assert_eq!(beneficial_rate(&[], 0.8), Err(FairnessError::EmptyScores));
        assert!(beneficial_rate(&[0.5], 1.0).is_err());
    }

    #[test]
    fn dpd_and_dir_examples() {
        assert_eq!(dpd(0.5, 0.5), 0.0);
        assert!((dpd(0.5, 0.6) - 0.1).abs() < 1e-15);
        assert_eq!(dpd(1.0, 0.0), 1.0);
        assert!((dir(0.5, 0.6).value - 0.8333333333333334).abs() < 1e-15);
        assert_eq!(dir(0.4, 0.4), DirValue { value: 1.0, degenerate: false });
        assert_eq!(dir(0.0, 0.0), DirValue { value: 1.0, degenerate: true });
    }

    #[test]
    fn gap_examples() {
        let g = fairness_gap(&[("Young", 0.7304), ("Middle", 0.7333), ("Older", 0.7703)]).unwrap();
        assert!((g - 0.0399).abs() < 1e-12);
        let g = fairness_gap(&[("Young", 0.6797), ("Middle", 0.7132), ("Older", 0.7458)]).unwrap();
        assert!((g - 0.0661).abs() < 1e-12);
        assert_eq!(fairness_gap(&[("a", 0.5), ("b", 0.5)]).unwrap(), 0.0);
        assert_eq!(fairness_gap(&[("a", 0.5)]), Err(FairnessError::TooFewGroups(1)));
        let e = gap_extremes(&[("a", 3.0), ("b", 9.0), ("c", 5.0)], false).unwrap();
        assert_eq!((e.best.as_str(), e.worst.as_str(), e.gap), ("a", "b", 6.0));
    }

    #[test]
    fn relative_change_examples() {
        let c = relative_change(0.0559, 0.0399).relative_change.unwrap();
        assert!((c - 0.401).abs() < 5e-4);
        let c = relative_change(0.0661, 0.0399).relative_change.unwrap();
        assert!((c - 0.657).abs() < 5e-4);
        assert_eq!(relative_change(0.3, 0.3).relative_change, Some(0.0));
        assert_eq!(relative_change(0.3, 0.0).relative_change, None);
    }

    /// `n` scores of which exactly `round(rate * n)` exceed 0.8.
    fn scores_with_rate(rate: f64, n: usize) -> Vec<f64> {
        let hits = (rate * n as f64).round() as usize;
        (0..n).map(|i| if i < hits { 0.9 } else { 0.6 }).collect()
    }

    #[test]
    fn audit_flags_adverse_impact() {
        let mut cases: Vec<(&str, f64)> = Vec::new();
        cases.extend(scores_with_rate(0.35, 100).into_iter().map(|s| ("Young", s)));
        cases.extend(scores_with_rate(0.50, 100).into_iter().map(|s| ("Older", s)));
        cases.extend(scores_with_rate(0.45, 100).into_iter().map(|s| ("Middle", s)));
        let r = audit_groups(&cases, 0.8, ("Young", "Older")).unwrap();
        assert!((r.dpd - 0.15).abs() < 1e-12);
        assert!((r.dir - 0.70).abs() < 1e-12);
        assert!(r.adverse_impact);
        assert_eq!(r.worst_group, "Young");
        assert_eq!(r.groups.iter().map(|g| g.group.as_str()).collect::<Vec<_>>(), ["Middle", "Older", "Young"]);
    }

    #[test]
    fn audit_parity_fixed_point() {
        let shared = [0.95, 0.7, 0.82, 0.4, 0.88];
        let cases: Vec<(&str, f64)> = ["Young", "Middle", "Older"]
            .iter()
            .flat_map(|g| shared.iter().map(move |&s| (*g, s)))
            .collect();
        let r = audit_groups(&cases, 0.8, ("Young", "Older")).unwrap();
        assert_eq!((r.dpd, r.dir, r.fairness_gap), (0.0, 1.0, 0.0));
        assert_eq!(r.anova.unwrap().p, 1.0);
        assert!(!r.adverse_impact);
    }

    #[test]
    fn audit_three_groups_gap() {
        let cases = [
            ("A", 0.5), ("A", 0.7), ("B", 0.65), ("B", 0.75), ("C", 0.8), ("C", 0.8),
        ];
        let r = audit_groups(&cases, 0.8, ("A", "C")).unwrap();
        assert!((r.fairness_gap - 0.2).abs() < 1e-12);
        assert!(matches!(
            audit_groups(&cases, 0.8, ("A", "Z")),
            Err(FairnessError::MissingGroup(g)) if g == "Z"
        ));
    }

    #[test]
    fn adverse_impact_flips_strictly_below_four_fifths() {
        // Young rate 4/5 of Older rate exactly: 0.4 vs 0.5.
        let mut cases: Vec<(&str, f64)> = Vec::new();
        cases.extend(scores_with_rate(0.4, 10).into_iter().map(|s| ("Young", s)));
        cases.extend(scores_with_rate(0.5, 10).into_iter().map(|s| ("Older", s)));
        let r = audit_groups(&cases, 0.8, ("Young", "Older")).unwrap();
        assert_eq!(r.dir, 0.8);
        assert!(!r.adverse_impact);
        let mut cases: Vec<(&str, f64)> = Vec::new();
        cases.extend(scores_with_rate(0.39, 100).into_iter().map(|s| ("Young", s)));
        cases.extend(scores_with_rate(0.5, 100).into_iter().map(|s| ("Older", s)));
        assert!(audit_groups(&cases, 0.8, ("Young", "Older")).unwrap().adverse_impact);
    }

    proptest! {
        #[test]
        fn dpd_dir_symmetry_and_range(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            prop_assert_eq!(dpd(a, b), dpd(b, a));
            prop_assert_eq!(dir(a, b), dir(b, a));
            let d = dir(a, b).value;
            prop_assert!((0.0..=1.0).contains(&d));
            if a.max(b) > 0.0 {
                prop_assert_eq!(dpd(a, b) == 0.0, d == 1.0);
            }
        }

        #[test]
        fn gap_is_permutation_invariant(means in prop::collection::vec(0.0f64..1.0, 2..8), rot in 0usize..8) {
            let named: Vec<(String, f64)> = means.iter().enumerate().map(|(i, &m)| (format!("g{i}"), m)).collect();
            let mut rotated = named.clone();
            rotated.rotate_left(rot % named.len());
            prop_assert_eq!(fairness_gap(&named).unwrap(), fairness_gap(&rotated).unwrap());
        }

        #[test]
        fn shared_scores_give_parity(scores in prop::collection::vec(0.0f64..1.0, 2..30)) {
            let cases: Vec<(&str, f64)> = ["Young", "Middle", "Older"]
                .iter()
                .flat_map(|g| scores.iter().map(move |&s| (*g, s)))
                .collect();
            let r = audit_groups(&cases, 0.8, ("Young", "Older")).unwrap();
            prop_assert_eq!(r.dpd, 0.0);
            prop_assert_eq!(r.dir, 1.0);
            prop_assert_eq!(r.fairness_gap, 0.0);
        }
    }
}
