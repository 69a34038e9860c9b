//! Demographic grouping, quality tiers and deterministic experiment manifests.
//!
//! Age groups: Young is age <= 40, Older is age >= 55, Middle is 41..=54.
//!
//! Quality tiers combine two expert ratings of the silver mask with its Dice
//! and HD95 against gold:
//!
//! | tier | rule                                                   | difficulty |
//! |------|--------------------------------------------------------|------------|
//! | T1   | both Good, Dice >= 0.80 and HD95 <= 10 mm              | Easy       |
//! | T1_5 | both Good, Dice < 0.80 or HD95 > 10 mm                 | Easy       |
//! | T2   | any Acceptable, or disagreement                        | Hard       |
//! | T3   | both Poor                                              | Hard       |
//!
//! `Missed` ranks below Poor: two Missed ratings give T3, one Missed with any
//! other rating gives T2.
//!
//! All sampling uses per-stream generators from [`crate::rng`], keyed by the
//! group (and stratum) label, and always starts from cases sorted by id, so
//! results depend only on the case set and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_N_EASY: usize = 143;
pub const DEFAULT_N_HARD: usize = 206;

#[derive(Debug, Error, PartialEq)]
pub enum CohortError {
    #[error("unknown {kind} {value:?}")]
    Parse { kind: &'static str, value: String },
    #[error("group {group} has {available} cases, {needed} required")]
    InsufficientGroup {
        group: AgeGroup,
        needed: usize,
        available: usize,
    },
    #[error("group {group} has {available} {difficulty} cases, {needed} required (shortfall {})", needed - available)]
    InsufficientStratum {
        group: AgeGroup,
        difficulty: Difficulty,
        needed: usize,
        available: usize,
    },
    #[error("group {group} has {available} cases, fewer than k = {k} folds")]
    GroupSmallerThanK {
        group: AgeGroup,
        k: usize,
        available: usize,
    },
    #[error("k must be at least 1")]
    ZeroFolds,
    #[error("duplicate case id {0:?}")]
    DuplicateCase(String),
    #[error("case {0:?} has no tier; silver metrics are required for this design")]
    MissingTier(String),
}

pub type Result<T> = std::result::Result<T, CohortError>;

macro_rules! labelled_enum {
    ($name:ident, $kind:literal, { $($variant:ident => $label:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $label)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = CohortError;

            fn from_str(s: &str) -> Result<Self> {
                let t = s.trim();
                $(if t.eq_ignore_ascii_case($label) {
                    return Ok($name::$variant);
                })+
                Err(CohortError::Parse { kind: $kind, value: s.to_string() })
            }
        }
    };
}

labelled_enum!(AgeGroup, "age group", { Young => "Young", Middle => "Middle", Older => "Older" });
labelled_enum!(Rating, "rating", {
    Good => "Good", Acceptable => "Acceptable", Poor => "Poor", Missed => "Missed",
});
labelled_enum!(Tier, "tier", { T1 => "T1", T1_5 => "T1_5", T2 => "T2", T3 => "T3" });
labelled_enum!(Difficulty, "difficulty", { Easy => "Easy", Hard => "Hard" });
labelled_enum!(LabelSource, "label source", { Gold => "gold", Silver => "silver" });
labelled_enum!(Role, "role", { Train => "train", Val => "val" });
labelled_enum!(Design, "design", {
    Baseline => "baseline",
    SwapYoung => "swap-young",
    SwapOlder => "swap-older",
    DiffBal => "diff-bal",
    BiasedInput => "biased-input",
});

pub fn age_group(age: u32) -> AgeGroup {
    if age <= 40 {
        AgeGroup::Young
    } else if age >= 55 {
        AgeGroup::Older
    } else {
        AgeGroup::Middle
    }
}

impl AgeGroup {
    /// Inclusive age range used when synthesizing cases.
    pub fn synthetic_age_range(self) -> (u32, u32) {
        match self {
            AgeGroup::Young => (25, 40),
            AgeGroup::Middle => (41, 54),
            AgeGroup::Older => (55, 75),
        }
    }
}

impl Tier {
    pub fn difficulty(self) -> Difficulty {
        match self {
            Tier::T1 | Tier::T1_5 => Difficulty::Easy,
            Tier::T2 | Tier::T3 => Difficulty::Hard,
        }
    }
}

pub const T1_MIN_DICE: f64 = 0.80;
pub const T1_MAX_HD95_MM: f64 = 10.0;

/// Undefined HD95 should be passed as `f64::INFINITY`.
pub fn assign_tier(expert1: Rating, expert2: Rating, dice: f64, hd95: f64) -> Tier {
    use Rating::*;
    if expert1 == Missed || expert2 == Missed {
        log::warn!("Missed rating ({expert1}, {expert2}) ranked below Poor for tiering");
    }
    match (expert1, expert2) {
        (Good, Good) if dice >= T1_MIN_DICE && hd95 <= T1_MAX_HD95_MM => Tier::T1,
        (Good, Good) => Tier::T1_5,
        (Poor, Poor) | (Missed, Missed) => Tier::T3,
        _ => Tier::T2,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaskRefs {
    pub gold: Option<String>,
    pub silver: Option<String>,
    pub prediction: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub age: u32,
    pub age_group: AgeGroup,
    pub expert1: Rating,
    pub expert2: Rating,
    pub silver_dice: Option<f64>,
    pub silver_hd95: Option<f64>,
    pub tier: Option<Tier>,
    pub masks: MaskRefs,
}

impl CaseRecord {
    pub fn new(case_id: impl Into<String>, age: u32, expert1: Rating, expert2: Rating) -> Self {
        Self {
            case_id: case_id.into(),
            age,
            age_group: age_group(age),
            expert1,
            expert2,
            silver_dice: None,
            silver_hd95: None,
            tier: None,
            masks: MaskRefs::default(),
        }
    }

    /// Records silver-vs-gold metrics and derives the tier from them.
    pub fn with_silver_metrics(mut self, dice: f64, hd95: Option<f64>) -> Self {
        self.silver_dice = Some(dice);
        self.silver_hd95 = hd95;
        self.tier = Some(assign_tier(
            self.expert1,
            self.expert2,
            dice,
            hd95.unwrap_or(f64::INFINITY),
        ));
        self
    }

    pub fn difficulty(&self) -> Option<Difficulty> {
        self.tier.map(Tier::difficulty)
    }
}

fn sorted_by_group(cases: &[CaseRecord]) -> Result<BTreeMap<AgeGroup, Vec<&CaseRecord>>> {
    let mut seen = BTreeSet::new();
    let mut groups: BTreeMap<AgeGroup, Vec<&CaseRecord>> = BTreeMap::new();
    for c in cases {
        if !seen.insert(c.case_id.as_str()) {
            return Err(CohortError::DuplicateCase(c.case_id.clone()));
        }
        groups.entry(c.age_group).or_default().push(c);
    }
    for list in groups.values_mut() {
        list.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    }
    Ok(groups)
}

fn draw<'a>(pool: &[&'a CaseRecord], n: usize, seed: u64, key: &str) -> Vec<&'a CaseRecord> {
    let mut pool = pool.to_vec();
    pool.shuffle(&mut rng::stream(seed, key));
    pool.truncate(n);
    pool
}

fn sorted_ids(mut picked: Vec<&CaseRecord>) -> Vec<String> {
    picked.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    picked.into_iter().map(|c| c.case_id.clone()).collect()
}

/// `n_per_group` cases from each age group present in the cohort, drawn
/// without replacement. Returned ids are sorted.
pub fn balanced_sample(cases: &[CaseRecord], n_per_group: usize, seed: u64) -> Result<Vec<String>> {
    let groups = sorted_by_group(cases)?;
    let mut picked = Vec::new();
    for &g in AgeGroup::ALL {
        let pool = groups.get(&g).map(Vec::as_slice).unwrap_or(&[]);
        if pool.len() < n_per_group {
            return Err(CohortError::InsufficientGroup {
                group: g,
                needed: n_per_group,
                available: pool.len(),
            });
        }
        picked.extend(draw(pool, n_per_group, seed, &format!("sample/{g}")));
    }
    Ok(sorted_ids(picked))
}

/// `n_easy` Easy plus `n_hard` Hard cases from each age group.
pub fn difficulty_balanced_sample(
    cases: &[CaseRecord],
    n_easy: usize,
    n_hard: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let groups = sorted_by_group(cases)?;
    let mut picked = Vec::new();
    for &g in AgeGroup::ALL {
        let pool = groups.get(&g).map(Vec::as_slice).unwrap_or(&[]);
        for (difficulty, needed) in [(Difficulty::Easy, n_easy), (Difficulty::Hard, n_hard)] {
            let mut stratum = Vec::new();
            for c in pool {
                match c.difficulty() {
                    Some(d) if d == difficulty => stratum.push(*c),
                    Some(_) => {}
                    None => return Err(CohortError::MissingTier(c.case_id.clone())),
                }
            }
            if stratum.len() < needed {
                return Err(CohortError::InsufficientStratum {
                    group: g,
                    difficulty,
                    needed,
                    available: stratum.len(),
                });
            }
            picked.extend(draw(&stratum, needed, seed, &format!("diffbal/{g}/{difficulty}")));
        }
    }
    Ok(sorted_ids(picked))
}

/// Case id to fold index, in case-id order.
pub type FoldAssignment = BTreeMap<String, usize>;

/// Age-stratified k-fold: within each group cases are shuffled and dealt
/// round-robin, so per-fold group counts differ by at most one.
pub fn stratified_kfold(cases: &[CaseRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return Err(CohortError::ZeroFolds);
    }
    let groups = sorted_by_group(cases)?;
    let mut folds = FoldAssignment::new();
    for (g, pool) in &groups {
        if pool.len() < k {
            return Err(CohortError::GroupSmallerThanK {
                group: *g,
                k,
                available: pool.len(),
            });
        }
        let shuffled = draw(pool, pool.len(), seed, &format!("kfold/{g}"));
        for (i, c) in shuffled.into_iter().enumerate() {
            folds.insert(c.case_id.clone(), i % k);
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub case_id: String,
    pub label_source: LabelSource,
    pub fold: usize,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub schema_version: u32,
    pub design: Design,
    pub seed: u64,
    pub folds: usize,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManifestOptions {
    pub folds: usize,
    /// Draw this many cases per age group first (not used by `diff-bal`).
    pub n_per_group: Option<usize>,
    pub n_easy: usize,
    pub n_hard: usize,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            n_per_group: None,
            n_easy: DEFAULT_N_EASY,
            n_hard: DEFAULT_N_HARD,
        }
    }
}

fn label_source(design: Design, case: &CaseRecord) -> Result<LabelSource> {
    let swap_target = match design {
        Design::Baseline | Design::DiffBal => return Ok(LabelSource::Gold),
        Design::BiasedInput => return Ok(LabelSource::Silver),
        Design::SwapYoung => AgeGroup::Young,
        Design::SwapOlder => AgeGroup::Older,
    };
    if case.age_group != swap_target {
        return Ok(LabelSource::Gold);
    }
    match case.tier {
        Some(Tier::T1) => Ok(LabelSource::Silver),
        Some(_) => Ok(LabelSource::Gold),
        None => Err(CohortError::MissingTier(case.case_id.clone())),
    }
}

pub fn build_manifest(
    design: Design,
    cases: &[CaseRecord],
    seed: u64,
    options: ManifestOptions,
) -> Result<SplitManifest> {
    let selected: Option<Vec<String>> = match (design, options.n_per_group) {
        (Design::DiffBal, _) => Some(difficulty_balanced_sample(
            cases,
            options.n_easy,
            options.n_hard,
            seed,
        )?),
        (_, Some(n)) => Some(balanced_sample(cases, n, seed)?),
        (_, None) => None,
    };
    let chosen: Vec<CaseRecord> = match &selected {
        Some(ids) => {
            let keep: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
            cases
                .iter()
                .filter(|c| keep.contains(c.case_id.as_str()))
                .cloned()
                .collect()
        }
        None => cases.to_vec(),
    };
    let folds = stratified_kfold(&chosen, options.folds, seed)?;
    let by_id: BTreeMap<&str, &CaseRecord> = chosen.iter().map(|c| (c.case_id.as_str(), c)).collect();
    let mut entries = Vec::with_capacity(folds.len() * options.folds);
    for fold in 0..options.folds {
        for (id, &assigned) in &folds {
            let case = by_id[id.as_str()];
            entries.push(ManifestEntry {
                case_id: id.clone(),
                label_source: label_source(design, case)?,
                fold,
                role: if assigned == fold { Role::Val } else { Role::Train },
            });
        }
    }
    Ok(SplitManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        design,
        seed,
        folds: options.folds,
        entries,
    })
}

/// Problems found by [`SplitManifest::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestViolation(pub String);

impl SplitManifest {
    /// Checks the structural invariants: each case is validation in exactly
    /// one fold, appears once per fold, and keeps one label source.
    pub fn validate(&self) -> std::result::Result<(), ManifestViolation> {
        let mut per_case: BTreeMap<&str, (Vec<usize>, usize, BTreeSet<LabelSource>)> = BTreeMap::new();
        for e in &self.entries {
            if e.fold >= self.folds {
                return Err(ManifestViolation(format!("{}: fold {} out of range", e.case_id, e.fold)));
            }
            let slot = per_case.entry(&e.case_id).or_default();
            slot.1 += 1;
            slot.2.insert(e.label_source);
            if e.role == Role::Val {
                slot.0.push(e.fold);
            }
        }
        for (id, (val_folds, appearances, sources)) in per_case {
            if val_folds.len() != 1 {
                return Err(ManifestViolation(format!("{id}: validation in {} folds", val_folds.len())));
            }
            if appearances != self.folds {
                return Err(ManifestViolation(format!("{id}: {appearances} entries for {} folds", self.folds)));
            }
            if sources.len() != 1 {
                return Err(ManifestViolation(format!("{id}: mixed label sources")));
            }
        }
        Ok(())
    }

    /// Case id to its validation fold.
    pub fn validation_folds(&self) -> FoldAssignment {
        self.entries
            .iter()
            .filter(|e| e.role == Role::Val)
            .map(|e| (e.case_id.clone(), e.fold))
            .collect()
    }

    /// Ids whose label source is `source` (each listed once).
    pub fn cases_with_source(&self, source: LabelSource) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| e.label_source == source)
            .map(|e| e.case_id.clone())
            .collect()
    }
}
