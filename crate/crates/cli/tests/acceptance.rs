//! Acceptance suite. Each test prints one `ACCEPTANCE <n> PASS|FAIL` line;
//! run with `cargo test -p segfair-cli --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Vector2};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_xorshift::XorShiftRng;
use segfair_core::cohort::{assign_tier, Difficulty, Rating, Tier};
use segfair_core::embedding::{
    ari, evaluate_embedding, kl_divergence, kl_gradient, joint_probabilities, nmi, purity, silhouette, tsne, FeatureMatrix,
    TsneParams,
};
use segfair_core::fairness::{audit_groups, fairness_gap, relative_change, DEFAULT_THRESHOLD};
use segfair_core::metrics::{dice, hd95, tumor_volume};
use segfair_core::stats::{anova_oneway, ols_fit, reg_inc_beta, welch_ttest};
use segfair_core::synth::{gen_cohort, SynthCase, SynthConfig};
use segfair_core::volume::edt;
use segfair_core::{AgeGroup, VoxelMask};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

fn report(n: u32, what: &str, ok: bool, detail: &str) {
    println!("ACCEPTANCE {n} {}: {what} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_1_reference_gap_arithmetic() {
    let start = Instant::now();
    let columns: [(&str, [f64; 3], f64); 6] = [
        ("Observed", [0.6941, 0.7104, 0.7500], 0.0559),
        ("True", [0.7304, 0.7333, 0.7703], 0.0399),
        ("Swap-Young", [0.7320, 0.7379, 0.7739], 0.0419),
        ("Swap-Older", [0.7298, 0.7316, 0.7869], 0.0571),
        ("Diff-Bal", [0.7317, 0.7308, 0.7678], 0.0361),
        ("Biased-Input", [0.6797, 0.7132, 0.7458], 0.0661),
    ];
    let mut failures = Vec::new();
    let mut gaps = BTreeMap::new();
    for (name, [y, m, o], want) in columns {
        let got = fairness_gap(&[("Young", y), ("Middle", m), ("Older", o)]).unwrap();
        gaps.insert(name, got);
        if (got - want).abs() >= 1e-4 {
            failures.push(format!("{name}: gap {got:.4} != {want:.4} (Older-Young = {:.4})", o - y));
        }
    }
    let round3 = |x: f64| (x * 1000.0).round() / 1000.0;
    let inflation = relative_change(gaps["Observed"], gaps["True"]).relative_change.unwrap();
    let amplification = relative_change(gaps["Biased-Input"], gaps["True"]).relative_change.unwrap();
    if round3(inflation) != 0.401 {
        failures.push(format!("inflation {inflation:.4}"));
    }
    if round3(amplification) != 0.657 {
        failures.push(format!("amplification {amplification:.4}"));
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    let detail = if failures.is_empty() {
        format!("six gaps and +{inflation:.3}/+{amplification:.3} match")
    } else {
        failures.join("; ")
    };
    report(1, "reference group-mean gap arithmetic", failures.is_empty(), &detail);
}

// ---------------------------------------------------------------- 2

fn random_mask(rng: &mut XorShiftRng, dims: [usize; 3], spacing: [f64; 3]) -> VoxelMask {
    match rng.random_range(0..3) {
        0 => {
            let p: f64 = rng.random_range(0.0..1.0);
            VoxelMask::from_fn(dims, spacing, |_, _, _| rng.random::<f64>() < p).unwrap()
        }
        1 => {
            let c: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.0..dims[a] as f64));
            let r: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.5..dims[a] as f64 / 1.5 + 1.0));
            VoxelMask::from_fn(dims, spacing, |x, y, z| {
                let p = [x, y, z];
                (0..3).map(|a| ((p[a] as f64 + 0.5 - c[a]) / r[a]).powi(2)).sum::<f64>() <= 1.0
            })
            .unwrap()
        }
        _ => {
            let c: [f64; 3] = std::array::from_fn(|a| rng.random_range(0.0..dims[a] as f64));
            let r = rng.random_range(1.0..6.0);
            let noise = rng.random_range(0.0..0.2);
            VoxelMask::from_fn(dims, spacing, |x, y, z| {
                let p = [x, y, z];
                let inside = (0..3).map(|a| (p[a] as f64 + 0.5 - c[a]).powi(2)).sum::<f64>() <= r * r;
                inside != (rng.random::<f64>() < noise)
            })
            .unwrap()
        }
    }
}

fn brute_surface(m: &VoxelMask) -> Vec<[usize; 3]> {
    let d = m.dims();
    m.occupied()
        .filter(|&[x, y, z]| {
            let p = [x as i64, y as i64, z as i64];
            (0..3).any(|a| {
                [-1i64, 1].iter().any(|s| {
                    let mut q = p;
                    q[a] += s;
                    q[a] < 0 || q[a] as usize >= d[a] || !m.get(q[0] as usize, q[1] as usize, q[2] as usize)
                })
            })
        })
        .collect()
}

fn dist_mm(p: [usize; 3], q: [usize; 3], s: [f64; 3]) -> f64 {
    (0..3).map(|a| ((p[a] as f64 - q[a] as f64) * s[a]).powi(2)).sum::<f64>().sqrt()
}

fn brute_hd95(a: &VoxelMask, b: &VoxelMask) -> Option<f64> {
    let (sa, sb) = (brute_surface(a), brute_surface(b));
    if sa.is_empty() || sb.is_empty() {
        return None;
    }
    let s = a.spacing();
    let directed = |from: &[[usize; 3]], to: &[[usize; 3]]| {
        let mut d: Vec<f64> = from
            .iter()
            .map(|&p| to.iter().map(|&q| dist_mm(p, q, s)).fold(f64::INFINITY, f64::min))
            .collect();
        d.sort_by(f64::total_cmp);
        let rank = 0.95 * (d.len() - 1) as f64;
        let lo = rank.floor() as usize;
        d[lo] + (d[rank.ceil() as usize] - d[lo]) * (rank - lo as f64)
    };
    Some(directed(&sa, &sb).max(directed(&sb, &sa)))
}

#[test]
fn criterion_2_metric_oracles() {
    let start = Instant::now();
    let mut rng = XorShiftRng::seed_from_u64(2);
    let spacings = [0.5, 1.0, 1.5, 2.5];
    let mut worst_dice = 0.0f64;
    let mut worst_hd = 0.0f64;
    let mut mismatches = 0;
    for _ in 0..500 {
        let dims: [usize; 3] = std::array::from_fn(|_| rng.random_range(1..=16));
        let spacing: [f64; 3] = std::array::from_fn(|_| spacings[rng.random_range(0..4)]);
        let a = random_mask(&mut rng, dims, spacing);
        let b = random_mask(&mut rng, dims, spacing);
        let (na, nb) = (a.count(), b.count());
        let inter = a.data().iter().zip(b.data()).filter(|(x, y)| **x && **y).count();
        let want = if na + nb == 0 { 1.0 } else { 2.0 * inter as f64 / (na + nb) as f64 };
        worst_dice = worst_dice.max((dice(&a, &b).unwrap() - want).abs());
        match (hd95(&a, &b).unwrap(), brute_hd95(&a, &b)) {
            (Some(g), Some(w)) => worst_hd = worst_hd.max((g - w).abs()),
            (None, None) => {}
            _ => mismatches += 1,
        }
    }

    // Every voxel of each 8^3 mask against the all-pairs minimum.
    let mut worst_edt = 0.0f64;
    let mut masks: Vec<VoxelMask> = (0..150)
        .map(|_| {
            let spacing: [f64; 3] = std::array::from_fn(|_| spacings[rng.random_range(0..4)]);
            random_mask(&mut rng, [8; 3], spacing)
        })
        .collect();
    for corner in 0..8 {
        let c = [corner & 1, corner >> 1 & 1, corner >> 2 & 1].map(|b| b * 7);
        masks.push(VoxelMask::from_fn([8; 3], [1.0, 2.0, 0.5], |x, y, z| [x, y, z] == c).unwrap());
    }
    masks.push(VoxelMask::from_fn([8; 3], [1.0; 3], |_, _, _| true).unwrap());
    for m in masks.iter().filter(|m| m.has_occupied()) {
        let f = edt(m).unwrap();
        let occ: Vec<[usize; 3]> = m.occupied().collect();
        for i in 0..m.len() {
            let p = m.coords(i);
            let want = occ.iter().map(|&q| dist_mm(p, q, m.spacing())).fold(f64::INFINITY, f64::min);
            worst_edt = worst_edt.max((f.get(p[0], p[1], p[2]) - want).abs());
        }
    }
    let elapsed = start.elapsed();
    let ok = worst_dice < 1e-9 && worst_hd < 1e-9 && mismatches == 0 && worst_edt < 1e-9 && elapsed < Duration::from_secs(60);
    report(
        2,
        "Dice/HD95/EDT brute-force oracles",
        ok,
        &format!(
            "500 pairs: max |dDice| {worst_dice:.1e}, max |dHD95| {worst_hd:.1e}, definedness mismatches {mismatches}; {} 8^3 masks: max |dEDT| {worst_edt:.1e}; {elapsed:.1?}",
            masks.len()
        ),
    );
}

// ---------------------------------------------------------------- 3

fn oracle_ols(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let (sx, sxx) = (x.iter().sum::<f64>(), x.iter().map(|v| v * v).sum::<f64>());
    let (sy, sxy) = (y.iter().sum::<f64>(), x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>());
    let beta = Matrix2::new(n, sx, sx, sxx).lu().solve(&Vector2::new(sy, sxy)).unwrap();
    let (intercept, slope) = (beta[0], beta[1]);
    let ybar = sy / n;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let sst: f64 = y.iter().map(|b| (b - ybar).powi(2)).sum();
    let xbar = sx / n;
    let sxx_c: f64 = x.iter().map(|a| (a - xbar).powi(2)).sum();
    let se = (sse / (n - 2.0) / sxx_c).sqrt();
    let t = slope / se;
    let p = 2.0 * StudentsT::new(0.0, 1.0, n - 2.0).unwrap().sf(t.abs());
    (slope, intercept, 1.0 - sse / sst, p)
}

fn oracle_anova(groups: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let (d1, d2) = ((groups.len() - 1) as f64, (all.len() - groups.len()) as f64);
    let f = (ssb / d1) / (ssw / d2);
    (f, FisherSnedecor::new(d1, d2).unwrap().sf(f))
}

#[test]
fn criterion_3_statistics_oracles() {
    let mut rng = XorShiftRng::seed_from_u64(3);
    let (mut d_slope, mut d_r2, mut d_p, mut d_f, mut d_fp) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(5..300);
        let slope = rng.random_range(-0.01..0.01);
        let noise = rng.random_range(0.01..0.5);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(20.0..80.0)).collect();
        let y: Vec<f64> = x.iter().map(|a| 0.7 + slope * a + noise * (rng.random::<f64>() - 0.5)).collect();
        let got = ols_fit(&x, &y).unwrap();
        let (s, _, r2, p) = oracle_ols(&x, &y);
        d_slope = d_slope.max((got.slope - s).abs());
        d_r2 = d_r2.max((got.r2 - r2).abs());
        d_p = d_p.max((got.p_slope - p).abs());

        let k = rng.random_range(2..6);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| {
                let m = rng.random_range(2..60);
                let shift = g as f64 * rng.random_range(0.0..0.05);
                (0..m).map(|_| 0.7 + shift + rng.random_range(-0.2..0.2)).collect()
            })
            .collect();
        let a = anova_oneway(&groups).unwrap();
        let (f, fp) = oracle_anova(&groups);
        d_f = d_f.max((a.f_stat - f).abs() / f.abs().max(1.0));
        d_fp = d_fp.max((a.p - fp).abs());
    }
    let mut d_sym = 0.0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(0.05..60.0);
        let b = rng.random_range(0.05..60.0);
        let x = rng.random_range(0.0..1.0);
        let lhs = reg_inc_beta(x, a, b).unwrap();
        let rhs = 1.0 - reg_inc_beta(1.0 - x, b, a).unwrap();
        d_sym = d_sym.max((lhs - rhs).abs());
    }
    let tol = 1e-10;
    let ok = [d_slope, d_r2, d_p, d_f, d_fp, d_sym].iter().all(|d| *d < tol);
    report(
        3,
        "OLS/ANOVA/incomplete-beta oracles",
        ok,
        &format!(
            "200 datasets: slope {d_slope:.1e}, R2 {d_r2:.1e}, p {d_p:.1e}, F(rel) {d_f:.1e}, F p {d_fp:.1e}; 1e4 symmetry triples {d_sym:.1e}"
        ),
    );
}

// ---------------------------------------------------------------- 4

fn printed_rule(e1: Rating, e2: Rating, dice: f64, hd95: f64) -> Tier {
    use Rating::*;
    // Missed ranks below Poor; a lone Missed counts as disagreement.
    if e1 == Good && e2 == Good {
        if dice < 0.80 || hd95 > 10.0 {
            Tier::T1_5
        } else {
            Tier::T1
        }
    } else if (e1 == Poor && e2 == Poor) || (e1 == Missed && e2 == Missed) {
        Tier::T3
    } else {
        Tier::T2
    }
}

#[test]
fn criterion_4_tier_partition() {
    let ratings = || prop::sample::select(Rating::ALL.to_vec());
    let dice_q = prop_oneof![Just(0.80), Just(0.7999999), 0.0f64..0.80, 0.80f64..=1.0];
    let hd_q = prop_oneof![Just(10.0), Just(10.000001), 0.0f64..=10.0, 10.0f64..200.0, Just(f64::INFINITY)];
    let mut runner = TestRunner::new(PropConfig {
        cases: 20_000,
        ..PropConfig::default()
    });
    let mut t15_branch = 0usize;
    let result = runner.run(&(ratings(), ratings(), dice_q, hd_q), |(e1, e2, d, h)| {
        let tier = assign_tier(e1, e2, d, h);
        prop_assert_eq!(tier, printed_rule(e1, e2, d, h));
        let easy = matches!(tier, Tier::T1 | Tier::T1_5);
        prop_assert_eq!(tier.difficulty() == Difficulty::Easy, easy);
        Ok(())
    });
    let mut exhaustive_ok = true;
    for &e1 in Rating::ALL {
        for &e2 in Rating::ALL {
            for (d, h) in [(0.85, 8.0), (0.75, 8.0), (0.85, 12.0), (0.75, 12.0), (0.80, 10.0)] {
                let t = assign_tier(e1, e2, d, h);
                exhaustive_ok &= t == printed_rule(e1, e2, d, h);
                t15_branch += usize::from(t == Tier::T1_5);
            }
        }
    }
    let examples = assign_tier(Rating::Good, Rating::Good, 0.85, 8.0) == Tier::T1
        && assign_tier(Rating::Good, Rating::Good, 0.75, 8.0) == Tier::T1_5
        && assign_tier(Rating::Good, Rating::Acceptable, 0.9, 5.0) == Tier::T2;
    let ok = result.is_ok() && exhaustive_ok && examples && t15_branch == 3;
    report(
        4,
        "tier mapping total and matching the printed rules",
        ok,
        &format!(
            "20000 sampled tuples {}, 16 rating pairs x 5 metric points {}, T1_5 hits {t15_branch}",
            if result.is_ok() { "agree" } else { "DISAGREE" },
            if exhaustive_ok { "agree" } else { "DISAGREE" }
        ),
    );
}

// ---------------------------------------------------------------- 5

fn group_scores(cases: &[SynthCase], vs_silver: bool) -> Vec<(String, f64)> {
    cases
        .iter()
        .map(|c| {
            let r = if vs_silver { &c.silver } else { &c.gold };
            (c.record.age_group.to_string(), dice(&c.pred, r).unwrap())
        })
        .collect()
}

#[test]
fn criterion_5_synthetic_biased_ruler() {
    let start = Instant::now();
    let pair = ("Young", "Older");
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..5u64 {
        let mut last = f64::NEG_INFINITY;
        let mut row = Vec::new();
        for layers in [1.0, 2.0, 3.0] {
            let mut cfg = SynthConfig {
                n_per_group: 60,
                grid: [48; 3],
                flip_rate: 0.05,
                seed,
                ..SynthConfig::default()
            };
            cfg.set_all_biases(0.0, -1.0);
            cfg.law_mut(AgeGroup::Young).label_bias = layers;
            let cases = gen_cohort(&cfg).unwrap();
            let observed = audit_groups(&group_scores(&cases, true), DEFAULT_THRESHOLD, pair).unwrap().fairness_gap;
            let truth = audit_groups(&group_scores(&cases, false), DEFAULT_THRESHOLD, pair).unwrap().fairness_gap;
            let inflation = observed - truth;
            ok &= observed > truth && inflation > last;
            last = inflation;
            row.push(format!("{observed:.3}/{truth:.3}"));
        }
        lines.push(format!("seed {seed}: {}", row.join(" ")));
    }
    let null_cfg = SynthConfig {
        n_per_group: 60,
        grid: [48; 3],
        seed: 11,
        ..SynthConfig::default()
    };
    let null = gen_cohort(&null_cfg).unwrap();
    let mut null_detail = Vec::new();
    for vs_silver in [false, true] {
        let r = audit_groups(&group_scores(&null, vs_silver), DEFAULT_THRESHOLD, pair).unwrap();
        ok &= r.fairness_gap.abs() < 0.005 && r.dpd < 0.01 && r.dir > 0.98;
        null_detail.push(format!("gap {:.4} dpd {:.4} dir {:.4}", r.fairness_gap, r.dpd, r.dir));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    report(
        5,
        "observed gap exceeds true gap, monotone in Young label bias; parity when unbiased",
        ok,
        &format!("observed/true by label bias 1,2,3: {}; null {}; {elapsed:.1?}", lines.join("; "), null_detail.join(", ")),
    );
}

// ---------------------------------------------------------------- 6

#[test]
fn criterion_6_morphometry_reproduction() {
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in 0..3u64 {
        let cfg = SynthConfig {
            n_per_group: 100,
            seed,
            ..SynthConfig::default()
        };
        let cases = gen_cohort(&cfg).unwrap();
        let vols = |g: AgeGroup| -> Vec<f64> {
            cases.iter().filter(|c| c.record.age_group == g).map(|c| tumor_volume(&c.gold)).collect()
        };
        let (y, o) = (vols(AgeGroup::Young), vols(AgeGroup::Older));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ratio = mean(&y) / mean(&o);
        let p = welch_ttest(&y, &o).unwrap().p;
        ok &= (ratio / 1.66 - 1.0).abs() <= 0.10 && p < 0.01;
        detail.push(format!("seed {seed}: ratio {ratio:.3}, p {p:.1e}"));
    }
    report(6, "Young/Older volume ratio near 1.66 with Welch p < 0.01", ok, &detail.join("; "));
}

// ---------------------------------------------------------------- 7

fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=prefix.iter().max().map_or(0, |m| m + 1) {
            prefix.push(l);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn same_partition(p: &[usize], t: &[usize]) -> bool {
    (0..p.len()).all(|i| (0..p.len()).all(|j| (p[i] == p[j]) == (t[i] == t[j])))
}

fn pair_ari(p: &[usize], t: &[usize]) -> f64 {
    let mut c = [0.0f64; 4];
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            c[usize::from(p[i] != p[j]) * 2 + usize::from(t[i] != t[j])] += 1.0;
        }
    }
    let [a, b, cc, d] = c;
    let denom = (a + b) * (b + d) + (a + cc) * (cc + d);
    if denom == 0.0 {
        return if same_partition(p, t) { 1.0 } else { 0.0 };
    }
    2.0 * (a * d - b * cc) / denom
}

fn contingency_nmi(p: &[usize], t: &[usize]) -> f64 {
    let n = p.len() as f64;
    let count = |f: &dyn Fn(usize) -> bool| (0..p.len()).filter(|&j| f(j)).count() as f64;
    let (mut hp, mut ht, mut mi) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        let np = count(&|j| p[j] == p[i]);
        let nt = count(&|j| t[j] == t[i]);
        let nj = count(&|j| p[j] == p[i] && t[j] == t[i]);
        hp += (n / np).ln() / n;
        ht += (n / nt).ln() / n;
        mi += (n * nj / (np * nt)).ln() / n;
    }
    if hp.abs() < 1e-15 || ht.abs() < 1e-15 {
        return if same_partition(p, t) { 1.0 } else { 0.0 };
    }
    (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
}

fn contingency_purity(p: &[usize], t: &[usize]) -> f64 {
    let best: usize = (0..8)
        .map(|c| (0..8).map(|k| (0..p.len()).filter(|&i| p[i] == c && t[i] == k).count()).max().unwrap())
        .sum();
    best as f64 / p.len() as f64
}

fn gaussian(rng: &mut XorShiftRng) -> f64 {
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[test]
fn criterion_7_embedding_suite() {
    let mut rng = XorShiftRng::seed_from_u64(7);
    let mut parts = Vec::new();

    let x = nalgebra::DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
    let p = joint_probabilities(&x, 1.5).unwrap().p;
    let y: Vec<[f64; 2]> = (0..6).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let g = kl_gradient(&p, &y, 1.0);
    let mut worst_rel = 0.0f64;
    for i in 0..6 {
        for d in 0..2 {
            let h = 1e-6;
            let (mut a, mut b) = (y.clone(), y.clone());
            a[i][d] += h;
            b[i][d] -= h;
            let fd = (kl_divergence(&p, &a) - kl_divergence(&p, &b)) / (2.0 * h);
            worst_rel = worst_rel.max((g[i][d] - fd).abs() / fd.abs().max(1e-12));
        }
    }
    let grad_ok = worst_rel < 1e-4;
    parts.push(format!("gradient rel err {worst_rel:.1e}"));

    let groups = [AgeGroup::Young, AgeGroup::Middle, AgeGroup::Older];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, grp) in groups.iter().enumerate() {
        for _ in 0..50 {
            rows.push((0..10).map(|d| gaussian(&mut rng) + if d == k { 15.0 } else { 0.0 }).collect::<Vec<f64>>());
            labels.push(*grp);
        }
    }
    let fm = FeatureMatrix::new(rows, labels).unwrap();
    let emb = tsne(&fm, &TsneParams::for_n(fm.n(), 7)).unwrap();
    let eval = evaluate_embedding(&emb.embedding, &fm.label_indices(), 7).unwrap();
    let blob_ok = eval.ari > 0.9;
    parts.push(format!("blob ARI {:.3}", eval.ari));

    let null_rows: Vec<Vec<f64>> = (0..150).map(|_| (0..10).map(|_| gaussian(&mut rng)).collect()).collect();
    let null_labels: Vec<AgeGroup> = (0..150).map(|i| groups[i % 3]).collect();
    let null_fm = FeatureMatrix::new(null_rows, null_labels).unwrap();
    let null_emb = tsne(&null_fm, &TsneParams::for_n(150, 8)).unwrap();
    let null_eval = evaluate_embedding(&null_emb.embedding, &null_fm.label_indices(), 8).unwrap();
    let sil = silhouette(&null_emb.embedding, &null_fm.label_indices()).unwrap();
    let null_ok = sil.abs() < 0.1 && null_eval.ari < 0.1;
    parts.push(format!("null silhouette {sil:.3}, null ARI {:.3}", null_eval.ari));

    let all = partitions(8);
    let truths = [vec![0, 0, 0, 1, 1, 1, 2, 2], vec![0, 1, 2, 3, 4, 5, 6, 7], vec![0; 8], vec![0, 1, 0, 1, 0, 1, 0, 1]];
    let mut oracle_mismatch = 0;
    for t in &truths {
        for q in &all {
            oracle_mismatch += usize::from((ari(q, t).unwrap() - pair_ari(q, t)).abs() > 1e-12);
            oracle_mismatch += usize::from((nmi(q, t).unwrap() - contingency_nmi(q, t)).abs() > 1e-12);
            oracle_mismatch += usize::from(purity(q, t).unwrap() != contingency_purity(q, t));
        }
    }
    parts.push(format!("{} partitions x {} truths, oracle mismatches {oracle_mismatch}", all.len(), truths.len()));
    report(
        7,
        "t-SNE gradient, blob separation, null features, clustering-score oracles",
        grad_ok && blob_ok && null_ok && oracle_mismatch == 0 && all.len() == 4140,
        &parts.join("; "),
    );
}

// ---------------------------------------------------------------- 8

fn segfair(cwd: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_segfair"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("spawn segfair")
}

fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn criterion_8_determinism_and_fold_balance() {
    let root = tempfile::tempdir().unwrap();
    let r = root.path();
    let mut ok = true;
    let mut detail = Vec::new();
    let mut runs: Vec<BTreeMap<String, Vec<u8>>> = Vec::new();
    for run in 0..2 {
        // Identical relative paths, since provenance records the resolved settings.
        let base = r.join(format!("run{run}"));
        std::fs::create_dir_all(&base).unwrap();
        let synth = segfair(
            &base,
            &["synth", "--seed", "5", "--out", "cohort", "--deterministic", "--set", "n_per_group=23", "--set", "young.label_bias=1", "--set", "flip_rate=0.05", "--set", "grid=40"],
        );
        ok &= synth.status.success();
        let mut text = String::from("case_id,f0,f1,f2\n");
        for line in std::fs::read_to_string(base.join("cohort/metadata.csv")).unwrap().lines().skip(1) {
            let id = line.split(',').next().unwrap();
            let h = segfair_core::rng::fnv1a64(id);
            text.push_str(&format!("{id},{},{},{}\n", (h % 97) as f64 / 9.0, (h / 97 % 89) as f64 / 7.0, (h / 9000 % 83) as f64));
        }
        std::fs::write(base.join("features.csv"), text).unwrap();
        let meta = "cohort/metadata.csv";
        let commands: [&[&str]; 5] = [
            &["audit", "--metadata", meta, "--out", "audit"],
            &["morph", "--metadata", meta, "--out", "morph"],
            &["split", "--metadata", meta, "--design", "baseline", "--out", "split"],
            &["split", "--metadata", meta, "--design", "swap-older", "--out", "split"],
            &["embed", "--metadata", meta, "--features", "features.csv", "--iters", "300", "--out", "embed"],
        ];
        for c in commands {
            let mut args = c.to_vec();
            args.extend(["--seed", "5", "--deterministic"]);
            let out = segfair(&base, &args);
            if !out.status.success() {
                ok = false;
                detail.push(format!("{} failed: {}", c[0], String::from_utf8_lossy(&out.stderr)));
            }
        }
        runs.push(outputs(&base));
    }
    let differing: Vec<&String> = runs[0].keys().filter(|k| runs[1].get(*k) != Some(&runs[0][*k])).collect();
    let compared = runs[0].keys().filter(|k| k.ends_with(".csv") || k.ends_with(".json")).count();
    ok &= differing.is_empty() && runs[0].len() == runs[1].len() && compared > 10;
    detail.push(format!("{} files ({compared} CSV/JSON) compared, {} differ", runs[0].len(), differing.len()));

    let manifest: serde_json::Value =
        serde_json::from_slice(&runs[0]["split/manifest_baseline.json"]).expect("manifest json");
    let meta = std::fs::read_to_string(r.join("run0/cohort/metadata.csv")).unwrap();
    let groups: BTreeMap<String, AgeGroup> = meta
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), segfair_core::cohort::age_group(f[1].parse().unwrap()))
        })
        .collect();
    let mut per_fold: BTreeMap<(usize, AgeGroup), usize> = BTreeMap::new();
    let mut totals: BTreeMap<AgeGroup, usize> = BTreeMap::new();
    for e in manifest["entries"].as_array().unwrap() {
        if e["role"] == "val" {
            let g = groups[e["case_id"].as_str().unwrap()];
            *per_fold.entry((e["fold"].as_u64().unwrap() as usize, g)).or_default() += 1;
            *totals.entry(g).or_default() += 1;
        }
    }
    let mut worst = 0.0f64;
    for ((_, g), n) in &per_fold {
        worst = worst.max((*n as f64 - totals[g] as f64 / 5.0).abs());
    }
    ok &= worst <= 1.0 && per_fold.len() == 15;
    detail.push(format!("max per-fold group deviation {worst:.2} cases"));
    report(8, "byte-identical reruns and stratified folds", ok, &detail.join("; "));
}
