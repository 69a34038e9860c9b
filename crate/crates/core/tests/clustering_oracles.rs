use segfair_core::embedding::{ari, nmi, purity};

/// All set partitions of `n` elements as restricted growth strings.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for label in 0..=next {
            prefix.push(label);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn pair_counts(pred: &[usize], truth: &[usize]) -> [f64; 4] {
    let mut c = [0.0; 4];
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            let sp = pred[i] == pred[j];
            let st = truth[i] == truth[j];
            c[match (sp, st) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            }] += 1.0;
        }
    }
    c
}

fn ari_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let [a, b, c, d] = pair_counts(pred, truth);
    let denom = (a + b) * (b + d) + (a + c) * (c + d);
    if denom == 0.0 {
        return if pred_equiv(pred, truth) { 1.0 } else { 0.0 };
    }
    2.0 * (a * d - b * c) / denom
}

fn pred_equiv(p: &[usize], t: &[usize]) -> bool {
    (0..p.len()).all(|i| (0..p.len()).all(|j| (p[i] == p[j]) == (t[i] == t[j])))
}

fn size_of(labels: &[usize], i: usize) -> f64 {
    labels.iter().filter(|&&l| l == labels[i]).count() as f64
}

fn nmi_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut hp = 0.0;
    let mut ht = 0.0;
    let mut mi = 0.0;
    for i in 0..pred.len() {
        let np = size_of(pred, i);
        let nt = size_of(truth, i);
        let joint = (0..pred.len()).filter(|&j| pred[j] == pred[i] && truth[j] == truth[i]).count() as f64;
        hp += (n / np).ln() / n;
        ht += (n / nt).ln() / n;
        mi += (n * joint / (np * nt)).ln() / n;
    }
    if hp.abs() < 1e-15 || ht.abs() < 1e-15 {
        return if pred_equiv(pred, truth) { 1.0 } else { 0.0 };
    }
    (mi / (hp * ht).sqrt()).clamp(0.0, 1.0)
}

fn purity_oracle(pred: &[usize], truth: &[usize]) -> f64 {
    let mut total = 0;
    for c in 0..=*pred.iter().max().unwrap() {
        let best = (0..=*truth.iter().max().unwrap())
            .map(|t| (0..pred.len()).filter(|&i| pred[i] == c && truth[i] == t).count())
            .max()
            .unwrap();
        total += best;
    }
    total as f64 / pred.len() as f64
}

#[test]
fn there_are_4140_partitions_of_8() {
    assert_eq!(partitions(8).len(), 4140);
}

#[test]
fn scores_match_oracles_on_all_partitions_of_8() {
    let all = partitions(8);
    let truths = [
        vec![0, 0, 0, 0, 0, 0, 0, 0],
        vec![0, 1, 2, 3, 4, 5, 6, 7],
        vec![0, 0, 0, 1, 1, 1, 2, 2],
        vec![0, 1, 0, 1, 0, 1, 0, 1],
        vec![2, 2, 2, 2, 2, 2, 2, 1],
    ];
    for truth in &truths {
        for pred in &all {
            let (a, n, p) = (ari(pred, truth).unwrap(), nmi(pred, truth).unwrap(), purity(pred, truth).unwrap());
            assert!((a - ari_oracle(pred, truth)).abs() < 1e-12, "ari {pred:?} {truth:?}");
            assert!((n - nmi_oracle(pred, truth)).abs() < 1e-12, "nmi {pred:?} {truth:?}");
            assert!((p - purity_oracle(pred, truth)).abs() < 1e-15, "purity {pred:?} {truth:?}");
        }
    }
}

#[test]
fn scores_are_label_permutation_invariant() {
    let truth = [0, 0, 1, 1, 2, 2, 2, 0];
    for pred in partitions(8).iter().step_by(37) {
        let renamed: Vec<usize> = pred.iter().map(|l| 10 - l).collect();
        assert_eq!(ari(pred, &truth).unwrap(), ari(&renamed, &truth).unwrap());
        assert!((nmi(pred, &truth).unwrap() - nmi(&renamed, &truth).unwrap()).abs() < 1e-15);
        assert_eq!(purity(pred, &truth).unwrap(), purity(&renamed, &truth).unwrap());
    }
}
