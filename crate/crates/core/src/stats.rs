//! OLS regression, one-way ANOVA, Welch's t-test and the special functions
//! behind their p-values. All p-values are analytic (regularized incomplete
//! beta), never simulated.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate regressor: x is constant")]
    DegenerateRegressor,
    #[error("degenerate groups: {0}")]
    DegenerateGroups(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// Marks results that rely on a limiting convention rather than a finite
/// test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatFlag {
    /// Zero residual/within-group variance with a non-zero effect: the
    /// statistic is infinite and p is 0.
    InfiniteStatistic,
    /// No variance at all: statistic set to 0 and p to 1.
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); `None` when n = 1.
    pub std: Option<f64>,
}

/// Neumaier-compensated sum.
fn compensated_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_of(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Sum of squared deviations from the mean, two-pass with compensation.
fn sum_sq_dev(xs: &[f64], mean: f64) -> f64 {
    compensated_sum(xs.iter().map(|&x| (x - mean) * (x - mean)))
}

pub fn mean_std(xs: &[f64]) -> Result<MeanStd> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    let mean = mean_of(xs);
    let std = (xs.len() >= 2).then(|| (sum_sq_dev(xs, mean) / (xs.len() - 1) as f64).sqrt());
    Ok(MeanStd {
        n: xs.len(),
        mean,
        std,
    })
}

fn sample_variance(xs: &[f64]) -> f64 {
    sum_sq_dev(xs, mean_of(xs)) / (xs.len() - 1) as f64
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, &c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(StatsError::Domain(format!("I_x(a, b) with x={x}, a={a}, b={b}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fast only below the distribution's mean; above
    // it, evaluate the complement through the symmetry I_x(a,b) = 1 - I_{1-x}(b,a).
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    reg_inc_beta(df / (df + t * t), df / 2.0, 0.5).unwrap_or(1.0)
}

/// Upper-tail p-value of an F statistic.
pub fn f_upper_p(f: f64, df1: f64, df2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if !(f > 0.0) {
        return 1.0;
    }
    reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0).unwrap_or(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub p_slope: f64,
    pub n: usize,
    pub flag: Option<StatFlag>,
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<RegressionResult> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, got: n });
    }
    let mx = mean_of(x);
    let my = mean_of(y);
    let sxx = sum_sq_dev(x, mx);
    if sxx == 0.0 {
        return Err(StatsError::DegenerateRegressor);
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    let syy = sum_sq_dev(y, my);
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = compensated_sum(
        x.iter()
            .zip(y)
            .map(|(&a, &b)| (b - intercept - slope * a).powi(2)),
    );
    let df = (n - 2) as f64;
    let (r2, p_slope, flag) = if syy == 0.0 {
        (0.0, 1.0, Some(StatFlag::ZeroVariance))
    } else if ss_res == 0.0 {
        (1.0, 0.0, Some(StatFlag::InfiniteStatistic))
    } else {
        let se = (ss_res / df / sxx).sqrt();
        let t = slope / se;
        ((1.0 - ss_res / syy).clamp(0.0, 1.0), t_two_sided_p(t, df), None)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        r2,
        p_slope,
        n,
        flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub flag: Option<StatFlag>,
}

/// Classic equal-variance one-way ANOVA.
pub fn anova_oneway<G: AsRef<[f64]>>(groups: &[G]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(StatsError::DegenerateGroups(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.as_ref().len() < 2) {
        return Err(StatsError::DegenerateGroups(format!(
            "group {i} has {} samples, need at least 2",
            g.as_ref().len()
        )));
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = compensated_sum(groups.iter().flat_map(|g| g.as_ref().iter().copied())) / n as f64;
    let mut ss_between_terms = Vec::with_capacity(groups.len());
    let mut ss_within_terms = Vec::with_capacity(groups.len());
    for g in groups {
        let g = g.as_ref();
        let m = mean_of(g);
        ss_between_terms.push(g.len() as f64 * (m - grand) * (m - grand));
        ss_within_terms.push(sum_sq_dev(g, m));
    }
    let ss_between = compensated_sum(ss_between_terms.into_iter());
    let ss_within = compensated_sum(ss_within_terms.into_iter());
    let df_between = groups.len() - 1;
    let df_within = n - groups.len();
    let (f_stat, p, flag) = if ss_within == 0.0 {
        if ss_between == 0.0 {
            (0.0, 1.0, Some(StatFlag::ZeroVariance))
        } else {
            (f64::INFINITY, 0.0, Some(StatFlag::InfiniteStatistic))
        }
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_upper_p(f, df_between as f64, df_within as f64), None)
    };
    Ok(AnovaResult {
        f_stat,
        df_between,
        df_within,
        p,
        flag,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub df: f64,
    pub p: f64,
    pub flag: Option<StatFlag>,
}

pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    for g in [a, b] {
        if g.len() < 2 {
            return Err(StatsError::TooFew { need: 2, got: g.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean_of(a), mean_of(b));
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        let df = na + nb - 2.0;
        return Ok(if ma == mb {
            TTestResult {
                t_stat: 0.0,
                df,
                p: 1.0,
                flag: Some(StatFlag::ZeroVariance),
            }
        } else {
            TTestResult {
                t_stat: f64::INFINITY.copysign(ma - mb),
                df,
                p: 0.0,
                flag: Some(StatFlag::InfiniteStatistic),
            }
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    Ok(TTestResult {
        t_stat: t,
        df,
        p: t_two_sided_p(t, df),
        flag: None,
    })
}
