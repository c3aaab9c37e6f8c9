//! Descriptive statistics and two-sample t-tests.
//!
//! Student's t tail probabilities go through the regularized incomplete beta
//! function: P(T > x) = I_{df/(df+x^2)}(df/2, 1/2) / 2 for x >= 0.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("baseline {0} is not positive")]
    NonPositiveBase(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
}

pub fn mean(s: &[f64]) -> Result<f64, StatsError> {
    if s.is_empty() {
        return Err(StatsError::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

/// Bessel-corrected sample variance.
pub fn sample_variance(s: &[f64]) -> Result<f64, StatsError> {
    if s.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: s.len() });
    }
    let m = mean(s)?;
    Ok(s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (s.len() - 1) as f64)
}

pub fn sample_sd(s: &[f64]) -> Result<f64, StatsError> {
    sample_variance(s).map(f64::sqrt)
}

/// Percentage change from `base` to `stressed`.
pub fn pct_increase(base: f64, stressed: f64) -> Result<f64, StatsError> {
    if base.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(StatsError::NonPositiveBase(base));
    }
    Ok((stressed - base) / base * 100.0)
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

/// ln Gamma(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=10_000 {
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(T > x) of Student's t with `df` degrees of freedom.
pub fn student_t_sf(x: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::InvalidDf(df));
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    let tail = 0.5 * reg_inc_beta(df / 2.0, 0.5, df / (df + x * x));
    Ok(if x > 0.0 { tail } else { 1.0 - tail })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestVariant {
    /// Unequal variances, Welch-Satterthwaite df.
    #[default]
    Welch,
    /// Pooled variance, df = n_a + n_b - 2.
    Pooled,
}

impl fmt::Display for TestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestVariant::Welch => "Welch",
            TestVariant::Pooled => "pooled-variance",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub t: f64,
    pub df: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub significant: bool,
    pub alpha: f64,
}

fn moments(s: &[f64]) -> Result<(f64, f64, f64), StatsError> {
    Ok((mean(s)?, sample_variance(s)?, s.len() as f64))
}

fn finish(t: f64, df: f64, alpha: f64) -> Result<TestResult, StatsError> {
    let p = (2.0 * student_t_sf(t.abs(), df)?).min(1.0);
    Ok(TestResult {
        t,
        df,
        p,
        significant: p < alpha,
        alpha,
    })
}

pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    let (ma, va, na) = moments(a)?;
    let (mb, vb, nb) = moments(b)?;
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let (qa, qb) = (va / na, vb / nb);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    finish(t, df, alpha)
}

pub fn pooled_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    let (ma, va, na) = moments(a)?;
    let (mb, vb, nb) = moments(b)?;
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    finish(t, df, alpha)
}

pub fn t_test(variant: TestVariant, a: &[f64], b: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    match variant {
        TestVariant::Welch => welch_t_test(a, b, alpha),
        TestVariant::Pooled => pooled_t_test(a, b, alpha),
    }
}

/// Scientific notation with three significant digits and a two-digit
/// exponent, e.g. `8.31E-10`, `3.47E-01`.
pub fn format_p(p: f64) -> String {
    let s = format!("{p:.2E}");
    let (mantissa, exp) = s.split_once('E').unwrap_or((&s, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}
