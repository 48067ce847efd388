//! Descriptive statistics and the two hypothesis tests the analysis uses.
//!
//! Quartiles follow the linear-interpolation ("type 7") convention: the
//! p-quantile of a sorted sample `x[0..n]` sits at fractional position
//! `p * (n - 1)`. The method name is exported as [`QUARTILE_METHOD`] so that
//! reports can record it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const QUARTILE_METHOD: &str = "linear-interpolation (type 7)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("contingency table has a zero row or column total")]
    DegenerateTable,
    #[error("negative or non-finite count in contingency table")]
    InvalidCount,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooFewObservations(usize),
    #[error("zero variance")]
    ZeroVariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumberSummary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Lower outlier fence `q1 - 1.5 * iqr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierThreshold {
    pub lambda: f64,
    pub q1: f64,
    pub q3: f64,
}

impl OutlierThreshold {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

fn sorted_finite(xs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    match sorted.get(lo + 1) {
        Some(&next) if frac > 0.0 => sorted[lo] + frac * (next - sorted[lo]),
        _ => sorted[lo],
    }
}

pub fn five_number_summary(xs: &[f64]) -> Result<FiveNumberSummary, StatsError> {
    let v = sorted_finite(xs)?;
    Ok(FiveNumberSummary {
        min: v[0],
        q1: quantile_sorted(&v, 0.25),
        median: quantile_sorted(&v, 0.5),
        q3: quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
    })
}

pub fn lower_fence(xs: &[f64]) -> Result<OutlierThreshold, StatsError> {
    let s = five_number_summary(xs)?;
    Ok(OutlierThreshold {
        lambda: s.q1 - 1.5 * s.iqr(),
        q1: s.q1,
        q3: s.q3,
    })
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Population standard deviation (divides by `n`).
pub fn population_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    Some(var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
}

/// Pearson chi-square test of independence on a 2x2 table, without
/// continuity correction.
pub fn chi_square_independence(table: [[f64; 2]; 2]) -> Result<ChiSquareResult, StatsError> {
    if table.iter().flatten().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(StatsError::InvalidCount);
    }
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(StatsError::DegenerateTable);
    }
    let total = rows[0] + rows[1];
    let mut statistic = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &observed) in row.iter().enumerate() {
            let expected = rows[r] * cols[c] / total;
            statistic += (observed - expected).powi(2) / expected;
        }
    }
    Ok(ChiSquareResult {
        statistic,
        p_value: chi_square_sf(statistic, 1.0),
        dof: 1,
    })
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(dof / 2.0, x / 2.0)
}

/// Sample Pearson correlation coefficient.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewObservations(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mx = mean(xs).expect("non-empty");
    let my = mean(ys).expect("non-empty");
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Natural log of the gamma function (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut sum = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Upper regularized incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 1000;

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}
