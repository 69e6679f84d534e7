//! Chi-square goodness of fit against the uniform distribution.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Above this many degrees of freedom the tail comes from the
/// Wilson–Hilferty cube-root normal approximation.
const EXACT_DF_LIMIT: f64 = 1.0e5;

/// Upper tail `P(X >= x)` of a chi-square with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df <= EXACT_DF_LIMIT {
        let dist = ChiSquared::new(df).expect("positive degrees of freedom");
        return dist.sf(x);
    }
    let h = 2.0 / (9.0 * df);
    let z = ((x / df).cbrt() - (1.0 - h)) / h.sqrt();
    0.5 * statrs::function::erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Critical value `x` with `P(X >= x) = alpha`.
pub fn chi_square_critical(alpha: f64, df: f64) -> f64 {
    if df <= EXACT_DF_LIMIT {
        return ChiSquared::new(df).expect("positive degrees of freedom").inverse_cdf(1.0 - alpha);
    }
    let h = 2.0 / (9.0 * df);
    let z = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * alpha);
    df * (1.0 - h + z * h.sqrt()).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

impl ChiSquareTest {
    /// Not rejected at significance `alpha`.
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Tests that `values` are uniform over `0..bins`.
///
/// Only occupied bins are visited, so `bins` may be far larger than the
/// sample: the statistic is `(bins / n) * sum(o_i^2) - n`.
pub fn chi_square_uniform(values: &[u64], bins: u64) -> Result<ChiSquareTest> {
    if bins < 2 {
        return Err(Error::InvalidParams(format!("{bins} bins leave no degrees of freedom")));
    }
    if values.is_empty() {
        return Err(Error::InvalidParams("empty sample".into()));
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &v in values {
        if v >= bins {
            return Err(Error::InvalidParams(format!("value {v} outside {bins} bins")));
        }
        *counts.entry(v).or_default() += 1;
    }
    let n = values.len() as f64;
    let sum_sq: f64 = counts.values().map(|&c| (c * c) as f64).sum();
    let statistic = (bins as f64 / n * sum_sq - n).max(0.0);
    let df = (bins - 1) as f64;
    Ok(ChiSquareTest {
        statistic,
        df,
        p_value: chi_square_sf(statistic, df),
    })
}

/// Classic form over explicit observed and expected counts.
pub fn chi_square_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum()
}

/// Fraction of ones when each value is written as `width` bits.
pub fn ones_fraction(values: &[u64], width: u32) -> f64 {
    if values.is_empty() || width == 0 {
        return 0.0;
    }
    let mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    let ones: u64 = values.iter().map(|v| u64::from((v & mask).count_ones())).sum();
    ones as f64 / (values.len() as f64 * f64::from(width))
}

/// `q`-quantile of `xs` by linear interpolation. `xs` need not be sorted.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
