//! Closed-form planning math: error function and its inverse, the
//! estimation-dimension bound, the Bloom false-positive rate and detection
//! sizing. Everything here is generic over the float type.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Float types the planning math runs on.
pub trait Scalar: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

fn lit<F: Scalar>(v: f64) -> F {
    F::from_f64(v).expect("literal representable in the scalar type")
}

/// Beyond this |x| the error function equals ±1 to double precision.
const ERF_SATURATION: f64 = 6.0;

/// The error function.
///
/// Uses `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (2n+1)!!`,
/// whose terms are all positive and so lose nothing to cancellation.
pub fn erf<F: Scalar>(x: F) -> F {
    if x.is_nan() {
        return x;
    }
    if x < F::zero() {
        return -erf(-x);
    }
    if x >= lit(ERF_SATURATION) {
        return F::one();
    }
    let x2 = x * x;
    let two = lit::<F>(2.0);
    let mut term = x;
    let mut sum = x;
    let mut n = F::one();
    loop {
        term = term * two * x2 / (two * n + F::one());
        sum = sum + term;
        if term <= sum * F::epsilon() {
            break;
        }
        n = n + F::one();
    }
    F::FRAC_2_SQRT_PI() * (-x2).exp() * sum
}

/// Inverse of [`erf`] on (-1, 1); returns ±inf at ±1 and NaN outside.
pub fn erf_inv<F: Scalar>(y: F) -> F {
    if y.is_nan() || y.abs() > F::one() {
        return F::nan();
    }
    if y == F::one() {
        return F::infinity();
    }
    if y == -F::one() {
        return F::neg_infinity();
    }
    let mut x = erf_inv_seed(y);
    let scale = F::FRAC_2_SQRT_PI();
    for _ in 0..3 {
        let slope = scale * (-x * x).exp();
        if slope <= F::zero() {
            break;
        }
        let step = (erf(x) - y) / slope;
        x = x - step;
        if step.abs() <= x.abs() * F::epsilon() {
            break;
        }
    }
    x
}

/// Single-precision rational approximation (Giles, 2010).
fn erf_inv_seed<F: Scalar>(y: F) -> F {
    let yf = y.to_f64().unwrap_or(0.0);
    let mut w = -((1.0 - yf) * (1.0 + yf)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            3.43273939e-07,
            -3.5233877e-06,
            -4.39150654e-06,
            0.00021858087,
            -0.00125372503,
            -0.00417768164,
            0.246640727,
            1.50140941,
        ]
        .iter()
        .fold(2.81022636e-08, |p, &c| c + p * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            0.000100950558,
            0.00134934322,
            -0.00367342844,
            0.00573950773,
            -0.0076224613,
            0.00943887047,
            1.00167406,
            2.83297682,
        ]
        .iter()
        .fold(-0.000200214257, |p, &c| c + p * w)
    };
    lit::<F>(p) * y
}

/// `c = sqrt(2) * erfinv(alpha)`: the two-sided standard-normal quantile
/// for confidence `alpha`.
pub fn confidence_quantile<F: Scalar>(alpha: F) -> F {
    F::SQRT_2() * erf_inv(alpha)
}

/// Dimension choice for binomial cardinality estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationPlan<F> {
    pub alpha: F,
    pub beta: F,
    pub c: F,
    pub l_opt: u32,
}

/// Smallest dimension meeting confidence `alpha` at relative tolerance
/// `beta`: `ceil(log2(c / (c - beta)))`, at least 1.
pub fn plan_estimation<F: Scalar>(alpha: F, beta: F) -> Result<EstimationPlan<F>> {
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(Error::InvalidParams(format!("alpha {alpha:?} outside (0, 1)")));
    }
    if beta.is_nan() || beta <= F::zero() {
        return Err(Error::InvalidParams(format!("beta {beta:?} must be positive")));
    }
    let c = confidence_quantile(alpha);
    if beta >= c {
        return Err(Error::Infeasible(format!(
            "tolerance {beta:?} is not below c = {c:?}; no dimension satisfies the bound"
        )));
    }
    let raw = (c / (c - beta)).log2().ceil();
    let l_opt = raw.to_u32().unwrap_or(u32::MAX).max(1);
    Ok(EstimationPlan { alpha, beta, c, l_opt })
}

/// Linear-counting estimate `-d ln(n0 / d)` from `n0` empty slots out of `d`.
pub fn zero_estimate<F: Scalar>(d: usize, n0: usize) -> Result<F> {
    if d == 0 || n0 > d {
        return Err(Error::InvalidParams(format!("{n0} zeros in a bitmap of {d}")));
    }
    if n0 == 0 {
        return Err(Error::Saturated(d));
    }
    let d_f = lit::<F>(d as f64);
    let r = lit::<F>(n0 as f64) / d_f;
    Ok(if n0 == d { F::zero() } else { -d_f * r.ln() })
}

/// Bloom false-positive rate `(1 - e^(-k m / L))^k`.
pub fn bloom_fpr<F: Scalar>(m: usize, table_size: usize, k: usize) -> F {
    let m = lit::<F>(m as f64);
    let size = lit::<F>(table_size as f64);
    let kf = lit::<F>(k as f64);
    (F::one() - (-kf * m / size).exp()).powi(k as i32)
}

/// The `k` in `1..=k_max` minimising [`bloom_fpr`], by exhaustive sweep.
pub fn best_seed_count<F: Scalar>(m: usize, table_size: usize, k_max: usize) -> usize {
    (1..=k_max.max(1))
        .min_by(|&a, &b| {
            bloom_fpr::<F>(m, table_size, a)
                .partial_cmp(&bloom_fpr::<F>(m, table_size, b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(1)
}

/// Table dimension and seed count for missing-tag detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSizing {
    pub l: u32,
    pub table_size: usize,
    pub k: usize,
}

/// `l = ceil(log2(1.44 m log2(1/gamma)))` (at least 1) and
/// `k = ceil(ln 2 * 2^l / m)`.
pub fn detection_sizing<F: Scalar>(m: usize, gamma: F) -> Result<DetectionSizing> {
    if m == 0 {
        return Err(Error::InvalidParams("expected missing count must be at least 1".into()));
    }
    if !(gamma > F::zero() && gamma < F::one()) {
        return Err(Error::InvalidParams(format!("gamma {gamma:?} outside (0, 1)")));
    }
    let m_f = lit::<F>(m as f64);
    let bound = lit::<F>(1.44) * m_f * gamma.recip().log2();
    let l = bound.log2().ceil().to_u32().unwrap_or(0).max(1);
    if l > crate::tash::MAX_TABLE_DIMENSION {
        return Err(Error::Infeasible(format!("detection needs dimension {l}")));
    }
    let table_size = 1usize << l;
    let k = (F::LN_2() * lit::<F>(table_size as f64) / m_f)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    Ok(DetectionSizing { l, table_size, k })
}
