//! Scalar helpers over `libm` so the crate stays `no_std`.

pub const LN_2: f64 = core::f64::consts::LN_2;
pub const LOG2_E: f64 = core::f64::consts::LOG2_E;

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log2(x: f64) -> f64 {
    libm::log2(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn log1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// Nats to bits.
#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x / LN_2
}

/// `ln(x)` with `ln(0) = -inf` and `-0.0` folded to `+0.0`.
#[inline]
pub fn ln_or_neg_inf(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        ln(x) + 0.0
    }
}

/// `-x ln x` with the `0 ln 0 = 0` convention.
#[inline]
pub fn neg_x_ln_x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * ln(x)
    }
}

/// Max-shifted `ln Σ exp(v)`. Returns `-inf` when every entry is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| exp(v - max)).sum();
    max + ln(sum)
}

/// Kahan-compensated sum; the solver sums hundreds of small terms per row.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + LN_2)).abs() < 1e-12);
        let v = log_sum_exp(&[800.0, f64::NEG_INFINITY]);
        assert_eq!(v, 800.0);
    }

    #[test]
    fn zero_log_zero_is_zero() {
        assert_eq!(neg_x_ln_x(0.0), 0.0);
        assert_eq!(ln_or_neg_inf(0.0), f64::NEG_INFINITY);
        assert!(ln_or_neg_inf(1.0).is_sign_positive());
    }
}
