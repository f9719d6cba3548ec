use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coverage of the reported interval.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinomialResult {
    pub k: u64,
    pub n: u64,
    pub p_hat: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alternative: Alternative,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X = i)` for `X ~ Bin(n, p)`.
fn pmf(n: u64, i: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if i == n { 1.0 } else { 0.0 };
    }
    libm::exp(ln_choose(n, i) + i as f64 * libm::log(p) + (n - i) as f64 * libm::log1p(-p))
}

/// `P(X ≥ k)`.
fn upper_tail(n: u64, k: u64, p: f64) -> f64 {
    (k..=n).map(|i| pmf(n, i, p)).sum::<f64>().min(1.0)
}

/// `P(X ≤ k)`.
fn lower_tail(n: u64, k: u64, p: f64) -> f64 {
    (0..=k).map(|i| pmf(n, i, p)).sum::<f64>().min(1.0)
}

/// Root of a monotone function on [0, 1] by bisection to full precision.
fn bisect(mut lo: f64, mut hi: f64, increasing: bool, f: impl Fn(f64) -> f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) two-sided interval at `confidence`.
pub fn clopper_pearson(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    let alpha = 1.0 - confidence;
    let low = if k == 0 {
        0.0
    } else {
        // P(X ≥ k | p) rises with p
        bisect(0.0, 1.0, true, |p| upper_tail(n, k, p), alpha / 2.0)
    };
    let high = if k == n {
        1.0
    } else {
        // P(X ≤ k | p) falls with p
        bisect(0.0, 1.0, false, |p| lower_tail(n, k, p), alpha / 2.0)
    };
    (low, high)
}

/// Two-sided exact test against `p₀ = 0.5` with a 95% exact interval.
pub fn binomial_test(k: u64, n: u64) -> Result<BinomialResult> {
    binomial_test_with(k, n, Alternative::TwoSided)
}

/// The two-sided p-value sums every outcome no more likely than the
/// observed one.
pub fn binomial_test_with(k: u64, n: u64, alternative: Alternative) -> Result<BinomialResult> {
    if n == 0 {
        return Err(Error::arg("binomial test needs at least one trial"));
    }
    if k > n {
        return Err(Error::arg(alloc::format!("k = {k} exceeds n = {n}")));
    }
    let p0 = 0.5;
    let p_value = match alternative {
        Alternative::Greater => upper_tail(n, k, p0),
        Alternative::Less => lower_tail(n, k, p0),
        Alternative::TwoSided => {
            let observed = pmf(n, k, p0);
            let cutoff = observed * (1.0 + 1e-7);
            (0..=n)
                .map(|i| pmf(n, i, p0))
                .filter(|&d| d <= cutoff)
                .sum::<f64>()
                .min(1.0)
        }
    };
    let (ci_low, ci_high) = clopper_pearson(k, n, CONFIDENCE);
    Ok(BinomialResult {
        k,
        n,
        p_hat: k as f64 / n as f64,
        p_value,
        ci_low,
        ci_high,
        alternative,
    })
}
