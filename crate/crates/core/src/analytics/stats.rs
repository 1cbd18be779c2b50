use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use super::AnalyticsError;

/// Largest discordant total `b + c` for which [`mcnemar`] uses the exact
/// binomial test.
pub const EXACT_LIMIT: u64 = 30;

/// Two-sided McNemar p-value: exact binomial up to [`EXACT_LIMIT`]
/// discordant pairs, chi-square with continuity correction above.
pub fn mcnemar(b: u64, c: u64) -> f64 {
    if b + c == 0 {
        1.0
    } else if b + c <= EXACT_LIMIT {
        mcnemar_exact(b, c)
    } else {
        mcnemar_chi2(b, c)
    }
}

/// `min(1, 2 * P[X <= min(b, c)])` for `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    let ln2 = std::f64::consts::LN_2;
    let logs: Vec<f64> = (0..=k)
        .map(|i| ln_binomial(n, i) - n as f64 * ln2)
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail = max.exp() * logs.iter().map(|l| (l - max).exp()).sum::<f64>();
    (2.0 * tail).min(1.0)
}

/// Chi-square (1 df) with continuity correction `(|b - c| - 1)^2 / (b + c)`.
pub fn mcnemar_chi2(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    let chi = ChiSquared::new(1.0).expect("valid df");
    chi.sf(stat)
}

/// Pooled two-sided z-test for `x1/n1` against `x2/n2`. Returns `(z, p)`;
/// a zero pooled variance gives `(0, 1)`.
pub fn two_proportion_ztest(
    x1: u64,
    n1: u64,
    x2: u64,
    n2: u64,
) -> Result<(f64, f64), AnalyticsError> {
    if n1 == 0 || n2 == 0 {
        return Err(AnalyticsError::EmptySample);
    }
    for (x, n) in [(x1, n1), (x2, n2)] {
        if x > n {
            return Err(AnalyticsError::InvalidCount { x, n });
        }
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        return Ok((0.0, 1.0));
    }
    let z = (x1 as f64 / n1f - x2 as f64 / n2f) / se;
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    Ok((z, p.min(1.0)))
}
