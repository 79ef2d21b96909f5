//! Means, standard errors, Student t tests and Pearson correlation.
//!
//! p-values are two-sided. The two-sample test is Welch's, with
//! Welch–Satterthwaite degrees of freedom. A sample with zero spread is
//! handled explicitly: if its mean equals the hypothesised value the test
//! returns `t = 0, p = 1`, otherwise `t = ±∞, p = 0`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite value in {what}")));
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::Degenerate("mean of an empty sample".into()));
    }
    check_finite(xs, "sample")?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Variance dividing by `n`.
pub fn population_variance(xs: &[f64]) -> Result<f64> {
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// Variance dividing by `n - 1`.
pub fn sample_variance(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::Degenerate(format!("sample variance needs 2 values, got {}", xs.len())));
    }
    let m = mean(xs)?;
    Ok(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Mean and standard error `s / sqrt(n)`.
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    let var = sample_variance(xs)?;
    Ok((mean(xs)?, (var / xs.len() as f64).sqrt()))
}

/// Normal-approximation 95% interval `mean ± 1.96 · stderr`.
pub fn normal_ci95(xs: &[f64]) -> Result<(f64, f64)> {
    let (m, se) = mean_stderr(xs)?;
    Ok((m - 1.96 * se, m + 1.96 * se))
}

fn two_sided_p(t: f64, df: f64) -> Result<f64> {
    let dist =
        StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Degenerate(format!("t distribution with df = {df}: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

fn zero_spread(diff: f64, df: f64) -> TTest {
    if diff == 0.0 {
        TTest { t: 0.0, df, p: 1.0 }
    } else {
        TTest { t: f64::INFINITY.copysign(diff), df, p: 0.0 }
    }
}

pub fn t_one_sample(xs: &[f64], mu0: f64) -> Result<TTest> {
    if xs.len() < 3 {
        return Err(Error::Degenerate(format!("t test needs at least 3 values, got {}", xs.len())));
    }
    let (m, se) = mean_stderr(xs)?;
    let df = (xs.len() - 1) as f64;
    if se == 0.0 {
        return Ok(zero_spread(m - mu0, df));
    }
    let t = (m - mu0) / se;
    Ok(TTest { t, df, p: two_sided_p(t, df)? })
}

/// Welch's unequal-variance test of `mean(xs) - mean(ys)`.
pub fn t_two_sample(xs: &[f64], ys: &[f64]) -> Result<TTest> {
    if xs.len() < 3 || ys.len() < 3 {
        return Err(Error::Degenerate(format!(
            "t test needs at least 3 values per sample, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (mx, my) = (mean(xs)?, mean(ys)?);
    let a = sample_variance(xs)? / xs.len() as f64;
    let b = sample_variance(ys)? / ys.len() as f64;
    let se2 = a + b;
    if se2 == 0.0 {
        return Ok(zero_spread(mx - my, (xs.len() + ys.len() - 2) as f64));
    }
    let df = se2 * se2 / (a * a / (xs.len() - 1) as f64 + b * b / (ys.len() - 1) as f64);
    let t = (mx - my) / se2.sqrt();
    Ok(TTest { t, df, p: two_sided_p(t, df)? })
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate("pearson needs at least 2 pairs".into()));
    }
    let (mx, my) = (mean(xs)?, mean(ys)?);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson of a constant vector".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
