use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {found}")]
    TooFewValues { needed: usize, found: usize },
    #[error("zero variance")]
    DegenerateVariance,
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("non-finite input")]
    NonFinite,
}

/// Variance floor for Welch's test when both samples are constant.
pub const ZERO_VARIANCE_EPS: f64 = 1e-12;

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

fn require(values: &[f64], needed: usize) -> Result<(), StatsError> {
    if values.len() < needed {
        return Err(StatsError::TooFewValues {
            needed,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; requires at least two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Sample Pearson correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    require(x, 3)?;
    require(y, 3)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub halfwidth: f64,
}

/// Student-t interval: mean ± t_{(1+level)/2, n-1} · s / √n.
pub fn mean_ci(values: &[f64], level: f64) -> Result<MeanCi, StatsError> {
    require(values, 2)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadLevel(level));
    }
    let n = values.len() as f64;
    let s = sample_variance(values).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("n >= 2 gives positive degrees of freedom")
        .inverse_cdf((1.0 + level) / 2.0);
    Ok(MeanCi {
        mean: mean(values),
        halfwidth: t * s / n.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
}

impl WelchTest {
    pub fn is_significant(&self) -> bool {
        self.p_value < SIGNIFICANCE_LEVEL
    }
}

/// Welch's unequal-variance t-test with a two-sided p-value.
pub fn two_sample_t(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    require(a, 2)?;
    require(b, 2)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let diff = mean(a) - mean(b);
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = qa + qb;
    if se2 < ZERO_VARIANCE_EPS && diff == 0.0 {
        return Ok(WelchTest {
            t_stat: 0.0,
            df: na + nb - 2.0,
            p_value: 1.0,
        });
    }
    let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
    let df = if denom > 0.0 { se2 * se2 / denom } else { na + nb - 2.0 };
    let t_stat = diff / se2.max(ZERO_VARIANCE_EPS).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.sf(t_stat.abs())).min(1.0);
    Ok(WelchTest { t_stat, df, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_perfect_lines() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert_eq!(pearson(&x, &y).unwrap(), 1.0);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &y).unwrap(), -1.0);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0, 3.0]),
            Err(StatsError::TooFewValues { .. })
        ));
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateVariance)
        );
    }

    #[test]
    fn ci_of_constant_values_is_zero_width() {
        let ci = mean_ci(&[0.5, 0.5, 0.5], 0.95).unwrap();
        assert_eq!(ci.mean, 0.5);
        assert_eq!(ci.halfwidth, 0.0);
        assert!(matches!(mean_ci(&[1.0], 0.95), Err(StatsError::TooFewValues { .. })));
    }

    #[test]
    fn welch_edge_cases() {
        let r = two_sample_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = two_sample_t(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap();
        assert!(r.t_stat < 0.0);
        assert!(r.p_value < 1e-6);
        assert!(r.is_significant());
        let r = two_sample_t(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }
}
