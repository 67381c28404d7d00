//! Confidence intervals for replication averages.

use crate::error::{Error, Result};

/// A 95% confidence interval around a point estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ci {
    pub lb: f64,
    pub point: f64,
    pub ub: f64,
}

const Z_95: f64 = 1.96;

fn mean_and_sd(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Normal-approximation interval for the mean: `mean ± 1.96 sd / sqrt(count)`.
pub fn confidence_interval(samples: &[f64]) -> Result<Ci> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "confidence intervals need at least 2 samples".into(),
        ));
    }
    let (mean, sd) = mean_and_sd(samples);
    let half = Z_95 * sd / (samples.len() as f64).sqrt();
    Ok(Ci {
        lb: mean - half,
        point: mean,
        ub: mean + half,
    })
}

/// Ratio of means with a delta-method interval, treating the numerator and
/// denominator means as independent normals.
pub fn ratio_of_means_ci(numerator: &[f64], denominator: &[f64]) -> Result<Ci> {
    if numerator.len() < 2 || denominator.len() < 2 {
        return Err(Error::InvalidArgument(
            "confidence intervals need at least 2 samples".into(),
        ));
    }
    let (mf, sf) = mean_and_sd(numerator);
    let (mb, sb) = mean_and_sd(denominator);
    if mb == 0.0 {
        return Err(Error::Numerical("denominator mean is zero".into()));
    }
    let point = mf / mb;
    let var_f = sf * sf / numerator.len() as f64;
    let var_b = sb * sb / denominator.len() as f64;
    let rel = (var_f / (mf * mf) + var_b / (mb * mb)).max(0.0);
    let half = Z_95 * point.abs() * rel.sqrt();
    Ok(Ci {
        lb: point - half,
        point,
        ub: point + half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::RngSeed;
    use approx::assert_relative_eq;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_samples_give_zero_width() {
        let ci = confidence_interval(&[2.5, 2.5, 2.5]).unwrap();
        assert_eq!(ci.lb, 2.5);
        assert_eq!(ci.point, 2.5);
        assert_eq!(ci.ub, 2.5);
    }

    #[test]
    fn two_point_hand_computation() {
        // {0, 2}: mean 1, sd sqrt(2), half-width 1.96 sqrt(2)/sqrt(2) = 1.96.
        let ci = confidence_interval(&[0.0, 2.0]).unwrap();
        assert_relative_eq!(ci.point, 1.0, epsilon = 1e-15);
        assert_relative_eq!(ci.ub - ci.point, 1.96, epsilon = 1e-12);
        assert_relative_eq!(ci.point - ci.lb, 1.96, epsilon = 1e-12);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        assert!(confidence_interval(&[1.0]).is_err());
        assert!(ratio_of_means_ci(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn coverage_of_the_standard_normal_mean() {
        // 1000 seeded repetitions of 10^4 standard-normal draws; the interval
        // must cover 0 at least 93% of the time.
        let mut covered = 0;
        for rep in 0..1000u64 {
            let mut rng = RngSeed(500 + rep).rng();
            let samples: Vec<f64> = (0..10_000)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let ci = confidence_interval(&samples).unwrap();
            if ci.lb <= 0.0 && 0.0 <= ci.ub {
                covered += 1;
            }
        }
        assert!(covered >= 930, "covered only {covered}/1000");
    }

    #[test]
    fn ratio_interval_brackets_the_point() {
        let f = [4.0, 5.0, 6.0];
        let b = [2.0, 2.5, 1.5];
        let ci = ratio_of_means_ci(&f, &b).unwrap();
        assert_relative_eq!(ci.point, 2.5, epsilon = 1e-12);
        assert!(ci.lb < ci.point && ci.point < ci.ub);
    }
}
