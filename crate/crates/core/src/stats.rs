//! Batch means, autocorrelation times, chi-square tests and least-squares
//! slopes used by the sampler diagnostics and the estimators.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::summation::compensated_sum;

/// Fewest batches accepted for a batch-means error.
pub const MIN_BATCHES: usize = 20;

/// Default number of batches.
pub const DEFAULT_BATCHES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub stderr: f64,
    pub batches: usize,
    pub batch_size: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() as f64 - 1.0)
}

/// Mean and standard error from `batches` contiguous batches; trailing
/// samples that do not fill a batch are dropped from the error estimate but
/// kept in the mean.
pub fn batch_means(xs: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < MIN_BATCHES {
        return Err(Error::InvalidArgument(format!("batch means need at least {MIN_BATCHES} batches")));
    }
    if xs.len() < batches {
        return Err(Error::InsufficientSamples(format!("{} samples for {batches} batches", xs.len())));
    }
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).take(batches).map(mean).collect();
    let stderr = (variance(&means) / batches as f64).sqrt();
    Ok(BatchMeans { mean: mean(xs), stderr, batches, batch_size: size })
}

/// Integrated autocorrelation time τ = 1 + 2 Σ_t ρ(t) with Sokal's
/// self-consistent window (cut at the first M ≥ 5 τ(M)).
pub fn integrated_autocorr_time(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return 1.0;
    }
    let m = mean(xs);
    let c0 = compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n / 2 {
        let ct = compensated_sum((0..n - t).map(|i| (xs[i] - m) * (xs[i + t] - m))) / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn chi_square_p(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    dist.sf(statistic)
}

/// Goodness of fit of observed counts against cell probabilities; adjacent
/// cells are pooled until every pooled expectation is at least 5.
pub fn chi_square_gof(observed: &[u64], probabilities: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probabilities.len());
    let total: f64 = observed.iter().sum::<u64>() as f64;
    let norm: f64 = probabilities.iter().sum();
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(probabilities) {
        o += obs as f64;
        e += total * p / norm;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1);
    ChiSquare { statistic, dof, p_value: chi_square_p(statistic, dof) }
}

/// Homogeneity test of two count vectors over the same categories; sparse
/// categories are pooled as in [`chi_square_gof`].
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len());
    let na: f64 = a.iter().sum::<u64>() as f64;
    let nb: f64 = b.iter().sum::<u64>() as f64;
    let total = na + nb;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        ca += x as f64;
        cb += y as f64;
        let col = ca + cb;
        if col * na.min(nb) / total >= 5.0 {
            pooled.push((ca, cb));
            ca = 0.0;
            cb = 0.0;
        }
    }
    if ca + cb > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += ca;
                last.1 += cb;
            }
            None => pooled.push((ca, cb)),
        }
    }
    let mut statistic = 0.0;
    for &(x, y) in &pooled {
        let col = x + y;
        let ea = col * na / total;
        let eb = col * nb / total;
        statistic += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = pooled.len().saturating_sub(1);
    ChiSquare { statistic, dof, p_value: chi_square_p(statistic, dof) }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// 95% confidence interval for the slope.
    pub slope_ci: (f64, f64),
}

/// Ordinary least squares y = a + b x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || n != y.len() {
        return Err(Error::InsufficientSamples("a slope fit needs at least three points".into()));
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let dof = (n - 2) as f64;
    let slope_stderr = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive dof").inverse_cdf(0.975);
    Ok(LinearFit { slope, intercept, slope_stderr, slope_ci: (slope - t * slope_stderr, slope + t * slope_stderr) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn batch_means_of_iid_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..64_000).map(|_| rng.random::<f64>()).collect();
        let bm = batch_means(&xs, 32).unwrap();
        let iid = (1.0 / 12.0 / 64_000.0f64).sqrt();
        assert!((bm.stderr / iid - 1.0).abs() < 0.4);
        assert!((bm.mean - 0.5).abs() < 4.0 * iid);
        assert!(batch_means(&xs, 10).is_err());
        assert!(batch_means(&xs[..10], 20).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        // AR(1) with coefficient φ has τ = (1 + φ)/(1 - φ)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi: f64 = 0.8;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                x = phi * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        let tau = integrated_autocorr_time(&xs);
        assert!((tau - 9.0).abs() < 1.0, "{tau}");
    }

    #[test]
    fn chi_square_detects_mismatch() {
        let fair = chi_square_gof(&[250, 240, 260, 250], &[0.25; 4]);
        assert!(fair.p_value > 0.5);
        assert_eq!(fair.dof, 3);
        let biased = chi_square_gof(&[400, 200, 200, 200], &[0.25; 4]);
        assert!(biased.p_value < 1e-6);
        let same = chi_square_homogeneity(&[100, 200, 300], &[110, 190, 300]);
        assert!(same.p_value > 0.3);
        let diff = chi_square_homogeneity(&[100, 200, 300], &[300, 200, 100]);
        assert!(diff.p_value < 1e-6);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept + 1.0).abs() < 1e-14);
        assert!(f.slope_ci.0 <= 2.0 && f.slope_ci.1 >= 2.0);
    }
}
