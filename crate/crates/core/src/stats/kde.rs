use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

impl DensityEstimate {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

pub(crate) fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid(points: usize, lo: f64, hi: f64) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
        }
    }
}

/// Standard normal density.
pub fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Quantile with linear interpolation between order statistics of a sorted
/// sample.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9 · min(sd, IQR / 1.34) · n^(-1/5)`.
///
/// The standard deviation uses the `n - 1` denominator. When the IQR is zero
/// but the spread is not, the standard deviation alone is used.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::DegenerateSample { n });
    }
    let mean = sample.iter().sum::<f64>() / n as f64;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !sd.is_finite() || sd <= 0.0 {
        return Err(Error::DegenerateSample { n });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

pub fn kde_evaluate(sample: &[f64], h: f64, grid: &[f64]) -> Result<DensityEstimate> {
    kde_evaluate_with(sample, h, grid, Exec::default())
}

/// Gaussian kernel density at each grid point, `(1 / nh) Σ f((d - d_k) / h)`.
pub fn kde_evaluate_with(sample: &[f64], h: f64, grid: &[f64], exec: Exec) -> Result<DensityEstimate> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("kernel density sample is empty".into()));
    }
    let weighted: Vec<(f64, f64)> = sample.iter().map(|&x| (x, 1.0)).collect();
    kde_evaluate_weighted(&weighted, h, grid, exec)
}

/// Kernel density over `(point, weight)` pairs, normalised by the total
/// weight. Unit weights give exactly the unweighted estimate; integer
/// weights give the estimate of the sample with each point repeated.
pub fn kde_evaluate_weighted(sample: &[(f64, f64)], h: f64, grid: &[f64], exec: Exec) -> Result<DensityEstimate> {
    if sample.is_empty() {
        return Err(Error::EmptyInput("kernel density sample is empty".into()));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("density grid must be sorted".into()));
    }
    let total: f64 = sample.iter().map(|(_, w)| w).sum();
    let norm = total * h;
    let values = exec.map(grid, |&d| {
        let mut acc = 0.0;
        for &(x, w) in sample {
            acc += w * gaussian((d - x) / h);
        }
        acc / norm
    });
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values,
        bandwidth: h,
        n: total as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_values() {
        let k = kde_evaluate(&[0.5], 0.1, &[0.5, 0.6]).unwrap();
        assert!((k.values[0] - 3.98942).abs() < 1e-5);
        assert!((k.values[1] - 2.41971).abs() < 1e-5);
    }

    #[test]
    fn duplicates_average() {
        let one = kde_evaluate(&[0.3], 0.2, &[0.3]).unwrap();
        let two = kde_evaluate(&[0.3, 0.3], 0.2, &[0.3]).unwrap();
        assert_eq!(one.values, two.values);
    }

    #[test]
    fn two_point_silverman() {
        let h = silverman_bandwidth(&[0.0, 1.0]).unwrap();
        assert!((h - 0.29234).abs() < 1e-5, "{h}");
    }

    #[test]
    fn degenerate_samples() {
        assert!(matches!(silverman_bandwidth(&[0.5, 0.5, 0.5]), Err(Error::DegenerateSample { n: 3 })));
        assert!(matches!(silverman_bandwidth(&[0.5]), Err(Error::DegenerateSample { n: 1 })));
    }

    #[test]
    fn zero_iqr_falls_back_to_sd() {
        let sample = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let h = silverman_bandwidth(&sample).unwrap();
        let mean: f64 = 1.0 / 8.0;
        let sd = ((7.0 * mean * mean + (1.0 - mean).powi(2)) / 7.0f64).sqrt();
        assert!((h - 0.9 * sd * 8f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn weighted_counts_match_repeats() {
        let grid = uniform_grid(33, 0.0, 1.0);
        let repeated = kde_evaluate(&[0.2, 0.2, 0.2, 0.7], 0.1, &grid).unwrap();
        let weighted = kde_evaluate_weighted(&[(0.2, 3.0), (0.7, 1.0)], 0.1, &grid, Exec::Sequential).unwrap();
        assert_eq!(weighted.n, 4);
        for (a, b) in repeated.values.iter().zip(&weighted.values) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }
    }

    #[test]
    fn kde_errors() {
        assert!(kde_evaluate(&[], 0.1, &[0.0]).is_err());
        assert!(kde_evaluate(&[0.1], 0.0, &[0.0]).is_err());
        assert!(kde_evaluate(&[0.1], 0.1, &[0.5, 0.0]).is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(512, 0.0, 1.0);
        assert_eq!(g.len(), 512);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[511], 1.0);
    }
}
