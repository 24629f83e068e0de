use std::fmt;

use crate::error::{Error, Result};
use crate::stats::kde::{trapezoid, DensityEstimate};

/// Relative tolerance on density comparisons, scaled by the largest density
/// value of either curve.
pub const DENSITY_EPSILON: f64 = 1e-9;

/// Share of the actual density's mass that must sit in path-dependent
/// regions for a `Full` verdict.
pub const FULL_MASS_SHARE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Full,
    None,
    Mixed,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Full => "full path-dependence",
            Verdict::None => "no path-dependence",
            Verdict::Mixed => "path-dependence and non-path-dependence",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationIntervals {
    /// Sub-intervals where the actual density exceeds the counterfactual.
    pub path_dependent: Vec<[f64; 2]>,
    /// Sub-intervals where actual mass is present but below the counterfactual.
    pub non_path_dependent: Vec<[f64; 2]>,
    pub verdict: Verdict,
    /// Excess of actual over counterfactual density inside path-dependent
    /// regions, as a share of the actual density's mass on the grid.
    pub path_dependent_mass: f64,
}

fn runs(grid: &[f64], mask: &[bool]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push([grid[s], grid[i - 1]]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push([grid[s], grid[grid.len() - 1]]);
    }
    out
}

/// Trapezoid weight of each grid point.
fn point_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Indices of the smallest set of highest-density grid points carrying at
/// least `share` of the density's mass.
fn high_density_region(values: &[f64], weights: &[f64], share: f64) -> Vec<usize> {
    let total: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut region = Vec::new();
    for i in order {
        if acc >= share * total {
            break;
        }
        acc += values[i] * weights[i];
        region.push(i);
    }
    region
}

pub fn classify_regions(actual: &DensityEstimate, counterfactual: &DensityEstimate) -> Result<ClassificationIntervals> {
    classify_with_epsilon(actual, counterfactual, DENSITY_EPSILON)
}

pub fn classify_with_epsilon(
    actual: &DensityEstimate,
    counterfactual: &DensityEstimate,
    epsilon: f64,
) -> Result<ClassificationIntervals> {
    if actual.grid != counterfactual.grid || actual.values.len() != actual.grid.len() {
        return Err(Error::GridMismatch);
    }
    let grid = &actual.grid;
    let a = &actual.values;
    let c = &counterfactual.values;
    let scale = a.iter().chain(c).fold(0.0f64, |m, &v| m.max(v));
    let tol = epsilon * scale;

    let pd: Vec<bool> = a.iter().zip(c).map(|(&x, &y)| x > y + tol).collect();
    let npd: Vec<bool> = a.iter().zip(c).map(|(&x, &y)| x < y - tol && x > tol).collect();

    let actual_mass = trapezoid(grid, a);
    let excess: Vec<f64> = a
        .iter()
        .zip(c)
        .zip(&pd)
        .map(|((&x, &y), &p)| if p { x - y } else { 0.0 })
        .collect();
    let path_dependent_mass = if actual_mass > 0.0 {
        trapezoid(grid, &excess) / actual_mass
    } else {
        0.0
    };

    let verdict = if !pd.iter().any(|&p| p) {
        Verdict::None
    } else {
        let region = high_density_region(a, &point_weights(grid), FULL_MASS_SHARE);
        if region.iter().all(|&i| pd[i]) {
            Verdict::Full
        } else {
            Verdict::Mixed
        }
    };

    Ok(ClassificationIntervals {
        path_dependent: runs(grid, &pd),
        non_path_dependent: runs(grid, &npd),
        verdict,
        path_dependent_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::kde::{kde_evaluate, uniform_grid};

    fn density(values: Vec<f64>) -> DensityEstimate {
        let grid = uniform_grid(values.len(), 0.0, 1.0);
        DensityEstimate {
            grid,
            values,
            bandwidth: 0.1,
            n: 1,
        }
    }

    #[test]
    fn actual_above_everywhere_is_full() {
        let r = classify_regions(&density(vec![2.0; 11]), &density(vec![1.0; 11])).unwrap();
        assert_eq!(r.verdict, Verdict::Full);
        assert_eq!(r.verdict.label(), "full path-dependence");
        assert_eq!(r.path_dependent, vec![[0.0, 1.0]]);
        assert!(r.non_path_dependent.is_empty());
    }

    #[test]
    fn actual_below_everywhere_is_none() {
        let r = classify_regions(&density(vec![1.0; 11]), &density(vec![2.0; 11])).unwrap();
        assert_eq!(r.verdict, Verdict::None);
        assert!(r.path_dependent.is_empty());
        assert_eq!(r.non_path_dependent, vec![[0.0, 1.0]]);
        assert_eq!(r.path_dependent_mass, 0.0);
    }

    #[test]
    fn shifted_right_is_mixed_or_full() {
        let grid = uniform_grid(512, 0.0, 1.0);
        let a = kde_evaluate(&[0.7, 0.75, 0.8], 0.05, &grid).unwrap();
        let c = kde_evaluate(&[0.1, 0.2, 0.3], 0.05, &grid).unwrap();
        let r = classify_regions(&a, &c).unwrap();
        assert_eq!(r.verdict, Verdict::Full);
        let c = kde_evaluate(&[0.2, 0.3, 0.75, 0.5], 0.1, &grid).unwrap();
        let a = kde_evaluate(&[0.3, 0.75, 0.8], 0.05, &grid).unwrap();
        let r = classify_regions(&a, &c).unwrap();
        assert_eq!(r.verdict, Verdict::Mixed);
        assert!(!r.non_path_dependent.is_empty());
    }

    #[test]
    fn equal_densities_have_no_regions() {
        let r = classify_regions(&density(vec![1.0; 5]), &density(vec![1.0; 5])).unwrap();
        assert_eq!(r.verdict, Verdict::None);
        assert!(r.path_dependent.is_empty() && r.non_path_dependent.is_empty());
    }

    #[test]
    fn grid_mismatch() {
        assert!(matches!(
            classify_regions(&density(vec![1.0; 5]), &density(vec![1.0; 6])),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn runs_split_on_gaps() {
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        assert_eq!(
            runs(&grid, &[true, true, false, true, true]),
            vec![[0.0, 0.25], [0.75, 1.0]]
        );
    }
}
