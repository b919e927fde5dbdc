//! Dispersion features: spread of the best points relative to the whole sample.

use super::stats::{mean, median, pairwise_distances, quantile};
use super::{Degeneracy, GroupFeatures};
use crate::doe::Design;
use crate::error::{Error, Result};

pub const QUANTILES: [f64; 4] = [0.02, 0.05, 0.10, 0.25];

/// Indices of points whose value is at or below the q-quantile, at least
/// the two best.
pub(crate) fn best_subset(values: &[f64], q: f64) -> Vec<usize> {
    let threshold = quantile(values, q);
    let subset: Vec<usize> = (0..values.len()).filter(|&i| values[i] <= threshold).collect();
    if subset.len() >= 2 {
        return subset;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(2);
    order.sort_unstable();
    order
}

pub fn disp(design: &Design) -> Result<GroupFeatures> {
    let n = design.len();
    if n < 8 {
        return Err(Error::InsufficientData("dispersion needs >= 8 samples".into()));
    }
    let all: Vec<usize> = (0..n).collect();
    let full = pairwise_distances(&design.points, &all);
    let (full_mean, full_median) = (mean(&full), median(&full));

    let mut g = GroupFeatures::new(16);
    for (k, q) in QUANTILES.iter().enumerate() {
        let sub = pairwise_distances(&design.points, &best_subset(&design.values, *q));
        let (m, md) = (mean(&sub), median(&sub));
        g.set(k, m / full_mean, Degeneracy::ZeroDistances);
        g.set(4 + k, md / full_median, Degeneracy::ZeroDistances);
        g.set(8 + k, m - full_mean, Degeneracy::ZeroDistances);
        g.set(12 + k, md - full_median, Degeneracy::ZeroDistances);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand::Rng;

    #[test]
    fn identical_points_give_nan_ratios_and_zero_diffs() {
        let d = Design::new(vec![vec![1.0, 1.0]; 10], (0..10).map(f64::from).collect()).unwrap();
        let g = disp(&d).unwrap();
        for k in 0..8 {
            assert!(g.values[k].is_nan() && g.is_flagged(k));
        }
        for k in 8..16 {
            assert_eq!(g.values[k], 0.0);
        }
    }

    #[test]
    fn whole_sample_subset_has_unit_ratio() {
        // Equal values put every point at or below every quantile.
        let mut rng = StreamKey::new(5).rng();
        let points: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
            .collect();
        let g = disp(&Design::new(points, vec![2.0; 12]).unwrap()).unwrap();
        for k in 0..8 {
            assert!((g.values[k] - 1.0).abs() < 1e-12);
        }
        for k in 8..16 {
            assert!(g.values[k].abs() < 1e-12);
        }
    }

    #[test]
    fn small_quantiles_keep_two_points() {
        let v: Vec<f64> = (0..20).map(|i| f64::from(i) * 1.5).collect();
        assert_eq!(best_subset(&v, 0.02), vec![0, 1]);
        assert_eq!(best_subset(&v, 0.25).len(), 5);
    }

    #[test]
    fn too_small() {
        let d = Design::new(vec![vec![0.0]; 7], vec![1.0; 7]).unwrap();
        assert!(disp(&d).is_err());
    }
}
