//! y-distribution features: skewness, excess kurtosis, KDE peak count.

use super::stats::{quantile, sd};
use super::{Degeneracy, GroupFeatures};
use crate::acquisition::normal_pdf;
use crate::doe::Design;
use crate::error::{Error, Result};

const KDE_GRID: usize = 512;

/// Silverman's rule-of-thumb bandwidth with the usual fallbacks for
/// degenerate spread.
pub(crate) fn silverman_bandwidth(x: &[f64]) -> f64 {
    let s = sd(x);
    let iqr = quantile(x, 0.75) - quantile(x, 0.25);
    let mut lo = s.min(iqr / 1.34);
    if !(lo > 0.0) {
        lo = s;
    }
    if !(lo > 0.0) {
        lo = x[0].abs();
    }
    if !(lo > 0.0) {
        lo = 1.0;
    }
    0.9 * lo * (x.len() as f64).powf(-0.2)
}

pub(crate) fn count_kde_peaks(x: &[f64]) -> usize {
    let h = silverman_bandwidth(x);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let density: Vec<f64> = (0..KDE_GRID)
        .map(|i| {
            let g = lo + (hi - lo) * i as f64 / (KDE_GRID - 1) as f64;
            x.iter().map(|xi| normal_pdf((g - xi) / h)).sum::<f64>()
        })
        .collect();
    density
        .windows(3)
        .filter(|w| w[1] > w[0] && w[1] > w[2])
        .count()
}

pub fn ela_distribution(design: &Design) -> Result<GroupFeatures> {
    let y = &design.values;
    if y.len() < 4 {
        return Err(Error::InsufficientData("y-distribution needs >= 4 samples".into()));
    }
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let moment = |k: i32| y.iter().map(|v| (v - m).powi(k)).sum::<f64>() / n;
    let (m2, m3, m4) = (moment(2), moment(3), moment(4));

    let mut g = GroupFeatures::new(3);
    if y.iter().all(|v| *v == y[0]) {
        g.flag(0, Degeneracy::ConstantValues);
        g.flag(1, Degeneracy::ConstantValues);
        g.values[2] = 1.0;
        return Ok(g);
    }
    g.set(0, m3 / m2.powf(1.5), Degeneracy::ZeroVariance);
    g.set(1, m4 / (m2 * m2) - 3.0, Degeneracy::ZeroVariance);
    g.values[2] = count_kde_peaks(y) as f64;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn design_of(values: Vec<f64>) -> Design {
        let points = (0..values.len()).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
        Design::new(points, values).unwrap()
    }

    #[test]
    fn symmetric_sample_has_zero_skew() {
        let g = ela_distribution(&design_of(vec![-2.0, -1.0, 0.0, 1.0, 2.0])).unwrap();
        assert!(g.values[0].abs() < 1e-12);
        // Discrete uniform on 5 points: m4/m2² = 6.8/4 = 1.7.
        assert!((g.values[1] - (1.7 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sample_has_small_excess_kurtosis() {
        let mut rng = StreamKey::new(11).rng();
        let v: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let g = ela_distribution(&design_of(v)).unwrap();
        assert!(g.values[1].abs() < 0.2, "{}", g.values[1]);
    }

    #[test]
    fn two_clusters_give_two_peaks() {
        let mut rng = StreamKey::new(12).rng();
        let v: Vec<f64> = (0..50)
            .map(|i| if i % 2 == 0 { 0.0 } else { 10.0 } + rng.random_range(-0.1..0.1))
            .collect();
        let g = ela_distribution(&design_of(v)).unwrap();
        assert_eq!(g.values[2], 2.0);
    }

    #[test]
    fn constant_values_are_flagged() {
        let g = ela_distribution(&design_of(vec![3.0; 6])).unwrap();
        assert!(g.values[0].is_nan() && g.values[1].is_nan());
        assert!(g.is_flagged(0) && g.is_flagged(1));
        assert_eq!(g.values[2], 1.0);
    }

    #[test]
    fn too_small() {
        assert!(ela_distribution(&design_of(vec![1.0, 2.0, 3.0])).is_err());
    }
}
