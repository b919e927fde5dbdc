//! Information-content features of the slope sign sequence along a
//! nearest-neighbor tour of the design.

use super::stats::euclidean;
use super::{Degeneracy, GroupFeatures};
use crate::doe::Design;
use crate::error::{Error, Result};

pub const EPS_GRID_LEN: usize = 1000;
pub const SETTLING_THRESHOLD: f64 = 0.05;

/// Slopes along the tour plus the computed feature group.
#[derive(Debug, Clone)]
pub struct InformationContent {
    pub features: GroupFeatures,
    pub tour: Vec<usize>,
    pub slopes: Vec<f64>,
}

impl InformationContent {
    pub fn entropy(&self, eps: f64) -> f64 {
        entropy(&symbols(&self.slopes, eps))
    }

    pub fn partial_information(&self, eps: f64) -> f64 {
        partial_information(&symbols(&self.slopes, eps))
    }
}

/// ε values 10^t for t evenly spaced over [-5, 15].
pub fn eps_grid() -> Vec<f64> {
    (0..EPS_GRID_LEN)
        .map(|i| 10f64.powf(-5.0 + 20.0 * i as f64 / (EPS_GRID_LEN - 1) as f64))
        .collect()
}

/// Greedy nearest-unvisited chain starting at index 0; ties go to the lower index.
pub(crate) fn nearest_neighbor_tour(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut cur = 0;
    visited[0] = true;
    tour.push(0);
    for _ in 1..n {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if visited[j] {
                continue;
            }
            let d = euclidean(&points[cur], &points[j]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (next, _) = best.expect("unvisited point remains");
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

pub(crate) fn symbols(slopes: &[f64], eps: f64) -> Vec<i8> {
    slopes
        .iter()
        .map(|s| {
            if *s > eps {
                1
            } else if *s < -eps {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Entropy (base 6) of consecutive symbol pairs with differing symbols.
pub(crate) fn entropy(sym: &[i8]) -> f64 {
    if sym.len() < 2 {
        return 0.0;
    }
    let pairs = (sym.len() - 1) as f64;
    let mut counts = [[0usize; 3]; 3];
    for w in sym.windows(2) {
        counts[(w[0] + 1) as usize][(w[1] + 1) as usize] += 1;
    }
    let mut h = 0.0;
    for (a, row) in counts.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            if a != b && *c > 0 {
                let p = *c as f64 / pairs;
                h -= p * p.log(6.0);
            }
        }
    }
    h
}

/// Length of the symbol string with zeros removed and repeats collapsed,
/// relative to the number of slopes.
pub(crate) fn partial_information(sym: &[i8]) -> f64 {
    let mut len = 0usize;
    let mut last = 0i8;
    for &s in sym.iter().filter(|s| **s != 0) {
        if s != last {
            len += 1;
            last = s;
        }
    }
    len as f64 / sym.len() as f64
}

pub fn ic(design: &Design) -> Result<InformationContent> {
    let n = design.len();
    if n < 10 {
        return Err(Error::InsufficientData("information content needs >= 10 samples".into()));
    }
    let tour = nearest_neighbor_tour(&design.points);
    let slopes: Vec<f64> = tour
        .windows(2)
        .filter_map(|w| {
            let d = euclidean(&design.points[w[0]], &design.points[w[1]]);
            (d > 0.0).then(|| (design.values[w[1]] - design.values[w[0]]) / d)
        })
        .collect();

    let mut g = GroupFeatures::new(5);
    if slopes.len() < 2 {
        return Ok(InformationContent {
            features: GroupFeatures::nan_all(5, Degeneracy::ZeroDistances),
            tour,
            slopes,
        });
    }

    let grid = eps_grid();
    let h: Vec<f64> = grid.iter().map(|e| entropy(&symbols(&slopes, *e))).collect();
    let (arg, h_max) = h
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    g.values[0] = h_max;
    match h.iter().position(|v| *v < SETTLING_THRESHOLD) {
        Some(i) => g.values[1] = grid[i].log10(),
        None => g.flag(1, Degeneracy::NoSettling),
    }
    g.values[2] = grid[arg];
    match h.iter().rposition(|v| *v > 0.5 * h_max) {
        Some(i) => g.values[3] = grid[i].log10(),
        None => g.flag(3, Degeneracy::NoSettling),
    }
    g.values[4] = partial_information(&symbols(&slopes, 0.0));
    Ok(InformationContent {
        features: g,
        tour,
        slopes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(ys: &[f64]) -> Design {
        Design::new((0..ys.len()).map(|i| vec![i as f64]).collect(), ys.to_vec()).unwrap()
    }

    #[test]
    fn alternating_sequence_entropy() {
        let ys: Vec<f64> = (0..10).map(|i| f64::from(i % 2)).collect();
        let r = ic(&line(&ys)).unwrap();
        assert_eq!(r.tour, (0..10).collect::<Vec<_>>());
        let expect = -2.0 * 0.5 * 0.5f64.log(6.0);
        assert!((r.entropy(0.0) - expect).abs() < 1e-12);
        assert!((r.entropy(0.0) - 0.3868).abs() < 1e-4);
        assert!((r.features.values[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn monotone_sequence_has_one_run() {
        let ys: Vec<f64> = (0..12).map(|i| f64::from(i) * 2.0).collect();
        let r = ic(&line(&ys)).unwrap();
        assert!((r.features.values[4] - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(r.features.values[0], 0.0);
    }

    #[test]
    fn flat_slopes_settle_at_grid_minimum() {
        let ys: Vec<f64> = (0..12).map(|i| 1.0 + 1e-7 * f64::from(i % 3)).collect();
        let r = ic(&line(&ys)).unwrap();
        assert_eq!(r.features.values[0], 0.0);
        assert!((r.features.values[1] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_are_skipped() {
        let mut pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        pts.push(vec![9.0]);
        let ys: Vec<f64> = (0..11).map(f64::from).collect();
        let r = ic(&Design::new(pts, ys).unwrap()).unwrap();
        assert_eq!(r.slopes.len(), 9);
    }

    #[test]
    fn grid_endpoints() {
        let g = eps_grid();
        assert_eq!(g.len(), 1000);
        assert!((g[0] - 1e-5).abs() < 1e-20);
        assert!((g[999] / 1e15 - 1.0).abs() < 1e-12);
    }
}
