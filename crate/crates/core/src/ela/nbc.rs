//! Nearest-better clustering features.

use super::stats::{euclidean, mean, pearson, sd};
use super::{Degeneracy, GroupFeatures};
use crate::doe::Design;
use crate::error::{Error, Result};

/// Per-point nearest-neighbor distance, nearest-better distance and
/// nearest-better index (`None` for points with no strictly better point).
pub(crate) fn neighbors(design: &Design) -> (Vec<f64>, Vec<Option<(usize, f64)>>) {
    let n = design.len();
    let mut nn = vec![f64::INFINITY; n];
    let mut nb: Vec<Option<(usize, f64)>> = vec![None; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = euclidean(&design.points[i], &design.points[j]);
            nn[i] = nn[i].min(dist);
            if design.values[j] < design.values[i] {
                let closer = match nb[i] {
                    None => true,
                    Some((k, best)) => dist < best || (dist == best && j < k),
                };
                if closer {
                    nb[i] = Some((j, dist));
                }
            }
        }
    }
    (nn, nb)
}

pub fn nbc(design: &Design) -> Result<GroupFeatures> {
    let n = design.len();
    if n < 5 {
        return Err(Error::InsufficientData("nbc needs >= 5 samples".into()));
    }
    if design.values.iter().all(|v| *v == design.values[0]) {
        return Ok(GroupFeatures::nan_all(5, Degeneracy::ConstantValues));
    }
    let (nn_all, nb) = neighbors(design);

    // Aggregates over points that have a strictly better neighbor.
    let with_nb: Vec<usize> = (0..n).filter(|&i| nb[i].is_some()).collect();
    let nn: Vec<f64> = with_nb.iter().map(|&i| nn_all[i]).collect();
    let nbd: Vec<f64> = with_nb.iter().map(|&i| nb[i].unwrap().1).collect();
    let ratios: Vec<f64> = nn.iter().zip(&nbd).map(|(a, b)| a / b).collect();

    let mut indegree = vec![0.0; n];
    for (j, _) in nb.iter().flatten() {
        indegree[*j] += 1.0;
    }

    let mut g = GroupFeatures::new(5);
    g.set(0, sd(&nn) / sd(&nbd), Degeneracy::ZeroVariance);
    g.set(1, mean(&nn) / mean(&nbd), Degeneracy::ZeroDistances);
    g.set(2, pearson(&nn, &nbd), Degeneracy::ZeroVariance);
    g.set(3, sd(&ratios) / mean(&ratios), Degeneracy::ZeroDistances);
    g.set(4, pearson(&indegree, &design.values), Degeneracy::ZeroVariance);
    Ok(g)
}
