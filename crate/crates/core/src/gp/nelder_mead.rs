//! Bounded Nelder-Mead minimizer with an evaluation budget.

pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Minimizes `f` starting from `start`. Points are clamped into
/// `[lower, upper]` before each evaluation; non-finite objective values are
/// treated as +∞.
pub fn minimize<F>(mut f: F, start: &[f64], step: f64, lower: &[f64], upper: &[f64], max_evals: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let clamp = |x: &mut Vec<f64>| {
        for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let mut x = x0.clone();
        // Step inward if the vertex would sit on the bound.
        x[i] = if x[i] + step <= upper[i] { x[i] + step } else { x[i] - step };
        clamp(&mut x);
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let worst = simplex[n].1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            clamp(&mut x);
            x
        };

        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst {
            let x = along(0.5);
            let fx = eval(&x, &mut evals);
            (x, fx)
        } else {
            let x = along(-0.5);
            let fx = eval(&x, &mut evals);
            (x, fx)
        };
        if fc < worst.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = best
                .iter()
                .zip(&vertex.0)
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            clamp(&mut x);
            let fx = eval(&x, &mut evals);
            *vertex = (x, fx);
            if evals >= max_evals {
                break;
            }
        }
        let spread = simplex.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max)
            - simplex.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        if spread.is_finite() && spread < 1e-10 {
            break;
        }
    }

    let (point, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty simplex");
    Minimum {
        point,
        value,
        evaluations: evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let m = minimize(
            |x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2),
            &[0.0, 0.0],
            0.5,
            &[-5.0, -5.0],
            &[5.0, 5.0],
            400,
        );
        assert!((m.point[0] - 1.0).abs() < 1e-3);
        assert!((m.point[1] + 0.5).abs() < 1e-3);
        assert!(m.evaluations <= 400 + 2);
    }

    #[test]
    fn respects_bounds() {
        let m = minimize(|x| x[0], &[0.0], 0.5, &[-1.0], &[1.0], 100);
        assert_eq!(m.point[0], -1.0);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| (x[0] * 3.0).sin() + x[1].cos();
        let start = [0.3, 0.2];
        let m = minimize(f, &start, 0.7, &[-3.0, -3.0], &[3.0, 3.0], 50);
        assert!(m.value <= f(&start));
    }
}
