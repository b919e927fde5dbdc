//! Meta-model features: adjusted R² of four least-squares fits plus
//! coefficient summaries of the linear and pure quadratic models.

use nalgebra::{DMatrix, DVector};

use super::{Degeneracy, GroupFeatures};
use crate::doe::Design;
use crate::error::{Error, Result};

const RIDGE_LAMBDA: f64 = 1e-8;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Model {
    Linear,
    LinearInteract,
    Quadratic,
    QuadraticInteract,
}

/// Design-matrix row for one point, intercept first.
pub(crate) fn basis(model: Model, x: &[f64]) -> Vec<f64> {
    let mut row = vec![1.0];
    row.extend_from_slice(x);
    let squares = matches!(model, Model::Quadratic | Model::QuadraticInteract);
    let interact = matches!(model, Model::LinearInteract | Model::QuadraticInteract);
    if squares {
        row.extend(x.iter().map(|v| v * v));
    }
    if interact {
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                row.push(x[i] * x[j]);
            }
        }
    }
    row
}

pub(crate) struct Fit {
    pub coef: Vec<f64>,
    pub adj_r2: f64,
    pub ridge: bool,
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let (n, p) = x.shape();
    if n >= p {
        let qr = x.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
        let largest = diag.iter().copied().fold(0.0, f64::max);
        if largest > 0.0 && diag.iter().all(|d| *d > RANK_TOL * largest) {
            let qty = qr.q().transpose() * y;
            if let Some(beta) = r.solve_upper_triangular(&qty) {
                return (beta, false);
            }
        }
    }
    let mut gram = x.transpose() * x;
    for i in 0..p {
        gram[(i, i)] += RIDGE_LAMBDA;
    }
    let rhs = x.transpose() * y;
    let beta = gram
        .cholesky()
        .map(|c| c.solve(&rhs))
        .unwrap_or_else(|| DVector::from_element(p, f64::NAN));
    (beta, true)
}

pub(crate) fn fit(model: Model, design: &Design) -> Fit {
    let n = design.len();
    let rows: Vec<Vec<f64>> = design.points.iter().map(|x| basis(model, x)).collect();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(&design.values);
    let (beta, ridge) = least_squares(&x, &y);

    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ssr: f64 = (&y - &x * &beta).iter().map(|r| r * r).sum();
    let adj_r2 = if n > p && sst > 0.0 {
        1.0 - (ssr / sst) * (n - 1) as f64 / (n - p) as f64
    } else {
        f64::NAN
    };
    Fit {
        coef: beta.iter().copied().collect(),
        adj_r2,
        ridge,
    }
}

pub fn ela_meta(design: &Design) -> Result<GroupFeatures> {
    let d = design.dim();
    if design.len() < d + 2 {
        return Err(Error::InsufficientData(format!(
            "meta-model features need more than {} samples",
            d + 1
        )));
    }
    let constant = design.values.iter().all(|v| *v == design.values[0]);
    let mut g = GroupFeatures::new(9);
    let r2_reason = |n: usize, p: usize| {
        if constant {
            Degeneracy::ConstantValues
        } else if n <= p {
            Degeneracy::InsufficientSample
        } else {
            Degeneracy::DivisionByZero
        }
    };
    let n = design.len();

    let lin = fit(Model::Linear, design);
    let lin_p = lin.coef.len();
    g.set(0, lin.adj_r2, r2_reason(n, lin_p));
    g.set(1, lin.coef[0], Degeneracy::RankDeficient);
    let slopes: Vec<f64> = lin.coef[1..].iter().map(|b| b.abs()).collect();
    let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().copied().fold(0.0, f64::max);
    g.set(2, lo, Degeneracy::RankDeficient);
    g.set(3, hi, Degeneracy::RankDeficient);
    g.set(4, hi / lo, Degeneracy::DivisionByZero);
    if lin.ridge {
        for i in 0..5 {
            g.flag(i, Degeneracy::RankDeficient);
        }
    }

    let inter = fit(Model::LinearInteract, design);
    g.set(5, inter.adj_r2, r2_reason(n, inter.coef.len()));
    if inter.ridge {
        g.flag(5, Degeneracy::RankDeficient);
    }

    let quad = fit(Model::Quadratic, design);
    g.set(6, quad.adj_r2, r2_reason(n, quad.coef.len()));
    let sq: Vec<f64> = quad.coef[1 + d..1 + 2 * d].iter().map(|b| b.abs()).collect();
    let sq_lo = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let sq_hi = sq.iter().copied().fold(0.0, f64::max);
    g.set(7, sq_hi / sq_lo, Degeneracy::DivisionByZero);
    if quad.ridge {
        g.flag(6, Degeneracy::RankDeficient);
        g.flag(7, Degeneracy::RankDeficient);
    }

    let full = fit(Model::QuadraticInteract, design);
    g.set(8, full.adj_r2, r2_reason(n, full.coef.len()));
    if full.ridge {
        g.flag(8, Degeneracy::RankDeficient);
    }
    Ok(g)
}
