//! Instance transformations shared by the BBOB functions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense orthogonal matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    rows: Vec<f64>,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut rows = vec![0.0; dim * dim];
        for i in 0..dim {
            rows[i * dim + i] = 1.0;
        }
        Rotation { dim, rows }
    }

    /// Haar-distributed rotation: QR of a Gaussian matrix with the signs of
    /// R's diagonal folded back into Q.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let gauss = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = gauss.qr();
        let (q, r) = qr.unpack();
        let mut rows = vec![0.0; dim * dim];
        for j in 0..dim {
            let sign = if r[(j, j)] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..dim {
                rows[i * dim + j] = q[(i, j)] * sign;
            }
        }
        Rotation { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.dim + j]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, &xi) in self.rows.chunks_exact(self.dim).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    /// max |RᵀR − I| over all entries.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| self.get(k, i) * self.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

pub fn t_osz_scalar(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let xhat = x.abs().ln();
    let (c1, c2) = if x > 0.0 { (10.0, 7.9) } else { (5.5, 3.1) };
    x.signum() * (xhat + 0.049 * ((c1 * xhat).sin() + (c2 * xhat).sin())).exp()
}

pub fn t_osz(x: &mut [f64]) {
    for v in x {
        *v = t_osz_scalar(*v);
    }
}

pub fn t_asy(x: &mut [f64], beta: f64) {
    let d = x.len();
    for (i, v) in x.iter_mut().enumerate() {
        if *v > 0.0 {
            *v = v.powf(1.0 + beta * ratio(i, d) * v.sqrt());
        }
    }
}

/// (i−1)/(D−1) with 0-based `i`.
#[inline]
pub fn ratio(i: usize, d: usize) -> f64 {
    i as f64 / (d - 1) as f64
}

/// Diagonal entry i of Λ^α.
#[inline]
pub fn lambda(alpha: f64, i: usize, d: usize) -> f64 {
    alpha.powf(0.5 * ratio(i, d))
}

pub fn scale_lambda(x: &mut [f64], alpha: f64) {
    let d = x.len();
    for (i, v) in x.iter_mut().enumerate() {
        *v *= lambda(alpha, i, d);
    }
}

pub fn f_pen(x: &[f64]) -> f64 {
    x.iter().map(|v| (v.abs() - 5.0).max(0.0).powi(2)).sum()
}

pub fn shifted(x: &[f64], x_opt: &[f64]) -> Vec<f64> {
    x.iter().zip(x_opt).map(|(a, b)| a - b).collect()
}
