//! Function formulas. `raw_value` returns f(x) − f_opt.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use super::transforms::{f_pen, lambda, ratio, scale_lambda, shifted, t_asy, t_osz, t_osz_scalar};
use super::{Peaks, Problem, Transform};

const SCHWEFEL_OPT: f64 = 4.209_687_463_3;
const SCHWEFEL_OFFSET: f64 = 4.189_828_872_724_339;
const LUNACEK_MU0: f64 = 2.5;

fn rosenbrock_scale(d: usize) -> f64 {
    ((d as f64).sqrt() / 8.0).max(1.0)
}

/// Location of the optimum given the uniformly drawn default.
pub(super) fn optimum(function_id: u8, raw: Vec<f64>, t: &Transform) -> Vec<f64> {
    let d = raw.len();
    match function_id {
        4 => raw
            .into_iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { v.abs() } else { v })
            .collect(),
        5 => t.signs.iter().map(|s| 5.0 * s).collect(),
        8 => raw.into_iter().map(|v| 0.75 * v).collect(),
        9 | 19 => {
            let c = rosenbrock_scale(d);
            t.rotation.apply_transpose(&vec![0.5 / c; d])
        }
        20 => t.signs.iter().map(|s| 0.5 * SCHWEFEL_OPT * s).collect(),
        21 | 22 => t.peaks.as_ref().expect("gallagher peaks").centers[0].clone(),
        24 => t.signs.iter().map(|s| 0.5 * LUNACEK_MU0 * s).collect(),
        _ => raw,
    }
}

pub(super) fn gallagher_peaks<R: Rng + ?Sized>(d: usize, count: usize, rng: &mut R) -> Peaks {
    let (half_width, first_alpha) = if count == 101 {
        (5.0, 1000.0)
    } else {
        (4.9, 1000.0 * 1000.0)
    };
    let centers: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let w = if i == 0 { 0.8 * half_width } else { half_width };
            (0..d).map(|_| rng.random_range(-w..w)).collect()
        })
        .collect();

    let others = count - 1;
    let mut alphas: Vec<f64> = (0..others)
        .map(|j| 1000f64.powf(2.0 * j as f64 / (others - 1) as f64))
        .collect();
    alphas.shuffle(rng);
    alphas.insert(0, first_alpha);

    let conditioning = alphas
        .iter()
        .map(|&a| {
            let mut diag: Vec<f64> = (0..d).map(|i| lambda(a, i, d)).collect();
            diag.shuffle(rng);
            let norm = a.powf(0.25);
            diag.into_iter().map(|c| c / norm).collect()
        })
        .collect();

    let weights = (0..count)
        .map(|i| {
            if i == 0 {
                10.0
            } else {
                1.1 + 8.0 * (i - 1) as f64 / (others - 1) as f64
            }
        })
        .collect();

    Peaks {
        centers,
        conditioning,
        weights,
    }
}

fn rastrigin_terms(z: &[f64]) -> f64 {
    10.0 * (z.len() as f64 - z.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>())
}

fn norm_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

fn rosenbrock_sum(z: &[f64]) -> f64 {
    z.windows(2)
        .map(|w| 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

fn weighted_sum(z: &[f64], base: f64, exponent_scale: f64) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| base.powf(exponent_scale * ratio(i, d)) * v * v)
        .sum()
}

fn schaffers(z: &[f64], x: &[f64]) -> f64 {
    let d = z.len();
    let s: f64 = z
        .windows(2)
        .map(|w| {
            let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
            s.sqrt() + s.sqrt() * (50.0 * s.powf(0.2)).sin().powi(2)
        })
        .sum();
    (s / (d - 1) as f64).powi(2) + 10.0 * f_pen(x)
}

fn weierstrass_inner(v: f64) -> f64 {
    (0..12)
        .map(|k| 0.5f64.powi(k) * (2.0 * PI * 3f64.powi(k) * (v + 0.5)).cos())
        .sum()
}

pub(super) fn raw_value(p: &Problem, x: &[f64]) -> f64 {
    let d = x.len();
    let t = &p.transform;
    let r = &t.rotation;
    let q = &t.second_rotation;
    let x_opt = &p.x_opt;
    match p.key.function_id {
        1 => norm_sq(&shifted(x, x_opt)),
        2 => {
            let mut z = shifted(x, x_opt);
            t_osz(&mut z);
            weighted_sum(&z, 10.0, 6.0)
        }
        3 => {
            let mut z = shifted(x, x_opt);
            t_osz(&mut z);
            t_asy(&mut z, 0.2);
            scale_lambda(&mut z, 10.0);
            rastrigin_terms(&z) + norm_sq(&z)
        }
        4 => {
            let mut z = shifted(x, x_opt);
            t_osz(&mut z);
            for (i, v) in z.iter_mut().enumerate() {
                let base = 10f64.powf(0.5 * ratio(i, d));
                let s = if *v > 0.0 && i % 2 == 0 { 10.0 * base } else { base };
                *v *= s;
            }
            rastrigin_terms(&z) + norm_sq(&z) + 100.0 * f_pen(x)
        }
        5 => x
            .iter()
            .zip(x_opt)
            .enumerate()
            .map(|(i, (&xi, &oi))| {
                let s = oi.signum() * 10f64.powf(ratio(i, d));
                let z = if oi * xi < 25.0 { xi } else { oi };
                5.0 * s.abs() - s * z
            })
            .sum(),
        6 => {
            let mut z = r.apply(&shifted(x, x_opt));
            scale_lambda(&mut z, 10.0);
            let z = q.apply(&z);
            let s: f64 = z
                .iter()
                .zip(x_opt)
                .map(|(zi, oi)| {
                    let s = if zi * oi > 0.0 { 100.0 } else { 1.0 };
                    (s * zi).powi(2)
                })
                .sum();
            t_osz_scalar(s).powf(0.9)
        }
        7 => {
            let mut zhat = r.apply(&shifted(x, x_opt));
            scale_lambda(&mut zhat, 10.0);
            let rounded: Vec<f64> = zhat
                .iter()
                .map(|&v| {
                    if v.abs() > 0.5 {
                        (0.5 + v).floor()
                    } else {
                        (0.5 + 10.0 * v).floor() / 10.0
                    }
                })
                .collect();
            let z = q.apply(&rounded);
            0.1 * (zhat[0].abs() / 1e4).max(weighted_sum(&z, 10.0, 2.0)) + f_pen(x)
        }
        8 => {
            let c = rosenbrock_scale(d);
            let z: Vec<f64> = shifted(x, x_opt).iter().map(|v| c * v + 1.0).collect();
            rosenbrock_sum(&z)
        }
        9 => {
            let c = rosenbrock_scale(d);
            let z: Vec<f64> = r.apply(x).iter().map(|v| c * v + 0.5).collect();
            rosenbrock_sum(&z)
        }
        10 => {
            let mut z = r.apply(&shifted(x, x_opt));
            t_osz(&mut z);
            weighted_sum(&z, 10.0, 6.0)
        }
        11 => {
            let mut z = r.apply(&shifted(x, x_opt));
            t_osz(&mut z);
            1e6 * z[0] * z[0] + norm_sq(&z[1..])
        }
        12 => {
            let mut z = r.apply(&shifted(x, x_opt));
            t_asy(&mut z, 0.5);
            let z = r.apply(&z);
            z[0] * z[0] + 1e6 * norm_sq(&z[1..])
        }
        13 => {
            let mut z = r.apply(&shifted(x, x_opt));
            scale_lambda(&mut z, 10.0);
            let z = q.apply(&z);
            z[0] * z[0] + 100.0 * norm_sq(&z[1..]).sqrt()
        }
        14 => {
            let z = r.apply(&shifted(x, x_opt));
            z.iter()
                .enumerate()
                .map(|(i, v)| v.abs().powf(2.0 + 4.0 * ratio(i, d)))
                .sum::<f64>()
                .sqrt()
        }
        15 => {
            let mut z = r.apply(&shifted(x, x_opt));
            t_osz(&mut z);
            t_asy(&mut z, 0.2);
            let mut z = q.apply(&z);
            scale_lambda(&mut z, 10.0);
            let z = r.apply(&z);
            rastrigin_terms(&z) + norm_sq(&z)
        }
        16 => {
            let mut z = r.apply(&shifted(x, x_opt));
            t_osz(&mut z);
            let mut z = q.apply(&z);
            scale_lambda(&mut z, 0.01);
            let z = r.apply(&z);
            let f0 = weierstrass_inner(0.0);
            let mean = z.iter().map(|&v| weierstrass_inner(v)).sum::<f64>() / d as f64;
            10.0 * (mean - f0).powi(3) + 10.0 / d as f64 * f_pen(x)
        }
        17 | 18 => {
            let alpha = if p.key.function_id == 17 { 10.0 } else { 1000.0 };
            let mut z = r.apply(&shifted(x, x_opt));
            t_asy(&mut z, 0.5);
            let mut z = q.apply(&z);
            scale_lambda(&mut z, alpha);
            schaffers(&z, x)
        }
        19 => {
            let c = rosenbrock_scale(d);
            let z: Vec<f64> = r.apply(x).iter().map(|v| c * v + 0.5).collect();
            let sum: f64 = z
                .windows(2)
                .map(|w| {
                    let s = 100.0 * (w[0] * w[0] - w[1]).powi(2) + (w[0] - 1.0).powi(2);
                    s / 4000.0 - s.cos()
                })
                .sum();
            10.0 * sum / (d - 1) as f64 + 10.0
        }
        20 => {
            let xhat: Vec<f64> = x.iter().zip(&t.signs).map(|(v, s)| 2.0 * s * v).collect();
            let two_abs: Vec<f64> = x_opt.iter().map(|v| 2.0 * v.abs()).collect();
            let mut zhat = xhat.clone();
            for i in 1..d {
                zhat[i] = xhat[i] + 0.25 * (xhat[i - 1] - two_abs[i - 1]);
            }
            let z: Vec<f64> = zhat
                .iter()
                .zip(&two_abs)
                .enumerate()
                .map(|(i, (zi, ti))| 100.0 * (lambda(10.0, i, d) * (zi - ti) + ti))
                .collect();
            let scaled: Vec<f64> = z.iter().map(|v| v / 100.0).collect();
            -z.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>() / (100.0 * d as f64)
                + SCHWEFEL_OFFSET
                + 100.0 * f_pen(&scaled)
        }
        21 | 22 => {
            let peaks = t.peaks.as_ref().expect("gallagher peaks");
            let best = peaks
                .centers
                .iter()
                .zip(&peaks.conditioning)
                .zip(&peaks.weights)
                .map(|((y, c), w)| {
                    let u = r.apply(&shifted(x, y));
                    let quad: f64 = u.iter().zip(c).map(|(ui, ci)| ci * ui * ui).sum();
                    w * (-quad / (2.0 * d as f64)).exp()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            t_osz_scalar(10.0 - best).powi(2) + f_pen(x)
        }
        23 => {
            let mut z = r.apply(&shifted(x, x_opt));
            scale_lambda(&mut z, 100.0);
            let z = q.apply(&z);
            let d2 = (d * d) as f64;
            let exponent = 10.0 / (d as f64).powf(1.2);
            let prod: f64 = z
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let s: f64 = (1..=32)
                        .map(|j| {
                            let p = 2f64.powi(j);
                            (p * v - (p * v).round()).abs() / p
                        })
                        .sum();
                    (1.0 + (i + 1) as f64 * s).powf(exponent)
                })
                .product();
            10.0 / d2 * prod - 10.0 / d2 + f_pen(x)
        }
        24 => {
            let df = d as f64;
            let s = 1.0 - 1.0 / (2.0 * (df + 20.0).sqrt() - 8.2);
            let mu1 = -((LUNACEK_MU0 * LUNACEK_MU0 - 1.0) / s).sqrt();
            let xhat: Vec<f64> = x
                .iter()
                .zip(x_opt)
                .map(|(v, o)| 2.0 * o.signum() * v)
                .collect();
            let first: f64 = xhat.iter().map(|v| (v - LUNACEK_MU0).powi(2)).sum();
            let second: f64 = df + s * xhat.iter().map(|v| (v - mu1).powi(2)).sum::<f64>();
            let centered: Vec<f64> = xhat.iter().map(|v| v - LUNACEK_MU0).collect();
            let mut z = r.apply(&centered);
            scale_lambda(&mut z, 100.0);
            let z = q.apply(&z);
            first.min(second) + rastrigin_terms(&z) + 1e4 * f_pen(x)
        }
        other => unreachable!("function id {other} validated at instantiation"),
    }
}
