//! Closed-form Expected Improvement and Probability of Improvement for
//! minimization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AfKind {
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "PI")]
    Pi,
}

impl AfKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AfKind::Ei => "EI",
            AfKind::Pi => "PI",
        }
    }

    pub fn value(self, mu: f64, sigma: f64, f_min: f64, xi: f64) -> Result<f64> {
        match self {
            AfKind::Ei => expected_improvement(mu, sigma, f_min, xi),
            AfKind::Pi => probability_of_improvement(mu, sigma, f_min, xi),
        }
    }
}

impl fmt::Display for AfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EI" => Ok(AfKind::Ei),
            "PI" => Ok(AfKind::Pi),
            _ => Err(Error::invalid(format!("unknown acquisition function '{s}'"))),
        }
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn check(mu: f64, sigma: f64, f_min: f64, xi: f64) -> Result<()> {
    if mu.is_nan() || sigma.is_nan() || f_min.is_nan() || xi.is_nan() {
        return Err(Error::invalid("NaN acquisition input"));
    }
    if sigma < 0.0 {
        return Err(Error::invalid(format!("negative sigma {sigma}")));
    }
    Ok(())
}

pub fn expected_improvement(mu: f64, sigma: f64, f_min: f64, xi: f64) -> Result<f64> {
    check(mu, sigma, f_min, xi)?;
    Ok(ei_unchecked(mu, sigma, f_min, xi))
}

pub fn probability_of_improvement(mu: f64, sigma: f64, f_min: f64, xi: f64) -> Result<f64> {
    check(mu, sigma, f_min, xi)?;
    Ok(pi_unchecked(mu, sigma, f_min, xi))
}

#[inline]
pub(crate) fn ei_unchecked(mu: f64, sigma: f64, f_min: f64, xi: f64) -> f64 {
    let improvement = f_min - mu - xi;
    if sigma == 0.0 {
        return improvement.max(0.0);
    }
    let z = improvement / sigma;
    (improvement * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

#[inline]
pub(crate) fn pi_unchecked(mu: f64, sigma: f64, f_min: f64, xi: f64) -> f64 {
    if sigma == 0.0 {
        return if mu + xi < f_min { 1.0 } else { 0.0 };
    }
    normal_cdf((f_min - mu - xi) / sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_anchors() {
        assert_eq!(expected_improvement(1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
        let ei = expected_improvement(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((ei - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(probability_of_improvement(2.0, 1.0, 2.0, 0.0).unwrap(), 0.5);
        assert!(probability_of_improvement(10.0, 1e-6, 0.0, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn cdf_reference_values() {
        // Φ at a few points, from high-precision tables.
        let table = [
            (-8.0, 6.220_960_574_271_785e-16),
            (-3.0, 0.001_349_898_031_630_094_6),
            (-1.0, 0.158_655_253_931_457_05),
            (0.5, 0.691_462_461_274_013_1),
            (2.0, 0.977_249_868_051_820_8),
            (8.0, 0.999_999_999_999_999_4),
        ];
        for (z, want) in table {
            assert!((normal_cdf(z) - want).abs() < 1e-12, "Φ({z})");
        }
    }

    #[test]
    fn rejects_nan_and_negative_sigma() {
        assert!(expected_improvement(f64::NAN, 1.0, 0.0, 0.0).is_err());
        assert!(probability_of_improvement(0.0, -1.0, 0.0, 0.0).is_err());
        assert!(probability_of_improvement(0.0, 1.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn zero_sigma_limit() {
        for (mu, f_min) in [(0.3, 1.0), (1.0, 0.3), (-2.0, -1.0)] {
            let limit = expected_improvement(mu, 1e-12, f_min, 0.0).unwrap();
            let exact = expected_improvement(mu, 0.0, f_min, 0.0).unwrap();
            assert!((limit - exact).abs() < 1e-9);
        }
        assert_eq!(probability_of_improvement(0.0, 0.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(probability_of_improvement(1.0, 0.0, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn parses_kind_names() {
        assert_eq!("ei".parse::<AfKind>().unwrap(), AfKind::Ei);
        assert_eq!("PI".parse::<AfKind>().unwrap(), AfKind::Pi);
        assert!("ucb".parse::<AfKind>().is_err());
    }
}
