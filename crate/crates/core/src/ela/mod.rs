//! Exploratory landscape analysis features of an evaluated design.
//!
//! Thirty-eight features from five groups that need no additional function
//! evaluations: y-distribution (3), meta-model (9), dispersion (16),
//! information content (5) and nearest-better clustering (5). Degenerate
//! samples produce NaN entries that carry a [`Degeneracy`] reason.

mod dispersion;
mod distribution;
mod information;
mod meta;
mod nbc;
pub(crate) mod stats;

pub use dispersion::disp;
pub use distribution::ela_distribution;
pub use information::{ic, InformationContent};
pub use meta::ela_meta;
pub use nbc::nbc;

use serde::{Deserialize, Serialize};

use crate::doe::Design;
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 38;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "ela_distr.skewness",
    "ela_distr.kurtosis",
    "ela_distr.number_of_peaks",
    "ela_meta.lin_simple.adj_r2",
    "ela_meta.lin_simple.intercept",
    "ela_meta.lin_simple.coef.min",
    "ela_meta.lin_simple.coef.max",
    "ela_meta.lin_simple.coef.max_by_min",
    "ela_meta.lin_w_interact.adj_r2",
    "ela_meta.quad_simple.adj_r2",
    "ela_meta.quad_simple.cond",
    "ela_meta.quad_w_interact.adj_r2",
    "disp.ratio_mean_02",
    "disp.ratio_mean_05",
    "disp.ratio_mean_10",
    "disp.ratio_mean_25",
    "disp.ratio_median_02",
    "disp.ratio_median_05",
    "disp.ratio_median_10",
    "disp.ratio_median_25",
    "disp.diff_mean_02",
    "disp.diff_mean_05",
    "disp.diff_mean_10",
    "disp.diff_mean_25",
    "disp.diff_median_02",
    "disp.diff_median_05",
    "disp.diff_median_10",
    "disp.diff_median_25",
    "ic.h_max",
    "ic.eps_s",
    "ic.eps_max",
    "ic.eps_ratio",
    "ic.m0",
    "nbc.nn_nb.sd_ratio",
    "nbc.nn_nb.mean_ratio",
    "nbc.nn_nb.cor",
    "nbc.dist_ratio.coeff_var",
    "nbc.nb_fitness.cor",
];

/// Why a feature is NaN or otherwise not a plain estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    ConstantValues,
    ZeroDistances,
    ZeroVariance,
    DivisionByZero,
    InsufficientSample,
    /// Least-squares fit fell back to ridge regularization.
    RankDeficient,
    /// The entropy never drops below the settling threshold on the grid.
    NoSettling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFlag {
    pub feature: String,
    pub reason: Degeneracy,
}

/// One group's values with flags indexed into that group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFeatures {
    pub values: Vec<f64>,
    pub flags: Vec<(usize, Degeneracy)>,
}

impl GroupFeatures {
    pub(crate) fn new(len: usize) -> Self {
        GroupFeatures {
            values: vec![f64::NAN; len],
            flags: Vec::new(),
        }
    }

    pub(crate) fn nan_all(len: usize, reason: Degeneracy) -> Self {
        GroupFeatures {
            values: vec![f64::NAN; len],
            flags: (0..len).map(|i| (i, reason)).collect(),
        }
    }

    /// Stores `value`; a non-finite value is replaced by NaN and flagged.
    pub(crate) fn set(&mut self, i: usize, value: f64, reason: Degeneracy) {
        if value.is_finite() {
            self.values[i] = value;
        } else {
            self.values[i] = f64::NAN;
            self.flag(i, reason);
        }
    }

    pub(crate) fn flag(&mut self, i: usize, reason: Degeneracy) {
        if !self.flags.contains(&(i, reason)) {
            self.flags.push((i, reason));
        }
    }

    pub fn is_flagged(&self, i: usize) -> bool {
        self.flags.iter().any(|(j, _)| *j == i)
    }
}

/// The 38 features in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    #[serde(with = "nan_as_null")]
    pub values: Vec<f64>,
    #[serde(default)]
    pub flags: Vec<FeatureFlag>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != NUM_FEATURES {
            return Err(Error::invalid(format!(
                "expected {NUM_FEATURES} features, got {}",
                values.len()
            )));
        }
        Ok(FeatureVector {
            values,
            flags: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    /// Bitwise equality, treating NaN entries as equal to each other.
    pub fn bit_identical(&self, other: &FeatureVector) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.flags == other.flags
    }
}

/// Entries that may be NaN are written as JSON `null`.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(values.iter().map(|v| if v.is_nan() { None } else { Some(*v) }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}

fn group_or_nan(result: Result<GroupFeatures>, len: usize) -> GroupFeatures {
    match result {
        Ok(g) => g,
        Err(_) => GroupFeatures::nan_all(len, Degeneracy::InsufficientSample),
    }
}

/// Computes all 38 features from the design alone.
pub fn feature_vector(design: &Design) -> FeatureVector {
    let groups = [
        group_or_nan(ela_distribution(design), 3),
        group_or_nan(ela_meta(design), 9),
        group_or_nan(disp(design), 16),
        group_or_nan(ic(design).map(|r| r.features), 5),
        group_or_nan(nbc(design), 5),
    ];
    let mut values = Vec::with_capacity(NUM_FEATURES);
    let mut flags = Vec::new();
    for g in groups {
        let offset = values.len();
        for (i, reason) in g.flags {
            flags.push(FeatureFlag {
                feature: FEATURE_NAMES[offset + i].to_string(),
                reason,
            });
        }
        values.extend(g.values);
    }
    debug_assert_eq!(values.len(), NUM_FEATURES);
    FeatureVector { values, flags }
}
