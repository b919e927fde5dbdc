//! The 24 noiseless BBOB functions with deterministic seeded instances.
//!
//! Instances are generated locally rather than by COCO's numbering scheme:
//! the optimum, offset, rotations and sign vectors are drawn from a stream
//! keyed by `(function_id, instance_id)`, so the same triple
//! `(function_id, instance_id, dim)` always yields the same problem.

mod functions;
mod transforms;

pub use transforms::Rotation;

use rand::Rng;
use rand_distr::{Cauchy, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{phase, StreamKey};

pub const NUM_FUNCTIONS: u8 = 24;
pub const LOWER_BOUND: f64 = -5.0;
pub const UPPER_BOUND: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Unimodal,
    Multimodal,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Unimodal => "unimodal",
            Modality::Multimodal => "multimodal",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FunctionInfo {
    pub id: u8,
    pub name: &'static str,
    pub group: &'static str,
    pub modality: Modality,
}

const SEPARABLE: &str = "separable";
const MODERATE: &str = "low-or-moderate-conditioning";
const ILL: &str = "high-conditioning-unimodal";
const ADEQUATE: &str = "multimodal-adequate-global-structure";
const WEAK: &str = "multimodal-weak-global-structure";

const SUITE: [(&str, &str, Modality); 24] = [
    ("sphere", SEPARABLE, Modality::Unimodal),
    ("ellipsoidal", SEPARABLE, Modality::Unimodal),
    ("rastrigin", SEPARABLE, Modality::Multimodal),
    ("bueche-rastrigin", SEPARABLE, Modality::Multimodal),
    ("linear-slope", SEPARABLE, Modality::Unimodal),
    ("attractive-sector", MODERATE, Modality::Unimodal),
    ("step-ellipsoidal", MODERATE, Modality::Unimodal),
    ("rosenbrock", MODERATE, Modality::Unimodal),
    ("rosenbrock-rotated", MODERATE, Modality::Unimodal),
    ("ellipsoidal-rotated", ILL, Modality::Unimodal),
    ("discus", ILL, Modality::Unimodal),
    ("bent-cigar", ILL, Modality::Unimodal),
    ("sharp-ridge", ILL, Modality::Unimodal),
    ("different-powers", ILL, Modality::Unimodal),
    ("rastrigin-rotated", ADEQUATE, Modality::Multimodal),
    ("weierstrass", ADEQUATE, Modality::Multimodal),
    ("schaffers-f7", ADEQUATE, Modality::Multimodal),
    ("schaffers-f7-ill-conditioned", ADEQUATE, Modality::Multimodal),
    ("griewank-rosenbrock", ADEQUATE, Modality::Multimodal),
    ("schwefel", WEAK, Modality::Multimodal),
    ("gallagher-101-peaks", WEAK, Modality::Multimodal),
    ("gallagher-21-peaks", WEAK, Modality::Multimodal),
    ("katsuura", WEAK, Modality::Multimodal),
    ("lunacek-bi-rastrigin", WEAK, Modality::Multimodal),
];

pub fn function_info(id: u8) -> Option<FunctionInfo> {
    let idx = usize::from(id).checked_sub(1)?;
    SUITE.get(idx).map(|&(name, group, modality)| FunctionInfo {
        id,
        name,
        group,
        modality,
    })
}

pub fn suite() -> impl Iterator<Item = FunctionInfo> {
    (1..=NUM_FUNCTIONS).filter_map(function_info)
}

/// Identity of a problem instance, used as a record key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProblemKey {
    pub function_id: u8,
    pub instance_id: u32,
    pub dim: usize,
}

/// Gallagher peak centers, per-peak diagonal conditioning and weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Peaks {
    pub centers: Vec<Vec<f64>>,
    pub conditioning: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub rotation: Rotation,
    pub second_rotation: Rotation,
    /// Random ±1 vector.
    pub signs: Vec<f64>,
    pub(crate) peaks: Option<Peaks>,
}

impl Transform {
    pub fn rotations(&self) -> [&Rotation; 2] {
        [&self.rotation, &self.second_rotation]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    key: ProblemKey,
    x_opt: Vec<f64>,
    f_opt: f64,
    transform: Transform,
}

impl Problem {
    pub fn instantiate(function_id: u8, instance_id: u32, dim: usize) -> Result<Self> {
        if !(1..=NUM_FUNCTIONS).contains(&function_id) {
            return Err(Error::invalid(format!(
                "function id {function_id} outside 1..={NUM_FUNCTIONS}"
            )));
        }
        if dim < 2 {
            return Err(Error::invalid(format!("dimension {dim} < 2")));
        }
        let mut rng = StreamKey::ROOT
            .derive(phase::INSTANCE)
            .derive(u64::from(function_id))
            .derive(u64::from(instance_id))
            .rng();

        let raw_opt: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
        let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
        let c: f64 = cauchy.sample(&mut rng);
        let f_opt = ((100.0 * c).round() / 100.0).clamp(-1000.0, 1000.0);
        let rotation = Rotation::random(dim, &mut rng);
        let second_rotation = Rotation::random(dim, &mut rng);
        let signs: Vec<f64> = (0..dim)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let peaks = match function_id {
            21 => Some(functions::gallagher_peaks(dim, 101, &mut rng)),
            22 => Some(functions::gallagher_peaks(dim, 21, &mut rng)),
            _ => None,
        };
        let transform = Transform {
            rotation,
            second_rotation,
            signs,
            peaks,
        };
        let x_opt = functions::optimum(function_id, raw_opt, &transform);

        Ok(Problem {
            key: ProblemKey {
                function_id,
                instance_id,
                dim,
            },
            x_opt,
            f_opt,
            transform,
        })
    }

    pub fn key(&self) -> ProblemKey {
        self.key
    }

    pub fn function_id(&self) -> u8 {
        self.key.function_id
    }

    pub fn instance_id(&self) -> u32 {
        self.key.instance_id
    }

    pub fn dim(&self) -> usize {
        self.key.dim
    }

    pub fn x_opt(&self) -> &[f64] {
        &self.x_opt
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn bounds(&self) -> (f64, f64) {
        (LOWER_BOUND, UPPER_BOUND)
    }

    /// Raw objective value, including the `f_opt` offset.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has {} coordinates, problem has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN coordinate"));
        }
        Ok(functions::raw_value(self, x) + self.f_opt)
    }

    /// `y − f_opt`, clamped at zero against round-off.
    pub fn regret(&self, y: f64) -> f64 {
        (y - self.f_opt).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(Problem::instantiate(0, 0, 5).is_err());
        assert!(Problem::instantiate(25, 0, 5).is_err());
        assert!(Problem::instantiate(1, 0, 1).is_err());
        let p = Problem::instantiate(1, 0, 3).unwrap();
        assert!(p.evaluate(&[0.0, 0.0]).is_err());
        assert!(p.evaluate(&[0.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn sphere_definition() {
        let p = Problem::instantiate(1, 0, 2).unwrap();
        let x_opt = p.x_opt().to_vec();
        assert_eq!(p.evaluate(&x_opt).unwrap(), p.f_opt());
        let mut e1 = x_opt.clone();
        e1[0] += 1.0;
        assert!((p.evaluate(&e1).unwrap() - (p.f_opt() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn instantiation_is_deterministic() {
        let a = Problem::instantiate(1, 0, 5).unwrap();
        let b = Problem::instantiate(1, 0, 5).unwrap();
        assert_eq!(a.x_opt(), b.x_opt());
        assert_eq!(a, b);
        let c = Problem::instantiate(1, 1, 5).unwrap();
        assert_ne!(a.x_opt(), c.x_opt());
    }

    #[test]
    fn rotations_are_orthogonal() {
        let p = Problem::instantiate(8, 3, 5).unwrap();
        for r in p.transform().rotations() {
            assert!(r.orthogonality_error() < 1e-10);
        }
    }

    #[test]
    fn regret_clamps() {
        let p = Problem::instantiate(3, 2, 4).unwrap();
        assert_eq!(p.regret(p.f_opt()), 0.0);
        assert_eq!(p.regret(p.f_opt() + 10.0), 10.0);
        assert_eq!(p.regret(p.f_opt() - 1e-15), 0.0);
    }

    #[test]
    fn f_opt_follows_offset_convention() {
        for f in 1..=24 {
            for i in 0..5 {
                let p = Problem::instantiate(f, i, 3).unwrap();
                let cents = p.f_opt() * 100.0;
                assert!((cents - cents.round()).abs() < 1e-6);
                assert!(p.f_opt().abs() <= 1000.0);
            }
        }
    }

    #[test]
    fn suite_listing_has_24_entries() {
        let all: Vec<_> = suite().collect();
        assert_eq!(all.len(), 24);
        assert_eq!(all[0].name, "sphere");
        assert_eq!(all[23].modality, Modality::Multimodal);
    }
}
