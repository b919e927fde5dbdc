//! The seven-member schedule portfolio.
//!
//! A schedule decides, per surrogate iteration, whether EI or PI proposes
//! the next point. Portfolio order is fixed and indexes every target vector,
//! CSV column block and prediction in this crate.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::AfKind;
use crate::error::{Error, Result};
use crate::rng::StreamKey;

pub const PORTFOLIO_SIZE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    StaticEi,
    StaticPi,
    Random,
    RoundRobin,
    Ee25,
    Ee50,
    Ee75,
}

pub const PORTFOLIO: [Schedule; PORTFOLIO_SIZE] = [
    Schedule::StaticEi,
    Schedule::StaticPi,
    Schedule::Random,
    Schedule::RoundRobin,
    Schedule::Ee25,
    Schedule::Ee50,
    Schedule::Ee75,
];

pub fn portfolio() -> [Schedule; PORTFOLIO_SIZE] {
    PORTFOLIO
}

impl Schedule {
    pub fn id(self) -> &'static str {
        match self {
            Schedule::StaticEi => "static_ei",
            Schedule::StaticPi => "static_pi",
            Schedule::Random => "random",
            Schedule::RoundRobin => "round_robin",
            Schedule::Ee25 => "ee25",
            Schedule::Ee50 => "ee50",
            Schedule::Ee75 => "ee75",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        PORTFOLIO.get(i).copied()
    }

    /// Fraction of the budget spent on EI before switching to PI.
    pub fn switch_fraction(self) -> Option<f64> {
        match self {
            Schedule::Ee25 => Some(0.25),
            Schedule::Ee50 => Some(0.5),
            Schedule::Ee75 => Some(0.75),
            _ => None,
        }
    }

    /// Acquisition function for surrogate iteration `iteration` of `budget`.
    /// `key` only matters for [`Schedule::Random`], which flips a keyed coin
    /// per iteration.
    pub fn af_at(self, iteration: usize, budget: usize, key: StreamKey) -> Result<AfKind> {
        if iteration >= budget {
            return Err(Error::invalid(format!(
                "iteration {iteration} outside budget {budget}"
            )));
        }
        Ok(match self {
            Schedule::StaticEi => AfKind::Ei,
            Schedule::StaticPi => AfKind::Pi,
            Schedule::RoundRobin => {
                if iteration.is_multiple_of(2) {
                    AfKind::Ei
                } else {
                    AfKind::Pi
                }
            }
            Schedule::Random => {
                if key.derive(iteration as u64).rng().random_bool(0.5) {
                    AfKind::Ei
                } else {
                    AfKind::Pi
                }
            }
            Schedule::Ee25 | Schedule::Ee50 | Schedule::Ee75 => {
                let p = self.switch_fraction().expect("explore-exploit schedule");
                if iteration < (p * budget as f64).ceil() as usize {
                    AfKind::Ei
                } else {
                    AfKind::Pi
                }
            }
        })
    }

    /// Full AF sequence over a budget.
    pub fn sequence(self, budget: usize, key: StreamKey) -> Vec<AfKind> {
        (0..budget)
            .map(|i| self.af_at(i, budget, key).expect("iteration within budget"))
            .collect()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PORTFOLIO
            .iter()
            .copied()
            .find(|sch| sch.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown schedule '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn portfolio_order() {
        let p = portfolio();
        assert_eq!(p.len(), 7);
        assert_eq!(p[4], Schedule::Ee25);
        let ids: std::collections::HashSet<_> = p.iter().map(|s| s.id()).collect();
        assert_eq!(ids.len(), 7);
        for (i, s) in p.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(Schedule::from_index(i), Some(*s));
            assert_eq!(s.id().parse::<Schedule>().unwrap(), *s);
        }
    }

    #[test]
    fn ee25_switch_point() {
        let k = StreamKey::new(0);
        assert_eq!(Schedule::Ee25.af_at(24, 100, k).unwrap(), AfKind::Ei);
        assert_eq!(Schedule::Ee25.af_at(25, 100, k).unwrap(), AfKind::Pi);
    }

    #[test]
    fn round_robin_alternates() {
        let seq = Schedule::RoundRobin.sequence(4, StreamKey::new(0));
        assert_eq!(seq, vec![AfKind::Ei, AfKind::Pi, AfKind::Ei, AfKind::Pi]);
    }

    #[test]
    fn random_schedule_replays() {
        let k = StreamKey::new(42);
        let a = Schedule::Random.sequence(100, k);
        assert_eq!(a, Schedule::Random.sequence(100, k));
        let eis = a.iter().filter(|&&x| x == AfKind::Ei).count();
        assert!(eis > 20 && eis < 80);
        assert_ne!(a, Schedule::Random.sequence(100, StreamKey::new(43)));
    }

    #[test]
    fn out_of_range_iteration() {
        assert!(Schedule::StaticEi.af_at(10, 10, StreamKey::new(0)).is_err());
    }

    #[test]
    fn serde_uses_canonical_ids() {
        let json = serde_json::to_string(&Schedule::RoundRobin).unwrap();
        assert_eq!(json, "\"round_robin\"");
        let back: Schedule = serde_json::from_str("\"ee75\"").unwrap();
        assert_eq!(back, Schedule::Ee75);
    }
}
