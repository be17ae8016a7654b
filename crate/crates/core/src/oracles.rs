//! Prediction oracles. The simulator is omniscient: an oracle sees the true
//! upcoming request and degrades it according to its kind.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::model::PredictionVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("unknown oracle `{0}`; expected perfect, adversarial, null, rho:<f>, zeta:<f>, rho-sin:<lo>,<hi>,<period> or dirichlet")]
    Unknown(String),
    #[error("oracle parameter `{0}` is not a number")]
    BadNumber(String),
    #[error("oracle parameter {name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("sinusoidal accuracy needs lo ≤ hi and a positive period")]
    BadSinusoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleSpec {
    Perfect,
    /// One-hot on the lowest-index item other than the true one.
    Adversarial,
    /// Correct one-hot with probability ρ, else a uniformly random other item.
    Accuracy(f64),
    /// Accuracy oracle whose ρ follows [`sinusoidal_accuracy`].
    SinAccuracy {
        lo: f64,
        hi: f64,
        period: f64,
    },
    /// Mass ζ on the true item, the rest spread evenly.
    Density(f64),
    /// Flat Dirichlet draw independent of the request.
    Dirichlet,
    Null,
}

fn unit(name: &'static str, value: f64) -> Result<f64, OracleError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(OracleError::OutOfRange { name, value })
    }
}

impl OracleSpec {
    pub fn accuracy(rho: f64) -> Result<Self, OracleError> {
        Ok(Self::Accuracy(unit("rho", rho)?))
    }

    pub fn density(zeta: f64) -> Result<Self, OracleError> {
        Ok(Self::Density(unit("zeta", zeta)?))
    }

    pub fn sinusoidal(lo: f64, hi: f64, period: f64) -> Result<Self, OracleError> {
        unit("lo", lo)?;
        unit("hi", hi)?;
        if lo > hi || !(period > 0.0 && period.is_finite()) {
            return Err(OracleError::BadSinusoid);
        }
        Ok(Self::SinAccuracy { lo, hi, period })
    }

    /// Prediction for slot `slot` over `n_items` items whose true next
    /// request is `truth`.
    pub fn predict<R: Rng + ?Sized>(&self, slot: u64, truth: usize, n_items: usize, rng: &mut R) -> PredictionVector {
        match *self {
            OracleSpec::Perfect => PredictionVector::one_hot(truth),
            OracleSpec::Adversarial => {
                let wrong = if truth == 0 && n_items > 1 { 1 } else { 0 };
                PredictionVector::one_hot(wrong)
            }
            OracleSpec::Accuracy(rho) => accuracy_draw(rho, truth, n_items, rng),
            OracleSpec::SinAccuracy { lo, hi, period } => {
                accuracy_draw(sinusoidal_accuracy(slot as f64, period, lo, hi), truth, n_items, rng)
            }
            OracleSpec::Density(zeta) => {
                if n_items == 1 {
                    return PredictionVector::one_hot(truth);
                }
                let rest = (1.0 - zeta) / (n_items - 1) as f64;
                let entries = (0..n_items).map(|i| (i, if i == truth { zeta } else { rest }));
                PredictionVector::from_entries(entries).expect("density prediction is normalized")
            }
            OracleSpec::Dirichlet => {
                let draws: Vec<f64> = (0..n_items).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                let total: f64 = draws.iter().sum();
                PredictionVector::from_entries(draws.into_iter().map(|d| d / total).enumerate())
                    .expect("normalized exponential draws")
            }
            OracleSpec::Null => PredictionVector::null(),
        }
    }
}

fn accuracy_draw<R: Rng + ?Sized>(rho: f64, truth: usize, n_items: usize, rng: &mut R) -> PredictionVector {
    if n_items == 1 || rng.random_bool(rho.clamp(0.0, 1.0)) {
        return PredictionVector::one_hot(truth);
    }
    let other = rng.random_range(0..n_items - 1);
    PredictionVector::one_hot(if other >= truth { other + 1 } else { other })
}

/// `lo + (hi − lo)(1 + sin(2πt/period))/2`.
pub fn sinusoidal_accuracy(t: f64, period: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (1.0 + (std::f64::consts::TAU * t / period).sin()) / 2.0
}

impl FromStr for OracleSpec {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| OracleError::BadNumber(v.to_string()))
        };
        match s {
            "perfect" => return Ok(Self::Perfect),
            "adversarial" => return Ok(Self::Adversarial),
            "null" => return Ok(Self::Null),
            "dirichlet" => return Ok(Self::Dirichlet),
            _ => {}
        }
        if let Some(v) = s.strip_prefix("rho-sin:") {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 3 {
                return Err(OracleError::Unknown(s.to_string()));
            }
            return Self::sinusoidal(num(parts[0])?, num(parts[1])?, num(parts[2])?);
        }
        if let Some(v) = s.strip_prefix("rho:") {
            return Self::accuracy(num(v)?);
        }
        if let Some(v) = s.strip_prefix("zeta:") {
            return Self::density(num(v)?);
        }
        Err(OracleError::Unknown(s.to_string()))
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Perfect => write!(f, "perfect"),
            OracleSpec::Adversarial => write!(f, "adversarial"),
            OracleSpec::Accuracy(r) => write!(f, "rho:{r}"),
            OracleSpec::SinAccuracy { lo, hi, period } => write!(f, "rho-sin:{lo},{hi},{period}"),
            OracleSpec::Density(z) => write!(f, "zeta:{z}"),
            OracleSpec::Dirichlet => write!(f, "dirichlet"),
            OracleSpec::Null => write!(f, "null"),
        }
    }
}
