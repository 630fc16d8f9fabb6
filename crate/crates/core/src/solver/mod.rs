//! Regret minimizers over the linear-algebra operators and the two-player
//! iteration driver.

mod driver;
mod minimizer;

use std::fmt;
use std::str::FromStr;

pub use driver::{run, run_bundle, Budget, Checkpoints, RunOutput, Solver};
pub use minimizer::{RegretState, SequenceCfr};

use crate::operators::BundleError;
use crate::sparse::SparseError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    Cfr,
    CfrPlus,
    /// Discounted CFR. Infinite exponents select the limiting factors:
    /// `alpha = +inf` keeps positive regrets, `beta = -inf` zeroes
    /// negative ones.
    Dcfr { alpha: f64, beta: f64 },
    Pcfr,
    PcfrPlus,
}

impl Variant {
    pub const DCFR_DEFAULT: Variant = Variant::Dcfr { alpha: 1.5, beta: 0.0 };

    pub fn is_predictive(self) -> bool {
        matches!(self, Variant::Pcfr | Variant::PcfrPlus)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Cfr => "cfr",
            Variant::CfrPlus => "cfr+",
            Variant::Dcfr { .. } => "dcfr",
            Variant::Pcfr => "pcfr",
            Variant::PcfrPlus => "pcfr+",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Dcfr { alpha, beta } => write!(f, "dcfr({alpha},{beta})"),
            v => f.write_str(v.name()),
        }
    }
}

impl FromStr for Variant {
    type Err = String;

    /// Parses `cfr`, `cfr+`, `dcfr`, `pcfr` or `pcfr+`; DCFR gets the
    /// default exponents.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cfr" => Ok(Variant::Cfr),
            "cfr+" | "cfrplus" => Ok(Variant::CfrPlus),
            "dcfr" => Ok(Variant::DCFR_DEFAULT),
            "pcfr" => Ok(Variant::Pcfr),
            "pcfr+" | "pcfrplus" => Ok(Variant::PcfrPlus),
            other => Err(format!("unknown variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    Simultaneous,
    Alternating,
}

impl FromStr for UpdateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" | "simultaneous" => Ok(UpdateMode::Simultaneous),
            "alt" | "alternating" => Ok(UpdateMode::Alternating),
            other => Err(format!("unknown update mode {other:?}")),
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateMode::Simultaneous => "sim",
            UpdateMode::Alternating => "alt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Iteration `t` enters the average with weight `t^gamma`.
    pub gamma: f64,
    pub mode: UpdateMode,
}

impl SolverConfig {
    /// The averaging weight and update mode each variant is usually run with.
    pub fn for_variant(variant: Variant) -> Self {
        let (gamma, mode) = match variant {
            Variant::Cfr => (0.0, UpdateMode::Simultaneous),
            Variant::CfrPlus => (1.0, UpdateMode::Alternating),
            Variant::Dcfr { .. } => (2.0, UpdateMode::Alternating),
            Variant::Pcfr => (0.0, UpdateMode::Simultaneous),
            Variant::PcfrPlus => (2.0, UpdateMode::Alternating),
        };
        Self { variant, gamma, mode }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(SolverError::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if let Variant::Dcfr { alpha, beta } = self.variant {
            if alpha.is_nan() || beta.is_nan() || alpha == f64::NEG_INFINITY || beta == f64::INFINITY {
                return Err(SolverError::Config(format!("invalid DCFR exponents ({alpha}, {beta})")));
            }
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_variant(Variant::CfrPlus)
    }
}

/// `t^e / (t^e + 1)`, evaluated as `1 / (1 + t^-e)` so large exponents
/// saturate at 1 instead of overflowing.
pub fn dcfr_factor(t: u64, exponent: f64) -> f64 {
    if exponent == f64::INFINITY {
        return 1.0;
    }
    if exponent == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 / (1.0 + (t as f64).powf(-exponent))
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("{0}")]
    Config(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_formula() {
        assert_eq!(dcfr_factor(1, 1.5), 0.5);
        assert_eq!(dcfr_factor(1, 0.0), 0.5);
        assert_eq!(dcfr_factor(7, 0.0), 0.5);
        assert!((dcfr_factor(4, 1.5) - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(dcfr_factor(3, 1e6), 1.0);
        assert_eq!(dcfr_factor(1, f64::INFINITY), 1.0);
        assert_eq!(dcfr_factor(1, f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn parsing() {
        assert_eq!("cfr+".parse::<Variant>(), Ok(Variant::CfrPlus));
        assert_eq!("DCFR".parse::<Variant>(), Ok(Variant::DCFR_DEFAULT));
        assert!("cfr++".parse::<Variant>().is_err());
        assert_eq!("alt".parse::<UpdateMode>(), Ok(UpdateMode::Alternating));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::for_variant(Variant::Dcfr { alpha: f64::INFINITY, beta: f64::NEG_INFINITY });
        assert!(c.validate().is_ok());
        c.variant = Variant::Dcfr { alpha: f64::NAN, beta: 0.0 };
        assert!(c.validate().is_err());
        c = SolverConfig { gamma: -1.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
    }
}
