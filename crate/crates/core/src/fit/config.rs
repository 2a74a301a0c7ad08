use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::FamilyLink;

/// Default convergence tolerance on the sup-norm of parameter changes.
pub const DEFAULT_EPSILON: f64 = 1e-3;
/// Default cap on IWLS iterations.
pub const DEFAULT_MAX_ITER: usize = 250;
/// Any coefficient beyond this aborts the fit.
pub const DIVERGENCE_BOUND: f64 = 1e8;

/// Which estimating equations are solved for β.
///
/// The power of the Jeffreys' prior for [`Estimator::Mjpl`] is carried by the
/// [`FamilyLink`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Maximum likelihood.
    Ml,
    /// Mean bias reduction.
    Mbr,
    /// Maximum Jeffreys'-prior penalized likelihood.
    Mjpl,
}

impl Estimator {
    /// The switches `(b1, b2)` multiplying ξ and λ in the adjusted working variates.
    pub fn switches(self) -> (f64, f64) {
        match self {
            Estimator::Ml => (0.0, 0.0),
            Estimator::Mbr => (1.0, 0.0),
            Estimator::Mjpl => (1.0, 1.0),
        }
    }
}

/// How the dispersion parameter is updated between β steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionRule {
    /// φ stays at 1.
    Fixed,
    /// Pearson-type moment estimator with `n − p` degrees of freedom.
    Moment,
    /// Fisher scoring for the likelihood equation of φ (`c1 = 0`).
    MlScoring,
    /// Quasi-Fisher scoring for the bias-reducing equation of φ (`c1 = 1`).
    MbrScoring,
}

impl DispersionRule {
    pub fn c1(self) -> Option<f64> {
        match self {
            DispersionRule::MlScoring => Some(0.0),
            DispersionRule::MbrScoring => Some(1.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One data pass per iteration, with leverages lagged by one iteration.
    OnePass,
    /// Two data passes per iteration, reproducing the adjusted update exactly.
    TwoPass,
}

/// A few ML iterations on responses shrunk to `(1 − 2δ)y + δ` before the main fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmStart {
    pub delta: f64,
    pub iterations: usize,
}

impl Default for WarmStart {
    fn default() -> Self {
        Self {
            delta: 0.05,
            iterations: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub estimator: Estimator,
    /// `None` picks `Fixed` for binomial/Poisson and `Moment` otherwise.
    pub dispersion: Option<DispersionRule>,
    pub variant: Variant,
    pub epsilon: f64,
    pub max_iter: usize,
    /// `None` starts from zeros.
    pub beta_start: Option<Vec<f64>>,
    pub warm_start: Option<WarmStart>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            estimator: Estimator::Ml,
            dispersion: None,
            variant: Variant::TwoPass,
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            beta_start: None,
            warm_start: None,
        }
    }
}

impl FitConfig {
    pub fn new(estimator: Estimator) -> Self {
        Self {
            estimator,
            ..Self::default()
        }
    }

    pub fn variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn dispersion(mut self, rule: DispersionRule) -> Self {
        self.dispersion = Some(rule);
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn beta_start(mut self, beta: Vec<f64>) -> Self {
        self.beta_start = Some(beta);
        self
    }

    pub fn warm_start(mut self, warm: WarmStart) -> Self {
        self.warm_start = Some(warm);
        self
    }

    pub fn dispersion_rule(&self, fl: &FamilyLink) -> DispersionRule {
        self.dispersion.unwrap_or(if fl.dispersion_fixed() {
            DispersionRule::Fixed
        } else {
            DispersionRule::Moment
        })
    }

    /// Checks the configuration against the model and data dimensions.
    pub fn validate(&self, fl: &FamilyLink, p: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if fl.dispersion_fixed() && self.dispersion_rule(fl) != DispersionRule::Fixed {
            return Err(Error::Config(format!(
                "the {} family has dispersion fixed at 1; use the fixed dispersion rule",
                fl.family()
            )));
        }
        if let Some(start) = &self.beta_start {
            if start.len() != p {
                return Err(Error::Config(format!(
                    "starting value has {} entries, model has {p} coefficients",
                    start.len()
                )));
            }
        }
        if let Some(w) = &self.warm_start {
            if fl.family() != crate::family::Family::Binomial {
                return Err(Error::Config(
                    "warm start applies to binomial responses only".into(),
                ));
            }
            if !(w.delta > 0.0 && w.delta < 0.5) {
                return Err(Error::Config(format!(
                    "warm start delta must lie in (0, 0.5), got {}",
                    w.delta
                )));
            }
        }
        Ok(())
    }
}

macro_rules! cli_names {
    ($ty:ty, $($variant:path => [$($name:literal),+]),+ $(,)?) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($($name)|+ => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"),
                        other
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let names: &[&str] = match self { $($variant => &[$($name),+]),+ };
                f.write_str(names[0])
            }
        }
    };
}

cli_names!(Estimator,
    Estimator::Ml => ["ml"],
    Estimator::Mbr => ["mbr"],
    Estimator::Mjpl => ["mjpl"],
);

cli_names!(DispersionRule,
    DispersionRule::Fixed => ["fixed"],
    DispersionRule::Moment => ["moment"],
    DispersionRule::MlScoring => ["ml", "ml_scoring"],
    DispersionRule::MbrScoring => ["mbr", "mbr_scoring"],
);

cli_names!(Variant,
    Variant::OnePass => ["one-pass", "one_pass", "onepass"],
    Variant::TwoPass => ["two-pass", "two_pass", "twopass"],
);
