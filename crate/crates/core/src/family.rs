//! Pointwise mathematics of exponential dispersion families and link functions.
//!
//! Everything here depends on a single observation: the inverse link and its
//! first two derivatives, the variance function, working weights and variates,
//! the bias-reduction quantities ξ and λ, deviance residuals and the
//! derivatives of the dispersion normalizing function `a(u)`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::special::{digamma, tetragamma, trigamma};

/// Means are kept this far from the boundary of the mean space.
pub const EPS_MU: f64 = 1e-12;

/// Lower bound on |dμ/dη| so working variates stay finite.
const EPS_D: f64 = f64::EPSILON;

/// Linear predictors above this are capped before exponentiation; low enough
/// that μ³ stays finite.
const MAX_EXP_ETA: f64 = 230.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Binomial,
    Poisson,
    Gaussian,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Logit,
    Probit,
    Cloglog,
    Identity,
    Log,
    Inverse,
}

impl Family {
    pub fn admits(self, link: Link) -> bool {
        use Family::*;
        use Link::*;
        matches!(
            (self, link),
            (Binomial, Logit | Probit | Cloglog)
                | (Poisson, Log)
                | (Gaussian, Identity)
                | (Gamma, Log | Inverse)
        )
    }

    pub fn canonical_link(self) -> Link {
        match self {
            Family::Binomial => Link::Logit,
            Family::Poisson => Link::Log,
            Family::Gaussian => Link::Identity,
            Family::Gamma => Link::Inverse,
        }
    }

    /// True when φ ≡ 1.
    pub fn dispersion_fixed(self) -> bool {
        matches!(self, Family::Binomial | Family::Poisson)
    }

    /// V(μ).
    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
            Family::Gaussian => 1.0,
            Family::Gamma => mu * mu,
        }
    }

    /// dV/dμ.
    pub fn variance_derivative(self, mu: f64) -> f64 {
        match self {
            Family::Binomial => 1.0 - 2.0 * mu,
            Family::Poisson => 1.0,
            Family::Gaussian => 0.0,
            Family::Gamma => 2.0 * mu,
        }
    }

    fn clamp_mean(self, mu: f64) -> f64 {
        match self {
            Family::Binomial => mu.clamp(EPS_MU, 1.0 - EPS_MU),
            Family::Poisson | Family::Gamma => mu.max(EPS_MU),
            Family::Gaussian => mu,
        }
    }

    /// Unit deviance `sup_θ{yθ − b(θ)} − {yθ − b(θ)}`, times 2m.
    fn deviance_residual(self, y: f64, mu: f64, m: f64) -> f64 {
        let q = match self {
            Family::Gaussian => (y - mu) * (y - mu),
            Family::Binomial => 2.0 * (xlogy_ratio(y, mu) + xlogy_ratio(1.0 - y, 1.0 - mu)),
            Family::Poisson => 2.0 * (xlogy_ratio(y, mu) - (y - mu)),
            Family::Gamma => 2.0 * ((y - mu) / mu - (y / mu).ln()),
        };
        m * q.max(0.0)
    }
}

/// `x·log(x/y)` with `0·log 0 := 0`.
fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

impl Link {
    /// Returns `(μ, dμ/dη, d²μ/dη²)` before clamping.
    fn mean_derivatives(self, eta: f64) -> (f64, f64, f64) {
        match self {
            Link::Identity => (eta, 1.0, 0.0),
            Link::Logit => {
                let e = (-eta.abs()).exp();
                let mu = if eta >= 0.0 {
                    1.0 / (1.0 + e)
                } else {
                    e / (1.0 + e)
                };
                let d = e / ((1.0 + e) * (1.0 + e));
                (mu, d, d * (1.0 - 2.0 * mu))
            }
            Link::Probit => {
                let mu = 0.5 * erfc(-eta * FRAC_1_SQRT_2);
                let d = (-0.5 * eta * eta).exp() / (2.0 * PI).sqrt();
                (mu, d, -eta * d)
            }
            Link::Cloglog => {
                // μ = 1 − exp(−e^η); derivatives kept in log space for very negative η
                let ee = eta.min(MAX_EXP_ETA).exp();
                let mu = -(-ee).exp_m1();
                let d = (eta - ee).exp();
                (mu, d, d * (1.0 - ee))
            }
            Link::Log => {
                let mu = eta.min(MAX_EXP_ETA).exp();
                (mu, mu, mu)
            }
            Link::Inverse => {
                let eta = eta.max(EPS_MU);
                let mu = 1.0 / eta;
                (mu, -mu * mu, 2.0 * mu * mu * mu)
            }
        }
    }
}

macro_rules! name_table {
    ($ty:ty, $($variant:path => $name:literal),+ $(,)?) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

name_table!(Family,
    Family::Binomial => "binomial",
    Family::Poisson => "poisson",
    Family::Gaussian => "gaussian",
    Family::Gamma => "gamma",
);

name_table!(Link,
    Link::Logit => "logit",
    Link::Probit => "probit",
    Link::Cloglog => "cloglog",
    Link::Identity => "identity",
    Link::Log => "log",
    Link::Inverse => "inverse",
);

/// An admissible family/link pair, together with the power `t` of the
/// Jeffreys' prior used by penalized fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyLink {
    family: Family,
    link: Link,
    jeffreys_power: f64,
}

/// Observation-level quantities entering the (adjusted) IWLS update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointQuantities {
    pub mu: f64,
    /// dμ/dη
    pub d: f64,
    /// d²μ/dη²
    pub dprime: f64,
    pub v: f64,
    /// dV/dμ
    pub vprime: f64,
    /// Working weight m·d²/v.
    pub w: f64,
    /// Working variate η + (y − μ)/d.
    pub z: f64,
    pub xi: f64,
    pub lambda: f64,
}

impl PointQuantities {
    /// κ = b1·ξ + b2·λ.
    pub fn kappa(&self, b1: f64, b2: f64) -> f64 {
        let mut k = 0.0;
        if b1 != 0.0 {
            k += b1 * self.xi;
        }
        if b2 != 0.0 {
            k += b2 * self.lambda;
        }
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviancePoint {
    /// Deviance residual q_i.
    pub q: f64,
    /// Expectation of q_i; `None` for families with fixed dispersion.
    pub rho: Option<f64>,
}

/// Derivatives of `a(u)` at `u = −m/φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ADerivatives {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

impl FamilyLink {
    pub fn new(family: Family, link: Link) -> Result<Self> {
        if !family.admits(link) {
            return Err(Error::Config(format!(
                "link {link} is not available for the {family} family"
            )));
        }
        Ok(Self {
            family,
            link,
            jeffreys_power: 1.0,
        })
    }

    pub fn with_jeffreys_power(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Config(format!(
                "Jeffreys power must be positive, got {t}"
            )));
        }
        self.jeffreys_power = t;
        Ok(self)
    }

    pub fn binomial(link: Link) -> Result<Self> {
        Self::new(Family::Binomial, link)
    }

    pub fn logistic() -> Self {
        Self::new(Family::Binomial, Link::Logit).expect("admissible")
    }

    pub fn poisson() -> Self {
        Self::new(Family::Poisson, Link::Log).expect("admissible")
    }

    pub fn gaussian() -> Self {
        Self::new(Family::Gaussian, Link::Identity).expect("admissible")
    }

    pub fn gamma(link: Link) -> Result<Self> {
        Self::new(Family::Gamma, link)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn jeffreys_power(&self) -> f64 {
        self.jeffreys_power
    }

    pub fn dispersion_fixed(&self) -> bool {
        self.family.dispersion_fixed()
    }

    /// Canonical links make V′ = d′/d, so λ vanishes identically.
    pub fn is_canonical(&self) -> bool {
        self.link == self.family.canonical_link()
    }

    /// μ = g⁻¹(η), clamped into the interior of the mean space.
    pub fn inverse_link(&self, eta: f64) -> f64 {
        self.family.clamp_mean(self.link.mean_derivatives(eta).0)
    }

    /// `(μ, dμ/dη, d²μ/dη²)` with μ clamped and |dμ/dη| bounded away from zero.
    pub fn mean_derivatives(&self, eta: f64) -> (f64, f64, f64) {
        let (mu, d, dprime) = self.link.mean_derivatives(eta);
        let d = if d.abs() < EPS_D {
            EPS_D.copysign(d)
        } else {
            d
        };
        (self.family.clamp_mean(mu), d, dprime)
    }

    pub fn point_quantities(&self, eta: f64, y: f64, m: f64) -> PointQuantities {
        debug_assert!(m > 0.0);
        let (mu, d, dprime) = self.mean_derivatives(eta);
        let v = self.family.variance(mu);
        let vprime = self.family.variance_derivative(mu);
        // d/v first: d² alone overflows for large log-link means
        let w = m * (d / v) * d;
        let z = eta + (y - mu) / d;
        let xi = dprime / (2.0 * d * w);
        let lambda = if self.is_canonical() {
            0.0
        } else {
            0.5 * self.jeffreys_power * (dprime / (d * w) - vprime / (m * d))
        };
        PointQuantities {
            mu,
            d,
            dprime,
            v,
            vprime,
            w,
            z,
            xi,
            lambda,
        }
    }

    /// Deviance residual and its expectation at dispersion `phi`.
    pub fn deviance_point(&self, eta: f64, y: f64, m: f64, phi: f64) -> Result<DeviancePoint> {
        if !(phi > 0.0) {
            return Err(Error::Config(format!(
                "dispersion must be positive, got {phi}"
            )));
        }
        let mu = self.inverse_link(eta);
        let q = self.family.deviance_residual(y, mu, m);
        let rho = match self.family {
            Family::Binomial | Family::Poisson => {
                if phi != 1.0 {
                    return Err(Error::NotApplicable(format!(
                        "the {} family has dispersion fixed at 1",
                        self.family
                    )));
                }
                None
            }
            Family::Gaussian => Some(m * self.a_derivatives(m, phi)?.first),
            // q is the unit deviance, whose constant differs from the one
            // absorbed by a(u) by 2m.
            Family::Gamma => Some(m * self.a_derivatives(m, phi)?.first - 2.0 * m),
        };
        Ok(DeviancePoint { q, rho })
    }

    /// a′, a″, a‴ at `u = −m/φ`.
    ///
    /// Gaussian: `a(u) = log 2π − log(−u)`.
    /// Gamma: `a(u) = 2{log Γ(−u) + u log(−u)}`.
    pub fn a_derivatives(&self, m: f64, phi: f64) -> Result<ADerivatives> {
        let u = -m / phi;
        match self.family {
            Family::Gaussian => Ok(ADerivatives {
                first: -1.0 / u,
                second: 1.0 / (u * u),
                third: -2.0 / (u * u * u),
            }),
            Family::Gamma => {
                let s = -u;
                Ok(ADerivatives {
                    first: 2.0 * (s.ln() + 1.0 - digamma(s)),
                    second: 2.0 * (trigamma(s) - 1.0 / s),
                    third: -2.0 * tetragamma(s) - 2.0 / (s * s),
                })
            }
            Family::Binomial | Family::Poisson => Err(Error::NotApplicable(format!(
                "the {} family has dispersion fixed at 1",
                self.family
            ))),
        }
    }
}

impl fmt::Display for FamilyLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.link)?;
        if self.jeffreys_power != 1.0 {
            write!(f, " t={}", self.jeffreys_power)?;
        }
        Ok(())
    }
}
