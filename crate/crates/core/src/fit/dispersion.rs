//! Chunkwise dispersion updates.

use crate::chunk::ChunkSource;
use crate::error::{Error, Result};
use crate::family::{ADerivatives, FamilyLink, PointQuantities};

use super::config::DispersionRule;
use super::iteration::linear_predictor;

/// Sums over observations needed by the dispersion updates, accumulated at
/// one value of β (and of φ, for the scoring sums).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DispersionSums {
    pub n: usize,
    /// Σ w (z − η)²
    pub pearson: f64,
    /// Σ (q − ρ)
    pub deviance_gap: f64,
    /// Σ m² a″
    pub m2_a2: f64,
    /// Σ m³ a‴
    pub m3_a3: f64,
}

/// Adds one observation's contribution. `a_cache` memoizes `a_derivatives`
/// for repeated prior weights.
pub(crate) struct DispersionAccumulator<'a> {
    fl: &'a FamilyLink,
    rule: DispersionRule,
    phi: f64,
    a_cache: Option<(f64, ADerivatives)>,
    pub sums: DispersionSums,
}

impl<'a> DispersionAccumulator<'a> {
    pub fn new(fl: &'a FamilyLink, rule: DispersionRule, phi: f64) -> Self {
        Self {
            fl,
            rule,
            phi,
            a_cache: None,
            sums: DispersionSums::default(),
        }
    }

    pub fn add(&mut self, eta: f64, y: f64, m: f64, pq: &PointQuantities) -> Result<()> {
        self.sums.n += 1;
        match self.rule {
            DispersionRule::Fixed => {}
            DispersionRule::Moment => {
                let r = pq.z - eta;
                self.sums.pearson += pq.w * r * r;
            }
            DispersionRule::MlScoring | DispersionRule::MbrScoring => {
                let dp = self.fl.deviance_point(eta, y, m, self.phi)?;
                let rho = dp.rho.ok_or_else(|| {
                    Error::NotApplicable("dispersion scoring needs a free dispersion".into())
                })?;
                let a = match self.a_cache {
                    Some((mm, a)) if mm == m => a,
                    _ => {
                        let a = self.fl.a_derivatives(m, self.phi)?;
                        self.a_cache = Some((m, a));
                        a
                    }
                };
                self.sums.deviance_gap += dp.q - rho;
                self.sums.m2_a2 += m * m * a.second;
                self.sums.m3_a3 += m * m * m * a.third;
            }
        }
        Ok(())
    }
}

/// φ = Σ w(z − η)² / (n − p).
pub fn phi_from_moment(sums: &DispersionSums, p: usize) -> Result<f64> {
    if sums.n <= p {
        return Err(Error::DegreesOfFreedom { n: sums.n, p });
    }
    Ok(sums.pearson / (sums.n - p) as f64)
}

/// One quasi-Fisher scoring step for φ; `c1 = 0` is plain Fisher scoring for
/// the likelihood equation.
pub fn phi_scoring_step(phi: f64, sums: &DispersionSums, c1: f64, p: usize) -> f64 {
    let info = sums.m2_a2;
    let mut factor = 1.0 + phi * sums.deviance_gap / info;
    if c1 != 0.0 {
        factor += c1 * phi * (sums.m3_a3 / (info * info) + phi * (p as f64 - 2.0) / info);
    }
    let next = phi * factor;
    if next > 0.0 && next.is_finite() {
        next
    } else {
        // an overshoot past zero: halve instead
        0.5 * phi
    }
}

fn accumulate<S: ChunkSource + ?Sized>(
    beta: &[f64],
    phi: f64,
    rule: DispersionRule,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<DispersionSums> {
    source.reset()?;
    let mut acc = DispersionAccumulator::new(fl, rule, phi);
    while let Some(chunk) = source.next_chunk()? {
        for i in 0..chunk.rows() {
            let m = chunk.m()[i];
            if m == 0.0 {
                continue;
            }
            let eta = linear_predictor(chunk.row(i), beta);
            let y = chunk.y()[i];
            acc.add(eta, y, m, &fl.point_quantities(eta, y, m))?;
        }
    }
    Ok(acc.sums)
}

/// The moment estimate of φ at `beta`, in one pass.
pub fn update_phi_moment<S: ChunkSource + ?Sized>(
    beta: &[f64],
    p: usize,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<f64> {
    let sums = accumulate(beta, 1.0, DispersionRule::Moment, source, fl)?;
    phi_from_moment(&sums, p)
}

/// One scoring step for φ with deviance residuals at `beta_hat`, in one pass.
pub fn update_phi_scoring<S: ChunkSource + ?Sized>(
    beta_hat: &[f64],
    phi: f64,
    c1: f64,
    p: usize,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<f64> {
    if fl.dispersion_fixed() {
        return Err(Error::NotApplicable(format!(
            "the {} family has dispersion fixed at 1",
            fl.family()
        )));
    }
    let sums = accumulate(beta_hat, phi, DispersionRule::MlScoring, source, fl)?;
    Ok(phi_scoring_step(phi, &sums, c1, p))
}
