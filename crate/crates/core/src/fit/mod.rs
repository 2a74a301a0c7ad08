//! The chunked IWLS engine for ML, mBR and mJPL estimation.
//!
//! [`fit`] alternates a β update (one-pass or two-pass) with a dispersion
//! update until the sup-norm changes of both fall below `epsilon`. All data
//! access goes through a [`ChunkSource`]; the only state that survives a
//! pass is a [`TriangularAccumulator`] and a handful of scalar sums.

mod config;
mod dispersion;
mod iteration;

use std::time::Instant;

use serde::Serialize;

use crate::chunk::{count_rows, Chunk, ChunkSource};
use crate::error::{Error, Result};
use crate::family::FamilyLink;
use crate::incremental_qr::TriangularAccumulator;

pub use config::{
    DispersionRule, Estimator, FitConfig, Variant, WarmStart, DEFAULT_EPSILON, DEFAULT_MAX_ITER,
    DIVERGENCE_BOUND,
};
pub use dispersion::{
    phi_from_moment, phi_scoring_step, update_phi_moment, update_phi_scoring, DispersionSums,
};
pub use iteration::{
    adjusted_iteration_one_pass, adjusted_iteration_two_pass, ml_iteration, IterationState, Step,
};

use iteration::linear_predictor;

/// Diagnostics for one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    /// ‖β⁽ʲ⁺¹⁾ − β⁽ʲ⁾‖∞
    pub max_abs_change: f64,
    pub phi: f64,
    pub seconds: f64,
    /// Σ hᵢ at the iteration's starting β (two-pass only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leverage_trace: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub phi: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Why the fit stopped without converging.
    pub reason: Option<String>,
    /// Sup-norm of the adjusted score for β at the returned estimates.
    pub adjusted_score_norm: f64,
    pub n: usize,
    pub estimator: Estimator,
    pub variant: Variant,
    pub dispersion: DispersionRule,
    pub model: String,
    /// `R̄` of `W^{1/2}X` at the returned estimates.
    #[serde(skip)]
    pub final_rbar: TriangularAccumulator,
    pub per_iteration: Vec<IterationRecord>,
}

/// `√diag(φ (R̄ᵀR̄)⁻¹)`.
pub fn standard_errors(acc: &TriangularAccumulator, phi: f64) -> Result<Vec<f64>> {
    Ok(acc
        .covariance_diagonal(phi)?
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_divergence(beta: &[f64]) -> Result<()> {
    let (index, value) =
        beta.iter()
            .map(|b| b.abs())
            .enumerate()
            .fold(
                (0, 0.0),
                |(bi, bv), (i, v)| if !(v <= bv) { (i, v) } else { (bi, bv) },
            );
    if !(value <= DIVERGENCE_BOUND) {
        return Err(Error::Divergence { index, value });
    }
    Ok(())
}

/// Wraps a source, replacing binomial responses by `(1 − 2δ)y + δ`.
struct ShrunkResponses<'a, S: ?Sized> {
    inner: &'a mut S,
    delta: f64,
}

impl<S: ChunkSource + ?Sized> ChunkSource for ShrunkResponses<'_, S> {
    fn p(&self) -> usize {
        self.inner.p()
    }

    fn next_chunk(&mut self) -> Result<Option<Chunk>> {
        let delta = self.delta;
        Ok(self.inner.next_chunk()?.map(|mut chunk| {
            for y in chunk.y_mut() {
                *y = (1.0 - 2.0 * delta) * *y + delta;
            }
            chunk
        }))
    }

    fn reset(&mut self) -> Result<()> {
        self.inner.reset()
    }

    fn n_rows(&self) -> Option<usize> {
        self.inner.n_rows()
    }

    fn is_rewindable(&self) -> bool {
        self.inner.is_rewindable()
    }

    fn column_names(&self) -> Vec<String> {
        self.inner.column_names()
    }
}

/// One β update for the configured estimator and variant.
fn beta_step<S: ChunkSource + ?Sized>(
    state: &IterationState,
    source: &mut S,
    fl: &FamilyLink,
    estimator: Estimator,
    variant: Variant,
) -> Result<Step> {
    let (b1, b2) = estimator.switches();
    match (estimator, variant) {
        (Estimator::Ml, _) => ml_iteration(state, source, fl),
        (_, Variant::TwoPass) => adjusted_iteration_two_pass(state, source, fl, b1, b2),
        (_, Variant::OnePass) => adjusted_iteration_one_pass(state, source, fl, b1, b2),
    }
}

/// Fits the model described by `fl` to the data in `source`.
///
/// Errors from the data source or the linear algebra abort the fit; a fit that
/// runs out of iterations is returned with `converged = false`.
pub fn fit<S: ChunkSource + ?Sized>(
    config: &FitConfig,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<FitResult> {
    let p = source.p();
    config.validate(fl, p)?;
    let rule = config.dispersion_rule(fl);
    if config.variant == Variant::TwoPass
        && config.estimator != Estimator::Ml
        && !source.is_rewindable()
    {
        return Err(Error::NotRewindable);
    }
    let n = count_rows(source)?;
    if rule != DispersionRule::Fixed && n <= p {
        return Err(Error::DegreesOfFreedom { n, p });
    }

    let start = config.beta_start.clone().unwrap_or_else(|| vec![0.0; p]);
    let mut state = IterationState::new(start, n, rule);

    if let Some(warm) = &config.warm_start {
        let mut shrunk = ShrunkResponses {
            inner: &mut *source,
            delta: warm.delta,
        };
        let mut pre = IterationState::new(state.beta.clone(), n, DispersionRule::Fixed);
        for _ in 0..warm.iterations {
            let step = ml_iteration(&pre, &mut shrunk, fl)?;
            check_divergence(&step.beta)?;
            pre.advance(step, 1.0);
        }
        state.beta = pre.beta;
    }

    let mut per_iteration = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter {
        let clock = Instant::now();
        let step = beta_step(&state, source, fl, config.estimator, config.variant)?;
        check_divergence(&step.beta)?;
        let phi_next = match rule {
            DispersionRule::Fixed => state.phi,
            DispersionRule::Moment => phi_from_moment(&step.dispersion, p)?,
            DispersionRule::MlScoring | DispersionRule::MbrScoring => {
                let c1 = rule.c1().unwrap_or(0.0);
                phi_scoring_step(state.phi, &step.dispersion, c1, p)
            }
        };
        let dbeta = sup_norm_diff(&step.beta, &state.beta);
        let dphi = (phi_next - state.phi).abs();
        per_iteration.push(IterationRecord {
            max_abs_change: dbeta,
            phi: phi_next,
            seconds: clock.elapsed().as_secs_f64(),
            leverage_trace: step.leverage_trace,
        });
        state.advance(step, phi_next);
        if dbeta < config.epsilon && (rule == DispersionRule::Fixed || dphi < config.epsilon) {
            converged = true;
            break;
        }
    }

    let (b1, b2) = config.estimator.switches();
    let (final_rbar, adjusted_score_norm) =
        adjusted_score(&state.beta, state.phi, b1, b2, source, fl)?;
    let se = standard_errors(&final_rbar, state.phi)?;
    let iterations = per_iteration.len();
    Ok(FitResult {
        names: source.column_names(),
        beta: state.beta,
        se,
        phi: state.phi,
        iterations,
        converged,
        reason: (!converged).then(|| {
            format!(
                "no convergence to epsilon = {} within {} iterations",
                config.epsilon, config.max_iter
            )
        }),
        adjusted_score_norm,
        n,
        estimator: config.estimator,
        variant: config.variant,
        dispersion: rule,
        model: fl.to_string(),
        final_rbar,
        per_iteration,
    })
}

/// Factor of `W^{1/2}X` at `beta` and the sup-norm of the adjusted score
/// `φ⁻¹ Xᵀ W (z − η + φ H κ)`, in two passes.
pub fn adjusted_score<S: ChunkSource + ?Sized>(
    beta: &[f64],
    phi: f64,
    b1: f64,
    b2: f64,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<(TriangularAccumulator, f64)> {
    let state = IterationState {
        phi,
        ..IterationState::new(beta.to_vec(), 1, DispersionRule::Fixed)
    };
    let acc = ml_iteration(&state, source, fl)?.accumulator;
    let p = beta.len();
    let mut score = vec![0.0; p];
    let mut work = vec![0.0; p];
    let adjusted = b1 != 0.0 || b2 != 0.0;
    source.reset()?;
    while let Some(chunk) = source.next_chunk()? {
        for i in 0..chunk.rows() {
            let m = chunk.m()[i];
            if m == 0.0 {
                continue;
            }
            let x = chunk.row(i);
            let eta = linear_predictor(x, beta);
            let pq = fl.point_quantities(eta, chunk.y()[i], m);
            let mut r = pq.z - eta;
            if adjusted {
                let h = acc.leverage_with(x, pq.w, &mut work);
                r += phi * h * pq.kappa(b1, b2);
            }
            let scale = pq.w * r / phi;
            for (sj, &xj) in score.iter_mut().zip(x) {
                *sj += xj * scale;
            }
        }
    }
    acc.check_rank()?;
    Ok((acc, score.iter().fold(0.0, |a, s| a.max(s.abs()))))
}
