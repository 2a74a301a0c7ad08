//! Single IWLS iterations over a chunk source.
//!
//! Each function evaluates working weights and variates at the current β
//! chunk by chunk and absorbs them into a fresh [`TriangularAccumulator`].
//! The adjusted variants add `φ·h·κ` to the working variates, where the
//! leverages `h` come either from a second pass over the data (two-pass) or
//! from the previous iteration's factor (one-pass).

use crate::chunk::{Chunk, ChunkSource};
use crate::error::{Error, Result};
use crate::family::{FamilyLink, PointQuantities};
use crate::incremental_qr::TriangularAccumulator;

use super::config::DispersionRule;
use super::dispersion::{DispersionAccumulator, DispersionSums};

/// What an iteration needs to know about the previous ones.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub beta: Vec<f64>,
    pub beta_previous: Option<Vec<f64>>,
    /// Factor from the previous iteration; supplies one-pass leverages.
    pub rbar_previous: Option<TriangularAccumulator>,
    pub phi: f64,
    /// Leverage used at the first one-pass iteration, `p/n`.
    pub h_default: f64,
    /// Which dispersion sums to collect during the first pass.
    pub dispersion: DispersionRule,
}

impl IterationState {
    pub fn new(beta: Vec<f64>, n: usize, dispersion: DispersionRule) -> Self {
        let p = beta.len();
        Self {
            beta,
            beta_previous: None,
            rbar_previous: None,
            phi: 1.0,
            h_default: p as f64 / n.max(1) as f64,
            dispersion,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    /// Moves to `step`'s β, keeping the current one as the lag.
    pub fn advance(&mut self, step: Step, phi: f64) {
        let beta = std::mem::replace(&mut self.beta, step.beta);
        self.beta_previous = Some(beta);
        self.rbar_previous = Some(step.accumulator);
        self.phi = phi;
    }
}

/// The outcome of one iteration.
#[derive(Debug, Clone)]
pub struct Step {
    pub beta: Vec<f64>,
    /// Factor of `XᵀWX` at the β the iteration started from.
    pub accumulator: TriangularAccumulator,
    /// Dispersion sums at the starting β and φ.
    pub dispersion: DispersionSums,
    /// Σ hᵢ over the data, when leverages were computed at the current β.
    pub leverage_trace: Option<f64>,
}

#[inline]
pub(crate) fn linear_predictor(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Per-row working quantities of one chunk; rows with zero prior weight get
/// `w = 0` and are skipped by the accumulator.
struct Working {
    eta: Vec<f64>,
    pq: Vec<Option<PointQuantities>>,
}

fn working(chunk: &Chunk, beta: &[f64], fl: &FamilyLink) -> Result<Working> {
    let rows = chunk.rows();
    let mut eta = Vec::with_capacity(rows);
    let mut pq = Vec::with_capacity(rows);
    for i in 0..rows {
        let m = chunk.m()[i];
        if !(m >= 0.0) {
            return Err(Error::Shape(format!(
                "prior weight {m} at row {} is negative",
                chunk.row_offset() + i + 1
            )));
        }
        let e = linear_predictor(chunk.row(i), beta);
        eta.push(e);
        pq.push((m > 0.0).then(|| fl.point_quantities(e, chunk.y()[i], m)));
    }
    Ok(Working { eta, pq })
}

fn check_width<S: ChunkSource + ?Sized>(source: &S, state: &IterationState) -> Result<()> {
    if source.p() != state.p() {
        return Err(Error::Shape(format!(
            "data have {} columns, coefficients have {}",
            source.p(),
            state.p()
        )));
    }
    Ok(())
}

/// One pass absorbing `(√w·x, √w·(z + shift))`; `shift` maps
/// `(chunk, row, point quantities)` to the adjustment added to `z`.
fn absorb_pass<S, F>(
    state: &IterationState,
    source: &mut S,
    fl: &FamilyLink,
    mut shift: F,
) -> Result<(TriangularAccumulator, DispersionSums)>
where
    S: ChunkSource + ?Sized,
    F: FnMut(&Chunk, usize, &PointQuantities) -> f64,
{
    check_width(source, state)?;
    source.reset()?;
    let p = state.p();
    let mut acc = TriangularAccumulator::new(p);
    let mut disp = DispersionAccumulator::new(fl, state.dispersion, state.phi);
    let mut rhs = Vec::new();
    let mut weights = Vec::new();
    while let Some(chunk) = source.next_chunk()? {
        let work = working(&chunk, &state.beta, fl)?;
        rhs.clear();
        weights.clear();
        for (i, pq) in work.pq.iter().enumerate() {
            match pq {
                Some(pq) => {
                    disp.add(work.eta[i], chunk.y()[i], chunk.m()[i], pq)?;
                    rhs.push(pq.z + shift(&chunk, i, pq));
                    weights.push(pq.w);
                }
                None => {
                    rhs.push(0.0);
                    weights.push(0.0);
                }
            }
        }
        acc.absorb_chunk(chunk.x(), &rhs, &weights)?;
    }
    Ok((acc, disp.sums))
}

/// One ML iteration: a weighted least-squares solve on the working variates.
pub fn ml_iteration<S: ChunkSource + ?Sized>(
    state: &IterationState,
    source: &mut S,
    fl: &FamilyLink,
) -> Result<Step> {
    let (accumulator, dispersion) = absorb_pass(state, source, fl, |_, _, _| 0.0)?;
    let beta = accumulator.solve_coefficients()?;
    Ok(Step {
        beta,
        accumulator,
        dispersion,
        leverage_trace: None,
    })
}

/// One adjusted iteration in two passes.
///
/// The first pass projects the working variates, giving `β̂` and `R̄`. The
/// second pass computes the leverages from `R̄` and accumulates
/// `s = Σ xᵢ wᵢ φ hᵢ κᵢ`, whose projection `v = (XᵀWX)⁻¹s` is added to `β̂`.
pub fn adjusted_iteration_two_pass<S: ChunkSource + ?Sized>(
    state: &IterationState,
    source: &mut S,
    fl: &FamilyLink,
    b1: f64,
    b2: f64,
) -> Result<Step> {
    if !source.is_rewindable() {
        return Err(Error::NotRewindable);
    }
    let first = ml_iteration(state, source, fl)?;
    let acc = &first.accumulator;
    let p = state.p();
    let mut s = vec![0.0; p];
    let mut work = vec![0.0; p];
    let mut trace = 0.0;
    source.reset()?;
    while let Some(chunk) = source.next_chunk()? {
        let wk = working(&chunk, &state.beta, fl)?;
        for (i, pq) in wk.pq.iter().enumerate() {
            let Some(pq) = pq else { continue };
            let x = chunk.row(i);
            let h = acc.leverage_with(x, pq.w, &mut work);
            trace += h;
            let scale = pq.w * state.phi * h * pq.kappa(b1, b2);
            if scale != 0.0 {
                for (sj, &xj) in s.iter_mut().zip(x) {
                    *sj += xj * scale;
                }
            }
        }
    }
    let v = acc.solve_information(&s)?;
    let beta = first.beta.iter().zip(&v).map(|(a, b)| a + b).collect();
    Ok(Step {
        beta,
        leverage_trace: Some(trace),
        ..first
    })
}

/// One adjusted iteration in a single pass, with leverages from the previous
/// iteration's weights and factor (`p/n` at the first iteration).
pub fn adjusted_iteration_one_pass<S: ChunkSource + ?Sized>(
    state: &IterationState,
    source: &mut S,
    fl: &FamilyLink,
    b1: f64,
    b2: f64,
) -> Result<Step> {
    let lagged = match (&state.rbar_previous, &state.beta_previous) {
        (Some(r), Some(b)) => {
            r.check_rank()?;
            Some((r, b))
        }
        _ => None,
    };
    let mut work = vec![0.0; state.p()];
    let phi = state.phi;
    let h0 = state.h_default;
    let (accumulator, dispersion) = absorb_pass(state, source, fl, |chunk, i, pq| {
        let kappa = pq.kappa(b1, b2);
        if kappa == 0.0 {
            return 0.0;
        }
        let h = match lagged {
            Some((rbar, beta_prev)) => {
                let x = chunk.row(i);
                let eta = linear_predictor(x, beta_prev);
                let w_prev = fl.point_quantities(eta, chunk.y()[i], chunk.m()[i]).w;
                rbar.leverage_with(x, w_prev, &mut work)
            }
            None => h0,
        };
        phi * h * kappa
    })?;
    let beta = accumulator.solve_coefficients()?;
    Ok(Step {
        beta,
        accumulator,
        dispersion,
        leverage_trace: None,
    })
}
