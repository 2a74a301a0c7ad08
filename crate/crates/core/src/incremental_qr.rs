//! Bounded-memory weighted least squares by incremental QR decomposition.
//!
//! Rows arrive in chunks and are eliminated into an upper-triangular factor
//! `R̄` (with the rotated right-hand side `b̄ = Q₁ᵀb`) by Givens rotations.
//! `Q` is never formed. The retained state is `R̄`, `b̄` and two scalars, so
//! memory does not grow with the number of rows absorbed.

use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance on the diagonal of `R̄` for the rank check.
pub const RANK_TOL: f64 = 1e-10;

/// The pair `(R̄, b̄)` accumulated over all absorbed rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangularAccumulator {
    p: usize,
    /// Row-major `p × p`; entries below the diagonal stay zero.
    rbar: Vec<f64>,
    bbar: Vec<f64>,
    rows_seen: usize,
    ssq_resid: f64,
}

impl TriangularAccumulator {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            rbar: vec![0.0; p * p],
            bbar: vec![0.0; p],
            rows_seen: 0,
            ssq_resid: 0.0,
        }
    }

    /// Builds an accumulator directly from a triangular factor and rotated rhs.
    pub fn from_parts(rbar: Vec<Vec<f64>>, bbar: Vec<f64>) -> Result<Self> {
        let p = bbar.len();
        if rbar.len() != p || rbar.iter().any(|r| r.len() != p) {
            return Err(Error::Shape(format!("R̄ must be {p}×{p}")));
        }
        let mut acc = Self::new(p);
        for (j, row) in rbar.iter().enumerate() {
            if row[..j].iter().any(|&v| v != 0.0) {
                return Err(Error::Shape("R̄ must be upper triangular".into()));
            }
            acc.rbar[j * p..(j + 1) * p].copy_from_slice(row);
        }
        acc.bbar = bbar;
        Ok(acc)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rows_seen(&self) -> usize {
        self.rows_seen
    }

    /// Squared norm of the right-hand-side components rotated out of `b̄`.
    pub fn ssq_resid(&self) -> f64 {
        self.ssq_resid
    }

    pub fn rbar(&self, i: usize, j: usize) -> f64 {
        self.rbar[i * self.p + j]
    }

    pub fn bbar(&self) -> &[f64] {
        &self.bbar
    }

    /// Dense copy of `R̄`, one `Vec` per row.
    pub fn rbar_rows(&self) -> Vec<Vec<f64>> {
        self.rbar
            .chunks(self.p.max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Absorbs `c` rows (row-major `rows`, `c × p`) weighted by `weights`:
    /// row `i` enters as `√wᵢ·xᵢ` with right-hand side `√wᵢ·rhsᵢ`.
    pub fn absorb_chunk(&mut self, rows: &[f64], rhs: &[f64], weights: &[f64]) -> Result<()> {
        let c = rhs.len();
        if rows.len() != c * self.p || weights.len() != c {
            return Err(Error::Shape(format!(
                "chunk has {} values, {} responses and {} weights for p = {}",
                rows.len(),
                c,
                weights.len(),
                self.p
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::Shape(format!(
                "weights must be nonnegative, got {w}"
            )));
        }
        let mut scratch = vec![0.0; self.p];
        for ((x, &y), &w) in rows.chunks_exact(self.p.max(1)).zip(rhs).zip(weights) {
            if w == 0.0 {
                continue;
            }
            let sw = w.sqrt();
            for (s, &xv) in scratch.iter_mut().zip(x) {
                *s = sw * xv;
            }
            self.absorb_scaled_row(&mut scratch, sw * y);
        }
        Ok(())
    }

    /// Absorbs one already-scaled row. `row` is used as workspace.
    pub fn absorb_row(&mut self, row: &mut [f64], rhs: f64) -> Result<()> {
        if row.len() != self.p {
            return Err(Error::Shape(format!(
                "row has {} entries, expected {}",
                row.len(),
                self.p
            )));
        }
        self.absorb_scaled_row(row, rhs);
        Ok(())
    }

    fn absorb_scaled_row(&mut self, row: &mut [f64], mut rhs: f64) {
        let p = self.p;
        self.rows_seen += 1;
        for j in 0..p {
            let xj = row[j];
            if xj == 0.0 {
                continue;
            }
            let rjj = self.rbar[j * p + j];
            let r = rjj.hypot(xj);
            let (c, s) = (rjj / r, xj / r);
            self.rbar[j * p + j] = r;
            let rrow = &mut self.rbar[j * p + j + 1..(j + 1) * p];
            let xrow = &mut row[j + 1..];
            for (rk, xk) in rrow.iter_mut().zip(xrow.iter_mut()) {
                let (a, b) = (*rk, *xk);
                *rk = c * a + s * b;
                *xk = c * b - s * a;
            }
            let bj = self.bbar[j];
            self.bbar[j] = c * bj + s * rhs;
            rhs = c * rhs - s * bj;
        }
        self.ssq_resid += rhs * rhs;
    }

    fn diag_extremes(&self) -> (f64, f64) {
        (0..self.p)
            .map(|j| self.rbar[j * self.p + j].abs())
            .fold((f64::INFINITY, 0.0), |(lo, hi), d| (lo.min(d), hi.max(d)))
    }

    /// True when every `|r_jj|` exceeds `RANK_TOL · max |r_jj|`.
    pub fn rank_ok(&self) -> bool {
        self.first_deficient_column().is_none()
    }

    fn first_deficient_column(&self) -> Option<usize> {
        if self.p == 0 {
            return None;
        }
        let (_, hi) = self.diag_extremes();
        (0..self.p).find(|&j| !(self.rbar[j * self.p + j].abs() > RANK_TOL * hi))
    }

    pub(crate) fn check_rank(&self) -> Result<()> {
        match self.first_deficient_column() {
            Some(column) => Err(Error::Rank { column }),
            None => Ok(()),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.p {
            return Err(Error::Shape(format!(
                "vector has {} entries, expected {}",
                v.len(),
                self.p
            )));
        }
        Ok(())
    }

    /// Solves `R̄ u = v` in place.
    fn back_substitute(&self, v: &mut [f64]) {
        let p = self.p;
        for i in (0..p).rev() {
            let row = &self.rbar[i * p..(i + 1) * p];
            let tail: f64 = row[i + 1..]
                .iter()
                .zip(&v[i + 1..])
                .map(|(a, b)| a * b)
                .sum();
            v[i] = (v[i] - tail) / row[i];
        }
    }

    /// Solves `R̄ᵀ u = v` in place.
    fn forward_substitute(&self, v: &mut [f64]) {
        let p = self.p;
        for i in 0..p {
            let vi = v[i] / self.rbar[i * p + i];
            v[i] = vi;
            if vi != 0.0 {
                let row = &self.rbar[i * p + i + 1..(i + 1) * p];
                for (vk, &r) in v[i + 1..].iter_mut().zip(row) {
                    *vk -= r * vi;
                }
            }
        }
    }

    /// Least-squares coefficients: back substitution of `R̄ ψ = b̄`.
    pub fn solve_coefficients(&self) -> Result<Vec<f64>> {
        self.check_rank()?;
        let mut psi = self.bbar.clone();
        self.back_substitute(&mut psi);
        Ok(psi)
    }

    /// `w · xᵀ(R̄ᵀR̄)⁻¹x`, the hat-matrix diagonal entry for a row `(x, w)`.
    pub fn leverage(&self, x: &[f64], w: f64) -> Result<f64> {
        self.check_rank()?;
        self.check_len(x)?;
        let mut u = vec![0.0; self.p];
        Ok(self.leverage_with(x, w, &mut u))
    }

    /// As [`leverage`](Self::leverage) without rank or shape checks, reusing
    /// `work` as scratch.
    pub(crate) fn leverage_with(&self, x: &[f64], w: f64, work: &mut [f64]) -> f64 {
        work.copy_from_slice(x);
        self.forward_substitute(work);
        w * work.iter().map(|u| u * u).sum::<f64>()
    }

    /// `(R̄ᵀR̄)⁻¹ s` by two triangular solves.
    pub fn solve_information(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_rank()?;
        self.check_len(s)?;
        let mut v = s.to_vec();
        self.forward_substitute(&mut v);
        self.back_substitute(&mut v);
        Ok(v)
    }

    /// `φ · diag((R̄ᵀR̄)⁻¹)`, computed from the row norms of `R̄⁻¹`.
    pub fn covariance_diagonal(&self, phi: f64) -> Result<Vec<f64>> {
        self.check_rank()?;
        let p = self.p;
        // column j of R̄⁻¹ solves R̄ u = e_j and is zero below row j
        let mut inv = vec![0.0; p * p];
        for j in 0..p {
            inv[j * p + j] = 1.0 / self.rbar[j * p + j];
            for i in (0..j).rev() {
                let row = &self.rbar[i * p..(i + 1) * p];
                let mut acc = 0.0;
                for k in i + 1..=j {
                    acc += row[k] * inv[k * p + j];
                }
                inv[i * p + j] = -acc / row[i];
            }
        }
        Ok((0..p)
            .map(|i| {
                phi * inv[i * p + i..(i + 1) * p]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .collect())
    }
}
