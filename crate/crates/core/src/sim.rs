//! High-dimensional logistic regression experiments.
//!
//! Covariates are i.i.d. standard normal, the true coefficients have norm
//! `γ√(1 − ρ²)` and the intercept is `ργ`. Each replicate is fitted by
//! two-pass mJPL and summarized by the slope of a least-squares line through
//! (truth, estimate) pairs. Where ML estimates do not exist asymptotically the
//! mJPL estimates shrink towards zero by a predictable factor, undone by
//! multiplying with `κγ/√(1 − ρ²)`.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunk::MemorySource;
use crate::error::{Error, Result};
use crate::family::FamilyLink;
use crate::fit::{fit, Estimator, FitConfig, Variant, DEFAULT_EPSILON, DEFAULT_MAX_ITER};

/// Chunk size used for simulation fits.
pub const SIM_CHUNK_SIZE: usize = 1000;

/// Pattern of the true coefficients before scaling to the target norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaShape {
    /// `p` equally spaced values from −10 to 10.
    Equispaced,
    /// 20% at −10, 20% at 10, the rest zero.
    Sparse,
}

impl BetaShape {
    pub fn pattern(self, p: usize) -> Vec<f64> {
        match self {
            BetaShape::Equispaced if p == 1 => vec![-10.0],
            BetaShape::Equispaced => (0..p)
                .map(|j| -10.0 + 20.0 * j as f64 / (p - 1) as f64)
                .collect(),
            BetaShape::Sparse => {
                let k = p / 5;
                (0..p)
                    .map(|j| match j {
                        j if j < k => -10.0,
                        j if j < 2 * k => 10.0,
                        _ => 0.0,
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub kappa: f64,
    pub n: usize,
    pub rho2: f64,
    pub gamma: f64,
    pub shape: BetaShape,
    pub reps: usize,
    pub seed: u64,
    /// Whether ML estimates exist asymptotically at (κ, γ); decides the rescaling.
    pub mle_exists: bool,
}

impl SimSetting {
    /// `n = 2000`, `ρ = 0`, equispaced truth, 5 replicates.
    pub fn new(kappa: f64, gamma: f64, mle_exists: bool) -> Self {
        Self {
            kappa,
            n: 2000,
            rho2: 0.0,
            gamma,
            shape: BetaShape::Equispaced,
            reps: 5,
            seed: 20240101,
            mle_exists,
        }
    }

    /// `⌈nκ⌉` slope coefficients.
    pub fn p(&self) -> usize {
        // the small offset absorbs representation error in κ, e.g. 0.15·2000
        (self.n as f64 * self.kappa - 1e-9).ceil() as usize
    }

    pub fn rho(&self) -> f64 {
        self.rho2.sqrt()
    }

    pub fn alpha(&self) -> f64 {
        self.rho() * self.gamma
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma * (1.0 - self.rho2).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        if !(self.rho2 >= 0.0 && self.rho2 < 1.0) {
            return Err(Error::Config(format!(
                "rho2 must lie in [0, 1), got {}",
                self.rho2
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        let p = self.p();
        if p < 2 || p + 1 >= self.n {
            return Err(Error::Config(format!(
                "need 2 <= p < n - 1, got p = {p}, n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// True coefficients, scaled to norm `γ₀`.
    pub fn beta(&self) -> Vec<f64> {
        let pattern = self.shape.pattern(self.p());
        let norm = pattern.iter().map(|b| b * b).sum::<f64>().sqrt();
        let scale = self.gamma0() / norm;
        pattern.into_iter().map(|b| b * scale).collect()
    }
}

/// One simulated data set. `x` is row-major `n × (p + 1)` with a leading
/// column of ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: f64,
    pub beta: Vec<f64>,
}

impl Replicate {
    pub fn into_source(self, chunk_size: usize) -> Result<MemorySource> {
        let p = self.beta.len() + 1;
        MemorySource::from_design(p, self.x, self.y, None, chunk_size)
    }
}

/// Draws replicate `rep` of `setting`. The generator is seeded with
/// `setting.seed` and uses `rep` as its stream, so replicates are independent
/// of one another and of the order in which they are drawn.
pub fn generate(setting: &SimSetting, rep: usize) -> Replicate {
    let mut rng = ChaCha8Rng::seed_from_u64(setting.seed);
    rng.set_stream(rep as u64);
    let (n, p) = (setting.n, setting.p());
    let alpha = setting.alpha();
    let beta = setting.beta();
    let mut x = Vec::with_capacity(n * (p + 1));
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(1.0);
        let mut eta = alpha;
        for b in &beta {
            let v: f64 = rng.sample(StandardNormal);
            x.push(v);
            eta += v * b;
        }
        let prob = 1.0 / (1.0 + (-eta).exp());
        y.push(if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
    }
    Replicate { x, y, alpha, beta }
}

/// The factor applied to estimates: 1 if ML exists, else `κγ/√(1 − ρ²)`.
pub fn rescale_factor(kappa: f64, gamma: f64, rho: f64, mle_exists: bool) -> f64 {
    if mle_exists {
        1.0
    } else {
        kappa * gamma / (1.0 - rho * rho).sqrt()
    }
}

pub fn rescale_estimate(
    beta_tilde: &[f64],
    kappa: f64,
    gamma: f64,
    rho: f64,
    mle_exists: bool,
) -> Vec<f64> {
    let f = rescale_factor(kappa, gamma, rho, mle_exists);
    beta_tilde.iter().map(|b| b * f).collect()
}

/// `(intercept, slope)` of the least-squares line of `estimates` on `truth`.
pub fn recovery_line(estimates: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if estimates.len() != truth.len() || truth.len() < 2 {
        return Err(Error::Shape(format!(
            "need two or more matching pairs, got {} estimates and {} truths",
            estimates.len(),
            truth.len()
        )));
    }
    let n = truth.len() as f64;
    let mx = truth.iter().sum::<f64>() / n;
    let my = estimates.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in truth.iter().zip(estimates) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

pub fn recovery_slope(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    Ok(recovery_line(estimates, truth)?.1)
}

/// Fit settings for a grid run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub chunk_size: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Also fit ML where it exists.
    pub fit_ml: bool,
    /// Keep per-replicate estimates in the outcome.
    pub keep_estimates: bool,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            chunk_size: SIM_CHUNK_SIZE,
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            fit_ml: false,
            keep_estimates: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub rep: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Wall time of the fit alone.
    #[serde(skip)]
    pub seconds: f64,
    pub alpha_hat: f64,
    pub slope: f64,
    pub slope_adjusted: f64,
    pub intercept: f64,
    pub intercept_adjusted: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ml_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub estimates: Option<Vec<f64>>,
    #[serde(skip)]
    pub truth: Option<Vec<f64>>,
}

/// Per-setting aggregates over successful replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub kappa: f64,
    pub n: usize,
    pub p: usize,
    pub rho2: f64,
    pub gamma: f64,
    pub shape: BetaShape,
    pub mle_exists: bool,
    pub reps: usize,
    pub converged_count: usize,
    pub failures: usize,
    pub slope: f64,
    pub slope_adjusted: f64,
    pub slope_adjusted_min: f64,
    pub slope_adjusted_max: f64,
    pub intercept: f64,
    pub intercept_adjusted: f64,
    pub iterations_min: usize,
    pub iterations_mean: f64,
    pub iterations_max: usize,
    /// Mean wall seconds per fit; machine-dependent, so kept out of the
    /// summary files.
    #[serde(skip)]
    pub time_mean_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SettingOutcome {
    pub setting: SimSetting,
    pub summary: SimSummary,
    pub replicates: Vec<ReplicateResult>,
}

/// Generates and fits one replicate. Fit errors are recorded in the result.
pub fn run_replicate(setting: &SimSetting, rep: usize, options: &SimOptions) -> ReplicateResult {
    let data = generate(setting, rep);
    let truth = data.beta.clone();
    let mut result = ReplicateResult {
        rep,
        converged: false,
        iterations: 0,
        seconds: 0.0,
        alpha_hat: f64::NAN,
        slope: f64::NAN,
        slope_adjusted: f64::NAN,
        intercept: f64::NAN,
        intercept_adjusted: f64::NAN,
        ml_slope: None,
        error: None,
        estimates: None,
        truth: None,
    };
    let attempt = || -> Result<()> {
        let mut source = data.into_source(options.chunk_size)?;
        let fl = FamilyLink::logistic();
        let config = FitConfig::new(Estimator::Mjpl)
            .variant(Variant::TwoPass)
            .epsilon(options.epsilon)
            .max_iter(options.max_iter);
        let clock = Instant::now();
        let res = fit(&config, &mut source, &fl)?;
        result.seconds = clock.elapsed().as_secs_f64();
        result.converged = res.converged;
        result.iterations = res.iterations;
        result.alpha_hat = res.beta[0];
        let est = &res.beta[1..];
        (result.intercept, result.slope) = recovery_line(est, &truth)?;
        let adjusted = rescale_estimate(
            est,
            setting.kappa,
            setting.gamma,
            setting.rho(),
            setting.mle_exists,
        );
        (result.intercept_adjusted, result.slope_adjusted) = recovery_line(&adjusted, &truth)?;
        if options.fit_ml && setting.mle_exists {
            let ml = FitConfig::new(Estimator::Ml)
                .epsilon(options.epsilon)
                .max_iter(options.max_iter);
            result.ml_slope = fit(&ml, &mut source, &fl)
                .ok()
                .and_then(|r| recovery_slope(&r.beta[1..], &truth).ok());
        }
        if options.keep_estimates {
            result.estimates = Some(est.to_vec());
            result.truth = Some(truth.clone());
        }
        Ok(())
    };
    if let Err(e) = attempt() {
        result.error = Some(e.to_string());
    }
    result
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = values.fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

pub fn summarize(setting: &SimSetting, replicates: &[ReplicateResult]) -> SimSummary {
    let ok: Vec<&ReplicateResult> = replicates.iter().filter(|r| r.error.is_none()).collect();
    let adjusted = ok.iter().map(|r| r.slope_adjusted);
    SimSummary {
        kappa: setting.kappa,
        n: setting.n,
        p: setting.p(),
        rho2: setting.rho2,
        gamma: setting.gamma,
        shape: setting.shape,
        mle_exists: setting.mle_exists,
        reps: replicates.len(),
        converged_count: ok.iter().filter(|r| r.converged).count(),
        failures: replicates.len() - ok.len(),
        slope: mean(ok.iter().map(|r| r.slope)),
        slope_adjusted: mean(adjusted.clone()),
        slope_adjusted_min: adjusted.clone().fold(f64::NAN, f64::min),
        slope_adjusted_max: adjusted.fold(f64::NAN, f64::max),
        intercept: mean(ok.iter().map(|r| r.intercept)),
        intercept_adjusted: mean(ok.iter().map(|r| r.intercept_adjusted)),
        iterations_min: ok.iter().map(|r| r.iterations).min().unwrap_or(0),
        iterations_mean: mean(ok.iter().map(|r| r.iterations as f64)),
        iterations_max: ok.iter().map(|r| r.iterations).max().unwrap_or(0),
        time_mean_seconds: mean(ok.iter().map(|r| r.seconds)),
    }
}

/// Runs every replicate of every setting, in parallel across replicates.
pub fn run_grid(settings: &[SimSetting], options: &SimOptions) -> Result<Vec<SettingOutcome>> {
    if settings.is_empty() {
        return Err(Error::Config("the grid has no settings".into()));
    }
    for s in settings {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = settings
        .iter()
        .enumerate()
        .flat_map(|(i, s)| (0..s.reps).map(move |r| (i, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = options.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<ReplicateResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, r)| run_replicate(&settings[i], r, options))
            .collect()
    });
    let mut results = results.into_iter();
    Ok(settings
        .iter()
        .map(|s| {
            let replicates: Vec<_> = results.by_ref().take(s.reps).collect();
            SettingOutcome {
                setting: *s,
                summary: summarize(s, &replicates),
                replicates,
            }
        })
        .collect())
}

/// Reads settings from CSV with header
/// `kappa,n,rho2,gamma,shape,reps,seed,mle_exists`.
pub fn read_grid(path: impl AsRef<Path>) -> Result<Vec<SimSetting>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Read(format!("{}: {e}", path.display())))?;
    read_grid_from(file)
}

pub fn read_grid_from(reader: impl std::io::Read) -> Result<Vec<SimSetting>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (k, record) in rdr.deserialize::<SimSetting>().enumerate() {
        let setting = record.map_err(|e| Error::Schema(format!("grid record {}: {e}", k + 1)))?;
        setting
            .validate()
            .map_err(|e| Error::Schema(format!("grid record {}: {e}", k + 1)))?;
        out.push(setting);
    }
    if out.is_empty() {
        return Err(Error::Config("the grid has no settings".into()));
    }
    Ok(out)
}

pub fn write_grid(path: impl AsRef<Path>, settings: &[SimSetting]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Read(e.to_string()))?;
    for s in settings {
        w.serialize(s).map_err(|e| Error::Read(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: impl AsRef<Path>, outcomes: &[SettingOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Read(e.to_string()))?;
    for o in outcomes {
        w.serialize(&o.summary)
            .map_err(|e| Error::Read(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SettingJson<'a> {
    summary: &'a SimSummary,
    replicates: &'a [ReplicateResult],
}

pub fn write_summary_json(path: impl AsRef<Path>, outcomes: &[SettingOutcome]) -> Result<()> {
    let body: Vec<SettingJson> = outcomes
        .iter()
        .map(|o| SettingJson {
            summary: &o.summary,
            replicates: &o.replicates,
        })
        .collect();
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &body).map_err(|e| Error::Read(e.to_string()))?;
    writeln!(f)?;
    Ok(())
}

/// Mean wall seconds per fit for each setting, one row per setting.
pub fn write_timing_csv(path: impl AsRef<Path>, outcomes: &[SettingOutcome]) -> Result<()> {
    let mut f = File::create(path)?;
    writeln!(f, "kappa,gamma,p,time_mean_seconds")?;
    for o in outcomes {
        let s = &o.summary;
        writeln!(f, "{},{},{},{}", s.kappa, s.gamma, s.p, s.time_mean_seconds)?;
    }
    Ok(())
}

/// Long-format per-replicate estimates: setting, rep, index, truth, estimate, adjusted.
pub fn write_estimates_csv(path: impl AsRef<Path>, outcomes: &[SettingOutcome]) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    writeln!(f, "setting,rep,index,truth,estimate,adjusted")?;
    for (k, o) in outcomes.iter().enumerate() {
        let s = &o.setting;
        let factor = rescale_factor(s.kappa, s.gamma, s.rho(), s.mle_exists);
        for r in &o.replicates {
            let (Some(est), Some(truth)) = (&r.estimates, &r.truth) else {
                continue;
            };
            for (j, (e, t)) in est.iter().zip(truth).enumerate() {
                writeln!(
                    f,
                    "{},{},{},{},{},{}",
                    k + 1,
                    r.rep,
                    j + 1,
                    t,
                    e,
                    e * factor
                )?;
            }
        }
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_and_intercept() {
        let s = SimSetting::new(0.15, 1.0, true);
        assert_eq!(s.p(), 300);
        assert_eq!(SimSetting::new(0.01, 1.0, true).p(), 20);
        assert_eq!(SimSetting::new(0.3, 8.0, false).p(), 600);
        assert_eq!(s.alpha(), 0.0);
        let t = SimSetting { rho2: 0.25, ..s };
        assert!((t.alpha() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn truth_has_target_norm() {
        for shape in [BetaShape::Equispaced, BetaShape::Sparse] {
            for &(kappa, gamma, rho2) in &[(0.01, 1.0, 0.0), (0.3, 8.0, 0.0), (0.2, 10.0, 0.75)] {
                let s = SimSetting {
                    shape,
                    rho2,
                    ..SimSetting::new(kappa, gamma, false)
                };
                let norm = s.beta().iter().map(|b| b * b).sum::<f64>().sqrt();
                assert!((norm - s.gamma0()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_pattern() {
        let b = BetaShape::Sparse.pattern(10);
        assert_eq!(
            b,
            vec![-10.0, -10.0, 10.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        let e = BetaShape::Equispaced.pattern(5);
        assert_eq!(e, vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
    }

    #[test]
    fn generation_is_reproducible_and_streams_differ() {
        let s = SimSetting {
            n: 200,
            ..SimSetting::new(0.05, 2.0, true)
        };
        let a = generate(&s, 3);
        let b = generate(&s, 3);
        assert_eq!(a, b);
        assert_ne!(generate(&s, 4).x, a.x);
        assert!(a.y.iter().all(|&y| y == 0.0 || y == 1.0));
        assert!(a.x.chunks(s.p() + 1).all(|r| r[0] == 1.0));
    }

    #[test]
    fn linear_predictor_variance_matches_norm() {
        let s = SimSetting::new(0.15, 1.0, true);
        let d = generate(&s, 0);
        let p = s.p();
        let lp: Vec<f64> =
            d.x.chunks(p + 1)
                .map(|r| r[1..].iter().zip(&d.beta).map(|(a, b)| a * b).sum())
                .collect();
        let m = lp.iter().sum::<f64>() / lp.len() as f64;
        let var = lp.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (lp.len() - 1) as f64;
        let g2 = s.gamma0().powi(2);
        assert!((var - g2).abs() < 0.05 * g2, "var {var} vs {g2}");
    }

    #[test]
    fn rescaling() {
        assert_eq!(
            rescale_estimate(&[1.5, -2.0], 0.3, 8.0, 0.0, true),
            vec![1.5, -2.0]
        );
        assert!((rescale_factor(0.3, 8.0, 0.0, false) - 2.4).abs() < 1e-15);
        assert!((rescale_factor(0.2, 10.0, 0.75f64.sqrt(), false) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn slopes() {
        let t = [1.0, -2.0, 0.5, 3.0];
        assert!((recovery_slope(&t, &t).unwrap() - 1.0).abs() < 1e-15);
        let e: Vec<f64> = t.iter().map(|v| 2.0 * v + 3.0).collect();
        let (a, b) = recovery_line(&e, &t).unwrap();
        assert!((b - 2.0).abs() < 1e-14 && (a - 3.0).abs() < 1e-14);
        assert!(matches!(
            recovery_slope(&[1.0, 2.0], &[4.0, 4.0]),
            Err(Error::DegenerateRegressor)
        ));
    }

    #[test]
    fn grid_parsing() {
        let text =
            "kappa,n,rho2,gamma,shape,reps,seed,mle_exists\n0.01,2000,0,1,equispaced,5,7,true\n";
        let g = read_grid_from(text.as_bytes()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].p(), 20);
        let header_only = "kappa,n,rho2,gamma,shape,reps,seed,mle_exists\n";
        assert!(read_grid_from(header_only.as_bytes()).is_err());
        let bad = format!("{text}0.3,2000,0,8,round,5,7,false\n");
        let err = read_grid_from(bad.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("record 2"), "{err}");
    }

    #[test]
    fn small_grid_runs() {
        let s = SimSetting {
            n: 400,
            reps: 3,
            ..SimSetting::new(0.02, 1.0, true)
        };
        let opts = SimOptions {
            threads: Some(2),
            ..SimOptions::default()
        };
        let out = run_grid(&[s], &opts).unwrap();
        let again = run_grid(
            &[s],
            &SimOptions {
                threads: Some(1),
                ..opts
            },
        )
        .unwrap();
        assert_eq!(
            out[0].summary,
            SimSummary {
                time_mean_seconds: out[0].summary.time_mean_seconds,
                ..again[0].summary.clone()
            }
        );
        assert_eq!(out[0].summary.converged_count, 3);
        assert!(out[0].summary.slope.is_finite());
    }
}
