//! Dense in-memory reference implementations used as test oracles. They share
//! no code with the library: link and variance functions are written out
//! again here and all linear algebra goes through nalgebra.

#![allow(dead_code)]

use bigglm::{Family, Link, MemorySource};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

/// `(μ, dμ/dη, d²μ/dη²)`.
pub fn mean_derivs(link: Link, eta: f64) -> (f64, f64, f64) {
    match link {
        Link::Logit => {
            let mu = 1.0 / (1.0 + (-eta).exp());
            let d = mu * (1.0 - mu);
            (mu, d, d * (1.0 - 2.0 * mu))
        }
        Link::Probit => {
            let n = Normal::standard();
            (n.cdf(eta), n.pdf(eta), -eta * n.pdf(eta))
        }
        Link::Cloglog => {
            let e = eta.exp();
            let d = (eta - e).exp();
            (1.0 - (-e).exp(), d, d * (1.0 - e))
        }
        Link::Log => (eta.exp(), eta.exp(), eta.exp()),
        Link::Identity => (eta, 1.0, 0.0),
        Link::Inverse => (1.0 / eta, -1.0 / (eta * eta), 2.0 / eta.powi(3)),
    }
}

/// `(V(μ), V′(μ))`.
pub fn variance(family: Family, mu: f64) -> (f64, f64) {
    match family {
        Family::Binomial => (mu * (1.0 - mu), 1.0 - 2.0 * mu),
        Family::Poisson => (mu, 1.0),
        Family::Gaussian => (1.0, 0.0),
        Family::Gamma => (mu * mu, 2.0 * mu),
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub m: DVector<f64>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn source(&self, chunk: usize) -> MemorySource {
        let mut flat = Vec::with_capacity(self.n() * self.p());
        for i in 0..self.n() {
            flat.extend(self.x.row(i).iter());
        }
        MemorySource::from_design(
            self.p(),
            flat,
            self.y.as_slice().to_vec(),
            Some(self.m.as_slice().to_vec()),
            chunk,
        )
        .unwrap()
    }
}

/// An `n × 5` design (intercept plus four standard normal covariates) with
/// responses drawn from the model at moderate coefficients.
pub fn simulate(family: Family, link: Link, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 5;
    let beta: [f64; 5] = match (family, link) {
        (Family::Gamma, Link::Inverse) => [1.0, 0.1, -0.1, 0.05, 0.0],
        (Family::Poisson, _) | (Family::Gamma, _) => [0.5, 0.3, -0.2, 0.1, 0.0],
        _ => [-0.3, 0.8, -0.5, 0.3, 0.1],
    };
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut m = DVector::from_element(n, 1.0);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..p {
            let v: f64 = rng.sample(StandardNormal);
            x[(i, j)] = if matches!(link, Link::Inverse) {
                0.5 * v
            } else {
                v
            };
        }
        let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
        let mu = mean_derivs(link, eta).0;
        y[i] = match family {
            Family::Binomial => {
                let trials = rng.random_range(1..=4);
                m[i] = trials as f64;
                let successes = (0..trials).filter(|_| rng.random::<f64>() < mu).count();
                successes as f64 / trials as f64
            }
            Family::Poisson => Poisson::new(mu).unwrap().sample(&mut rng),
            Family::Gaussian => mu + 0.7 * rng.sample::<f64, _>(StandardNormal),
            Family::Gamma => Gamma::new(2.0, mu / 2.0).unwrap().sample(&mut rng),
        };
    }
    Dataset { x, y, m }
}

#[derive(Debug, Clone)]
pub struct OracleFit {
    pub beta: DVector<f64>,
    pub phi: f64,
    pub iterations: usize,
}

/// Working quantities at β: weights, working variates, leverages and the
/// adjustment κ, all computed densely.
pub struct DenseState {
    pub w: DVector<f64>,
    pub z: DVector<f64>,
    pub eta: DVector<f64>,
    pub h: DVector<f64>,
    pub kappa: DVector<f64>,
    pub info: DMatrix<f64>,
}

pub fn dense_state(
    data: &Dataset,
    family: Family,
    link: Link,
    beta: &DVector<f64>,
    b1: f64,
    b2: f64,
    t: f64,
) -> DenseState {
    let n = data.n();
    let eta = &data.x * beta;
    let mut w = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut kappa = DVector::zeros(n);
    for i in 0..n {
        let (mu, d, dp) = mean_derivs(link, eta[i]);
        let (v, vp) = variance(family, mu);
        let m = data.m[i];
        w[i] = m * d * d / v;
        z[i] = eta[i] + (data.y[i] - mu) / d;
        let xi = dp / (2.0 * d * w[i]);
        let lambda = 0.5 * t * (dp / (d * w[i]) - vp / (m * d));
        kappa[i] = b1 * xi + b2 * lambda;
    }
    let xtw = data.x.transpose() * DMatrix::from_diagonal(&w);
    let info = &xtw * &data.x;
    let inv = info.clone().try_inverse().expect("singular information");
    // full hat matrix X (XᵀWX)⁻¹ XᵀW, then its diagonal
    let hat = &data.x * &inv * &xtw;
    let h = hat.diagonal();
    DenseState {
        w,
        z,
        eta,
        h,
        kappa,
        info,
    }
}

/// Adjusted IWLS to a tight fixed point. `moment_phi` re-estimates φ by
/// Σ w (z − η)² / (n − p) between β steps.
pub fn dense_fit(
    data: &Dataset,
    family: Family,
    link: Link,
    (b1, b2, t): (f64, f64, f64),
    moment_phi: bool,
    start: Option<DVector<f64>>,
) -> OracleFit {
    let p = data.p();
    let mut beta = start.unwrap_or_else(|| DVector::zeros(p));
    let mut phi = 1.0;
    for it in 1..=500 {
        let s = dense_state(data, family, link, &beta, b1, b2, t);
        let rhs = s.z.clone() + (s.h.component_mul(&s.kappa)) * phi;
        let xtw = data.x.transpose() * DMatrix::from_diagonal(&s.w);
        let next = s.info.clone().lu().solve(&(xtw * rhs)).unwrap();
        let new_phi = if moment_phi {
            let r = &s.z - &s.eta;
            r.component_mul(&r).dot(&s.w) / (data.n() - p) as f64
        } else {
            1.0
        };
        let change = (&next - &beta).amax().max((new_phi - phi).abs());
        beta = next;
        phi = new_phi;
        if change < 1e-13 {
            return OracleFit {
                beta,
                phi,
                iterations: it,
            };
        }
    }
    panic!("dense oracle did not converge");
}

/// Dense least squares by QR.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let qr = x.clone().qr();
    let qty = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&qty).unwrap()
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// The family/link pairs of the equivalence suite.
pub const SUITE: [(Family, Link); 6] = [
    (Family::Binomial, Link::Logit),
    (Family::Binomial, Link::Probit),
    (Family::Binomial, Link::Cloglog),
    (Family::Poisson, Link::Log),
    (Family::Gaussian, Link::Identity),
    (Family::Gamma, Link::Log),
];

/// Penalized log-likelihood `ℓ(β) + ½ log|XᵀWX|` for logistic regression
/// with unit trials, evaluated densely.
pub fn logistic_penalized_loglik(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    let mut ll = 0.0;
    let mut w = DVector::zeros(y.len());
    for i in 0..y.len() {
        // log(1 + e^η) computed stably
        let softplus = eta[i].max(0.0) + (-eta[i].abs()).exp().ln_1p();
        ll += y[i] * eta[i] - softplus;
        let mu = 1.0 / (1.0 + (-eta[i]).exp());
        w[i] = mu * (1.0 - mu);
    }
    let info = x.transpose() * DMatrix::from_diagonal(&w) * x;
    ll + 0.5 * info.determinant().ln()
}

/// Maximizes `f` over ℝ² from a grid search followed by Newton steps on
/// central finite-difference derivatives.
pub fn maximize_2d(f: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let mut best = (0.0, 0.0, f64::NEG_INFINITY);
    for i in -100..=100 {
        for j in -100..=100 {
            let (a, b) = (i as f64 * 0.1, j as f64 * 0.05);
            let v = f(a, b);
            if v > best.2 {
                best = (a, b, v);
            }
        }
    }
    let (mut a, mut b) = (best.0, best.1);
    let h = 1e-4;
    for _ in 0..100 {
        let ga = (f(a + h, b) - f(a - h, b)) / (2.0 * h);
        let gb = (f(a, b + h) - f(a, b - h)) / (2.0 * h);
        let haa = (f(a + h, b) - 2.0 * f(a, b) + f(a - h, b)) / (h * h);
        let hbb = (f(a, b + h) - 2.0 * f(a, b) + f(a, b - h)) / (h * h);
        let hab =
            (f(a + h, b + h) - f(a + h, b - h) - f(a - h, b + h) + f(a - h, b - h)) / (4.0 * h * h);
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(-hab * ga + haa * gb) / det;
        let mut step = 1.0;
        while f(a + step * da, b + step * db) < f(a, b) - 1e-15 && step > 1e-6 {
            step *= 0.5;
        }
        a += step * da;
        b += step * db;
        if da.abs().max(db.abs()) * step < 1e-12 {
            break;
        }
    }
    (a, b)
}
