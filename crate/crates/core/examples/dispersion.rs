// Gamma regression with the three dispersion updates: the moment estimator,
// scoring on the likelihood equation and scoring on the bias-reducing one.
//
//     cargo run --example dispersion

use bigglm::{fit, DispersionRule, Estimator, FamilyLink, FitConfig, Link, MemorySource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

fn main() -> bigglm::Result<()> {
    let n = 400;
    let shape = 4.0; // φ = 1/4
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let t: f64 = rng.random_range(-1.0..1.0);
        let mu = (1.0 + 0.5 * t).exp();
        x.extend([1.0, t]);
        y.push(Gamma::new(shape, mu / shape).unwrap().sample(&mut rng));
    }
    let fl = FamilyLink::gamma(Link::Log)?;
    println!("true dispersion {:.4}", 1.0 / shape);
    for rule in [
        DispersionRule::Moment,
        DispersionRule::MlScoring,
        DispersionRule::MbrScoring,
    ] {
        let mut source = MemorySource::from_design(2, x.clone(), y.clone(), None, 100)?;
        let cfg = FitConfig::new(Estimator::Mbr)
            .dispersion(rule)
            .epsilon(1e-8);
        let res = fit(&cfg, &mut source, &fl)?;
        println!(
            "{rule:<7} phi {:.4}, beta ({:.4}, {:.4}), {} iterations",
            res.phi, res.beta[0], res.beta[1], res.iterations
        );
    }
    Ok(())
}
