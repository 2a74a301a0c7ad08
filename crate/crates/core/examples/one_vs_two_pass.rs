// The one-pass variant reuses the previous iteration's factor for the
// leverages and reads the data once per iteration; the two-pass variant
// recomputes them. Both reach the same estimates.
//
//     cargo run --release --example one_vs_two_pass

use std::time::Instant;

use bigglm::{fit, Estimator, FamilyLink, FitConfig, Link, MemorySource, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> bigglm::Result<()> {
    let (n, p) = (20_000, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut x = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(1.0);
        let mut eta = -2.5;
        for j in 1..p {
            let v: f64 = rng.sample(StandardNormal);
            x.push(v);
            eta += 0.2 * v * if j % 2 == 0 { 1.0 } else { -1.0 };
        }
        let prob = 0.5 * statrs::function::erf::erfc(-eta / std::f64::consts::SQRT_2);
        y.push(f64::from(rng.random::<f64>() < prob));
    }
    let fl = FamilyLink::binomial(Link::Probit)?;
    let mut estimates = Vec::new();
    for variant in [Variant::OnePass, Variant::TwoPass] {
        let mut source = MemorySource::from_design(p, x.clone(), y.clone(), None, 10_000)?;
        let clock = Instant::now();
        let res = fit(
            &FitConfig::new(Estimator::Mjpl)
                .variant(variant)
                .epsilon(1e-8),
            &mut source,
            &fl,
        )?;
        let secs = clock.elapsed().as_secs_f64();
        println!(
            "{variant}: {} iterations in {secs:.2}s ({:.3}s each), intercept {:.5}",
            res.iterations,
            secs / res.iterations as f64,
            res.beta[0]
        );
        estimates.push(res.beta);
    }
    let gap = estimates[0]
        .iter()
        .zip(&estimates[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("largest difference between variants: {gap:.2e}");
    Ok(())
}
