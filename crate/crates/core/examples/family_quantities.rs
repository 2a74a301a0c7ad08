// Working weights, working variates and the bias-reducing adjustments for
// every supported family and link, evaluated at a few linear predictors.
//
//     cargo run --example family_quantities

use bigglm::{Family, FamilyLink, Link};

fn main() -> bigglm::Result<()> {
    let models = [
        FamilyLink::logistic(),
        FamilyLink::binomial(Link::Probit)?,
        FamilyLink::binomial(Link::Cloglog)?,
        FamilyLink::poisson(),
        FamilyLink::gaussian(),
        FamilyLink::gamma(Link::Log)?,
        FamilyLink::gamma(Link::Inverse)?,
    ];
    println!(
        "{:<18} {:>6} {:>9} {:>9} {:>10} {:>10} {:>10}",
        "model", "eta", "mu", "w", "z", "xi", "lambda"
    );
    for fl in &models {
        for eta in [0.5, 1.5] {
            let y = match fl.family() {
                Family::Binomial => 1.0,
                _ => 2.0,
            };
            let q = fl.point_quantities(eta, y, 1.0);
            println!(
                "{:<18} {:>6.2} {:>9.4} {:>9.4} {:>10.4} {:>10.4} {:>10.4}",
                fl.to_string(),
                eta,
                q.mu,
                q.w,
                q.z,
                q.xi,
                q.lambda
            );
        }
    }

    // λ vanishes under canonical links; the Jeffreys' power scales it elsewhere
    let probit = FamilyLink::binomial(Link::Probit)?;
    let half = probit.with_jeffreys_power(0.5)?;
    println!(
        "probit lambda at eta = 1: t = 1 gives {:.5}, t = 0.5 gives {:.5}",
        probit.point_quantities(1.0, 1.0, 1.0).lambda,
        half.point_quantities(1.0, 1.0, 1.0).lambda
    );

    let gamma = FamilyLink::gamma(Link::Log)?;
    let a = gamma.a_derivatives(1.0, 0.5)?;
    let dev = gamma.deviance_point(0.0, 1.7, 1.0, 0.5)?;
    println!(
        "gamma, phi = 0.5: a' = {:.4}, a'' = {:.4}, a''' = {:.4}; deviance at y = 1.7, mu = 1: q = {:.4}, E[q] = {:.4}",
        a.first,
        a.second,
        a.third,
        dev.q,
        dev.rho.unwrap_or(f64::NAN)
    );
    Ok(())
}
