// Under complete separation the ML estimates are infinite and IWLS drifts
// off; the bias-reducing and Jeffreys'-penalized fits stay finite.
//
//     cargo run --example separation

use bigglm::{fit, ChunkSchema, CsvSource, Estimator, FamilyLink, FitConfig};

fn main() -> bigglm::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/separated_sample.csv");
    let fl = FamilyLink::logistic();
    for (est, max_iter) in [
        (Estimator::Ml, 10),
        (Estimator::Ml, 25),
        (Estimator::Mbr, 250),
        (Estimator::Mjpl, 250),
    ] {
        let mut source = CsvSource::open(path, ChunkSchema::new("y", ["x"]), 2)?;
        let cfg = FitConfig::new(est).epsilon(1e-8).max_iter(max_iter);
        let res = fit(&cfg, &mut source, &fl)?;
        println!(
            "{est:<5} after {:>3} iterations: intercept {:>9.4}, slope {:>8.4}, se ({:.3}, {:.3}), converged {}",
            res.iterations, res.beta[0], res.beta[1], res.se[0], res.se[1], res.converged
        );
    }
    Ok(())
}
