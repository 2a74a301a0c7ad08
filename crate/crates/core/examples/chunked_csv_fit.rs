// Fits a Poisson log-linear model to a CSV file without loading it. The
// reader holds at most one chunk of rows at a time, whatever the file size.
//
//     cargo run --release --example chunked_csv_fit

use std::io::Write;

use bigglm::{fit, ChunkSchema, CsvSource, Estimator, FamilyLink, FitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

fn main() -> bigglm::Result<()> {
    let dir = std::env::temp_dir().join("bigglm-chunked-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("counts.csv");

    let n = 50_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "count,log_days,age,smoker")?;
    for _ in 0..n {
        let age: f64 = rng.random_range(20.0..70.0);
        let smoker = f64::from(rng.random_bool(0.3));
        let days: f64 = rng.random_range(1.0..30.0);
        let rate = (-3.0 + 0.02 * age + 0.4 * smoker + days.ln()).exp();
        let count: f64 = Poisson::new(rate).unwrap().sample(&mut rng);
        writeln!(out, "{count},{},{age:.1},{smoker}", days.ln())?;
    }
    out.flush()?;
    drop(out);

    // log exposure enters as an ordinary covariate
    let schema = ChunkSchema::new("count", ["age", "smoker", "log_days"]);
    for chunk_size in [1_000, 10_000] {
        let mut source = CsvSource::open(&path, schema.clone(), chunk_size)?;
        let res = fit(
            &FitConfig::new(Estimator::Mbr),
            &mut source,
            &FamilyLink::poisson(),
        )?;
        println!(
            "chunk size {chunk_size}: {} iterations, peak rows in memory {}",
            res.iterations,
            source.peak_buffered_rows()
        );
        for ((name, b), se) in res.names.iter().zip(&res.beta).zip(&res.se) {
            println!("  {name:<12} {b:>9.4} ({se:.4})");
        }
    }
    Ok(())
}
