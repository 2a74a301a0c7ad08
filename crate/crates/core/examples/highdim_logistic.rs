// mJPL in high-dimensional logistic regression (n = 2000, equispaced truth),
// with the rescaling that recovers the signal where ML estimates do not exist.
//
//     cargo run --release --example highdim_logistic -- [kappa gamma mle_exists reps]
//
// Defaults to κ = 0.3, γ = 8 (p = 600), where ML estimates do not exist.

use bigglm::sim::{run_grid, SimOptions, SimSetting};

fn run(kappa: f64, gamma: f64, mle_exists: bool, reps: usize) -> bigglm::Result<()> {
    let setting = SimSetting {
        reps,
        ..SimSetting::new(kappa, gamma, mle_exists)
    };
    println!(
        "n = {}, p = {}, rescaling {}",
        setting.n,
        setting.p(),
        if mle_exists { "off" } else { "on" }
    );
    let out = run_grid(&[setting], &SimOptions::default())?;
    for r in &out[0].replicates {
        println!(
            "rep {}: {} iterations, {:.1}s, slope {:.3}, rescaled slope {:.3}",
            r.rep, r.iterations, r.seconds, r.slope, r.slope_adjusted
        );
    }
    let s = &out[0].summary;
    println!(
        "iterations min/mean/max {}/{:.1}/{}, mean time {:.2}s",
        s.iterations_min, s.iterations_mean, s.iterations_max, s.time_mean_seconds
    );
    Ok(())
}

fn main() -> bigglm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let get = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let kappa: f64 = get(0, "0.3").parse().expect("kappa");
    let gamma: f64 = get(1, "8").parse().expect("gamma");
    let mle_exists: bool = get(2, "false").parse().expect("mle_exists");
    let reps: usize = get(3, "2").parse().expect("reps");
    run(kappa, gamma, mle_exists, reps)
}
