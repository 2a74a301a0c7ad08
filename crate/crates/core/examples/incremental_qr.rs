// Streaming weighted least squares: rows arrive in chunks and are rotated
// into a p × p triangular factor, so the full design is never stored.
//
//     cargo run --example incremental_qr

use bigglm::TriangularAccumulator;

fn main() -> bigglm::Result<()> {
    // y = 2 - x + x² observed without noise at x = 0, 0.5, ..., 4.5
    let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
    let rows: Vec<f64> = xs.iter().flat_map(|&x| [1.0, x, x * x]).collect();
    let y: Vec<f64> = xs.iter().map(|&x| 2.0 - x + x * x).collect();
    let w = vec![1.0; xs.len()];

    let mut acc = TriangularAccumulator::new(3);
    for (k, ((r, y), w)) in rows
        .chunks(12)
        .zip(y.chunks(4))
        .zip(w.chunks(4))
        .enumerate()
    {
        acc.absorb_chunk(r, y, w)?;
        println!("after chunk {}: {} rows absorbed", k + 1, acc.rows_seen());
    }
    let beta = acc.solve_coefficients()?;
    println!("coefficients: {beta:.6?}");
    println!("residual sum of squares: {:.3e}", acc.ssq_resid());

    println!("R =");
    for row in acc.rbar_rows() {
        println!("  {row:>9.4?}");
    }

    let mut trace = 0.0;
    for (i, r) in rows.chunks(3).enumerate() {
        let h = acc.leverage(r, 1.0)?;
        trace += h;
        if i % 3 == 0 {
            println!("leverage of row {i}: {h:.4}");
        }
    }
    println!("sum of leverages: {trace:.12} (= p)");

    let se = acc.covariance_diagonal(1.0)?;
    println!("diag (X'X)^-1: {se:.5?}");
    Ok(())
}
