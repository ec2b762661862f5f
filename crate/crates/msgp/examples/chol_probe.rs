use nalgebra::DMatrix;
use std::time::Instant;

fn spd(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = (i as f64 - j as f64) / 50.0;
            a[(i, j)] = (-0.5 * d * d).exp();
        }
        a[(i, i)] += 1.0;
    }
    a
}

fn main() {
    for &n in &[2000usize, 4000, 8000] {
        let a = spd(n);
        let t = Instant::now();
        let c = nalgebra::Cholesky::new(a.clone()).unwrap();
        let dt_na = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let c2 = msgp::linalg::Chol::new(a).unwrap();
        let dt_blk = t.elapsed().as_secs_f64();
        let gfs_na = (n as f64).powi(3) / 3.0 / dt_na / 1e9;
        let gfs_blk = (n as f64).powi(3) / 3.0 / dt_blk / 1e9;
        println!("n={n}: nalgebra {dt_na:.2}s ({gfs_na:.2} GF/s), blocked {dt_blk:.2}s ({gfs_blk:.2} GF/s), diag diff {:.2e}",
            (c.l().diagonal() - c2.l().diagonal()).amax());
    }
}
