//! Solve a small quadratic program over the probability simplex and check
//! the answer against a brute-force grid.
//!
//! `cargo run --example simplex_qp`

use ndarray::array;
use nidf::fusion::{project_simplex, solve_simplex_qp, FusionConfig};

fn main() {
    let v = array![0.9, -0.4, 0.6];
    println!("projection of {v} onto the simplex: {}", project_simplex(v.view()));

    let q = array![[2.0, 0.5, 0.0], [0.5, 1.0, 0.3], [0.0, 0.3, 1.5]];
    let c = array![1.0, 0.2, 0.8];
    let sol = solve_simplex_qp(&q, &c, &FusionConfig::default());
    println!(
        "minimizer {:.5} objective {:.8} after {} iterations",
        sol.x, sol.objective, sol.iterations
    );

    let steps = 400;
    let mut best = f64::INFINITY;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let x = array![i as f64, j as f64, (steps - i - j) as f64] / steps as f64;
            best = best.min(x.dot(&q.dot(&x)) - c.dot(&x));
        }
    }
    println!("grid minimum {best:.8} (difference {:.1e})", sol.objective - best);
}
