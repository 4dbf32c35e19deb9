//! Build a small instance in code, solve it with both rounding methods,
//! and compare against the LP bound.
//!
//!     cargo run --example solve_instance

use gpip::matrix::Matrix;
use gpip::model::RawInstance;
use gpip::pessimistic::{solve_with, SolveMethod, SolveOptions};

fn main() -> gpip::Result<()> {
    // Two activities (x) feed on one shared resource that two purchases (y)
    // replenish: a minimal coupled packing problem.
    let mut raw = RawInstance {
        name: Some("demo".into()),
        coupling_x: Matrix::from_rows(vec![vec![0.4, 0.6]]).unwrap(),
        coupling_y: Matrix::from_rows(vec![vec![1.0, 0.9]]).unwrap(),
        packing_x: Matrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
        packing_x_rhs: vec![2.0],
        packing_y: Matrix::from_rows(vec![vec![0.8, 1.0]]).unwrap(),
        packing_y_rhs: vec![1.5],
        objective_x: vec![1.0, 0.7],
        objective_y: vec![0.5, 0.4],
    };
    raw.check_dims()?;

    for (label, method) in [
        ("deterministic", SolveMethod::Deterministic),
        ("randomized", SolveMethod::Randomized),
    ] {
        let opts = SolveOptions {
            method,
            trials: 256,
            seed: 7,
            ..Default::default()
        };
        let result = solve_with(&raw, &opts)?;
        println!(
            "{label:>13}: objective {:.4} of LP bound {:.4} (gap {:.1}%), \
             method tag {:?}, x = {:?}, y = {:?}",
            result.objective,
            result.lp_bound,
            result.gap * 100.0,
            result.method,
            result.x,
            result.y,
        );
    }
    Ok(())
}
