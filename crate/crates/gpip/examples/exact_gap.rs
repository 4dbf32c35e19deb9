//! Exact optima vs LP bounds vs rounded solutions on small random
//! instances: the rounded objective is sandwiched between zero and the
//! exact optimum, which in turn sits below the LP bound.
//!
//!     cargo run --example exact_gap

use gpip::exact::solve_exact;
use gpip::lp::{relax, solve_lp};
use gpip::matrix::Matrix;
use gpip::model::{normalize, RawInstance};
use gpip::pessimistic::{solve_prepared, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> gpip::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2718);
    println!("{:>5} {:>9} {:>9} {:>9} {:>7} {:>6}", "inst", "lp", "exact", "rounded", "nodes", "gap%");
    for round in 0..8 {
        let m = rng.random_range(2..=5usize);
        let k = rng.random_range(2..=5usize);
        let row = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.random::<f64>()).collect()
        };
        let mut raw = RawInstance {
            name: None,
            coupling_x: Matrix::from_rows(vec![row(&mut rng, m)]).unwrap(),
            coupling_y: Matrix::from_rows(vec![row(&mut rng, k)]).unwrap(),
            packing_x: Matrix::from_rows(vec![row(&mut rng, m)]).unwrap(),
            packing_x_rhs: vec![rng.random_range(1.0..2.5)],
            packing_y: Matrix::from_rows(vec![row(&mut rng, k)]).unwrap(),
            packing_y_rhs: vec![rng.random_range(1.0..2.5)],
            objective_x: row(&mut rng, m),
            objective_y: row(&mut rng, k),
        };
        raw.check_dims()?;
        let (instance, _) = normalize(&raw)?;

        let lp = solve_lp(&relax(&instance))?;
        let exact = solve_exact(&instance, 1 << 20);
        let rounded = solve_prepared(&instance, &SolveOptions::default())?;
        println!(
            "{round:>5} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>6.1}",
            lp.objective_value,
            exact.objective,
            rounded.objective,
            exact.nodes_explored,
            rounded.gap * 100.0,
        );
        assert!(rounded.objective <= exact.objective + 1e-9);
        assert!(exact.objective <= lp.objective_value + 1e-9);
    }
    Ok(())
}
