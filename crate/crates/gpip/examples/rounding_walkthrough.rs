//! The randomized pipeline, one stage at a time: relax, scale, inspect the
//! tail bounds, sample, repair, and compare Monte-Carlo frequencies with
//! the closed-form bounds.
//!
//!     cargo run --release --example rounding_walkthrough

use gpip::lp::{relax, solve_lp};
use gpip::matrix::Matrix;
use gpip::model::{check_feasible, normalize, objective, RawInstance};
use gpip::rounding::{
    best_of_trials, deviation_params, event_probability_bounds, sample_round, scale,
    RoundingParams,
};

fn main() -> gpip::Result<()> {
    let mut raw = RawInstance {
        name: Some("walkthrough".into()),
        coupling_x: Matrix::from_rows(vec![vec![0.1, 0.1, 0.0, 0.1]]).unwrap(),
        coupling_y: Matrix::from_rows(vec![vec![1.0, 0.9, 1.0, 0.0, 0.9, 1.0]]).unwrap(),
        packing_x: Matrix::from_rows(vec![vec![0.9, 1.0, 0.8, 0.7]]).unwrap(),
        packing_x_rhs: vec![2.0],
        packing_y: Matrix::from_rows(vec![vec![1.0; 6]]).unwrap(),
        packing_y_rhs: vec![3.0],
        objective_x: vec![0.1, 0.15, 0.1, 0.05],
        objective_y: vec![1.0, 0.95, 0.9, 1.0, 0.85, 0.9],
    };
    raw.check_dims()?;
    let (instance, _) = normalize(&raw)?;

    let lp = solve_lp(&relax(&instance))?;
    println!("LP bound {:.4}, x_hat {:?}", lp.objective_value, lp.x_hat);

    let params = RoundingParams::new(9.0, 1.5, gpip::rounding::default_beta())?;
    let scaled = scale(&lp, &params);
    let dev = deviation_params(&instance, &scaled, &lp, &params);
    println!(
        "scaled by alpha = {}, gamma = {}; objective mean {:.4}, deviation {:.4}",
        params.alpha, params.gamma, dev.mu_objective, dev.delta_objective
    );

    let bounds = event_probability_bounds(&instance, &scaled, &lp, &params)?;
    println!(
        "tail bounds: coupling {:?}, packing-x {:?}, packing-y {:?}, objective {:.4}",
        bounds.coupling, bounds.packing_x, bounds.packing_y, bounds.objective
    );

    // Monte-Carlo check of the first packing-x bound.
    let samples = 200_000u32;
    let mut hits = 0u32;
    let mut feasible = 0u32;
    for s in 0..samples {
        let sol = sample_round(&scaled, u64::from(s));
        let x: Vec<f64> = sol.x.iter().map(|&b| f64::from(b)).collect();
        let threshold = dev.mu_packing_x[0] * (1.0 + dev.delta_packing_x[0]);
        if instance.packing_x.row_dot(0, &x) > threshold {
            hits += 1;
        }
        if check_feasible(&instance, &sol)?.feasible {
            feasible += 1;
        }
    }
    println!(
        "packing-x row 1: frequency {:.5} <= bound {:.5}; raw samples feasible {:.1}%",
        f64::from(hits) / f64::from(samples),
        bounds.packing_x[0],
        100.0 * f64::from(feasible) / f64::from(samples),
    );

    let best = best_of_trials(&instance, &scaled, 64, 11);
    println!(
        "best of 64 repaired samples: objective {:.4} (gap {:.1}%)",
        objective(&instance, &best)?,
        100.0 * (1.0 - objective(&instance, &best)? / lp.objective_value),
    );
    Ok(())
}
