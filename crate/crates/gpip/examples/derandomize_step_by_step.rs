//! Calibrate rounding parameters, then watch the estimator as the
//! deterministic rounding fixes each variable: the value stays below 1 all
//! the way down, which certifies the final solution.
//!
//!     cargo run --example derandomize_step_by_step

use gpip::lp::{relax, solve_lp};
use gpip::matrix::Matrix;
use gpip::model::{check_feasible, normalize, objective, RawInstance};
use gpip::pessimistic::{calibrate, derandomize_path};
use gpip::rounding::{deviation_params, scale};

fn main() -> gpip::Result<()> {
    // Mostly-y objective mass makes this instance certifiable.
    let k = 8;
    let mut raw = RawInstance {
        name: Some("certified-demo".into()),
        coupling_x: Matrix::from_rows(vec![vec![0.2, 0.15, 0.0, 0.1]]).unwrap(),
        coupling_y: Matrix::from_rows(vec![vec![1.0, 0.9, 1.0, 0.95, 0.0, 0.0, 0.9, 1.0]])
            .unwrap(),
        packing_x: Matrix::from_rows(vec![vec![1.0, 0.9, 0.8, 1.0]]).unwrap(),
        packing_x_rhs: vec![2.0],
        packing_y: Matrix::from_rows(vec![vec![1.0; k]]).unwrap(),
        packing_y_rhs: vec![4.0],
        objective_x: vec![0.25, 0.3, 0.2, 0.25],
        objective_y: vec![1.0, 0.9, 0.95, 1.0, 0.85, 0.9, 1.0, 0.95],
    };
    raw.check_dims()?;
    let (instance, _) = normalize(&raw)?;
    let lp = solve_lp(&relax(&instance))?;
    println!("LP bound {:.4}", lp.objective_value);

    let Some(cal) = calibrate(&instance, &lp) else {
        println!("no certificate in the calibration grid");
        return Ok(());
    };
    println!(
        "calibrated alpha = {:.3}, gamma = {:.3} after {} estimator evaluations; \
         root value {:.6} < 1",
        cal.params.alpha, cal.params.gamma, cal.evaluations, cal.root_value
    );

    let scaled = scale(&lp, &cal.params);
    let dev = deviation_params(&instance, &scaled, &lp, &cal.params);
    let (solution, trace) = derandomize_path(&instance, &scaled, &cal.params)?;

    let k_vars = solution.y.len();
    for (step, value) in trace.iter().enumerate() {
        let label = if step == 0 {
            "root".to_string()
        } else if step <= k_vars {
            format!("y{} = {}", step, solution.y[step - 1])
        } else {
            format!("x{} = {}", step - k_vars, solution.x[step - k_vars - 1])
        };
        println!("  {label:>8}: estimator {value:.6}");
    }

    let feasible = check_feasible(&instance, &solution)?.feasible;
    let value = objective(&instance, &solution)?;
    let promise = dev.mu_objective * (1.0 - dev.delta_objective);
    println!(
        "final solution feasible: {feasible}; objective {:.4} >= promised {:.4}",
        value, promise
    );
    Ok(())
}
