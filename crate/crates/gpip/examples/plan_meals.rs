//! Generate a synthetic catalog, compile a two-week planning model into
//! packing form, solve it, and print the decoded meal plan.
//!
//!     cargo run --example plan_meals

use gpip::diet::{build_model, compile, decode, PlanConfig};
use gpip::harness::{generate_synthetic, SizeClass};
use gpip::model::BinarySolution;
use gpip::pessimistic::{solve_prepared, SolveOptions};

fn main() -> gpip::Result<()> {
    let catalog = generate_synthetic(SizeClass::Small, 42);
    let config = PlanConfig {
        horizon: 2,
        time_budget: 360.0,
        money_budget: 20.0,
        nutrient_caps: [
            ("calories".to_string(), 9000.0),
            ("fat".to_string(), 450.0),
            ("protein".to_string(), 600.0),
        ]
        .into(),
        repetition_caps: Default::default(),
        recipe_utilities: None,
        ingredient_utilities: None,
        max_replicas: Some(2),
    };

    let model = build_model(&catalog, &config)?;
    let compiled = compile(&model)?;
    let dims = compiled.instance.dims();
    println!(
        "compiled to {} binary recipe columns, {} purchase columns, {} coupling rows",
        dims.x_vars, dims.y_vars, dims.coupling_rows
    );

    let result = solve_prepared(
        &compiled.instance,
        &SolveOptions {
            trials: 256,
            seed: 5,
            ..Default::default()
        },
    )?;
    let plan = decode(
        &compiled.variable_map,
        &BinarySolution {
            x: result.x.clone(),
            y: result.y.clone(),
        },
        &model,
    )?;

    println!(
        "objective {:.3} (LP bound {:.3}, gap {:.1}%), {:.0} prep minutes, {:.2} spent\n",
        plan.totals.objective,
        result.lp_bound * compiled.record.objective_scale,
        result.gap * 100.0,
        plan.totals.prep_minutes,
        plan.totals.money_spent,
    );

    for (n, period) in plan.periods.iter().enumerate() {
        println!("week {}:", n + 1);
        for (r, &count) in period.recipe_counts.iter().enumerate() {
            if count > 0 {
                println!("  cook {count} x {}", plan.recipes[r]);
            }
        }
        for (i, &count) in period.purchases.iter().enumerate() {
            if count > 0 {
                println!("  buy  {count} x {}", plan.ingredients[i]);
            }
        }
    }
    Ok(())
}
