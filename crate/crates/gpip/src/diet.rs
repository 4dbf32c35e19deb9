//! Multi-period meal planning lowered to GPIP form.
//!
//! The planning model covers `N` periods. Integer variables count recipes
//! cooked (`x`) and ingredient packages purchased (`y`) per period; pantry
//! stock follows `z_n = y_n + y_{n-1} - P x_{n-1}` with `x_0 = y_0 = 0`, so
//! a package bought in period `n` is gone after period `n + 1`. Each period
//! also respects nutrient caps, a prep-time budget, a money budget, and
//! per-recipe repetition caps over the whole horizon.
//!
//! Substituting the stock dynamics into `P x_n <= z_n` yields the coupling
//! rows `P x_n + P x_{n-1} <= y_n + y_{n-1}`, which is exactly the
//! `Ax <= By` block of a GPIP; the remaining constraints are packing rows.
//! Integer variables become binary by unary replication, and the assembled
//! raw instance runs through [`crate::model::normalize`].
//!
//! Portions are counted in package units throughout: the portion matrix
//! divides each recipe's portion draw by the ingredient's package size, so
//! purchases (whole packages) and stock share one unit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{normalize, BinarySolution, GpipInstance, NormalizationRecord, RawInstance};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Ingredient {
    pub name: String,
    /// Currency units per package.
    pub package_cost: f64,
    /// Portions per package.
    pub package_size: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Recipe {
    pub name: String,
    pub prep_minutes: f64,
    /// Portions of each ingredient used, keyed by ingredient name.
    #[serde(default)]
    pub portions_used: BTreeMap<String, f64>,
    /// Nutrient amounts per cooked unit, keyed by nutrient name.
    #[serde(default)]
    pub nutrition: BTreeMap<String, f64>,
    pub preference_weight: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Catalog {
    pub ingredients: Vec<Ingredient>,
    pub recipes: Vec<Recipe>,
}

/// Reads and validates a catalog file.
pub fn load_catalog(path: &Path) -> Result<Catalog> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let catalog: Catalog = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    validate_catalog(&catalog)?;
    Ok(catalog)
}

/// Checks referential integrity and sign constraints.
pub fn validate_catalog(catalog: &Catalog) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for ing in &catalog.ingredients {
        if !seen.insert(ing.name.as_str()) {
            return Err(Error::Catalog(format!("duplicate ingredient '{}'", ing.name)));
        }
        if ing.package_cost < 0.0 {
            return Err(Error::Catalog(format!(
                "ingredient '{}' has negative package_cost",
                ing.name
            )));
        }
        if ing.package_size <= 0.0 {
            return Err(Error::Catalog(format!(
                "ingredient '{}' needs a positive package_size",
                ing.name
            )));
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for recipe in &catalog.recipes {
        if !seen.insert(recipe.name.as_str()) {
            return Err(Error::Catalog(format!("duplicate recipe '{}'", recipe.name)));
        }
        if recipe.prep_minutes < 0.0 || recipe.preference_weight < 0.0 {
            return Err(Error::Catalog(format!(
                "recipe '{}' has a negative quantity",
                recipe.name
            )));
        }
        for (ing_name, &qty) in &recipe.portions_used {
            if qty < 0.0 {
                return Err(Error::Catalog(format!(
                    "recipe '{}' uses a negative amount of '{ing_name}'",
                    recipe.name
                )));
            }
            if !catalog.ingredients.iter().any(|i| &i.name == ing_name) {
                return Err(Error::Catalog(format!(
                    "recipe '{}' references unknown ingredient '{ing_name}'",
                    recipe.name
                )));
            }
        }
        for (nutrient, &qty) in &recipe.nutrition {
            if qty < 0.0 {
                return Err(Error::Catalog(format!(
                    "recipe '{}' has negative nutrient '{nutrient}'",
                    recipe.name
                )));
            }
        }
    }
    Ok(())
}

/// Planning horizon, budgets, caps, and optional utility overrides.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanConfig {
    pub horizon: u32,
    /// Prep-minute budget per period.
    pub time_budget: f64,
    /// Money budget per period.
    pub money_budget: f64,
    /// Per-period caps, keyed by nutrient name.
    #[serde(default)]
    pub nutrient_caps: BTreeMap<String, f64>,
    /// Whole-horizon caps per recipe name; a missing entry defaults to the
    /// horizon length, and 0 excludes the recipe entirely.
    #[serde(default)]
    pub repetition_caps: BTreeMap<String, u32>,
    /// Overrides the preference weights as recipe utilities.
    #[serde(default)]
    pub recipe_utilities: Option<BTreeMap<String, f64>>,
    /// Purchase utilities; default 0 (budget pressure alone limits buying).
    #[serde(default)]
    pub ingredient_utilities: Option<BTreeMap<String, f64>>,
    /// Hard cap on replicas per integer variable; also the only way to
    /// bound purchases of a zero-cost ingredient.
    #[serde(default)]
    pub max_replicas: Option<u32>,
}

/// The assembled per-period data, before binarization.
#[derive(Clone, Debug)]
pub struct DietModel {
    pub horizon: u32,
    pub recipe_names: Vec<String>,
    pub ingredient_names: Vec<String>,
    pub nutrient_names: Vec<String>,
    /// Recipe utilities `v`.
    pub recipe_utility: Vec<f64>,
    /// Ingredient utilities `w`.
    pub ingredient_utility: Vec<f64>,
    /// Package units of each ingredient per cooked recipe (ingredients x
    /// recipes).
    pub portions: Matrix,
    /// Nutrient amounts (nutrients x recipes).
    pub nutrition: Matrix,
    pub nutrient_caps: Vec<f64>,
    pub repetition_caps: Vec<u32>,
    pub prep_minutes: Vec<f64>,
    pub time_budget: f64,
    pub package_costs: Vec<f64>,
    pub money_budget: f64,
    pub max_replicas: Option<u32>,
}

/// Builds the model, wiring utilities and caps by name.
pub fn build_model(catalog: &Catalog, config: &PlanConfig) -> Result<DietModel> {
    validate_catalog(catalog)?;
    if config.horizon < 1 {
        return Err(Error::Model("horizon must be at least 1".into()));
    }
    if config.time_budget <= 0.0 || config.money_budget <= 0.0 {
        return Err(Error::Model("time and money budgets must be positive".into()));
    }
    for (name, &cap) in &config.nutrient_caps {
        if cap <= 0.0 {
            return Err(Error::Model(format!("nutrient cap '{name}' must be positive")));
        }
    }

    let recipe_names: Vec<String> = catalog.recipes.iter().map(|r| r.name.clone()).collect();
    let ingredient_names: Vec<String> =
        catalog.ingredients.iter().map(|i| i.name.clone()).collect();
    let nutrient_names: Vec<String> = config.nutrient_caps.keys().cloned().collect();

    let lookup = |map: &Option<BTreeMap<String, f64>>, name: &str| -> Option<f64> {
        map.as_ref().and_then(|m| m.get(name).copied())
    };

    let mut recipe_utility = Vec::with_capacity(catalog.recipes.len());
    for recipe in &catalog.recipes {
        let v = lookup(&config.recipe_utilities, &recipe.name).unwrap_or(recipe.preference_weight);
        if v < 0.0 {
            return Err(Error::Model(format!(
                "recipe utility for '{}' is negative; utilities must be nonnegative",
                recipe.name
            )));
        }
        recipe_utility.push(v);
    }
    let mut ingredient_utility = Vec::with_capacity(catalog.ingredients.len());
    for ing in &catalog.ingredients {
        let w = lookup(&config.ingredient_utilities, &ing.name).unwrap_or(0.0);
        if w < 0.0 {
            return Err(Error::Model(format!(
                "ingredient utility for '{}' is negative; set it to 0 and let the \
                 budget constraint limit purchases",
                ing.name
            )));
        }
        ingredient_utility.push(w);
    }

    for name in config.repetition_caps.keys() {
        if !recipe_names.iter().any(|r| r == name) {
            return Err(Error::Model(format!(
                "repetition cap references unknown recipe '{name}'"
            )));
        }
    }
    let repetition_caps: Vec<u32> = catalog
        .recipes
        .iter()
        .map(|r| {
            config
                .repetition_caps
                .get(&r.name)
                .copied()
                .unwrap_or(config.horizon)
        })
        .collect();

    let mut portions = Matrix::zeros(catalog.ingredients.len(), catalog.recipes.len());
    for (r, recipe) in catalog.recipes.iter().enumerate() {
        for (ing_name, &qty) in &recipe.portions_used {
            let i = catalog
                .ingredients
                .iter()
                .position(|ing| &ing.name == ing_name)
                .expect("validated above");
            portions.set(i, r, qty / catalog.ingredients[i].package_size);
        }
    }

    let mut nutrition = Matrix::zeros(nutrient_names.len(), catalog.recipes.len());
    for (v, nutrient) in nutrient_names.iter().enumerate() {
        for (r, recipe) in catalog.recipes.iter().enumerate() {
            if let Some(&amount) = recipe.nutrition.get(nutrient) {
                nutrition.set(v, r, amount);
            }
        }
    }

    Ok(DietModel {
        horizon: config.horizon,
        recipe_utility,
        ingredient_utility,
        portions,
        nutrition,
        nutrient_caps: nutrient_names
            .iter()
            .map(|n| config.nutrient_caps[n])
            .collect(),
        nutrient_names,
        repetition_caps,
        prep_minutes: catalog.recipes.iter().map(|r| r.prep_minutes).collect(),
        time_budget: config.time_budget,
        package_costs: catalog.ingredients.iter().map(|i| i.package_cost).collect(),
        money_budget: config.money_budget,
        max_replicas: config.max_replicas,
        recipe_names,
        ingredient_names,
    })
}

/// Per-variable replica counts from the implied integer bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinarizedModel {
    /// Per-period replicas for each recipe.
    pub x_bounds: Vec<u32>,
    /// Per-period replicas for each ingredient.
    pub y_bounds: Vec<u32>,
}

fn floor_ratio(budget: f64, unit: f64) -> u32 {
    ((budget / unit) + 1e-9).floor().max(0.0) as u32
}

/// Derives replica counts: a recipe is bounded by its repetition cap, the
/// time budget, and every nutrient cap it consumes; an ingredient by the
/// money budget. A zero-cost ingredient has no implied bound and needs
/// `max_replicas`.
pub fn binarize(model: &DietModel) -> Result<BinarizedModel> {
    let recipes = model.recipe_names.len();
    let mut x_bounds = Vec::with_capacity(recipes);
    for r in 0..recipes {
        let mut bound = model.repetition_caps[r];
        if model.prep_minutes[r] > 0.0 {
            bound = bound.min(floor_ratio(model.time_budget, model.prep_minutes[r]));
        }
        for v in 0..model.nutrient_names.len() {
            let amount = model.nutrition.get(v, r);
            if amount > 0.0 {
                bound = bound.min(floor_ratio(model.nutrient_caps[v], amount));
            }
        }
        if let Some(cap) = model.max_replicas {
            bound = bound.min(cap);
        }
        x_bounds.push(bound);
    }

    let mut y_bounds = Vec::with_capacity(model.ingredient_names.len());
    for i in 0..model.ingredient_names.len() {
        let cost = model.package_costs[i];
        let bound = if cost > 0.0 {
            let implied = floor_ratio(model.money_budget, cost);
            match model.max_replicas {
                Some(cap) => implied.min(cap),
                None => implied,
            }
        } else {
            model.max_replicas.ok_or_else(|| Error::UnboundedVariable {
                kind: "ingredient",
                name: model.ingredient_names[i].clone(),
            })?
        };
        y_bounds.push(bound);
    }

    Ok(BinarizedModel { x_bounds, y_bounds })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VariableKind {
    Recipe,
    Ingredient,
}

/// Where a GPIP column came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VarRole {
    pub kind: VariableKind,
    /// 1-based period.
    pub period: u32,
    /// Index into the catalog's recipe or ingredient list.
    pub index: usize,
    pub replica: u32,
}

/// Column-to-role map for the compiled instance; replicas of one variable
/// are contiguous.
#[derive(Clone, Debug, Default)]
pub struct VariableMap {
    pub x_roles: Vec<VarRole>,
    pub y_roles: Vec<VarRole>,
}

/// The lowered instance plus everything needed to decode solutions.
#[derive(Clone, Debug)]
pub struct CompiledDiet {
    pub instance: GpipInstance,
    pub variable_map: VariableMap,
    pub record: NormalizationRecord,
}

/// Lowers the model: coupling rows `P x_n + P x_{n-1} <= y_n + y_{n-1}` per
/// period and ingredient, packing rows for nutrients, prep time, horizon
/// repetition caps, and the per-period money budget, then normalizes.
pub fn compile(model: &DietModel) -> Result<CompiledDiet> {
    let binarized = binarize(model)?;
    let n_periods = model.horizon as usize;
    let recipes = model.recipe_names.len();
    let ingredients = model.ingredient_names.len();

    // Column layout: period-major, catalog order, replicas contiguous.
    let mut x_roles = Vec::new();
    for period in 1..=n_periods as u32 {
        for r in 0..recipes {
            for replica in 0..binarized.x_bounds[r] {
                x_roles.push(VarRole {
                    kind: VariableKind::Recipe,
                    period,
                    index: r,
                    replica,
                });
            }
        }
    }
    let mut y_roles = Vec::new();
    for period in 1..=n_periods as u32 {
        for i in 0..ingredients {
            for replica in 0..binarized.y_bounds[i] {
                y_roles.push(VarRole {
                    kind: VariableKind::Ingredient,
                    period,
                    index: i,
                    replica,
                });
            }
        }
    }
    let m = x_roles.len();
    let k = y_roles.len();

    // Coupling block: one row per (period, ingredient).
    let mut a_rows = Vec::with_capacity(n_periods * ingredients);
    let mut b_rows = Vec::with_capacity(n_periods * ingredients);
    for period in 1..=n_periods as u32 {
        for i in 0..ingredients {
            let mut a_row = vec![0.0; m];
            for (col, role) in x_roles.iter().enumerate() {
                if role.period == period || role.period + 1 == period {
                    a_row[col] = model.portions.get(i, role.index);
                }
            }
            let mut b_row = vec![0.0; k];
            for (col, role) in y_roles.iter().enumerate() {
                if role.index == i && (role.period == period || role.period + 1 == period) {
                    b_row[col] = 1.0;
                }
            }
            a_rows.push(a_row);
            b_rows.push(b_row);
        }
    }

    // Packing rows on x: per-period nutrients, per-period prep time, and
    // whole-horizon repetition caps.
    let mut u_rows = Vec::new();
    let mut u_rhs = Vec::new();
    for period in 1..=n_periods as u32 {
        for v in 0..model.nutrient_names.len() {
            let mut row = vec![0.0; m];
            for (col, role) in x_roles.iter().enumerate() {
                if role.period == period {
                    row[col] = model.nutrition.get(v, role.index);
                }
            }
            u_rows.push(row);
            u_rhs.push(model.nutrient_caps[v]);
        }
        let mut row = vec![0.0; m];
        for (col, role) in x_roles.iter().enumerate() {
            if role.period == period {
                row[col] = model.prep_minutes[role.index];
            }
        }
        u_rows.push(row);
        u_rhs.push(model.time_budget);
    }
    for r in 0..recipes {
        // An excluded recipe has no columns; skip its vacuous cap row.
        if model.repetition_caps[r] == 0 || binarized.x_bounds[r] == 0 {
            continue;
        }
        let mut row = vec![0.0; m];
        for (col, role) in x_roles.iter().enumerate() {
            if role.index == r {
                row[col] = 1.0;
            }
        }
        u_rows.push(row);
        u_rhs.push(f64::from(model.repetition_caps[r]));
    }

    // Packing rows on y: per-period money budget.
    let mut v_rows = Vec::new();
    let mut v_rhs = Vec::new();
    for period in 1..=n_periods as u32 {
        let mut row = vec![0.0; k];
        for (col, role) in y_roles.iter().enumerate() {
            if role.period == period {
                row[col] = model.package_costs[role.index];
            }
        }
        v_rows.push(row);
        v_rhs.push(model.money_budget);
    }

    let objective_x: Vec<f64> = x_roles
        .iter()
        .map(|role| model.recipe_utility[role.index])
        .collect();
    let objective_y: Vec<f64> = y_roles
        .iter()
        .map(|role| model.ingredient_utility[role.index])
        .collect();

    let mut raw = RawInstance {
        name: Some(format!("diet-{}x{}-N{}", recipes, ingredients, model.horizon)),
        coupling_x: Matrix::from_rows(a_rows).map_err(Error::Model)?,
        coupling_y: Matrix::from_rows(b_rows).map_err(Error::Model)?,
        packing_x: Matrix::from_rows(u_rows).map_err(Error::Model)?,
        packing_y: Matrix::from_rows(v_rows).map_err(Error::Model)?,
        packing_x_rhs: u_rhs,
        packing_y_rhs: v_rhs,
        objective_x,
        objective_y,
    };
    raw.check_dims()?;
    let (instance, record) = normalize(&raw)?;

    let variable_map = VariableMap {
        x_roles: record.kept_x.iter().map(|&j| x_roles[j]).collect(),
        y_roles: record.kept_y.iter().map(|&j| y_roles[j]).collect(),
    };
    Ok(CompiledDiet {
        instance,
        variable_map,
        record,
    })
}

/// One period of the decoded plan. Leftovers are in package units and may
/// be fractional.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PeriodPlan {
    pub recipe_counts: Vec<u32>,
    pub purchases: Vec<u32>,
    pub leftovers: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PlanTotals {
    pub prep_minutes: f64,
    pub money_spent: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MealPlan {
    pub recipes: Vec<String>,
    pub ingredients: Vec<String>,
    pub periods: Vec<PeriodPlan>,
    pub totals: PlanTotals,
}

/// Sums replicas back into integer counts and replays the stock recursion
/// `z_n = y_n + y_{n-1} - P x_{n-1}`.
pub fn decode(
    vmap: &VariableMap,
    sol: &BinarySolution,
    model: &DietModel,
) -> Result<MealPlan> {
    if sol.x.len() != vmap.x_roles.len() || sol.y.len() != vmap.y_roles.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution has ({}, {}) entries, map expects ({}, {})",
            sol.x.len(),
            sol.y.len(),
            vmap.x_roles.len(),
            vmap.y_roles.len()
        )));
    }
    let n_periods = model.horizon as usize;
    let recipes = model.recipe_names.len();
    let ingredients = model.ingredient_names.len();

    let mut recipe_counts = vec![vec![0u32; recipes]; n_periods];
    for (role, &bit) in vmap.x_roles.iter().zip(&sol.x) {
        recipe_counts[role.period as usize - 1][role.index] += u32::from(bit);
    }
    let mut purchases = vec![vec![0u32; ingredients]; n_periods];
    for (role, &bit) in vmap.y_roles.iter().zip(&sol.y) {
        purchases[role.period as usize - 1][role.index] += u32::from(bit);
    }

    let mut periods = Vec::with_capacity(n_periods);
    let mut prev_stock_in = vec![0.0f64; ingredients]; // y_{n-1}
    let mut prev_usage = vec![0.0f64; ingredients]; // P x_{n-1}
    let mut prep_minutes = 0.0;
    let mut money_spent = 0.0;
    let mut objective = 0.0;
    for n in 0..n_periods {
        let x_n: Vec<f64> = recipe_counts[n].iter().map(|&c| f64::from(c)).collect();
        let y_n: Vec<f64> = purchases[n].iter().map(|&c| f64::from(c)).collect();
        let leftovers: Vec<f64> = (0..ingredients)
            .map(|i| y_n[i] + prev_stock_in[i] - prev_usage[i])
            .collect();
        prep_minutes += model
            .prep_minutes
            .iter()
            .zip(&x_n)
            .map(|(t, c)| t * c)
            .sum::<f64>();
        money_spent += model
            .package_costs
            .iter()
            .zip(&y_n)
            .map(|(b, c)| b * c)
            .sum::<f64>();
        objective += model
            .recipe_utility
            .iter()
            .zip(&x_n)
            .map(|(v, c)| v * c)
            .sum::<f64>()
            + model
                .ingredient_utility
                .iter()
                .zip(&y_n)
                .map(|(w, c)| w * c)
                .sum::<f64>();
        prev_usage = (0..ingredients)
            .map(|i| model.portions.row_dot(i, &x_n))
            .collect();
        prev_stock_in = y_n.clone();
        periods.push(PeriodPlan {
            recipe_counts: recipe_counts[n].clone(),
            purchases: purchases[n].clone(),
            leftovers,
        });
    }

    Ok(MealPlan {
        recipes: model.recipe_names.clone(),
        ingredients: model.ingredient_names.clone(),
        periods,
        totals: PlanTotals {
            prep_minutes,
            money_spent,
            objective,
        },
    })
}
