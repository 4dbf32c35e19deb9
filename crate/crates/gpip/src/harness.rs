//! Synthetic catalogs and the gap/runtime experiment grid.
//!
//! Catalogs come in three sizes (20 recipes / 10 ingredients, 300 / 50, and
//! 2000 / 130) and are generated deterministically from a seed. The runner
//! sweeps horizons, redraws recipe preferences uniformly on (0, 1] per
//! repetition (purchase utilities stay 0), compiles, solves, and aggregates
//! the optimality gap `1 - objective / LP bound` and the wall time per
//! cell. Timing covers normalization, the LP solve, and rounding; catalog
//! generation, model assembly, and serialization stay outside the clock.

use std::fmt;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diet::{build_model, compile, Catalog, Ingredient, PlanConfig, Recipe};
use crate::error::Result;
use crate::lp::{relax, solve_lp};
use crate::model::check_feasible;
use crate::pessimistic::{solve_prepared, SolveMethod, SolveOptions};
use crate::rounding::{sample_round, ScaledSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl SizeClass {
    /// `(recipes, ingredients)`.
    pub fn counts(self) -> (usize, usize) {
        match self {
            SizeClass::Small => (20, 10),
            SizeClass::Medium => (300, 50),
            SizeClass::Large => (2000, 130),
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SizeClass::Small => "small",
            SizeClass::Medium => "medium",
            SizeClass::Large => "large",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SizeClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "small" => Ok(SizeClass::Small),
            "medium" => Ok(SizeClass::Medium),
            "large" => Ok(SizeClass::Large),
            other => Err(format!("unknown size class '{other}'")),
        }
    }
}

fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

/// Deterministic synthetic catalog: prep times 10-120 minutes, package
/// costs 0.5-10, 1-8 ingredients per recipe, preference weights uniform on
/// (0, 1].
pub fn generate_synthetic(size: SizeClass, seed: u64) -> Catalog {
    let (n_recipes, n_ingredients) = size.counts();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let ingredients: Vec<Ingredient> = (0..n_ingredients)
        .map(|i| Ingredient {
            name: format!("ingredient-{i:03}"),
            package_cost: round_to(rng.random_range(0.5..10.0), 2),
            package_size: f64::from(rng.random_range(1..=8u32)),
        })
        .collect();

    let recipes: Vec<Recipe> = (0..n_recipes)
        .map(|r| {
            let used = rng.random_range(1..=8usize.min(n_ingredients));
            let chosen = sample(&mut rng, n_ingredients, used);
            let portions_used = chosen
                .iter()
                .map(|i| {
                    (
                        ingredients[i].name.clone(),
                        round_to(rng.random_range(0.25..3.0), 2),
                    )
                })
                .collect();
            let nutrition = [
                ("calories".to_string(), round_to(rng.random_range(80.0..900.0), 1)),
                ("fat".to_string(), round_to(rng.random_range(1.0..50.0), 1)),
                ("protein".to_string(), round_to(rng.random_range(2.0..60.0), 1)),
            ]
            .into();
            Recipe {
                name: format!("recipe-{r:04}"),
                prep_minutes: round_to(rng.random_range(10.0..120.0), 1),
                portions_used,
                nutrition,
                preference_weight: 1.0 - rng.random::<f64>(),
            }
        })
        .collect();

    Catalog {
        ingredients,
        recipes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentMethod {
    Deterministic,
    Randomized,
    Both,
}

fn default_time_budget() -> f64 {
    600.0
}
fn default_money_budget() -> f64 {
    15.0
}
fn default_repetition_cap() -> u32 {
    3
}
fn default_max_replicas() -> u32 {
    3
}
fn default_trials() -> u32 {
    48
}

/// Experiment grid: one size class, a list of horizons, and a repetition
/// count. Per-period budgets and replica caps keep instances at desk scale;
/// they are configurable because the underlying data pins only the catalog
/// sizes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub size_class: SizeClass,
    pub horizons: Vec<u32>,
    pub repetitions: u32,
    pub seed: u64,
    pub method: ExperimentMethod,
    #[serde(default = "default_time_budget")]
    pub time_budget: f64,
    #[serde(default = "default_money_budget")]
    pub money_budget: f64,
    /// Per-period nutrient caps; empty means the built-in defaults.
    #[serde(default)]
    pub nutrient_caps: std::collections::BTreeMap<String, f64>,
    /// Whole-horizon repetition cap applied to every recipe.
    #[serde(default = "default_repetition_cap")]
    pub repetition_cap: u32,
    #[serde(default = "default_max_replicas")]
    pub max_replicas: u32,
    /// Sample count for the deterministic method's fallback.
    #[serde(default = "default_trials")]
    pub trials: u32,
}

impl ExperimentConfig {
    pub fn new(size_class: SizeClass, horizons: Vec<u32>, repetitions: u32, seed: u64) -> Self {
        Self {
            size_class,
            horizons,
            repetitions,
            seed,
            method: ExperimentMethod::Deterministic,
            time_budget: default_time_budget(),
            money_budget: default_money_budget(),
            nutrient_caps: Default::default(),
            repetition_cap: default_repetition_cap(),
            max_replicas: default_max_replicas(),
            trials: default_trials(),
        }
    }

    fn plan_config(&self, catalog: &Catalog, horizon: u32) -> PlanConfig {
        let nutrient_caps = if self.nutrient_caps.is_empty() {
            [
                ("calories".to_string(), 16_000.0),
                ("fat".to_string(), 900.0),
                ("protein".to_string(), 1_100.0),
            ]
            .into()
        } else {
            self.nutrient_caps.clone()
        };
        PlanConfig {
            horizon,
            time_budget: self.time_budget,
            money_budget: self.money_budget,
            nutrient_caps,
            repetition_caps: catalog
                .recipes
                .iter()
                .map(|r| (r.name.clone(), self.repetition_cap))
                .collect(),
            recipe_utilities: None,
            ingredient_utilities: None,
            max_replicas: Some(self.max_replicas),
        }
    }
}

/// One aggregated cell of the experiment grid.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRow {
    pub size_class: String,
    pub horizon: u32,
    pub gap_mean: f64,
    pub gap_sd: f64,
    pub time_mean_s: f64,
    pub time_sd_s: f64,
    pub feasible_fraction: f64,
    /// Which method produced the row; not part of the CSV contract.
    pub method: &'static str,
    /// Repetitions that errored out; not part of the CSV contract.
    pub failures: u32,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for one (horizon, repetition) cell entry.
fn derive_seed(base: u64, horizon: u32, repetition: u32) -> u64 {
    let mut state = base ^ (u64::from(horizon) << 32) ^ u64::from(repetition);
    splitmix64(&mut state)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the grid. Repetitions redraw recipe preferences uniformly on
/// (0, 1] from per-repetition seeds; failures are counted per cell and the
/// run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let catalog = generate_synthetic(config.size_class, config.seed);
    let methods: &[&'static str] = match config.method {
        ExperimentMethod::Deterministic => &["deterministic"],
        ExperimentMethod::Randomized => &["randomized"],
        ExperimentMethod::Both => &["deterministic", "randomized"],
    };

    let mut rows = Vec::new();
    for &method in methods {
        for &horizon in &config.horizons {
            let mut gaps = Vec::new();
            let mut times = Vec::new();
            let mut feasible = 0u32;
            let mut failures = 0u32;
            for rep in 0..config.repetitions {
                let rep_seed = derive_seed(config.seed, horizon, rep);
                match run_repetition(config, &catalog, horizon, rep_seed, method) {
                    Ok(outcome) => {
                        times.push(outcome.seconds);
                        if outcome.feasible {
                            feasible += 1;
                            gaps.push(outcome.gap);
                        }
                    }
                    Err(err) => {
                        failures += 1;
                        eprintln!(
                            "experiment cell {method}/{}/N{horizon} rep {rep} failed: {err}",
                            config.size_class
                        );
                    }
                }
            }
            let (gap_mean, gap_sd) = mean_sd(&gaps);
            let (time_mean_s, time_sd_s) = mean_sd(&times);
            let attempted = config.repetitions - failures;
            rows.push(ResultRow {
                size_class: config.size_class.to_string(),
                horizon,
                gap_mean,
                gap_sd,
                time_mean_s,
                time_sd_s,
                feasible_fraction: if attempted == 0 {
                    0.0
                } else {
                    f64::from(feasible) / f64::from(attempted)
                },
                method,
                failures,
            });
        }
    }
    Ok(rows)
}

struct RepetitionOutcome {
    gap: f64,
    seconds: f64,
    feasible: bool,
}

fn run_repetition(
    config: &ExperimentConfig,
    catalog: &Catalog,
    horizon: u32,
    rep_seed: u64,
    method: &str,
) -> Result<RepetitionOutcome> {
    // Fresh preferences per repetition, uniform on (0, 1].
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let utilities: std::collections::BTreeMap<String, f64> = catalog
        .recipes
        .iter()
        .map(|r| (r.name.clone(), 1.0 - rng.random::<f64>()))
        .collect();
    let mut plan_config = config.plan_config(catalog, horizon);
    plan_config.recipe_utilities = Some(utilities);

    let model = build_model(catalog, &plan_config)?;
    let compiled = compile(&model)?;
    let instance = &compiled.instance;

    match method {
        "deterministic" => {
            let opts = SolveOptions {
                method: SolveMethod::Deterministic,
                trials: config.trials,
                seed: rep_seed,
                allow_fallback: true,
                ..Default::default()
            };
            let start = Instant::now();
            let result = solve_prepared(instance, &opts)?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(RepetitionOutcome {
                gap: result.gap,
                seconds,
                feasible: true,
            })
        }
        _ => {
            // One raw sample, no repair; feasibility is part of the outcome.
            let start = Instant::now();
            let lp = solve_lp(&relax(instance))?;
            let scaled = ScaledSolution::from_divisors(&lp, 2.0, 2.0)?;
            let sol = sample_round(&scaled, rep_seed);
            let seconds = start.elapsed().as_secs_f64();
            let feasible = check_feasible(instance, &sol)?.feasible;
            let gap = if feasible && lp.objective_value > 0.0 {
                1.0 - crate::model::objective(instance, &sol)? / lp.objective_value
            } else {
                0.0
            };
            Ok(RepetitionOutcome {
                gap,
                seconds,
                feasible,
            })
        }
    }
}

/// CSV with the fixed column set
/// `size,horizon,gap_mean,gap_sd,time_mean_s,time_sd_s,feasible_fraction`.
/// With method `both`, deterministic rows come first, then randomized.
pub fn write_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from("size,horizon,gap_mean,gap_sd,time_mean_s,time_sd_s,feasible_fraction\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            row.size_class,
            row.horizon,
            row.gap_mean,
            row.gap_sd,
            row.time_mean_s,
            row.time_sd_s,
            row.feasible_fraction
        ));
    }
    out
}
