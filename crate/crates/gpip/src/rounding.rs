//! Scale-and-sample randomized rounding and its deviation-bound machinery.
//!
//! The LP optimum is divided componentwise by `alpha` (x block) and `gamma`
//! (y block); each entry then serves as an independent Bernoulli success
//! probability. Tail bounds on the bad events (a violated row or a low
//! objective) come from the standard multiplicative Chernoff forms
//! [`chernoff_g`] and [`chebyshev_h`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::LpSolution;
use crate::model::{min_positive, BinarySolution, ConstraintFamily, GpipInstance};

/// Scaling and analysis parameters: `alpha = p * gamma` with `p, gamma > 1`,
/// and `beta` in `(0, 1)` controlling the low-objective event.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RoundingParams {
    pub alpha: f64,
    pub gamma: f64,
    pub p: f64,
    pub beta: f64,
}

/// `1 - sqrt(2)/sqrt(3)`, the default objective-deviation constant.
pub fn default_beta() -> f64 {
    1.0 - (2.0f64 / 3.0).sqrt()
}

impl RoundingParams {
    pub fn new(alpha: f64, gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 1.0) || !(alpha > gamma) {
            return Err(Error::Domain(format!(
                "need alpha > gamma > 1, got alpha = {alpha}, gamma = {gamma}"
            )));
        }
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::Domain(format!("beta = {beta} must lie in (0, 1)")));
        }
        let p = alpha / gamma;
        debug_assert!((p * gamma - alpha).abs() <= 1e-12 * alpha.max(1.0));
        Ok(Self {
            alpha,
            gamma,
            p,
            beta,
        })
    }
}

/// Componentwise Bernoulli probabilities for the sampler.
#[derive(Clone, Debug)]
pub struct ScaledSolution {
    pub x_probs: Vec<f64>,
    pub y_probs: Vec<f64>,
}

impl ScaledSolution {
    /// Divides the LP optimum by explicit factors; both must be at least 1
    /// so the quotients stay valid probabilities.
    pub fn from_divisors(lp: &LpSolution, alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !(gamma >= 1.0) {
            return Err(Error::Domain(format!(
                "divisors must be at least 1, got alpha = {alpha}, gamma = {gamma}"
            )));
        }
        Ok(Self {
            x_probs: lp.x_hat.iter().map(|v| (v / alpha).clamp(0.0, 1.0)).collect(),
            y_probs: lp.y_hat.iter().map(|v| (v / gamma).clamp(0.0, 1.0)).collect(),
        })
    }
}

/// `(x_hat / alpha, y_hat / gamma)`.
pub fn scale(lp: &LpSolution, params: &RoundingParams) -> ScaledSolution {
    ScaledSolution::from_divisors(lp, params.alpha, params.gamma)
        .expect("params guarantee divisors above 1")
}

/// Independent Bernoulli draws, all `x` entries in index order and then all
/// `y` entries, from a ChaCha stream seeded with `seed`. The fixed order
/// makes seeds portable.
pub fn sample_round(scaled: &ScaledSolution, seed: u64) -> BinarySolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, p: f64| u8::from(rng.random::<f64>() < p);
    let x = scaled.x_probs.iter().map(|&p| draw(&mut rng, p)).collect();
    let y = scaled.y_probs.iter().map(|&p| draw(&mut rng, p)).collect();
    BinarySolution { x, y }
}

/// `G(mu, delta) = (exp(delta) / (1 + delta)^(1 + delta))^mu`, the upper-tail
/// factor, evaluated in log space.
pub fn chernoff_g(mu: f64, delta: f64) -> Result<f64> {
    if delta <= -1.0 {
        return Err(Error::Domain(format!(
            "chernoff_g needs delta > -1, got {delta}"
        )));
    }
    if delta.is_infinite() {
        return Ok(if mu > 0.0 { 0.0 } else { 1.0 });
    }
    Ok((mu * (delta - (1.0 + delta) * delta.ln_1p())).exp())
}

/// `H(mu, delta) = exp(-mu * delta^2 / 2)`; `delta` enters squared, so
/// negative values are fine.
pub fn chebyshev_h(mu: f64, delta: f64) -> f64 {
    (-mu * delta * delta / 2.0).exp()
}

/// Means and relative deviations of the row sums under the scaled
/// distribution.
///
/// Rows whose support carries no probability mass get `delta = +inf`; such a
/// row cannot produce a bad event, and the estimator treats it as exactly
/// safe rather than erroring.
#[derive(Clone, Debug)]
pub struct DeviationParams {
    pub mu_coupling: Vec<f64>,
    pub delta_coupling: Vec<f64>,
    /// Smallest positive coefficient of each `B` row (`+inf` for all-zero
    /// rows); the threshold the coupling tail bound deviates to.
    pub coupling_min_rhs: Vec<f64>,
    pub mu_packing_x: Vec<f64>,
    pub delta_packing_x: Vec<f64>,
    pub mu_packing_y: Vec<f64>,
    pub delta_packing_y: Vec<f64>,
    pub mu_objective: f64,
    pub delta_objective: f64,
    /// True when the LP objective is zero; the low-objective event is then
    /// vacuous and its estimator term is pinned to 0.
    pub objective_vacuous: bool,
}

/// Computes the mean/deviation pairs for every constraint row and for the
/// objective, given scaled probabilities.
pub fn deviation_params(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    lp: &LpSolution,
    params: &RoundingParams,
) -> DeviationParams {
    let dims = instance.dims();
    debug_assert_eq!(scaled.x_probs.len(), dims.x_vars);
    debug_assert_eq!(scaled.y_probs.len(), dims.y_vars);

    let mut mu_coupling = Vec::with_capacity(dims.coupling_rows);
    let mut delta_coupling = Vec::with_capacity(dims.coupling_rows);
    let mut coupling_min_rhs = Vec::with_capacity(dims.coupling_rows);
    for i in 0..dims.coupling_rows {
        let mu = instance.coupling_x.row_dot(i, &scaled.x_probs);
        let bmin = min_positive(instance.coupling_y.row(i));
        mu_coupling.push(mu);
        coupling_min_rhs.push(bmin);
        delta_coupling.push(if mu > 0.0 { bmin / mu - 1.0 } else { f64::INFINITY });
    }

    let mut mu_packing_x = Vec::with_capacity(dims.x_packing_rows);
    let mut delta_packing_x = Vec::with_capacity(dims.x_packing_rows);
    for i in 0..dims.x_packing_rows {
        let mu = instance.packing_x.row_dot(i, &scaled.x_probs);
        mu_packing_x.push(mu);
        delta_packing_x.push(if mu > 0.0 {
            instance.packing_x_rhs[i] / mu - 1.0
        } else {
            f64::INFINITY
        });
    }

    let mut mu_packing_y = Vec::with_capacity(dims.y_packing_rows);
    let mut delta_packing_y = Vec::with_capacity(dims.y_packing_rows);
    for i in 0..dims.y_packing_rows {
        let mu = instance.packing_y.row_dot(i, &scaled.y_probs);
        mu_packing_y.push(mu);
        delta_packing_y.push(if mu > 0.0 {
            instance.packing_y_rhs[i] / mu - 1.0
        } else {
            f64::INFINITY
        });
    }

    let mu_objective: f64 = instance
        .objective_x
        .iter()
        .zip(&scaled.x_probs)
        .map(|(c, p)| c * p)
        .sum::<f64>()
        + instance
            .objective_y
            .iter()
            .zip(&scaled.y_probs)
            .map(|(c, p)| c * p)
            .sum::<f64>();
    let z_star = lp.objective_value;
    let objective_vacuous = z_star <= 0.0;
    let delta_objective = if objective_vacuous || mu_objective <= 0.0 {
        0.0
    } else {
        z_star / (params.alpha * params.beta * mu_objective)
    };

    DeviationParams {
        mu_coupling,
        delta_coupling,
        coupling_min_rhs,
        mu_packing_x,
        delta_packing_x,
        mu_packing_y,
        delta_packing_y,
        mu_objective,
        delta_objective,
        objective_vacuous,
    }
}

/// Closed-form upper bounds on the probability of each bad event.
#[derive(Clone, Debug)]
pub struct EventBounds {
    /// One bound per coupling row (`A_i'X > B_i'Y`).
    pub coupling: Vec<f64>,
    /// One bound per x-packing row (`U_i'X > u_i`).
    pub packing_x: Vec<f64>,
    /// One bound per y-packing row (`V_i'Y > v_i`).
    pub packing_y: Vec<f64>,
    /// Bound on the low-objective event.
    pub objective: f64,
}

/// Plug-in tail bounds: `G(u_i/alpha, alpha-1)` per x-packing row,
/// `G(v_i/gamma, gamma-1)` per y-packing row, `H(z*/alpha, 1 - 1/beta)` for
/// the objective, and for each coupling row the split
/// `P(B_i'Y = 0) P(A_i'X > 0) + P(B_i'Y > 0) G((B_i)_min/alpha, alpha-1)`
/// with the zero-probabilities computed exactly from the scaled solution.
pub fn event_probability_bounds(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    lp: &LpSolution,
    params: &RoundingParams,
) -> Result<EventBounds> {
    let dims = instance.dims();
    let alpha = params.alpha;
    let gamma = params.gamma;

    let mut packing_x = Vec::with_capacity(dims.x_packing_rows);
    for i in 0..dims.x_packing_rows {
        packing_x.push(chernoff_g(instance.packing_x_rhs[i] / alpha, alpha - 1.0)?);
    }
    let mut packing_y = Vec::with_capacity(dims.y_packing_rows);
    for i in 0..dims.y_packing_rows {
        packing_y.push(chernoff_g(instance.packing_y_rhs[i] / gamma, gamma - 1.0)?);
    }

    let mut coupling = Vec::with_capacity(dims.coupling_rows);
    for i in 0..dims.coupling_rows {
        let zp_b: f64 = instance
            .coupling_y
            .row(i)
            .iter()
            .zip(&scaled.y_probs)
            .filter(|(&b, _)| b > 0.0)
            .map(|(_, &q)| 1.0 - q)
            .product();
        let zp_a: f64 = instance
            .coupling_x
            .row(i)
            .iter()
            .zip(&scaled.x_probs)
            .filter(|(&a, _)| a > 0.0)
            .map(|(_, &p)| 1.0 - p)
            .product();
        let mut bound = zp_b * (1.0 - zp_a);
        if zp_b < 1.0 {
            let bmin = min_positive(instance.coupling_y.row(i));
            bound += (1.0 - zp_b) * chernoff_g(bmin / alpha, alpha - 1.0)?;
        }
        coupling.push(bound);
    }

    let objective = chebyshev_h(lp.objective_value / alpha, 1.0 - 1.0 / params.beta);

    Ok(EventBounds {
        coupling,
        packing_x,
        packing_y,
        objective,
    })
}

/// Greedy feasibility repair: while a row is violated, zero the cheapest
/// variable that appears on its left-hand side (coupling and x-packing rows
/// delete recipes, y-packing rows delete purchases). Terminates because the
/// zero solution is feasible. Row activities are maintained incrementally,
/// so a repair costs one matrix pass plus one column pass per deletion.
pub fn repair(instance: &GpipInstance, sol: &BinarySolution) -> BinarySolution {
    let dims = instance.dims();
    let mut out = sol.clone();
    let xf: Vec<f64> = out.x.iter().map(|&b| f64::from(b)).collect();
    let yf: Vec<f64> = out.y.iter().map(|&b| f64::from(b)).collect();

    let mut ax: Vec<f64> = (0..dims.coupling_rows)
        .map(|i| instance.coupling_x.row_dot(i, &xf))
        .collect();
    let mut by: Vec<f64> = (0..dims.coupling_rows)
        .map(|i| instance.coupling_y.row_dot(i, &yf))
        .collect();
    let mut ux: Vec<f64> = (0..dims.x_packing_rows)
        .map(|i| instance.packing_x.row_dot(i, &xf))
        .collect();
    let mut vy: Vec<f64> = (0..dims.y_packing_rows)
        .map(|i| instance.packing_y.row_dot(i, &yf))
        .collect();

    let tol = crate::model::FEASIBILITY_TOL;
    loop {
        // First violated row in family order: coupling, then x, then y.
        let violated = (0..dims.coupling_rows)
            .find(|&i| ax[i] > by[i] + tol)
            .map(|i| (ConstraintFamily::Coupling, i))
            .or_else(|| {
                (0..dims.x_packing_rows)
                    .find(|&i| ux[i] > instance.packing_x_rhs[i] + tol)
                    .map(|i| (ConstraintFamily::PackingX, i))
            })
            .or_else(|| {
                (0..dims.y_packing_rows)
                    .find(|&i| vy[i] > instance.packing_y_rhs[i] + tol)
                    .map(|i| (ConstraintFamily::PackingY, i))
            });
        let Some((family, i)) = violated else {
            return out;
        };

        let (coeffs, weights, values): (&[f64], &[f64], &[u8]) = match family {
            ConstraintFamily::Coupling => {
                (instance.coupling_x.row(i), &instance.objective_x, &out.x)
            }
            ConstraintFamily::PackingX => {
                (instance.packing_x.row(i), &instance.objective_x, &out.x)
            }
            ConstraintFamily::PackingY => {
                (instance.packing_y.row(i), &instance.objective_y, &out.y)
            }
        };
        let victim = coeffs
            .iter()
            .enumerate()
            .filter(|(j, &c)| c > 0.0 && values[*j] == 1)
            .min_by(|(ja, _), (jb, _)| {
                weights[*ja]
                    .partial_cmp(&weights[*jb])
                    .unwrap()
                    .then(ja.cmp(jb))
            })
            .map(|(j, _)| j)
            .expect("a violated row always has an active positive-coefficient variable");

        match family {
            ConstraintFamily::Coupling | ConstraintFamily::PackingX => {
                out.x[victim] = 0;
                for (row, activity) in ax.iter_mut().enumerate() {
                    *activity -= instance.coupling_x.get(row, victim);
                }
                for (row, activity) in ux.iter_mut().enumerate() {
                    *activity -= instance.packing_x.get(row, victim);
                }
            }
            ConstraintFamily::PackingY => {
                out.y[victim] = 0;
                for (row, activity) in by.iter_mut().enumerate() {
                    *activity -= instance.coupling_y.get(row, victim);
                }
                for (row, activity) in vy.iter_mut().enumerate() {
                    *activity -= instance.packing_y.get(row, victim);
                }
            }
        }
    }
}

/// Samples, repairs, and keeps the best of `trials` rounds, with seeds
/// `seed .. seed + trials`. Ties keep the earliest trial.
pub fn best_of_trials(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    trials: u32,
    seed: u64,
) -> BinarySolution {
    assert!(trials >= 1, "need at least one trial");
    let mut best: Option<(f64, BinarySolution)> = None;
    for t in 0..u64::from(trials) {
        let candidate = repair(instance, &sample_round(scaled, seed.wrapping_add(t)));
        let value = crate::model::objective(instance, &candidate)
            .expect("sampled solution matches instance dimensions");
        if best.as_ref().is_none_or(|(bv, _)| value > *bv) {
            best = Some((value, candidate));
        }
    }
    best.expect("at least one trial ran").1
}
