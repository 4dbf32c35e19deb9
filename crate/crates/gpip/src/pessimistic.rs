//! Deterministic rounding via a pessimistic estimator.
//!
//! The estimator upper-bounds the conditional probability that the sampled
//! solution hits any bad event (a violated row or a low objective) given a
//! partial fixing. Rounding fixes all `y` variables first and then all `x`
//! variables, in index order; each variable is set to 1 when the estimator
//! stays below 1 under that fixing and to 0 otherwise. Keeping the value
//! below 1 all the way down certifies that the final point avoids every bad
//! event, so it is feasible and its objective is at least
//! `mu_obj * (1 - delta_obj)`.
//!
//! Per-row terms are conditional moment-generating-function bounds with
//! clipping at 1; a coupling row combines exact zero-probabilities with an
//! MGF term, mirroring how its tail bound splits on whether the row's
//! right-hand side is zero. The total is
//! `3 - prod(1-h0) - prod(1-h1) - prod(1-h2) + h_obj`.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{relax, solve_lp, LpSolution, LpStatus};
use crate::model::{
    check_feasible, normalize, objective, BinarySolution, GpipInstance, RawInstance,
};
use crate::rounding::{
    best_of_trials, default_beta, deviation_params, scale, DeviationParams, RoundingParams,
    ScaledSolution,
};

const INF_BASE_EPS: f64 = 1e-12;
/// Calibration accepts a root only comfortably inside the certificate
/// region, so re-evaluation noise cannot flip it back above 1.
const CERTIFY_MARGIN: f64 = 1.0 - 1e-6;

/// A partial fixing. All `y` variables are rounded before any `x` variable,
/// so `fixed_x` may be nonempty only once `fixed_y` covers the whole block.
#[derive(Clone, Debug, Default)]
pub struct Prefix {
    pub fixed_y: Vec<bool>,
    pub fixed_x: Vec<bool>,
}

impl Prefix {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn check(&self, m: usize, k: usize) -> Result<()> {
        if self.fixed_y.len() > k || self.fixed_x.len() > m {
            return Err(Error::DimensionMismatch(format!(
                "prefix fixes ({}, {}) variables, instance has ({m}, {k})",
                self.fixed_x.len(),
                self.fixed_y.len()
            )));
        }
        if !self.fixed_x.is_empty() && self.fixed_y.len() != k {
            return Err(Error::Domain(
                "x variables may be fixed only after every y variable".into(),
            ));
        }
        Ok(())
    }
}

/// Per-row clipped estimates and their combination.
#[derive(Clone, Debug)]
pub struct EstimatorBreakdown {
    pub coupling_terms: Vec<f64>,
    pub packing_x_terms: Vec<f64>,
    pub packing_y_terms: Vec<f64>,
    pub objective_term: f64,
    pub total: f64,
}

/// Conditional expectation of `(1 + delta)^(sum coeffs*X - threshold)` for
/// independent Bernoulli `X`, with the first `fixed.len()` variables pinned.
///
/// Factorizes as `(1+delta)^(-threshold) * (1+delta)^(fixed part) * prod
/// over free variables of (1 - p + p (1+delta)^coef)`, evaluated in log
/// space. An infinite `delta` arises for rows whose support carries no
/// probability mass; the value is then the exact indicator of the fixed
/// part against the threshold.
pub fn mgf_upper(
    coeffs: &[f64],
    probs: &[f64],
    delta: f64,
    threshold: f64,
    fixed: &[bool],
) -> Result<f64> {
    if delta <= -1.0 {
        return Err(Error::Domain(format!(
            "mgf_upper needs delta > -1, got {delta}"
        )));
    }
    if delta.is_infinite() {
        let fixed_sum: f64 = coeffs
            .iter()
            .zip(fixed)
            .map(|(c, &v)| if v { *c } else { 0.0 })
            .sum();
        if coeffs
            .iter()
            .zip(probs)
            .skip(fixed.len())
            .any(|(&c, &p)| c > 0.0 && p > 0.0)
        {
            return Ok(f64::INFINITY);
        }
        return Ok(indicator_against(fixed_sum, threshold));
    }
    let base_log = delta.ln_1p();
    let mut acc = -threshold * base_log;
    for (j, &c) in coeffs.iter().enumerate() {
        if j < fixed.len() {
            if fixed[j] {
                acc += c * base_log;
            }
        } else if c > 0.0 {
            let p = probs[j];
            if p > 0.0 {
                acc += (1.0 - p + p * (c * base_log).exp()).ln();
            }
        }
    }
    Ok(acc.exp())
}

fn indicator_against(fixed_sum: f64, threshold: f64) -> f64 {
    if fixed_sum > threshold + INF_BASE_EPS {
        f64::INFINITY
    } else if fixed_sum < threshold - INF_BASE_EPS {
        0.0
    } else {
        1.0
    }
}

/// Conditional expectation of `(1-delta)^(c1'X + c2'Y - threshold)`, the
/// lower-deviation analogue of [`mgf_upper`] over both blocks jointly.
/// Requires `0 < delta < 1` so the base stays in `(0, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn mgf_lower(
    coeffs_x: &[f64],
    coeffs_y: &[f64],
    probs_x: &[f64],
    probs_y: &[f64],
    delta: f64,
    threshold: f64,
    prefix: &Prefix,
) -> Result<f64> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain(format!(
            "mgf_lower needs delta in (0, 1), got {delta}"
        )));
    }
    let base_log = (1.0 - delta).ln();
    let mut acc = -threshold * base_log;
    let mut block = |coeffs: &[f64], probs: &[f64], fixed: &[bool]| {
        for (j, &c) in coeffs.iter().enumerate() {
            if j < fixed.len() {
                if fixed[j] {
                    acc += c * base_log;
                }
            } else if c > 0.0 {
                let p = probs[j];
                if p > 0.0 {
                    acc += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
        }
    };
    block(coeffs_y, probs_y, &prefix.fixed_y);
    block(coeffs_x, probs_x, &prefix.fixed_x);
    Ok(acc.exp())
}

/// `P(row sum = 0 | prefix)`: zero when a fixed support variable is 1,
/// otherwise the product of `1 - p` over free support variables.
pub fn zero_prob(coeffs: &[f64], probs: &[f64], fixed: &[bool]) -> f64 {
    let mut acc = 1.0;
    for (j, &c) in coeffs.iter().enumerate() {
        if c <= 0.0 {
            continue;
        }
        if j < fixed.len() {
            if fixed[j] {
                return 0.0;
            }
        } else {
            acc *= 1.0 - probs[j];
        }
    }
    acc
}

/// Evaluates the estimator at a prefix.
pub fn estimator(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    dev: &DeviationParams,
    prefix: &Prefix,
) -> Result<EstimatorBreakdown> {
    let dims = instance.dims();
    prefix.check(dims.x_vars, dims.y_vars)?;

    let mut packing_x_terms = Vec::with_capacity(dims.x_packing_rows);
    for i in 0..dims.x_packing_rows {
        let delta = dev.delta_packing_x[i];
        let threshold = if delta.is_finite() {
            dev.mu_packing_x[i] * (1.0 + delta)
        } else {
            instance.packing_x_rhs[i]
        };
        let h = mgf_upper(
            instance.packing_x.row(i),
            &scaled.x_probs,
            delta,
            threshold,
            &prefix.fixed_x,
        )?;
        packing_x_terms.push(h.min(1.0));
    }

    let mut packing_y_terms = Vec::with_capacity(dims.y_packing_rows);
    for i in 0..dims.y_packing_rows {
        let delta = dev.delta_packing_y[i];
        let threshold = if delta.is_finite() {
            dev.mu_packing_y[i] * (1.0 + delta)
        } else {
            instance.packing_y_rhs[i]
        };
        let h = mgf_upper(
            instance.packing_y.row(i),
            &scaled.y_probs,
            delta,
            threshold,
            &prefix.fixed_y,
        )?;
        packing_y_terms.push(h.min(1.0));
    }

    let mut coupling_terms = Vec::with_capacity(dims.coupling_rows);
    for i in 0..dims.coupling_rows {
        let zp_b = zero_prob(instance.coupling_y.row(i), &scaled.y_probs, &prefix.fixed_y);
        let zp_a = zero_prob(instance.coupling_x.row(i), &scaled.x_probs, &prefix.fixed_x);
        let mut term = zp_b * (1.0 - zp_a);
        if zp_b < 1.0 {
            let delta = dev.delta_coupling[i];
            // A negative deviation means the MGF form is not an upper
            // bound; the only sound estimate is 1.
            let mgf = if delta < 0.0 {
                f64::INFINITY
            } else {
                let threshold = if delta.is_finite() {
                    dev.mu_coupling[i] * (1.0 + delta)
                } else {
                    dev.coupling_min_rhs[i]
                };
                mgf_upper(
                    instance.coupling_x.row(i),
                    &scaled.x_probs,
                    delta,
                    threshold,
                    &prefix.fixed_x,
                )?
            };
            term += (1.0 - zp_b) * mgf;
        }
        coupling_terms.push(term.min(1.0));
    }

    let objective_term = if dev.objective_vacuous {
        0.0
    } else {
        mgf_lower(
            &instance.objective_x,
            &instance.objective_y,
            &scaled.x_probs,
            &scaled.y_probs,
            dev.delta_objective,
            dev.mu_objective * (1.0 - dev.delta_objective),
            prefix,
        )?
    };

    let prod = |terms: &[f64]| terms.iter().fold(1.0, |acc, &h| acc * (1.0 - h));
    let total = 3.0
        - prod(&coupling_terms)
        - prod(&packing_x_terms)
        - prod(&packing_y_terms)
        + objective_term;

    Ok(EstimatorBreakdown {
        coupling_terms,
        packing_x_terms,
        packing_y_terms,
        objective_term,
        total,
    })
}

/// Reconstructs deviation parameters from the scaled solution alone; the
/// unscaled LP optimum is `alpha * x'` and `gamma * y'` by construction.
fn dev_from_scaled(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    params: &RoundingParams,
) -> DeviationParams {
    let x_hat: Vec<f64> = scaled.x_probs.iter().map(|p| p * params.alpha).collect();
    let y_hat: Vec<f64> = scaled.y_probs.iter().map(|p| p * params.gamma).collect();
    let z_star = instance
        .objective_x
        .iter()
        .zip(&x_hat)
        .map(|(c, v)| c * v)
        .sum::<f64>()
        + instance
            .objective_y
            .iter()
            .zip(&y_hat)
            .map(|(c, v)| c * v)
            .sum::<f64>();
    let lp = LpSolution {
        x_hat,
        y_hat,
        objective_value: z_star,
        status: LpStatus::Optimal,
    };
    deviation_params(instance, scaled, &lp, params)
}

// ---------------------------------------------------------------------------
// Incremental evaluation engine
// ---------------------------------------------------------------------------

/// Log-space state of one MGF row.
#[derive(Clone, Copy, Debug)]
enum RowMgf {
    Finite { log_val: f64, base_log: f64 },
    /// Support carries no probability mass; track the fixed part exactly.
    InfBase { fixed_sum: f64, threshold: f64 },
    /// Negative deviation; pinned at 1.
    ForcedOne,
}

impl RowMgf {
    fn value(&self) -> f64 {
        match *self {
            RowMgf::Finite { log_val, .. } => log_val.exp(),
            RowMgf::InfBase {
                fixed_sum,
                threshold,
            } => indicator_against(fixed_sum, threshold),
            RowMgf::ForcedOne => 1.0,
        }
    }

    fn fix(&mut self, coef: f64, value: bool, prob: f64) {
        match self {
            RowMgf::Finite { log_val, base_log } => {
                if value {
                    *log_val += coef * *base_log;
                }
                if coef > 0.0 && prob > 0.0 {
                    *log_val -= (1.0 - prob + prob * (coef * *base_log).exp()).ln();
                }
            }
            RowMgf::InfBase { fixed_sum, .. } => {
                if value {
                    *fixed_sum += coef;
                }
            }
            RowMgf::ForcedOne => {}
        }
    }
}

/// Running product `prod (1 - p)` over the free support of one row, robust
/// to exact-zero factors.
#[derive(Clone, Copy, Debug, Default)]
struct ZeroProbState {
    log_sum: f64,
    zero_factors: u32,
    fixed_one: bool,
}

impl ZeroProbState {
    fn init(coeffs: &[f64], probs: &[f64]) -> Self {
        let mut state = Self::default();
        for (&c, &p) in coeffs.iter().zip(probs) {
            if c > 0.0 {
                if 1.0 - p <= 0.0 {
                    state.zero_factors += 1;
                } else {
                    state.log_sum += (1.0 - p).ln();
                }
            }
        }
        state
    }

    fn value(&self) -> f64 {
        if self.fixed_one || self.zero_factors > 0 {
            0.0
        } else {
            self.log_sum.exp()
        }
    }

    fn fix(&mut self, value: bool, prob: f64) {
        if 1.0 - prob <= 0.0 {
            self.zero_factors -= 1;
        } else {
            self.log_sum -= (1.0 - prob).ln();
        }
        if value {
            self.fixed_one = true;
        }
    }
}

#[derive(Clone, Copy)]
enum RowRef {
    PackX(usize),
    PackY(usize),
    CouplingZeroB(usize),
    CouplingZeroA(usize),
    CouplingMgf(usize),
    Objective,
}

enum RowSnapshot {
    Mgf(RowMgf),
    Zero(ZeroProbState),
}

struct Undo {
    entries: Vec<(RowRef, RowSnapshot)>,
}

/// Incrementally maintained estimator over a growing prefix. Fixing one
/// variable touches only the rows whose support contains it.
struct Engine<'a> {
    instance: &'a GpipInstance,
    scaled: &'a ScaledSolution,
    pack_x: Vec<RowMgf>,
    pack_y: Vec<RowMgf>,
    coupling_zero_b: Vec<ZeroProbState>,
    coupling_zero_a: Vec<ZeroProbState>,
    coupling_mgf: Vec<RowMgf>,
    objective_row: Option<RowMgf>,
    /// Rows touched by each x / y variable.
    x_pack_adj: Vec<Vec<u32>>,
    x_coupling_adj: Vec<Vec<u32>>,
    y_pack_adj: Vec<Vec<u32>>,
    y_coupling_adj: Vec<Vec<u32>>,
}

impl<'a> Engine<'a> {
    fn new(
        instance: &'a GpipInstance,
        scaled: &'a ScaledSolution,
        dev: &DeviationParams,
    ) -> Result<Self> {
        let dims = instance.dims();

        let init_mgf = |coeffs: &[f64], probs: &[f64], delta: f64, rhs: f64, mu: f64| -> RowMgf {
            if delta < 0.0 {
                return RowMgf::ForcedOne;
            }
            if delta.is_infinite() {
                return RowMgf::InfBase {
                    fixed_sum: 0.0,
                    threshold: rhs,
                };
            }
            let base_log = delta.ln_1p();
            let threshold = mu * (1.0 + delta);
            let mut log_val = -threshold * base_log;
            for (&c, &p) in coeffs.iter().zip(probs) {
                if c > 0.0 && p > 0.0 {
                    log_val += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
            RowMgf::Finite { log_val, base_log }
        };

        let mut pack_x = Vec::with_capacity(dims.x_packing_rows);
        for i in 0..dims.x_packing_rows {
            pack_x.push(init_mgf(
                instance.packing_x.row(i),
                &scaled.x_probs,
                dev.delta_packing_x[i],
                instance.packing_x_rhs[i],
                dev.mu_packing_x[i],
            ));
        }
        let mut pack_y = Vec::with_capacity(dims.y_packing_rows);
        for i in 0..dims.y_packing_rows {
            pack_y.push(init_mgf(
                instance.packing_y.row(i),
                &scaled.y_probs,
                dev.delta_packing_y[i],
                instance.packing_y_rhs[i],
                dev.mu_packing_y[i],
            ));
        }
        let mut coupling_zero_b = Vec::with_capacity(dims.coupling_rows);
        let mut coupling_zero_a = Vec::with_capacity(dims.coupling_rows);
        let mut coupling_mgf = Vec::with_capacity(dims.coupling_rows);
        for i in 0..dims.coupling_rows {
            coupling_zero_b.push(ZeroProbState::init(
                instance.coupling_y.row(i),
                &scaled.y_probs,
            ));
            coupling_zero_a.push(ZeroProbState::init(
                instance.coupling_x.row(i),
                &scaled.x_probs,
            ));
            coupling_mgf.push(init_mgf(
                instance.coupling_x.row(i),
                &scaled.x_probs,
                dev.delta_coupling[i],
                dev.coupling_min_rhs[i],
                dev.mu_coupling[i],
            ));
        }

        let objective_row = if dev.objective_vacuous {
            None
        } else {
            let delta = dev.delta_objective;
            if !(0.0 < delta && delta < 1.0) {
                return Err(Error::Domain(format!(
                    "objective deviation {delta} outside (0, 1); no estimator exists"
                )));
            }
            let base_log = (1.0 - delta).ln();
            let threshold = dev.mu_objective * (1.0 - delta);
            let mut log_val = -threshold * base_log;
            for (&c, &p) in instance.objective_y.iter().zip(&scaled.y_probs) {
                if c > 0.0 && p > 0.0 {
                    log_val += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
            for (&c, &p) in instance.objective_x.iter().zip(&scaled.x_probs) {
                if c > 0.0 && p > 0.0 {
                    log_val += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
            Some(RowMgf::Finite { log_val, base_log })
        };

        let mut x_pack_adj = vec![Vec::new(); dims.x_vars];
        let mut x_coupling_adj = vec![Vec::new(); dims.x_vars];
        for i in 0..dims.x_packing_rows {
            for (j, &c) in instance.packing_x.row(i).iter().enumerate() {
                if c > 0.0 {
                    x_pack_adj[j].push(i as u32);
                }
            }
        }
        for i in 0..dims.coupling_rows {
            for (j, &c) in instance.coupling_x.row(i).iter().enumerate() {
                if c > 0.0 {
                    x_coupling_adj[j].push(i as u32);
                }
            }
        }
        let mut y_pack_adj = vec![Vec::new(); dims.y_vars];
        let mut y_coupling_adj = vec![Vec::new(); dims.y_vars];
        for i in 0..dims.y_packing_rows {
            for (j, &c) in instance.packing_y.row(i).iter().enumerate() {
                if c > 0.0 {
                    y_pack_adj[j].push(i as u32);
                }
            }
        }
        for i in 0..dims.coupling_rows {
            for (j, &c) in instance.coupling_y.row(i).iter().enumerate() {
                if c > 0.0 {
                    y_coupling_adj[j].push(i as u32);
                }
            }
        }

        Ok(Self {
            instance,
            scaled,
            pack_x,
            pack_y,
            coupling_zero_b,
            coupling_zero_a,
            coupling_mgf,
            objective_row,
            x_pack_adj,
            x_coupling_adj,
            y_pack_adj,
            y_coupling_adj,
        })
    }

    fn fix_y(&mut self, j: usize, value: bool) -> Undo {
        let prob = self.scaled.y_probs[j];
        let mut entries = Vec::new();
        for &i in &self.y_pack_adj[j] {
            let i = i as usize;
            entries.push((RowRef::PackY(i), RowSnapshot::Mgf(self.pack_y[i])));
            let coef = self.instance.packing_y.get(i, j);
            self.pack_y[i].fix(coef, value, prob);
        }
        for &i in &self.y_coupling_adj[j] {
            let i = i as usize;
            entries.push((
                RowRef::CouplingZeroB(i),
                RowSnapshot::Zero(self.coupling_zero_b[i]),
            ));
            self.coupling_zero_b[i].fix(value, prob);
        }
        let coef = self.instance.objective_y[j];
        if coef > 0.0 {
            if let Some(row) = self.objective_row.as_mut() {
                entries.push((RowRef::Objective, RowSnapshot::Mgf(*row)));
                row.fix(coef, value, prob);
            }
        }
        Undo { entries }
    }

    fn fix_x(&mut self, j: usize, value: bool) -> Undo {
        let prob = self.scaled.x_probs[j];
        let mut entries = Vec::new();
        for &i in &self.x_pack_adj[j] {
            let i = i as usize;
            entries.push((RowRef::PackX(i), RowSnapshot::Mgf(self.pack_x[i])));
            let coef = self.instance.packing_x.get(i, j);
            self.pack_x[i].fix(coef, value, prob);
        }
        for &i in &self.x_coupling_adj[j] {
            let i = i as usize;
            entries.push((
                RowRef::CouplingZeroA(i),
                RowSnapshot::Zero(self.coupling_zero_a[i]),
            ));
            self.coupling_zero_a[i].fix(value, prob);
            entries.push((
                RowRef::CouplingMgf(i),
                RowSnapshot::Mgf(self.coupling_mgf[i]),
            ));
            let coef = self.instance.coupling_x.get(i, j);
            self.coupling_mgf[i].fix(coef, value, prob);
        }
        let coef = self.instance.objective_x[j];
        if coef > 0.0 {
            if let Some(row) = self.objective_row.as_mut() {
                entries.push((RowRef::Objective, RowSnapshot::Mgf(*row)));
                row.fix(coef, value, prob);
            }
        }
        Undo { entries }
    }

    fn revert(&mut self, undo: Undo) {
        for (row, snapshot) in undo.entries.into_iter().rev() {
            match (row, snapshot) {
                (RowRef::PackX(i), RowSnapshot::Mgf(s)) => self.pack_x[i] = s,
                (RowRef::PackY(i), RowSnapshot::Mgf(s)) => self.pack_y[i] = s,
                (RowRef::CouplingMgf(i), RowSnapshot::Mgf(s)) => self.coupling_mgf[i] = s,
                (RowRef::Objective, RowSnapshot::Mgf(s)) => self.objective_row = Some(s),
                (RowRef::CouplingZeroB(i), RowSnapshot::Zero(s)) => self.coupling_zero_b[i] = s,
                (RowRef::CouplingZeroA(i), RowSnapshot::Zero(s)) => self.coupling_zero_a[i] = s,
                _ => unreachable!("snapshot kind matches its row"),
            }
        }
    }

    fn total(&self) -> f64 {
        let mut prod_coupling = 1.0;
        for i in 0..self.coupling_mgf.len() {
            let zb = self.coupling_zero_b[i].value();
            let za = self.coupling_zero_a[i].value();
            let mut term = zb * (1.0 - za);
            if zb < 1.0 {
                term += (1.0 - zb) * self.coupling_mgf[i].value();
            }
            prod_coupling *= 1.0 - term.min(1.0);
        }
        let mut prod_x = 1.0;
        for row in &self.pack_x {
            prod_x *= 1.0 - row.value().min(1.0);
        }
        let mut prod_y = 1.0;
        for row in &self.pack_y {
            prod_y *= 1.0 - row.value().min(1.0);
        }
        let obj = self.objective_row.as_ref().map_or(0.0, RowMgf::value);
        3.0 - prod_coupling - prod_x - prod_y + obj
    }
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Sparse row supports and fixed dot products reused across the thousands
/// of root evaluations a calibration run makes. Instance matrices are
/// dense, but compiled planning instances are mostly zeros; iterating
/// supports makes one evaluation proportional to the nonzero count.
struct RootWorkspace<'a> {
    instance: &'a GpipInstance,
    lp: &'a LpSolution,
    coupling_x_rows: Vec<Vec<(u32, f64)>>,
    coupling_y_rows: Vec<Vec<(u32, f64)>>,
    packing_x_rows: Vec<Vec<(u32, f64)>>,
    packing_y_rows: Vec<Vec<(u32, f64)>>,
    objective_x_support: Vec<(u32, f64)>,
    objective_y_support: Vec<(u32, f64)>,
    coupling_min_rhs: Vec<f64>,
    /// Row dots with the unscaled LP optimum; the scaled mean is one
    /// divide away for any `(alpha, gamma)`.
    coupling_dot: Vec<f64>,
    packing_x_dot: Vec<f64>,
    packing_y_dot: Vec<f64>,
    objective_x_dot: f64,
    objective_y_dot: f64,
}

fn support(row: &[f64]) -> Vec<(u32, f64)> {
    row.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0.0)
        .map(|(j, &c)| (j as u32, c))
        .collect()
}

impl<'a> RootWorkspace<'a> {
    fn new(instance: &'a GpipInstance, lp: &'a LpSolution) -> Self {
        let dims = instance.dims();
        let rows_of = |m: &crate::matrix::Matrix| -> Vec<Vec<(u32, f64)>> {
            (0..m.rows()).map(|i| support(m.row(i))).collect()
        };
        let coupling_x_rows = rows_of(&instance.coupling_x);
        let coupling_y_rows = rows_of(&instance.coupling_y);
        let packing_x_rows = rows_of(&instance.packing_x);
        let packing_y_rows = rows_of(&instance.packing_y);
        let dot = |rows: &[Vec<(u32, f64)>], v: &[f64]| -> Vec<f64> {
            rows.iter()
                .map(|row| row.iter().map(|&(j, c)| c * v[j as usize]).sum())
                .collect()
        };
        Self {
            coupling_dot: dot(&coupling_x_rows, &lp.x_hat),
            packing_x_dot: dot(&packing_x_rows, &lp.x_hat),
            packing_y_dot: dot(&packing_y_rows, &lp.y_hat),
            coupling_min_rhs: (0..dims.coupling_rows)
                .map(|i| crate::model::min_positive(instance.coupling_y.row(i)))
                .collect(),
            objective_x_dot: instance
                .objective_x
                .iter()
                .zip(&lp.x_hat)
                .map(|(c, v)| c * v)
                .sum(),
            objective_y_dot: instance
                .objective_y
                .iter()
                .zip(&lp.y_hat)
                .map(|(c, v)| c * v)
                .sum(),
            objective_x_support: support(&instance.objective_x),
            objective_y_support: support(&instance.objective_y),
            coupling_x_rows,
            coupling_y_rows,
            packing_x_rows,
            packing_y_rows,
            instance,
            lp,
        }
    }

    /// Root MGF value of one packing-style row over its support, matching
    /// [`mgf_upper`] at the empty prefix.
    fn row_mgf(
        row: &[(u32, f64)],
        probs: &[f64],
        divisor: f64,
        mu: f64,
        rhs: f64,
    ) -> f64 {
        if mu <= 0.0 {
            return 0.0; // no mass on the support, the event cannot happen
        }
        let delta = rhs / mu - 1.0;
        if delta < 0.0 {
            return 1.0;
        }
        let base_log = delta.ln_1p();
        let mut acc = -(mu * (1.0 + delta)) * base_log;
        for &(j, c) in row {
            let p = probs[j as usize] / divisor;
            if p > 0.0 {
                acc += (1.0 - p + p * (c * base_log).exp()).ln();
            }
        }
        acc.exp()
    }

    /// Root estimator total for `(alpha, gamma)`; agrees with
    /// [`estimator`] at [`Prefix::root`] to floating-point noise.
    fn root_total(&self, params: &RoundingParams) -> Option<f64> {
        let alpha = params.alpha;
        let gamma = params.gamma;
        let x_hat = &self.lp.x_hat;
        let y_hat = &self.lp.y_hat;

        let mut prod_x = 1.0;
        for (i, row) in self.packing_x_rows.iter().enumerate() {
            let mu = self.packing_x_dot[i] / alpha;
            let h = Self::row_mgf(row, x_hat, alpha, mu, self.instance.packing_x_rhs[i]);
            prod_x *= 1.0 - h.min(1.0);
        }
        let mut prod_y = 1.0;
        for (i, row) in self.packing_y_rows.iter().enumerate() {
            let mu = self.packing_y_dot[i] / gamma;
            let h = Self::row_mgf(row, y_hat, gamma, mu, self.instance.packing_y_rhs[i]);
            prod_y *= 1.0 - h.min(1.0);
        }
        let mut prod_coupling = 1.0;
        for (i, row) in self.coupling_x_rows.iter().enumerate() {
            let zp_b: f64 = self.coupling_y_rows[i]
                .iter()
                .map(|&(j, _)| 1.0 - y_hat[j as usize] / gamma)
                .product();
            let zp_a: f64 = row
                .iter()
                .map(|&(j, _)| 1.0 - x_hat[j as usize] / alpha)
                .product();
            let mut term = zp_b * (1.0 - zp_a);
            if zp_b < 1.0 {
                let mu = self.coupling_dot[i] / alpha;
                term += (1.0 - zp_b)
                    * Self::row_mgf(row, x_hat, alpha, mu, self.coupling_min_rhs[i]);
            }
            prod_coupling *= 1.0 - term.min(1.0);
        }

        let z_star = self.lp.objective_value;
        let objective_term = if z_star <= 0.0 {
            0.0
        } else {
            let mu = self.objective_x_dot / alpha + self.objective_y_dot / gamma;
            if mu <= 0.0 {
                return None;
            }
            let delta = z_star / (alpha * params.beta * mu);
            if !(0.0 < delta && delta < 1.0) {
                return None;
            }
            let base_log = (1.0 - delta).ln();
            let mut acc = -(mu * (1.0 - delta)) * base_log;
            for &(j, c) in &self.objective_y_support {
                let p = y_hat[j as usize] / gamma;
                if p > 0.0 {
                    acc += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
            for &(j, c) in &self.objective_x_support {
                let p = x_hat[j as usize] / alpha;
                if p > 0.0 {
                    acc += (1.0 - p + p * (c * base_log).exp()).ln();
                }
            }
            acc.exp()
        };

        Some(3.0 - prod_coupling - prod_x - prod_y + objective_term)
    }
}

/// Grid search limits for [`calibrate_with`].
#[derive(Clone, Copy, Debug)]
pub struct CalibrateOptions {
    /// Hard cap on estimator evaluations.
    pub max_evaluations: usize,
    /// Multiplicative grid step for `gamma` and `p`.
    pub grid_step: f64,
    /// Smallest `gamma` and `p` considered.
    pub grid_floor: f64,
    /// Upper clamp on the computed grid limit.
    pub grid_cap: f64,
    /// Bisection steps refining `alpha` at the best feasible `p`.
    pub bisection_iters: usize,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 10_000,
            grid_step: 1.05,
            grid_floor: 1.01,
            grid_cap: 1e6,
            bisection_iters: 30,
        }
    }
}

/// A certified parameter choice: the root estimator value sits below 1.
#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub params: RoundingParams,
    pub root_value: f64,
    pub evaluations: usize,
}

/// Searches `(gamma, p)` on a multiplicative grid for the smallest `alpha =
/// p * gamma` whose root estimator value is below 1, then refines `alpha` by
/// bisection at the best `p`. `beta` is pinned at `1 - sqrt(2)/sqrt(3)`.
///
/// The root value computed during the search is itself the certificate;
/// `None` means no grid point certified.
pub fn calibrate(instance: &GpipInstance, lp: &LpSolution) -> Option<Calibration> {
    calibrate_with(instance, lp, &CalibrateOptions::default())
}

pub fn calibrate_with(
    instance: &GpipInstance,
    lp: &LpSolution,
    opts: &CalibrateOptions,
) -> Option<Calibration> {
    let beta = default_beta();
    let z_star = lp.objective_value;
    let s_x: f64 = instance
        .objective_x
        .iter()
        .zip(&lp.x_hat)
        .map(|(c, v)| c * v)
        .sum();
    let s_y: f64 = instance
        .objective_y
        .iter()
        .zip(&lp.y_hat)
        .map(|(c, v)| c * v)
        .sum();
    let vacuous = z_star <= 0.0;

    let dims = instance.dims();
    let size_base = dims
        .coupling_rows
        .max(dims.x_packing_rows)
        .max(dims.y_packing_rows)
        .max(2) as f64;
    let mut min_rhs = f64::INFINITY;
    for i in 0..dims.coupling_rows {
        let b = crate::model::min_positive(instance.coupling_y.row(i));
        if b.is_finite() {
            min_rhs = min_rhs.min(b);
        }
    }
    for &u in &instance.packing_x_rhs {
        min_rhs = min_rhs.min(u);
    }
    for &v in &instance.packing_y_rhs {
        min_rhs = min_rhs.min(v);
    }
    if !min_rhs.is_finite() {
        min_rhs = 1.0;
    }
    min_rhs = min_rhs.max(0.05);
    let grid_max = (10.0 * size_base.powf(1.0 / min_rhs)).clamp(opts.grid_floor * 2.0, opts.grid_cap);

    // The objective deviation must land in (0, 1), which bounds p below:
    // beta (s_x + p s_y) > z*.
    let p_start = if vacuous {
        opts.grid_floor
    } else if s_y > 1e-15 {
        let needed = (z_star / beta - s_x) / s_y;
        if needed > opts.grid_floor {
            // First grid point at or above the requirement.
            let steps = ((needed / opts.grid_floor).ln() / opts.grid_step.ln()).ceil();
            opts.grid_floor * opts.grid_step.powf(steps.max(0.0))
        } else {
            opts.grid_floor
        }
    } else {
        // No y-objective mass: delta_obj = 1/beta > 1 for every p.
        return None;
    };

    let mut evaluations = 0usize;
    let mut best: Option<(f64, f64, f64)> = None; // (gamma, p, root)

    let workspace = RootWorkspace::new(instance, lp);
    let try_point = |gamma: f64, p: f64, evaluations: &mut usize| -> Option<f64> {
        let alpha = p * gamma;
        let params = RoundingParams::new(alpha, gamma, beta).ok()?;
        if !vacuous {
            let mu_obj = s_x / alpha + s_y / gamma;
            if mu_obj <= 0.0 {
                return None;
            }
            let delta_obj = z_star / (alpha * beta * mu_obj);
            if !(0.0 < delta_obj && delta_obj < 1.0) {
                return None;
            }
        }
        *evaluations += 1;
        workspace.root_total(&params)
    };

    let mut gamma = opts.grid_floor;
    'outer: while gamma <= grid_max {
        if let Some((bg, bp, _)) = best {
            if gamma * opts.grid_floor >= bg * bp {
                break; // every alpha from here on is worse
            }
        }
        let mut p = p_start;
        while p <= grid_max {
            if let Some((bg, bp, _)) = best {
                if p * gamma >= bg * bp {
                    break;
                }
            }
            if evaluations >= opts.max_evaluations {
                break 'outer;
            }
            if let Some(root) = try_point(gamma, p, &mut evaluations) {
                if root < CERTIFY_MARGIN {
                    best = Some((gamma, p, root));
                    break; // larger p only increases alpha
                }
            }
            p *= opts.grid_step;
        }
        gamma *= opts.grid_step;
    }

    let (mut best_gamma, best_p, mut best_root) = best?;

    // Bisection on gamma (hence alpha) at the winning p.
    let mut lo = opts.grid_floor;
    let mut hi = best_gamma;
    for _ in 0..opts.bisection_iters {
        if evaluations >= opts.max_evaluations || hi / lo < 1.0 + 1e-6 {
            break;
        }
        let mid = (lo * hi).sqrt();
        match try_point(mid, best_p, &mut evaluations) {
            Some(root) if root < CERTIFY_MARGIN => {
                hi = mid;
                best_gamma = mid;
                best_root = root;
            }
            _ => lo = mid,
        }
    }

    let params = RoundingParams::new(best_p * best_gamma, best_gamma, beta)
        .expect("grid points satisfy the parameter domain");
    Some(Calibration {
        params,
        root_value: best_root,
        evaluations,
    })
}

// ---------------------------------------------------------------------------
// Deterministic rounding
// ---------------------------------------------------------------------------

/// Runs the greedy rounding mechanics and reports the estimator value after
/// every fixing (index 0 is the root value). Does not require the root to
/// be certified; [`derandomized_round`] adds that contract.
pub fn derandomize_path(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    params: &RoundingParams,
) -> Result<(BinarySolution, Vec<f64>)> {
    let dims = instance.dims();
    let dev = dev_from_scaled(instance, scaled, params);
    let mut engine = Engine::new(instance, scaled, &dev)?;

    let mut trace = Vec::with_capacity(dims.x_vars + dims.y_vars + 1);
    trace.push(engine.total());

    let mut y = vec![0u8; dims.y_vars];
    for j in 0..dims.y_vars {
        let prob = scaled.y_probs[j];
        let value = if prob <= 0.0 {
            engine.fix_y(j, false);
            false
        } else if prob >= 1.0 {
            engine.fix_y(j, true);
            true
        } else {
            let undo = engine.fix_y(j, true);
            if engine.total() < 1.0 {
                true
            } else {
                engine.revert(undo);
                engine.fix_y(j, false);
                false
            }
        };
        y[j] = u8::from(value);
        trace.push(engine.total());
    }

    let mut x = vec![0u8; dims.x_vars];
    for j in 0..dims.x_vars {
        let prob = scaled.x_probs[j];
        let value = if prob <= 0.0 {
            engine.fix_x(j, false);
            false
        } else if prob >= 1.0 {
            engine.fix_x(j, true);
            true
        } else {
            let undo = engine.fix_x(j, true);
            if engine.total() < 1.0 {
                true
            } else {
                engine.revert(undo);
                engine.fix_x(j, false);
                false
            }
        };
        x[j] = u8::from(value);
        trace.push(engine.total());
    }

    Ok((BinarySolution { x, y }, trace))
}

/// Deterministic rounding: requires a certified root (estimator below 1)
/// and returns a solution avoiding every bad event, hence feasible with
/// objective at least `mu_obj * (1 - delta_obj)` in normalized units.
pub fn derandomized_round(
    instance: &GpipInstance,
    scaled: &ScaledSolution,
    params: &RoundingParams,
) -> Result<BinarySolution> {
    let (solution, trace) = derandomize_path(instance, scaled, params)?;
    let root = trace[0];
    if root >= 1.0 {
        return Err(Error::RootNotCertified(root));
    }
    // Verify the endpoint with a fresh evaluation; incremental drift or a
    // monotonicity breach would surface here.
    let dims = instance.dims();
    let dev = dev_from_scaled(instance, scaled, params);
    let full = Prefix {
        fixed_y: solution.y.iter().map(|&b| b == 1).collect(),
        fixed_x: solution.x.iter().map(|&b| b == 1).collect(),
    };
    let final_total = estimator(instance, scaled, &dev, &full)?.total;
    if final_total >= 1.0 {
        let first_bad = trace.iter().position(|&t| t >= 1.0).unwrap_or(trace.len());
        return Err(Error::DerandomizationFailed {
            value: final_total,
            variable: format!("step {first_bad} of {}", dims.x_vars + dims.y_vars),
        });
    }
    debug_assert!(
        check_feasible(instance, &solution)
            .map(|r| r.feasible)
            .unwrap_or(false),
        "a certified endpoint avoids every constraint violation"
    );
    Ok(solution)
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    /// Calibrated estimator rounding.
    Deterministic,
    /// Sampled rounding with repair.
    Randomized,
    /// Requested deterministic, fell back to sampling (no certificate).
    RandomizedFallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Deterministic,
    Randomized,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Sample count for the randomized method and the fallback.
    pub trials: u32,
    pub seed: u64,
    /// Explicit `(alpha, gamma)` instead of calibration.
    pub manual_params: Option<(f64, f64)>,
    /// Fall back to sampled rounding when no certificate exists.
    pub allow_fallback: bool,
    pub calibrate: CalibrateOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::Deterministic,
            trials: 64,
            seed: 0,
            manual_params: None,
            allow_fallback: true,
            calibrate: CalibrateOptions::default(),
        }
    }
}

/// Outcome of the full pipeline, in the caller's (raw) units.
#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub objective: f64,
    pub lp_bound: f64,
    /// `1 - objective / lp_bound`; 0 with `zero_objective` set when the
    /// bound is 0.
    pub gap: f64,
    pub zero_objective: bool,
    pub method: MethodTag,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub root_value: Option<f64>,
    pub wall_ms: f64,
}

/// Normalize, relax, solve, calibrate, round; falls back to sampled
/// rounding with repair when no certificate exists.
pub fn solve(raw: &RawInstance) -> Result<SolveResult> {
    solve_with(raw, &SolveOptions::default())
}

pub fn solve_with(raw: &RawInstance, opts: &SolveOptions) -> Result<SolveResult> {
    let (instance, record) = normalize(raw)?;
    let mut result = solve_prepared(&instance, opts)?;
    let expanded = record.expand_solution(&BinarySolution {
        x: result.x,
        y: result.y,
    });
    result.x = expanded.x;
    result.y = expanded.y;
    result.objective *= record.objective_scale;
    result.lp_bound *= record.objective_scale;
    Ok(result)
}

/// Pipeline over an already-normalized instance; the solution stays in the
/// instance's own column space.
pub fn solve_prepared(instance: &GpipInstance, opts: &SolveOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let lp = relax(instance);
    let lp_sol = solve_lp(&lp)?;
    if lp_sol.status != LpStatus::Optimal {
        return Err(Error::Domain(
            "relaxation reported infeasible, yet the zero solution is always feasible".into(),
        ));
    }

    let fallback = |tag: MethodTag,
                    alpha: f64,
                    gamma: f64,
                    root: Option<f64>|
     -> Result<(BinarySolution, MethodTag, Option<RoundingParams>, Option<f64>)> {
        let scaled = ScaledSolution::from_divisors(&lp_sol, alpha, gamma)?;
        let sol = best_of_trials(instance, &scaled, opts.trials, opts.seed);
        Ok((sol, tag, None, root))
    };

    let (solution, tag, params, root_value) = match opts.method {
        SolveMethod::Randomized => {
            let (alpha, gamma) = opts.manual_params.unwrap_or((2.0, 2.0));
            fallback(MethodTag::Randomized, alpha, gamma, None)?
        }
        SolveMethod::Deterministic => {
            let calibration = match opts.manual_params {
                Some((alpha, gamma)) => {
                    let params = RoundingParams::new(alpha, gamma, default_beta())?;
                    let scaled = scale(&lp_sol, &params);
                    let dev = deviation_params(instance, &scaled, &lp_sol, &params);
                    let root = estimator(instance, &scaled, &dev, &Prefix::root())
                        .map(|b| b.total)
                        .unwrap_or(f64::INFINITY);
                    if root < 1.0 {
                        Some(Calibration {
                            params,
                            root_value: root,
                            evaluations: 1,
                        })
                    } else {
                        None
                    }
                }
                None => calibrate_with(instance, &lp_sol, &opts.calibrate),
            };
            match calibration {
                Some(cal) => {
                    let scaled = scale(&lp_sol, &cal.params);
                    match derandomized_round(instance, &scaled, &cal.params) {
                        Ok(sol) => (
                            sol,
                            MethodTag::Deterministic,
                            Some(cal.params),
                            Some(cal.root_value),
                        ),
                        Err(Error::DerandomizationFailed { .. }) if opts.allow_fallback => {
                            fallback(
                                MethodTag::RandomizedFallback,
                                2.0,
                                2.0,
                                Some(cal.root_value),
                            )?
                        }
                        Err(e) => return Err(e),
                    }
                }
                None if opts.allow_fallback => {
                    fallback(MethodTag::RandomizedFallback, 2.0, 2.0, None)?
                }
                None => return Err(Error::NoCertificate),
            }
        }
    };

    let report = check_feasible(instance, &solution)?;
    if !report.feasible {
        return Err(Error::Domain(format!(
            "internal: rounded solution violates {} rows",
            report.violated_rows.len()
        )));
    }
    let value = objective(instance, &solution)?;
    let lp_bound = lp_sol.objective_value;
    let zero_objective = lp_bound <= 0.0;
    let gap = if zero_objective {
        0.0
    } else {
        1.0 - value / lp_bound
    };

    let (alpha, gamma, beta) = match (&params, tag) {
        (Some(p), _) => (Some(p.alpha), Some(p.gamma), Some(p.beta)),
        (None, MethodTag::Randomized | MethodTag::RandomizedFallback) => {
            let (a, g) = opts.manual_params.unwrap_or((2.0, 2.0));
            (Some(a), Some(g), None)
        }
        _ => (None, None, None),
    };

    Ok(SolveResult {
        x: solution.x,
        y: solution.y,
        objective: value,
        lp_bound,
        gap,
        zero_objective,
        method: tag,
        alpha,
        gamma,
        beta,
        root_value,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
