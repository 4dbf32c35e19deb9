//! LP relaxation of GPIP instances and a dense, deterministic simplex.
//!
//! The solver is a bounded-variable primal simplex on a dense tableau.
//! Pricing is steepest-coefficient (Dantzig) with lowest-index tie-breaks;
//! after a run of degenerate pivots it switches to Bland's rule until
//! progress resumes, which rules out cycling. Ties in the ratio test break
//! by lowest basic-variable index, so repeated solves pivot identically.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::GpipInstance;

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-11;
const BLAND_TRIGGER: usize = 40;

/// A maximization LP with `<=` rows and boxed variables.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Dense constraint rows; every row is a `<=` inequality.
    pub constraint_matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Per-variable `(lower, upper)` bounds.
    pub bounds: Vec<(f64, f64)>,
    /// Leading variables belong to the `x` block, the rest to `y`.
    pub x_split: usize,
    pub name: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Fractional optimum of the relaxation, split back into the two blocks.
#[derive(Clone, Debug, Serialize)]
pub struct LpSolution {
    pub x_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
}

impl LpSolution {
    pub fn infeasible() -> Self {
        Self {
            x_hat: Vec::new(),
            y_hat: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            status: LpStatus::Infeasible,
        }
    }
}

/// Builds the LP relaxation: `Ax - By <= 0`, `Ux <= u`, `Vy <= v`, and
/// boxes `0 <= x, y <= 1`.
///
/// The box upper bounds make every scaled entry a valid Bernoulli
/// probability downstream; plain nonnegativity would not.
pub fn relax(instance: &GpipInstance) -> LinearProgram {
    let dims = instance.dims();
    let m = dims.x_vars;
    let k = dims.y_vars;
    let total = m + k;

    let mut rows = Vec::with_capacity(dims.coupling_rows + dims.x_packing_rows + dims.y_packing_rows);
    let mut rhs = Vec::with_capacity(rows.capacity());

    for i in 0..dims.coupling_rows {
        let mut row = vec![0.0; total];
        row[..m].copy_from_slice(instance.coupling_x.row(i));
        for (j, &b) in instance.coupling_y.row(i).iter().enumerate() {
            row[m + j] = -b;
        }
        rows.push(row);
        rhs.push(0.0);
    }
    for i in 0..dims.x_packing_rows {
        let mut row = vec![0.0; total];
        row[..m].copy_from_slice(instance.packing_x.row(i));
        rows.push(row);
        rhs.push(instance.packing_x_rhs[i]);
    }
    for i in 0..dims.y_packing_rows {
        let mut row = vec![0.0; total];
        row[m..].copy_from_slice(instance.packing_y.row(i));
        rows.push(row);
        rhs.push(instance.packing_y_rhs[i]);
    }

    let mut objective = Vec::with_capacity(total);
    objective.extend_from_slice(&instance.objective_x);
    objective.extend_from_slice(&instance.objective_y);

    LinearProgram {
        objective,
        constraint_matrix: rows,
        rhs,
        bounds: vec![(0.0, 1.0); total],
        x_split: m,
        name: instance.name.clone(),
    }
}

/// Solves the LP to a vertex optimum.
///
/// Relaxations built by [`relax`] always admit the zero solution, so an
/// `Infeasible` status can only arise for hand-built programs.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let values = match simplex(lp)? {
        SimplexOutcome::Optimal(values) => values,
        SimplexOutcome::Infeasible => return Ok(LpSolution::infeasible()),
    };
    let objective_value = lp
        .objective
        .iter()
        .zip(&values)
        .map(|(c, v)| c * v)
        .sum();
    let split = lp.x_split.min(values.len());
    Ok(LpSolution {
        x_hat: values[..split].to_vec(),
        y_hat: values[split..].to_vec(),
        objective_value,
        status: LpStatus::Optimal,
    })
}

/// Largest violation of the relaxed system at a fractional point; used by
/// tests and debug assertions.
pub fn relaxed_residual(lp: &LinearProgram, values: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (row, &b) in lp.constraint_matrix.iter().zip(&lp.rhs) {
        let lhs: f64 = row.iter().zip(values).map(|(a, v)| a * v).sum();
        worst = worst.max(lhs - b);
    }
    for (&(lo, hi), &v) in lp.bounds.iter().zip(values) {
        worst = worst.max(lo - v).max(v - hi);
    }
    worst
}

/// Plain-text dump of the program for cross-checking with other solvers.
pub fn write_lp_text(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let name = lp.name.as_deref().unwrap_or("gpip-lp");
    let _ = writeln!(out, "NAME {name}");
    let _ = writeln!(out, "MAXIMIZE");
    let mut line = String::from(" obj:");
    for (j, c) in lp.objective.iter().enumerate() {
        if *c != 0.0 {
            let _ = write!(line, " {c:+.12} v{j}");
        }
    }
    let _ = writeln!(out, "{line}");
    let _ = writeln!(out, "SUBJECT TO");
    for (i, (row, b)) in lp.constraint_matrix.iter().zip(&lp.rhs).enumerate() {
        let mut line = format!(" r{i}:");
        for (j, a) in row.iter().enumerate() {
            if *a != 0.0 {
                let _ = write!(line, " {a:+.12} v{j}");
            }
        }
        let _ = writeln!(out, "{line} <= {b:.12}");
    }
    let _ = writeln!(out, "BOUNDS");
    for (j, (lo, hi)) in lp.bounds.iter().enumerate() {
        let _ = writeln!(out, " {lo:.12} <= v{j} <= {hi:.12}");
    }
    out.push_str("END\n");
    out
}

enum SimplexOutcome {
    Optimal(Vec<f64>),
    Infeasible,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

struct Tableau {
    /// Row-major `(rows) x (ncols)` matrix holding `B^-1 A` for every column.
    t: Vec<f64>,
    rows: usize,
    ncols: usize,
    basis: Vec<usize>,
    state: Vec<VarState>,
    /// Current values of the basic variables.
    xb: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Reduced costs for the current basis.
    zrow: Vec<f64>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.ncols + j]
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(row) => self.xb[row],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let ncols = self.ncols;
        let pivot_val = self.at(row, col);
        let start = row * ncols;
        for j in 0..ncols {
            self.t[start + j] /= pivot_val;
        }
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let factor = self.at(i, col);
            if factor != 0.0 {
                let other = i * ncols;
                for j in 0..ncols {
                    self.t[other + j] -= factor * self.t[start + j];
                }
            }
        }
        let zfactor = self.zrow[col];
        if zfactor != 0.0 {
            for j in 0..ncols {
                self.zrow[j] -= zfactor * self.t[start + j];
            }
        }
    }

    /// Recomputes reduced costs for a fresh cost vector over the current
    /// basis (used when switching from phase 1 to phase 2).
    fn price(&mut self, costs: &[f64]) {
        for j in 0..self.ncols {
            let mut z = costs[j];
            for i in 0..self.rows {
                let cb = costs[self.basis[i]];
                if cb != 0.0 {
                    z -= cb * self.at(i, j);
                }
            }
            self.zrow[j] = z;
        }
        for i in 0..self.rows {
            self.zrow[self.basis[i]] = 0.0;
        }
    }
}

enum StepResult {
    Optimal,
    Moved { degenerate: bool },
}

/// One simplex iteration. Returns `Optimal` when no eligible entering
/// column remains.
fn step(tab: &mut Tableau, bland: bool) -> Result<StepResult> {
    // Entering column: positive reduced cost at lower bound, negative at
    // upper bound. Bland mode takes the lowest index; otherwise the largest
    // improvement with lowest-index ties.
    let mut entering: Option<(usize, f64, f64)> = None; // (col, dir, score)
    for j in 0..tab.ncols {
        let (dir, score) = match tab.state[j] {
            VarState::Basic(_) => continue,
            VarState::AtLower => (1.0, tab.zrow[j]),
            VarState::AtUpper => (-1.0, -tab.zrow[j]),
        };
        if score <= REDUCED_COST_TOL {
            continue;
        }
        if tab.upper[j] - tab.lower[j] <= PIVOT_TOL {
            continue; // fixed variable, nothing to move
        }
        if bland {
            entering = Some((j, dir, score));
            break;
        }
        match entering {
            Some((_, _, best)) if best >= score => {}
            _ => entering = Some((j, dir, score)),
        }
    }
    let Some((col, dir, _)) = entering else {
        return Ok(StepResult::Optimal);
    };

    // Ratio test: the entering variable moves by `t >= 0` in direction
    // `dir`; basic variables move by `-dir * t * column`.
    let mut best_t = tab.upper[col] - tab.lower[col];
    let mut leave: Option<(usize, bool)> = None; // (row, leaves_at_upper)
    for i in 0..tab.rows {
        let coeff = dir * tab.at(i, col);
        let basic = tab.basis[i];
        if coeff > PIVOT_TOL {
            let room = tab.xb[i] - tab.lower[basic];
            let t = (room / coeff).max(0.0);
            if t < best_t - DEGENERATE_STEP
                || (t < best_t + DEGENERATE_STEP
                    && leave.is_some_and(|(r, _)| tab.basis[r] > basic))
            {
                best_t = t;
                leave = Some((i, false));
            }
        } else if coeff < -PIVOT_TOL {
            let up = tab.upper[basic];
            if up.is_finite() {
                let room = up - tab.xb[i];
                let t = (room / -coeff).max(0.0);
                if t < best_t - DEGENERATE_STEP
                    || (t < best_t + DEGENERATE_STEP
                        && leave.is_some_and(|(r, _)| tab.basis[r] > basic))
                {
                    best_t = t;
                    leave = Some((i, true));
                }
            }
        }
    }

    if best_t.is_infinite() {
        // Cannot happen for boxed structurals; slacks are cost-free.
        return Err(Error::Domain("simplex detected an unbounded ray".into()));
    }

    let t = best_t.max(0.0);
    for i in 0..tab.rows {
        let coeff = tab.at(i, col);
        if coeff != 0.0 {
            tab.xb[i] -= dir * t * coeff;
        }
    }

    match leave {
        None => {
            // Bound flip: the entering variable runs to its other bound.
            tab.state[col] = match tab.state[col] {
                VarState::AtLower => VarState::AtUpper,
                VarState::AtUpper => VarState::AtLower,
                VarState::Basic(_) => unreachable!(),
            };
            Ok(StepResult::Moved {
                degenerate: t <= DEGENERATE_STEP,
            })
        }
        Some((row, leaves_at_upper)) => {
            let leaving = tab.basis[row];
            let entering_value = match tab.state[col] {
                VarState::AtLower => tab.lower[col] + t,
                VarState::AtUpper => tab.upper[col] - t,
                VarState::Basic(_) => unreachable!(),
            };
            tab.state[leaving] = if leaves_at_upper {
                VarState::AtUpper
            } else {
                VarState::AtLower
            };
            tab.pivot(row, col);
            tab.basis[row] = col;
            tab.state[col] = VarState::Basic(row);
            tab.xb[row] = entering_value;
            // Snap basic values wandering outside bounds by rounding error.
            for i in 0..tab.rows {
                let b = tab.basis[i];
                if tab.xb[i] < tab.lower[b] && tab.xb[i] > tab.lower[b] - 1e-7 {
                    tab.xb[i] = tab.lower[b];
                }
                if tab.xb[i] > tab.upper[b] && tab.xb[i] < tab.upper[b] + 1e-7 {
                    tab.xb[i] = tab.upper[b];
                }
            }
            Ok(StepResult::Moved {
                degenerate: t <= DEGENERATE_STEP,
            })
        }
    }
}

fn run_phase(tab: &mut Tableau, max_pivots: usize) -> Result<()> {
    let mut degenerate_streak = 0usize;
    let mut bland = false;
    for _ in 0..max_pivots {
        match step(tab, bland)? {
            StepResult::Optimal => return Ok(()),
            StepResult::Moved { degenerate } => {
                if degenerate {
                    degenerate_streak += 1;
                    if degenerate_streak >= BLAND_TRIGGER {
                        bland = true;
                    }
                } else {
                    degenerate_streak = 0;
                    bland = false;
                }
            }
        }
    }
    Err(Error::PivotLimit(max_pivots))
}

fn simplex(lp: &LinearProgram) -> Result<SimplexOutcome> {
    let ns = lp.objective.len();
    let mr = lp.constraint_matrix.len();
    for (i, row) in lp.constraint_matrix.iter().enumerate() {
        if row.len() != ns {
            return Err(Error::DimensionMismatch(format!(
                "constraint row {i} has {} entries, expected {ns}",
                row.len()
            )));
        }
    }
    if lp.bounds.len() != ns {
        return Err(Error::DimensionMismatch(
            "bounds length differs from objective length".into(),
        ));
    }

    // Nonbasic structurals start at their lower bounds, which shifts the
    // slack values; phase 1 is needed exactly where the shifted rhs is
    // negative.
    let shifted: Vec<f64> = (0..mr)
        .map(|i| {
            lp.rhs[i]
                - lp.constraint_matrix[i]
                    .iter()
                    .zip(&lp.bounds)
                    .map(|(a, &(lo, _))| a * lo)
                    .sum::<f64>()
        })
        .collect();

    let negative_rows: Vec<usize> = (0..mr).filter(|&i| shifted[i] < 0.0).collect();
    let na = negative_rows.len();
    let ncols = ns + mr + na;

    let mut lower = vec![0.0; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        lower[j] = lo;
        upper[j] = hi;
    }

    let mut t = vec![0.0; mr * ncols];
    let mut xb = vec![0.0; mr];
    let mut basis = vec![0usize; mr];
    let mut state = vec![VarState::AtLower; ncols];

    let mut artificial_of_row = vec![usize::MAX; mr];
    for (a, &i) in negative_rows.iter().enumerate() {
        artificial_of_row[i] = ns + mr + a;
    }

    for i in 0..mr {
        let flip = if shifted[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..ns {
            t[i * ncols + j] = flip * lp.constraint_matrix[i][j];
        }
        t[i * ncols + ns + i] = flip; // slack
        xb[i] = flip * shifted[i];
        if shifted[i] < 0.0 {
            let art = artificial_of_row[i];
            t[i * ncols + art] = 1.0;
            basis[i] = art;
            state[art] = VarState::Basic(i);
        } else {
            basis[i] = ns + i;
            state[ns + i] = VarState::Basic(i);
        }
    }

    let mut tab = Tableau {
        t,
        rows: mr,
        ncols,
        basis,
        state,
        xb,
        lower,
        upper,
        zrow: vec![0.0; ncols],
    };

    let max_pivots = 200 * (mr + ncols) + 20_000;

    if na > 0 {
        // Phase 1: maximize minus the artificial sum.
        let mut costs = vec![0.0; ncols];
        for a in 0..na {
            costs[ns + mr + a] = -1.0;
        }
        tab.price(&costs);
        run_phase(&mut tab, max_pivots)?;
        let infeasibility: f64 = (0..na).map(|a| tab.value_of(ns + mr + a)).sum();
        if infeasibility > 1e-7 {
            return Ok(SimplexOutcome::Infeasible);
        }
        // Pin leftover artificials at zero so phase 2 cannot move them.
        for a in 0..na {
            let j = ns + mr + a;
            tab.upper[j] = 0.0;
            if let VarState::AtUpper = tab.state[j] {
                tab.state[j] = VarState::AtLower;
            }
        }
    }

    let mut costs = vec![0.0; ncols];
    costs[..ns].copy_from_slice(&lp.objective);
    tab.price(&costs);
    run_phase(&mut tab, max_pivots)?;

    let mut values = Vec::with_capacity(ns);
    for j in 0..ns {
        let v = tab.value_of(j);
        let (lo, hi) = (lp.bounds[j].0, lp.bounds[j].1);
        values.push(v.clamp(lo, hi));
    }
    Ok(SimplexOutcome::Optimal(values))
}
