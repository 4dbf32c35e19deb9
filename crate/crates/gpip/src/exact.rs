//! Exact solver for small GPIP instances.
//!
//! Depth-first branch and bound over the binary variables, bounding each
//! node by the LP relaxation with the branched variables pinned. Branching
//! picks the most fractional variable (lowest index on ties) and explores
//! the value-1 child first. Node counts are reproducible because the LP
//! pivots deterministically.

use serde::Serialize;

use crate::lp::{relax, solve_lp, LinearProgram, LpStatus};
use crate::model::{check_feasible, objective, BinarySolution, GpipInstance};

/// Pruning slack so equal-objective optima are not cut off by float dust.
const INCUMBENT_TOL: f64 = 1e-9;
const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct ExactResult {
    pub solution: BinarySolution,
    pub objective: f64,
    pub nodes_explored: u64,
    /// True when the search tree was exhausted within the node cap.
    pub proven_optimal: bool,
}

struct Search<'a> {
    instance: &'a GpipInstance,
    lp_template: LinearProgram,
    total_vars: usize,
    m: usize,
    node_cap: u64,
    nodes: u64,
    cap_hit: bool,
    best_value: f64,
    best: BinarySolution,
}

/// Solves the instance exactly. `node_cap` bounds the number of LP-solved
/// nodes; exhausting it returns the incumbent with `proven_optimal = false`.
pub fn solve_exact(instance: &GpipInstance, node_cap: u64) -> ExactResult {
    let dims = instance.dims();
    let lp_template = relax(instance);
    let zero = BinarySolution::zeros(dims.x_vars, dims.y_vars);
    let mut search = Search {
        instance,
        total_vars: dims.x_vars + dims.y_vars,
        m: dims.x_vars,
        lp_template,
        node_cap,
        nodes: 0,
        cap_hit: false,
        best_value: 0.0, // the zero solution is always feasible
        best: zero,
    };
    let mut bounds = vec![(0.0f64, 1.0f64); search.total_vars];
    search.dive(&mut bounds);
    ExactResult {
        objective: search.best_value,
        solution: search.best,
        nodes_explored: search.nodes,
        proven_optimal: !search.cap_hit,
    }
}

impl Search<'_> {
    fn dive(&mut self, bounds: &mut Vec<(f64, f64)>) {
        if self.nodes >= self.node_cap {
            self.cap_hit = true;
            return;
        }
        self.nodes += 1;

        let lp = LinearProgram {
            bounds: bounds.clone(),
            ..self.lp_template.clone()
        };
        let Ok(sol) = solve_lp(&lp) else {
            return;
        };
        if sol.status == LpStatus::Infeasible {
            return;
        }
        if sol.objective_value <= self.best_value + INCUMBENT_TOL {
            return;
        }

        let values: Vec<f64> = sol.x_hat.iter().chain(sol.y_hat.iter()).copied().collect();
        match most_fractional(&values) {
            None => {
                let candidate = BinarySolution {
                    x: values[..self.m].iter().map(|&v| u8::from(v > 0.5)).collect(),
                    y: values[self.m..].iter().map(|&v| u8::from(v > 0.5)).collect(),
                };
                // Snapped values must genuinely satisfy the constraints.
                if check_feasible(self.instance, &candidate)
                    .map(|r| r.feasible)
                    .unwrap_or(false)
                {
                    let value = objective(self.instance, &candidate)
                        .expect("candidate matches instance dimensions");
                    if value > self.best_value {
                        self.best_value = value;
                        self.best = candidate;
                    }
                }
            }
            Some(branch_var) => {
                let saved = bounds[branch_var];
                bounds[branch_var] = (1.0, 1.0);
                self.dive(bounds);
                bounds[branch_var] = (0.0, 0.0);
                self.dive(bounds);
                bounds[branch_var] = saved;
            }
        }
    }
}

/// Index of the variable closest to 1/2, or `None` when all are integral.
fn most_fractional(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in values.iter().enumerate() {
        let frac = v.min(1.0 - v).max(0.0);
        if frac <= INTEGRALITY_TOL {
            continue;
        }
        let distance = (v - 0.5).abs();
        match best {
            Some((_, d)) if d <= distance => {}
            _ => best = Some((j, distance)),
        }
    }
    best.map(|(j, _)| j)
}
