//! Generalized packing integer program (GPIP) instances.
//!
//! A GPIP maximizes `c1'x + c2'y` over binary `x`, `y` subject to
//! `Ax <= By`, `Ux <= u`, `Vy <= v`, where every matrix entry lies in
//! `[0, 1]` and every right-hand side is at least 1. [`normalize`] turns
//! arbitrary nonnegative data into that form; [`validate`] checks it;
//! [`check_feasible`] and [`objective`] evaluate candidate solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-row feasibility tolerance, sized for double-precision LP residuals.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Problem dimensions: coupling rows `n`, variables `m`/`k`, packing rows
/// `d1`/`d2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub coupling_rows: usize,
    pub x_vars: usize,
    pub y_vars: usize,
    pub x_packing_rows: usize,
    pub y_packing_rows: usize,
}

/// Raw (not yet normalized) instance data, as read from JSON.
///
/// Field names mirror the on-disk schema: `A`, `B` are the coupling blocks
/// of `Ax <= By`; `U`, `u` and `V`, `v` the packing constraints; `c1`, `c2`
/// the objective.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub coupling_x: Matrix,
    #[serde(rename = "B")]
    pub coupling_y: Matrix,
    #[serde(rename = "U")]
    pub packing_x: Matrix,
    #[serde(rename = "V")]
    pub packing_y: Matrix,
    #[serde(rename = "u")]
    pub packing_x_rhs: Vec<f64>,
    #[serde(rename = "v")]
    pub packing_y_rhs: Vec<f64>,
    #[serde(rename = "c1")]
    pub objective_x: Vec<f64>,
    #[serde(rename = "c2")]
    pub objective_y: Vec<f64>,
}

/// A normalized instance; produced by [`normalize`] or [`GpipInstance::new`].
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GpipInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub coupling_x: Matrix,
    #[serde(rename = "B")]
    pub coupling_y: Matrix,
    #[serde(rename = "U")]
    pub packing_x: Matrix,
    #[serde(rename = "V")]
    pub packing_y: Matrix,
    #[serde(rename = "u")]
    pub packing_x_rhs: Vec<f64>,
    #[serde(rename = "v")]
    pub packing_y_rhs: Vec<f64>,
    #[serde(rename = "c1")]
    pub objective_x: Vec<f64>,
    #[serde(rename = "c2")]
    pub objective_y: Vec<f64>,
}

impl GpipInstance {
    /// Wraps already-normalized data, refusing anything that fails
    /// [`validate`].
    pub fn new(raw: RawInstance) -> Result<Self> {
        let inst = Self {
            name: raw.name,
            coupling_x: raw.coupling_x,
            coupling_y: raw.coupling_y,
            packing_x: raw.packing_x,
            packing_y: raw.packing_y,
            packing_x_rhs: raw.packing_x_rhs,
            packing_y_rhs: raw.packing_y_rhs,
            objective_x: raw.objective_x,
            objective_y: raw.objective_y,
        };
        inst.check_dims()?;
        let report = validate(&inst);
        if !report.ok {
            let first = &report.issues[0];
            return Err(Error::Domain(format!(
                "instance violates GPIP domain: {} {} {}",
                first.field, first.location, first.message
            )));
        }
        Ok(inst)
    }

    pub fn dims(&self) -> Dims {
        Dims {
            coupling_rows: self.coupling_x.rows(),
            x_vars: self.objective_x.len(),
            y_vars: self.objective_y.len(),
            x_packing_rows: self.packing_x.rows(),
            y_packing_rows: self.packing_y.rows(),
        }
    }

    pub fn as_raw(&self) -> RawInstance {
        RawInstance {
            name: self.name.clone(),
            coupling_x: self.coupling_x.clone(),
            coupling_y: self.coupling_y.clone(),
            packing_x: self.packing_x.clone(),
            packing_y: self.packing_y.clone(),
            packing_x_rhs: self.packing_x_rhs.clone(),
            packing_y_rhs: self.packing_y_rhs.clone(),
            objective_x: self.objective_x.clone(),
            objective_y: self.objective_y.clone(),
        }
    }

    fn check_dims(&self) -> Result<()> {
        check_dims_common(
            &self.coupling_x,
            &self.coupling_y,
            &self.packing_x,
            &self.packing_y,
            &self.packing_x_rhs,
            &self.packing_y_rhs,
            &self.objective_x,
            &self.objective_y,
        )
    }
}

impl RawInstance {
    /// Aligns zero-row matrices with the column counts implied by the
    /// objective vectors, then checks shape consistency.
    pub fn check_dims(&mut self) -> Result<()> {
        let m = self.objective_x.len();
        let k = self.objective_y.len();
        self.coupling_x.align_empty(m);
        self.coupling_y.align_empty(k);
        self.packing_x.align_empty(m);
        self.packing_y.align_empty(k);
        // An empty variable block still needs one (empty) coupling row per
        // row of the other block.
        if k == 0 {
            self.coupling_y.align_empty_rows(self.coupling_x.rows());
        }
        if m == 0 {
            self.coupling_x.align_empty_rows(self.coupling_y.rows());
        }
        check_dims_common(
            &self.coupling_x,
            &self.coupling_y,
            &self.packing_x,
            &self.packing_y,
            &self.packing_x_rhs,
            &self.packing_y_rhs,
            &self.objective_x,
            &self.objective_y,
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn check_dims_common(
    a: &Matrix,
    b: &Matrix,
    u_mat: &Matrix,
    v_mat: &Matrix,
    u_rhs: &[f64],
    v_rhs: &[f64],
    c1: &[f64],
    c2: &[f64],
) -> Result<()> {
    let m = c1.len();
    let k = c2.len();
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} rows but B has {}",
            a.rows(),
            b.rows()
        )));
    }
    if a.rows() > 0 && a.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "A has {} columns but c1 has length {}",
            a.cols(),
            m
        )));
    }
    if b.rows() > 0 && b.cols() != k {
        return Err(Error::DimensionMismatch(format!(
            "B has {} columns but c2 has length {}",
            b.cols(),
            k
        )));
    }
    if u_mat.rows() != u_rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "U has {} rows but u has length {}",
            u_mat.rows(),
            u_rhs.len()
        )));
    }
    if u_mat.rows() > 0 && u_mat.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "U has {} columns but c1 has length {}",
            u_mat.cols(),
            m
        )));
    }
    if v_mat.rows() != v_rhs.len() {
        return Err(Error::DimensionMismatch(format!(
            "V has {} rows but v has length {}",
            v_mat.rows(),
            v_rhs.len()
        )));
    }
    if v_mat.rows() > 0 && v_mat.cols() != k {
        return Err(Error::DimensionMismatch(format!(
            "V has {} columns but c2 has length {}",
            v_mat.cols(),
            k
        )));
    }
    Ok(())
}

/// A candidate 0/1 assignment for the `x` and `y` blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinarySolution {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
}

impl BinarySolution {
    pub fn new(x: Vec<u8>, y: Vec<u8>) -> Result<Self> {
        if x.iter().chain(y.iter()).any(|&b| b > 1) {
            return Err(Error::Domain("solution entries must be 0 or 1".into()));
        }
        Ok(Self { x, y })
    }

    pub fn zeros(m: usize, k: usize) -> Self {
        Self {
            x: vec![0; m],
            y: vec![0; k],
        }
    }
}

/// Which constraint family a report row refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConstraintFamily {
    /// `Ax <= By`
    Coupling,
    /// `Ux <= u`
    PackingX,
    /// `Vy <= v`
    PackingY,
}

/// One violated constraint: family, 1-based row, and both side values.
#[derive(Clone, Debug, Serialize)]
pub struct ViolatedRow {
    pub family: ConstraintFamily,
    pub row: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violated_rows: Vec<ViolatedRow>,
}

#[derive(Clone, Debug)]
pub struct ValidationIssue {
    pub field: &'static str,
    /// `(row, col)` for matrix entries, `(index)` for vector entries,
    /// empty for global conditions. 1-based.
    pub location: String,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
    /// Columns that should have been fixed to zero and removed (a single
    /// packing coefficient exceeds its right-hand side). Empty on any
    /// output of [`normalize`].
    pub eliminated_variables: Vec<usize>,
    /// Non-fatal observations, e.g. that only the joint objective norm is 1.
    pub notes: Vec<String>,
}

/// Checks every GPIP domain restriction and reports violations instead of
/// failing.
pub fn validate(instance: &GpipInstance) -> ValidationReport {
    let mut issues = Vec::new();
    let mut eliminated = Vec::new();
    let mut notes = Vec::new();

    let mut check_matrix = |field: &'static str, m: &Matrix| {
        for i in 0..m.rows() {
            for (j, &val) in m.row(i).iter().enumerate() {
                if val < 0.0 {
                    issues.push(ValidationIssue {
                        field,
                        location: format!("({}, {})", i + 1, j + 1),
                        message: "entry below 0".into(),
                    });
                } else if val > 1.0 {
                    issues.push(ValidationIssue {
                        field,
                        location: format!("({}, {})", i + 1, j + 1),
                        message: "entry above 1".into(),
                    });
                }
            }
        }
    };
    check_matrix("A", &instance.coupling_x);
    check_matrix("B", &instance.coupling_y);
    check_matrix("U", &instance.packing_x);
    check_matrix("V", &instance.packing_y);

    for (field, rhs) in [
        ("u", &instance.packing_x_rhs),
        ("v", &instance.packing_y_rhs),
    ] {
        for (i, &val) in rhs.iter().enumerate() {
            if val < 1.0 {
                issues.push(ValidationIssue {
                    field,
                    location: format!("{}", i + 1),
                    message: "entry below 1".into(),
                });
            }
        }
    }

    for (field, c) in [
        ("c1", &instance.objective_x),
        ("c2", &instance.objective_y),
    ] {
        for (i, &val) in c.iter().enumerate() {
            if val < 0.0 {
                issues.push(ValidationIssue {
                    field,
                    location: format!("{}", i + 1),
                    message: "entry below 0".into(),
                });
            } else if val > 1.0 + 1e-12 {
                issues.push(ValidationIssue {
                    field,
                    location: format!("{}", i + 1),
                    message: "entry above 1".into(),
                });
            }
        }
    }

    let norm_c1 = instance.objective_x.iter().copied().fold(0.0, f64::max);
    let norm_c2 = instance.objective_y.iter().copied().fold(0.0, f64::max);
    let joint = norm_c1.max(norm_c2);
    if joint == 0.0 {
        notes.push("objective is identically zero".into());
    } else if (joint - 1.0).abs() > 1e-9 {
        issues.push(ValidationIssue {
            field: "c1/c2",
            location: String::new(),
            message: format!("max objective norm is {joint}, expected 1"),
        });
    } else if (norm_c1 - 1.0).abs() > 1e-9 || (norm_c2 - 1.0).abs() > 1e-9 {
        notes.push(
            "strict per-block norm condition relaxed: only the joint objective norm is 1".into(),
        );
    }

    // Columns a normalization pass would have removed.
    let dims = instance.dims();
    for j in 0..dims.x_vars {
        if (0..dims.x_packing_rows)
            .any(|i| instance.packing_x.get(i, j) > instance.packing_x_rhs[i])
        {
            eliminated.push(j);
            issues.push(ValidationIssue {
                field: "U",
                location: format!("column {}", j + 1),
                message: "coefficient exceeds right-hand side; variable must be eliminated".into(),
            });
        }
    }
    for j in 0..dims.y_vars {
        if (0..dims.y_packing_rows)
            .any(|i| instance.packing_y.get(i, j) > instance.packing_y_rhs[i])
        {
            eliminated.push(dims.x_vars + j);
            issues.push(ValidationIssue {
                field: "V",
                location: format!("column {}", j + 1),
                message: "coefficient exceeds right-hand side; variable must be eliminated".into(),
            });
        }
    }

    ValidationReport {
        ok: issues.is_empty(),
        issues,
        eliminated_variables: eliminated,
        notes,
    }
}

/// Scale factors and bookkeeping to map normalized results back to the raw
/// problem.
#[derive(Clone, Debug, Default, Serialize)]
pub struct NormalizationRecord {
    /// Multiply a normalized objective value by this to recover raw units.
    pub objective_scale: f64,
    /// Surviving column indices (into the raw problem), in order.
    pub kept_x: Vec<usize>,
    pub kept_y: Vec<usize>,
    /// Columns fixed to zero because a packing coefficient exceeded its rhs.
    pub eliminated_x: Vec<usize>,
    pub eliminated_y: Vec<usize>,
    /// Surviving row indices and the divisor applied to each.
    pub coupling_rows: Vec<usize>,
    pub coupling_scales: Vec<f64>,
    pub x_packing_rows: Vec<usize>,
    pub x_packing_scales: Vec<f64>,
    pub y_packing_rows: Vec<usize>,
    pub y_packing_scales: Vec<f64>,
    /// Rows dropped as vacuous (all-zero coefficients).
    pub dropped_coupling_rows: Vec<usize>,
    pub dropped_x_packing_rows: Vec<usize>,
    pub dropped_y_packing_rows: Vec<usize>,
}

impl NormalizationRecord {
    /// Lifts a solution over surviving columns back to raw column space,
    /// with eliminated columns at zero.
    pub fn expand_solution(&self, sol: &BinarySolution) -> BinarySolution {
        let m_raw = self.kept_x.len() + self.eliminated_x.len();
        let k_raw = self.kept_y.len() + self.eliminated_y.len();
        let mut out = BinarySolution::zeros(m_raw, k_raw);
        for (t, &j) in self.kept_x.iter().enumerate() {
            out.x[j] = sol.x[t];
        }
        for (t, &j) in self.kept_y.iter().enumerate() {
            out.y[j] = sol.y[t];
        }
        out
    }
}

/// Brings raw nonnegative data into the GPIP domain.
///
/// Steps: (a) fix to zero and drop any column whose packing coefficient
/// exceeds its row's right-hand side; (b) divide every surviving row by its
/// largest coefficient (coupling rows use the largest entry across both
/// blocks, preserving `Ax <= By`), dropping all-zero rows; (c) divide the
/// objective by `max(||c1||_inf, ||c2||_inf)`.
pub fn normalize(raw: &RawInstance) -> Result<(GpipInstance, NormalizationRecord)> {
    let mut raw = raw.clone();
    raw.check_dims()?;

    let m = raw.objective_x.len();
    let k = raw.objective_y.len();

    for (field, mat) in [
        ("A", &raw.coupling_x),
        ("B", &raw.coupling_y),
        ("U", &raw.packing_x),
        ("V", &raw.packing_y),
    ] {
        for i in 0..mat.rows() {
            for (j, &val) in mat.row(i).iter().enumerate() {
                if val < 0.0 {
                    return Err(Error::NegativeCoefficient {
                        field,
                        row: i + 1,
                        col: j + 1,
                    });
                }
            }
        }
    }
    for (field, c) in [("c1", &raw.objective_x), ("c2", &raw.objective_y)] {
        for (j, &val) in c.iter().enumerate() {
            if val < 0.0 {
                return Err(Error::NegativeCoefficient {
                    field,
                    row: 1,
                    col: j + 1,
                });
            }
        }
    }
    for (field, rhs) in [("u", &raw.packing_x_rhs), ("v", &raw.packing_y_rhs)] {
        for (i, &val) in rhs.iter().enumerate() {
            if val <= 0.0 {
                return Err(Error::NonPositiveRhs {
                    field,
                    index: i + 1,
                    value: val,
                });
            }
        }
    }

    // (a) column elimination: a binary variable with a coefficient above its
    // row's right-hand side can never be 1.
    let mut kept_x = Vec::new();
    let mut eliminated_x = Vec::new();
    for j in 0..m {
        let forced_zero = (0..raw.packing_x.rows())
            .any(|i| raw.packing_x.get(i, j) > raw.packing_x_rhs[i]);
        if forced_zero {
            eliminated_x.push(j);
        } else {
            kept_x.push(j);
        }
    }
    let mut kept_y = Vec::new();
    let mut eliminated_y = Vec::new();
    for j in 0..k {
        let forced_zero = (0..raw.packing_y.rows())
            .any(|i| raw.packing_y.get(i, j) > raw.packing_y_rhs[i]);
        if forced_zero {
            eliminated_y.push(j);
        } else {
            kept_y.push(j);
        }
    }

    let a = raw.coupling_x.select_columns(&kept_x);
    let b = raw.coupling_y.select_columns(&kept_y);
    let u_mat = raw.packing_x.select_columns(&kept_x);
    let v_mat = raw.packing_y.select_columns(&kept_y);

    // (b) row scaling.
    let mut coupling_rows = Vec::new();
    let mut coupling_scales = Vec::new();
    let mut dropped_coupling_rows = Vec::new();
    for i in 0..a.rows() {
        let s = a.row(i).iter().chain(b.row(i)).copied().fold(0.0, f64::max);
        if s == 0.0 {
            dropped_coupling_rows.push(i);
        } else {
            coupling_rows.push(i);
            coupling_scales.push(s);
        }
    }
    let mut a = a.select_rows(&coupling_rows);
    let mut b = b.select_rows(&coupling_rows);
    for (t, &s) in coupling_scales.iter().enumerate() {
        for val in a.row_mut(t) {
            *val /= s;
        }
        for val in b.row_mut(t) {
            *val /= s;
        }
    }

    let scale_packing = |mat: &Matrix, rhs: &[f64]| {
        let mut rows = Vec::new();
        let mut scales = Vec::new();
        let mut dropped = Vec::new();
        for i in 0..mat.rows() {
            let s = mat.row(i).iter().copied().fold(0.0, f64::max);
            if s == 0.0 {
                // Vacuous row; keep it only if already in domain.
                if rhs[i] >= 1.0 {
                    rows.push(i);
                    scales.push(1.0);
                } else {
                    dropped.push(i);
                }
            } else {
                rows.push(i);
                scales.push(s);
            }
        }
        let mut out = mat.select_rows(&rows);
        let mut out_rhs = Vec::with_capacity(rows.len());
        for (t, &i) in rows.iter().enumerate() {
            let s = scales[t];
            for val in out.row_mut(t) {
                *val /= s;
            }
            out_rhs.push(rhs[i] / s);
        }
        (out, out_rhs, rows, scales, dropped)
    };
    let (u_mat, u_rhs, x_packing_rows, x_packing_scales, dropped_x_packing_rows) =
        scale_packing(&u_mat, &raw.packing_x_rhs);
    let (v_mat, v_rhs, y_packing_rows, y_packing_scales, dropped_y_packing_rows) =
        scale_packing(&v_mat, &raw.packing_y_rhs);

    // (c) joint objective scaling. The two blocks share one divisor so the
    // normalized problem is a positive rescaling of the original.
    let mut c1: Vec<f64> = kept_x.iter().map(|&j| raw.objective_x[j]).collect();
    let mut c2: Vec<f64> = kept_y.iter().map(|&j| raw.objective_y[j]).collect();
    let joint = c1
        .iter()
        .chain(c2.iter())
        .copied()
        .fold(0.0, f64::max);
    let objective_scale = if joint > 0.0 { joint } else { 1.0 };
    for val in c1.iter_mut().chain(c2.iter_mut()) {
        *val /= objective_scale;
    }

    let record = NormalizationRecord {
        objective_scale,
        kept_x,
        kept_y,
        eliminated_x,
        eliminated_y,
        coupling_rows,
        coupling_scales,
        x_packing_rows,
        x_packing_scales,
        y_packing_rows,
        y_packing_scales,
        dropped_coupling_rows,
        dropped_x_packing_rows,
        dropped_y_packing_rows,
    };

    let instance = GpipInstance {
        name: raw.name.clone(),
        coupling_x: a,
        coupling_y: b,
        packing_x: u_mat,
        packing_y: v_mat,
        packing_x_rhs: u_rhs,
        packing_y_rhs: v_rhs,
        objective_x: c1,
        objective_y: c2,
    };
    Ok((instance, record))
}

/// Minimum over the strictly positive entries of a row; `+inf` when the row
/// has none.
pub fn min_positive(row: &[f64]) -> f64 {
    row.iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min)
}

/// Verifies `Ax <= By`, `Ux <= u`, `Vy <= v` row by row with tolerance
/// [`FEASIBILITY_TOL`].
pub fn check_feasible(instance: &GpipInstance, sol: &BinarySolution) -> Result<FeasibilityReport> {
    let dims = instance.dims();
    if sol.x.len() != dims.x_vars || sol.y.len() != dims.y_vars {
        return Err(Error::DimensionMismatch(format!(
            "solution has ({}, {}) entries, instance needs ({}, {})",
            sol.x.len(),
            sol.y.len(),
            dims.x_vars,
            dims.y_vars
        )));
    }
    let xf: Vec<f64> = sol.x.iter().map(|&b| f64::from(b)).collect();
    let yf: Vec<f64> = sol.y.iter().map(|&b| f64::from(b)).collect();

    let mut violated = Vec::new();
    for i in 0..dims.coupling_rows {
        let lhs = instance.coupling_x.row_dot(i, &xf);
        let rhs = instance.coupling_y.row_dot(i, &yf);
        if lhs > rhs + FEASIBILITY_TOL {
            violated.push(ViolatedRow {
                family: ConstraintFamily::Coupling,
                row: i + 1,
                lhs,
                rhs,
            });
        }
    }
    for i in 0..dims.x_packing_rows {
        let lhs = instance.packing_x.row_dot(i, &xf);
        let rhs = instance.packing_x_rhs[i];
        if lhs > rhs + FEASIBILITY_TOL {
            violated.push(ViolatedRow {
                family: ConstraintFamily::PackingX,
                row: i + 1,
                lhs,
                rhs,
            });
        }
    }
    for i in 0..dims.y_packing_rows {
        let lhs = instance.packing_y.row_dot(i, &yf);
        let rhs = instance.packing_y_rhs[i];
        if lhs > rhs + FEASIBILITY_TOL {
            violated.push(ViolatedRow {
                family: ConstraintFamily::PackingY,
                row: i + 1,
                lhs,
                rhs,
            });
        }
    }
    Ok(FeasibilityReport {
        feasible: violated.is_empty(),
        violated_rows: violated,
    })
}

/// `c1'x + c2'y` for a binary solution.
pub fn objective(instance: &GpipInstance, sol: &BinarySolution) -> Result<f64> {
    let dims = instance.dims();
    if sol.x.len() != dims.x_vars || sol.y.len() != dims.y_vars {
        return Err(Error::DimensionMismatch(format!(
            "solution has ({}, {}) entries, instance needs ({}, {})",
            sol.x.len(),
            sol.y.len(),
            dims.x_vars,
            dims.y_vars
        )));
    }
    let x_part: f64 = instance
        .objective_x
        .iter()
        .zip(&sol.x)
        .map(|(c, &b)| c * f64::from(b))
        .sum();
    let y_part: f64 = instance
        .objective_y
        .iter()
        .zip(&sol.y)
        .map(|(c, &b)| c * f64::from(b))
        .sum();
    Ok(x_part + y_part)
}
