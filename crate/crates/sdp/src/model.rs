//! Declarative SDP model: matrix and scalar variables, linear objectives,
//! linear (in)equalities and affine PSD block constraints.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::cone::{svec_index, svec_len, ConeDims};
use crate::ipm::{self, ConeProgram};
use crate::solution::{Residuals, SdpSolution, SdpStatus, SolverSettings};

use std::f64::consts::SQRT_2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown variable {0:?}")]
    UnknownVariable(VarId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(usize);

impl VarId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Symmetric `n x n` matrix (no implicit PSD constraint).
    Symmetric(usize),
    /// General `rows x cols` matrix.
    Rectangular {
        rows: usize,
        cols: usize,
    },
    Scalar,
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric(n) => (n, n),
            VarKind::Rectangular { rows, cols } => (rows, cols),
            VarKind::Scalar => (1, 1),
        }
    }

    /// Number of free scalar parameters.
    fn param_count(&self) -> usize {
        match *self {
            VarKind::Symmetric(n) => svec_len(n),
            VarKind::Rectangular { rows, cols } => rows * cols,
            VarKind::Scalar => 1,
        }
    }

    /// Parameter holding entry `(i, j)`.
    fn param(&self, i: usize, j: usize) -> usize {
        match *self {
            VarKind::Symmetric(n) => {
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                svec_index(n, i, j)
            }
            VarKind::Rectangular { cols, .. } => i * cols + j,
            VarKind::Scalar => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpVariable {
    pub id: VarId,
    pub kind: VarKind,
    pub name: String,
    offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `expr <= rhs`
    LessEq,
    /// `expr >= rhs`
    GreaterEq,
}

#[derive(Debug, Clone, PartialEq)]
enum LinearTerm {
    /// `sum_ij C_ij V_ij`
    Inner(VarId, DMatrix<f64>),
    /// `coef * trace(V)`
    Trace(VarId, f64),
}

/// A real-valued functional, affine in the variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearExpr {
    terms: Vec<LinearTerm>,
    constant: f64,
}

impl LinearExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    /// `<C, V> = sum_ij C_ij V_ij`; `C` must have the variable's shape.
    pub fn inner(var: VarId, coef: DMatrix<f64>) -> Self {
        Self::zero().plus_inner(var, coef)
    }

    pub fn trace(var: VarId) -> Self {
        Self::zero().plus_trace(var, 1.0)
    }

    /// `coef * v` for a scalar variable.
    pub fn scalar(var: VarId, coef: f64) -> Self {
        Self::inner(var, DMatrix::from_element(1, 1, coef))
    }

    pub fn plus_inner(mut self, var: VarId, coef: DMatrix<f64>) -> Self {
        self.terms.push(LinearTerm::Inner(var, coef));
        self
    }

    pub fn plus_trace(mut self, var: VarId, coef: f64) -> Self {
        self.terms.push(LinearTerm::Trace(var, coef));
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: LinearExpr) -> Self {
        self.terms.extend(other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(self, alpha: f64) -> Self {
        Self {
            terms: self
                .terms
                .into_iter()
                .map(|t| match t {
                    LinearTerm::Inner(v, c) => LinearTerm::Inner(v, c * alpha),
                    LinearTerm::Trace(v, c) => LinearTerm::Trace(v, c * alpha),
                })
                .collect(),
            constant: self.constant * alpha,
        }
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Evaluates the expression at given variable values.
    pub fn evaluate(&self, values: &BTreeMap<VarId, DMatrix<f64>>) -> Option<f64> {
        let mut total = self.constant;
        for term in &self.terms {
            match term {
                LinearTerm::Inner(v, c) => total += c.component_mul(values.get(v)?).sum(),
                LinearTerm::Trace(v, c) => total += c * values.get(v)?.trace(),
            }
        }
        Some(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AffineTerm {
    /// Places the whole variable with its top-left corner at `(row, col)`.
    Place {
        var: VarId,
        row: usize,
        col: usize,
        coef: f64,
    },
    /// Places entry `(var_row, var_col)` of the variable at `(row, col)`.
    Entry {
        var: VarId,
        var_row: usize,
        var_col: usize,
        row: usize,
        col: usize,
        coef: f64,
    },
    /// `v * F` for a scalar variable `v` and a symmetric matrix `F`.
    ScalarTimes { var: VarId, matrix: DMatrix<f64> },
}

/// A symmetric matrix-valued expression affine in the variables.
///
/// Every placement at `(row, col)` with `row != col` is mirrored to
/// `(col, row)`, so the expression is symmetric by construction. Off-diagonal
/// placements of whole matrix variables must not touch the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrixExpr {
    size: usize,
    constant: DMatrix<f64>,
    terms: Vec<AffineTerm>,
}

impl AffineMatrixExpr {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            constant: DMatrix::zeros(size, size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn with_constant(mut self, constant: DMatrix<f64>) -> Self {
        self.constant = constant;
        self
    }

    /// Adds `coef * V` with its top-left corner at `(row, col)`.
    pub fn place(mut self, var: VarId, row: usize, col: usize, coef: f64) -> Self {
        self.terms.push(AffineTerm::Place { var, row, col, coef });
        self
    }

    /// Adds `coef * V[var_row, var_col]` at cell `(row, col)` (and its mirror).
    pub fn entry(mut self, var: VarId, var_row: usize, var_col: usize, row: usize, col: usize, coef: f64) -> Self {
        self.terms.push(AffineTerm::Entry {
            var,
            var_row,
            var_col,
            row,
            col,
            coef,
        });
        self
    }

    pub fn scalar_times(mut self, var: VarId, matrix: DMatrix<f64>) -> Self {
        self.terms.push(AffineTerm::ScalarTimes { var, matrix });
        self
    }
}

/// Lowered PSD block: constant plus `(param, row, col, coef)` contributions.
#[derive(Debug, Clone, PartialEq)]
struct PsdBlockConstraint {
    size: usize,
    constant: DMatrix<f64>,
    entries: Vec<(usize, usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
struct LinearRow {
    coefs: Vec<(usize, f64)>,
    constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    variables: Vec<SdpVariable>,
    param_count: usize,
    sense: Sense,
    objective: LinearRow,
    psd_blocks: Vec<PsdBlockConstraint>,
    linear_eq: Vec<(LinearRow, f64)>,
    linear_ineq: Vec<(LinearRow, Direction, f64)>,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self {
            variables: Vec::new(),
            param_count: 0,
            sense: Sense::Minimize,
            objective: LinearRow {
                coefs: Vec::new(),
                constant: 0.0,
            },
            psd_blocks: Vec::new(),
            linear_eq: Vec::new(),
            linear_ineq: Vec::new(),
        }
    }

    pub fn add_variable(&mut self, kind: VarKind, name: impl Into<String>) -> Result<VarId, ModelError> {
        let (r, c) = kind.shape();
        if r == 0 || c == 0 {
            return Err(ModelError::DimensionMismatch(format!(
                "variable shape {r}x{c} is empty"
            )));
        }
        let id = VarId(self.variables.len());
        self.variables.push(SdpVariable {
            id,
            kind,
            name: name.into(),
            offset: self.param_count,
        });
        self.param_count += kind.param_count();
        Ok(id)
    }

    pub fn variables(&self) -> &[SdpVariable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> Result<&SdpVariable, ModelError> {
        self.variables.get(id.0).ok_or(ModelError::UnknownVariable(id))
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinearExpr) -> Result<(), ModelError> {
        self.objective = self.lower_linear(&expr)?;
        self.sense = sense;
        Ok(())
    }

    /// Requires `expr ⪰ 0`.
    pub fn add_psd_block(&mut self, expr: AffineMatrixExpr) -> Result<(), ModelError> {
        let block = self.lower_affine(&expr)?;
        self.psd_blocks.push(block);
        Ok(())
    }

    pub fn add_linear_eq(&mut self, expr: LinearExpr, rhs: f64) -> Result<(), ModelError> {
        let row = self.lower_linear(&expr)?;
        self.linear_eq.push((row, rhs));
        Ok(())
    }

    pub fn add_linear_ineq(&mut self, expr: LinearExpr, direction: Direction, rhs: f64) -> Result<(), ModelError> {
        let row = self.lower_linear(&expr)?;
        self.linear_ineq.push((row, direction, rhs));
        Ok(())
    }

    pub fn num_psd_blocks(&self) -> usize {
        self.psd_blocks.len()
    }

    /// Orders of the PSD blocks, in insertion order.
    pub fn psd_block_sizes(&self) -> Vec<usize> {
        self.psd_blocks.iter().map(|b| b.size).collect()
    }

    pub fn num_linear_eq(&self) -> usize {
        self.linear_eq.len()
    }

    pub fn num_linear_ineq(&self) -> usize {
        self.linear_ineq.len()
    }

    pub fn solve(&self, settings: &SolverSettings) -> SdpSolution {
        let prog = self.compile();
        let res = ipm::solve(&prog, settings);
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let assignments = self.variables.iter().map(|v| (v.id, self.extract(v, &res.x))).collect();
        let residuals = Residuals {
            primal: res.primal_residual,
            dual: res.dual_residual,
            gap: res.gap.min(res.relative_gap),
        };
        let (objective_value, dual_objective_value) = match res.status {
            SdpStatus::Optimal | SdpStatus::NumericalFailure => (
                sign * res.primal_objective + self.objective.constant,
                sign * res.dual_objective + self.objective.constant,
            ),
            SdpStatus::Infeasible => (sign * f64::INFINITY, sign * f64::INFINITY),
            SdpStatus::Unbounded => (-sign * f64::INFINITY, -sign * f64::INFINITY),
        };
        SdpSolution {
            status: res.status,
            objective_value,
            dual_objective_value,
            assignments,
            residuals,
            iterations: res.iterations,
        }
    }

    fn check_var(&self, id: VarId) -> Result<&SdpVariable, ModelError> {
        self.variable(id)
    }

    fn lower_linear(&self, expr: &LinearExpr) -> Result<LinearRow, ModelError> {
        let mut coefs = Vec::new();
        for term in &expr.terms {
            match term {
                LinearTerm::Inner(id, c) => {
                    let var = self.check_var(*id)?;
                    let shape = var.kind.shape();
                    if c.shape() != shape {
                        return Err(ModelError::DimensionMismatch(format!(
                            "coefficient {}x{} for variable '{}' of shape {}x{}",
                            c.nrows(),
                            c.ncols(),
                            var.name,
                            shape.0,
                            shape.1
                        )));
                    }
                    for i in 0..shape.0 {
                        for j in 0..shape.1 {
                            if c[(i, j)] != 0.0 {
                                coefs.push((var.offset + var.kind.param(i, j), c[(i, j)]));
                            }
                        }
                    }
                }
                LinearTerm::Trace(id, c) => {
                    let var = self.check_var(*id)?;
                    let (r, cols) = var.kind.shape();
                    if r != cols {
                        return Err(ModelError::DimensionMismatch(format!(
                            "trace of non-square variable '{}'",
                            var.name
                        )));
                    }
                    for i in 0..r {
                        coefs.push((var.offset + var.kind.param(i, i), *c));
                    }
                }
            }
        }
        Ok(LinearRow {
            coefs,
            constant: expr.constant,
        })
    }

    fn lower_affine(&self, expr: &AffineMatrixExpr) -> Result<PsdBlockConstraint, ModelError> {
        let m = expr.size;
        if m == 0 {
            return Err(ModelError::DimensionMismatch("empty PSD block".into()));
        }
        if expr.constant.shape() != (m, m) {
            return Err(ModelError::DimensionMismatch(format!(
                "constant {}x{} in a PSD block of order {m}",
                expr.constant.nrows(),
                expr.constant.ncols()
            )));
        }
        let asym = (&expr.constant - expr.constant.transpose()).amax();
        if asym > 1e-12 * (1.0 + expr.constant.amax()) {
            return Err(ModelError::DimensionMismatch(format!(
                "constant of PSD block is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let mut entries = Vec::new();
        let out_of_range =
            |what: &str| ModelError::DimensionMismatch(format!("{what} does not fit inside a PSD block of order {m}"));
        for term in &expr.terms {
            match term {
                AffineTerm::Place { var, row, col, coef } => {
                    let v = self.check_var(*var)?;
                    let (p, q) = v.kind.shape();
                    if row + p > m || col + q > m {
                        return Err(out_of_range(&format!("placement of '{}' at ({row},{col})", v.name)));
                    }
                    let on_diagonal = row == col && p == q;
                    let clear_of_diagonal = *row >= col + q || *col >= row + p;
                    if !(on_diagonal && matches!(v.kind, VarKind::Symmetric(_) | VarKind::Scalar)) && !clear_of_diagonal
                    {
                        return Err(ModelError::DimensionMismatch(format!(
                            "placement of {}x{} variable '{}' at ({row},{col}) straddles the diagonal",
                            p, q, v.name
                        )));
                    }
                    for i in 0..p {
                        for j in 0..q {
                            if on_diagonal && i < j {
                                continue;
                            }
                            entries.push((v.offset + v.kind.param(i, j), row + i, col + j, *coef));
                        }
                    }
                }
                AffineTerm::Entry {
                    var,
                    var_row,
                    var_col,
                    row,
                    col,
                    coef,
                } => {
                    let v = self.check_var(*var)?;
                    let (p, q) = v.kind.shape();
                    if *var_row >= p || *var_col >= q {
                        return Err(ModelError::DimensionMismatch(format!(
                            "entry ({var_row},{var_col}) of {p}x{q} variable '{}'",
                            v.name
                        )));
                    }
                    if *row >= m || *col >= m {
                        return Err(out_of_range(&format!("cell ({row},{col})")));
                    }
                    entries.push((v.offset + v.kind.param(*var_row, *var_col), *row, *col, *coef));
                }
                AffineTerm::ScalarTimes { var, matrix } => {
                    let v = self.check_var(*var)?;
                    if v.kind != VarKind::Scalar {
                        return Err(ModelError::DimensionMismatch(format!(
                            "'{}' is not a scalar variable",
                            v.name
                        )));
                    }
                    if matrix.shape() != (m, m) {
                        return Err(out_of_range("scalar coefficient matrix"));
                    }
                    for j in 0..m {
                        for i in j..m {
                            let c = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                            if c != 0.0 {
                                entries.push((v.offset, i, j, c));
                            }
                        }
                    }
                }
            }
        }
        Ok(PsdBlockConstraint {
            size: m,
            constant: expr.constant.clone(),
            entries,
        })
    }

    fn compile(&self) -> ConeProgram {
        let n = self.param_count;
        let dims = ConeDims {
            nonneg: self.linear_ineq.len(),
            psd: self.psd_blocks.iter().map(|b| b.size).collect(),
        };
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut c = DVector::zeros(n);
        for &(k, v) in &self.objective.coefs {
            c[k] += sign * v;
        }

        let mut g = DMatrix::zeros(dims.len(), n);
        let mut h = DVector::zeros(dims.len());
        for (r, (row, dir, rhs)) in self.linear_ineq.iter().enumerate() {
            // a'x + const <= rhs  <=>  a'x + s = rhs - const, s >= 0
            let flip = match dir {
                Direction::LessEq => 1.0,
                Direction::GreaterEq => -1.0,
            };
            for &(k, v) in &row.coefs {
                g[(r, k)] += flip * v;
            }
            h[r] = flip * (rhs - row.constant);
        }
        for (block, info) in self.psd_blocks.iter().zip(dims.psd_blocks()) {
            let m = block.size;
            for j in 0..m {
                for i in j..m {
                    let scale = if i == j { 1.0 } else { SQRT_2 };
                    h[info.offset + svec_index(m, i, j)] =
                        scale * 0.5 * (block.constant[(i, j)] + block.constant[(j, i)]);
                }
            }
            // s = svec(F0 + sum_k x_k F_k) = h - G x
            for &(k, row, col, coef) in &block.entries {
                let (i, j) = if row >= col { (row, col) } else { (col, row) };
                let scale = if i == j { 1.0 } else { SQRT_2 };
                g[(info.offset + svec_index(m, i, j), k)] -= scale * coef;
            }
        }

        let mut a = DMatrix::zeros(self.linear_eq.len(), n);
        let mut b = DVector::zeros(self.linear_eq.len());
        for (r, (row, rhs)) in self.linear_eq.iter().enumerate() {
            for &(k, v) in &row.coefs {
                a[(r, k)] += v;
            }
            b[r] = rhs - row.constant;
        }
        ConeProgram { c, g, h, a, b, dims }
    }

    fn extract(&self, var: &SdpVariable, x: &DVector<f64>) -> DMatrix<f64> {
        let (p, q) = var.kind.shape();
        DMatrix::from_fn(p, q, |i, j| x[var.offset + var.kind.param(i, j)])
    }
}

fn write_row(f: &mut fmt::Formatter<'_>, problem: &SdpProblem, row: &LinearRow) -> fmt::Result {
    let mut first = true;
    for &(k, v) in &row.coefs {
        let var = problem
            .variables
            .iter()
            .rev()
            .find(|var| var.offset <= k)
            .expect("parameter belongs to a variable");
        let sep = if first { "" } else { " + " };
        write!(f, "{sep}{v:+e}*{}[{}]", var.name, k - var.offset)?;
        first = false;
    }
    if row.constant != 0.0 || first {
        write!(f, "{}{:+e}", if first { "" } else { " + " }, row.constant)?;
    }
    Ok(())
}

/// Human-readable dump for bug reports. Symmetric variables list their
/// lower-triangle parameters in column-major order.
impl fmt::Display for SdpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables:")?;
        for v in &self.variables {
            writeln!(
                f,
                "  {} #{}: {:?} (params {}..{})",
                v.name,
                v.id.0,
                v.kind,
                v.offset,
                v.offset + v.kind.param_count()
            )?;
        }
        let sense = match self.sense {
            Sense::Minimize => "minimize",
            Sense::Maximize => "maximize",
        };
        write!(f, "{sense}: ")?;
        write_row(f, self, &self.objective)?;
        writeln!(f)?;
        for (row, rhs) in &self.linear_eq {
            write!(f, "eq: ")?;
            write_row(f, self, row)?;
            writeln!(f, " == {rhs:e}")?;
        }
        for (row, dir, rhs) in &self.linear_ineq {
            write!(f, "ineq: ")?;
            write_row(f, self, row)?;
            let op = match dir {
                Direction::LessEq => "<=",
                Direction::GreaterEq => ">=",
            };
            writeln!(f, " {op} {rhs:e}")?;
        }
        for (idx, block) in self.psd_blocks.iter().enumerate() {
            writeln!(f, "psd block {idx} (order {}):", block.size)?;
            writeln!(f, "  constant: {:?}", block.constant.as_slice())?;
            for &(k, row, col, coef) in &block.entries {
                let var = self
                    .variables
                    .iter()
                    .rev()
                    .find(|var| var.offset <= k)
                    .expect("parameter belongs to a variable");
                writeln!(f, "  ({row},{col}) += {coef:+e}*{}[{}]", var.name, k - var.offset)?;
            }
        }
        Ok(())
    }
}
