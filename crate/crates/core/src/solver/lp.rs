//! Continuous relaxations of [`MipModel`]s.
//!
//! Pivoting is delegated to `microlp` (bounded revised simplex with an LU
//! factorized basis and dual-simplex warm starts). This layer owns the
//! translation: variables live in `[0, 1]`, fixings become equal bounds and
//! rows are scaled to unit max coefficient before they reach the engine.

use std::collections::HashSet;
use std::sync::Arc;

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome, Variable};
use thiserror::Error;

use crate::model::{Fixings, MipModel, Row, Sense};

/// Row/bound tolerance an optimal LP point is expected to meet.
pub const TOL_LP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value; `-inf` unless `Optimal`.
    pub objective: f64,
    /// Primal values in `[0, 1]`; empty unless `Optimal`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LpError {
    #[error("relaxation is infeasible")]
    Infeasible,
    #[error("relaxation is unbounded")]
    Unbounded,
    #[error("LP engine failure: {0}")]
    Engine(String),
}

impl From<microlp::Error> for LpError {
    fn from(e: microlp::Error) -> Self {
        match e {
            microlp::Error::Infeasible => LpError::Infeasible,
            microlp::Error::Unbounded => LpError::Unbounded,
            other => LpError::Engine(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("LP engine failure: {0}")]
pub struct SolverError(pub String);

/// Coefficients below this fraction of a row's largest are dropped before
/// the row reaches the engine, whose pivoting turns singular on them.
const DROP_RELATIVE: f64 = 1e-7;

/// Drop threshold of the last-resort statement.
const DROP_COARSE: f64 = 1e-4;

/// The row as handed to the engine. Tiny coefficients are dropped and the
/// right-hand side is loosened by the most their `[0, 1]` variables could
/// contribute, so the engine always sees a relaxation of the row.
fn scaled(row: &Row, vars: &[Variable], unit: bool, drop: f64) -> Option<(Vec<(Variable, f64)>, ComparisonOp, f64)> {
    let largest = row.coeffs.iter().fold(0.0f64, |m, &(_, a)| m.max(a.abs()));
    if largest == 0.0 {
        return None;
    }
    let scale = if unit { 1.0 } else { largest };
    let mut rhs = row.rhs;
    let mut expr = Vec::with_capacity(row.coeffs.len());
    for &(j, a) in &row.coeffs {
        if a == 0.0 {
            continue;
        }
        if a.abs() < drop * largest && row.sense != Sense::Eq {
            match row.sense {
                Sense::Le => rhs -= a.min(0.0),
                _ => rhs -= a.max(0.0),
            }
            continue;
        }
        expr.push((vars[j], a / scale));
    }
    let op = match row.sense {
        Sense::Le => ComparisonOp::Le,
        Sense::Ge => ComparisonOp::Ge,
        Sense::Eq => ComparisonOp::Eq,
    };
    Some((expr, op, rhs / scale))
}

fn empty_row_holds(row: &Row) -> bool {
    match row.sense {
        Sense::Le => 0.0 <= row.rhs,
        Sense::Ge => 0.0 >= row.rhs,
        Sense::Eq => row.rhs == 0.0,
    }
}

fn into_solution(outcome: SolveOutcome) -> Result<microlp::Solution, LpError> {
    match outcome {
        SolveOutcome::Solution(s) => Ok(s),
        SolveOutcome::Interrupted(_) => Err(LpError::Engine("LP solve interrupted".into())),
    }
}

/// An optimal relaxation that can be edited (fix a variable, add a row)
/// and re-optimized from its current basis.
///
/// A warm edit that reports infeasibility is re-checked by a cold solve of
/// the edited problem: the engine's dual ratio test can give up on a
/// feasible problem when the variable being fixed is basic.
#[derive(Clone)]
pub struct LpSession {
    solution: microlp::Solution,
    vars: Vec<Variable>,
    /// Objective of variables substituted out by the cold solve.
    offset: f64,
    model: Arc<MipModel>,
    fixings: Fixings,
    extra_rows: Vec<Row>,
}

impl std::fmt::Debug for LpSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LpSession")
            .field("num_vars", &self.vars.len())
            .field("objective", &self.objective())
            .finish()
    }
}

/// How a cold solve states the problem. The engine occasionally reports a
/// singular basis on one statement of a problem it solves in another.
#[derive(Clone, Copy, Debug)]
enum Statement {
    /// Rows scaled to unit max coefficient, fixings as bounds.
    Scaled,
    /// Rows as given, fixings as bounds.
    Raw,
    /// Rows scaled, fixings as equality rows.
    FixingRows,
    /// Fixed variables substituted out of the rows and the objective, rows
    /// the bounds already imply dropped.
    Substituted,
    /// As `Substituted` with a coarser drop threshold: a weaker but still
    /// valid relaxation, for bases the engine cannot keep nonsingular.
    Coarse,
}

/// A cold solution, its variables and the objective constant carried by
/// substituted variables.
type Cold = (microlp::Solution, Vec<Variable>, f64);

fn cold_solve(model: &MipModel, fixings: &Fixings, extra_rows: &[Row]) -> Result<Cold, LpError> {
    let mut last = None;
    for how in [
        Statement::Scaled,
        Statement::Raw,
        Statement::FixingRows,
        Statement::Substituted,
        Statement::Coarse,
    ] {
        match cold_solve_as(model, fixings, extra_rows, how) {
            Err(LpError::Engine(m)) => last = Some(m),
            other => return other,
        }
    }
    Err(LpError::Engine(last.unwrap_or_default()))
}

/// `row` with fixed variables moved to the right-hand side, or `None` when
/// the bounds of the free variables already imply it.
fn substitute(row: &Row, fixings: &Fixings) -> Option<Row> {
    let mut rhs = row.rhs;
    let mut coeffs = Vec::with_capacity(row.coeffs.len());
    for &(j, a) in &row.coeffs {
        match fixings.get(j) {
            Some(v) => rhs -= if v { a } else { 0.0 },
            None => coeffs.push((j, a)),
        }
    }
    let lo: f64 = coeffs.iter().map(|&(_, a)| a.min(0.0)).sum();
    let hi: f64 = coeffs.iter().map(|&(_, a)| a.max(0.0)).sum();
    let slack = 1e-12 * rhs.abs().max(1.0);
    let implied = match row.sense {
        Sense::Le => hi <= rhs + slack,
        Sense::Ge => lo >= rhs - slack,
        Sense::Eq => false,
    };
    (!implied).then(|| Row {
        coeffs,
        sense: row.sense,
        rhs,
        tag: row.tag,
    })
}

/// Exact identity of a row, for dropping duplicates.
fn row_key(row: &Row) -> (Vec<(usize, u64)>, u8, u64) {
    let mut coeffs: Vec<(usize, u64)> = row.coeffs.iter().map(|&(j, a)| (j, a.to_bits())).collect();
    coeffs.sort_unstable();
    (coeffs, row.sense as u8, row.rhs.to_bits())
}

fn cold_solve_as(model: &MipModel, fixings: &Fixings, extra_rows: &[Row], how: Statement) -> Result<Cold, LpError> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let as_bounds = !matches!(how, Statement::FixingRows);
    let substituted = matches!(how, Statement::Substituted | Statement::Coarse);
    let mut offset = 0.0;
    let vars: Vec<Variable> = model
        .objective
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let fixed = fixings.get(j).filter(|_| as_bounds);
            let bounds = match fixed {
                Some(true) => (1.0, 1.0),
                Some(false) => (0.0, 0.0),
                None => (0.0, 1.0),
            };
            if substituted && fixed.is_some() {
                offset += c * bounds.0;
                return problem.add_var(0.0, bounds);
            }
            problem.add_var(c, bounds)
        })
        .collect();
    let mut seen = HashSet::new();
    for row in model.rows.iter().chain(extra_rows) {
        let reduced;
        let row = if substituted {
            match substitute(row, fixings) {
                Some(r) => {
                    reduced = r;
                    &reduced
                }
                None => continue,
            }
        } else {
            row
        };
        if substituted && !seen.insert(row_key(row)) {
            continue;
        }
        let drop = if matches!(how, Statement::Coarse) {
            DROP_COARSE
        } else {
            DROP_RELATIVE
        };
        match scaled(row, &vars, matches!(how, Statement::Raw), drop) {
            Some((expr, op, rhs)) => problem.add_constraint(expr, op, rhs),
            None if empty_row_holds(row) => {}
            None => return Err(LpError::Infeasible),
        }
    }
    if !as_bounds {
        for (j, v) in fixings.iter() {
            problem.add_constraint([(vars[j], 1.0)], ComparisonOp::Eq, if v { 1.0 } else { 0.0 });
        }
    }
    let solution = into_solution(problem.solve()?)?;
    Ok((solution, vars, offset))
}

impl LpSession {
    pub fn new(model: &MipModel, fixings: &Fixings) -> Result<Self, LpError> {
        Self::with_shared(Arc::new(model.clone()), fixings)
    }

    /// Like [`LpSession::new`] without copying an already shared model.
    pub fn with_shared(model: Arc<MipModel>, fixings: &Fixings) -> Result<Self, LpError> {
        let (solution, vars, offset) = cold_solve(&model, fixings, &[])?;
        Ok(LpSession {
            solution,
            vars,
            offset,
            model,
            fixings: fixings.clone(),
            extra_rows: Vec::new(),
        })
    }

    pub fn objective(&self) -> f64 {
        self.solution.objective() + self.offset
    }

    pub fn value(&self, j: usize) -> f64 {
        self.solution.var_value_raw(self.vars[j]).clamp(0.0, 1.0)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.vars.len()).map(|j| self.value(j)).collect()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn fixings(&self) -> &Fixings {
        &self.fixings
    }

    fn after_edit(
        warm: Result<SolveOutcome, microlp::Error>,
        vars: Vec<Variable>,
        offset: f64,
        model: Arc<MipModel>,
        fixings: Fixings,
        extra_rows: Vec<Row>,
    ) -> Result<Self, LpError> {
        let warm = warm.map_err(LpError::from).and_then(into_solution);
        let (solution, vars, offset) = match warm {
            Ok(solution) => (solution, vars, offset),
            Err(LpError::Infeasible | LpError::Engine(_)) => cold_solve(&model, &fixings, &extra_rows)?,
            Err(e) => return Err(e),
        };
        Ok(LpSession {
            solution,
            vars,
            offset,
            model,
            fixings,
            extra_rows,
        })
    }

    /// Pins variable `j` and re-optimizes.
    pub fn fix(self, j: usize, value: bool) -> Result<Self, LpError> {
        let LpSession {
            solution,
            vars,
            offset,
            model,
            mut fixings,
            extra_rows,
        } = self;
        if fixings.get(j) == Some(value) {
            return Ok(LpSession {
                solution,
                vars,
                offset,
                model,
                fixings,
                extra_rows,
            });
        }
        if fixings.fix(j, value).is_err() {
            return Err(LpError::Infeasible);
        }
        let v = if value { 1.0 } else { 0.0 };
        let warm = solution.add_constraint([(vars[j], 1.0)], ComparisonOp::Eq, v);
        Self::after_edit(warm, vars, offset, model, fixings, extra_rows)
    }

    /// Applies several fixings with a single re-optimization. On `[0, 1]`
    /// variables the row `sum_{v=1} x_j - sum_{v=0} x_j = #ones` holds
    /// exactly when every fixing does.
    pub fn fix_all(self, fixings: impl IntoIterator<Item = (usize, bool)>) -> Result<Self, LpError> {
        let LpSession {
            solution,
            vars,
            offset,
            model,
            fixings: mut fixed,
            extra_rows,
        } = self;
        let mut fresh = Vec::new();
        for (j, v) in fixings {
            match fixed.get(j) {
                Some(old) if old == v => {}
                Some(_) => return Err(LpError::Infeasible),
                None => {
                    let _ = fixed.fix(j, v);
                    fresh.push((j, v));
                }
            }
        }
        if fresh.is_empty() {
            return Ok(LpSession {
                solution,
                vars,
                offset,
                model,
                fixings: fixed,
                extra_rows,
            });
        }
        let ones = fresh.iter().filter(|&&(_, v)| v).count() as f64;
        let expr: Vec<(Variable, f64)> = fresh
            .iter()
            .map(|&(j, v)| (vars[j], if v { 1.0 } else { -1.0 }))
            .collect();
        let warm = solution.add_constraint(expr, ComparisonOp::Eq, ones);
        Self::after_edit(warm, vars, offset, model, fixed, extra_rows)
    }

    /// Appends a row and re-optimizes.
    pub fn add_row(self, row: &Row) -> Result<Self, LpError> {
        let LpSession {
            solution,
            vars,
            offset,
            model,
            fixings,
            mut extra_rows,
        } = self;
        extra_rows.push(row.clone());
        match scaled(row, &vars, false, DROP_RELATIVE) {
            Some((expr, op, rhs)) => {
                let warm = solution.add_constraint(expr, op, rhs);
                Self::after_edit(warm, vars, offset, model, fixings, extra_rows)
            }
            None if empty_row_holds(row) => Ok(LpSession {
                solution,
                vars,
                offset,
                model,
                fixings,
                extra_rows,
            }),
            None => Err(LpError::Infeasible),
        }
    }
}

/// Solves the continuous relaxation of `model` (all variables in `[0, 1]`)
/// with `fixings` imposed as equalities.
pub fn solve_lp(model: &MipModel, fixings: &Fixings) -> Result<LpSolution, SolverError> {
    match LpSession::new(model, fixings) {
        Ok(s) => Ok(LpSolution {
            status: LpStatus::Optimal,
            objective: s.objective(),
            values: s.values(),
        }),
        Err(LpError::Infeasible) => Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::NEG_INFINITY,
            values: Vec::new(),
        }),
        Err(LpError::Unbounded) => Ok(LpSolution {
            status: LpStatus::Unbounded,
            objective: f64::INFINITY,
            values: Vec::new(),
        }),
        Err(LpError::Engine(msg)) => Err(SolverError(msg)),
    }
}
