//! Thin facade over the LP backend.
//!
//! The optimizer builds problems as plain coefficient lists; this module
//! owns the translation to the solver and the solver policy: single
//! threaded for reproducibility, simplex for small problems, interior
//! point with crossover for large ones (the time-expanded relaxations,
//! where simplex is an order of magnitude slower).

use highs::{HighsModelStatus, RowProblem, Sense};

/// Comparison operator of one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowOp {
    /// Left-hand side equals the right-hand side.
    Eq,
    /// Left-hand side at most the right-hand side.
    Le,
    /// Left-hand side at least the right-hand side.
    Ge,
}

/// One constraint: `sum(coef * var) op rhs`.
#[derive(Debug, Clone)]
pub(crate) struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub op: RowOp,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy)]
struct LpCol {
    objective: f64,
    lower: f64,
    upper: f64,
}

/// A linear maximization problem under construction.
#[derive(Debug, Default)]
pub(crate) struct LpProblem {
    cols: Vec<LpCol>,
    rows: Vec<LpRow>,
}

/// Optimal solution of an [`LpProblem`].
#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    /// One value per column, in creation order.
    pub values: Vec<f64>,
    /// Objective at the solution.
    pub objective: f64,
}

/// Solver failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum LpError {
    Infeasible,
    Unbounded,
    Failed(String),
}

impl std::fmt::Display for LpError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Infeasible => write!(f, "the linear program is infeasible"),
            Self::Unbounded => write!(f, "the linear program is unbounded"),
            Self::Failed(status) => write!(f, "the LP solver failed with status {status}"),
        }
    }
}

/// Column-count threshold above which the interior-point method replaces
/// simplex.
const IPM_COLUMN_THRESHOLD: usize = 8_000;

impl LpProblem {
    /// Creates an empty maximization problem.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a column with the given objective coefficient and bounds;
    /// returns its index.
    pub fn add_col(&mut self, objective: f64, lower: f64, upper: f64) -> usize {
        self.cols.push(LpCol {
            objective,
            lower,
            upper,
        });
        self.cols.len() - 1
    }

    /// Adds a constraint row over previously added columns.
    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, op: RowOp, rhs: f64) {
        debug_assert!(terms.iter().all(|&(c, _)| c < self.cols.len()));
        self.rows.push(LpRow { terms, op, rhs });
    }

    /// Number of columns added so far.
    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// Maximizes the objective and returns the optimal solution.
    pub fn solve_max(&self) -> Result<LpSolution, LpError> {
        let mut pb = RowProblem::default();
        let cols: Vec<highs::Col> = self
            .cols
            .iter()
            .map(|c| {
                if c.upper.is_finite() {
                    pb.add_column(c.objective, c.lower..=c.upper)
                } else {
                    pb.add_column(c.objective, c.lower..)
                }
            })
            .collect();
        for row in &self.rows {
            let terms: Vec<(highs::Col, f64)> =
                row.terms.iter().map(|&(c, v)| (cols[c], v)).collect();
            match row.op {
                RowOp::Eq => pb.add_row(row.rhs..=row.rhs, &terms),
                RowOp::Le => pb.add_row(..=row.rhs, &terms),
                RowOp::Ge => pb.add_row(row.rhs.., &terms),
            };
        }

        let mut model = pb.optimise(Sense::Maximise);
        model.make_quiet();
        model.set_option("threads", 1);
        if self.cols.len() >= IPM_COLUMN_THRESHOLD {
            model.set_option("solver", "ipm");
            model.set_option("run_crossover", "on");
        }
        let solved = model.solve();
        match solved.status() {
            HighsModelStatus::Optimal => {
                let objective = solved.objective_value();
                let values = solved.get_solution().columns().to_vec();
                Ok(LpSolution { values, objective })
            }
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
                Err(LpError::Infeasible)
            }
            HighsModelStatus::Unbounded => Err(LpError::Unbounded),
            other => Err(LpError::Failed(format!("{other:?}"))),
        }
    }
}
