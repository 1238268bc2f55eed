//! Solvers for the coupled SQE eigenvalue equations
//! `L_bar_q |a^(q)> = g I_bar_q |a^(q)>`, `q = 1..n`, whose largest
//! eigenvalue `g_r` is the maximal expectation of a test operator over pure
//! states of multipartite Schmidt rank at most `r` for a given partition.
//!
//! Three routes are provided:
//!
//! * closed forms for rank-one test operators with an orthonormal product
//!   basis structure ([`solve_opb`]),
//! * party-count reduction for operators that are block diagonal in one
//!   party's basis, including the purification rule for rank-one operators
//!   ([`solve_partially_separable`]),
//! * alternating generalized-eigenvalue sweeps with random restarts
//!   ([`alternating_solve`]).
//!
//! [`g_r_max`] combines them and brackets the result with an upper bound.

mod alternating;
mod blocks;
mod gmax;
mod gram;
mod opb;
mod partially_separable;
mod residual;
mod spinor;
mod spinor_space;
mod transform;

use serde::{Deserialize, Serialize};

pub use alternating::{alternating_solve, alternating_solve_from};
pub use gmax::{g_r_max, upper_bound, GrEstimate, EXACT_TOL};
pub use gram::{build_gram, GramOperators};
pub use opb::{detect_opb, find_opb_decompositions, solve_opb, ProductTerm};
pub use partially_separable::solve_partially_separable;
pub use residual::second_form_residual;
pub use spinor::SpinorDecomposition;
pub use spinor_space::{spinor_space_expectation_check, SPINOR_SPACE_LIMIT};
pub use transform::{local_transform, transform_solution};

use crate::partition::Partition;

/// Relative cutoff below which Gram eigenvalues are treated as zero.
pub const GRAM_CUTOFF: f64 = 1e-10;

/// How a value of `g` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedFormOpb,
    PartiallySeparable,
    Alternating,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedFormOpb => "closed_form_opb",
            Method::PartiallySeparable => "partially_separable",
            Method::Alternating => "alternating",
        }
    }
}

/// Iteration controls for the alternating solver and `g_r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    /// Sweeps over all parties.
    pub max_iter: usize,
    /// Stopping threshold on `|delta g|` between sweeps.
    pub tol: f64,
    /// Stopping threshold on the second-form orthogonality violation.
    pub orth_tol: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Try the closed-form routes in `g_r_max`.
    pub closed_forms: bool,
    /// Run the alternating solver in `g_r_max` even when a closed form is exact.
    pub always_heuristic: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 500,
            tol: 1e-10,
            orth_tol: 1e-8,
            restarts: 32,
            seed: 0x5eed,
            closed_forms: true,
            always_heuristic: true,
        }
    }
}

/// A stationary point `(g, |phi_r>)` of the SQE equations.
#[derive(Clone, Debug)]
pub struct SqeSolution {
    pub g: f64,
    pub spinor: SpinorDecomposition,
    /// `|| (L - g) |phi_r> ||`.
    pub residual_norm: f64,
    /// Largest norm of `<a_j^(not q)| chi>` over rows `j` and parties `q`.
    pub residual_orthogonality: f64,
    pub converged: bool,
    pub restarts_used: usize,
    pub iterations: usize,
    pub method: Method,
    /// `g` after every single-party update, starting from the initial guess.
    pub trace: Vec<f64>,
}

impl SqeSolution {
    pub fn partition(&self) -> &Partition {
        self.spinor.partition()
    }

    pub fn rank(&self) -> usize {
        self.spinor.rank()
    }

    pub fn report(&self) -> SolverReport {
        SolverReport {
            partition: self.partition().label(),
            r: self.rank(),
            g: self.g,
            converged: self.converged,
            restarts_used: self.restarts_used,
            residual_norm: self.residual_norm,
            orthogonality_violation: self.residual_orthogonality,
            method: self.method,
        }
    }
}

/// Machine-readable summary of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub partition: String,
    pub r: usize,
    pub g: f64,
    pub converged: bool,
    pub restarts_used: usize,
    pub residual_norm: f64,
    pub orthogonality_violation: f64,
    pub method: Method,
}
