//! Primal-dual interior-point solver for [`ConicProgram`]s.
//!
//! The program is rewritten as `min c'x, A x + s = b, s in K` with `K` a
//! product of a zero cone (equalities and fixed variables), the nonnegative
//! orthant (finite bounds) and 3-dimensional second-order cones (one per
//! rotated cone). A homogeneous self-dual embedding is solved with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps; each step
//! factors the quasi-definite KKT matrix with a sparse LDL^T.

pub mod cones;
mod ipm;
pub mod standard;

use serde::Serialize;

use crate::error::Result;
use crate::program::ConicProgram;
use crate::scalar::Scalar;

use standard::{RowKind, StandardForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Stopped early at an iterate meeting the reduced tolerances.
    AlmostOptimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

impl SolveStatus {
    /// Optimal or stopped at an iterate meeting the reduced tolerances.
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Scaled primal and dual residual tolerance.
    pub tol_feas: f64,
    /// Relative duality gap tolerance.
    pub tol_gap: f64,
    /// Residual and gap tolerances accepted when the solver stalls.
    pub reduced_tol_feas: f64,
    pub reduced_tol_gap: f64,
    /// Certificate tolerance for infeasibility.
    pub tol_infeas: f64,
    pub max_iter: usize,
    /// Fraction of the step to the cone boundary.
    pub step_fraction: f64,
    /// Static KKT regularization.
    pub static_reg: f64,
    /// Iterative refinement steps per KKT solve.
    pub max_refine: usize,
    /// Ruiz equilibration passes (0 disables).
    pub equilibrate_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            reduced_tol_feas: 1e-5,
            reduced_tol_gap: 1e-5,
            tol_infeas: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
            static_reg: 1e-10,
            max_refine: 10,
            equilibrate_iters: 25,
        }
    }
}

/// Solution in program terms.
///
/// With `Optimal`, the duals satisfy
/// `c = -A_eq' y + z_lower - z_upper + sum_k (mu_gamma e_gamma + mu_rho e_rho + mu_flow e_flow)`
/// with `z_lower, z_upper >= 0` and `4 mu_gamma mu_rho >= mu_flow^2`. With
/// `PrimalInfeasible`, the same vectors form a Farkas certificate: the right
/// side without `c` vanishes and `b'y - l'z_lower + u'z_upper = -1`. With
/// `DualInfeasible`, `x` is an improving ray with `c'x = -1`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveResult<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    pub eq_duals: Vec<T>,
    pub lower_duals: Vec<T>,
    pub upper_duals: Vec<T>,
    pub cone_duals: Vec<[T; 3]>,
    /// Including the program's objective offset.
    pub primal_objective: T,
    pub dual_objective: T,
    /// Relative duality gap.
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub iterations: usize,
    pub trace: Vec<String>,
}

/// Solves `program`. Deterministic for fixed inputs; holds no state between
/// calls.
pub fn solve<T: Scalar>(program: &ConicProgram<T>, options: &SolverOptions) -> Result<SolveResult<T>> {
    program.validate()?;
    let orig = StandardForm::from_program(program);
    let mut sf = orig.clone();
    if options.equilibrate_iters > 0 {
        sf.equilibrate(options.equilibrate_iters);
    }
    let out = ipm::run(&sf, &orig, options)?;

    let n = program.n_vars;
    let mut eq_duals = vec![T::zero(); program.n_eq];
    let mut lower_duals = vec![T::zero(); n];
    let mut upper_duals = vec![T::zero(); n];
    let mut cone_duals = vec![[T::zero(); 3]; program.cones.len()];
    let mut w = vec![[T::zero(); 3]; program.cones.len()];
    for (i, kind) in orig.rows.iter().enumerate() {
        let z = out.z[i];
        match *kind {
            RowKind::Equality(r) => eq_duals[r] = z,
            RowKind::Fixed(j) => {
                lower_duals[j] = (-z).max(T::zero());
                upper_duals[j] = z.max(T::zero());
            }
            RowKind::Lower(j) => lower_duals[j] = z,
            RowKind::Upper(j) => upper_duals[j] = z,
            RowKind::Cone(k, c) => w[k][c] = z,
        }
    }
    let r2 = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let sq2 = T::of(std::f64::consts::SQRT_2);
    for (k, wk) in w.iter().enumerate() {
        cone_duals[k] = [(wk[0] + wk[1]) * r2, (wk[0] - wk[1]) * r2, wk[2] * sq2];
    }
    let offset = program.objective_offset;
    Ok(SolveResult {
        status: out.status,
        x: out.x,
        eq_duals,
        lower_duals,
        upper_duals,
        cone_duals,
        primal_objective: out.pobj + offset,
        dual_objective: out.dobj + offset,
        gap: out.gap,
        primal_residual: out.pres,
        dual_residual: out.dres,
        iterations: out.iterations,
        trace: out.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::RotatedCone;

    #[test]
    fn single_variable_lp() {
        let mut p = ConicProgram::<f64>::new(1);
        p.objective[0] = 1.0;
        p.add_eq(&[(0, 1.0)], 1.0);
        p.lower[0] = 0.0;
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cone_boundary() {
        // min t  s.t.  t * 1 >= 1^2
        let mut p = ConicProgram::<f64>::new(3);
        p.objective[0] = 1.0;
        p.lower[0] = 0.0;
        p.lower[1] = 1.0;
        p.upper[1] = 1.0;
        p.lower[2] = 1.0;
        p.upper[2] = 1.0;
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "{:#?}", r.trace);
        assert!((r.x[0] - 1.0).abs() < 1e-7, "{}", r.x[0]);
    }

    #[test]
    fn detects_primal_infeasible() {
        let mut p = ConicProgram::<f64>::new(2);
        p.add_eq(&[(0, 1.0), (1, 1.0)], 3.0);
        p.lower = vec![0.0, 0.0];
        p.upper = vec![1.0, 1.0];
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::PrimalInfeasible, "{:#?}", r.trace);
        let farkas = 3.0 * r.eq_duals[0] + r.upper_duals[0] + r.upper_duals[1];
        assert!(farkas < 0.0);
    }

    #[test]
    fn detects_unbounded() {
        let mut p = ConicProgram::<f64>::new(2);
        p.objective = vec![-1.0, 0.0];
        p.add_eq(&[(0, 1.0), (1, -1.0)], 0.0);
        p.lower = vec![0.0, 0.0];
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::DualInfeasible, "{:#?}", r.trace);
    }

    #[test]
    fn single_precision_smoke() {
        let mut p = ConicProgram::<f32>::new(3);
        p.objective = vec![1.0, 1.0, 0.0];
        p.add_eq(&[(2, 1.0)], 2.0);
        p.lower[0] = 0.0;
        p.lower[1] = 0.0;
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        // min g + r s.t. g r >= 4 -> g = r = 2
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.primal_objective - 4.0).abs() < 1e-3);
    }

    #[test]
    fn dual_identity_holds_at_optimum() {
        let mut p = ConicProgram::<f64>::new(4);
        p.objective = vec![1.0, 0.5, 0.0, -0.2];
        p.add_eq(&[(2, 1.0), (3, 1.0)], 3.0);
        p.lower = vec![0.0, 0.5, f64::NEG_INFINITY, 0.0];
        p.upper = vec![10.0, 4.0, f64::INFINITY, 2.0];
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let mut rhs = vec![0.0; 4];
        rhs[2] -= r.eq_duals[0];
        rhs[3] -= r.eq_duals[0];
        for j in 0..4 {
            rhs[j] += r.lower_duals[j] - r.upper_duals[j];
        }
        let mu = r.cone_duals[0];
        rhs[0] += mu[0];
        rhs[1] += mu[1];
        rhs[2] += mu[2];
        for j in 0..4 {
            assert!((rhs[j] - p.objective[j]).abs() < 1e-7, "{rhs:?}");
        }
        assert!(4.0 * mu[0] * mu[1] >= mu[2] * mu[2] - 1e-9);
        assert!((r.primal_objective - r.dual_objective).abs() < 1e-7);
    }

    #[test]
    fn repeatable() {
        let mut p = ConicProgram::<f64>::new(3);
        p.objective = vec![1.0, 2.0, 0.3];
        p.add_eq(&[(2, 1.0)], -1.5);
        p.lower[0] = 0.0;
        p.lower[1] = 0.1;
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace, b.trace);
    }
}
