//! A small dense semidefinite engine over complex Hermitian blocks.
//!
//! Problems are in primal standard form
//!
//! ```text
//! minimize    Σ_b Re tr(C_b X_b)
//! subject to  Σ_b Re tr(A_ib X_b) = rhs_i,   X_b ⪰ 0
//! ```
//!
//! and are solved by a primal–dual interior-point method. Whatever the
//! iteration produces is re-verified from scratch before a status is
//! reported: `Optimal`/`Feasible` only for block values that pass a fresh
//! eigendecomposition and residual recomputation, `Infeasible` only with a
//! verified Farkas ray, `Indeterminate` otherwise.

mod ipm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

pub use ipm::IpmStats;

/// Coefficient matrix acting on one block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockTerm {
    pub block: usize,
    pub coeff: ComplexMatrix,
}

impl BlockTerm {
    pub fn new(block: usize, coeff: ComplexMatrix) -> Self {
        Self { block, coeff }
    }
}

/// `Σ_terms Re tr(coeff · X_block) = rhs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineConstraint {
    pub terms: Vec<BlockTerm>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConicProblem {
    pub psd_blocks: Vec<usize>,
    pub constraints: Vec<AffineConstraint>,
    /// Linear objective to minimize; `None` means a pure feasibility problem.
    pub objective: Option<Vec<BlockTerm>>,
}

impl ConicProblem {
    pub fn new(psd_blocks: Vec<usize>) -> Self {
        Self {
            psd_blocks,
            ..Default::default()
        }
    }

    pub fn add_constraint(&mut self, terms: Vec<BlockTerm>, rhs: f64) {
        self.constraints.push(AffineConstraint { terms, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<BlockTerm>) {
        self.objective = Some(terms);
    }

    /// Checks block indices, coefficient shapes, Hermitian coefficients and
    /// finite right-hand sides.
    pub fn validate(&self) -> Result<()> {
        let check_term = |t: &BlockTerm, what: &str| -> Result<()> {
            let dim = *self.psd_blocks.get(t.block).ok_or_else(|| {
                Error::Malformed(format!("{what} references missing block {}", t.block))
            })?;
            if t.coeff.rows() != dim || t.coeff.cols() != dim {
                return Err(Error::Malformed(format!(
                    "{what}: {}x{} coefficient on block {} of dimension {dim}",
                    t.coeff.rows(),
                    t.coeff.cols(),
                    t.block
                )));
            }
            let scale = 1.0f64.max(t.coeff.max_abs());
            if t.coeff.hermitian_defect() > 1e-10 * scale {
                return Err(Error::Malformed(format!(
                    "{what}: coefficient on block {} is not Hermitian",
                    t.block
                )));
            }
            Ok(())
        };
        if self.psd_blocks.iter().any(|&d| d == 0) {
            return Err(Error::Malformed("zero-sized block".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(Error::Malformed(format!("constraint {i}: non-finite rhs")));
            }
            for t in &c.terms {
                check_term(t, &format!("constraint {i}"))?;
            }
        }
        if let Some(obj) = &self.objective {
            for t in obj {
                check_term(t, "objective")?;
            }
        }
        Ok(())
    }

    /// Left-hand side values `Σ Re tr(A_i X)` for block values `x`.
    pub fn constraint_values(&self, x: &[ComplexMatrix]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|t| t.coeff.hs_dot(&x[t.block])).sum())
            .collect()
    }

    pub fn objective_value(&self, x: &[ComplexMatrix]) -> Option<f64> {
        self.objective
            .as_ref()
            .map(|obj| obj.iter().map(|t| t.coeff.hs_dot(&x[t.block])).sum())
    }

    /// `A*(y) = Σ_i y_i A_i`, block by block.
    pub fn adjoint_map(&self, y: &[f64]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> = self
            .psd_blocks
            .iter()
            .map(|&d| ComplexMatrix::zeros(d, d))
            .collect();
        for (c, &yi) in self.constraints.iter().zip(y) {
            if yi == 0.0 {
                continue;
            }
            for t in &c.terms {
                out[t.block] = &out[t.block] + &t.coeff.scale(yi);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Indeterminate,
}

/// Ray `r` with `A*(r) ⪰ −min_eigenvalue_slack` and `rhs·r = −1`. Any
/// feasible point would then need trace at least `1 / slack`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
    pub rhs_pairing: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicSolution {
    pub block_values: Vec<ComplexMatrix>,
    pub objective_value: Option<f64>,
    pub max_constraint_residual: f64,
    pub min_block_eigenvalue: f64,
    pub status: SolveStatus,
    /// Dual multipliers of the final interior-point iterate.
    pub dual: Vec<f64>,
    pub farkas: Option<FarkasCertificate>,
    pub iterations: usize,
}

/// Residuals recomputed from the problem data and block values alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub max_constraint_residual: f64,
    pub min_block_eigenvalue: f64,
    pub objective_value: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Recomputes every residual and block eigenvalue of `s` against `p`.
pub fn verify(p: &ConicProblem, s: &ConicSolution, feas_tol: f64) -> Verification {
    verify_values(p, &s.block_values, feas_tol)
}

pub fn verify_values(p: &ConicProblem, x: &[ComplexMatrix], feas_tol: f64) -> Verification {
    let shapes_ok = x.len() == p.psd_blocks.len()
        && x
            .iter()
            .zip(&p.psd_blocks)
            .all(|(m, &d)| m.rows() == d && m.cols() == d);
    if !shapes_ok {
        return Verification {
            max_constraint_residual: f64::INFINITY,
            min_block_eigenvalue: f64::NEG_INFINITY,
            objective_value: None,
            passed: false,
        };
    }
    let max_constraint_residual = p
        .constraint_values(x)
        .iter()
        .zip(&p.constraints)
        .map(|(v, c)| (v - c.rhs).abs())
        .fold(0.0, f64::max);
    let hermitian = x
        .iter()
        .all(|m| m.hermitian_defect() <= feas_tol.max(1e-12 * m.max_abs()));
    let min_block_eigenvalue = x
        .iter()
        .map(ComplexMatrix::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    Verification {
        max_constraint_residual,
        min_block_eigenvalue,
        objective_value: p.objective_value(x),
        passed: hermitian
            && max_constraint_residual <= feas_tol
            && min_block_eigenvalue >= -feas_tol,
    }
}

/// Checks a Farkas ray: `rhs·r < 0` and `A*(r) ⪰ −feas_tol·|rhs·r|`.
pub fn verify_farkas(p: &ConicProblem, cert: &FarkasCertificate, feas_tol: f64) -> bool {
    if cert.multipliers.len() != p.constraints.len() {
        return false;
    }
    let pairing: f64 = p
        .constraints
        .iter()
        .zip(&cert.multipliers)
        .map(|(c, r)| c.rhs * r)
        .sum();
    if pairing >= -feas_tol {
        return false;
    }
    let min_eig = p
        .adjoint_map(&cert.multipliers)
        .iter()
        .map(ComplexMatrix::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    min_eig >= -feas_tol * pairing.abs()
}

/// Solves `p`. The returned status is always backed by an independent
/// re-verification of the returned data.
pub fn solve(p: &ConicProblem, settings: SolverSettings) -> Result<ConicSolution> {
    p.validate()?;
    let feas_tol = settings.feas_tol;
    if feas_tol <= 0.0 || !feas_tol.is_finite() {
        return Err(Error::Malformed(format!("feas_tol must be positive, got {feas_tol}")));
    }

    let reduced = match ipm::reduce(p, feas_tol) {
        ipm::Reduction::Inconsistent(ray) => return Ok(infeasible(p, ray, feas_tol, 0)),
        ipm::Reduction::Rows(rows) => rows,
    };

    let iter_cap = settings.max_iter.clamp(1, 500);
    let main = ipm::run(p, &reduced, false, iter_cap, feas_tol * 1e-3);
    let mut iterations = main.stats.iterations;
    let check = verify_values(p, &main.x, feas_tol);
    if check.passed {
        let status = if p.objective.is_some() && !main.stats.converged {
            SolveStatus::Feasible
        } else if p.objective.is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Feasible
        };
        return Ok(ConicSolution {
            objective_value: check.objective_value,
            max_constraint_residual: check.max_constraint_residual,
            min_block_eigenvalue: check.min_block_eigenvalue,
            block_values: main.x,
            status,
            dual: main.y,
            farkas: None,
            iterations,
        });
    }

    // Phase 1: minimize t subject to A(X) + t·(b − A(I)) = b, X ⪰ 0, t ≥ 0.
    let phase1 = ipm::run(p, &reduced, true, iter_cap, feas_tol * 1e-3);
    iterations += phase1.stats.iterations;
    let t_star = phase1.phase1_t.unwrap_or(f64::INFINITY);
    let check1 = verify_values(p, &phase1.x, feas_tol);
    if check1.passed {
        return Ok(ConicSolution {
            objective_value: check1.objective_value,
            max_constraint_residual: check1.max_constraint_residual,
            min_block_eigenvalue: check1.min_block_eigenvalue,
            block_values: phase1.x,
            status: SolveStatus::Feasible,
            dual: phase1.y,
            farkas: None,
            iterations,
        });
    }
    let dual_obj: f64 = p
        .constraints
        .iter()
        .zip(&phase1.y)
        .map(|(c, y)| c.rhs * y)
        .sum();
    if t_star > feas_tol && dual_obj > 0.0 {
        let ray: Vec<f64> = phase1.y.iter().map(|y| -y / dual_obj).collect();
        let sol = infeasible(p, ray, feas_tol, iterations);
        if sol.status == SolveStatus::Infeasible {
            return Ok(sol);
        }
    }

    // Nothing verifiable: report the best primal iterate honestly.
    let (x, y, check) = if check.max_constraint_residual <= check1.max_constraint_residual {
        (main.x, main.y, check)
    } else {
        (phase1.x, phase1.y, check1)
    };
    Ok(ConicSolution {
        objective_value: check.objective_value,
        max_constraint_residual: check.max_constraint_residual,
        min_block_eigenvalue: check.min_block_eigenvalue,
        block_values: x,
        status: SolveStatus::Indeterminate,
        dual: y,
        farkas: None,
        iterations,
    })
}

fn infeasible(p: &ConicProblem, ray: Vec<f64>, feas_tol: f64, iterations: usize) -> ConicSolution {
    let min_eigenvalue = p
        .adjoint_map(&ray)
        .iter()
        .map(ComplexMatrix::min_eigenvalue)
        .fold(f64::INFINITY, f64::min);
    let rhs_pairing = p.constraints.iter().zip(&ray).map(|(c, r)| c.rhs * r).sum();
    let cert = FarkasCertificate {
        multipliers: ray,
        rhs_pairing,
        min_eigenvalue,
    };
    let ok = verify_farkas(p, &cert, feas_tol);
    let x: Vec<ComplexMatrix> = p
        .psd_blocks
        .iter()
        .map(|&d| ComplexMatrix::zeros(d, d))
        .collect();
    let check = verify_values(p, &x, feas_tol);
    ConicSolution {
        objective_value: check.objective_value,
        max_constraint_residual: check.max_constraint_residual,
        min_block_eigenvalue: check.min_block_eigenvalue,
        block_values: x,
        status: if ok {
            SolveStatus::Infeasible
        } else {
            SolveStatus::Indeterminate
        },
        dual: vec![0.0; p.constraints.len()],
        farkas: ok.then_some(cert),
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn fix_entries(target: &ComplexMatrix) -> ConicProblem {
        // one constraint per real degree of freedom of a Hermitian block
        let n = target.rows();
        let mut p = ConicProblem::new(vec![n]);
        for i in 0..n {
            p.add_constraint(
                vec![BlockTerm::new(0, ComplexMatrix::unit(n, n, i, i))],
                target[(i, i)].re,
            );
            for j in (i + 1)..n {
                let mut re = ComplexMatrix::zeros(n, n);
                re[(i, j)] = Complex64::new(0.5, 0.0);
                re[(j, i)] = Complex64::new(0.5, 0.0);
                p.add_constraint(vec![BlockTerm::new(0, re)], target[(i, j)].re);
                let mut im = ComplexMatrix::zeros(n, n);
                im[(i, j)] = Complex64::new(0.0, 0.5);
                im[(j, i)] = Complex64::new(0.0, -0.5);
                p.add_constraint(vec![BlockTerm::new(0, im)], target[(i, j)].im);
            }
        }
        p
    }

    #[test]
    fn scalar_feasibility() {
        let mut p = ConicProblem::new(vec![1]);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::identity(1))], 1.0);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!((s.block_values[0][(0, 0)].re - 1.0).abs() < 1e-8);
        assert!(verify(&p, &s, 1e-8).passed);
    }

    #[test]
    fn indefinite_fixed_point_is_infeasible() {
        let target = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = fix_entries(&target);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
        let cert = s.farkas.as_ref().unwrap();
        assert!(verify_farkas(&p, cert, 1e-8));
    }

    #[test]
    fn linearly_inconsistent_is_infeasible() {
        let mut p = ConicProblem::new(vec![1]);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::identity(1))], 1.0);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::identity(1).scale(2.0))], 3.0);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn min_eigenvalue_by_trace_minimization() {
        let mut p = ConicProblem::new(vec![2]);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::identity(2))], 1.0);
        p.set_objective(vec![BlockTerm::new(0, ComplexMatrix::diag_real(&[1.0, -2.0]))]);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective_value.unwrap() + 2.0).abs() < 1e-7);
        let e22 = ComplexMatrix::unit(2, 2, 1, 1);
        assert!((&s.block_values[0] - &e22).frobenius_norm() < 1e-6);
        let v = verify(&p, &s, 1e-8);
        assert!(v.passed && v.max_constraint_residual <= 1e-8);
    }

    #[test]
    fn exact_solution_has_zero_residual() {
        let target = ComplexMatrix::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let p = fix_entries(&target);
        let exact = ConicSolution {
            block_values: vec![target.clone()],
            objective_value: None,
            max_constraint_residual: 0.0,
            min_block_eigenvalue: 1.0,
            status: SolveStatus::Feasible,
            dual: vec![],
            farkas: None,
            iterations: 0,
        };
        let v = verify(&p, &exact, 1e-8);
        assert!(v.passed);
        assert!(v.max_constraint_residual <= 1e-12);

        // a 10·feas_tol bump in a tight entry must be caught
        let mut bumped = exact.clone();
        bumped.block_values[0][(0, 0)] += Complex64::new(1e-7, 0.0);
        assert!(!verify(&p, &bumped, 1e-8).passed);
    }

    #[test]
    fn unique_point_is_recovered() {
        let target = ComplexMatrix::from_row_major(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.3, 0.4),
                Complex64::new(0.3, -0.4),
                Complex64::new(0.5, 0.0),
            ],
        )
        .unwrap();
        let p = fix_entries(&target);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!((&s.block_values[0] - &target).frobenius_norm() < 1e-8);

        // singular fixed point
        let singular = ComplexMatrix::unit(2, 2, 1, 1);
        let p = fix_entries(&singular);
        let s = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Feasible);
        assert!((&s.block_values[0] - &singular).frobenius_norm() < 1e-8);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let mut p = ConicProblem::new(vec![2]);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::identity(3))], 1.0);
        assert!(matches!(solve(&p, SolverSettings::default()), Err(Error::Malformed(_))));

        let mut p = ConicProblem::new(vec![2]);
        p.add_constraint(vec![BlockTerm::new(1, ComplexMatrix::identity(2))], 1.0);
        assert!(p.validate().is_err());

        let mut p = ConicProblem::new(vec![2]);
        p.add_constraint(vec![BlockTerm::new(0, ComplexMatrix::unit(2, 2, 0, 1))], 1.0);
        assert!(p.validate().is_err());
    }

    #[test]
    fn repeated_solves_are_bitwise_identical() {
        let mut p = ConicProblem::new(vec![3, 1]);
        let a = ComplexMatrix::from_real(3, 3, &[1.0, 0.5, 0.0, 0.5, -1.0, 0.2, 0.0, 0.2, 0.3]);
        p.add_constraint(
            vec![
                BlockTerm::new(0, ComplexMatrix::identity(3)),
                BlockTerm::new(1, ComplexMatrix::identity(1)),
            ],
            2.0,
        );
        p.set_objective(vec![BlockTerm::new(0, a)]);
        let s1 = solve(&p, SolverSettings::default()).unwrap();
        let s2 = solve(&p, SolverSettings::default()).unwrap();
        assert_eq!(s1.status, s2.status);
        assert_eq!(
            s1.objective_value.unwrap().to_bits(),
            s2.objective_value.unwrap().to_bits()
        );
    }
}
