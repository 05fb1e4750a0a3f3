//! Alternating search for `Σ_ij p_ij ⊗ q_ij = c` with both factors in their
//! positive cones.
//!
//! Each half-step fixes one factor and solves a conic problem for the other
//! that minimizes the ℓ1 coefficient residual, then snaps the result onto
//! the affine solution set by a minimum-norm linear correction. Positivity is
//! only ever accepted after an eigenvalue check of the final factors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{hermitian_matrix_basis, kron, ComplexMatrix, ONE};
use crate::opsys::{choi_apply, SystemRef};
use crate::solver::{self, BlockTerm, ConicProblem, SolveStatus, SolverSettings};

const SOLVER_TOL: f64 = 1e-9;
const RESTARTS: u64 = 5;
const MAX_ROUNDS: usize = 30;

/// How positivity of one factor is expressed.
#[derive(Debug, Clone)]
pub(crate) enum Side {
    /// `X ∈ M_k(S)^+`: the realization in `M_k ⊗ M_d` (`k` outer) is PSD.
    Concrete(SystemRef),
    /// `X ∈ M_k(S^d)^+`: `b ↦ [x_ij(b)]` is CP, witnessed by a PSD Choi
    /// matrix in `M_d ⊗ M_k` (`d` outer).
    Dual(SystemRef),
}

impl Side {
    pub fn system(&self) -> &SystemRef {
        match self {
            Side::Concrete(s) | Side::Dual(s) => s,
        }
    }

    fn block_dim(&self, k: usize) -> usize {
        k * self.system().ambient_dim()
    }

    /// Hermitian `G` with `tr(Z G) = Σ_ij (X_a)_ij m_ij`.
    fn pairing_op(&self, a: usize, m: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Side::Concrete(s) => kron(&m.transpose(), &s.dual_basis()[a]),
            Side::Dual(s) => kron(&s.basis()[a].transpose(), &m.transpose()),
        }
    }

    /// Operators whose pairings with `Z` must vanish.
    fn subspace_ops(&self, k: usize) -> Vec<ComplexMatrix> {
        match self {
            Side::Concrete(s) => hermitian_matrix_basis(k)
                .iter()
                .flat_map(|e| s.complement().iter().map(move |h| kron(e, h)))
                .collect(),
            Side::Dual(_) => Vec::new(),
        }
    }

    /// Coefficient blocks `X_a` read off `Z`.
    pub fn blocks_of(&self, z: &ComplexMatrix, k: usize) -> Vec<ComplexMatrix> {
        match self {
            Side::Concrete(s) => {
                let d = s.ambient_dim();
                s.dual_basis()
                    .iter()
                    .map(|sa| {
                        ComplexMatrix::from_fn(k, k, |i, j| z.block(i * d, j * d, d, d).trace_product(sa))
                            .hermitian_part()
                    })
                    .collect()
            }
            Side::Dual(s) => {
                let d = s.ambient_dim();
                s.basis()
                    .iter()
                    .map(|b| choi_apply(z, d, b).hermitian_part())
                    .collect()
            }
        }
    }

    /// A factor from `Z`; on the concrete side `Z` is replaced by the
    /// realization of its projection.
    pub fn factor(&self, z: ComplexMatrix, k: usize) -> Factor {
        let blocks = self.blocks_of(&z, k);
        let z = match self {
            Side::Concrete(s) => {
                let d = s.ambient_dim();
                let mut r = ComplexMatrix::zeros(k * d, k * d);
                for (xa, b) in blocks.iter().zip(s.basis()) {
                    r = &r + &kron(xa, b);
                }
                r
            }
            Side::Dual(_) => z.hermitian_part(),
        };
        Factor { k, z, blocks }
    }

    /// Projects onto the side's subspace and, if needed, shifts by a
    /// multiple of the identity until the result is positive.
    fn repaired(&self, z: ComplexMatrix, k: usize) -> Factor {
        let f = self.factor(z, k);
        let lam = f.z.min_eigenvalue();
        if lam >= 0.0 {
            return f;
        }
        let n = f.z.rows();
        let shift = -lam + 1e-9 * (1.0 + f.z.max_abs());
        self.factor(&f.z + &ComplexMatrix::identity(n).scale(shift), k)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Factor {
    pub k: usize,
    /// Realization (concrete side) or Choi matrix (dual side).
    pub z: ComplexMatrix,
    /// Coefficient blocks `X_a`, each `k × k` Hermitian.
    pub blocks: Vec<ComplexMatrix>,
}

impl Factor {
    fn scale(&mut self, t: f64) {
        self.z = self.z.scale(t);
        for b in &mut self.blocks {
            *b = b.scale(t);
        }
    }
}

/// `w_ab = Σ_ij (P_a)_ij (Q_b)_ij`.
pub(crate) fn pair_coefficients(p: &[ComplexMatrix], q: &[ComplexMatrix]) -> DMatrix<f64> {
    DMatrix::from_fn(p.len(), q.len(), |a, b| {
        let (pa, qb) = (&p[a], &q[b]);
        let mut s = 0.0;
        for i in 0..pa.rows() {
            for j in 0..pa.cols() {
                s += (pa[(i, j)] * qb[(i, j)]).re;
            }
        }
        s
    })
}

fn residual(p: &Factor, q: &Factor, target: &DMatrix<f64>) -> f64 {
    (pair_coefficients(&p.blocks, &q.blocks) - target).amax()
}

/// Where an attempt starts.
#[derive(Debug, Clone)]
pub(crate) enum Start {
    FixedQ(Factor),
    FixedP(Factor),
}

#[derive(Debug, Clone)]
pub(crate) struct SeesawSuccess {
    pub p: Factor,
    pub q: Factor,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SeesawOutcome {
    pub success: Option<SeesawSuccess>,
    pub best_residual: f64,
    pub attempts: usize,
}

pub(crate) struct Seesaw<'a> {
    pub left: Side,
    pub right: Side,
    /// Target coefficients `c_ab` (`m_S × m_T`).
    pub target: &'a DMatrix<f64>,
    pub tol: f64,
}

impl Seesaw<'_> {
    /// Solves for the `side` factor with `fixed` held; `transpose` selects
    /// whether the solved factor indexes rows (`false`) or columns of the
    /// target.
    fn half_step(&self, side: &Side, k: usize, fixed: &[ComplexMatrix], transpose: bool) -> Option<Factor> {
        let m = side.system().dim();
        let n = side.block_dim(k);
        let rhs = |x: usize, y: usize| {
            if transpose {
                self.target[(y, x)]
            } else {
                self.target[(x, y)]
            }
        };
        let pairs = m * fixed.len();
        let mut blocks = vec![n, 1];
        blocks.extend(std::iter::repeat(1).take(2 * pairs));
        let mut p = ConicProblem::new(blocks);
        let one = ComplexMatrix::identity(1);
        let mut ops = Vec::with_capacity(pairs);
        for x in 0..m {
            for (y, fy) in fixed.iter().enumerate() {
                let g = side.pairing_op(x, fy);
                let slot = 2 + 2 * (x * fixed.len() + y);
                p.add_constraint(
                    vec![
                        BlockTerm::new(0, g.clone()),
                        BlockTerm::new(slot, one.clone()),
                        BlockTerm::new(slot + 1, one.scale(-1.0)),
                    ],
                    rhs(x, y),
                );
                ops.push((g, rhs(x, y)));
            }
        }
        for g in side.subspace_ops(k) {
            p.add_constraint(vec![BlockTerm::new(0, g.clone())], 0.0);
            ops.push((g, 0.0));
        }
        let scale = 1.0 + self.target.amax();
        let fixed_size: f64 = fixed.iter().map(|f| f.frobenius_norm()).sum::<f64>().max(1e-3);
        let bound = 100.0 * (n as f64) * scale / fixed_size + 10.0 * n as f64;
        p.add_constraint(
            vec![
                BlockTerm::new(0, ComplexMatrix::identity(n)),
                BlockTerm::new(1, one.clone()),
            ],
            bound,
        );
        p.set_objective((2..2 + 2 * pairs).map(|b| BlockTerm::new(b, one.clone())).collect());
        let sol = solver::solve(
            &p,
            SolverSettings {
                feas_tol: SOLVER_TOL,
                ..Default::default()
            },
        )
        .ok()?;
        if sol.status == SolveStatus::Infeasible {
            return None;
        }
        // the exact fit is kept only when it does not cost positivity
        let raw = side.factor(sol.block_values[0].clone(), k);
        let polished = side.factor(polish(&raw.z, &ops), k);
        if polished.z.min_eigenvalue() >= -0.1 * self.tol {
            Some(polished)
        } else {
            Some(raw)
        }
    }

    fn accept(&self, p: &Factor, q: &Factor) -> Option<f64> {
        let r = residual(p, q, self.target);
        (r <= self.tol && p.z.min_eigenvalue() >= -self.tol && q.z.min_eigenvalue() >= -self.tol)
            .then_some(r)
    }

    /// Alternates from `start` until acceptance or stagnation.
    fn attempt(&self, start: Start, best: &mut f64) -> Option<SeesawSuccess> {
        let (mut p, mut q, mut solve_p) = match start {
            Start::FixedQ(q) => (None, q, true),
            Start::FixedP(p) => {
                let k = p.k;
                let q = self.right.repaired(ComplexMatrix::identity(self.right.block_dim(k)), k);
                (Some(p), q, false)
            }
        };
        let k = q.k;
        let mut last = f64::INFINITY;
        let mut stall = 0;
        for _ in 0..2 * MAX_ROUNDS {
            if solve_p {
                p = Some(self.half_step(&self.left, k, &q.blocks, false)?);
            } else {
                let pp = p.as_ref()?;
                q = self.half_step(&self.right, k, &pp.blocks, true)?;
            }
            solve_p = !solve_p;
            let Some(pp) = p.as_mut() else { continue };
            balance(pp, &mut q);
            let r = residual(pp, &q, self.target);
            *best = best.min(r);
            if let Some(r) = self.accept(pp, &q) {
                return Some(SeesawSuccess {
                    p: pp.clone(),
                    q,
                    residual: r,
                });
            }
            if r > 0.95 * last {
                stall += 1;
                if stall >= 4 {
                    return None;
                }
            } else {
                stall = 0;
            }
            last = last.min(r);
        }
        None
    }

    /// Tries the structured starts in order, then seeded random restarts for
    /// `k = 1..=k_max`.
    pub fn run(&self, structured: Vec<Start>, k_max: usize, seed: u64) -> SeesawOutcome {
        let mut best = f64::INFINITY;
        let mut attempts = 0;
        for start in structured {
            attempts += 1;
            if let Some(s) = self.attempt(start, &mut best) {
                return SeesawOutcome {
                    success: Some(s),
                    best_residual: best,
                    attempts,
                };
            }
        }
        for k in 1..=k_max {
            for r in 0..RESTARTS {
                attempts += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ r);
                let n = self.right.block_dim(k);
                let g = ComplexMatrix::from_fn(n, n, |_, _| {
                    num_complex::Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                let z = (&g * &g.adjoint()).scale(1.0 / n as f64);
                let q = self.right.repaired(z, k);
                if let Some(s) = self.attempt(Start::FixedQ(q), &mut best) {
                    return SeesawOutcome {
                        success: Some(s),
                        best_residual: best,
                        attempts,
                    };
                }
            }
        }
        SeesawOutcome {
            success: None,
            best_residual: best,
            attempts,
        }
    }
}

/// Equalizes the traces of the two factors without changing their product.
fn balance(p: &mut Factor, q: &mut Factor) {
    let (tp, tq) = (p.z.trace().re, q.z.trace().re);
    if tp > 1e-300 && tq > 1e-300 {
        let t = (tq / tp).sqrt();
        p.scale(t);
        q.scale(1.0 / t);
    }
}

/// Minimum-norm correction of `z` onto `{tr(Z G_i) = r_i}`.
pub(crate) fn polish(z: &ComplexMatrix, ops: &[(ComplexMatrix, f64)]) -> ComplexMatrix {
    let n = ops.len();
    if n == 0 {
        return z.clone();
    }
    let gram = DMatrix::<f64>::from_fn(n, n, |i, j| ops[i].0.hs_dot(&ops[j].0));
    let r: Vec<f64> = ops.iter().map(|(g, rhs)| rhs - g.hs_dot(z)).collect();
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut lambda = vec![0.0; n];
    for (idx, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 1e-12 * top {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        let proj: f64 = v.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / ev;
        for (l, vi) in lambda.iter_mut().zip(v.iter()) {
            *l += proj * vi;
        }
    }
    let mut out = z.clone();
    for ((g, _), l) in ops.iter().zip(&lambda) {
        if *l != 0.0 {
            out = &out + &g.scale(*l);
        }
    }
    out.hermitian_part()
}

/// `Q = Π_T([E_ij])` at `k = d_T`, repaired to be positive.
pub(crate) fn matrix_unit_start(side: &Side) -> Factor {
    let d = side.system().ambient_dim();
    let mut z = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            z[(i * d + i, j * d + j)] = ONE;
        }
    }
    side.repaired(z, d)
}

/// `Z` read as a `k × k` block matrix with the first tensor index outer,
/// repaired onto the given side.
pub(crate) fn sketch_start(side: &Side, z: ComplexMatrix, k: usize) -> Factor {
    side.repaired(z, k)
}
