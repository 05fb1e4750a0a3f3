//! Infeasible primal–dual path following with the HKM search direction and
//! Mehrotra's predictor–corrector, on dense complex Hermitian blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::ConicProblem;
use crate::linalg::cholesky_lower;

type CMat = DMatrix<Complex64>;

const STEP_FRACTION: f64 = 0.95;
const DEPENDENCY_TOL: f64 = 1e-9;

/// Summary of one interior-point run.
#[derive(Debug, Clone, Copy, Default)]
pub struct IpmStats {
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct IpmOutput {
    /// Block values of the original problem (the phase-1 scalar is stripped).
    pub x: Vec<crate::linalg::ComplexMatrix>,
    /// Multipliers indexed like the original constraints.
    pub y: Vec<f64>,
    pub stats: IpmStats,
    pub phase1_t: Option<f64>,
}

pub(crate) enum Reduction {
    /// Ray `r` over all constraints with `A*(r) ≈ 0` and `b·r = −1`.
    Inconsistent(Vec<f64>),
    /// Indices of a maximal linearly independent set of constraints.
    Rows(Vec<usize>),
}

/// Real coordinates of a Hermitian matrix in an orthonormal basis for the
/// trace pairing, appended to `out`.
fn push_coords(m: &crate::linalg::ComplexMatrix, out: &mut Vec<f64>) {
    let n = m.rows();
    let s = std::f64::consts::SQRT_2;
    for i in 0..n {
        out.push(m[(i, i)].re);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out.push(s * v.re);
            out.push(s * v.im);
        }
    }
}

fn constraint_vectors(p: &ConicProblem) -> Vec<Vec<f64>> {
    let offsets: Vec<usize> = p
        .psd_blocks
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d * d;
            Some(o)
        })
        .collect();
    let total: usize = p.psd_blocks.iter().map(|d| d * d).sum();
    p.constraints
        .iter()
        .map(|c| {
            let mut v = vec![0.0; total];
            for t in &c.terms {
                let mut coords = Vec::with_capacity(t.coeff.rows() * t.coeff.rows());
                push_coords(&t.coeff, &mut coords);
                for (k, x) in coords.into_iter().enumerate() {
                    v[offsets[t.block] + k] += x;
                }
            }
            v
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram–Schmidt over the constraint rows. Dependent rows are dropped when
/// their right-hand side agrees with the kept rows and produce a ray when
/// it does not.
pub(crate) fn reduce(p: &ConicProblem, feas_tol: f64) -> Reduction {
    let rows = constraint_vectors(p);
    let m = rows.len();
    let rhs: Vec<f64> = p.constraints.iter().map(|c| c.rhs).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut combos: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let norm0 = dot(row, row).sqrt();
        let mut v = row.clone();
        let mut c = vec![0.0; m];
        c[i] = 1.0;
        for _ in 0..2 {
            for (q, qc) in basis.iter().zip(&combos) {
                let proj = dot(q, &v);
                if proj != 0.0 {
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
                    c.iter_mut().zip(qc).for_each(|(a, b)| *a -= proj * b);
                }
            }
        }
        let r = dot(&v, &v).sqrt();
        if r > DEPENDENCY_TOL * norm0 && norm0 > 0.0 {
            v.iter_mut().for_each(|a| *a /= r);
            c.iter_mut().for_each(|a| *a /= r);
            basis.push(v);
            combos.push(c);
            kept.push(i);
            continue;
        }
        // c combines the rows into (almost) zero; its rhs must vanish too.
        let delta = dot(&c, &rhs);
        if delta.abs() > feas_tol && r / delta.abs() <= 0.1 * feas_tol {
            return Reduction::Inconsistent(c.iter().map(|x| -x / delta).collect());
        }
    }
    Reduction::Rows(kept)
}

fn retr(a: &CMat, b: &CMat) -> f64 {
    // Re tr(a b)
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

fn herm(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `α` with `x + α dx ⪰ 0`, or infinity.
fn max_step(x: &CMat, dx: &CMat) -> f64 {
    if x.nrows() == 1 {
        let (a, d) = (x[(0, 0)].re, dx[(0, 0)].re);
        return if d < 0.0 { -a / d } else { f64::INFINITY };
    }
    let Some(l) = cholesky_lower(x) else {
        return 0.0;
    };
    let Some(y) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&y.adjoint()) else {
        return 0.0;
    };
    let lam = SymmetricEigen::new(herm(&w))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if lam < 0.0 {
        -1.0 / lam
    } else {
        f64::INFINITY
    }
}

struct Data {
    dims: Vec<usize>,
    /// Per constraint: (block, Hermitian coefficient).
    cons: Vec<Vec<(usize, CMat)>>,
    /// Per block: indices into `cons[k]` for constraints touching the block.
    by_block: Vec<Vec<(usize, usize)>>,
    b: Vec<f64>,
    c: Vec<CMat>,
}

impl Data {
    fn a_of(&self, x: &[CMat]) -> Vec<f64> {
        self.cons
            .iter()
            .map(|terms| terms.iter().map(|(blk, a)| retr(a, &x[*blk])).sum())
            .collect()
    }

    fn adjoint(&self, y: &[f64]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.dims.iter().map(|&d| CMat::zeros(d, d)).collect();
        for (terms, &yk) in self.cons.iter().zip(y) {
            if yk != 0.0 {
                for (blk, a) in terms {
                    out[*blk] += a * Complex64::new(yk, 0.0);
                }
            }
        }
        out
    }
}

struct Iterate {
    x: Vec<CMat>,
    y: Vec<f64>,
    z: Vec<CMat>,
}

fn solve_spd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-14 * scale;
    for _ in 0..6 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(ch) = mm.cholesky() {
            return Some(ch.solve(rhs));
        }
        reg *= 100.0;
    }
    m.clone().lu().solve(rhs)
}

/// Runs the interior-point method on the kept rows of `p`. With `phase1`
/// set, solves `min t s.t. A(X) + t(b − A(I)) = b, X ⪰ 0, t ≥ 0` instead.
pub(crate) fn run(
    p: &ConicProblem,
    rows: &[usize],
    phase1: bool,
    iter_cap: usize,
    tol: f64,
) -> IpmOutput {
    let nb = p.psd_blocks.len();
    let mut dims = p.psd_blocks.clone();
    if phase1 {
        dims.push(1);
    }
    let vectors = constraint_vectors(p);
    let mut cons = Vec::with_capacity(rows.len());
    let mut b = Vec::with_capacity(rows.len());
    let mut row_scale = Vec::with_capacity(rows.len());
    for &k in rows {
        let c = &p.constraints[k];
        let mut terms: Vec<(usize, CMat)> = Vec::new();
        for t in &c.terms {
            let h = herm(t.coeff.inner());
            match terms.iter_mut().find(|(blk, _)| *blk == t.block) {
                Some((_, acc)) => *acc += h,
                None => terms.push((t.block, h)),
            }
        }
        let mut rhs = c.rhs;
        if phase1 {
            let trace_a: f64 = terms.iter().map(|(_, a)| a.trace().re).sum();
            terms.push((nb, CMat::from_element(1, 1, Complex64::new(rhs - trace_a, 0.0))));
        }
        let mut norm = dot(&vectors[k], &vectors[k]);
        if phase1 {
            norm += terms.last().map(|(_, a)| a[(0, 0)].re.powi(2)).unwrap_or(0.0);
        }
        let s = 1.0 / norm.sqrt().max(1e-300);
        for (_, a) in terms.iter_mut() {
            *a *= Complex64::new(s, 0.0);
        }
        rhs *= s;
        cons.push(terms);
        b.push(rhs);
        row_scale.push(s);
    }
    let mut c: Vec<CMat> = dims.iter().map(|&d| CMat::zeros(d, d)).collect();
    if phase1 {
        c[nb][(0, 0)] = Complex64::new(1.0, 0.0);
    } else if let Some(obj) = &p.objective {
        for t in obj {
            c[t.block] += herm(t.coeff.inner());
        }
    }
    let mut by_block = vec![Vec::new(); dims.len()];
    for (k, terms) in cons.iter().enumerate() {
        for (pos, (blk, _)) in terms.iter().enumerate() {
            by_block[*blk].push((k, pos));
        }
    }
    let data = Data {
        dims,
        cons,
        by_block,
        b,
        c,
    };
    let (it, stats) = iterate(&data, iter_cap, tol);

    let phase1_t = phase1.then(|| it.x[nb][(0, 0)].re);
    let mut y_full = vec![0.0; p.constraints.len()];
    for ((&k, &s), yk) in rows.iter().zip(&row_scale).zip(&it.y) {
        y_full[k] = yk * s;
    }
    let x = it
        .x
        .into_iter()
        .take(nb)
        .map(|m| crate::linalg::ComplexMatrix::from_inner(herm(&m)))
        .collect();
    IpmOutput {
        x,
        y: y_full,
        stats,
        phase1_t,
    }
}

fn initial_point(d: &Data) -> Iterate {
    let m = d.cons.len();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (blk, &n) in d.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi = 10.0f64.max(nf.sqrt());
        let mut eta = 10.0f64.max(nf.sqrt()).max(fro(&d.c[blk]));
        for &(k, pos) in &d.by_block[blk] {
            let an = fro(&d.cons[k][pos].1);
            xi = xi.max(nf * (1.0 + d.b[k].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(CMat::identity(n, n) * Complex64::new(xi, 0.0));
        z.push(CMat::identity(n, n) * Complex64::new(eta, 0.0));
    }
    Iterate {
        x,
        y: vec![0.0; m],
        z,
    }
}

fn iterate(d: &Data, iter_cap: usize, tol: f64) -> (Iterate, IpmStats) {
    let m = d.cons.len();
    let total_dim: f64 = d.dims.iter().map(|&n| n as f64).sum();
    let b_norm = d.b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_norm = d.c.iter().map(fro).fold(0.0, f64::max);
    let mut cur = initial_point(d);
    let mut best: Option<(f64, Iterate)> = None;
    let mut stats = IpmStats::default();
    let mut stalled = 0;

    for iter in 0..iter_cap {
        stats.iterations = iter;
        let ax = d.a_of(&cur.x);
        let rp: Vec<f64> = d.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let aty = d.adjoint(&cur.y);
        let rd: Vec<CMat> = (0..d.dims.len())
            .map(|i| &d.c[i] - &aty[i] - &cur.z[i])
            .collect();
        let pobj: f64 = d.c.iter().zip(&cur.x).map(|(c, x)| retr(c, x)).sum();
        let dobj: f64 = d.b.iter().zip(&cur.y).map(|(b, y)| b * y).sum();
        let xz: f64 = cur.x.iter().zip(&cur.z).map(|(x, z)| retr(x, z)).sum();
        let mu = xz / total_dim;
        let relp = rp.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let reld = rd.iter().map(fro).fold(0.0, f64::max) / (1.0 + c_norm);
        let gap = xz.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        let merit = relp.max(reld).max(gap);
        if !merit.is_finite() {
            break;
        }
        let improved = best.as_ref().map_or(true, |(bm, _)| merit < *bm);
        if improved {
            let snapshot = Iterate {
                x: cur.x.clone(),
                y: cur.y.clone(),
                z: cur.z.clone(),
            };
            best = Some((merit, snapshot));
        }
        if relp <= tol && reld <= tol && gap <= tol {
            stats.converged = true;
            break;
        }
        let blowup = cur.x.iter().map(fro).fold(0.0, f64::max) > 1e13
            || cur.y.iter().fold(0.0f64, |a, v| a.max(v.abs())) > 1e13;
        if blowup || stalled >= 8 {
            break;
        }

        let mut zinv = Vec::with_capacity(d.dims.len());
        for z in &cur.z {
            let inv = cholesky_lower(z).and_then(|l| {
                let n = l.nrows();
                let linv = l.solve_lower_triangular(&CMat::identity(n, n))?;
                Some(herm(&(linv.adjoint() * linv)))
            });
            match inv {
                Some(inv) => zinv.push(inv),
                None => return finish(best, cur, stats),
            }
        }

        // Schur complement M_kl = Re tr(A_k X A_l Z⁻¹).
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (blk, list) in d.by_block.iter().enumerate() {
            let x = &cur.x[blk];
            let zi = &zinv[blk];
            for &(k, pk) in list {
                let w = zi * &d.cons[k][pk].1 * x;
                for &(l, pl) in list {
                    schur[(l, k)] += retr(&d.cons[l][pl].1, &w);
                }
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;

        let direction = |sigma_mu: f64, corr: Option<&[CMat]>| -> Option<(Vec<CMat>, Vec<f64>, Vec<CMat>)> {
            let mut k_mats = Vec::with_capacity(d.dims.len());
            for blk in 0..d.dims.len() {
                let x = &cur.x[blk];
                let zi = &zinv[blk];
                let mut kb = zi * Complex64::new(sigma_mu, 0.0) - x - x * &rd[blk] * zi;
                if let Some(cs) = corr {
                    kb -= &cs[blk];
                }
                k_mats.push(kb);
            }
            let h: Vec<f64> = (0..m)
                .map(|k| {
                    rp[k]
                        - d.cons[k]
                            .iter()
                            .map(|(blk, a)| retr(a, &k_mats[*blk]))
                            .sum::<f64>()
                })
                .collect();
            let dy = solve_spd(&schur, &DVector::from_vec(h))?;
            let dy: Vec<f64> = dy.iter().cloned().collect();
            let atdy = d.adjoint(&dy);
            let mut dx = Vec::with_capacity(d.dims.len());
            let mut dz = Vec::with_capacity(d.dims.len());
            for blk in 0..d.dims.len() {
                dz.push(&rd[blk] - &atdy[blk]);
                dx.push(herm(&(&k_mats[blk] + &cur.x[blk] * &atdy[blk] * &zinv[blk])));
            }
            Some((dx, dy, dz))
        };
        let steps = |dx: &[CMat], dz: &[CMat]| -> (f64, f64) {
            let ap = cur
                .x
                .iter()
                .zip(dx)
                .map(|(x, s)| max_step(x, s))
                .fold(f64::INFINITY, f64::min);
            let ad = cur
                .z
                .iter()
                .zip(dz)
                .map(|(z, s)| max_step(z, s))
                .fold(f64::INFINITY, f64::min);
            (ap, ad)
        };

        let Some((dx_a, _, dz_a)) = direction(0.0, None) else {
            break;
        };
        let (ap, ad) = steps(&dx_a, &dz_a);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mu_aff: f64 = (0..d.dims.len())
            .map(|blk| {
                let xn = &cur.x[blk] + &dx_a[blk] * Complex64::new(ap, 0.0);
                let zn = &cur.z[blk] + &dz_a[blk] * Complex64::new(ad, 0.0);
                retr(&xn, &zn)
            })
            .sum::<f64>()
            / total_dim;
        let sigma = (mu_aff.max(0.0) / mu).powi(3).min(1.0);
        let corr: Vec<CMat> = (0..d.dims.len())
            .map(|blk| &dx_a[blk] * &dz_a[blk] * &zinv[blk])
            .collect();
        let Some((dx, dy, dz)) = direction(sigma * mu, Some(&corr)) else {
            break;
        };
        let (ap, ad) = steps(&dx, &dz);
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap.min(ad) < 1e-8 {
            stalled += 1;
        } else {
            stalled = 0;
        }
        for blk in 0..d.dims.len() {
            cur.x[blk] = herm(&(&cur.x[blk] + &dx[blk] * Complex64::new(ap, 0.0)));
            cur.z[blk] = herm(&(&cur.z[blk] + &dz[blk] * Complex64::new(ad, 0.0)));
        }
        for (y, s) in cur.y.iter_mut().zip(&dy) {
            *y += ad * s;
        }
        stats.iterations = iter + 1;
    }
    finish(best, cur, stats)
}

fn finish(best: Option<(f64, Iterate)>, cur: Iterate, stats: IpmStats) -> (Iterate, IpmStats) {
    if stats.converged {
        return (cur, stats);
    }
    match best {
        Some((_, it)) => (it, stats),
        None => (cur, stats),
    }
}
