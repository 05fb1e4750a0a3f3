//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use oscone::factorization::{
    factor_through_matrices, nuclearity_test, reconstruct_membership, swap_certificate,
    swap_witness, TripleNormContext,
};
use oscone::linalg::{all_ones, ComplexMatrix};
use oscone::opsys::{builtin, level_positive, make_system, DualFunctional, SystemMatrix, SystemRef};
use oscone::tensor::{
    compress_kron, decompose_as_schur, kron_as_schur, kron_tensor, max_cone_membership,
    max_entangled, min_cone_membership, normal_form_level1, schur_contraction_check,
    schur_product, DFormElement, MaxConeCertificate, MaxConeOptions, MaxConeWitness,
    SchurDecomposition, TensorElement,
};
use oscone::ConeVerdict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Every verified verdict seen anywhere in the suite, keyed by input and ε.
#[derive(Default)]
struct Registry {
    members: HashSet<String>,
    non_members: HashSet<String>,
    min_cone_failures: Vec<String>,
    member_count: usize,
}

fn key(u: &TensorElement, eps: f64) -> String {
    let bits: Vec<(u64, u64)> = u.coeffs().iter().map(|c| (c.re.to_bits(), c.im.to_bits())).collect();
    format!(
        "{}|{}|{}|{:x}|{:?}",
        u.left().name(),
        u.right().name(),
        u.level(),
        eps.to_bits(),
        bits
    )
}

impl Registry {
    /// Records a verified max-cone member and checks it is min-positive.
    fn member(&mut self, u: &TensorElement, eps: f64) {
        self.member_count += 1;
        self.members.insert(key(u, eps));
        let shifted = u.plus_unit(eps);
        match min_cone_membership(&shifted, 1e-7) {
            Ok(v) if v.is_member() => {}
            other => self.min_cone_failures.push(format!("{:?}", other.map(|v| v.label()))),
        }
    }

    fn non_member(&mut self, u: &TensorElement, eps: f64) {
        self.non_members.insert(key(u, eps));
    }
}

fn rc(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_matrix(sys: &SystemRef, k: usize, rng: &mut ChaCha8Rng) -> SystemMatrix {
    let coeffs = (0..k * k * sys.dim()).map(|_| rc(rng)).collect();
    SystemMatrix::new(sys.clone(), k, coeffs).unwrap()
}

fn random_scalar(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rc(rng))
}

/// Projection of a random PSD realization, shifted by the unit until the
/// smallest eigenvalue is at least `margin`.
fn random_psd(sys: &SystemRef, k: usize, margin: f64, rng: &mut ChaCha8Rng) -> SystemMatrix {
    let n = k * sys.ambient_dim();
    let g = random_scalar(n, n, rng);
    let (x, _) = SystemMatrix::from_realization(sys.clone(), k, &(&g * &g.adjoint())).unwrap();
    let x = x.scale(1.0 / n as f64);
    let lam = x.realize().min_eigenvalue();
    x.add(&SystemMatrix::unit(sys.clone(), k).scale((margin - lam).max(0.0))).unwrap()
}

fn random_element(s: &SystemRef, t: &SystemRef, level: usize, rng: &mut ChaCha8Rng) -> TensorElement {
    let len = level * level * s.dim() * t.dim();
    TensorElement::new(s.clone(), t.clone(), level, (0..len).map(|_| rc(rng)).collect()).unwrap()
}

/// Random Hermitian level-one element whose realization has smallest
/// eigenvalue exactly `lambda`.
fn element_with_min_eigenvalue(s: &SystemRef, t: &SystemRef, lambda: f64, rng: &mut ChaCha8Rng) -> TensorElement {
    let u = random_element(s, t, 1, rng);
    let h = u.add(&u.adjoint()).unwrap().scale(0.5);
    let h = TensorElement::from_realization(s.clone(), t.clone(), 1, &h.realize()).unwrap();
    let lam = h.realize().min_eigenvalue();
    h.plus_unit(lambda - lam)
}

fn systems() -> Vec<SystemRef> {
    ["Cn:2", "Mn:2", "pauli-xz"].iter().map(|n| builtin(n).unwrap()).collect()
}

fn pick<'a>(v: &'a [SystemRef], rng: &mut ChaCha8Rng) -> &'a SystemRef {
    &v[rng.gen_range(0..v.len())]
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn schur_as_kron(rng: &mut ChaCha8Rng) -> Outcome {
    let start = Instant::now();
    let sys = systems();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (s, t) = (pick(&sys, rng).clone(), pick(&sys, rng).clone());
        let n = rng.gen_range(1..=3);
        let x = random_matrix(&s, n, rng);
        let y = random_matrix(&t, n, rng);
        let a = compress_kron(&x, &y).map_err(|e| e.to_string())?;
        let b = schur_product(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max(a.max_distance(&b));
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-12, || format!("distance {worst:.3e}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("200 instances, max distance {worst:.2e}, {elapsed:.2?}"))
}

fn layer_reassembly(rng: &mut ChaCha8Rng) -> Outcome {
    let sys = systems();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (s, t) = (pick(&sys, rng).clone(), pick(&sys, rng).clone());
        let level = rng.gen_range(1..=3);
        let u = random_element(&s, &t, level, rng);
        let dec = decompose_as_schur(&u).map_err(|e| e.to_string())?;
        let back = dec.assemble().map_err(|e| e.to_string())?;
        worst = worst.max(back.max_distance(&u));
    }
    ensure(worst <= 1e-12, || format!("reconstruction error {worst:.3e}"))?;
    Ok(format!("200 elements, max error {worst:.2e}"))
}

fn kron_positivity(rng: &mut ChaCha8Rng) -> Outcome {
    let sys = systems();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (s, t) = (pick(&sys, rng).clone(), pick(&sys, rng).clone());
        let (n, m) = (rng.gen_range(1..=3), rng.gen_range(1..=3));
        let x = random_psd(&s, n, 0.0, rng);
        let y = random_psd(&t, m, 0.0, rng);
        let (xf, yf) = kron_as_schur(&x, &y);
        for (name, f) in [("X⊗J", &xf), ("J⊗Y", &yf)] {
            let v = level_positive(f, 1e-9).map_err(|e| e.to_string())?;
            ensure(v.is_member(), || format!("{name} factor not positive"))?;
        }
        let prod = schur_product(&xf, &yf).map_err(|e| e.to_string())?;
        worst = worst.max(prod.max_distance(&kron_tensor(&x, &y)));
    }
    ensure(worst <= 1e-12, || format!("Schur product error {worst:.3e}"))?;
    for k in 1..=8 {
        let eig = all_ones(k).hermitian_eigenvalues();
        let mut want = vec![0.0; k];
        want[k - 1] = k as f64;
        let err = eig.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-12, || format!("spectrum of J_{k} off by {err:.3e}"))?;
    }
    Ok(format!("100 PSD pairs, max error {worst:.2e}; J_k spectra for k ≤ 8"))
}

fn form_conversion(rng: &mut ChaCha8Rng, reg: &mut Registry) -> Outcome {
    let sys = systems();
    let tol = 1e-10;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (s, t) = (pick(&sys, rng).clone(), pick(&sys, rng).clone());
        let (k, m) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let n = if i % 2 == 0 { 1 } else { 2 };
        let p = random_psd(&s, k, 0.05, rng);
        let q = random_psd(&t, m, 0.05, rng);
        let a = random_scalar(n, k * m, rng);
        let d = DFormElement { a: a.clone(), p: p.clone(), q: q.clone() };
        let u = d.assemble().map_err(|e| e.to_string())?;

        // D-form → S-form
        let sform = d.to_schur();
        let c = sform.check(&u).map_err(|e| e.to_string())?;
        ensure(c.passed(tol), || format!("S-form check {c:?}"))?;
        worst = worst.max(c.residual);
        // S-form → D-form
        let back = sform.to_dform();
        let c = back.check(&u).map_err(|e| e.to_string())?;
        ensure(c.passed(tol), || format!("D-form check {c:?}"))?;
        worst = worst.max(c.residual);

        if n == 1 {
            let nf = normal_form_level1(&a, &p, &q, 1e-9).map_err(|e| e.to_string())?;
            let c = nf.check(&u).map_err(|e| e.to_string())?;
            ensure(c.passed(tol), || format!("normal form check {c:?}"))?;
            worst = worst.max(c.residual);
            reg.member(&u, 0.0);
        }
    }
    Ok(format!("100 elements converted both ways, max residual {worst:.2e}"))
}

fn full_algebra_oracle(rng: &mut ChaCha8Rng, reg: &mut Registry) -> Outcome {
    let start = Instant::now();
    let m2 = builtin("Mn:2").unwrap();
    let opts = MaxConeOptions {
        eps: 1e-6,
        k_max: Some(4),
        tol: 1e-7,
        seed: 1,
    };
    let mut worst_residual = 0.0f64;
    let mut worst_witness = f64::NEG_INFINITY;
    for i in 0..100 {
        let positive = i % 2 == 0;
        let lambda = if positive { rng.gen_range(0.05..1.0) } else { rng.gen_range(-1.0..-0.05) };
        let u = element_with_min_eigenvalue(&m2, &m2, lambda, rng);
        let v = max_cone_membership(&u, &opts).map_err(|e| e.to_string())?;
        match (&v, positive) {
            (ConeVerdict::Member(cert), true) => {
                let c = cert.check(&u).map_err(|e| e.to_string())?;
                ensure(c.passed(1e-6) && cert.k <= 4, || format!("certificate {c:?}, k = {}", cert.k))?;
                worst_residual = worst_residual.max(c.residual);
                reg.member(&u, opts.eps);
            }
            (ConeVerdict::NonMember(w), false) => {
                let (pairing, _, _) = w.check(&u).map_err(|e| e.to_string())?;
                ensure(w.verifies(&u, opts.tol).unwrap_or(false) && pairing <= -0.04, || {
                    format!("witness pairing {pairing:.3e}")
                })?;
                worst_witness = worst_witness.max(pairing);
                reg.non_member(&u, opts.eps);
            }
            _ => return Err(format!("λ_min = {lambda:.3}: verdict {}", v.label())),
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "50 Member (max residual {worst_residual:.2e}), 50 NonMember (max witness value {worst_witness:.3}), 0 Unknown, {elapsed:.2?}"
    ))
}

fn max_entangled_member(reg: &mut Registry) -> Outcome {
    let m2 = builtin("Mn:2").unwrap();
    let u = max_entangled(&m2).map_err(|e| e.to_string())?;
    let choi = u.realize();
    let (p, lost) = SystemMatrix::from_realization(m2.clone(), 2, &choi).map_err(|e| e.to_string())?;
    ensure(lost == 0.0, || format!("[E_ij] lost {lost:.3e} in projection"))?;
    let cert = MaxConeCertificate::build(&u, p.clone(), p, 0.0).map_err(|e| e.to_string())?;
    // a third party re-checks the serialized certificate
    let json = serde_json::to_string(&cert).map_err(|e| e.to_string())?;
    let back: MaxConeCertificate = serde_json::from_str(&json).map_err(|e| e.to_string())?;
    let c = back.check(&u).map_err(|e| e.to_string())?;
    ensure(c.residual <= 1e-12 && c.p_min_eigenvalue >= -1e-12 && c.q_min_eigenvalue >= -1e-12, || {
        format!("{c:?}")
    })?;
    reg.member(&u, 0.0);
    Ok(format!("P = Q = [E_ij], residual {:.2e}, min eigenvalue {:.2e}", c.residual, c.p_min_eigenvalue))
}

fn contraction(m: ComplexMatrix, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let norm = oscone::linalg::operator_norm(&m).max(1e-300);
    m.scale(rng.gen_range(0.2..1.0) / norm)
}

fn contraction_norm(rng: &mut ChaCha8Rng, reg: &mut Registry) -> Outcome {
    let sys = systems();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (s, t) = (pick(&sys, rng).clone(), pick(&sys, rng).clone());
        let (n, k) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
        let x = random_matrix(&s, k, rng);
        let x = x.scale(rng.gen_range(0.2..1.0) / oscone::linalg::operator_norm(&x.realize()));
        let y = random_matrix(&t, k, rng);
        let y = y.scale(rng.gen_range(0.2..1.0) / oscone::linalg::operator_norm(&y.realize()));
        let a = contraction(random_scalar(n, k, rng), rng);
        let b = contraction(random_scalar(k, n, rng), rng);
        let dec = SchurDecomposition { a, x, y, b };
        let report = schur_contraction_check(&dec, 1e-9).map_err(|e| e.to_string())?;
        ensure(report.passed && report.norm_upper_bound <= 1.0 + 1e-6, || {
            format!("check {:?}, bound {}", report.check, report.norm_upper_bound)
        })?;
        worst = worst.max(report.norm_upper_bound);
        // the certified block [[I, U], [U*, I]] is in the max cone at ε = 0
        let n = report.u.level();
        let mut block = TensorElement::zeros(s.clone(), t.clone(), 2 * n);
        let adj = report.u.adjoint();
        for i in 0..n {
            for j in 0..n {
                for p in 0..s.dim() {
                    for q in 0..t.dim() {
                        block.set(i, n + j, p, q, report.u.get(i, j, p, q));
                        block.set(n + i, j, p, q, adj.get(i, j, p, q));
                    }
                }
            }
        }
        reg.member(&block.plus_unit(1.0), 0.0);
    }
    Ok(format!("100 decompositions, max certified norm bound {worst:.12}"))
}

fn factorization_pipeline(rng: &mut ChaCha8Rng, reg: &mut Registry) -> Outcome {
    let epsilons = [1e-1, 1e-2, 1e-3];
    let mut worst_slack = f64::NEG_INFINITY;
    let mut worst_round_trip = f64::NEG_INFINITY;
    for name in ["Cn:2", "Mn:2"] {
        let s = builtin(name).unwrap();
        let ctx = TripleNormContext::new(&s).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let u = element_with_min_eigenvalue(&s, &s, rng.gen_range(0.05..0.5), rng);
            let mut maxima = Vec::new();
            for &eps in &epsilons {
                let opts = MaxConeOptions { eps, tol: 1e-9, ..Default::default() };
                let pair = factor_through_matrices(&u, &opts).map_err(|e| format!("{name}, ε = {eps}: {e}"))?;
                let errors = pair.composition_errors(&u).map_err(|e| e.to_string())?;
                let unit = s.unit();
                for (a, err) in errors.iter().enumerate() {
                    let f1 = DualFunctional::dual_basis_element(s.clone(), a).apply(&unit.coeffs).norm();
                    let bound = eps * (1.0 + f1) + 1e-5;
                    ensure(*err <= bound, || format!("{name}, ε = {eps}: error {err:.3e} > {bound:.3e}"))?;
                    worst_slack = worst_slack.max(err - bound);
                }
                maxima.push(errors.iter().cloned().fold(0.0, f64::max));
                reg.member(&u, eps);

                let v = reconstruct_membership(&pair, &u, &ctx, 1e-8).map_err(|e| e.to_string())?;
                let cert = v.certificate().ok_or("reconstruction gave no certificate")?;
                let c = cert.check(&u).map_err(|e| e.to_string())?;
                ensure(c.passed(1e-8), || format!("reconstructed certificate {c:?}"))?;
                ensure(cert.epsilon <= eps + 1e-5, || format!("ε' = {} for ε = {eps}", cert.epsilon))?;
                worst_round_trip = worst_round_trip.max(cert.epsilon - eps);
                reg.member(&u, cert.epsilon);
            }
            ensure(maxima.windows(2).all(|w| w[1] < w[0]), || {
                format!("{name}: composition errors {maxima:?} not decreasing in ε")
            })?;
        }
    }
    Ok(format!(
        "40 elements × 3 ε, worst error − bound {worst_slack:.2e}, worst ε' − ε {worst_round_trip:.2e}"
    ))
}

fn nuclearity_detector() -> Outcome {
    let start = Instant::now();
    let mut systems: Vec<SystemRef> =
        ["Mn:2", "Mn:3", "Cn:2", "Cn:3"].iter().map(|n| builtin(n).unwrap()).collect();
    systems.push(make_system(2, &[], "span{I}").unwrap());
    let mut lines = Vec::new();
    for t in systems {
        let d = t.ambient_dim();
        let opts = MaxConeOptions {
            eps: 1e-6,
            k_max: Some(d * d),
            tol: 1e-8,
            seed: 0,
        };
        let v = nuclearity_test(&t, &opts).map_err(|e| e.to_string())?;
        let cert = v.certificate().ok_or_else(|| format!("{}: {}", t.name(), v.label()))?;
        ensure(cert.k <= d * d && cert.residual <= 1e-6, || {
            format!("{}: k = {}, residual {:.3e}", t.name(), cert.k, cert.residual)
        })?;
        let json = serde_json::to_string(cert).map_err(|e| e.to_string())?;
        let back: oscone::factorization::NuclearityCertificate =
            serde_json::from_str(&json).map_err(|e| e.to_string())?;
        let check = back.check().map_err(|e| e.to_string())?;
        ensure(check.passed(1e-8, 1e-5), || format!("{}: {check:?}", t.name()))?;
        let worst = check.composition_errors.iter().cloned().fold(0.0, f64::max);
        lines.push(format!("{} k={} err={worst:.1e}", t.name(), cert.k));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(600), || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.2?}", lines.join(", ")))
}

fn swap_symmetry(rng: &mut ChaCha8Rng, reg: &mut Registry) -> Outcome {
    let pairs = [("Mn:2", "Cn:2"), ("Cn:2", "pauli-xz"), ("Mn:2", "Mn:2"), ("pauli-xz", "Mn:2")];
    let opts = MaxConeOptions { tol: 1e-8, ..Default::default() };
    let (mut members, mut non_members) = (0, 0);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let (a, b) = pairs[i % pairs.len()];
        let (s, t) = (builtin(a).unwrap(), builtin(b).unwrap());
        let lambda = if i % 3 == 0 { rng.gen_range(-1.0..-0.05) } else { rng.gen_range(0.05..1.0) };
        let u = element_with_min_eigenvalue(&s, &t, lambda, rng);
        let w = u.swap();
        let v = max_cone_membership(&u, &opts).map_err(|e| e.to_string())?;
        let vs = max_cone_membership(&w, &opts).map_err(|e| e.to_string())?;
        ensure(v.label() == vs.label(), || format!("{a}⊗{b}: {} vs {}", v.label(), vs.label()))?;
        match &v {
            ConeVerdict::Member(cert) => {
                let c = cert.check(&u).map_err(|e| e.to_string())?;
                let cs = swap_certificate(cert).check(&w).map_err(|e| e.to_string())?;
                ensure(cs.passed(opts.tol), || format!("swapped certificate {cs:?}"))?;
                let diff = (c.residual - cs.residual).abs();
                ensure(diff <= 1e-10, || format!("residuals differ by {diff:.3e}"))?;
                worst = worst.max(diff);
                reg.member(&u, opts.eps);
                reg.member(&w, opts.eps);
                members += 1;
            }
            ConeVerdict::NonMember(wit) => {
                let sw: MaxConeWitness = swap_witness(wit, &u);
                ensure(sw.verifies(&w, opts.tol).unwrap_or(false), || "swapped witness".into())?;
                let (p1, _, _) = wit.check(&u).map_err(|e| e.to_string())?;
                let (p2, _, _) = sw.check(&w).map_err(|e| e.to_string())?;
                let diff = (p1 - p2).abs();
                ensure(diff <= 1e-10, || format!("pairings differ by {diff:.3e}"))?;
                worst = worst.max(diff);
                reg.non_member(&u, opts.eps);
                reg.non_member(&w, opts.eps);
                non_members += 1;
            }
            ConeVerdict::Unknown(d) => return Err(format!("{a}⊗{b}: Unknown ({})", d.message)),
        }
        ensure(u.swap().swap().max_distance(&u) == 0.0, || "swap is not an involution".into())?;
    }
    Ok(format!("{members} Member, {non_members} NonMember, max transfer difference {worst:.2e}"))
}

fn verdict_consistency(reg: &Registry) -> Outcome {
    let clash = reg.members.intersection(&reg.non_members).count();
    ensure(clash == 0, || format!("{clash} inputs with both a certificate and a witness"))?;
    ensure(reg.min_cone_failures.is_empty(), || {
        format!("{} max-members failed the min cone: {:?}", reg.min_cone_failures.len(), reg.min_cone_failures)
    })?;
    Ok(format!(
        "{} member checks and {} distinct witnessed inputs, no clashes; all members min-positive",
        reg.member_count,
        reg.non_members.len()
    ))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut reg = Registry::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 Schur product as compressed Kronecker product", schur_as_kron(&mut rng)));
    results.push(("2 layer decomposition reassembles", layer_reassembly(&mut rng)));
    results.push(("3 Kronecker products of positives via J-padding", kron_positivity(&mut rng)));
    results.push(("4 D-form and S-form certificates interconvert", form_conversion(&mut rng, &mut reg)));
    results.push(("5 full-algebra oracle", full_algebra_oracle(&mut rng, &mut reg)));
    results.push(("6 maximally entangled certificate", max_entangled_member(&mut reg)));
    results.push(("7 Schur contractions have norm at most one", contraction_norm(&mut rng, &mut reg)));
    results.push(("8 factorization through matrices", factorization_pipeline(&mut rng, &mut reg)));
    results.push(("9 nuclearity detector", nuclearity_detector()));
    results.push(("10 swap symmetry", swap_symmetry(&mut rng, &mut reg)));
    results.push(("11 verdict consistency", verdict_consistency(&reg)));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS [{name}] {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL [{name}] {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
