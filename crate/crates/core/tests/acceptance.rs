//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the lines show up in `cargo test`.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hbm::body::{measure, s2_isotropize, MeasureKind, SupportField, SupportFunction};
use hbm::corpus::{run_corpus, BodySampler, CorpusConfig, Family};
use hbm::inequality::Lab;
use hbm::solver::{
    classify_planar, linearization_fd_errors, pde_residual, proof_identities, solve_sphere,
    unimodular_ellipsoid_jet, PlanarSolution, SolveOptions,
};
use hbm::spectrum::{assemble, decompose, lambda2_of, spectrum, subspace_angle, RenormLinear};
use hbm::{make_domain, NodalField, SphericalDomain, TangentData};

type Verdict = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn dom(n: usize, lmax: usize) -> Arc<SphericalDomain> {
    make_domain(n, lmax).expect("valid domain")
}

fn sample(d: &Arc<SphericalDomain>, rng: &mut ChaCha8Rng, amplitude: f64) -> SupportField {
    let sampler = BodySampler {
        domain: d,
        amplitude,
    };
    let family = BodySampler::family(rng);
    sampler
        .draw(rng, family, false)
        .expect("sampler converges")
        .0
}

fn ball_spectrum_2d() -> Verdict {
    let t = Instant::now();
    let b = SupportField::ball(&dom(2, 16), 1.0).map_err(err)?;
    let s = spectrum(&assemble(&b).map_err(err)?, 13).map_err(err)?;
    let elapsed = t.elapsed();
    let want: Vec<f64> = (0..=6usize)
        .flat_map(|l| std::iter::repeat((l * l) as f64).take(if l == 0 { 1 } else { 2 }))
        .collect();
    let dev = s
        .eigenvalues
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mult = s.multiplicities();
    ensure(
        dev < 1e-8 && mult == vec![1, 2, 2, 2, 2, 2, 2] && elapsed < Duration::from_secs(1),
        format!("max |lambda - l^2| = {dev:.2e}, multiplicities {mult:?}, {elapsed:.2?}"),
    )
}

fn ball_spectrum_3d() -> Verdict {
    let t = Instant::now();
    let b = SupportField::ball(&dom(3, 12), 1.0).map_err(err)?;
    let pencil = assemble(&b).map_err(err)?;
    let s = spectrum(&pencil, 16).map_err(err)?;
    let lambda2 = lambda2_of(&pencil).map_err(err)?;
    let elapsed = t.elapsed();
    let want: Vec<f64> = (0..=3usize)
        .flat_map(|l| std::iter::repeat((l * (l + 1)) as f64 / 2.0).take(2 * l + 1))
        .collect();
    let dev = s
        .eigenvalues
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mult = s.multiplicities();
    ensure(
        dev < 1e-6
            && mult == vec![1, 3, 5, 7]
            && (lambda2 - 3.0).abs() < 1e-6
            && elapsed < Duration::from_secs(30),
        format!(
            "max dev {dev:.2e}, multiplicities {mult:?}, lambda_2 = {lambda2:.10}, {elapsed:.2?}"
        ),
    )
}

fn gl_invariance() -> Verdict {
    let d = dom(2, 48);
    let e = SupportField::ellipsoid(&d, &[2.0, 1.0]).map_err(err)?;
    let c = SupportField::ball(&d, 1.0).map_err(err)?;
    let se = spectrum(&assemble(&e).map_err(err)?, 10).map_err(err)?;
    let sc = spectrum(&assemble(&c).map_err(err)?, 10).map_err(err)?;
    let trunc = se.residuals.iter().cloned().fold(0.0, f64::max);
    let tol = trunc.max(1e-5);
    let dev = se
        .eigenvalues
        .iter()
        .zip(&sc.eigenvalues)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ensure(
        dev < tol,
        format!("max entrywise gap {dev:.2e} (tolerance {tol:.1e})"),
    )
}

fn lambda1_structure() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (mut worst_dev, mut worst_angle, mut worst_gap) = (0.0f64, 0.0f64, f64::INFINITY);
    let domains = [dom(2, 24), dom(3, 12)];
    for i in 0..50 {
        let d = &domains[i % 2];
        let n = d.n();
        let k = sample(d, &mut rng, 0.2);
        let pencil = assemble(&k).map_err(err)?;
        let s = spectrum(&pencil, n + 2).map_err(err)?;
        let ev = &s.eigenvalues;
        worst_dev = worst_dev.max(ev[0].abs());
        for v in &ev[1..=n] {
            worst_dev = worst_dev.max((v - 1.0).abs());
        }
        worst_gap = worst_gap.min(ev[n + 1] - 1.0);
        let nodes = d.node_count();
        let eig = DMatrix::from_fn(nodes, n, |q, j| {
            d.synthesize(s.eigvectors.column(j + 1).as_slice())[q]
        });
        let lin = DMatrix::from_fn(nodes, n, |_, _| 0.0);
        let mut lin = lin;
        for l in 0..n {
            let mut e = vec![0.0; n];
            e[l] = 1.0;
            let ell = RenormLinear::new(&k, &e);
            for q in 0..nodes {
                lin[(q, l)] = ell.values.values[q];
            }
        }
        let masses = measure(&k, MeasureKind::ConeVolume).node_masses();
        worst_angle = worst_angle.max(subspace_angle(&masses, &eig, &lin));
    }
    ensure(
        worst_dev < 1e-6 && worst_angle < 1e-4 && worst_gap > 1e-3,
        format!(
            "50 bodies: max eigenvalue deviation {worst_dev:.2e}, max angle {worst_angle:.2e} rad, \
             min lambda_(n+1) - 1 = {worst_gap:.3}"
        ),
    )
}

fn classification() -> Verdict {
    let cases: [(f64, &[usize]); 4] = [(-10.0, &[3]), (-20.0, &[3, 4]), (-5.0, &[]), (-7.0, &[])];
    let mut lines = Vec::new();
    let mut ok = true;
    for (p, want) in cases {
        let t = Instant::now();
        let c = classify_planar(p).map_err(err)?;
        let elapsed = t.elapsed();
        let worst = c.solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
        ok &= c.found == want && worst < 1e-9 && elapsed < Duration::from_secs(10);
        lines.push(format!(
            "p={p}: {:?} res {worst:.1e} {elapsed:.2?}",
            c.found
        ));
    }
    ensure(ok, lines.join("; "))
}

fn inequality_corpus() -> Verdict {
    let outcome = run_corpus(&CorpusConfig::default()).map_err(err)?;
    let names = [
        "local_bm",
        "local_af",
        "spectral_gap_ineq",
        "reverse_ineq",
        "stability_bm",
        "minkowski_second_stability",
        "symmetric_stability",
        "ratio_bm_stability",
        "xk_inequality",
        "heintze_karcher_planar",
    ];
    let missing: Vec<&str> = names
        .iter()
        .copied()
        .filter(|n| !outcome.records.iter().any(|r| r.report.name.starts_with(n)))
        .collect();
    let witnesses = outcome.records.iter().filter(|r| r.expect_equality).count();
    let (v, m) = (outcome.violations(), outcome.missed_equalities());
    ensure(
        v == 0 && m == 0 && outcome.errors.is_empty() && missing.is_empty(),
        format!(
            "{} reports, {witnesses} equality witnesses: {v} violations, {m} missed equalities, \
             {} case errors, missing kinds {missing:?}",
            outcome.records.len(),
            outcome.errors.len()
        ),
    )
}

fn ratio_reduces_to_minkowski() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let domains = [dom(2, 24), dom(3, 10)];
    let mut worst = 0.0f64;
    for i in 0..10 {
        let d = &domains[i % 2];
        let k = sample(d, &mut rng, 0.2);
        // a perturbed L1 is never homothetic to K, so both sides stay away from zero
        let sampler = BodySampler {
            domain: d,
            amplitude: 0.2,
        };
        let l = sampler
            .draw(&mut rng, Family::Perturbed, false)
            .map_err(err)?
            .0;
        let lab = Lab::new(&k).map_err(err)?;
        let ratio = lab.ratio_bm_stability(&l, &k).map_err(err)?;
        let mink = lab.minkowski_second_stability(&l).map_err(err)?;
        worst = worst
            .max(rel(ratio.details["scaled_lhs"], mink.lhs))
            .max(rel(ratio.details["scaled_rhs"], mink.rhs));
    }
    ensure(
        worst < 1e-9,
        format!("10 pairs: max relative gap {worst:.2e}"),
    )
}

/// `L = r + a * rho + t` with `rho` of degrees 2..=4: mean width `2r`, Steiner point `t`.
fn steiner_specialization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let domains = [dom(2, 16), dom(3, 10)];
    let mut worst = 0.0f64;
    for i in 0..10 {
        let d = &domains[i % 2];
        let n = d.n();
        let ball = SupportField::ball(d, 1.0).map_err(err)?;
        let r = rng.gen_range(0.8..1.6);
        let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let coeffs: Vec<f64> = (0..d.basis_len())
            .map(|j| match d.degree(j) {
                0 => r * d.synthesize(&unit(d.basis_len(), j))[0].recip(),
                2..=4 => rng.gen_range(-0.01..0.01),
                _ => 0.0,
            })
            .collect();
        let l = SupportField::from_coeffs(d, coeffs)
            .map_err(err)?
            .translate(&t)
            .map_err(err)?;
        let dec = decompose(&ball, l.jet()).map_err(err)?;
        worst = worst.max((dec.c_f - r).abs());
        for (a, b) in dec.v_f.iter().zip(&t) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(
        worst < 1e-8,
        format!("10 bodies: max |(c_f, v_f) - (w/2, s)| = {worst:.2e}"),
    )
}

fn unit(len: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; len];
    e[j] = 1.0;
    e
}

fn isotropic_vl() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let domains = [dom(2, 24), dom(3, 12)];
    let mut worst = 0.0f64;
    for i in 0..6 {
        let d = &domains[i % 2];
        let n = d.n();
        let k = sample(d, &mut rng, 0.15);
        let iso = s2_isotropize(&k, 1e-10, 100).map_err(err)?.body;
        let lab = Lab::new(&iso).map_err(err)?;
        let x = lab.xk_inequality().map_err(err)?;
        let scale = n as f64 * iso.volume() / measure(&iso, MeasureKind::LpSurface(2.0)).total();
        for (l, v) in x.v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                let want = if j == l { scale } else { 0.0 };
                worst = worst.max((vj - want).abs());
            }
        }
    }
    ensure(
        worst < 1e-7,
        format!("6 isotropized bodies: max |v_l - c E_l| = {worst:.2e}"),
    )
}

fn sl3_ellipsoid(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(3, 3, |i, j| {
        if i == j {
            1.0 + rng.gen_range(0.0..0.4)
        } else {
            rng.gen_range(-0.2..0.2)
        }
    });
    let det: f64 = a.determinant();
    a / det.cbrt()
}

fn uniqueness_basin() -> Verdict {
    let d = dom(3, 10);
    let mut worst = 0.0f64;
    let mut iters = 0;
    for p in [-1.0, -2.0, -2.9] {
        for m in -2..=2 {
            let start = SupportField::perturbed_ball(&d, 1.0, 2, m, 0.1).map_err(err)?;
            let rep = solve_sphere(p, &start, &SolveOptions::default()).map_err(err)?;
            worst = worst.max(rep.hypotheses.unit_ball_distance);
            iters = iters.max(rep.newton_iters);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ell = 0.0f64;
    for _ in 0..3 {
        let h = unimodular_ellipsoid_jet(&d, &sl3_ellipsoid(&mut rng)).map_err(err)?;
        ell = ell.max(pde_residual(&h, -3.0));
    }
    ensure(
        worst < 1e-6 && ell < 1e-6,
        format!(
            "15 Newton solves: max |h - 1| = {worst:.2e} (<= {iters} steps); \
             SL(3) ellipsoids at p = -3: residual {ell:.2e}"
        ),
    )
}

/// Exact jet of a planar profile at the circle nodes.
fn planar_jet(d: &Arc<SphericalDomain>, s: &PlanarSolution) -> NodalField {
    let mut values = Vec::new();
    let mut tangent = TangentData::zeros(d.node_count());
    for (q, x) in d.nodes().iter().enumerate() {
        let theta = x[1].atan2(x[0]);
        let (h, dh, d2h) = s.eval(theta);
        let e = d.frame(q)[0];
        let sign = (-x[1] * e[0] + x[0] * e[1]).signum();
        values.push(h);
        tangent.grad[q][0] = sign * dh;
        tangent.hess_restricted[q][0][0] = d2h + h;
    }
    NodalField::new(Arc::clone(d), values, tangent).expect("node-sized")
}

fn identities() -> Verdict {
    let mut worst = 0.0f64;
    let mut count = 0;
    let d3 = dom(3, 10);
    for p in [-1.0, -2.0, -2.9] {
        let start = SupportField::perturbed_ball(&d3, 1.0, 2, 1, 0.1).map_err(err)?;
        let rep = solve_sphere(p, &start, &SolveOptions::default()).map_err(err)?;
        worst = worst
            .max(rep.identities.ibp_rel)
            .max(rep.identities.div_rel);
        count += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..3 {
        let h = unimodular_ellipsoid_jet(&d3, &sl3_ellipsoid(&mut rng)).map_err(err)?;
        let id = proof_identities(&h, -3.0);
        worst = worst.max(id.ibp_rel).max(id.div_rel);
        count += 1;
    }
    let d2 = dom(2, 128);
    let a = DMatrix::from_row_slice(2, 2, &[1.4, 0.3, 0.0, 1.0 / 1.4]);
    let h = unimodular_ellipsoid_jet(&d2, &a).map_err(err)?;
    let id = proof_identities(&h, -2.0);
    worst = worst.max(id.ibp_rel).max(id.div_rel);
    count += 1;
    for p in [-10.0, -20.0] {
        for s in classify_planar(p).map_err(err)?.solutions {
            let id = proof_identities(&planar_jet(&d2, &s), p);
            worst = worst.max(id.ibp_rel).max(id.div_rel);
            count += 1;
        }
    }
    ensure(
        worst < 1e-7,
        format!("{count} solutions: max relative gap {worst:.2e}"),
    )
}

/// Smallest ratio of consecutive errors under step halving, ignoring pairs
/// already at round-off.
fn min_order_ratio(errors: &[f64], floor: f64) -> f64 {
    errors
        .windows(2)
        .filter(|w| w[1] > floor)
        .map(|w| w[0] / w[1])
        .fold(f64::INFINITY, f64::min)
}

fn derivative_checks() -> Verdict {
    let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut newton = f64::INFINITY;
    let mut spectral = f64::INFINITY;
    for i in 0..6 {
        let d = if i % 2 == 0 { dom(2, 16) } else { dom(3, 8) };
        let k = sample(&d, &mut rng, 0.15);
        let p = rng.gen_range(-5.0..-0.5);
        let dir: Vec<f64> = (0..d.basis_len())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let e = linearization_fd_errors(&k, p, &dir, &steps).map_err(err)?;
        newton = newton.min(min_order_ratio(&e, 1e-9));

        // geodesic differences at random nodes
        let jet = k.jet();
        let coeffs = k.coeffs();
        for _ in 0..4 {
            let q = rng.gen_range(0..d.node_count());
            let x = d.nodes()[q];
            let fr = d.frame(q);
            let mut w = [0.0f64; 2];
            for a in 0..d.dim_t() {
                w[a] = rng.gen_range(-1.0..1.0);
            }
            let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let e: [f64; 3] = std::array::from_fn(|i| (w[0] * fr[0][i] + w[1] * fr[1][i]) / norm);
            let grad = (w[0] * jet.tangent.grad[q][0] + w[1] * jet.tangent.grad[q][1]) / norm;
            let hr = jet.covariant_hess(q);
            let hess = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| w[a] * w[b] * hr[a][b])
                .sum::<f64>()
                / (norm * norm);
            let at = |t: f64| {
                let y: [f64; 3] = std::array::from_fn(|i| t.cos() * x[i] + t.sin() * e[i]);
                d.evaluate(coeffs, &y)
            };
            let f0 = at(0.0);
            let mut e1 = Vec::new();
            let mut e2 = Vec::new();
            for t in steps {
                let (fp, fm) = (at(t), at(-t));
                e1.push(((fp - fm) / (2.0 * t) - grad).abs());
                e2.push(((fp - 2.0 * f0 + fm) / (t * t) - hess).abs());
            }
            spectral = spectral
                .min(min_order_ratio(&e1, 1e-10))
                .min(min_order_ratio(&e2, 1e-7));
        }
    }
    ensure(
        newton > 3.5 && spectral > 3.5,
        format!(
            "min error ratio per halving: linearization {newton:.3}, spectral derivatives {spectral:.3}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("ball spectrum, n = 2", ball_spectrum_2d),
        ("ball spectrum, n = 3", ball_spectrum_3d),
        ("GL invariance of the spectrum", gl_invariance),
        ("lambda_1 structure on a random corpus", lambda1_structure),
        ("planar branch counts", classification),
        ("inequality corpus", inequality_corpus),
        (
            "ratio form reduces to the Minkowski form",
            ratio_reduces_to_minkowski,
        ),
        ("Steiner specialization", steiner_specialization),
        ("v_l on S_2-isotropic bodies", isotropic_vl),
        (
            "uniqueness basin and ellipsoids at p = -n",
            uniqueness_basin,
        ),
        ("proof identities on solutions", identities),
        ("finite-difference derivative checks", derivative_checks),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} [{:02}] {name}: {detail} ({:.2?})",
            i + 1,
            t.elapsed()
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
