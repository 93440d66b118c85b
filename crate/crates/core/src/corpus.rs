//! Seeded random bodies and the full inequality suite run over them.
//!
//! Case `i` draws from `ChaCha8Rng::seed_from_u64(seed + i)`, so every case is
//! reproducible on its own and the output does not depend on scheduling.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{make_domain, ScalarField, SphericalDomain};
use crate::body::SupportField;
use crate::error::{HbmError, Result};
use crate::field::NodalField;
use crate::inequality::{
    fmt17, local_af, project_mean_free, project_mean_free_mixed, InequalityReport, Lab, Verdict,
};
use crate::spectrum::RenormLinear;

pub const DEFAULT_SEED: u64 = 20240611;
pub const DEFAULT_CASES: usize = 200;
pub const DEFAULT_AMPLITUDE: f64 = 0.2;
/// Draws per body before a case is abandoned.
pub const MAX_DRAWS: usize = 200;

#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub seed: u64,
    pub cases: usize,
    /// Upper bound of the perturbation amplitude.
    pub amplitude: f64,
    /// Dimensions cycled through by case index.
    pub dims: Vec<usize>,
    pub lmax2: usize,
    pub lmax3: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: DEFAULT_SEED,
            cases: DEFAULT_CASES,
            amplitude: DEFAULT_AMPLITUDE,
            dims: vec![2, 3],
            lmax2: 24,
            lmax3: 12,
        }
    }
}

/// Shape family of a random body.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Ball,
    Ellipsoid,
    Perturbed,
}

/// Random body generator over one domain.
pub struct BodySampler<'a> {
    pub domain: &'a Arc<SphericalDomain>,
    pub amplitude: f64,
}

impl BodySampler<'_> {
    /// Highest perturbation degree: 4 on the circle, 3 on the sphere.
    fn max_degree(&self) -> usize {
        if self.domain.n() == 2 {
            4
        } else {
            3
        }
    }

    fn rotation(&self, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let n = self.domain.n();
        let g = DMatrix::from_fn(n, n, |_, _| normal(rng));
        g.qr().q()
    }

    /// Random harmonic mix normalized to `max |rho| = 1` at the nodes.
    fn perturbation(&self, rng: &mut ChaCha8Rng, symmetric: bool) -> Vec<f64> {
        let dom = self.domain;
        let mut c = vec![0.0; dom.basis_len()];
        for (j, cj) in c.iter_mut().enumerate() {
            let l = dom.degree(j);
            if l >= 2 && l <= self.max_degree() && (!symmetric || l % 2 == 0) {
                *cj = normal(rng);
            }
        }
        let vals = dom.synthesize(&c);
        let m = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        c.iter().map(|x| x / m).collect()
    }

    fn draw_once(
        &self,
        rng: &mut ChaCha8Rng,
        family: Family,
        symmetric: bool,
    ) -> Result<(SupportField, String)> {
        let dom = self.domain;
        let n = dom.n();
        let radius = rng.gen_range(0.8..1.5);
        let body = match family {
            Family::Ball => SupportField::ball(dom, radius)?,
            Family::Ellipsoid => {
                let axes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.85..1.2)).collect();
                let t =
                    self.rotation(rng) * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(axes));
                SupportField::ball_image(dom, &(t * radius))?
            }
            Family::Perturbed => {
                let rho = self.perturbation(rng, symmetric);
                let a = rng.gen_range(0.0..self.amplitude);
                let base = ScalarField::constant(dom, radius);
                let pert = ScalarField::from_coeffs(dom, rho)?;
                SupportField::new(dom, base.combine(1.0, &pert, a * radius))?
            }
        };
        let body = if symmetric || family == Family::Ellipsoid {
            body
        } else {
            let v: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(-0.15..0.15) * radius)
                .collect();
            body.translate(&v)?
        };
        let label = match family {
            Family::Ball => "ball",
            Family::Ellipsoid => "ellipsoid",
            Family::Perturbed => "perturbed",
        };
        Ok((body, label.to_string()))
    }

    /// Draws until the body is valid; invalid draws are returned as log lines.
    pub fn draw(
        &self,
        rng: &mut ChaCha8Rng,
        family: Family,
        symmetric: bool,
    ) -> Result<(SupportField, String, Vec<String>)> {
        let mut rejected = Vec::new();
        for attempt in 0..MAX_DRAWS {
            match self.draw_once(rng, family, symmetric) {
                Ok((b, label)) => return Ok((b, label, rejected)),
                Err(e @ (HbmError::NotConvex { .. } | HbmError::NotPositive { .. })) => {
                    rejected.push(format!("attempt {attempt}: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
        Err(HbmError::MaxIterExceeded(MAX_DRAWS))
    }

    /// Random family with probabilities 1/6, 1/3, 1/2.
    pub fn family(rng: &mut ChaCha8Rng) -> Family {
        match rng.gen_range(0..6) {
            0 => Family::Ball,
            1 | 2 => Family::Ellipsoid,
            _ => Family::Perturbed,
        }
    }

    /// Random band-limited test function of degree at most 4.
    pub fn test_function(&self, rng: &mut ChaCha8Rng) -> NodalField {
        let dom = self.domain;
        let c: Vec<f64> = (0..dom.basis_len())
            .map(|j| if dom.degree(j) <= 4 { normal(rng) } else { 0.0 })
            .collect();
        NodalField::from_coeffs(dom, c).expect("basis-sized")
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusRecord {
    pub case: usize,
    pub dim: usize,
    /// Whether the inputs are a characterized equality case.
    pub expect_equality: bool,
    pub report: InequalityReport,
}

impl CorpusRecord {
    /// Violated, or an equality witness that missed equality.
    pub fn failed(&self) -> bool {
        self.report.verdict == Verdict::Violated
            || (self.expect_equality && self.report.verdict != Verdict::Equality)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusOutcome {
    pub records: Vec<CorpusRecord>,
    pub rejections: Vec<String>,
    /// Cases that could not be evaluated, with the error.
    pub errors: Vec<String>,
}

impl CorpusOutcome {
    pub fn violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.report.verdict == Verdict::Violated)
            .count()
    }

    pub fn missed_equalities(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.expect_equality && r.report.verdict != Verdict::Equality)
            .count()
    }

    /// CSV with columns `name, lhs, rhs, residual, verdict`; names are
    /// prefixed with the case number and dimension.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,lhs,rhs,residual,verdict\n");
        for r in &self.records {
            let tag = if r.expect_equality { "/witness" } else { "" };
            s.push_str(&format!(
                "case{:03}/n{}/{}{},{},{},{},{}\n",
                r.case,
                r.dim,
                r.report.name,
                tag,
                fmt17(r.report.lhs),
                fmt17(r.report.rhs),
                fmt17(r.report.residual),
                r.report.verdict.as_str()
            ));
        }
        s
    }
}

fn run_case(
    case: usize,
    seed: u64,
    dom: &Arc<SphericalDomain>,
    amplitude: f64,
) -> Result<(Vec<CorpusRecord>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(case as u64));
    let n = dom.n();
    let sampler = BodySampler {
        domain: dom,
        amplitude,
    };
    let mut log = Vec::new();
    let mut draw =
        |rng: &mut ChaCha8Rng, family: Family, symmetric: bool| -> Result<SupportField> {
            let (b, label, rejected) = sampler.draw(rng, family, symmetric)?;
            for r in rejected {
                log.push(format!("case {case} ({label}, n={n}): {r}"));
            }
            Ok(b)
        };
    let fk = BodySampler::family(&mut rng);
    let k = draw(&mut rng, fk, false)?;
    let fl = BodySampler::family(&mut rng);
    let l = draw(&mut rng, fl, false)?;
    let fl2 = BodySampler::family(&mut rng);
    let l2 = draw(&mut rng, fl2, false)?;
    let c = draw(&mut rng, Family::Perturbed, false)?;
    let fs = BodySampler::family(&mut rng);
    let ks = draw(&mut rng, fs, true)?;
    let ls = draw(&mut rng, Family::Perturbed, true)?;
    let f = sampler.test_function(&mut rng);
    let v: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let scale = rng.gen_range(0.5..2.0);
    let shift: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let ell_ratio = rng.gen_range(0.9..1.1);

    let mut out = Vec::new();
    let mut push = |report: InequalityReport, expect_equality: bool| {
        out.push(CorpusRecord {
            case,
            dim: n,
            expect_equality,
            report,
        });
    };
    let lab = Lab::new(&k)?;
    let f0 = project_mean_free(&k, &f)?;
    push(lab.local_bm(&f0)?, false);
    let ell = RenormLinear::new(&k, &v).values;
    push(lab.local_bm(&project_mean_free(&k, &ell)?)?, true);
    let rest: Vec<&SupportField> = if n == 3 { vec![&c] } else { vec![] };
    push(
        local_af(&k, &rest, &project_mean_free_mixed(&k, &rest, &f)?)?,
        false,
    );
    push(lab.spectral_gap_ineq(&f)?, false);
    push(lab.reverse_ineq(&f)?, false);
    push(lab.reverse_spectral_ineq(&f)?, false);
    push(lab.stability_bm(&f)?, false);
    let affine = NodalField::constant(dom, 0.7).add(&ell)?;
    push(lab.stability_bm(&affine)?, true);
    let ratio = lab.ratio(&l)?;
    push(lab.stability_bm(&ratio)?, false);
    push(lab.minkowski_second_stability(&l)?, false);
    let homothet = k.scaled(scale)?.translate(&shift)?;
    push(lab.minkowski_second_stability(&homothet)?, true);
    push(lab.ratio_bm_stability(&l, &l2)?, false);
    push(lab.ratio_bm_stability(&l, &homothet)?, false);
    let xk = lab.xk_inequality()?;
    push(xk.basic, false);
    push(xk.stability, false);
    if n == 2 {
        push(lab.heintze_karcher_planar(&l)?, false);
    }
    let lab_s = Lab::new(&ks)?;
    push(lab_s.symmetric_stability(&ls)?, false);
    // origin-centred ellipsoid witness
    let axes: Vec<f64> = (0..n)
        .map(|i| if i == 0 { ell_ratio } else { 1.0 })
        .collect();
    let e = SupportField::ellipsoid(dom, &axes)?;
    push(Lab::new(&e)?.xk_inequality()?.basic, true);
    Ok((out, log))
}

/// Runs the inequality suite over `config.cases` random cases (parallel over
/// cases, results in case order).
pub fn run_corpus(config: &CorpusConfig) -> Result<CorpusOutcome> {
    let mut domains = Vec::new();
    for &d in &config.dims {
        let lmax = if d == 2 { config.lmax2 } else { config.lmax3 };
        domains.push(make_domain(d, lmax)?);
    }
    let results: Vec<_> = (0..config.cases)
        .into_par_iter()
        .map(|i| {
            let dom = &domains[i % domains.len()];
            (i, run_case(i, config.seed, dom, config.amplitude))
        })
        .collect();
    let mut outcome = CorpusOutcome {
        records: Vec::new(),
        rejections: Vec::new(),
        errors: Vec::new(),
    };
    for (i, r) in results {
        match r {
            Ok((recs, log)) => {
                outcome.records.extend(recs);
                outcome.rejections.extend(log);
            }
            Err(e) => outcome.errors.push(format!("case {i}: {e}")),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_are_reproducible() {
        let cfg = CorpusConfig {
            cases: 2,
            ..CorpusConfig::default()
        };
        let a = run_corpus(&cfg).unwrap();
        let b = run_corpus(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.errors.is_empty(), "{:?}", a.errors);
        assert_eq!(a.violations(), 0, "{}", a.to_csv());
        assert_eq!(a.missed_equalities(), 0, "{}", a.to_csv());
    }

    #[test]
    fn large_amplitude_logs_rejections() {
        let dom = make_domain(2, 16).unwrap();
        let s = BodySampler {
            domain: &dom,
            amplitude: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut total = 0;
        for _ in 0..10 {
            let (b, _, rej) = s.draw(&mut rng, Family::Perturbed, false).unwrap();
            assert!(b.min_eig_d2h() > 0.0);
            total += rej.len();
        }
        assert!(total > 0);
    }
}
