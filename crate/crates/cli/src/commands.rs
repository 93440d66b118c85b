use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use hbm::body::json::{default_lmax, BodyDefinition};
use hbm::body::{
    s2_isotropize, SupportField, SupportFunction, ISOTROPIZE_MAX_ITER, ISOTROPIZE_TOL,
};
use hbm::corpus::{run_corpus, CorpusConfig};
use hbm::inequality::{
    fmt17, local_af, project_mean_free, project_mean_free_mixed, reports_to_csv, reports_to_json,
    InequalityReport, Lab, Verdict,
};
use hbm::solver::{classify_planar, solve_sphere, SolveOptions};
use hbm::spectrum::spectral_report;
use hbm::{make_domain, HbmError, SphericalDomain};

use crate::{Cli, Command, Failure, Format, Global, Inequality};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Spectrum { body, count } => spectrum(g, body, *count),
        Command::Check { inequality, bodies } => check(g, *inequality, bodies),
        Command::Classify { p, profiles } => classify(g, *p, profiles.as_deref()),
        Command::Solve { p, init, damping } => solve(g, *p, init, *damping),
        Command::Isotropize { body } => isotropize(g, body),
        Command::Corpus { cases, amplitude } => corpus(g, *cases, *amplitude),
    }
}

fn emit(g: &Global, text: &str) -> Outcome {
    match &g.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value).map_err(HbmError::from)?;
    s.push('\n');
    Ok(s)
}

/// Builds all bodies on one domain: `--lmax`, else the largest natural cutoff.
fn load_bodies(g: &Global, paths: &[PathBuf]) -> Result<Vec<SupportField>, Failure> {
    let defs = paths
        .iter()
        .map(|p| BodyDefinition::read(p))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(first) = defs.first() else {
        return Ok(Vec::new());
    };
    let dim = first.dim;
    if let Some(d) = g.dim {
        if d != dim {
            return Err(HbmError::WrongDimension {
                expected: d,
                got: dim,
            }
            .into());
        }
    }
    let lmax = g
        .lmax
        .unwrap_or_else(|| defs.iter().map(|d| d.natural_lmax()).max().unwrap_or(4));
    let dom = make_domain(dim, lmax)?;
    defs.iter()
        .map(|d| d.build_on(&dom).map_err(Failure::from))
        .collect()
}

fn spectrum(g: &Global, body: &Path, count: usize) -> Outcome {
    let k = load_bodies(g, &[body.to_path_buf()])?.remove(0);
    let report = spectral_report(&k, count)?;
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => json(&report)?,
        Format::Csv => {
            let mut s = String::from("index,eigenvalue,residual\n");
            for (i, (e, r)) in report.eigenvalues.iter().zip(&report.residuals).enumerate() {
                s.push_str(&format!("{i},{},{}\n", fmt17(*e), fmt17(*r)));
            }
            s
        }
    };
    emit(g, &text)
}

fn arity(ineq: Inequality, dim: usize) -> usize {
    match ineq {
        Inequality::Xk => 1,
        Inequality::RatioBm => 3,
        Inequality::LocalAf => dim,
        _ => 2,
    }
}

fn check(g: &Global, ineq: Inequality, paths: &[PathBuf]) -> Outcome {
    if paths.is_empty() {
        return Err(Failure::Usage("check needs at least one body file".into()));
    }
    let bodies = load_bodies(g, paths)?;
    let n = bodies[0].n();
    let want = arity(ineq, n);
    if bodies.len() != want {
        return Err(Failure::Usage(format!(
            "{ineq:?} takes {want} body file(s) in dimension {n}, got {}",
            bodies.len()
        )));
    }
    let k = &bodies[0];
    let lab = Lab::new(k)?;
    let ratio = || lab.ratio(&bodies[1]);
    let mut reports: Vec<InequalityReport> = match ineq {
        Inequality::LocalBm => vec![lab.local_bm(&project_mean_free(k, &ratio()?)?)?],
        Inequality::LocalAf => {
            let rest: Vec<&SupportField> = bodies[2..].iter().collect();
            let f = project_mean_free_mixed(k, &rest, &ratio()?)?;
            vec![local_af(k, &rest, &f)?]
        }
        Inequality::SpectralGap => vec![lab.spectral_gap_ineq(&ratio()?)?],
        Inequality::Reverse => vec![lab.reverse_ineq(&ratio()?)?],
        Inequality::ReverseSpectral => vec![lab.reverse_spectral_ineq(&ratio()?)?],
        Inequality::StabilityBm => vec![lab.stability_bm(&ratio()?)?],
        Inequality::MinkowskiSecond => vec![lab.minkowski_second_stability(&bodies[1])?],
        Inequality::Symmetric => {
            hbm::spectrum::require_symmetric(k)?;
            vec![lab.symmetric_stability(&bodies[1])?]
        }
        Inequality::RatioBm => vec![lab.ratio_bm_stability(&bodies[1], &bodies[2])?],
        Inequality::Xk => {
            let x = lab.xk_inequality()?;
            vec![x.basic, x.stability]
        }
        Inequality::HeintzeKarcher => vec![lab.heintze_karcher_planar(&bodies[1])?],
    };
    if let Some(tol) = g.tol {
        reports = reports.into_iter().map(|r| r.retolerance(tol)).collect();
    }
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut s = reports_to_json(&reports)?;
            s.push('\n');
            s
        }
        Format::Csv => reports_to_csv(&reports)?,
    };
    emit(g, &text)?;
    let bad: Vec<&str> = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Violated)
        .map(|r| r.name.as_str())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(bad.join(", ")))
    }
}

fn set_string(ks: &[usize]) -> String {
    let items: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

#[derive(Serialize)]
struct SolutionSummary {
    k: usize,
    h0: f64,
    residual: f64,
    endpoint_slope: f64,
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    #[serde(flatten)]
    classification: &'a hbm::solver::Classification,
    solutions: Vec<SolutionSummary>,
}

fn classify(g: &Global, p: f64, profiles: Option<&Path>) -> Outcome {
    if let Some(d) = g.dim {
        if d != 2 {
            return Err(HbmError::WrongDimension {
                expected: 2,
                got: d,
            }
            .into());
        }
    }
    let c = classify_planar(p)?;
    eprintln!(
        "p = {p}: found {}  predicted {}",
        set_string(&c.found),
        set_string(&c.predicted)
    );
    if let Some(dir) = profiles {
        std::fs::create_dir_all(dir)?;
        for (i, s) in c.solutions.iter().enumerate() {
            let path = dir.join(format!("profile_k{}_{}.csv", s.k, i));
            std::fs::write(path, s.profile_csv())?;
        }
    }
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => json(&ClassifyOutput {
            classification: &c,
            solutions: c
                .solutions
                .iter()
                .map(|s| SolutionSummary {
                    k: s.k,
                    h0: s.h0,
                    residual: s.residual,
                    endpoint_slope: s.endpoint_slope,
                })
                .collect(),
        })?,
        Format::Csv => {
            let mut s = String::from("k,count,predicted\n");
            for b in &c.branches {
                s.push_str(&format!(
                    "{},{},{}\n",
                    b.k,
                    b.count,
                    c.predicted.contains(&b.k)
                ));
            }
            s
        }
    };
    emit(g, &text)
}

fn initial_body(g: &Global, init: &str) -> Result<SupportField, Failure> {
    let dim = g.dim.unwrap_or(3);
    let domain = |dim: usize| -> Result<Arc<SphericalDomain>, Failure> {
        Ok(make_domain(
            dim,
            g.lmax.unwrap_or_else(|| default_lmax(dim)),
        )?)
    };
    Ok(match init {
        "ball" => SupportField::ball(&domain(dim)?, 1.0)?,
        "perturbed" => SupportField::perturbed_ball(&domain(dim)?, 1.0, 2, 0, 0.1)?,
        "ellipsoid" => {
            let axes: Vec<f64> = if dim == 2 {
                vec![1.2, 1.0 / 1.2]
            } else {
                vec![1.2, 1.0, 1.0 / 1.2]
            };
            SupportField::ellipsoid(&domain(dim)?, &axes)?
        }
        path => load_bodies(g, &[PathBuf::from(path)])?.remove(0),
    })
}

fn solve(g: &Global, p: f64, init: &str, damping: f64) -> Outcome {
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Failure::Usage(format!(
            "damping must lie in (0, 1], got {damping}"
        )));
    }
    let start = initial_body(g, init)?;
    let opts = SolveOptions {
        damping,
        tol: g.tol.unwrap_or(hbm::solver::SOLVE_TOL),
        ..SolveOptions::default()
    };
    let report = solve_sphere(p, &start, &opts)?;
    let h = &report.hypotheses;
    eprintln!(
        "p = {p}: residual {:.3e} after {} Newton steps, lambda_2 = {:.12}, |h - 1| = {:.3e}",
        report.pde_residual, report.newton_iters, report.lambda2, h.unit_ball_distance
    );
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut s = report.to_json()?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("index,coeff\n");
            for (i, c) in report.body.coeffs().iter().enumerate() {
                s.push_str(&format!("{i},{}\n", fmt17(*c)));
            }
            s
        }
    };
    emit(g, &text)
}

#[derive(Serialize)]
struct IsotropizeOutput {
    iterations: usize,
    defect: f64,
    truncation_residual: f64,
    transform: Vec<Vec<f64>>,
    body: BodyDefinition,
}

fn isotropize(g: &Global, body: &Path) -> Outcome {
    let k = load_bodies(g, &[body.to_path_buf()])?.remove(0);
    let iso = s2_isotropize(&k, g.tol.unwrap_or(ISOTROPIZE_TOL), ISOTROPIZE_MAX_ITER)?;
    let n = k.n();
    let transform: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| iso.transform[(i, j)]).collect())
        .collect();
    eprintln!(
        "isotropic after {} iterations (defect {:.3e})",
        iso.iterations, iso.defect
    );
    let text = match g.format.unwrap_or(Format::Json) {
        Format::Json => json(&IsotropizeOutput {
            iterations: iso.iterations,
            defect: iso.defect,
            truncation_residual: iso.truncation_residual,
            transform,
            body: BodyDefinition::from_body(&iso.body),
        })?,
        Format::Csv => {
            let mut s = String::from("row,col,value\n");
            for (i, row) in transform.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    s.push_str(&format!("{i},{j},{}\n", fmt17(*v)));
                }
            }
            s
        }
    };
    emit(g, &text)
}

fn corpus(g: &Global, cases: usize, amplitude: f64) -> Outcome {
    if !(amplitude > 0.0) {
        return Err(Failure::Usage(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let mut cfg = CorpusConfig {
        cases,
        amplitude,
        ..CorpusConfig::default()
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(d) = g.dim {
        if d != 2 && d != 3 {
            return Err(HbmError::UnsupportedDimension(d).into());
        }
        cfg.dims = vec![d];
    }
    if let Some(l) = g.lmax {
        cfg.lmax2 = l;
        cfg.lmax3 = l;
    }
    let mut outcome = run_corpus(&cfg)?;
    if let Some(tol) = g.tol {
        for r in &mut outcome.records {
            r.report = r.report.clone().retolerance(tol);
        }
    }
    for line in &outcome.rejections {
        eprintln!("rejected: {line}");
    }
    for line in &outcome.errors {
        eprintln!("error: {line}");
    }
    let text = match g.format.unwrap_or(Format::Csv) {
        Format::Json => json(&outcome)?,
        Format::Csv => outcome.to_csv(),
    };
    emit(g, &text)?;
    let (v, m) = (outcome.violations(), outcome.missed_equalities());
    eprintln!(
        "{} reports over {cases} cases: {v} violations, {m} missed equalities, {} rejected draws",
        outcome.records.len(),
        outcome.rejections.len()
    );
    if v + m > 0 {
        return Err(Failure::Violation(format!(
            "{v} violations, {m} missed equalities"
        )));
    }
    if !outcome.errors.is_empty() {
        return Err(HbmError::Eigensolver(format!("{} cases failed", outcome.errors.len())).into());
    }
    Ok(())
}
