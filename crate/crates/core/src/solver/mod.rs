//! The isotropic equation `h^{1-p} det(D^2 h) = 1`: planar shooting,
//! damped Newton on the sphere, and the uniqueness hypotheses.

pub mod planar;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::basis::{ScalarField, SphericalDomain};
use crate::body::{centroid, isotropy_defect, SupportField, SupportFunction};
use crate::error::{HbmError, Result};
use crate::field::NodalField;
use crate::spectrum::lambda2;
use crate::tangent::{self, TMat};

pub use planar::{
    classify_planar, classify_planar_with, predicted_branches, solve_planar_branch, BranchCount,
    Classification, PlanarSolution, SearchWindow,
};

/// Nodal residual accepted as a solution.
pub const SOLVE_TOL: f64 = 1e-7;
/// Halvings allowed per Newton step.
pub const MAX_HALVINGS: usize = 30;
pub const MAX_NEWTON_ITER: usize = 60;
/// Guard band for eigenvalue threshold comparisons.
pub const GUARD_BAND: f64 = 1e-6;
/// `||h - 1||_inf` accepted as the unit ball.
pub const UNIT_BALL_TOL: f64 = 1e-5;
pub const ISOTROPY_TOL: f64 = 1e-6;
pub const CENTROID_TOL: f64 = 1e-6;

/// Nodal `h^{1-p} det D^2 h - 1`.
pub fn pde_residual_nodes(h: &NodalField, p: f64) -> Vec<f64> {
    let d = h.domain().dim_t();
    h.values
        .iter()
        .zip(&h.tangent.hess_restricted)
        .map(|(v, m)| v.powf(1.0 - p) * tangent::det(d, m) - 1.0)
        .collect()
}

/// `max |h^{1-p} det D^2 h - 1|` over the nodes.
pub fn pde_residual(h: &NodalField, p: f64) -> f64 {
    pde_residual_nodes(h, p)
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
}

/// Cofactor matrix: `d det(A)[B] = <cof(A), B>`.
fn cofactor(d: usize, a: &TMat) -> TMat {
    match d {
        1 => [[1.0, 0.0], [0.0, 0.0]],
        _ => [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]],
    }
}

/// Directional derivative of the nodal residual at `h` along `z`:
/// `(1-p) h^{-p} det(D^2 h) z + h^{1-p} <cof D^2 h, D^2 z>`.
pub fn linearization_nodes(h: &NodalField, p: f64, z: &NodalField) -> Vec<f64> {
    let d = h.domain().dim_t();
    (0..h.len())
        .map(|q| {
            let v = h.values[q];
            let m = &h.tangent.hess_restricted[q];
            (1.0 - p) * v.powf(-p) * tangent::det(d, m) * z.values[q]
                + v.powf(1.0 - p)
                    * tangent::contract(d, &cofactor(d, m), &z.tangent.hess_restricted[q])
        })
        .collect()
}

/// Galerkin Jacobian `J_jk = sum_q w_q phi_j dF[phi_k]` at `h`.
fn galerkin_jacobian(dom: &SphericalDomain, h: &NodalField, p: f64) -> DMatrix<f64> {
    let d = dom.dim_t();
    let phi = dom.basis_values();
    let (nq, nb) = phi.shape();
    let mut lin = DMatrix::zeros(nq, nb);
    for q in 0..nq {
        let v = h.values[q];
        let m = &h.tangent.hess_restricted[q];
        let a = (1.0 - p) * v.powf(-p) * tangent::det(d, m);
        let cof = tangent::scale(v.powf(1.0 - p), &cofactor(d, m));
        for j in 0..nb {
            let mut s = a * phi[(q, j)];
            for r in 0..d {
                for c in 0..d {
                    s += cof[r][c] * dom.basis_hess(r, c)[(q, j)];
                }
            }
            lin[(q, j)] = s;
        }
    }
    let mut wphi = phi.clone();
    for (q, w) in dom.weights().iter().enumerate() {
        wphi.row_mut(q).scale_mut(*w);
    }
    wphi.transpose() * lin
}

/// Central-difference check of [`linearization_nodes`]: max nodal error for
/// each step size.
pub fn linearization_fd_errors(
    body: &SupportField,
    p: f64,
    dir: &[f64],
    steps: &[f64],
) -> Result<Vec<f64>> {
    let dom = body.domain();
    let z = NodalField::from_coeffs(dom, dir.to_vec())?;
    let exact = linearization_nodes(body.jet(), p, &z);
    steps
        .iter()
        .map(|eps| {
            let plus = body.jet().combine(1.0, &z, *eps)?;
            let minus = body.jet().combine(1.0, &z, -*eps)?;
            let fp = pde_residual_nodes(&plus, p);
            let fm = pde_residual_nodes(&minus, p);
            Ok((0..exact.len())
                .map(|q| ((fp[q] - fm[q]) / (2.0 * eps) - exact[q]).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Both sides of the two proof identities on a solution with exponent `p`.
#[derive(Clone, Debug, Serialize)]
pub struct ProofIdentities {
    /// `int h Delta h dV`.
    pub ibp_lhs: f64,
    /// `-(p + 1) int |grad h|^2 dV`.
    pub ibp_rhs: f64,
    pub ibp_rel: f64,
    /// `int X dV`.
    pub div_lhs: Vec<f64>,
    /// `((n + p)/(n - 1)) int grad h dV`.
    pub div_rhs: Vec<f64>,
    pub div_rel: f64,
}

fn relative_gap(a: f64, b: f64, scale: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s <= 1e-14 * scale {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn proof_identities(h: &NodalField, p: f64) -> ProofIdentities {
    let dom = h.domain();
    let n = dom.n();
    let d = dom.dim_t();
    let dv: Vec<f64> = h
        .values
        .iter()
        .zip(&h.tangent.hess_restricted)
        .map(|(v, m)| v * tangent::det(d, m) / n as f64)
        .collect();
    let lap = h.laplacian();
    let gsq = h.grad_norm_sq();
    let w = dom.weights();
    let mut ibp_lhs = 0.0;
    let mut gsq_int = 0.0;
    let mut h2 = 0.0;
    let mut x_int = vec![0.0; n];
    let mut g_int = vec![0.0; n];
    for q in 0..h.len() {
        let m = w[q] * dv[q];
        ibp_lhs += m * h.values[q] * lap[q];
        gsq_int += m * gsq[q];
        h2 += m * h.values[q] * h.values[q];
        let g = dom.to_ambient(q, &h.tangent.grad[q]);
        let x = dom.nodes()[q];
        for i in 0..n {
            x_int[i] += m * (h.values[q] * x[i] + g[i]);
            g_int[i] += m * g[i];
        }
    }
    let ibp_rhs = -(p + 1.0) * gsq_int;
    let factor = (n as f64 + p) / (n as f64 - 1.0);
    let div_rhs: Vec<f64> = g_int.iter().map(|g| factor * g).collect();
    let div_rel = (0..n)
        .map(|i| relative_gap(x_int[i], div_rhs[i], h2))
        .fold(0.0, f64::max);
    ProofIdentities {
        ibp_lhs,
        ibp_rhs,
        ibp_rel: relative_gap(ibp_lhs, ibp_rhs, h2),
        div_lhs: x_int,
        div_rhs,
        div_rel,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Met,
    Boundary,
    NotMet,
    /// The threshold is undefined for this exponent.
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremVerdict {
    HypothesesNotMet,
    /// Hypotheses hold up to the guard band.
    Boundary,
    /// Hypotheses hold and the body is the unit ball.
    UnitBall,
    /// Hypotheses hold but the body is not the unit ball.
    Contradiction,
}

impl TheoremVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremVerdict::HypothesesNotMet => "hypotheses_not_met",
            TheoremVerdict::Boundary => "boundary",
            TheoremVerdict::UnitBall => "unit_ball",
            TheoremVerdict::Contradiction => "contradiction",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Thresholds {
    /// `(-p - 1)/(n - 1)`.
    pub origin_centred: f64,
    /// `(n - 1)/(2n - 1 + p)` when the denominator is positive.
    pub general: Option<f64>,
}

impl Thresholds {
    pub fn new(n: usize, p: f64) -> Self {
        let n = n as f64;
        let den = 2.0 * n - 1.0 + p;
        Thresholds {
            origin_centred: (-p - 1.0) / (n - 1.0),
            general: (den > 0.0).then(|| (n - 1.0) / den),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub p: f64,
    pub n: usize,
    pub pde_residual: f64,
    pub isotropy_defect: f64,
    pub isotropic: bool,
    pub centroid_norm: f64,
    pub origin_centred: bool,
    pub lambda2: f64,
    pub thresholds: Thresholds,
    pub origin_threshold: ThresholdStatus,
    pub general_threshold: ThresholdStatus,
    /// `n >= 3` and `-2n - 1 <= p < -n`.
    pub origin_range: bool,
    /// `n >= 3` and `(1 - 3n^2)/(2n) <= p < -n`.
    pub general_range: bool,
    pub unit_ball_distance: f64,
    pub theorem_origin_centred: TheoremVerdict,
    pub theorem_general: TheoremVerdict,
}

fn compare(lambda2: f64, threshold: Option<f64>) -> ThresholdStatus {
    match threshold {
        None => ThresholdStatus::Undefined,
        Some(t) if (lambda2 - t).abs() <= GUARD_BAND => ThresholdStatus::Boundary,
        Some(t) if lambda2 > t => ThresholdStatus::Met,
        Some(_) => ThresholdStatus::NotMet,
    }
}

fn theorem_verdict(conds: &[bool], status: ThresholdStatus, is_ball: bool) -> TheoremVerdict {
    if !conds.iter().all(|c| *c) {
        return TheoremVerdict::HypothesesNotMet;
    }
    match status {
        ThresholdStatus::Met if is_ball => TheoremVerdict::UnitBall,
        ThresholdStatus::Met => TheoremVerdict::Contradiction,
        ThresholdStatus::Boundary => TheoremVerdict::Boundary,
        _ => TheoremVerdict::HypothesesNotMet,
    }
}

/// Evaluates the hypotheses of both uniqueness theorems on `k` and, where
/// they hold, whether `k` is the unit ball.
pub fn check_uniqueness_hypotheses(k: &SupportField, p: f64) -> Result<HypothesisReport> {
    let n = k.n();
    let nf = n as f64;
    let defect = isotropy_defect(k);
    let c = centroid(k);
    let cnorm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = k.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lambda2 = lambda2(k)?;
    let thresholds = Thresholds::new(n, p);
    let origin_threshold = compare(lambda2, Some(thresholds.origin_centred));
    let general_threshold = compare(lambda2, thresholds.general);
    let origin_range = n >= 3 && p >= -2.0 * nf - 1.0 && p < -nf;
    let general_range = n >= 3 && p >= (1.0 - 3.0 * nf * nf) / (2.0 * nf) && p < -nf;
    let unit_ball_distance = k
        .values()
        .iter()
        .fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let is_ball = unit_ball_distance < UNIT_BALL_TOL;
    let pde = pde_residual(k.jet(), p);
    let solves = pde < SOLVE_TOL;
    let isotropic = defect < ISOTROPY_TOL;
    let origin_centred = cnorm < CENTROID_TOL * scale.max(1.0);
    Ok(HypothesisReport {
        p,
        n,
        pde_residual: pde,
        isotropy_defect: defect,
        isotropic,
        centroid_norm: cnorm,
        origin_centred,
        lambda2,
        origin_threshold,
        general_threshold,
        origin_range,
        general_range,
        unit_ball_distance,
        theorem_origin_centred: theorem_verdict(
            &[solves, isotropic, origin_centred, origin_range],
            origin_threshold,
            is_ball,
        ),
        theorem_general: theorem_verdict(
            &[solves, isotropic, general_range],
            general_threshold,
            is_ball,
        ),
        thresholds,
    })
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Initial Newton step fraction in `(0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            damping: 1.0,
            max_iter: MAX_NEWTON_ITER,
            tol: SOLVE_TOL,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub body: SupportField,
    pub p: f64,
    pub pde_residual: f64,
    pub newton_iters: usize,
    /// Galerkin residual norm before each step and at the end.
    pub residual_history: Vec<f64>,
    pub lambda2: f64,
    pub thresholds: Thresholds,
    pub hypotheses: HypothesisReport,
    pub identities: ProofIdentities,
}

fn galerkin_norm(dom: &SphericalDomain, nodal: &[f64]) -> f64 {
    dom.analyze(nodal).iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration in basis coefficients on the Galerkin projection
/// of `h^{1-p} det(D^2 h) - 1`. Steps are least-squares solutions (SVD) and
/// are halved until the body stays convex and the residual decreases.
pub fn solve_sphere(p: f64, initial: &SupportField, opts: &SolveOptions) -> Result<SolveReport> {
    let dom = Arc::clone(initial.domain());
    let mut body = initial.clone();
    let mut residual = galerkin_norm(&dom, &pde_residual_nodes(body.jet(), p));
    let mut history = vec![residual];
    let mut iters = 0;
    let step0 = opts.damping.clamp(1e-6, 1.0);
    while iters < opts.max_iter {
        if residual < 1e-14 {
            break;
        }
        let g = DVector::from_vec(dom.analyze(&pde_residual_nodes(body.jet(), p)));
        let jac = galerkin_jacobian(&dom, body.jet(), p);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let delta = svd
            .solve(&(-g), 1e-10 * smax)
            .map_err(|e| HbmError::Eigensolver(e.to_string()))?;
        let mut t = step0;
        let mut accepted = None;
        let mut convex_failures = 0;
        for _ in 0..=MAX_HALVINGS {
            let coeffs: Vec<f64> = body
                .coeffs()
                .iter()
                .zip(delta.iter())
                .map(|(c, d)| c + t * d)
                .collect();
            match SupportField::from_coeffs(&dom, coeffs) {
                Ok(trial) => {
                    let r = galerkin_norm(&dom, &pde_residual_nodes(trial.jet(), p));
                    if r < residual {
                        accepted = Some((trial, r));
                        break;
                    }
                }
                Err(HbmError::NotConvex { .. }) | Err(HbmError::NotPositive { .. }) => {
                    convex_failures += 1
                }
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        match accepted {
            Some((trial, r)) => {
                body = trial;
                residual = r;
                history.push(r);
                iters += 1;
            }
            None if convex_failures > MAX_HALVINGS => {
                return Err(HbmError::NotConvexDuringIteration {
                    halvings: MAX_HALVINGS,
                });
            }
            // no further decrease: stagnation at the discretization floor
            None => break,
        }
    }
    let pde = pde_residual(body.jet(), p);
    if !(pde < opts.tol) {
        return Err(HbmError::NewtonDiverged {
            iters,
            residual: pde,
        });
    }
    let hypotheses = check_uniqueness_hypotheses(&body, p)?;
    Ok(SolveReport {
        p,
        pde_residual: pde,
        newton_iters: iters,
        residual_history: history,
        lambda2: hypotheses.lambda2,
        thresholds: Thresholds::new(dom.n(), p),
        identities: proof_identities(body.jet(), p),
        hypotheses,
        body,
    })
}

/// Serialized solution: `{p, n, lmax, coeffs, pde_residual, lambda2, verdicts}`.
#[derive(Clone, Debug, Serialize)]
pub struct SolutionFile {
    pub p: f64,
    pub n: usize,
    pub lmax: usize,
    pub coeffs: Vec<f64>,
    pub pde_residual: f64,
    pub lambda2: f64,
    pub newton_iters: usize,
    pub verdicts: BTreeMap<String, String>,
    pub hypotheses: HypothesisReport,
    pub identities: ProofIdentities,
}

impl SolveReport {
    pub fn solution_file(&self) -> SolutionFile {
        let h = &self.hypotheses;
        let mut verdicts = BTreeMap::new();
        verdicts.insert(
            "origin_centred_theorem".into(),
            h.theorem_origin_centred.as_str().into(),
        );
        verdicts.insert("general_theorem".into(), h.theorem_general.as_str().into());
        verdicts.insert(
            "unit_ball".into(),
            (h.unit_ball_distance < UNIT_BALL_TOL).to_string(),
        );
        verdicts.insert("isotropic".into(), h.isotropic.to_string());
        verdicts.insert("origin_centred".into(), h.origin_centred.to_string());
        SolutionFile {
            p: self.p,
            n: self.body.n(),
            lmax: self.body.domain().lmax(),
            coeffs: self.body.coeffs().to_vec(),
            pde_residual: self.pde_residual,
            lambda2: self.lambda2,
            newton_iters: self.newton_iters,
            verdicts,
            hypotheses: self.hypotheses.clone(),
            identities: self.identities.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.solution_file())?)
    }
}

/// Exact jet of `h(x) = |A^T x|` for the ellipsoid `A B`, with `A` rescaled
/// to unit determinant so that it solves the equation at `p = -n`.
pub fn unimodular_ellipsoid_jet(
    domain: &Arc<SphericalDomain>,
    a: &DMatrix<f64>,
) -> Result<NodalField> {
    let n = domain.n();
    if a.nrows() != n || a.ncols() != n {
        return Err(HbmError::LengthMismatch {
            expected: n,
            got: a.nrows(),
        });
    }
    let det = a.determinant();
    if det.abs() < 1e-300 {
        return Err(HbmError::SingularMap);
    }
    let a = a / det.abs().powf(1.0 / n as f64);
    let m = &a * a.transpose();
    let quad = ScalarField::project(domain, |x| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += x[i] * m[(i, j)] * x[j];
            }
        }
        s
    });
    let q = NodalField::from_scalar(domain, &quad);
    Ok(q.map(|x| x.sqrt(), |x| 0.5 / x.sqrt(), |x| -0.25 / (x * x.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_domain;

    #[test]
    fn unit_ball_solves_for_every_p() {
        let dom = make_domain(3, 6).unwrap();
        let b = SupportField::ball(&dom, 1.0).unwrap();
        for p in [-7.0, -3.0, -1.0, 0.5] {
            assert!(pde_residual(b.jet(), p) < 1e-14);
        }
    }

    #[test]
    fn thresholds_match_closed_forms() {
        let t = Thresholds::new(3, -6.0);
        assert!((t.origin_centred - 2.5).abs() < 1e-15);
        assert!(t.general.is_none());
        let t = Thresholds::new(3, -4.0);
        assert!((t.general.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ball_meets_hypotheses() {
        let dom = make_domain(3, 8).unwrap();
        let b = SupportField::ball(&dom, 1.0).unwrap();
        let r = check_uniqueness_hypotheses(&b, -6.0).unwrap();
        assert_eq!(r.theorem_origin_centred, TheoremVerdict::UnitBall);
        assert_eq!(r.general_threshold, ThresholdStatus::Undefined);
        let r = check_uniqueness_hypotheses(&b, -4.0).unwrap();
        assert_eq!(r.theorem_general, TheoremVerdict::UnitBall);
        let e = SupportField::ellipsoid(&dom, &[1.3, 1.0, 0.8]).unwrap();
        let r = check_uniqueness_hypotheses(&e, -4.0).unwrap();
        assert!(!r.isotropic);
        assert_eq!(r.theorem_general, TheoremVerdict::HypothesesNotMet);
    }

    #[test]
    fn linearization_is_second_order() {
        let dom = make_domain(3, 8).unwrap();
        let k = SupportField::perturbed_ball(&dom, 1.0, 2, 1, 0.1).unwrap();
        let mut dir = vec![0.0; dom.basis_len()];
        dir[5] = 0.3;
        dir[11] = -0.2;
        let errs = linearization_fd_errors(&k, -2.5, &dir, &[1e-3, 5e-4]).unwrap();
        assert!((errs[0] / errs[1] - 4.0).abs() < 0.2, "{errs:?}");
    }

    #[test]
    fn newton_returns_to_the_ball() {
        let dom = make_domain(3, 10).unwrap();
        let k = SupportField::perturbed_ball(&dom, 1.0, 2, 0, 0.1).unwrap();
        let r = solve_sphere(-2.0, &k, &SolveOptions::default()).unwrap();
        assert!(
            r.hypotheses.unit_ball_distance < 1e-8,
            "{}",
            r.hypotheses.unit_ball_distance
        );
    }

    #[test]
    fn unimodular_ellipsoid_solves_centro_affine_case() {
        let dom = make_domain(3, 16).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.3, 0.2, 0.0, 0.0, 0.9, 0.1, 0.1, 0.0, 1.1]);
        let h = unimodular_ellipsoid_jet(&dom, &a).unwrap();
        assert!(pde_residual(&h, -3.0) < 1e-11);
        let ids = proof_identities(&h, -3.0);
        assert!(ids.ibp_rel < 1e-9, "{ids:?}");
    }
}
