//! Both sides of the spectral and mixed-volume inequalities on concrete
//! bodies and test functions.
//!
//! Every report is oriented so that `lhs >= rhs` is the claimed inequality;
//! `residual = lhs - rhs`. Test functions are [`NodalField`]s, so exact
//! non-polynomial functions such as `h_L / h_K` are used without truncation.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::basis::SphericalDomain;
use crate::body::{
    gauss_map_inverse, measure, mixed_volume, MeasureKind, SupportField, SupportFunction,
    TranslatedField,
};
use crate::error::{HbmError, Result};
use crate::field::NodalField;
use crate::spectrum::{
    assemble, assemble_mixed, decompose, decompose_with, lambda1e_of, lambda2_of,
    require_symmetric, Decomposition, OperatorPencil, OperatorWeights,
};
use crate::tangent;

/// Default relative tolerance of a report.
pub const REPORT_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Equality,
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Equality => "equality",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub witnesses: Vec<String>,
    /// Intermediate quantities (eigenvalues, mixed volumes, ...).
    pub details: BTreeMap<String, f64>,
}

impl InequalityReport {
    /// Builds a report with tolerance `REPORT_TOL * max(|lhs|, |rhs|, 1)`.
    pub fn new(name: &str, lhs: f64, rhs: f64) -> Self {
        InequalityReport::with_rel_tol(name, lhs, rhs, REPORT_TOL)
    }

    pub fn with_rel_tol(name: &str, lhs: f64, rhs: f64, rel: f64) -> Self {
        let tolerance = rel * lhs.abs().max(rhs.abs()).max(1.0);
        let residual = lhs - rhs;
        let verdict = if !residual.is_finite() || residual < -tolerance {
            Verdict::Violated
        } else if residual.abs() <= tolerance {
            Verdict::Equality
        } else {
            Verdict::Holds
        };
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            residual,
            tolerance,
            verdict,
            witnesses: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    /// Re-evaluates the verdict with a different relative tolerance.
    pub fn retolerance(mut self, rel: f64) -> Self {
        let fresh = InequalityReport::with_rel_tol(&self.name, self.lhs, self.rhs, rel);
        self.tolerance = fresh.tolerance;
        self.verdict = fresh.verdict;
        self
    }

    pub fn witness(mut self, w: impl Into<String>) -> Self {
        self.witnesses.push(w.into());
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict != Verdict::Violated
    }
}

/// JSON array of reports.
pub fn reports_to_json(reports: &[InequalityReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

/// CSV summary with columns `name, lhs, rhs, residual, verdict`; floats carry
/// 17 significant digits.
pub fn reports_to_csv(reports: &[InequalityReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "lhs", "rhs", "residual", "verdict"])
        .map_err(csv_err)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            fmt17(r.lhs),
            fmt17(r.rhs),
            fmt17(r.residual),
            r.verdict.as_str().into(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HbmError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> HbmError {
    HbmError::Io(std::io::Error::other(e.to_string()))
}

/// Scientific notation with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Cached operator data for one body `K`.
pub struct Lab {
    body: SupportField,
    pencil: OperatorPencil,
    lambda2: OnceLock<f64>,
    lambda1e: OnceLock<f64>,
}

impl Lab {
    pub fn new(body: &SupportField) -> Result<Self> {
        Ok(Lab {
            body: body.clone(),
            pencil: assemble(body)?,
            lambda2: OnceLock::new(),
            lambda1e: OnceLock::new(),
        })
    }

    pub fn body(&self) -> &SupportField {
        &self.body
    }

    pub fn domain(&self) -> &Arc<SphericalDomain> {
        self.body.domain()
    }

    pub fn pencil(&self) -> &OperatorPencil {
        &self.pencil
    }

    pub fn weights(&self) -> &OperatorWeights {
        &self.pencil.weights
    }

    pub fn volume(&self) -> f64 {
        self.weights().total_mass()
    }

    pub fn lambda2(&self) -> Result<f64> {
        if let Some(v) = self.lambda2.get() {
            return Ok(*v);
        }
        let v = lambda2_of(&self.pencil)?;
        Ok(*self.lambda2.get_or_init(|| v))
    }

    pub fn lambda1e(&self) -> Result<f64> {
        if let Some(v) = self.lambda1e.get() {
            return Ok(*v);
        }
        let v = lambda1e_of(&self.pencil)?;
        Ok(*self.lambda1e.get_or_init(|| v))
    }

    /// `int f (-L_K f) dV_K`.
    pub fn dirichlet(&self, f: &NodalField) -> f64 {
        self.weights().dirichlet(f, f)
    }

    /// `int f g dV_K`.
    pub fn inner(&self, f: &NodalField, g: &NodalField) -> f64 {
        self.weights().inner(&f.values, &g.values)
    }

    pub fn integral(&self, f: &NodalField) -> f64 {
        f.integrate_against(&self.weights().dv)
    }

    pub fn decompose(&self, f: &NodalField) -> Result<Decomposition> {
        decompose(&self.body, f)
    }

    /// `f - c_f`.
    pub fn mean_free(&self, f: &NodalField) -> Result<NodalField> {
        mean_free_with(self.weights(), f)
    }

    /// Nodal `L_K f`.
    pub fn apply(&self, f: &NodalField) -> Result<Vec<f64>> {
        self.pencil.apply(f)
    }

    /// `h_L / h_K` as a nodal jet.
    pub fn ratio<B: SupportFunction + ?Sized>(&self, l: &B) -> Result<NodalField> {
        l.jet().div(self.body.jet())
    }

    pub fn local_bm(&self, f: &NodalField) -> Result<InequalityReport> {
        require_mean_free(self.weights(), f)?;
        let lhs = self.dirichlet(f);
        let rhs = self.inner(f, f);
        Ok(InequalityReport::new("local_bm", lhs, rhs)
            .witness("K")
            .witness("f"))
    }

    pub fn spectral_gap_ineq(&self, f: &NodalField) -> Result<InequalityReport> {
        let lambda2 = self.lambda2()?;
        let ft = self.decompose(f)?.f_tilde;
        let lhs = self.dirichlet(&ft);
        let rhs = lambda2 * self.inner(&ft, &ft);
        Ok(InequalityReport::new("spectral_gap_ineq", lhs, rhs)
            .witness("K")
            .witness("f")
            .detail("lambda2", lambda2))
    }

    /// The reverse stability inequality: for any `f`,
    /// `(1/(lambda_2 - 1)) (int (L f + f)^2 dV - (int f dV)^2 / V)` dominates
    /// `int f (-L f) dV - int f^2 dV + (int f dV)^2 / V`.
    pub fn reverse_ineq(&self, f: &NodalField) -> Result<InequalityReport> {
        let lambda2 = self.lambda2()?;
        let vol = self.volume();
        let mean = self.integral(f);
        let lf = self.apply(f)?;
        let tilde: Vec<f64> = lf.iter().zip(&f.values).map(|(a, b)| a + b).collect();
        let tilde_sq = self.weights().inner(&tilde, &tilde);
        let lhs = (tilde_sq - mean * mean / vol) / (lambda2 - 1.0);
        let rhs = self.dirichlet(f) - self.inner(f, f) + mean * mean / vol;
        Ok(InequalityReport::new("reverse_ineq", lhs, rhs)
            .witness("K")
            .witness("f")
            .detail("lambda2", lambda2))
    }

    /// For mean-free `f` (projected internally):
    /// `int (L f + f)^2 dV >= (lambda_2 - 1) int f (-L f - f) dV`.
    pub fn reverse_spectral_ineq(&self, f: &NodalField) -> Result<InequalityReport> {
        let lambda2 = self.lambda2()?;
        let g = self.mean_free(f)?;
        let lg = self.apply(&g)?;
        let tilde: Vec<f64> = lg.iter().zip(&g.values).map(|(a, b)| a + b).collect();
        let lhs = self.weights().inner(&tilde, &tilde);
        let rhs = (lambda2 - 1.0) * (self.dirichlet(&g) - self.inner(&g, &g));
        Ok(InequalityReport::new("reverse_spectral_ineq", lhs, rhs)
            .witness("K")
            .witness("f")
            .detail("lambda2", lambda2))
    }

    pub fn stability_bm(&self, f: &NodalField) -> Result<InequalityReport> {
        let lambda2 = self.lambda2()?;
        let vol = self.volume();
        let mean = self.integral(f);
        let lhs = self.dirichlet(f) - self.inner(f, f) + mean * mean / vol;
        let dec = self.decompose(f)?;
        let dist_sq = self.inner(&dec.f_tilde, &dec.f_tilde);
        let rhs = (lambda2 - 1.0) * dist_sq;
        Ok(InequalityReport::new("stability_bm", lhs, rhs)
            .witness("K")
            .witness("f")
            .detail("lambda2", lambda2)
            .detail("c_f", dec.c_f)
            .detail("delta2_sq", dist_sq))
    }

    /// Extended homothetic transform data of `L` relative to `K`.
    pub fn homothetic(&self, l: &SupportField) -> Result<HomotheticData> {
        let f = self.ratio(l)?;
        let dec = self.decompose(&f)?;
        HomotheticData::new(&self.body, l, dec.c_f, &dec.v_f)
    }

    pub fn minkowski_second_stability(&self, l: &SupportField) -> Result<InequalityReport> {
        same_domain(self.domain(), l.domain())?;
        let k = &self.body;
        let n = k.n();
        let lambda2 = self.lambda2()?;
        let vol = self.volume();
        let v1 = mixed_volume(&tuple(&[(l, 1), (k, n - 1)]))?;
        let v2 = mixed_volume(&tuple(&[(l, 2), (k, n - 2)]))?;
        let lhs = v1 * v1 / vol - v2;
        let hd = self.homothetic(l)?;
        let s2 = measure(k, MeasureKind::LpSurface(2.0));
        let delta = crate::body::l2_distance(l.values(), hd.k_tilde.values(), &s2)?;
        let rhs = (lambda2 - 1.0) * delta * delta / n as f64;
        Ok(
            InequalityReport::new("minkowski_second_stability", lhs, rhs)
                .witness("K")
                .witness("L")
                .detail("lambda2", lambda2)
                .detail("V(K)", vol)
                .detail("V(K[n-1],L)", v1)
                .detail("V(K[n-2],L[2])", v2)
                .detail("c", hd.c)
                .detail("delta2_S2K", delta),
        )
    }

    pub fn symmetric_stability(&self, l: &SupportField) -> Result<InequalityReport> {
        same_domain(self.domain(), l.domain())?;
        require_symmetric(l)?;
        let k = &self.body;
        let n = k.n();
        let lambda1e = self.lambda1e()?;
        let vol = self.volume();
        let v1 = mixed_volume(&tuple(&[(l, 1), (k, n - 1)]))?;
        let v2 = mixed_volume(&tuple(&[(l, 2), (k, n - 2)]))?;
        let f = self.ratio(l)?;
        let r = self.inner(&f, &f) - v2;
        let lhs = v1 * v1 / vol - v2;
        let rhs = (1.0 - 1.0 / lambda1e) * r;
        Ok(InequalityReport::new("symmetric_stability", lhs, rhs)
            .witness("K")
            .witness("L")
            .detail("lambda1e", lambda1e)
            .detail("R_K(L)", r))
    }

    /// Stability of the Brunn-Minkowski-type inequality for mixed-volume
    /// ratios. Main sides are the product form
    /// `2m/(a1 a2) - b1/a1^2 - b2/a2^2 >= (1/n)(lambda_2 - 1)(delta/V)^2`
    /// with `a_i = V(L_i, K[n-1])`, `b_i = V(L_i[2], K[n-2])`,
    /// `m = V(L_1, L_2, K[n-2])` and `delta = delta_2^{S_2 K}(Lbar_1, Lbar_2)`.
    /// The details also carry the Minkowski-sum form (both sides multiplied by
    /// `a1 a2 / (a1 + a2)`) and the product form scaled by `a1^2`.
    pub fn ratio_bm_stability(
        &self,
        l1: &SupportField,
        l2: &SupportField,
    ) -> Result<InequalityReport> {
        same_domain(self.domain(), l1.domain())?;
        same_domain(self.domain(), l2.domain())?;
        let k = &self.body;
        let n = k.n();
        let lambda2 = self.lambda2()?;
        let vol = self.volume();
        let a1 = mixed_volume(&tuple(&[(l1, 1), (k, n - 1)]))?;
        let a2 = mixed_volume(&tuple(&[(l2, 1), (k, n - 1)]))?;
        let b1 = mixed_volume(&tuple(&[(l1, 2), (k, n - 2)]))?;
        let b2 = mixed_volume(&tuple(&[(l2, 2), (k, n - 2)]))?;
        let m = mixed_volume(&tuple(&[(l1, 1), (l2, 1), (k, n - 2)]))?;
        let lhs = 2.0 * m / (a1 * a2) - b1 / (a1 * a1) - b2 / (a2 * a2);

        let (c1, c2) = (a1 / vol, a2 / vol);
        let f1 = self.ratio(l1)?.scale(1.0 / c1);
        let f2 = self.ratio(l2)?.scale(1.0 / c2);
        let fhat = f1.sub(&f2)?;
        let mean_fhat = self.integral(&fhat);
        let hd1 = self.homothetic(l1)?;
        let hd2 = self.homothetic(l2)?;
        let s2 = measure(k, MeasureKind::LpSurface(2.0));
        let delta = crate::body::l2_distance(hd1.l_bar.values(), hd2.l_bar.values(), &s2)?;
        let rhs = (lambda2 - 1.0) * (delta / vol).powi(2) / n as f64;

        let sum_scale = a1 * a2 / (a1 + a2);
        let b12 = b1 + 2.0 * m + b2;
        let sum_lhs = b12 / (a1 + a2) - b1 / a1 - b2 / a2;
        Ok(InequalityReport::new("ratio_bm_stability", lhs, rhs)
            .witness("K")
            .witness("L1")
            .witness("L2")
            .detail("lambda2", lambda2)
            .detail("int_fhat_dV", mean_fhat)
            .detail("sum_form_lhs", sum_lhs)
            .detail("sum_form_rhs", rhs * sum_scale)
            .detail("scaled_lhs", lhs * a1 * a1)
            .detail("scaled_rhs", rhs * a1 * a1)
            .detail("delta2_S2K", delta))
    }

    /// Inequality for the inverse Gauss map `X_K` and its stability
    /// strengthening.
    pub fn xk_inequality(&self) -> Result<XkReport> {
        let k = &self.body;
        let dom = self.domain();
        let n = dom.n();
        let d = dom.dim_t();
        let vol = self.volume();
        let masses = self.weights().masses();
        let x = gauss_map_inverse(k);
        let mut x_int = vec![0.0; n];
        let mut x_sq = 0.0;
        let mut curv = 0.0;
        for q in 0..dom.node_count() {
            for i in 0..n {
                x_int[i] += masses[q] * x[q][i];
                x_sq += masses[q] * x[q][i] * x[q][i];
            }
            curv += masses[q] * k.values()[q] * tangent::trace(d, k.d2h(q)) / d as f64;
        }
        let x_int_sq: f64 = x_int.iter().map(|v| v * v).sum();
        let variance = x_sq - x_int_sq / vol;
        let basic = InequalityReport::new("xk_inequality", curv, variance).witness("K");

        let lambda2 = self.lambda2()?;
        let mut v = Vec::with_capacity(n);
        let mut lin_sq = vec![0.0; dom.node_count()];
        for l in 0..n {
            let fl: Vec<f64> = x.iter().map(|p| p[l]).collect();
            let field = NodalField::new(
                Arc::clone(dom),
                fl,
                crate::basis::TangentData::zeros(dom.node_count()),
            )?;
            let dec = decompose_with(k, self.weights(), &field)?;
            for (q, node) in dom.nodes().iter().enumerate() {
                let xv: f64 = (0..n).map(|i| node[i] * dec.v_f[i]).sum();
                lin_sq[q] += xv * xv / (k.values()[q] * k.values()[q]);
            }
            v.push(dec.v_f);
        }
        let lin_term: f64 = lin_sq.iter().zip(&masses).map(|(a, m)| a * m).sum();
        let stab_lhs = curv - variance;
        let stab_rhs = (lambda2 - 1.0) * (variance - lin_term);
        let stability = InequalityReport::new("xk_stability", stab_lhs, stab_rhs)
            .witness("K")
            .detail("lambda2", lambda2);
        Ok(XkReport {
            basic,
            stability,
            v,
        })
    }

    /// Planar anisotropic Heintze-Karcher versus Minkowski comparison.
    pub fn heintze_karcher_planar(&self, l: &SupportField) -> Result<InequalityReport> {
        let k = &self.body;
        if k.n() != 2 {
            return Err(HbmError::WrongDimension {
                expected: 2,
                got: k.n(),
            });
        }
        same_domain(self.domain(), l.domain())?;
        let dom = self.domain();
        let lambda2 = self.lambda2()?;
        let vol_k = self.volume();
        let vol_l = l.volume();
        let vkl = mixed_volume(&[k, l])?;
        let mut curv = 0.0;
        for q in 0..dom.node_count() {
            let rk = k.d2h(q)[0][0];
            let rl = l.d2h(q)[0][0];
            curv += dom.weights()[q] * 0.5 * k.values()[q] * rl * rl / rk;
        }
        let lhs = curv - vol_l;
        let rhs = lambda2 * (vkl * vkl / vol_k - vol_l);
        Ok(InequalityReport::new("heintze_karcher_planar", lhs, rhs)
            .witness("K")
            .witness("L")
            .detail("lambda2", lambda2))
    }
}

/// Both forms of the inverse-Gauss-map inequality and the vectors `v_l`.
#[derive(Clone, Debug, Serialize)]
pub struct XkReport {
    pub basic: InequalityReport,
    pub stability: InequalityReport,
    /// `v_l` solving the renormalized-linear projection of `<X_K, E_l>`.
    pub v: Vec<Vec<f64>>,
}

/// `c K + v` and `(L - v) / c`.
#[derive(Clone, Debug)]
pub struct HomotheticData {
    pub c: f64,
    pub v: Vec<f64>,
    pub k_tilde: TranslatedField,
    pub l_bar: TranslatedField,
}

impl HomotheticData {
    pub fn new(k: &SupportField, l: &SupportField, c: f64, v: &[f64]) -> Result<Self> {
        if !(c > 0.0) {
            return Err(HbmError::InvalidDefinition(format!(
                "homothety factor must be positive, got {c}"
            )));
        }
        let k_tilde = k.scaled(c)?.translated(v);
        let minus: Vec<f64> = v.iter().map(|x| -x).collect();
        let l_bar_field = l.translated(&minus);
        let l_bar = TranslatedField::new(k.domain(), l_bar_field.field().scaled(1.0 / c))?;
        Ok(HomotheticData {
            c,
            v: v.to_vec(),
            k_tilde,
            l_bar,
        })
    }
}

fn same_domain(a: &SphericalDomain, b: &SphericalDomain) -> Result<()> {
    if a.compatible(b) {
        Ok(())
    } else {
        Err(HbmError::DomainMismatch)
    }
}

fn tuple<'a>(parts: &[(&'a SupportField, usize)]) -> Vec<&'a dyn SupportFunction> {
    let mut out: Vec<&dyn SupportFunction> = Vec::new();
    for (b, count) in parts {
        for _ in 0..*count {
            out.push(*b);
        }
    }
    out
}

fn mean_free_with(w: &OperatorWeights, f: &NodalField) -> Result<NodalField> {
    let c = f.integrate_against(&w.dv) / w.total_mass();
    f.sub(&NodalField::constant(f.domain(), c))
}

fn require_mean_free(w: &OperatorWeights, f: &NodalField) -> Result<()> {
    let mean = f.integrate_against(&w.dv);
    let norm = (w.inner(&f.values, &f.values) * w.total_mass()).sqrt();
    if mean.abs() > 1e-9 * norm.max(f64::MIN_POSITIVE) {
        return Err(HbmError::MeanNotZero { mean });
    }
    Ok(())
}

/// `f - (int f dV_K) / V(K)`.
pub fn project_mean_free(k: &SupportField, f: &NodalField) -> Result<NodalField> {
    mean_free_with(&OperatorWeights::single(k)?, f)
}

pub fn local_bm(k: &SupportField, f: &NodalField) -> Result<InequalityReport> {
    Lab::new(k)?.local_bm(f)
}

/// Local Alexandrov-Fenchel inequality for the tuple `(lead, rest)`:
/// `int f (-L_C f) dV_C >= int f^2 dV_C` for `dV_C`-mean-free `f`.
pub fn local_af(
    lead: &SupportField,
    rest: &[&SupportField],
    f: &NodalField,
) -> Result<InequalityReport> {
    let w = OperatorWeights::new(lead, rest)?;
    require_mean_free(&w, f)?;
    let lhs = w.dirichlet(f, f);
    let rhs = w.inner(&f.values, &f.values);
    Ok(InequalityReport::new("local_af", lhs, rhs)
        .witness("C")
        .witness("f"))
}

/// `f - (int f dV_C) / V_C`.
pub fn project_mean_free_mixed(
    lead: &SupportField,
    rest: &[&SupportField],
    f: &NodalField,
) -> Result<NodalField> {
    mean_free_with(&OperatorWeights::new(lead, rest)?, f)
}

/// The ratio inequality `2m/(a1 a2) >= b1/a1^2 + b2/a2^2` for a general tuple,
/// with `a_i = V(L_i, K, C)`, `b_i = V(L_i, L_i, C)` and `m = V(L_1, L_2, C)`.
pub fn ratio_bm(
    k: &SupportField,
    rest: &[&SupportField],
    l1: &SupportField,
    l2: &SupportField,
) -> Result<InequalityReport> {
    let with = |x: &SupportField, y: &SupportField| -> Result<f64> {
        let mut list: Vec<&dyn SupportFunction> = vec![x, y];
        list.extend(rest.iter().map(|b| *b as &dyn SupportFunction));
        mixed_volume(&list)
    };
    let a1 = with(l1, k)?;
    let a2 = with(l2, k)?;
    let b1 = with(l1, l1)?;
    let b2 = with(l2, l2)?;
    let m = with(l1, l2)?;
    let vkk = with(k, k)?;
    let pencil = assemble_mixed(k, rest)?;
    let (c1, c2) = (a1 / vkk, a2 / vkk);
    let f1 = l1.jet().div(k.jet())?.scale(1.0 / c1);
    let f2 = l2.jet().div(k.jet())?.scale(1.0 / c2);
    let fhat = f1.sub(&f2)?;
    let mean = fhat.integrate_against(&pencil.weights.dv);
    Ok(InequalityReport::new(
        "ratio_bm",
        2.0 * m / (a1 * a2),
        b1 / (a1 * a1) + b2 / (a2 * a2),
    )
    .witness("K")
    .witness("C")
    .witness("L1")
    .witness("L2")
    .detail("int_fhat_dV_C", mean))
}

pub fn spectral_gap_ineq(k: &SupportField, f: &NodalField) -> Result<InequalityReport> {
    Lab::new(k)?.spectral_gap_ineq(f)
}

pub fn reverse_ineq(k: &SupportField, f: &NodalField) -> Result<InequalityReport> {
    Lab::new(k)?.reverse_ineq(f)
}

pub fn stability_bm(k: &SupportField, f: &NodalField) -> Result<InequalityReport> {
    Lab::new(k)?.stability_bm(f)
}

pub fn minkowski_second_stability(k: &SupportField, l: &SupportField) -> Result<InequalityReport> {
    Lab::new(k)?.minkowski_second_stability(l)
}

pub fn symmetric_stability(k: &SupportField, l: &SupportField) -> Result<InequalityReport> {
    require_symmetric(k)?;
    Lab::new(k)?.symmetric_stability(l)
}

pub fn ratio_bm_stability(
    k: &SupportField,
    l1: &SupportField,
    l2: &SupportField,
) -> Result<InequalityReport> {
    Lab::new(k)?.ratio_bm_stability(l1, l2)
}

pub fn xk_inequality(k: &SupportField) -> Result<XkReport> {
    Lab::new(k)?.xk_inequality()
}

pub fn heintze_karcher_planar(k: &SupportField, l: &SupportField) -> Result<InequalityReport> {
    if k.n() != 2 {
        return Err(HbmError::WrongDimension {
            expected: 2,
            got: k.n(),
        });
    }
    Lab::new(k)?.heintze_karcher_planar(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{harmonics::harmonic_index, make_domain, ScalarField};
    use crate::spectrum::RenormLinear;

    fn harmonic(dom: &Arc<SphericalDomain>, j: usize) -> NodalField {
        let mut c = vec![0.0; dom.basis_len()];
        c[j] = 1.0;
        NodalField::from_coeffs(dom, c).unwrap()
    }

    #[test]
    fn verdict_thresholds() {
        assert_eq!(InequalityReport::new("x", 2.0, 1.0).verdict, Verdict::Holds);
        assert_eq!(
            InequalityReport::new("x", 1.0, 1.0 + 1e-9).verdict,
            Verdict::Equality
        );
        assert_eq!(
            InequalityReport::new("x", 1.0, 1.0 + 1e-6).verdict,
            Verdict::Violated
        );
        assert_eq!(
            InequalityReport::new("x", f64::NAN, 0.0).verdict,
            Verdict::Violated
        );
    }

    #[test]
    fn local_bm_on_ball() {
        let dom = make_domain(3, 8).unwrap();
        let b = SupportField::ball(&dom, 1.0).unwrap();
        let y2 = harmonic(&dom, harmonic_index(2, 1));
        let r = local_bm(&b, &y2).unwrap();
        assert!((r.lhs / r.rhs - 3.0).abs() < 1e-10);
        let ell = RenormLinear::new(&b, &[1.0, 0.0, 0.5]);
        assert_eq!(
            local_bm(&b, &ell.values).unwrap().verdict,
            Verdict::Equality
        );
        let one = NodalField::constant(&dom, 1.0);
        assert!(matches!(
            local_bm(&b, &one),
            Err(HbmError::MeanNotZero { .. })
        ));
    }

    #[test]
    fn spectral_gap_ratio_on_ball() {
        let dom = make_domain(3, 8).unwrap();
        let b = SupportField::ball(&dom, 1.0).unwrap();
        let lab = Lab::new(&b).unwrap();
        let r2 = lab
            .spectral_gap_ineq(&harmonic(&dom, harmonic_index(2, -2)))
            .unwrap();
        assert_eq!(r2.verdict, Verdict::Equality);
        let r3 = lab
            .spectral_gap_ineq(&harmonic(&dom, harmonic_index(3, 1)))
            .unwrap();
        assert!((r3.lhs / r3.rhs - 2.0).abs() < 1e-10);
    }

    #[test]
    fn reverse_forms_vanish_on_constants() {
        let dom = make_domain(3, 8).unwrap();
        let k = SupportField::perturbed_ball(&dom, 1.0, 2, 2, 0.1).unwrap();
        let lab = Lab::new(&k).unwrap();
        let c = NodalField::constant(&dom, 2.5);
        let r = lab.reverse_ineq(&c).unwrap();
        assert!(r.lhs.abs() < 1e-10 && r.rhs.abs() < 1e-10);
    }

    #[test]
    fn homothets_give_equality() {
        let dom = make_domain(3, 10).unwrap();
        let k = SupportField::perturbed_ball(&dom, 1.0, 3, 1, 0.1).unwrap();
        let l = k.scaled(2.0).unwrap().translate(&[0.1, 0.0, -0.2]).unwrap();
        let lab = Lab::new(&k).unwrap();
        let r = lab.minkowski_second_stability(&l).unwrap();
        assert_eq!(r.verdict, Verdict::Equality, "{r:?}");
        assert!(r.rhs.abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_saturates_xk() {
        let dom = make_domain(3, 20).unwrap();
        let e = SupportField::ellipsoid(&dom, &[1.2, 1.0, 0.9]).unwrap();
        let x = xk_inequality(&e).unwrap();
        assert_eq!(x.basic.verdict, Verdict::Equality, "{:?}", x.basic);
    }

    #[test]
    fn heintze_karcher_for_ellipse() {
        let dom = make_domain(2, 48).unwrap();
        let b = SupportField::ball(&dom, 1.0).unwrap();
        let e = SupportField::from_fn(&dom, |x| (4.0 * x[0] * x[0] + x[1] * x[1]).sqrt()).unwrap();
        let r = heintze_karcher_planar(&b, &e).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        assert!(r.rhs > 0.0);
        assert!((r.details["lambda2"] - 4.0).abs() < 1e-10);
        let disk = SupportField::ball(&dom, 1.3).unwrap();
        assert_eq!(
            heintze_karcher_planar(&b, &disk).unwrap().verdict,
            Verdict::Equality
        );
    }

    #[test]
    fn csv_has_seventeen_digits() {
        let r = InequalityReport::new("local_bm", 1.0 / 3.0, 0.25);
        let csv = reports_to_csv(&[r]).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert!(line.starts_with("local_bm,3.3333333333333331e-1,2.5000000000000000e-1,"));
        assert!(line.ends_with(",holds"));
    }

    #[test]
    fn local_af_with_distinct_third_body() {
        let dom = make_domain(3, 10).unwrap();
        let k = SupportField::perturbed_ball(&dom, 1.0, 2, 0, 0.15).unwrap();
        let k3 = SupportField::ellipsoid(&dom, &[1.1, 0.95, 1.0]).unwrap();
        let f = NodalField::from_scalar(
            &dom,
            &ScalarField::project(&dom, |x| x[0] * x[2] + 0.3 * x[1]),
        );
        let f = project_mean_free_mixed(&k, &[&k3], &f).unwrap();
        assert!(local_af(&k, &[&k3], &f).unwrap().holds());
        let ell = RenormLinear::new(&k, &[0.2, 0.4, -0.1]);
        let r = local_af(&k, &[&k3], &ell.values).unwrap();
        assert_eq!(r.verdict, Verdict::Equality, "{r:?}");
    }
}
