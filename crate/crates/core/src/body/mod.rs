//! Convex bodies represented by their support functions.
//!
//! A body is stored as the basis expansion of `h_K` together with nodal jets
//! (`h`, `grad h`, `D^2 h`). Minkowski sums, dilations and translations act
//! linearly on `h`, so they are plain coefficient arithmetic. Volumes, mixed
//! volumes and the usual measures on `S^{n-1}` are quadrature sums of mixed
//! discriminants of restricted Hessians.

pub mod json;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::basis::{harmonics::harmonic_index, ScalarField, SphericalDomain, TangentData};
use crate::error::{HbmError, Result};
use crate::field::NodalField;
use crate::tangent::{self, TMat};

/// Relative tolerance used when validating positivity and convexity.
pub const VALIDITY_TOL: f64 = 1e-8;

/// Common read access to support-function data.
pub trait SupportFunction {
    fn domain(&self) -> &Arc<SphericalDomain>;
    /// Basis expansion of `h`.
    fn field(&self) -> &ScalarField;
    /// Nodal `h` with gradient and restricted Hessian.
    fn jet(&self) -> &NodalField;

    fn n(&self) -> usize {
        self.domain().n()
    }
    fn values(&self) -> &[f64] {
        &self.jet().values
    }
    fn tangent(&self) -> &TangentData {
        &self.jet().tangent
    }
    fn d2h(&self, q: usize) -> &TMat {
        &self.jet().tangent.hess_restricted[q]
    }
    /// `det D^2 h` at every node.
    fn det_d2h(&self) -> Vec<f64> {
        let d = self.domain().dim_t();
        self.jet()
            .tangent
            .hess_restricted
            .iter()
            .map(|m| tangent::det(d, m))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Parts {
    domain: Arc<SphericalDomain>,
    field: ScalarField,
    jet: NodalField,
    min_h: f64,
    min_eig: f64,
    max_eig: f64,
}

impl Parts {
    fn build(domain: &Arc<SphericalDomain>, field: ScalarField) -> Self {
        let jet = NodalField::from_scalar(domain, &field);
        let d = domain.dim_t();
        let min_h = jet.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let (mut min_eig, mut max_eig) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in &jet.tangent.hess_restricted {
            let e = tangent::sym_eigenvalues(d, m);
            min_eig = min_eig.min(e[0]);
            max_eig = max_eig.max(e[1]);
        }
        Parts {
            domain: Arc::clone(domain),
            field,
            jet,
            min_h,
            min_eig,
            max_eig,
        }
    }

    /// `(1/|S|) int h dmu`, the mean of `h` and of `tr D^2 h / (n-1)`.
    fn mean_h(&self) -> f64 {
        self.jet.integrate() / self.domain.surface_area()
    }

    fn check_convex(&self) -> Result<()> {
        let scale = self.mean_h().abs().max(f64::MIN_POSITIVE);
        if self.min_eig <= VALIDITY_TOL * scale {
            return Err(HbmError::NotConvex {
                min_eig: self.min_eig,
            });
        }
        Ok(())
    }
}

/// Support function of a smooth, strictly convex body containing the origin
/// in its interior.
#[derive(Clone, Debug)]
pub struct SupportField {
    parts: Parts,
}

/// Support function of a smooth, strictly convex body that need not contain
/// the origin (translates, extended homothetic transforms).
#[derive(Clone, Debug)]
pub struct TranslatedField {
    parts: Parts,
}

macro_rules! impl_support {
    ($t:ty) => {
        impl SupportFunction for $t {
            fn domain(&self) -> &Arc<SphericalDomain> {
                &self.parts.domain
            }
            fn field(&self) -> &ScalarField {
                &self.parts.field
            }
            fn jet(&self) -> &NodalField {
                &self.parts.jet
            }
        }

        impl $t {
            pub fn coeffs(&self) -> &[f64] {
                &self.parts.field.coeffs
            }
            pub fn min_h(&self) -> f64 {
                self.parts.min_h
            }
            /// Smallest nodal eigenvalue of `D^2 h` (smallest radius of curvature).
            pub fn min_eig_d2h(&self) -> f64 {
                self.parts.min_eig
            }
            /// Ratio of the largest to the smallest nodal eigenvalue of `D^2 h`.
            pub fn curvature_condition(&self) -> f64 {
                self.parts.max_eig / self.parts.min_eig
            }
            /// `V(K)`, total cone-volume mass.
            pub fn volume(&self) -> f64 {
                mixed_volume_uniform(self)
            }
        }
    };
}

impl_support!(SupportField);
impl_support!(TranslatedField);

impl SupportField {
    /// Validates `h > 0` and `D^2 h > 0` at every node against
    /// `VALIDITY_TOL * mean(h)`.
    pub fn new(domain: &Arc<SphericalDomain>, field: ScalarField) -> Result<Self> {
        if field.coeffs.len() != domain.basis_len()
            || field.node_values.len() != domain.node_count()
        {
            return Err(HbmError::LengthMismatch {
                expected: domain.basis_len(),
                got: field.coeffs.len(),
            });
        }
        let parts = Parts::build(domain, field);
        let scale = parts.mean_h().abs();
        if parts.min_h <= VALIDITY_TOL * scale || scale == 0.0 {
            return Err(HbmError::NotPositive { min_h: parts.min_h });
        }
        parts.check_convex()?;
        Ok(SupportField { parts })
    }

    pub fn from_coeffs(domain: &Arc<SphericalDomain>, coeffs: Vec<f64>) -> Result<Self> {
        let f = ScalarField::from_coeffs(domain, coeffs)?;
        SupportField::new(domain, f)
    }

    /// Projects a support function given pointwise on the unit sphere.
    pub fn from_fn<F: Fn(&[f64; 3]) -> f64>(domain: &Arc<SphericalDomain>, h: F) -> Result<Self> {
        SupportField::new(domain, ScalarField::project(domain, h))
    }

    pub fn ball(domain: &Arc<SphericalDomain>, radius: f64) -> Result<Self> {
        SupportField::new(domain, ScalarField::constant(domain, radius))
    }

    /// Origin-centred ellipsoid with the given semi-axes along the coordinate axes.
    pub fn ellipsoid(domain: &Arc<SphericalDomain>, semi_axes: &[f64]) -> Result<Self> {
        let n = domain.n();
        if semi_axes.len() != n {
            return Err(HbmError::LengthMismatch {
                expected: n,
                got: semi_axes.len(),
            });
        }
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(semi_axes));
        SupportField::ball_image(domain, &t)
    }

    /// `T B` for an invertible `n x n` matrix `T`: `h(x) = |T^T x|`.
    pub fn ball_image(domain: &Arc<SphericalDomain>, t: &DMatrix<f64>) -> Result<Self> {
        check_square(domain.n(), t)?;
        if t.determinant().abs() < 1e-300 {
            return Err(HbmError::SingularMap);
        }
        let tt = t.transpose();
        SupportField::from_fn(domain, |x| norm(&apply(&tt, x)))
    }

    /// `r + amplitude * Y`, with `Y` a Schmidt semi-normalized real harmonic of
    /// the given degree and order (`n = 3`), or `cos(k t)` / `sin(k t)` for
    /// order `>= 0` / `< 0` (`n = 2`).
    pub fn perturbed_ball(
        domain: &Arc<SphericalDomain>,
        radius: f64,
        degree: usize,
        order: i64,
        amplitude: f64,
    ) -> Result<Self> {
        let coeffs = perturbation_coeffs(domain, radius, degree, order, amplitude)?;
        SupportField::from_coeffs(domain, coeffs)
    }

    /// `a K + b L` (Minkowski combination).
    pub fn combine(&self, a: f64, other: &SupportField, b: f64) -> Result<SupportField> {
        self.check_same(other.domain())?;
        SupportField::new(
            self.domain(),
            self.parts.field.combine(a, &other.parts.field, b),
        )
    }

    pub fn scaled(&self, s: f64) -> Result<SupportField> {
        SupportField::new(self.domain(), self.parts.field.scaled(s))
    }

    /// Adds `<x, v>` to `h`; the origin may leave the body.
    pub fn translated(&self, v: &[f64]) -> TranslatedField {
        let lin = ScalarField::linear(self.domain(), v);
        let field = self.parts.field.combine(1.0, &lin, 1.0);
        TranslatedField {
            parts: Parts::build(self.domain(), field),
        }
    }

    /// Adds `<x, v>` and requires the origin to stay interior.
    pub fn translate(&self, v: &[f64]) -> Result<SupportField> {
        self.translated(v).into_support()
    }

    pub fn into_translated(self) -> TranslatedField {
        TranslatedField { parts: self.parts }
    }

    fn check_same(&self, other: &Arc<SphericalDomain>) -> Result<()> {
        if self.domain().compatible(other) {
            Ok(())
        } else {
            Err(HbmError::DomainMismatch)
        }
    }
}

impl TranslatedField {
    /// Validates only strict convexity.
    pub fn new(domain: &Arc<SphericalDomain>, field: ScalarField) -> Result<Self> {
        if field.coeffs.len() != domain.basis_len() {
            return Err(HbmError::LengthMismatch {
                expected: domain.basis_len(),
                got: field.coeffs.len(),
            });
        }
        let parts = Parts::build(domain, field);
        parts.check_convex()?;
        Ok(TranslatedField { parts })
    }

    pub fn into_support(self) -> Result<SupportField> {
        SupportField::new(&self.parts.domain, self.parts.field)
    }
}

fn check_square(n: usize, t: &DMatrix<f64>) -> Result<()> {
    if t.nrows() != n || t.ncols() != n {
        return Err(HbmError::LengthMismatch {
            expected: n,
            got: t.nrows(),
        });
    }
    Ok(())
}

fn apply(t: &DMatrix<f64>, x: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..t.nrows() {
        out[i] = (0..t.ncols()).map(|j| t[(i, j)] * x[j]).sum();
    }
    out
}

fn norm(x: &[f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Coefficients of `r + amplitude * Y` (see [`SupportField::perturbed_ball`]).
pub fn perturbation_coeffs(
    domain: &SphericalDomain,
    radius: f64,
    degree: usize,
    order: i64,
    amplitude: f64,
) -> Result<Vec<f64>> {
    if degree > domain.lmax() {
        return Err(HbmError::InvalidDefinition(format!(
            "degree {degree} exceeds basis cutoff {}",
            domain.lmax()
        )));
    }
    let mut c = vec![0.0; domain.basis_len()];
    c[0] = radius * domain.surface_area().sqrt();
    match domain.n() {
        2 => {
            if degree == 0 {
                c[0] += amplitude * domain.surface_area().sqrt();
            } else {
                let idx = if order >= 0 {
                    2 * degree - 1
                } else {
                    2 * degree
                };
                c[idx] += amplitude * PI.sqrt();
            }
        }
        _ => {
            if order.unsigned_abs() as usize > degree {
                return Err(HbmError::InvalidDefinition(format!(
                    "order {order} exceeds degree {degree}"
                )));
            }
            let schmidt = (4.0 * PI / (2.0 * degree as f64 + 1.0)).sqrt();
            c[harmonic_index(degree, order)] += amplitude * schmidt;
        }
    }
    Ok(c)
}

/// Boundary point `X_K(x) = h(x) x + grad h(x)` for every node (ambient
/// coordinates; the third entry is zero when `n = 2`).
pub fn gauss_map_inverse<B: SupportFunction + ?Sized>(k: &B) -> Vec<[f64; 3]> {
    let dom = k.domain();
    let jet = k.jet();
    dom.nodes()
        .iter()
        .enumerate()
        .map(|(q, x)| {
            let g = dom.to_ambient(q, &jet.tangent.grad[q]);
            let h = jet.values[q];
            [h * x[0] + g[0], h * x[1] + g[1], h * x[2] + g[2]]
        })
        .collect()
}

/// Which measure a [`DensityField`] represents.
#[derive(Clone, Debug, PartialEq)]
pub enum MeasureKind {
    /// `dV_K = (1/n) h det(D^2 h) dmu`.
    ConeVolume,
    /// `dS_p K = h^{1-p} det(D^2 h) dmu`.
    LpSurface(f64),
    /// `dV_C = (1/n) h_{K_1} Q(D^2 h_{K_1}, ..., D^2 h_{K_{n-1}}) dmu`.
    MixedCone,
    /// Spherical Lebesgue measure `mu`.
    Lebesgue,
    /// `dmu_K = det(D^2 h) / (n h) dmu`.
    Hilbert,
}

/// Nodal density of a measure on `S^{n-1}` relative to `mu`.
#[derive(Clone, Debug)]
pub struct DensityField {
    domain: Arc<SphericalDomain>,
    pub values: Vec<f64>,
    pub kind: MeasureKind,
}

impl DensityField {
    pub fn new(domain: &Arc<SphericalDomain>, values: Vec<f64>, kind: MeasureKind) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(HbmError::LengthMismatch {
                expected: domain.node_count(),
                got: values.len(),
            });
        }
        Ok(DensityField {
            domain: Arc::clone(domain),
            values,
            kind,
        })
    }

    pub fn domain(&self) -> &Arc<SphericalDomain> {
        &self.domain
    }

    pub fn total(&self) -> f64 {
        self.domain.integrate_unchecked(&self.values)
    }

    /// `int g dm` for nodal `g`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        self.domain
            .weights()
            .iter()
            .zip(&self.values)
            .zip(g)
            .map(|((w, m), v)| w * m * v)
            .sum()
    }

    /// Quadrature weights of the measure, `w_q * density_q`.
    pub fn node_masses(&self) -> Vec<f64> {
        self.domain
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, m)| w * m)
            .collect()
    }
}

/// Density of the requested measure of `K`. For [`MeasureKind::MixedCone`]
/// this is the single-body case `C = (K, ..., K)`, i.e. the cone-volume measure;
/// see [`mixed_cone_measure`] for genuine tuples.
pub fn measure<B: SupportFunction + ?Sized>(k: &B, kind: MeasureKind) -> DensityField {
    let n = k.n() as f64;
    let h = k.values();
    let det = k.det_d2h();
    let values: Vec<f64> = match kind {
        MeasureKind::ConeVolume | MeasureKind::MixedCone => {
            h.iter().zip(&det).map(|(h, d)| h * d / n).collect()
        }
        MeasureKind::LpSurface(p) => h
            .iter()
            .zip(&det)
            .map(|(h, d)| h.powf(1.0 - p) * d)
            .collect(),
        MeasureKind::Lebesgue => vec![1.0; h.len()],
        MeasureKind::Hilbert => h.iter().zip(&det).map(|(h, d)| d / (n * h)).collect(),
    };
    DensityField {
        domain: Arc::clone(k.domain()),
        values,
        kind,
    }
}

/// Per-node `Q^{ij}(D^2 h_{C_1}, ..., D^2 h_{C_{n-2}})` for a tuple of `n - 2`
/// bodies (empty for `n = 2`).
pub fn mixed_discriminant_partial(
    domain: &SphericalDomain,
    rest: &[&dyn SupportFunction],
) -> Result<Vec<TMat>> {
    let d = domain.dim_t();
    if rest.len() + 1 != d {
        return Err(HbmError::TupleLength {
            expected: d - 1,
            got: rest.len(),
        });
    }
    for b in rest {
        if !b.domain().compatible(domain) {
            return Err(HbmError::DomainMismatch);
        }
    }
    Ok((0..domain.node_count())
        .map(|q| {
            let mats: Vec<&TMat> = rest.iter().map(|b| b.d2h(q)).collect();
            tangent::mixed_partial(d, &mats)
        })
        .collect())
}

/// Per-node `Q(D^2 h_{K_1}, ..., D^2 h_{K_{n-1}})` for `n - 1` bodies.
pub fn mixed_discriminant_field(
    domain: &SphericalDomain,
    bodies: &[&dyn SupportFunction],
) -> Result<Vec<f64>> {
    let d = domain.dim_t();
    if bodies.len() != d {
        return Err(HbmError::TupleLength {
            expected: d,
            got: bodies.len(),
        });
    }
    for b in bodies {
        if !b.domain().compatible(domain) {
            return Err(HbmError::DomainMismatch);
        }
    }
    Ok((0..domain.node_count())
        .map(|q| {
            let mats: Vec<&TMat> = bodies.iter().map(|b| b.d2h(q)).collect();
            tangent::mixed_discriminant(d, &mats)
        })
        .collect())
}

/// Mixed cone-volume measure `dV_C = (1/n) h_lead Q(D^2 h_lead, D^2 h_rest...) dmu`
/// with `rest` of length `n - 2`.
pub fn mixed_cone_measure(
    lead: &dyn SupportFunction,
    rest: &[&dyn SupportFunction],
) -> Result<DensityField> {
    let mut all: Vec<&dyn SupportFunction> = vec![lead];
    all.extend_from_slice(rest);
    let q = mixed_discriminant_field(lead.domain(), &all)?;
    let n = lead.n() as f64;
    let values = lead
        .values()
        .iter()
        .zip(&q)
        .map(|(h, q)| h * q / n)
        .collect();
    Ok(DensityField {
        domain: Arc::clone(lead.domain()),
        values,
        kind: MeasureKind::MixedCone,
    })
}

/// `V(K_1, ..., K_n) = (1/n) int h_1 Q(D^2 h_2, ..., D^2 h_n) dmu`.
pub fn mixed_volume(bodies: &[&dyn SupportFunction]) -> Result<f64> {
    let first = bodies.first().ok_or(HbmError::TupleLength {
        expected: 2,
        got: 0,
    })?;
    let n = first.n();
    if bodies.len() != n {
        return Err(HbmError::TupleLength {
            expected: n,
            got: bodies.len(),
        });
    }
    let q = mixed_discriminant_field(first.domain(), &bodies[1..])?;
    let h = first.values();
    Ok(first
        .domain()
        .integrate_unchecked(&h.iter().zip(&q).map(|(h, q)| h * q).collect::<Vec<_>>())
        / n as f64)
}

fn mixed_volume_uniform<B: SupportFunction + ?Sized>(k: &B) -> f64 {
    measure(k, MeasureKind::ConeVolume).total()
}

/// `W_m(K) = V(K[n-m], B[m])`.
pub fn quermassintegral<B: SupportFunction>(k: &B, m: usize) -> Result<f64> {
    let n = k.n();
    if m > n {
        return Err(HbmError::InvalidDefinition(format!(
            "quermassintegral index {m} exceeds dimension {n}"
        )));
    }
    let ball = SupportField::ball(k.domain(), 1.0)?;
    let mut list: Vec<&dyn SupportFunction> = Vec::with_capacity(n);
    for _ in 0..(n - m) {
        list.push(k);
    }
    for _ in 0..m {
        list.push(&ball);
    }
    mixed_volume(&list)
}

/// Centroid `(n / ((n + 1) V(K))) int X_K dV_K`.
pub fn centroid<B: SupportFunction + ?Sized>(k: &B) -> Vec<f64> {
    let n = k.n();
    let dv = measure(k, MeasureKind::ConeVolume);
    let vol = dv.total();
    let x = gauss_map_inverse(k);
    let masses = dv.node_masses();
    let mut out = vec![0.0; n];
    for (xq, m) in x.iter().zip(&masses) {
        for i in 0..n {
            out[i] += m * xq[i];
        }
    }
    let s = n as f64 / ((n as f64 + 1.0) * vol);
    out.iter().map(|v| v * s).collect()
}

/// Steiner point `s(L) = (1 / V(B)) int h_L x dmu`.
pub fn steiner_point<B: SupportFunction + ?Sized>(l: &B) -> Vec<f64> {
    let dom = l.domain();
    let n = dom.n();
    let mut out = vec![0.0; n];
    for ((x, w), h) in dom.nodes().iter().zip(dom.weights()).zip(l.values()) {
        for i in 0..n {
            out[i] += w * h * x[i];
        }
    }
    let vb = dom.ball_volume();
    out.iter().map(|v| v / vb).collect()
}

/// Mean width `w(L) = (2 / (n V(B))) int h_L dmu`.
pub fn mean_width<B: SupportFunction + ?Sized>(l: &B) -> f64 {
    let dom = l.domain();
    2.0 * l.jet().integrate() / dom.surface_area()
}

/// A linear image with its projection error.
#[derive(Clone, Debug)]
pub struct LinearImage {
    pub body: SupportField,
    /// `L^2(mu)` norm of the part of `h_{TK}` not captured by the basis.
    pub truncation_residual: f64,
}

/// `h_{TK}(x) = |T^T x| h_K(T^T x / |T^T x|)`, re-projected onto the basis.
pub fn linear_transform(k: &SupportField, t: &DMatrix<f64>) -> Result<LinearImage> {
    let dom = k.domain();
    check_square(dom.n(), t)?;
    if t.determinant().abs() < 1e-300 {
        return Err(HbmError::SingularMap);
    }
    let tt = t.transpose();
    let coeffs = k.coeffs();
    let exact: Vec<f64> = dom
        .nodes()
        .iter()
        .map(|x| {
            let y = apply(&tt, x);
            norm(&y) * dom.evaluate(coeffs, &y)
        })
        .collect();
    let field = ScalarField::from_coeffs(dom, dom.analyze(&exact))?;
    let tail: Vec<f64> = exact
        .iter()
        .zip(&field.node_values)
        .map(|(e, s)| (e - s) * (e - s))
        .collect();
    let truncation_residual = dom.integrate_unchecked(&tail).max(0.0).sqrt();
    let body = SupportField::new(dom, field)?;
    Ok(LinearImage {
        body,
        truncation_residual,
    })
}

/// Second-moment matrix `Sigma = int x (x) x dS_2 K`.
pub fn s2_moment<B: SupportFunction + ?Sized>(k: &B) -> DMatrix<f64> {
    let dom = k.domain();
    let n = dom.n();
    let s2 = measure(k, MeasureKind::LpSurface(2.0));
    let masses = s2.node_masses();
    let mut sigma = DMatrix::zeros(n, n);
    for (x, m) in dom.nodes().iter().zip(&masses) {
        for i in 0..n {
            for j in 0..n {
                sigma[(i, j)] += m * x[i] * x[j];
            }
        }
    }
    sigma
}

/// `|| Sigma n / tr Sigma - I ||_F`.
pub fn isotropy_defect<B: SupportFunction + ?Sized>(k: &B) -> f64 {
    let sigma = s2_moment(k);
    let n = sigma.nrows();
    let scaled = &sigma * (n as f64 / sigma.trace());
    (scaled - DMatrix::<f64>::identity(n, n)).norm()
}

/// Result of [`s2_isotropize`].
#[derive(Clone, Debug)]
pub struct Isotropized {
    /// Accumulated map, `det T = 1`.
    pub transform: DMatrix<f64>,
    pub body: SupportField,
    pub iterations: usize,
    pub defect: f64,
    pub truncation_residual: f64,
}

pub const ISOTROPIZE_TOL: f64 = 1e-8;
pub const ISOTROPIZE_MAX_ITER: usize = 200;

/// Finds `T in SL(n)` with `S_2(TK)` isotropic.
///
/// For `K = A B` one has `Sigma(K) ~ A^{-2}`, so the update
/// `U = Sigma^{1/2} / det(Sigma^{1/2})^{1/n}` maps ellipsoids to balls in one
/// step; further steps only remove discretization error. Every iterate is
/// rebuilt from the original body with the accumulated map.
pub fn s2_isotropize(k: &SupportField, tol: f64, max_iter: usize) -> Result<Isotropized> {
    let n = k.n();
    let mut t = DMatrix::<f64>::identity(n, n);
    let mut body = k.clone();
    let mut truncation_residual = 0.0;
    for it in 0..=max_iter {
        let sigma = s2_moment(&body);
        let scaled = &sigma * (n as f64 / sigma.trace());
        let defect = (&scaled - DMatrix::<f64>::identity(n, n)).norm();
        if defect < tol {
            return Ok(Isotropized {
                transform: t,
                body,
                iterations: it,
                defect,
                truncation_residual,
            });
        }
        if it == max_iter {
            break;
        }
        let eig = SymmetricEigen::new(scaled);
        let floor = 1e-14 * eig.eigenvalues.max();
        let roots = eig.eigenvalues.map(|v| v.max(floor).sqrt());
        let det: f64 = roots.iter().product();
        let s = det.powf(-1.0 / n as f64);
        let u = &eig.eigenvectors
            * DMatrix::from_diagonal(&roots.map(|r| r * s))
            * eig.eigenvectors.transpose();
        t = u * t;
        let image = linear_transform(k, &t)?;
        truncation_residual = image.truncation_residual;
        body = image.body;
    }
    Err(HbmError::MaxIterExceeded(max_iter))
}

/// `delta_2^m(g_1, g_2) = (int (g_1 - g_2)^2 dm)^{1/2}` for nodal `g_1`, `g_2`.
pub fn l2_distance(g1: &[f64], g2: &[f64], m: &DensityField) -> Result<f64> {
    let len = m.values.len();
    for g in [g1, g2] {
        if g.len() != len {
            return Err(HbmError::LengthMismatch {
                expected: len,
                got: g.len(),
            });
        }
    }
    let sq: Vec<f64> = g1.iter().zip(g2).map(|(a, b)| (a - b) * (a - b)).collect();
    Ok(m.integrate(&sq).max(0.0).sqrt())
}
