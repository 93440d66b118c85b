//! Orthonormal function bases, quadrature and exact tangential calculus on
//! `S^1` and `S^2`.
//!
//! On `S^1` the basis is the real Fourier system `{1, cos k t, sin k t}`; on
//! `S^2` it is the real spherical harmonics `Y_lm`. Every basis element is
//! tabulated at the quadrature nodes together with its tangential gradient and
//! its restricted Hessian `D^2 phi = grad^2 phi + phi I`, the latter obtained by
//! differentiating the 1-homogeneous extension `|x|^{1-l} R_lm(x)` in Cartesian
//! coordinates. Fields are then differentiated by plain matrix-vector products.

pub mod harmonics;
pub mod quadrature;

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{HbmError, Result};
use crate::tangent::{TMat, TVec, ZERO_MAT};
use harmonics::{degree_order, harmonic_count, solid_harmonics, Jet3};

/// Quadrature nodes, weights and tabulated basis on `S^{n-1}`.
#[derive(Debug)]
pub struct SphericalDomain {
    n: usize,
    lmax: usize,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
    frames: Vec<[[f64; 3]; 2]>,
    degrees: Vec<usize>,
    values: DMatrix<f64>,
    grads: Vec<DMatrix<f64>>,
    // D^2 components (0,0) [, (0,1), (1,1)]
    hess: Vec<DMatrix<f64>>,
}

/// Builds the domain for `S^{n-1}` with basis cutoff `lmax`.
///
/// `n = 2`: `8 (lmax + 1)` equispaced nodes with trapezoid weights.
/// `n = 3`: `2 lmax + 2` Gauss-Legendre nodes in `cos(theta)` times `4 lmax + 4`
/// equispaced azimuths, exact for polynomials of degree `4 lmax + 3`.
pub fn make_domain(n: usize, lmax: usize) -> Result<Arc<SphericalDomain>> {
    if lmax < 4 {
        return Err(HbmError::CutoffTooSmall(lmax));
    }
    match n {
        2 => Ok(Arc::new(SphericalDomain::circle(lmax))),
        3 => Ok(Arc::new(SphericalDomain::sphere(lmax))),
        _ => Err(HbmError::UnsupportedDimension(n)),
    }
}

impl SphericalDomain {
    fn circle(lmax: usize) -> Self {
        let count = 8 * (lmax + 1);
        let nb = 2 * lmax + 1;
        let step = 2.0 * PI / count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut frames = Vec::with_capacity(count);
        let mut values = DMatrix::zeros(count, nb);
        let mut grad = DMatrix::zeros(count, nb);
        let mut hess = DMatrix::zeros(count, nb);
        let c0 = 1.0 / (2.0 * PI).sqrt();
        let ck = 1.0 / PI.sqrt();
        for q in 0..count {
            let t = q as f64 * step;
            let (s, c) = t.sin_cos();
            nodes.push([c, s, 0.0]);
            frames.push([[-s, c, 0.0], [0.0; 3]]);
            values[(q, 0)] = c0;
            hess[(q, 0)] = c0;
            for k in 1..=lmax {
                let kf = k as f64;
                let (sk, ck_) = (kf * t).sin_cos();
                let d2 = 1.0 - kf * kf;
                values[(q, 2 * k - 1)] = ck * ck_;
                values[(q, 2 * k)] = ck * sk;
                grad[(q, 2 * k - 1)] = -ck * kf * sk;
                grad[(q, 2 * k)] = ck * kf * ck_;
                hess[(q, 2 * k - 1)] = ck * d2 * ck_;
                hess[(q, 2 * k)] = ck * d2 * sk;
            }
        }
        let degrees = (0..nb).map(|j| (j + 1) / 2).collect();
        SphericalDomain {
            n: 2,
            lmax,
            nodes,
            weights: vec![step; count],
            frames,
            degrees,
            values,
            grads: vec![grad],
            hess: vec![hess],
        }
    }

    fn sphere(lmax: usize) -> Self {
        let n_polar = 2 * lmax + 2;
        let n_azim = 4 * lmax + 4;
        let (ts, ws) = quadrature::gauss_legendre(n_polar);
        let count = n_polar * n_azim;
        let nb = harmonic_count(lmax);
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        let mut frames = Vec::with_capacity(count);
        let mut values = DMatrix::zeros(count, nb);
        let mut g0 = DMatrix::zeros(count, nb);
        let mut g1 = DMatrix::zeros(count, nb);
        let mut h00 = DMatrix::zeros(count, nb);
        let mut h01 = DMatrix::zeros(count, nb);
        let mut h11 = DMatrix::zeros(count, nb);
        let degrees: Vec<usize> = (0..nb).map(|j| degree_order(j).0).collect();
        let dphi = 2.0 * PI / n_azim as f64;
        let mut q = 0;
        for (t, wt) in ts.iter().zip(&ws) {
            let st = (1.0 - t * t).sqrt();
            for a in 0..n_azim {
                let phi = (a as f64 + 0.5) * dphi;
                let (sp, cp) = phi.sin_cos();
                let x = [st * cp, st * sp, *t];
                let e1 = [t * cp, t * sp, -st];
                let e2 = [-sp, cp, 0.0];
                let jets: Vec<Jet3> = solid_harmonics(lmax, &x);
                for (j, r) in jets.iter().enumerate() {
                    let shift = (1.0 - degrees[j] as f64) * r.v;
                    values[(q, j)] = r.v;
                    g0[(q, j)] = dot3(&e1, &r.g);
                    g1[(q, j)] = dot3(&e2, &r.g);
                    h00[(q, j)] = bilinear3(&r.h, &e1, &e1) + shift;
                    h01[(q, j)] = bilinear3(&r.h, &e1, &e2);
                    h11[(q, j)] = bilinear3(&r.h, &e2, &e2) + shift;
                }
                nodes.push(x);
                weights.push(wt * dphi);
                frames.push([e1, e2]);
                q += 1;
            }
        }
        SphericalDomain {
            n: 3,
            lmax,
            nodes,
            weights,
            frames,
            degrees,
            values,
            grads: vec![g0, g1],
            hess: vec![h00, h01, h11],
        }
    }

    /// Ambient dimension `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Tangent dimension `n - 1`.
    pub fn dim_t(&self) -> usize {
        self.n - 1
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn basis_len(&self) -> usize {
        self.degrees.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Orthonormal tangent frame `{e_1, ..., e_{n-1}}` at node `q`.
    pub fn frame(&self, q: usize) -> &[[f64; 3]; 2] {
        &self.frames[q]
    }

    /// Frequency (`n = 2`) or degree (`n = 3`) of basis element `j`.
    pub fn degree(&self, j: usize) -> usize {
        self.degrees[j]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Basis table: rows are nodes, columns basis elements.
    pub fn basis_values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Tangential derivative table along frame direction `a`.
    pub fn basis_grad(&self, a: usize) -> &DMatrix<f64> {
        &self.grads[a]
    }

    /// Table of `(D^2 phi)_{ab}`.
    pub fn basis_hess(&self, a: usize, b: usize) -> &DMatrix<f64> {
        match (self.n, a.min(b), a.max(b)) {
            (2, 0, 0) => &self.hess[0],
            (3, 0, 0) => &self.hess[0],
            (3, 0, 1) => &self.hess[1],
            (3, 1, 1) => &self.hess[2],
            _ => panic!("tangent index out of range"),
        }
    }

    /// Surface area of `S^{n-1}`.
    pub fn surface_area(&self) -> f64 {
        match self.n {
            2 => 2.0 * PI,
            _ => 4.0 * PI,
        }
    }

    /// Volume of the unit ball `B` in `R^n`.
    pub fn ball_volume(&self) -> f64 {
        self.surface_area() / self.n as f64
    }

    /// Same dimension, cutoff and quadrature.
    pub fn compatible(&self, other: &SphericalDomain) -> bool {
        self.n == other.n && self.lmax == other.lmax && self.nodes.len() == other.nodes.len()
    }

    /// `sum_q w_q v_q`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(HbmError::LengthMismatch {
                expected: self.nodes.len(),
                got: values.len(),
            });
        }
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Nodal synthesis `sum_j c_j phi_j(x_q)`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (&self.values * c).as_slice().to_vec()
    }

    /// Quadrature projection onto the basis, `c_j = sum_q w_q phi_j(x_q) v_q`.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        let wv = DVector::from_iterator(
            values.len(),
            self.weights.iter().zip(values).map(|(w, v)| w * v),
        );
        (self.values.transpose() * wv).as_slice().to_vec()
    }

    /// Basis values at an arbitrary direction (normalized internally).
    pub fn basis_at(&self, x: &[f64; 3]) -> Vec<f64> {
        let r = match self.n {
            2 => x[0].hypot(x[1]),
            _ => dot3(x, x).sqrt(),
        };
        match self.n {
            2 => {
                let t = x[1].atan2(x[0]);
                let mut out = vec![0.0; self.basis_len()];
                out[0] = 1.0 / (2.0 * PI).sqrt();
                for k in 1..=self.lmax {
                    let (s, c) = (k as f64 * t).sin_cos();
                    out[2 * k - 1] = c / PI.sqrt();
                    out[2 * k] = s / PI.sqrt();
                }
                out
            }
            _ => {
                let u = [x[0] / r, x[1] / r, x[2] / r];
                solid_harmonics::<f64>(self.lmax, &u)
            }
        }
    }

    /// Evaluates the expansion with coefficients `coeffs` at direction `x`.
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64; 3]) -> f64 {
        self.basis_at(x)
            .iter()
            .zip(coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }

    /// Tangent vector with frame components `v` at node `q`, as an ambient vector.
    pub fn to_ambient(&self, q: usize, v: &TVec) -> [f64; 3] {
        let f = &self.frames[q];
        let mut out = [0.0; 3];
        for a in 0..self.dim_t() {
            for k in 0..3 {
                out[k] += v[a] * f[a][k];
            }
        }
        out
    }

    /// Frame components of the tangential projection of ambient `v` at node `q`.
    pub fn to_frame(&self, q: usize, v: &[f64; 3]) -> TVec {
        let f = &self.frames[q];
        let mut out = [0.0; 2];
        for a in 0..self.dim_t() {
            out[a] = dot3(&f[a], v);
        }
        out
    }
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn bilinear3(h: &[[f64; 3]; 3], u: &[f64; 3], v: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            s += u[i] * h[i][k] * v[k];
        }
    }
    s
}

/// A function on the sphere given by basis coefficients, with cached nodal values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub coeffs: Vec<f64>,
    pub node_values: Vec<f64>,
}

impl ScalarField {
    pub fn from_coeffs(domain: &SphericalDomain, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != domain.basis_len() {
            return Err(HbmError::LengthMismatch {
                expected: domain.basis_len(),
                got: coeffs.len(),
            });
        }
        let node_values = domain.synthesize(&coeffs);
        Ok(ScalarField {
            coeffs,
            node_values,
        })
    }

    /// Quadrature projection of `f` onto the basis.
    pub fn project<F: Fn(&[f64; 3]) -> f64>(domain: &SphericalDomain, f: F) -> Self {
        let vals: Vec<f64> = domain.nodes().iter().map(&f).collect();
        let coeffs = domain.analyze(&vals);
        ScalarField::from_coeffs(domain, coeffs).expect("analysis returns basis-sized vector")
    }

    pub fn constant(domain: &SphericalDomain, c: f64) -> Self {
        let mut coeffs = vec![0.0; domain.basis_len()];
        coeffs[0] = c * domain.surface_area().sqrt();
        ScalarField {
            coeffs,
            node_values: vec![c; domain.node_count()],
        }
    }

    /// The linear function `<x, v>` restricted to the sphere.
    pub fn linear(domain: &SphericalDomain, v: &[f64]) -> Self {
        let mut w = [0.0; 3];
        w[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
        ScalarField::project(domain, |x| dot3(x, &w))
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &ScalarField, b: f64) -> ScalarField {
        ScalarField {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            node_values: self
                .node_values
                .iter()
                .zip(&other.node_values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField {
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
            node_values: self.node_values.iter().map(|c| s * c).collect(),
        }
    }

    /// `sqrt(sum of squared coefficients with odd degree / total)`.
    pub fn odd_fraction(&self, domain: &SphericalDomain) -> f64 {
        let total: f64 = self.coeffs.iter().map(|c| c * c).sum();
        let odd: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(j, _)| domain.degree(*j) % 2 == 1)
            .map(|(_, c)| c * c)
            .sum();
        if total == 0.0 {
            0.0
        } else {
            (odd / total).sqrt()
        }
    }
}

/// Per-node tangential gradient and restricted Hessian `D^2 f = grad^2 f + f I`,
/// both in the domain's per-node orthonormal frame.
#[derive(Clone, Debug)]
pub struct TangentData {
    pub grad: Vec<TVec>,
    pub hess_restricted: Vec<TMat>,
}

impl TangentData {
    pub fn zeros(len: usize) -> Self {
        TangentData {
            grad: vec![[0.0; 2]; len],
            hess_restricted: vec![ZERO_MAT; len],
        }
    }
}

/// Exact tangential gradient and restricted Hessian of `f` at every node.
pub fn differentiate(domain: &SphericalDomain, f: &ScalarField) -> TangentData {
    let c = DVector::from_column_slice(&f.coeffs);
    let d = domain.dim_t();
    let mut out = TangentData::zeros(domain.node_count());
    for a in 0..d {
        let g = domain.basis_grad(a) * &c;
        for (q, v) in g.iter().enumerate() {
            out.grad[q][a] = *v;
        }
        for b in a..d {
            let h = domain.basis_hess(a, b) * &c;
            for (q, v) in h.iter().enumerate() {
                out.hess_restricted[q][a][b] = *v;
                out.hess_restricted[q][b][a] = *v;
            }
        }
    }
    out
}

/// `sum_q w_q v_q`; errors on a length mismatch.
pub fn integrate(domain: &SphericalDomain, values: &[f64]) -> Result<f64> {
    domain.integrate(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tangent;

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(
            make_domain(4, 8),
            Err(HbmError::UnsupportedDimension(4))
        ));
        assert!(matches!(
            make_domain(3, 3),
            Err(HbmError::CutoffTooSmall(3))
        ));
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        let d2 = make_domain(2, 8).unwrap();
        let d3 = make_domain(3, 8).unwrap();
        let s2: f64 = d2.weights().iter().sum();
        let s3: f64 = d3.weights().iter().sum();
        assert!((s2 / (2.0 * PI) - 1.0).abs() < 1e-12);
        assert!((s3 / (4.0 * PI) - 1.0).abs() < 1e-12);
    }

    fn gram_defect(d: &SphericalDomain) -> f64 {
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(d.weights()));
        let g = d.basis_values().transpose() * w * d.basis_values();
        let id = DMatrix::<f64>::identity(d.basis_len(), d.basis_len());
        (g - id).amax()
    }

    #[test]
    fn gram_matrix_is_identity() {
        assert!(gram_defect(&make_domain(2, 8).unwrap()) < 1e-12);
        assert!(gram_defect(&make_domain(3, 8).unwrap()) < 1e-10);
    }

    #[test]
    fn integrate_examples() {
        let d = make_domain(3, 8).unwrap();
        let ones = vec![1.0; d.node_count()];
        assert!((integrate(&d, &ones).unwrap() - 4.0 * PI).abs() < 1e-12);
        let lin: Vec<f64> = d.nodes().iter().map(|x| 0.3 * x[0] - 0.7 * x[2]).collect();
        assert!(integrate(&d, &lin).unwrap().abs() < 1e-13);
        let sq: Vec<f64> = d.nodes().iter().map(|x| x[0] * x[0]).collect();
        assert!((integrate(&d, &sq).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(matches!(
            integrate(&d, &[1.0, 2.0]),
            Err(HbmError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn constant_has_identity_restricted_hessian() {
        let d = make_domain(3, 6).unwrap();
        let one = ScalarField::constant(&d, 1.0);
        let t = differentiate(&d, &one);
        for m in &t.hess_restricted {
            assert!(
                (m[0][0] - 1.0).abs() < 1e-12
                    && (m[1][1] - 1.0).abs() < 1e-12
                    && m[0][1].abs() < 1e-12
            );
        }
    }

    #[test]
    fn linear_functions_have_flat_restricted_hessian() {
        for n in [2, 3] {
            let d = make_domain(n, 6).unwrap();
            let f = ScalarField::linear(&d, &[0.4, -1.1, 0.8]);
            let t = differentiate(&d, &f);
            for m in &t.hess_restricted {
                assert!(m.iter().flatten().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn circle_cos2_restricted_hessian() {
        let d = make_domain(2, 8).unwrap();
        let f = ScalarField::project(&d, |x| 2.0 * x[0] * x[0] - 1.0); // cos 2t
        let t = differentiate(&d, &f);
        for (q, x) in d.nodes().iter().enumerate() {
            let th = x[1].atan2(x[0]);
            assert!((t.hess_restricted[q][0][0] + 3.0 * (2.0 * th).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_eigenrelation_on_sphere() {
        let d = make_domain(3, 8).unwrap();
        for j in 0..d.basis_len() {
            let l = d.degree(j) as f64;
            let mut c = vec![0.0; d.basis_len()];
            c[j] = 1.0;
            let f = ScalarField::from_coeffs(&d, c).unwrap();
            let t = differentiate(&d, &f);
            for q in 0..d.node_count() {
                let lap = tangent::trace(2, &t.hess_restricted[q]) - 2.0 * f.node_values[q];
                assert!((lap + l * (l + 1.0) * f.node_values[q]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn arbitrary_point_evaluation_matches_nodes() {
        let d = make_domain(3, 6).unwrap();
        let coeffs: Vec<f64> = (0..d.basis_len())
            .map(|j| ((j * 7 + 3) % 11) as f64 / 11.0 - 0.5)
            .collect();
        let f = ScalarField::from_coeffs(&d, coeffs.clone()).unwrap();
        for q in (0..d.node_count()).step_by(37) {
            let v = d.evaluate(&coeffs, &d.nodes()[q]);
            assert!((v - f.node_values[q]).abs() < 1e-12);
        }
    }
}
