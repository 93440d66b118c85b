//! Nodal fields carrying their tangential derivatives.
//!
//! A [`NodalField`] stores values, tangential gradients and restricted Hessians
//! `D^2 f` at the quadrature nodes. Products, quotients and compositions are
//! formed exactly at the nodes (Leibniz and chain rules), so functions outside
//! the finite basis, such as `<x, v> / h_K`, are represented without
//! truncation.

use std::sync::Arc;

use crate::basis::{differentiate, dot3, ScalarField, SphericalDomain, TangentData};
use crate::error::{HbmError, Result};
use crate::tangent::{self, TMat};

#[derive(Clone, Debug)]
pub struct NodalField {
    domain: Arc<SphericalDomain>,
    pub values: Vec<f64>,
    pub tangent: TangentData,
}

impl NodalField {
    pub fn new(
        domain: Arc<SphericalDomain>,
        values: Vec<f64>,
        tangent: TangentData,
    ) -> Result<Self> {
        let len = domain.node_count();
        if values.len() != len || tangent.grad.len() != len || tangent.hess_restricted.len() != len
        {
            return Err(HbmError::LengthMismatch {
                expected: len,
                got: values.len(),
            });
        }
        Ok(NodalField {
            domain,
            values,
            tangent,
        })
    }

    pub fn from_scalar(domain: &Arc<SphericalDomain>, f: &ScalarField) -> Self {
        let tangent = differentiate(domain, f);
        NodalField {
            domain: Arc::clone(domain),
            values: f.node_values.clone(),
            tangent,
        }
    }

    pub fn from_coeffs(domain: &Arc<SphericalDomain>, coeffs: Vec<f64>) -> Result<Self> {
        let f = ScalarField::from_coeffs(domain, coeffs)?;
        Ok(NodalField::from_scalar(domain, &f))
    }

    pub fn constant(domain: &Arc<SphericalDomain>, c: f64) -> Self {
        let len = domain.node_count();
        let d = domain.dim_t();
        let mut tangent = TangentData::zeros(len);
        for m in tangent.hess_restricted.iter_mut() {
            *m = tangent::scale(c, &tangent::identity(d));
        }
        NodalField {
            domain: Arc::clone(domain),
            values: vec![c; len],
            tangent,
        }
    }

    /// The linear function `<x, v>`: gradient is the tangential part of `v`,
    /// restricted Hessian vanishes identically.
    pub fn linear(domain: &Arc<SphericalDomain>, v: &[f64]) -> Self {
        let mut w = [0.0; 3];
        let k = v.len().min(3);
        w[..k].copy_from_slice(&v[..k]);
        let len = domain.node_count();
        let mut tangent = TangentData::zeros(len);
        let values = domain.nodes().iter().map(|x| dot3(x, &w)).collect();
        for q in 0..len {
            tangent.grad[q] = domain.to_frame(q, &w);
        }
        NodalField {
            domain: Arc::clone(domain),
            values,
            tangent,
        }
    }

    pub fn domain(&self) -> &Arc<SphericalDomain> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &NodalField) -> Result<()> {
        if self.domain.compatible(&other.domain) {
            Ok(())
        } else {
            Err(HbmError::DomainMismatch)
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &NodalField, b: f64) -> Result<NodalField> {
        self.check(other)?;
        let d = self.domain.dim_t();
        let mut out = self.clone();
        for q in 0..self.len() {
            out.values[q] = a * self.values[q] + b * other.values[q];
            for i in 0..d {
                out.tangent.grad[q][i] = a * self.tangent.grad[q][i] + b * other.tangent.grad[q][i];
            }
            out.tangent.hess_restricted[q] = tangent::add(
                &tangent::scale(a, &self.tangent.hess_restricted[q]),
                &tangent::scale(b, &other.tangent.hess_restricted[q]),
            );
        }
        Ok(out)
    }

    pub fn add(&self, other: &NodalField) -> Result<NodalField> {
        self.combine(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &NodalField) -> Result<NodalField> {
        self.combine(1.0, other, -1.0)
    }

    pub fn scale(&self, s: f64) -> NodalField {
        let mut out = self.clone();
        for q in 0..self.len() {
            out.values[q] *= s;
            out.tangent.grad[q][0] *= s;
            out.tangent.grad[q][1] *= s;
            out.tangent.hess_restricted[q] = tangent::scale(s, &self.tangent.hess_restricted[q]);
        }
        out
    }

    /// Pointwise product with exact derivatives:
    /// `D^2(fg) = f D^2 g + g D^2 f - f g I + grad f grad g^T + grad g grad f^T`.
    pub fn mul(&self, other: &NodalField) -> Result<NodalField> {
        self.check(other)?;
        let d = self.domain.dim_t();
        let id = tangent::identity(d);
        let mut out = self.clone();
        for q in 0..self.len() {
            let (f, g) = (self.values[q], other.values[q]);
            let (gf, gg) = (&self.tangent.grad[q], &other.tangent.grad[q]);
            out.values[q] = f * g;
            for i in 0..d {
                out.tangent.grad[q][i] = f * gg[i] + g * gf[i];
            }
            let mut m = tangent::scale(f, &other.tangent.hess_restricted[q]);
            m = tangent::add(&m, &tangent::scale(g, &self.tangent.hess_restricted[q]));
            m = tangent::add(&m, &tangent::scale(-f * g, &id));
            m = tangent::add(&m, &tangent::sym_outer(d, gf, gg));
            out.tangent.hess_restricted[q] = m;
        }
        Ok(out)
    }

    /// Composition `phi(f)` given `phi`, `phi'` and `phi''`.
    pub fn map<F, G, H>(&self, phi: F, dphi: G, d2phi: H) -> NodalField
    where
        F: Fn(f64) -> f64,
        G: Fn(f64) -> f64,
        H: Fn(f64) -> f64,
    {
        let d = self.domain.dim_t();
        let id = tangent::identity(d);
        let mut out = self.clone();
        for q in 0..self.len() {
            let f = self.values[q];
            let (p, p1, p2) = (phi(f), dphi(f), d2phi(f));
            let g = self.tangent.grad[q];
            out.values[q] = p;
            for i in 0..d {
                out.tangent.grad[q][i] = p1 * g[i];
            }
            // D^2 phi(f) = phi' (D^2 f - f I) + phi'' grad f grad f^T + phi I
            let cov = tangent::add(&self.tangent.hess_restricted[q], &tangent::scale(-f, &id));
            let mut m = tangent::scale(p1, &cov);
            m = tangent::add(
                &m,
                &tangent::scale(0.5 * p2, &tangent::sym_outer(d, &g, &g)),
            );
            m = tangent::add(&m, &tangent::scale(p, &id));
            out.tangent.hess_restricted[q] = m;
        }
        out
    }

    pub fn recip(&self) -> NodalField {
        self.map(|x| 1.0 / x, |x| -1.0 / (x * x), |x| 2.0 / (x * x * x))
    }

    pub fn div(&self, other: &NodalField) -> Result<NodalField> {
        self.mul(&other.recip())
    }

    /// Covariant Hessian `grad^2 f = D^2 f - f I` at node `q`.
    pub fn covariant_hess(&self, q: usize) -> TMat {
        let d = self.domain.dim_t();
        tangent::add(
            &self.tangent.hess_restricted[q],
            &tangent::scale(-self.values[q], &tangent::identity(d)),
        )
    }

    /// Laplace-Beltrami `Delta f = tr D^2 f - (n - 1) f` at every node.
    pub fn laplacian(&self) -> Vec<f64> {
        let d = self.domain.dim_t();
        (0..self.len())
            .map(|q| {
                tangent::trace(d, &self.tangent.hess_restricted[q]) - d as f64 * self.values[q]
            })
            .collect()
    }

    /// `|grad f|^2` at every node.
    pub fn grad_norm_sq(&self) -> Vec<f64> {
        let d = self.domain.dim_t();
        self.tangent
            .grad
            .iter()
            .map(|g| tangent::dot(d, g, g))
            .collect()
    }

    pub fn integrate(&self) -> f64 {
        self.domain.integrate_unchecked(&self.values)
    }

    /// `int f * density dmu`.
    pub fn integrate_against(&self, density: &[f64]) -> f64 {
        self.domain
            .weights()
            .iter()
            .zip(&self.values)
            .zip(density)
            .map(|((w, f), m)| w * f * m)
            .sum()
    }

    /// Quadrature projection onto the basis.
    pub fn to_scalar_field(&self) -> ScalarField {
        let coeffs = self.domain.analyze(&self.values);
        ScalarField::from_coeffs(&self.domain, coeffs).expect("basis-sized")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::make_domain;

    fn max_diff(a: &NodalField, b: &NodalField) -> f64 {
        let mut m: f64 = 0.0;
        for q in 0..a.len() {
            m = m.max((a.values[q] - b.values[q]).abs());
            for i in 0..2 {
                m = m.max((a.tangent.grad[q][i] - b.tangent.grad[q][i]).abs());
                for k in 0..2 {
                    m = m.max(
                        (a.tangent.hess_restricted[q][i][k] - b.tangent.hess_restricted[q][i][k])
                            .abs(),
                    );
                }
            }
        }
        m
    }

    #[test]
    fn product_of_band_limited_fields_matches_spectral_derivative() {
        for n in [2, 3] {
            let d = make_domain(n, 10).unwrap();
            let f =
                NodalField::from_scalar(&d, &ScalarField::project(&d, |x| 1.0 + 0.3 * x[0] * x[1]));
            let g = NodalField::from_scalar(
                &d,
                &ScalarField::project(&d, |x| 0.5 - x[1] + x[0] * x[0]),
            );
            let fg = f.mul(&g).unwrap();
            let direct = NodalField::from_scalar(
                &d,
                &ScalarField::project(&d, |x| {
                    (1.0 + 0.3 * x[0] * x[1]) * (0.5 - x[1] + x[0] * x[0])
                }),
            );
            assert!(max_diff(&fg, &direct) < 1e-11, "n={n}");
        }
    }

    #[test]
    fn linear_matches_projection() {
        let d = make_domain(3, 6).unwrap();
        let a = NodalField::linear(&d, &[0.2, 0.5, -1.0]);
        let b = NodalField::from_scalar(&d, &ScalarField::linear(&d, &[0.2, 0.5, -1.0]));
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn quotient_recovers_factor() {
        let d = make_domain(3, 8).unwrap();
        let h = NodalField::from_scalar(&d, &ScalarField::project(&d, |x| 1.2 + 0.1 * x[2] * x[0]));
        let z =
            NodalField::from_scalar(&d, &ScalarField::project(&d, |x| x[0] - 0.4 * x[1] * x[2]));
        let back = z.mul(&h).unwrap().div(&h).unwrap();
        assert!(max_diff(&back, &z) < 1e-12);
    }
}
