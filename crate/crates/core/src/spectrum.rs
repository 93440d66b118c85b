//! Galerkin discretization of the Hilbert-Brunn-Minkowski operator.
//!
//! For a lead body `K` and a tuple `C` of `n - 2` further bodies, the operator
//! `L z = Q(D^2(z h_K), D^2 h_C) / Q(D^2 h_K, D^2 h_C) - z` is self-adjoint on
//! `L^2(dV)` with `dV = (1/n) h_K Q(D^2 h_K, D^2 h_C) dmu`, and its Dirichlet
//! form is
//!
//! ```text
//! int z (-L z) dV = (1/n) int h_K^2 Q^{ab}(D^2 h_C) z_a z_b dmu.
//! ```
//!
//! With `C = (K, ..., K)` this is the single-body operator `L_K`, whose
//! Dirichlet weight reduces to `(1/(n-1)) h_K (D^2 h_K)^{-1} dV_K`.
//! The pencil `(A, M)` is the stiffness/mass pair of that form in the domain
//! basis.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::basis::SphericalDomain;
use crate::body::{
    mixed_discriminant_field, mixed_discriminant_partial, SupportField, SupportFunction,
};
use crate::error::{HbmError, Result};
use crate::field::NodalField;
use crate::tangent::{self, TMat};

/// Relative tolerance used to group eigenvalues into clusters.
pub const CLUSTER_TOL: f64 = 1e-5;

/// Odd-coefficient fraction below which a body counts as origin-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Per-node coefficients of the operator for a fixed `(lead, rest)` pair.
#[derive(Clone, Debug)]
pub struct OperatorWeights {
    domain: Arc<SphericalDomain>,
    /// `h_lead` at the nodes.
    pub h: Vec<f64>,
    /// Density of `dV` relative to `mu`.
    pub dv: Vec<f64>,
    /// `Q(D^2 h_lead, D^2 h_rest)`.
    pub denom: Vec<f64>,
    /// `Q^{ab}(D^2 h_rest)`.
    pub partial: Vec<TMat>,
}

impl OperatorWeights {
    pub fn new(lead: &SupportField, rest: &[&SupportField]) -> Result<Self> {
        let dom = lead.domain();
        let rest_dyn: Vec<&dyn SupportFunction> =
            rest.iter().map(|b| *b as &dyn SupportFunction).collect();
        let partial = mixed_discriminant_partial(dom, &rest_dyn)?;
        let mut all: Vec<&dyn SupportFunction> = vec![lead];
        all.extend(rest_dyn.iter().copied());
        let denom = mixed_discriminant_field(dom, &all)?;
        let h = lead.values().to_vec();
        let n = dom.n() as f64;
        let dv = h.iter().zip(&denom).map(|(h, q)| h * q / n).collect();
        Ok(OperatorWeights {
            domain: Arc::clone(dom),
            h,
            dv,
            denom,
            partial,
        })
    }

    /// Single-body weights, `C = (K, ..., K)`.
    pub fn single(k: &SupportField) -> Result<Self> {
        let rest: Vec<&SupportField> = vec![k; k.n() - 2];
        OperatorWeights::new(k, &rest)
    }

    pub fn domain(&self) -> &Arc<SphericalDomain> {
        &self.domain
    }

    /// Quadrature masses of `dV`.
    pub fn masses(&self) -> Vec<f64> {
        self.domain
            .weights()
            .iter()
            .zip(&self.dv)
            .map(|(w, d)| w * d)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Dirichlet weight `(1/n) h^2 Q^{ab}` at node `q` (density relative to `mu`).
    pub fn dirichlet_weight(&self, q: usize) -> TMat {
        let n = self.domain.n() as f64;
        tangent::scale(self.h[q] * self.h[q] / n, &self.partial[q])
    }

    /// `int f (-L g) dV` evaluated through the Dirichlet form.
    pub fn dirichlet(&self, f: &NodalField, g: &NodalField) -> f64 {
        let d = self.domain.dim_t();
        let w = self.domain.weights();
        (0..self.h.len())
            .map(|q| {
                w[q] * tangent::form(
                    d,
                    &self.dirichlet_weight(q),
                    &f.tangent.grad[q],
                    &g.tangent.grad[q],
                )
            })
            .sum()
    }

    /// `int f g dV`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let w = self.domain.weights();
        (0..self.h.len())
            .map(|q| w[q] * self.dv[q] * f[q] * g[q])
            .sum()
    }

    /// Nodal `L z = Q(D^2(z h), rest) / Q(D^2 h, rest) - z` by collocation.
    pub fn apply(&self, lead: &SupportField, z: &NodalField) -> Result<Vec<f64>> {
        let zh = z.mul(lead.jet())?;
        let d = self.domain.dim_t();
        Ok((0..self.h.len())
            .map(|q| {
                tangent::contract(d, &zh.tangent.hess_restricted[q], &self.partial[q])
                    / self.denom[q]
                    - z.values[q]
            })
            .collect())
    }
}

/// Stiffness/mass pair for `(-L, dV)`.
#[derive(Clone, Debug)]
pub struct OperatorPencil {
    pub a: DMatrix<f64>,
    pub m: DMatrix<f64>,
    /// `max |A_ij - A_ji|` before symmetrization.
    pub assembly_residual: f64,
    pub weights: OperatorWeights,
    lead: SupportField,
    rest: Vec<SupportField>,
}

impl OperatorPencil {
    pub fn lead(&self) -> &SupportField {
        &self.lead
    }

    pub fn rest(&self) -> &[SupportField] {
        &self.rest
    }

    pub fn domain(&self) -> &Arc<SphericalDomain> {
        self.weights.domain()
    }

    /// `int phi_i psi dV` for nodal `psi`.
    pub fn moments(&self, psi: &[f64]) -> DVector<f64> {
        let masses = self.weights.masses();
        let v = DVector::from_iterator(psi.len(), psi.iter().zip(&masses).map(|(p, m)| p * m));
        self.domain().basis_values().transpose() * v
    }

    /// Nodal `L z` for this pencil's bodies.
    pub fn apply(&self, z: &NodalField) -> Result<Vec<f64>> {
        self.weights.apply(&self.lead, z)
    }
}

/// Assembles `-L_K` for a single body.
pub fn assemble(k: &SupportField) -> Result<OperatorPencil> {
    let rest: Vec<&SupportField> = vec![k; k.n() - 2];
    assemble_mixed(k, &rest)
}

/// Assembles the multi-body operator with lead body `lead` and `n - 2` further
/// bodies `rest`.
pub fn assemble_mixed(lead: &SupportField, rest: &[&SupportField]) -> Result<OperatorPencil> {
    let weights = OperatorWeights::new(lead, rest)?;
    let dom = Arc::clone(weights.domain());
    let d = dom.dim_t();
    let nq = dom.node_count();
    let w = dom.weights();
    let phi = dom.basis_values();

    let mut a = DMatrix::zeros(dom.basis_len(), dom.basis_len());
    for ia in 0..d {
        for ib in 0..d {
            let s: Vec<f64> = (0..nq)
                .map(|q| w[q] * weights.dirichlet_weight(q)[ia][ib])
                .collect();
            let scaled = scale_rows(dom.basis_grad(ib), &s);
            a += dom.basis_grad(ia).transpose() * scaled;
        }
    }
    let masses = weights.masses();
    let m = phi.transpose() * scale_rows(phi, &masses);
    let assembly_residual = (&a - a.transpose()).amax();
    let a = (&a + a.transpose()) * 0.5;
    let m = (&m + m.transpose()) * 0.5;
    Ok(OperatorPencil {
        a,
        m,
        assembly_residual,
        weights,
        lead: lead.clone(),
        rest: rest.iter().map(|b| (*b).clone()).collect(),
    })
}

fn scale_rows(mat: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut out = mat.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= s[i];
    }
    out
}

/// Eigenvalues (ascending) and `M`-orthonormal eigenvectors of `A v = lambda M v`.
pub fn generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = Cholesky::new(m.clone()).ok_or(HbmError::NotPositiveDefinite("mass matrix"))?;
    let l = chol.l();
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| HbmError::Eigensolver("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| HbmError::Eigensolver("triangular solve failed".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0)
        .ok_or_else(|| HbmError::Eigensolver("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    let v = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| HbmError::Eigensolver("back substitution failed".into()))?;
    Ok((vals, v))
}

/// Lowest generalized eigenpairs with multiplicity clusters and residuals.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Coefficient vectors, one column per eigenvalue, `M`-orthonormal.
    pub eigvectors: DMatrix<f64>,
    /// Index ranges of clustered eigenvalues.
    pub multiplicity_groups: Vec<Vec<usize>>,
    /// `|A v - lambda M v| / |M v|`.
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    pub fn multiplicities(&self) -> Vec<usize> {
        self.multiplicity_groups.iter().map(Vec::len).collect()
    }

    /// Mean eigenvalue of each cluster.
    pub fn cluster_values(&self) -> Vec<f64> {
        self.multiplicity_groups
            .iter()
            .map(|g| g.iter().map(|&i| self.eigenvalues[i]).sum::<f64>() / g.len() as f64)
            .collect()
    }
}

/// Groups consecutive ascending values within `tol * max(1, |value|)`.
pub fn cluster(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (v - values[g[0]]).abs() <= tol * v.abs().max(1.0) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// The lowest `k` eigenpairs of the pencil.
pub fn spectrum(p: &OperatorPencil, k: usize) -> Result<SpectralResult> {
    spectrum_with(p, k, CLUSTER_TOL)
}

pub fn spectrum_with(p: &OperatorPencil, k: usize, cluster_tol: f64) -> Result<SpectralResult> {
    let (vals, vecs) = generalized_eigen(&p.a, &p.m)?;
    let k = k.min(vals.len());
    let eigenvalues = vals[..k].to_vec();
    let eigvectors = vecs.columns(0, k).into_owned();
    let residuals = (0..k)
        .map(|i| {
            let v = eigvectors.column(i);
            let mv = &p.m * v;
            (&p.a * v - &mv * eigenvalues[i]).norm() / mv.norm()
        })
        .collect();
    Ok(SpectralResult {
        multiplicity_groups: cluster(&eigenvalues, cluster_tol),
        eigenvalues,
        eigvectors,
        residuals,
    })
}

/// Smallest eigenvalue of the pencil on `{v : g^T v = 0}`.
pub fn constrained_min(a: &DMatrix<f64>, m: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<f64> {
    let z = null_space(g)?;
    let ar = z.transpose() * a * &z;
    let mr = z.transpose() * m * &z;
    let (vals, _) = generalized_eigen(&ar, &mr)?;
    vals.first()
        .copied()
        .ok_or_else(|| HbmError::Eigensolver("empty constrained space".into()))
}

/// Orthonormal basis of the orthogonal complement of the column span of `g`.
fn null_space(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let nrow = g.nrows();
    let gram = g.transpose() * g;
    let inv = Cholesky::new(gram)
        .ok_or(HbmError::NotPositiveDefinite("constraint Gram matrix"))?
        .inverse();
    let proj = DMatrix::<f64>::identity(nrow, nrow) - g * inv * g.transpose();
    let eig = SymmetricEigen::new((&proj + proj.transpose()) * 0.5);
    let keep: Vec<usize> = (0..nrow).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    Ok(DMatrix::from_fn(nrow, keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])]
    }))
}

/// `lambda_2(-L)`: the pencil minimized over functions `dV`-orthogonal to the
/// constants and to `ell_{E_l}` for every coordinate direction.
pub fn lambda2_of(p: &OperatorPencil) -> Result<f64> {
    let dom = p.domain();
    let n = dom.n();
    let mut g = DMatrix::zeros(dom.basis_len(), n + 1);
    g.set_column(0, &p.moments(&vec![1.0; dom.node_count()]));
    for l in 0..n {
        let mut e = vec![0.0; n];
        e[l] = 1.0;
        let ell = RenormLinear::new(p.lead(), &e);
        g.set_column(l + 1, &p.moments(&ell.values.values));
    }
    constrained_min(&p.a, &p.m, &g)
}

pub fn lambda2(k: &SupportField) -> Result<f64> {
    lambda2_of(&assemble(k)?)
}

/// Fails with [`HbmError::NotSymmetric`] unless `h` is even.
pub fn require_symmetric(k: &SupportField) -> Result<()> {
    let odd = k.field().odd_fraction(k.domain());
    if odd > SYMMETRY_TOL {
        return Err(HbmError::NotSymmetric { odd_mass: odd });
    }
    Ok(())
}

/// `lambda_{1,e}(-L_K)`: the pencil restricted to even basis functions and
/// deflated against constants.
pub fn lambda1e_of(p: &OperatorPencil) -> Result<f64> {
    require_symmetric(p.lead())?;
    for b in p.rest() {
        require_symmetric(b)?;
    }
    let dom = p.domain();
    let even: Vec<usize> = (0..dom.basis_len())
        .filter(|&j| dom.degree(j) % 2 == 0)
        .collect();
    let sub = |mat: &DMatrix<f64>| {
        DMatrix::from_fn(even.len(), even.len(), |r, c| mat[(even[r], even[c])])
    };
    let ones = p.moments(&vec![1.0; dom.node_count()]);
    let g = DMatrix::from_fn(even.len(), 1, |r, _| ones[even[r]]);
    constrained_min(&sub(&p.a), &sub(&p.m), &g)
}

pub fn lambda1e(k: &SupportField) -> Result<f64> {
    lambda1e_of(&assemble(k)?)
}

/// Nodal `L_K z` by the pointwise mixed-discriminant formula.
pub fn apply_operator(k: &SupportField, z: &NodalField) -> Result<Vec<f64>> {
    OperatorWeights::single(k)?.apply(k, z)
}

/// Renormalized linear function `ell_v^K = <x, v> / h_K`, exact at the nodes.
#[derive(Clone, Debug)]
pub struct RenormLinear {
    pub v: Vec<f64>,
    pub values: NodalField,
}

impl RenormLinear {
    pub fn new<B: SupportFunction + ?Sized>(k: &B, v: &[f64]) -> Self {
        let lin = NodalField::linear(k.domain(), v);
        let values = lin.div(k.jet()).expect("same domain");
        RenormLinear {
            v: v.to_vec(),
            values,
        }
    }
}

/// `f = c_f + ell_{v_f} + f_tilde` with `f_tilde` orthogonal to constants and
/// renormalized linear functions in `L^2(dV)`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub c_f: f64,
    pub v_f: Vec<f64>,
    pub f_tilde: NodalField,
}

/// Decomposition against the cone-volume measure of `K`.
pub fn decompose(k: &SupportField, f: &NodalField) -> Result<Decomposition> {
    decompose_with(k, &OperatorWeights::single(k)?, f)
}

/// Decomposition against the measure `dV` of `weights`, with `ell_v` taken
/// relative to the lead body `k`.
pub fn decompose_with(
    k: &SupportField,
    weights: &OperatorWeights,
    f: &NodalField,
) -> Result<Decomposition> {
    let dom = k.domain();
    let n = dom.n();
    let masses = weights.masses();
    let vol: f64 = masses.iter().sum();
    let c_f = f
        .values
        .iter()
        .zip(&masses)
        .map(|(f, m)| f * m)
        .sum::<f64>()
        / vol;
    let mut m2 = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (q, x) in dom.nodes().iter().enumerate() {
        let h = weights.h[q];
        for i in 0..n {
            b[i] += masses[q] * f.values[q] / h * x[i];
            for j in 0..n {
                m2[(i, j)] += masses[q] * x[i] * x[j] / (h * h);
            }
        }
    }
    let chol =
        Cholesky::new(m2).ok_or(HbmError::NotPositiveDefinite("second moment of dV / h^2"))?;
    let v = chol.solve(&b);
    let v_f: Vec<f64> = v.iter().copied().collect();
    let ell = RenormLinear::new(k, &v_f);
    let f_tilde = f
        .sub(&ell.values)?
        .combine(1.0, &NodalField::constant(dom, c_f), -1.0)?;
    Ok(Decomposition { c_f, v_f, f_tilde })
}

/// The pencil of the Hilbert form: with `z = g / h_K`,
/// `A_ij = int (phi_i/h)(-L (phi_j/h)) dV - int phi_i phi_j / h^2 dV` and
/// `M_ij = int phi_i phi_j dmu_K`, where `dmu_K = dV_K / h_K^2`. Its
/// eigenvalues are those of `-L_K - 1`.
pub fn assemble_hilbert(k: &SupportField) -> Result<OperatorPencil> {
    let base = assemble(k)?;
    let weights = base.weights.clone();
    let dom = Arc::clone(k.domain());
    let d = dom.dim_t();
    let nq = dom.node_count();
    let w = dom.weights();
    let phi = dom.basis_values();
    let h = &weights.h;
    let grad_h = &k.tangent().grad;
    let inv_h: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let grads: Vec<DMatrix<f64>> = (0..d)
        .map(|a| {
            let dh: Vec<f64> = (0..nq).map(|q| -grad_h[q][a] / (h[q] * h[q])).collect();
            scale_rows(dom.basis_grad(a), &inv_h) + scale_rows(phi, &dh)
        })
        .collect();
    let mut a = DMatrix::zeros(dom.basis_len(), dom.basis_len());
    for ia in 0..d {
        for ib in 0..d {
            let s: Vec<f64> = (0..nq)
                .map(|q| w[q] * weights.dirichlet_weight(q)[ia][ib])
                .collect();
            a += grads[ia].transpose() * scale_rows(&grads[ib], &s);
        }
    }
    let mu_k: Vec<f64> = (0..nq)
        .map(|q| w[q] * weights.dv[q] / (h[q] * h[q]))
        .collect();
    let m = phi.transpose() * scale_rows(phi, &mu_k);
    a -= &m;
    let assembly_residual = (&a - a.transpose()).amax();
    let a = (&a + a.transpose()) * 0.5;
    let m = (&m + m.transpose()) * 0.5;
    Ok(OperatorPencil {
        a,
        m,
        assembly_residual,
        weights,
        lead: k.clone(),
        rest: base.rest,
    })
}

/// Largest principal angle (radians) between the spans of two sets of nodal
/// functions in `L^2` with node masses `masses`.
pub fn subspace_angle(masses: &[f64], a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let orth = |x: &DMatrix<f64>| {
        let mut y = x.clone();
        for (i, mut row) in y.row_iter_mut().enumerate() {
            row *= masses[i].max(0.0).sqrt();
        }
        y.qr().q()
    };
    let qa = orth(a);
    let qb = orth(b);
    let s = (qa.transpose() * qb).singular_values();
    let smin = s
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .clamp(-1.0, 1.0);
    smin.acos()
}

/// Serializable spectral report.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub residuals: Vec<f64>,
    pub lambda2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1e: Option<f64>,
}

/// Lowest `k` eigenvalues, `lambda_2` and (for symmetric bodies) `lambda_{1,e}`.
pub fn spectral_report(body: &SupportField, k: usize) -> Result<SpectralReport> {
    let p = assemble(body)?;
    let s = spectrum(&p, k)?;
    let lambda2 = lambda2_of(&p)?;
    let lambda1e = match lambda1e_of(&p) {
        Ok(v) => Some(v),
        Err(HbmError::NotSymmetric { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SpectralReport {
        multiplicities: s.multiplicities(),
        eigenvalues: s.eigenvalues,
        residuals: s.residuals,
        lambda2,
        lambda1e,
    })
}
