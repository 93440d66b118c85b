//! Real solid harmonics on `R^3` with exact first and second derivatives.
//!
//! The regular solid harmonic `R_lm(x) = |x|^l Y_lm(x / |x|)` is a homogeneous
//! harmonic polynomial of degree `l`. It is evaluated through the normalized
//! associated-Legendre recurrence written in homogeneous form, carrying a
//! second-order jet (value, gradient, Hessian) through every arithmetic step,
//! so the Cartesian derivatives come out exactly.

use std::f64::consts::PI;

/// Arithmetic needed by the harmonic recurrence; implemented for plain values
/// and for second-order jets.
pub trait HarmonicScalar: Copy {
    fn constant(v: f64) -> Self;
    fn coordinate(x: &[f64; 3], k: usize) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, s: f64) -> Self;
}

impl HarmonicScalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn coordinate(x: &[f64; 3], k: usize) -> Self {
        x[k]
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale(&self, s: f64) -> Self {
        self * s
    }
}

/// Value, gradient and Hessian of a scalar function on `R^3` at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Jet3 {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl HarmonicScalar for Jet3 {
    fn constant(v: f64) -> Self {
        Jet3 {
            v,
            ..Default::default()
        }
    }

    fn coordinate(x: &[f64; 3], k: usize) -> Self {
        let mut j = Jet3::constant(x[k]);
        j.g[k] = 1.0;
        j
    }

    fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.v *= s;
        for i in 0..3 {
            out.g[i] *= s;
            for k in 0..3 {
                out.h[i][k] *= s;
            }
        }
        out
    }

    fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        out.v += o.v;
        for i in 0..3 {
            out.g[i] += o.g[i];
            for k in 0..3 {
                out.h[i][k] += o.h[i][k];
            }
        }
        out
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-1.0))
    }

    fn mul(&self, o: &Self) -> Self {
        let mut out = Jet3::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for k in 0..3 {
                out.h[i][k] = self.v * o.h[i][k]
                    + o.v * self.h[i][k]
                    + self.g[i] * o.g[k]
                    + self.g[k] * o.g[i];
            }
        }
        out
    }
}

/// Number of real spherical harmonics of degree `<= lmax`.
pub fn harmonic_count(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

/// Position of `Y_lm` in the basis ordering (`l^2 + l + m`, `-l <= m <= l`).
pub fn harmonic_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Degree and order of the basis element at `index`.
pub fn degree_order(index: usize) -> (usize, i64) {
    let l = (index as f64).sqrt().floor() as usize;
    let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
    (l, index as i64 - (l * l + l) as i64)
}

/// All real orthonormal solid harmonics `R_lm`, `l <= lmax`, at `x`, evaluated
/// in the scalar type `S` (plain values or [`Jet3`]).
///
/// On the unit sphere the values are the real spherical harmonics, orthonormal
/// with respect to the surface measure: `Y_l0 = Pbar_l`, `Y_lm = sqrt2 Pbar_l^m cos(m phi)`
/// and `Y_l,-m = sqrt2 Pbar_l^m sin(m phi)` for `m > 0`.
pub fn solid_harmonics<S: HarmonicScalar>(lmax: usize, x: &[f64; 3]) -> Vec<S> {
    let cx = S::coordinate(x, 0);
    let cy = S::coordinate(x, 1);
    let cz = S::coordinate(x, 2);
    let r2 = cx.mul(&cx).add(&cy.mul(&cy)).add(&cz.mul(&cz));

    let mut out = vec![S::constant(0.0); harmonic_count(lmax)];
    // A_m + i B_m = (x + i y)^m
    let mut a_m = S::constant(1.0);
    let mut b_m = S::constant(0.0);
    // Normalized sectoral seed Pibar_m^m (a constant).
    let mut seed = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            seed *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            let na = a_m.mul(&cx).sub(&b_m.mul(&cy));
            let nb = b_m.mul(&cx).add(&a_m.mul(&cy));
            a_m = na;
            b_m = nb;
        }
        let mf = m as f64;
        let mut prev2 = S::constant(0.0);
        let mut prev1 = S::constant(seed);
        for l in m..=lmax {
            let pi_lm = if l == m {
                prev1
            } else if l == m + 1 {
                let p = cz.scale((2.0 * mf + 3.0).sqrt()).mul(&prev1);
                prev2 = prev1;
                prev1 = p;
                p
            } else {
                let lf = l as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0) * (lf - 1.0) - mf * mf)
                    / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                    .sqrt();
                let p = cz.mul(&prev1).sub(&r2.mul(&prev2).scale(b)).scale(a);
                prev2 = prev1;
                prev1 = p;
                p
            };
            let base = l * l + l;
            if m == 0 {
                out[base] = pi_lm;
            } else {
                let s = std::f64::consts::SQRT_2;
                out[base + m] = pi_lm.mul(&a_m).scale(s);
                out[base - m] = pi_lm.mul(&b_m).scale(s);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip() {
        for l in 0..10usize {
            for m in -(l as i64)..=(l as i64) {
                let i = harmonic_index(l, m);
                assert_eq!(degree_order(i), (l, m));
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let x = [0.3, -0.4, (1.0f64 - 0.25).sqrt()];
        let y: Vec<f64> = solid_harmonics(2, &x);
        let c0 = 1.0 / (4.0 * PI).sqrt();
        let c1 = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[0] - c0).abs() < 1e-15);
        assert!((y[harmonic_index(1, 0)] - c1 * x[2]).abs() < 1e-15);
        assert!((y[harmonic_index(1, 1)] - c1 * x[0]).abs() < 1e-15);
        assert!((y[harmonic_index(1, -1)] - c1 * x[1]).abs() < 1e-15);
        // Y_20 = sqrt(5/16pi) (3z^2 - r^2)
        let c20 = (5.0 / (16.0 * PI)).sqrt();
        assert!((y[harmonic_index(2, 0)] - c20 * (3.0 * x[2] * x[2] - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn solid_harmonics_are_harmonic_and_homogeneous() {
        let x = [0.7, -0.2, 0.45];
        let ys: Vec<Jet3> = solid_harmonics(7, &x);
        for (i, y) in ys.iter().enumerate() {
            let (l, _) = degree_order(i);
            let lap = y.h[0][0] + y.h[1][1] + y.h[2][2];
            assert!(lap.abs() < 1e-11, "index {i}: laplacian {lap}");
            // Euler: x . grad R = l R
            let euler: f64 = (0..3).map(|k| x[k] * y.g[k]).sum();
            assert!((euler - l as f64 * y.v).abs() < 1e-12);
        }
    }
}
