//! Small dense algebra on tangent spaces of `S^{n-1}` and the mixed
//! discriminant `Q` of symmetric matrices.
//!
//! Tangent vectors and matrices are stored in fixed `2`-slot arrays. When the
//! tangent dimension `d = n - 1` is `1` only the `[0]` / `[0][0]` slots are
//! used and the remaining entries stay zero.

/// Tangent vector in a per-node orthonormal frame.
pub type TVec = [f64; 2];
/// Symmetric tangent matrix in a per-node orthonormal frame.
pub type TMat = [[f64; 2]; 2];

pub const ZERO_MAT: TMat = [[0.0; 2]; 2];

pub fn identity(d: usize) -> TMat {
    let mut m = ZERO_MAT;
    for (i, row) in m.iter_mut().enumerate().take(d) {
        row[i] = 1.0;
    }
    m
}

pub fn trace(d: usize, m: &TMat) -> f64 {
    (0..d).map(|i| m[i][i]).sum()
}

pub fn det(d: usize, m: &TMat) -> f64 {
    match d {
        1 => m[0][0],
        _ => m[0][0] * m[1][1] - m[0][1] * m[1][0],
    }
}

pub fn inverse(d: usize, m: &TMat) -> TMat {
    match d {
        1 => [[1.0 / m[0][0], 0.0], [0.0, 0.0]],
        _ => {
            let dt = det(2, m);
            [[m[1][1] / dt, -m[0][1] / dt], [-m[1][0] / dt, m[0][0] / dt]]
        }
    }
}

pub fn add(a: &TMat, b: &TMat) -> TMat {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn scale(s: f64, a: &TMat) -> TMat {
    [[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]]
}

/// `sum_ij a_ij b_ij`
pub fn contract(d: usize, a: &TMat, b: &TMat) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// Quadratic form `u^T m v`.
pub fn form(d: usize, m: &TMat, u: &TVec, v: &TVec) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += u[i] * m[i][j] * v[j];
        }
    }
    s
}

pub fn dot(d: usize, u: &TVec, v: &TVec) -> f64 {
    (0..d).map(|i| u[i] * v[i]).sum()
}

/// Symmetric outer product `u v^T + v u^T`.
pub fn sym_outer(d: usize, u: &TVec, v: &TVec) -> TMat {
    let mut m = ZERO_MAT;
    for i in 0..d {
        for j in 0..d {
            m[i][j] = u[i] * v[j] + v[i] * u[j];
        }
    }
    m
}

/// Eigenvalues of a symmetric tangent matrix, ascending.
pub fn sym_eigenvalues(d: usize, m: &TMat) -> [f64; 2] {
    match d {
        1 => [m[0][0], m[0][0]],
        _ => {
            let mean = 0.5 * (m[0][0] + m[1][1]);
            let half = 0.5 * (m[0][0] - m[1][1]);
            let off = 0.5 * (m[0][1] + m[1][0]);
            let rad = half.hypot(off);
            [mean - rad, mean + rad]
        }
    }
}

/// Mixed discriminant `Q(A^1, ..., A^d)` of `d` symmetric `d x d` matrices.
///
/// `d = 1`: `Q(A) = A_11`; `d = 2`: `Q(A, B) = (tr A tr B - tr AB) / 2`.
pub fn mixed_discriminant(d: usize, args: &[&TMat]) -> f64 {
    assert_eq!(args.len(), d, "mixed discriminant takes d arguments");
    match d {
        1 => args[0][0][0],
        _ => {
            let (a, b) = (args[0], args[1]);
            let tr_ab =
                a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1];
            0.5 * (trace(2, a) * trace(2, b) - tr_ab)
        }
    }
}

/// Partial mixed discriminant `Q^{ij}(A^2, ..., A^d)` taking `d - 1` matrices,
/// so that `Q(A^1, ..., A^d) = sum_ij A^1_ij Q^{ij}(A^2, ..., A^d)`.
pub fn mixed_partial(d: usize, args: &[&TMat]) -> TMat {
    assert_eq!(
        args.len() + 1,
        d,
        "partial mixed discriminant takes d - 1 arguments"
    );
    match d {
        1 => [[1.0, 0.0], [0.0, 0.0]],
        _ => {
            let a = args[0];
            let t = trace(2, a);
            [
                [0.5 * (t - a[0][0]), -0.5 * a[0][1]],
                [-0.5 * a[1][0], 0.5 * (t - a[1][1])],
            ]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_identity_case() {
        let id = identity(2);
        let q = mixed_partial(2, &[&id]);
        assert_eq!(q, [[0.5, 0.0], [0.0, 0.5]]);
        assert!((contract(2, &id, &q) - 1.0).abs() < 1e-15);
        assert!((mixed_discriminant(2, &[&id, &id]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_diag_case() {
        let a = [[2.0, 0.0], [0.0, 3.0]];
        let q = mixed_partial(2, &[&a]);
        assert_eq!(q, [[1.5, 0.0], [0.0, 1.0]]);
        assert!((contract(2, &a, &q) - 6.0).abs() < 1e-14);
        assert!((det(2, &a) - 6.0).abs() < 1e-14);
    }

    #[test]
    fn planar_partial_is_one() {
        let q = mixed_partial(1, &[]);
        assert_eq!(q[0][0], 1.0);
        let a = [[4.5, 0.0], [0.0, 0.0]];
        assert_eq!(mixed_discriminant(1, &[&a]), 4.5);
    }

    #[test]
    fn discriminant_is_symmetric_polarization_of_det() {
        let a = [[2.0, 0.3], [0.3, 1.0]];
        let b = [[0.5, -0.2], [-0.2, 3.0]];
        assert!(
            (mixed_discriminant(2, &[&a, &b]) - mixed_discriminant(2, &[&b, &a])).abs() < 1e-15
        );
        // det(A + B) = det A + 2 Q(A, B) + det B
        let s = add(&a, &b);
        let lhs = det(2, &s);
        let rhs = det(2, &a) + 2.0 * mixed_discriminant(2, &[&a, &b]) + det(2, &b);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn eigenvalues_and_inverse() {
        let a = [[2.0, 1.0], [1.0, 2.0]];
        let e = sym_eigenvalues(2, &a);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let inv = inverse(2, &a);
        assert!((inv[0][0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((inv[0][1] + 1.0 / 3.0).abs() < 1e-14);
    }
}
