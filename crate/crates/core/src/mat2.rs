//! Minimal 2x2 symmetric matrix helpers: Cholesky, inverse, eigendecomposition
//! and the PSD square root. Matrices are `[[a, b], [b, c]]` row-major.

pub type Mat2 = [[f64; 2]; 2];

pub fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn trace(a: &Mat2) -> f64 {
    a[0][0] + a[1][1]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Inverse of a 2x2 matrix; None when the determinant is not finite-nonzero.
pub fn inverse(a: &Mat2) -> Option<Mat2> {
    let d = det(a);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]])
}

/// Lower Cholesky factor L with A = L L^T; None when A is not positive
/// definite.
pub fn cholesky_lower(a: &Mat2) -> Option<Mat2> {
    if a[0][0] <= 0.0 {
        return None;
    }
    let l11 = a[0][0].sqrt();
    let l21 = a[1][0] / l11;
    let rest = a[1][1] - l21 * l21;
    if rest <= 0.0 {
        return None;
    }
    Some([[l11, 0.0], [l21, rest.sqrt()]])
}

/// Eigenvalues (descending) and orthonormal eigenvectors (columns) of a
/// symmetric 2x2 matrix.
pub fn sym_eigen(a: &Mat2) -> ([f64; 2], Mat2) {
    let half_tr = 0.5 * (a[0][0] + a[1][1]);
    let b = 0.5 * (a[0][1] + a[1][0]);
    let half_diff = 0.5 * (a[0][0] - a[1][1]);
    let disc = (half_diff * half_diff + b * b).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;

    let v1 = if b.abs() > 1e-300 {
        normalize([b, l1 - a[0][0]])
    } else if a[0][0] >= a[1][1] {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let v2 = [-v1[1], v1[0]];
    ([l1, l2], [[v1[0], v2[0]], [v1[1], v2[1]]])
}

fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n == 0.0 {
        [1.0, 0.0]
    } else {
        [v[0] / n, v[1] / n]
    }
}

/// Symmetric PSD square root via eigendecomposition; eigenvalues below zero
/// (numerical noise) clamp to zero.
pub fn sym_sqrt(a: &Mat2) -> Mat2 {
    let (lambda, q) = sym_eigen(a);
    let s = [lambda[0].max(0.0).sqrt(), lambda[1].max(0.0).sqrt()];
    let sq = [[s[0] * q[0][0], s[1] * q[0][1]], [s[0] * q[1][0], s[1] * q[1][1]]];
    matmul(&sq, &transpose(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_reconstructs() {
        let a = [[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky_lower(&a).unwrap();
        let back = matmul(&l, &transpose(&l));
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back[i][j], a[i][j], max_relative = 1e-14);
            }
        }
        assert_eq!(l[0][1], 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky_lower(&[[1.0, 2.0], [2.0, 1.0]]).is_none());
        assert!(cholesky_lower(&[[-1.0, 0.0], [0.0, 1.0]]).is_none());
    }

    #[test]
    fn inverse_recovers_identity() {
        let a = [[3.0, 1.0], [1.0, 2.0]];
        let inv = inverse(&a).unwrap();
        let prod = matmul(&a, &inv);
        assert_relative_eq!(prod[0][0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(prod[1][1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(prod[0][1], 0.0, epsilon = 1e-14);
        assert_relative_eq!(prod[1][0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_and_sqrt_agree() {
        let a = [[2.0, 0.5], [0.5, 1.0]];
        let (lambda, q) = sym_eigen(&a);
        assert!(lambda[0] >= lambda[1]);
        // A = Q diag(lambda) Q^T
        let lq = [[lambda[0] * q[0][0], lambda[1] * q[0][1]], [lambda[0] * q[1][0], lambda[1] * q[1][1]]];
        let back = matmul(&lq, &transpose(&q));
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back[i][j], a[i][j], epsilon = 1e-12);
            }
        }
        let r = sym_sqrt(&a);
        let rr = matmul(&r, &r);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(rr[i][j], a[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sqrt_of_diagonal_is_elementwise() {
        let r = sym_sqrt(&[[4.0, 0.0], [0.0, 9.0]]);
        assert_relative_eq!(r[0][0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(r[1][1], 3.0, epsilon = 1e-14);
        assert_eq!(r[0][1], 0.0);
        assert_eq!(r[1][0], 0.0);
    }
}
