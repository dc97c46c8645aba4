//! Small dense linear algebra: 4×4 complex matrices and a 16×16 real inverse.
//!
//! Everything here is fixed-size and stack allocated; the matrices involved in
//! two-qubit tomography never grow beyond 16×16.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type Mat4 = [[C64; 4]; 4];
pub type Vec4 = [C64; 4];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn zeros() -> Mat4 {
    [[ZERO; 4]; 4]
}

pub fn identity() -> Mat4 {
    let mut m = zeros();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

pub fn matmul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = zeros();
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik == ZERO {
                continue;
            }
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

pub fn adjoint(a: &Mat4) -> Mat4 {
    let mut out = zeros();
    for i in 0..4 {
        for j in 0..4 {
            out[j][i] = a[i][j].conj();
        }
    }
    out
}

pub fn add(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn sub(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = *a;
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

pub fn scale(a: &Mat4, s: f64) -> Mat4 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

pub fn trace(a: &Mat4) -> C64 {
    (0..4).map(|i| a[i][i]).sum()
}

pub fn max_abs_diff(a: &Mat4, b: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// Largest |a[i][j] − conj(a[j][i])|.
pub fn hermitian_defect(a: &Mat4) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            m = m.max((a[i][j] - a[j][i].conj()).norm());
        }
    }
    m
}

/// (A + A†)/2
pub fn hermitian_part(a: &Mat4) -> Mat4 {
    let mut out = zeros();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (a[i][j] + a[j][i].conj()) * 0.5;
        }
    }
    out
}

pub fn outer(u: &Vec4, v: &Vec4) -> Mat4 {
    let mut out = zeros();
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = u[i] * v[j].conj();
        }
    }
    out
}

/// ⟨v|A|v⟩
pub fn expectation(a: &Mat4, v: &Vec4) -> C64 {
    let mut acc = ZERO;
    for i in 0..4 {
        let mut row = ZERO;
        for j in 0..4 {
            row += a[i][j] * v[j];
        }
        acc += v[i].conj() * row;
    }
    acc
}

pub fn kron2(a: &[[C64; 2]; 2], b: &[[C64; 2]; 2]) -> Mat4 {
    let mut out = zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C64; 2], b: &[C64; 2]) -> Vec4 {
    [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
}

/// Eigen-decomposition of a Hermitian 4×4 matrix by cyclic complex Jacobi
/// rotations. Only the Hermitian part of `a` is used.
///
/// Returns eigenvalues (unsorted) and a unitary whose columns are the
/// corresponding eigenvectors.
pub fn hermitian_eigen(a: &Mat4) -> ([f64; 4], Mat4) {
    let mut m = hermitian_part(a);
    let mut v = identity();
    let scale: f64 = m.iter().flatten().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if scale == 0.0 {
        return ([0.0; 4], v);
    }

    for _sweep in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = m[p][q];
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag; // e^{iφ}
                let app = m[p][p].re;
                let aqq = m[q][q].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // U restricted to (p, q): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = -phase.conj() * s;
                let uqq = phase.conj() * c;

                // M ← M U and V ← V U (column update)
                for row in 0..4 {
                    let (xp, xq) = (m[row][p], m[row][q]);
                    m[row][p] = xp * upp + xq * uqp;
                    m[row][q] = xp * upq + xq * uqq;
                    let (yp, yq) = (v[row][p], v[row][q]);
                    v[row][p] = yp * upp + yq * uqp;
                    v[row][q] = yp * upq + yq * uqq;
                }
                // M ← U† M (row update)
                for col in 0..4 {
                    let (xp, xq) = (m[p][col], m[q][col]);
                    m[p][col] = upp.conj() * xp + uqp.conj() * xq;
                    m[q][col] = upq.conj() * xp + uqq.conj() * xq;
                }
                m[p][q] = ZERO;
                m[q][p] = ZERO;
                m[p][p] = C64::new(m[p][p].re, 0.0);
                m[q][q] = C64::new(m[q][q].re, 0.0);
            }
        }
    }
    ([m[0][0].re, m[1][1].re, m[2][2].re, m[3][3].re], v)
}

pub type RealMat16 = [[f64; 16]; 16];

fn norm1(a: &RealMat16) -> f64 {
    (0..16)
        .map(|j| (0..16).map(|i| a[i][j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse of a 16×16 real matrix by Gauss–Jordan elimination with partial
/// pivoting. Fails when the 1-norm condition estimate exceeds `max_cond`.
pub fn invert16(a: &RealMat16, max_cond: f64) -> Result<RealMat16> {
    let n = 16;
    let mut work = *a;
    let mut inv = [[0.0; 16]; 16];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = norm1(a);
    if scale == 0.0 {
        return Err(Error::Singular(f64::INFINITY));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| work[x][col].abs().total_cmp(&work[y][col].abs()))
            .unwrap_or(col);
        if work[pivot][col].abs() <= f64::EPSILON * scale {
            return Err(Error::Singular(f64::INFINITY));
        }
        work.swap(col, pivot);
        inv.swap(col, pivot);
        let d = work[col][col];
        for j in 0..n {
            work[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[r][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                work[r][j] -= f * work[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    let cond = scale * norm1(&inv);
    if !cond.is_finite() || cond > max_cond {
        return Err(Error::Singular(cond));
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn jacobi_diagonalizes_complex_hermitian() {
        let a: Mat4 = [
            [c(2.0, 0.0), c(0.5, 0.3), c(0.0, -0.2), c(0.1, 0.1)],
            [c(0.5, -0.3), c(1.0, 0.0), c(0.4, 0.0), c(0.0, 0.7)],
            [c(0.0, 0.2), c(0.4, 0.0), c(-1.0, 0.0), c(0.3, -0.1)],
            [c(0.1, -0.1), c(0.0, -0.7), c(0.3, 0.1), c(0.5, 0.0)],
        ];
        let (vals, vecs) = hermitian_eigen(&a);
        let mut recon = zeros();
        for k in 0..4 {
            let col: Vec4 = [vecs[0][k], vecs[1][k], vecs[2][k], vecs[3][k]];
            recon = add(&recon, &scale(&outer(&col, &col), vals[k]));
        }
        assert!(max_abs_diff(&recon, &a) < 1e-13);
        let vv = matmul(&adjoint(&vecs), &vecs);
        assert!(max_abs_diff(&vv, &identity()) < 1e-13);
    }

    #[test]
    fn jacobi_handles_degenerate_and_zero() {
        let (vals, _) = hermitian_eigen(&scale(&identity(), 0.25));
        assert!(vals.iter().all(|v| (v - 0.25).abs() < 1e-15));
        let (vals, _) = hermitian_eigen(&zeros());
        assert_eq!(vals, [0.0; 4]);
    }

    #[test]
    fn invert16_rejects_rank_deficiency() {
        let mut a = [[0.0; 16]; 16];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = 1.0 + i as f64;
        }
        a[5] = a[4];
        assert!(matches!(invert16(&a, 1e12), Err(Error::Singular(_))));
    }

    #[test]
    fn invert16_round_trip() {
        let mut a = [[0.0; 16]; 16];
        for i in 0..16 {
            for j in 0..16 {
                a[i][j] = ((i * 7 + j * 3) % 11) as f64 / 11.0 + if i == j { 4.0 } else { 0.0 };
            }
        }
        let inv = invert16(&a, 1e12).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let v: f64 = (0..16).map(|k| a[i][k] * inv[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
