//! Small dense linear algebra for chart-dimension matrices (n <= 6).

/// Cholesky factor L (row-major, lower triangular) of a symmetric positive
/// definite matrix, or `None` if the matrix is not SPD.
pub(crate) fn cholesky(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Determinant of an SPD matrix from its Cholesky factor.
pub(crate) fn det_from_cholesky(n: usize, l: &[f64]) -> f64 {
    let mut d = 1.0;
    for i in 0..n {
        let v = l[i * n + i];
        d *= v * v;
    }
    d
}

/// Inverse of an SPD matrix via its Cholesky factor.
pub(crate) fn spd_inverse(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let l = cholesky(n, a)?;
    // Solve L y = e_j, then L^T x = y, column by column.
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        for i in 0..n {
            let mut s = if i == j { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for ii in (0..n).rev() {
            let mut s = y[ii];
            for k in (ii + 1)..n {
                s -= l[k * n + ii] * inv[k * n + j];
            }
            inv[ii * n + j] = s / l[ii * n + ii];
        }
    }
    Some(inv)
}

/// Determinant of a general square matrix by LU with partial pivoting.
pub(crate) fn det(n: usize, a: &[f64]) -> f64 {
    let mut m = a.to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            sign = -sign;
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
        }
    }
    let mut d = sign;
    for i in 0..n {
        d *= m[i * n + i];
    }
    d
}

/// Least-squares solve of an overdetermined system with a small number of
/// unknowns (normal equations; fine for the 2-3 parameter fits used here).
pub(crate) fn lstsq(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = rows.len();
    if m == 0 {
        return None;
    }
    let p = rows[0].len();
    let mut ata = vec![0.0; p * p];
    let mut atb = vec![0.0; p];
    for (row, &b) in rows.iter().zip(rhs) {
        for i in 0..p {
            atb[i] += row[i] * b;
            for j in 0..p {
                ata[i * p + j] += row[i] * row[j];
            }
        }
    }
    solve_sym(p, &ata, &atb)
}

fn solve_sym(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    // Gaussian elimination with partial pivoting; the systems are tiny.
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == 0.0 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let d = m[col * n + col];
        for r in (col + 1)..n {
            let f = m[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for c in (i + 1)..n {
            s -= m[i * n + c] * x[c];
        }
        x[i] = s / m[i * n + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_inverse_roundtrip() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let inv = spd_inverse(3, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += a[i * 3 + k] * inv[k * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_matches_cholesky() {
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let l = cholesky(2, &a).unwrap();
        assert!((det_from_cholesky(2, &l) - det(2, &a)).abs() < 1e-12);
        assert!((det(2, &a) - 11.0).abs() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let a = vec![1.0, 2.0, 2.0, 1.0];
        assert!(cholesky(2, &a).is_none());
    }
}
