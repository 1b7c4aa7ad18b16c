//! Small exterior-algebra engine: alternating forms at a point with
//! coefficients over increasing multi-indices, wedge products, an
//! orthonormal-frame Hodge star, basis changes, and a finite-difference
//! exterior derivative for form fields given in the coordinate coframe.

use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum FormError {
    #[error("forms live in different dimensions ({0} vs {1})")]
    DimMismatch(usize, usize),
    #[error("total degree {0} exceeds the dimension {1}")]
    DegreeOverflow(usize, usize),
    #[error("degree {0} out of range for dimension {1}")]
    BadDegree(usize, usize),
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num = 1usize;
    let mut den = 1usize;
    for i in 0..k {
        num *= n - i;
        den *= i + 1;
    }
    num / den
}

/// All increasing `p`-tuples over `0..n` in lexicographic order, cached.
pub(crate) fn increasing_tuples(n: usize, p: usize) -> &'static [Vec<usize>] {
    static CACHE: OnceLock<Vec<Vec<Vec<Vec<usize>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let max_n = 8;
        (0..=max_n)
            .map(|n| {
                (0..=n)
                    .map(|p| {
                        let mut out = Vec::new();
                        let mut cur = Vec::new();
                        gen_tuples(n, p, 0, &mut cur, &mut out);
                        out
                    })
                    .collect()
            })
            .collect()
    });
    &cache[n][p]
}

fn gen_tuples(n: usize, p: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == p {
        out.push(cur.clone());
        return;
    }
    let remaining = p - cur.len();
    for v in start..=(n - remaining) {
        cur.push(v);
        gen_tuples(n, p, v + 1, cur, out);
        cur.pop();
    }
}

/// Lexicographic rank of an increasing tuple among all increasing `p`-tuples
/// over `0..n`.
pub(crate) fn tuple_rank(n: usize, idx: &[usize]) -> usize {
    let p = idx.len();
    let mut rank = 0;
    let mut prev: isize = -1;
    for (slot, &v) in idx.iter().enumerate() {
        for u in (prev + 1) as usize..v {
            rank += binomial(n - u - 1, p - slot - 1);
        }
        prev = v as isize;
    }
    rank
}

/// Merge two disjoint sorted index sets, returning the combined sorted set
/// and the sign of the shuffle; `None` if they intersect.
pub(crate) fn merge_sign(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut sign = 1i32;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j] < a[i] {
            // moving b[j] past the remaining a-entries
            if (a.len() - i) % 2 == 1 {
                sign = -sign;
            }
            out.push(b[j]);
            j += 1;
        } else {
            return None; // common index
        }
    }
    Some((out, sign))
}

/// Degree-`p` alternating form at a point, coefficients over increasing
/// multi-indices of the active coframe.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl DifferentialForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self, FormError> {
        if degree > dim {
            return Err(FormError::BadDegree(degree, dim));
        }
        Ok(DifferentialForm {
            dim,
            degree,
            coeffs: vec![0.0; binomial(dim, degree)],
        })
    }

    /// The basis form `omega_{i1} ^ ... ^ omega_{ip}` for an increasing
    /// tuple.
    pub fn basis(dim: usize, idx: &[usize]) -> Result<Self, FormError> {
        let mut f = Self::zero(dim, idx.len())?;
        f.coeffs[tuple_rank(dim, idx)] = 1.0;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient of an increasing multi-index.
    pub fn coeff(&self, idx: &[usize]) -> f64 {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        self.coeffs[tuple_rank(self.dim, idx)]
    }

    pub fn set_coeff(&mut self, idx: &[usize], v: f64) {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        let r = tuple_rank(self.dim, idx);
        self.coeffs[r] = v;
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c *= s;
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.dim, other.dim);
        debug_assert_eq!(self.degree, other.degree);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Exterior product; errors when the total degree exceeds the dimension.
    pub fn wedge(&self, other: &Self) -> Result<Self, FormError> {
        if self.dim != other.dim {
            return Err(FormError::DimMismatch(self.dim, other.dim));
        }
        let total = self.degree + other.degree;
        if total > self.dim {
            return Err(FormError::DegreeOverflow(total, self.dim));
        }
        let mut out = Self::zero(self.dim, total)?;
        let tuples_a = increasing_tuples(self.dim, self.degree);
        let tuples_b = increasing_tuples(self.dim, other.degree);
        for (ra, ca) in self.coeffs.iter().enumerate() {
            if *ca == 0.0 {
                continue;
            }
            for (rb, cb) in other.coeffs.iter().enumerate() {
                if *cb == 0.0 {
                    continue;
                }
                if let Some((merged, sign)) = merge_sign(&tuples_a[ra], &tuples_b[rb]) {
                    out.coeffs[tuple_rank(self.dim, &merged)] += sign as f64 * ca * cb;
                }
            }
        }
        Ok(out)
    }

    /// Hodge star with respect to an orthonormal coframe whose ordered wedge
    /// is the positive volume form.
    pub fn hodge_star(&self) -> Self {
        let n = self.dim;
        let p = self.degree;
        let mut out = Self::zero(n, n - p).expect("complement degree is valid");
        let tuples = increasing_tuples(n, p);
        for (r, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let idx = &tuples[r];
            let comp: Vec<usize> = (0..n).filter(|v| !idx.contains(v)).collect();
            let (_, sign) = merge_sign(idx, &comp).expect("complement is disjoint");
            out.coeffs[tuple_rank(n, &comp)] += sign as f64 * c;
        }
        out
    }

    /// Re-expresses the form in a new coframe. `frame_coframe[a][i]` are the
    /// components of the current coframe element `omega_a` in the target
    /// coframe (`omega_a = sum_i M[a][i] dx^i`); coefficients transform by
    /// `p x p` minors of that matrix.
    pub fn change_basis(&self, coframe_matrix: &[f64]) -> Self {
        let n = self.dim;
        let p = self.degree;
        let mut out = Self::zero(n, p).expect("degree unchanged");
        if p == 0 {
            out.coeffs[0] = self.coeffs[0];
            return out;
        }
        let tuples = increasing_tuples(n, p);
        let mut minor = vec![0.0; p * p];
        for (ri, ci) in self.coeffs.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            let rows = &tuples[ri];
            for (rj, tj) in tuples.iter().enumerate() {
                for (a, &row) in rows.iter().enumerate() {
                    for (b, &col) in tj.iter().enumerate() {
                        minor[a * p + b] = coframe_matrix[row * n + col];
                    }
                }
                out.coeffs[rj] += ci * linalg::det(p, &minor);
            }
        }
        out
    }
}

/// Central-difference exterior derivative of a form field whose coefficients
/// are given in the *coordinate* coframe: `d alpha = sum_k dx^k ^ d_k alpha`.
pub fn exterior_derivative_fd(
    field: &dyn Fn(&[f64]) -> DifferentialForm,
    x: &[f64],
    h: f64,
) -> Result<DifferentialForm, FormError> {
    let n = x.len();
    let sample = field(x);
    let p = sample.degree();
    if p + 1 > n {
        return Err(FormError::DegreeOverflow(p + 1, n));
    }
    let mut out = DifferentialForm::zero(n, p + 1)?;
    let tuples = increasing_tuples(n, p);
    let mut xp = x.to_vec();
    for k in 0..n {
        xp.copy_from_slice(x);
        xp[k] += h;
        let plus = field(&xp);
        xp[k] -= 2.0 * h;
        let minus = field(&xp);
        for (r, tup) in tuples.iter().enumerate() {
            let dc = (plus.coeffs()[r] - minus.coeffs()[r]) / (2.0 * h);
            if dc == 0.0 {
                continue;
            }
            if let Some((merged, sign)) = merge_sign(&[k], tup) {
                out.coeffs[tuple_rank(n, &merged)] += sign as f64 * dc;
            }
        }
    }
    Ok(out)
}
