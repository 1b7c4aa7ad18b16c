//! Dense multi-index tensors and the antisymmetrized contraction engine.
//!
//! Every curvature quantity in this crate reduces to sums of the form
//! `delta^{i_1...i_m}_{j_1...j_m} R_{i_1 i_2}^{j_1 j_2} ... `, where the
//! generalized Kronecker delta is the determinant of ordinary deltas over the
//! two index strings. The engine below evaluates such sums by enumerating
//! index *sets* (the delta vanishes unless both strings are permutations of
//! the same set) and the permutations of each set, which exploits the
//! antisymmetry of the delta instead of looping over all `n^(2m)` strings.
//! A literal brute-force evaluation is kept in the test module as the oracle.
//!
//! Indices are 0-based internally; [`IndexTuple`] (the public face of delta
//! index strings) is 1-based.

use std::sync::OnceLock;

use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("index tuples have different lengths ({0} vs {1})")]
    MismatchedLengths(usize, usize),
    #[error("index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("contraction needs at least one curvature factor; the k = 0 value is a caller-side convention")]
    EmptyFactors,
    #[error("factor {0} must be a rank-(2,2) tensor of dimension {1}")]
    BadFactor(usize, usize),
    #[error("slot {0} out of range for rank {1}")]
    BadSlot(usize, usize),
    #[error("metric is not symmetric positive definite")]
    NotSpd,
}

/// Slot variance flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Upper,
    Lower,
}

/// Dense rank-r tensor over one chart point, row-major by slot order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dim: usize,
    variance: Vec<Variance>,
    components: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(dim: usize, variance: &[Variance]) -> Self {
        let len = dim.pow(variance.len() as u32);
        DenseTensor {
            dim,
            variance: variance.to_vec(),
            components: vec![0.0; len],
        }
    }

    pub fn from_fn(dim: usize, variance: &[Variance], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(dim, variance);
        let rank = variance.len();
        let mut idx = vec![0usize; rank];
        for lin in 0..t.components.len() {
            let mut rem = lin;
            for s in (0..rank).rev() {
                idx[s] = rem % dim;
                rem /= dim;
            }
            t.components[lin] = f(&idx);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    #[inline]
    fn lin(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut l = 0;
        for &i in idx {
            debug_assert!(i < self.dim);
            l = l * self.dim + i;
        }
        l
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.components[self.lin(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: f64) {
        let l = self.lin(idx);
        self.components[l] = v;
    }

    /// Maximum absolute component.
    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Contracts `slot` with the metric (lowering) or inverse metric
    /// (raising), flipping the slot variance. Raising then lowering is the
    /// identity up to roundoff.
    pub fn raise_lower(
        &self,
        slot: usize,
        metric: &[f64],
        inverse_metric: &[f64],
    ) -> Result<DenseTensor, TensorError> {
        let n = self.dim;
        if slot >= self.rank() {
            return Err(TensorError::BadSlot(slot, self.rank()));
        }
        if linalg::cholesky(n, metric).is_none() {
            return Err(TensorError::NotSpd);
        }
        let matrix = match self.variance[slot] {
            Variance::Upper => metric,
            Variance::Lower => inverse_metric,
        };
        let mut variance = self.variance.clone();
        variance[slot] = match self.variance[slot] {
            Variance::Upper => Variance::Lower,
            Variance::Lower => Variance::Upper,
        };
        let mut out = DenseTensor::zeros(n, &variance);
        let rank = self.rank();
        let mut idx = vec![0usize; rank];
        for lin in 0..out.components.len() {
            let mut rem = lin;
            for s in (0..rank).rev() {
                idx[s] = rem % n;
                rem /= n;
            }
            let mut s = 0.0;
            let fixed = idx[slot];
            for m in 0..n {
                idx[slot] = m;
                s += self.get(&idx) * matrix[m * n + fixed];
            }
            idx[slot] = fixed;
            out.components[lin] = s;
        }
        Ok(out)
    }
}

/// Ordered index string with 1-based entries in `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexTuple(pub Vec<usize>);

impl IndexTuple {
    pub fn new(entries: &[usize]) -> Self {
        IndexTuple(entries.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Generalized Kronecker delta `delta^{upper}_{lower}`: the determinant of
/// the matrix of ordinary deltas over the two strings. Equals the sign of
/// the permutation taking `lower` to `upper` when both are permutations of
/// the same index set, and 0 otherwise.
pub fn gen_delta(upper: &IndexTuple, lower: &IndexTuple) -> Result<i32, TensorError> {
    if upper.len() != lower.len() {
        return Err(TensorError::MismatchedLengths(upper.len(), lower.len()));
    }
    for &e in upper.0.iter().chain(lower.0.iter()) {
        if e == 0 {
            return Err(TensorError::IndexOutOfRange(e, usize::MAX));
        }
    }
    Ok(delta_sign(&upper.0, &lower.0))
}

/// 0-or-1-based agnostic delta sign on raw strings (entries only compared
/// for equality).
pub(crate) fn delta_sign(upper: &[usize], lower: &[usize]) -> i32 {
    let m = upper.len();
    debug_assert_eq!(m, lower.len());
    // Repeated entries in either string make the determinant vanish.
    for a in 0..m {
        for b in (a + 1)..m {
            if upper[a] == upper[b] || lower[a] == lower[b] {
                return 0;
            }
        }
    }
    // Permutation q with lower[t] = upper[q[t]]; delta = parity(q).
    let mut q = [0usize; 8];
    debug_assert!(m <= 8);
    for t in 0..m {
        match upper.iter().position(|&u| u == lower[t]) {
            Some(p) => q[t] = p,
            None => return 0,
        }
    }
    parity(&q[..m])
}

#[inline]
fn parity(perm: &[usize]) -> i32 {
    let mut sign = 1;
    for a in 0..perm.len() {
        for b in (a + 1)..perm.len() {
            if perm[a] > perm[b] {
                sign = -sign;
            }
        }
    }
    sign
}

/// All permutations of `0..m` with their signs, cached per length.
pub(crate) fn perms_with_sign(m: usize) -> &'static [(Vec<usize>, i32)] {
    static CACHE: OnceLock<Vec<Vec<(Vec<usize>, i32)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=7)
            .map(|m| {
                let mut out = Vec::new();
                let mut cur: Vec<usize> = (0..m).collect();
                heap_permutations(&mut cur, m, &mut out);
                out
            })
            .collect()
    });
    &cache[m]
}

fn heap_permutations(cur: &mut Vec<usize>, k: usize, out: &mut Vec<(Vec<usize>, i32)>) {
    if k <= 1 {
        out.push((cur.clone(), parity(cur)));
        return;
    }
    for i in 0..k {
        heap_permutations(cur, k - 1, out);
        if k % 2 == 0 {
            cur.swap(i, k - 1);
        } else {
            cur.swap(0, k - 1);
        }
    }
}

fn for_each_subset(n: usize, size: usize, must: &[usize], mut f: impl FnMut(&[usize])) {
    // Sorted `size`-subsets of 0..n containing every index in `must`.
    let mut chosen = Vec::with_capacity(size);
    fn rec(n: usize, size: usize, start: usize, must: &[usize], chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if chosen.len() == size {
            if must.iter().all(|m| chosen.contains(m)) {
                f(chosen);
            }
            return;
        }
        let remaining = size - chosen.len();
        for v in start..=(n.saturating_sub(remaining)) {
            chosen.push(v);
            rec(n, size, v + 1, must, chosen, f);
            chosen.pop();
        }
    }
    rec(n, size, 0, must, &mut chosen, &mut f);
}

fn check_factors(dim: usize, factors: &[&DenseTensor]) -> Result<(), TensorError> {
    for (i, t) in factors.iter().enumerate() {
        if t.dim() != dim || t.rank() != 4 {
            return Err(TensorError::BadFactor(i, dim));
        }
    }
    Ok(())
}

#[inline]
fn factor_product(factors: &[&DenseTensor], top: &[usize], bottom: &[usize]) -> f64 {
    let mut p = 1.0;
    for (a, f) in factors.iter().enumerate() {
        p *= f.get(&[top[2 * a], top[2 * a + 1], bottom[2 * a], bottom[2 * a + 1]]);
        if p == 0.0 {
            return 0.0;
        }
    }
    p
}

/// Raw scalar contraction `delta^{I}_{J} R R ...` over strings of length
/// `2k` (no `1/2^k` prefactor). Each factor is a rank-(2,2) tensor indexed
/// `[i1][i2][j1][j2]`; the delta's upper string feeds the lower factor pairs.
pub fn contract_scalar(dim: usize, factors: &[&DenseTensor]) -> Result<f64, TensorError> {
    if factors.is_empty() {
        return Err(TensorError::EmptyFactors);
    }
    check_factors(dim, factors)?;
    let m = 2 * factors.len();
    if m > dim {
        return Ok(0.0); // the delta has no non-vanishing assignment
    }
    let perms = perms_with_sign(m);
    let mut total = 0.0;
    let mut top = vec![0usize; m];
    let mut bottom = vec![0usize; m];
    for_each_subset(dim, m, &[], |set| {
        let mut sum = 0.0;
        for (pi, si) in perms {
            for t in 0..m {
                top[t] = set[pi[t]];
            }
            for (rho, srho) in perms {
                for t in 0..m {
                    bottom[t] = set[rho[t]];
                }
                let p = factor_product(factors, &top, &bottom);
                if p != 0.0 {
                    sum += (si * srho) as f64 * p;
                }
            }
        }
        total += sum;
    });
    Ok(total)
}

/// Raw mixed (1,1) contraction `out^i_j = delta^{i I}_{j J} R R ...` with
/// strings of length `2k + 1` (no prefactor).
pub fn contract_mixed(dim: usize, factors: &[&DenseTensor]) -> Result<DenseTensor, TensorError> {
    if factors.is_empty() {
        return Err(TensorError::EmptyFactors);
    }
    check_factors(dim, factors)?;
    let k2 = 2 * factors.len();
    let m = k2 + 1;
    let mut out = DenseTensor::zeros(dim, &[Variance::Upper, Variance::Lower]);
    if m > dim {
        return Ok(out);
    }
    let perms = perms_with_sign(k2);
    let mut full_top = vec![0usize; m];
    let mut full_bottom = vec![0usize; m];
    let mut rest_top = vec![0usize; k2];
    let mut rest_bottom = vec![0usize; k2];
    for i in 0..dim {
        for j in 0..dim {
            let must: Vec<usize> = if i == j { vec![i] } else { vec![i, j] };
            let mut acc = 0.0;
            for_each_subset(dim, m, &must, |set| {
                let ti: Vec<usize> = set.iter().copied().filter(|&v| v != i).collect();
                let tj: Vec<usize> = set.iter().copied().filter(|&v| v != j).collect();
                // Base sign for the sorted rest-strings.
                full_top[0] = i;
                full_top[1..].copy_from_slice(&ti);
                full_bottom[0] = j;
                full_bottom[1..].copy_from_slice(&tj);
                let base = delta_sign(&full_top, &full_bottom);
                if base == 0 {
                    return;
                }
                let mut sum = 0.0;
                for (pi, si) in perms {
                    for t in 0..k2 {
                        rest_top[t] = ti[pi[t]];
                    }
                    for (rho, srho) in perms {
                        for t in 0..k2 {
                            rest_bottom[t] = tj[rho[t]];
                        }
                        let p = factor_product(factors, &rest_top, &rest_bottom);
                        if p != 0.0 {
                            sum += (si * srho) as f64 * p;
                        }
                    }
                }
                acc += base as f64 * sum;
            });
            out.set(&[i, j], acc);
        }
    }
    Ok(out)
}

/// Raw rank-4 contraction for the `P` tensor family: with `k - 1` factors,
///
/// `out^{ijls} = delta^{I i j}_{J b1 b2} R... g^{b1 l} g^{b2 s}`
///
/// where `I`, `J` are strings of length `2k - 2` (no prefactor). With zero
/// factors this reduces to `delta^{ij}_{b1 b2} g^{b1 l} g^{b2 s}`.
pub fn contract_p_tensor(
    dim: usize,
    factors: &[&DenseTensor],
    inverse_metric: &[f64],
) -> Result<DenseTensor, TensorError> {
    check_factors(dim, factors)?;
    let k2 = 2 * factors.len(); // bound string length
    let m = k2 + 2;
    let upper4 = [Variance::Upper; 4];
    let mut acc = DenseTensor::zeros(dim, &upper4);
    if m > dim {
        return Ok(acc);
    }
    let rest_perms = perms_with_sign(k2);
    let bot_perms = perms_with_sign(m);
    let mut full_top = vec![0usize; m];
    let mut full_bottom = vec![0usize; m];
    for i in 0..dim {
        for j in 0..dim {
            if i == j {
                continue;
            }
            for_each_subset(dim, m, &[i, j], |set| {
                let rest: Vec<usize> = set.iter().copied().filter(|&v| v != i && v != j).collect();
                for (pi, _) in rest_perms.iter() {
                    for t in 0..k2 {
                        full_top[t] = rest[pi[t]];
                    }
                    full_top[k2] = i;
                    full_top[k2 + 1] = j;
                    for (rho, _) in bot_perms.iter() {
                        for t in 0..m {
                            full_bottom[t] = set[rho[t]];
                        }
                        let sign = delta_sign(&full_top, &full_bottom);
                        if sign == 0 {
                            continue;
                        }
                        let p = factor_product(factors, &full_top[..k2], &full_bottom[..k2]);
                        if p != 0.0 {
                            let b1 = full_bottom[k2];
                            let b2 = full_bottom[k2 + 1];
                            let v = acc.get(&[i, j, b1, b2]) + sign as f64 * p;
                            acc.set(&[i, j, b1, b2], v);
                        }
                    }
                }
            });
        }
    }
    // Contract the trailing bottom indices with the inverse metric:
    // P^{ijls} = acc[i][j][b1][b2] g^{b1 l} g^{b2 s}.
    let mut out = DenseTensor::zeros(dim, &upper4);
    for i in 0..dim {
        for j in 0..dim {
            for l in 0..dim {
                for s in 0..dim {
                    let mut v = 0.0;
                    for b1 in 0..dim {
                        let gb1 = inverse_metric[b1 * dim + l];
                        if gb1 == 0.0 {
                            continue;
                        }
                        for b2 in 0..dim {
                            v += acc.get(&[i, j, b1, b2]) * gb1 * inverse_metric[b2 * dim + s];
                        }
                    }
                    out.set(&[i, j, l, s], v);
                }
            }
        }
    }
    Ok(out)
}

/// Contraction shapes issued by the curvature stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractionShape {
    /// `delta^{I}_{J} R...R` with `|I| = 2k`; scalar result.
    Scalar,
    /// `delta^{i I}_{j J} R...R`; mixed (1,1) result.
    Lovelock,
    /// `delta^{I i j}_{J b1 b2} R...R g g`; rank-4 upper result.
    PTensor,
}

pub enum ContractionValue {
    Scalar(f64),
    Tensor(DenseTensor),
}

/// Dispatching front for the delta-weighted contraction kernels.
///
/// `inverse_metric` is required by [`ContractionShape::PTensor`] only.
pub fn antisym_contract(
    shape: ContractionShape,
    dim: usize,
    factors: &[&DenseTensor],
    inverse_metric: Option<&[f64]>,
) -> Result<ContractionValue, TensorError> {
    match shape {
        ContractionShape::Scalar => Ok(ContractionValue::Scalar(contract_scalar(dim, factors)?)),
        ContractionShape::Lovelock => Ok(ContractionValue::Tensor(contract_mixed(dim, factors)?)),
        ContractionShape::PTensor => {
            let inv = inverse_metric.ok_or(TensorError::NotSpd)?;
            Ok(ContractionValue::Tensor(contract_p_tensor(dim, factors, inv)?))
        }
    }
}
