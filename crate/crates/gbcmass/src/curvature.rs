//! Pointwise curvature stack: Christoffel symbols, Riemann tensor in all
//! variances, Ricci and scalar curvature, the Gauss-Bonnet-Chern scalars
//! `L_k`, the `P_(k)` tensors, and the Lovelock tensors `E^(k)`.
//!
//! Sign conventions are pinned by two calibration demands: the unit round
//! sphere has positive scalar curvature, and the delta-contraction of k
//! Riemann factors reproduces `L_1 = R`. Concretely
//!
//! ```text
//! R^i_jls = d_l Gamma^i_sj - d_s Gamma^i_lj
//!           + Gamma^i_lm Gamma^m_sj - Gamma^i_sm Gamma^m_lj
//! ```
//!
//! with `R_ijls = g_ia R^a_jls`, the mixed tensor `R_ij^sl` raised on the
//! last two slots, and `Ric_js = R^a_jas`. On the round sphere of sectional
//! curvature kappa this gives `R_ij^sl = kappa delta^sl_ij`.

use thiserror::Error;

use crate::linalg;
use crate::metric::{MetricFamily, MetricJet};
use crate::tensor::{contract_mixed, contract_p_tensor, contract_scalar, DenseTensor, TensorError, Variance};

#[derive(Debug, Error, PartialEq)]
pub enum CurvatureError {
    #[error("k = {k} out of range for dimension {n} (need 2k < n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("metric is singular or not positive definite at the point")]
    SingularMetric,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Everything the curvature stack needs at one chart point.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub point: Vec<f64>,
    pub dim: usize,
    pub g: Vec<f64>,
    pub g_inv: Vec<f64>,
    pub sqrt_det_g: f64,
    /// `gamma[(i*n+j)*n+k] = Gamma^i_jk`
    pub gamma: Vec<f64>,
    /// All-lower Riemann `R_ijls`.
    pub riemann_low: DenseTensor,
    /// Mixed Riemann `R_ij^sl` (lower pair first).
    pub riemann_mixed: DenseTensor,
    /// `ricci[j*n+s] = R^a_jas`
    pub ricci: Vec<f64>,
    pub scalar: f64,
}

/// Christoffel symbols of the Levi-Civita connection,
/// `Gamma^i_jk = g^il (d_j g_lk + d_k g_lj - d_l g_jk) / 2`.
pub fn christoffel(jet: &MetricJet) -> Result<Vec<f64>, CurvatureError> {
    let n = jet.dim;
    let g_inv = linalg::spd_inverse(n, &jet.g).ok_or(CurvatureError::SingularMetric)?;
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv[i * n + l]
                        * (jet.dg_at(j, l, k) + jet.dg_at(k, l, j) - jet.dg_at(l, j, k));
                }
                gamma[(i * n + j) * n + k] = 0.5 * s;
            }
        }
    }
    Ok(gamma)
}

impl CurvatureBundle {
    pub fn at(family: &MetricFamily, x: &[f64]) -> Result<Self, CurvatureError> {
        let jet = family.eval(x);
        Self::from_jet(x, &jet)
    }

    pub fn from_jet(x: &[f64], jet: &MetricJet) -> Result<Self, CurvatureError> {
        let n = jet.dim;
        let chol = linalg::cholesky(n, &jet.g).ok_or(CurvatureError::SingularMetric)?;
        let sqrt_det_g = linalg::det_from_cholesky(n, &chol).sqrt();
        let g_inv = linalg::spd_inverse(n, &jet.g).ok_or(CurvatureError::SingularMetric)?;
        let gamma = christoffel(jet)?;

        // d_m Gamma^i_jk, with d g^{-1} = -g^{-1} (d g) g^{-1}.
        let mut dgamma = vec![0.0; n * n * n * n];
        let mut dginv = vec![0.0; n * n * n]; // [m][i][l]
        for m in 0..n {
            for i in 0..n {
                for l in 0..n {
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in 0..n {
                            s -= g_inv[i * n + a] * jet.dg_at(m, a, b) * g_inv[b * n + l];
                        }
                    }
                    dginv[(m * n + i) * n + l] = s;
                }
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let sym = jet.dg_at(j, l, k) + jet.dg_at(k, l, j) - jet.dg_at(l, j, k);
                            let dsym = jet.d2g_at(m, j, l, k) + jet.d2g_at(m, k, l, j)
                                - jet.d2g_at(m, l, j, k);
                            s += dginv[(m * n + i) * n + l] * sym + g_inv[i * n + l] * dsym;
                        }
                        dgamma[((m * n + i) * n + j) * n + k] = 0.5 * s;
                    }
                }
            }
        }

        // R^i_jls, then lower / raise.
        let gm = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
        let dgm = |m: usize, i: usize, j: usize, k: usize| dgamma[((m * n + i) * n + j) * n + k];
        let mut up = vec![0.0; n * n * n * n]; // [i][j][l][s]
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for s in 0..n {
                        let mut v = dgm(l, i, s, j) - dgm(s, i, l, j);
                        for m in 0..n {
                            v += gm(i, l, m) * gm(m, s, j) - gm(i, s, m) * gm(m, l, j);
                        }
                        up[((i * n + j) * n + l) * n + s] = v;
                    }
                }
            }
        }
        let lower4 = [Variance::Lower; 4];
        let mut riemann_low = DenseTensor::zeros(n, &lower4);
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for s in 0..n {
                        let mut v = 0.0;
                        for a in 0..n {
                            v += jet.g_at(i, a) * up[((a * n + j) * n + l) * n + s];
                        }
                        riemann_low.set(&[i, j, l, s], v);
                    }
                }
            }
        }
        // Mixed R_ij^sl: raise the last two slots of R_ijls; slot order of
        // the result is [i][j][s][l] so that the constant-curvature model
        // satisfies R_ij^sl = kappa * delta^sl_ij.
        let mixed_var = [Variance::Lower, Variance::Lower, Variance::Upper, Variance::Upper];
        // mixed[i][j][s][l] = R_ijab g^{as} g^{bl}; on the round sphere this
        // is kappa * delta^{sl}_{ij}, which pins the slot order.
        let mut half = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for c in 0..n {
                    for b in 0..n {
                        let mut v = 0.0;
                        for a in 0..n {
                            v += riemann_low.get(&[i, j, a, b]) * g_inv[a * n + c];
                        }
                        half[((i * n + j) * n + c) * n + b] = v;
                    }
                }
            }
        }
        let mut riemann_mixed = DenseTensor::zeros(n, &mixed_var);
        for i in 0..n {
            for j in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut v = 0.0;
                        for b in 0..n {
                            v += half[((i * n + j) * n + c) * n + b] * g_inv[b * n + d];
                        }
                        riemann_mixed.set(&[i, j, c, d], v);
                    }
                }
            }
        }

        let mut ricci = vec![0.0; n * n];
        for j in 0..n {
            for s in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    v += up[((a * n + j) * n + a) * n + s];
                }
                ricci[j * n + s] = v;
            }
        }
        let mut scalar = 0.0;
        for j in 0..n {
            for s in 0..n {
                scalar += g_inv[j * n + s] * ricci[j * n + s];
            }
        }

        Ok(CurvatureBundle {
            point: x.to_vec(),
            dim: n,
            g: jet.g.clone(),
            g_inv,
            sqrt_det_g,
            gamma,
            riemann_low,
            riemann_mixed,
            ricci,
            scalar,
        })
    }

    fn check_k(&self, k: usize) -> Result<(), CurvatureError> {
        if k == 0 || 2 * k >= self.dim {
            return Err(CurvatureError::KOutOfRange { k, n: self.dim });
        }
        Ok(())
    }

    /// Gauss-Bonnet-Chern curvature
    /// `L_k = delta^{I}_{J} R..R / 2^k`; `L_1` is the scalar curvature.
    ///
    /// Unlike the mass-level quantities (which need `2k < n`), the scalar is
    /// defined up to the Pfaffian case `2k = n`, which the transgression
    /// identities use on even-dimensional models.
    pub fn lk(&self, k: usize) -> Result<f64, CurvatureError> {
        if k == 0 || 2 * k > self.dim {
            return Err(CurvatureError::KOutOfRange { k, n: self.dim });
        }
        let factors: Vec<&DenseTensor> = (0..k).map(|_| &self.riemann_mixed).collect();
        Ok(contract_scalar(self.dim, &factors)? / 2f64.powi(k as i32))
    }

    /// The divergence-free 4-tensor with `L_k = P : Riem`.
    pub fn p_tensor(&self, k: usize) -> Result<DenseTensor, CurvatureError> {
        self.check_k(k)?;
        let factors: Vec<&DenseTensor> = (0..k - 1).map(|_| &self.riemann_mixed).collect();
        let mut p = contract_p_tensor(self.dim, &factors, &self.g_inv)?;
        let scale = 2f64.powi(k as i32);
        let n4 = self.dim.pow(4);
        for lin in 0..n4 {
            let v = p.components()[lin] / scale;
            let idx = unflatten(self.dim, 4, lin);
            p.set(&idx, v);
        }
        Ok(p)
    }

    /// Lovelock tensor `E^(k)i_j` (mixed); `E^(0)` is the metric, i.e. the
    /// identity in mixed form, and `E^(1)` is the Einstein tensor.
    pub fn lovelock(&self, k: usize) -> Result<DenseTensor, CurvatureError> {
        let n = self.dim;
        if k == 0 {
            let mut e = DenseTensor::zeros(n, &[Variance::Upper, Variance::Lower]);
            for i in 0..n {
                e.set(&[i, i], 1.0);
            }
            return Ok(e);
        }
        self.check_k(k)?;
        let factors: Vec<&DenseTensor> = (0..k).map(|_| &self.riemann_mixed).collect();
        let mut e = contract_mixed(n, &factors)?;
        let scale = -(2f64.powi(k as i32 + 1));
        for i in 0..n {
            for j in 0..n {
                let v = e.get(&[i, j]) / scale;
                e.set(&[i, j], v);
            }
        }
        Ok(e)
    }

    /// All-lower Lovelock tensor `E^(k)_ij = g_ia E^(k)a_j`.
    pub fn lovelock_lower(&self, k: usize) -> Result<DenseTensor, CurvatureError> {
        let n = self.dim;
        let mixed = self.lovelock(k)?;
        let mut e = DenseTensor::zeros(n, &[Variance::Lower, Variance::Lower]);
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    v += self.g[i * n + a] * mixed.get(&[a, j]);
                }
                e.set(&[i, j], v);
            }
        }
        Ok(e)
    }

    /// `|Rm|^2` with every index lowered and contracted against `g^{-1}`.
    pub fn riemann_norm2(&self) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        // R^{ijls} from the mixed tensor: raise the first two slots.
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for s in 0..n {
                        let mut up = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                // mixed[a][b][l][s] = R_ab^{..} raised on the
                                // last two slots in riemann_low order.
                                up += self.g_inv[i * n + a]
                                    * self.g_inv[j * n + b]
                                    * self.riemann_mixed.get(&[a, b, l, s]);
                            }
                        }
                        total += up * self.riemann_low.get(&[i, j, l, s]);
                    }
                }
            }
        }
        total
    }

    /// `|Ric|^2` with indices contracted against `g^{-1}`.
    pub fn ricci_norm2(&self) -> f64 {
        let n = self.dim;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut up = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        up += self.g_inv[i * n + a] * self.g_inv[j * n + b] * self.ricci[a * n + b];
                    }
                }
                total += up * self.ricci[i * n + j];
            }
        }
        total
    }

    /// Einstein tensor in mixed form, `Ric^i_j - R/2 delta^i_j`.
    pub fn einstein_mixed(&self) -> DenseTensor {
        let n = self.dim;
        let mut e = DenseTensor::zeros(n, &[Variance::Upper, Variance::Lower]);
        for i in 0..n {
            for j in 0..n {
                let mut ric = 0.0;
                for a in 0..n {
                    ric += self.g_inv[i * n + a] * self.ricci[a * n + j];
                }
                let v = ric - if i == j { 0.5 * self.scalar } else { 0.0 };
                e.set(&[i, j], v);
            }
        }
        e
    }

    /// Residuals of the algebraic Riemann identities: (antisymmetry in the
    /// first pair, antisymmetry in the second pair, pair exchange, first
    /// Bianchi), relative to the largest component.
    pub fn symmetry_residuals(&self) -> [f64; 4] {
        let n = self.dim;
        let scale = self.riemann_low.max_abs().max(1e-300);
        let mut res = [0.0f64; 4];
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for s in 0..n {
                        let v = self.riemann_low.get(&[i, j, l, s]);
                        res[0] = res[0].max((v + self.riemann_low.get(&[j, i, l, s])).abs());
                        res[1] = res[1].max((v + self.riemann_low.get(&[i, j, s, l])).abs());
                        res[2] = res[2].max((v - self.riemann_low.get(&[l, s, i, j])).abs());
                        let bianchi = v
                            + self.riemann_low.get(&[i, l, s, j])
                            + self.riemann_low.get(&[i, s, j, l]);
                        res[3] = res[3].max(bianchi.abs());
                    }
                }
            }
        }
        for r in &mut res {
            *r /= scale;
        }
        res
    }

    /// `|scalar - double trace of riemann_low|`.
    pub fn scalar_trace_residual(&self) -> f64 {
        let n = self.dim;
        let mut tr = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for s in 0..n {
                        tr += self.g_inv[i * n + l]
                            * self.g_inv[j * n + s]
                            * self.riemann_low.get(&[i, j, l, s]);
                    }
                }
            }
        }
        (tr - self.scalar).abs() / self.scalar.abs().max(1.0)
    }
}

fn unflatten(dim: usize, rank: usize, lin: usize) -> Vec<usize> {
    let mut idx = vec![0usize; rank];
    let mut rem = lin;
    for s in (0..rank).rev() {
        idx[s] = rem % dim;
        rem /= dim;
    }
    idx
}

/// Covariant derivative of a tensor field by central differences plus
/// Christoffel corrections; the derivative index is appended as a new
/// trailing lower slot.
pub fn covariant_derivative_fd(
    family: &MetricFamily,
    field: &dyn Fn(&[f64]) -> DenseTensor,
    x: &[f64],
    h: f64,
) -> Result<DenseTensor, CurvatureError> {
    let n = family.dim();
    let jet = family.eval(x);
    let gamma = christoffel(&jet)?;
    let gm = |i: usize, j: usize, k: usize| gamma[(i * n + j) * n + k];
    let center = field(x);
    let rank = center.rank();
    let mut variance = center.variance().to_vec();
    variance.push(Variance::Lower);
    let mut out = DenseTensor::zeros(n, &variance);

    let mut xp = x.to_vec();
    for k in 0..n {
        xp.copy_from_slice(x);
        xp[k] += h;
        let plus = field(&xp);
        xp[k] -= 2.0 * h;
        let minus = field(&xp);
        let mut idx = vec![0usize; rank + 1];
        for lin in 0..center.components().len() {
            let base = unflatten(n, rank, lin);
            idx[..rank].copy_from_slice(&base);
            idx[rank] = k;
            let mut v = (plus.components()[lin] - minus.components()[lin]) / (2.0 * h);
            // Connection corrections slot by slot.
            let mut tmp = base.clone();
            for (slot, var) in center.variance().iter().enumerate() {
                let a = base[slot];
                for m in 0..n {
                    tmp.copy_from_slice(&base);
                    tmp[slot] = m;
                    let t = center.get(&tmp);
                    match var {
                        Variance::Upper => v += gm(a, k, m) * t,
                        Variance::Lower => v -= gm(m, k, a) * t,
                    }
                }
            }
            out.set(&idx, v);
        }
    }
    Ok(out)
}

/// Covariant divergence: covariant derivative contracted with `slot`
/// (directly for an upper slot, through `g^{-1}` for a lower slot).
pub fn covariant_divergence(
    family: &MetricFamily,
    field: &dyn Fn(&[f64]) -> DenseTensor,
    x: &[f64],
    h: f64,
    slot: usize,
) -> Result<DenseTensor, CurvatureError> {
    let n = family.dim();
    let deriv = covariant_derivative_fd(family, field, x, h)?;
    let rank = deriv.rank() - 1;
    if slot >= rank {
        return Err(CurvatureError::Tensor(TensorError::BadSlot(slot, rank)));
    }
    let slot_var = deriv.variance()[slot];
    let mut variance: Vec<Variance> = deriv.variance().to_vec();
    variance.remove(rank); // derivative slot
    variance.remove(slot);
    let mut out = DenseTensor::zeros(n, &variance);
    let jet = family.eval(x);
    let g_inv = linalg::spd_inverse(n, &jet.g).ok_or(CurvatureError::SingularMetric)?;
    let out_len = out.components().len();
    let mut idx_full = vec![0usize; rank + 1];
    for lin in 0..out_len {
        let rest = unflatten(n, variance.len(), lin);
        // Rebuild the full index with `slot` and the trailing derivative
        // index as the contraction pair.
        let mut v = 0.0;
        match slot_var {
            Variance::Upper => {
                for c in 0..n {
                    fill_index(&mut idx_full, &rest, slot, c, c);
                    v += deriv.get(&idx_full);
                }
            }
            Variance::Lower => {
                for c in 0..n {
                    for d in 0..n {
                        fill_index(&mut idx_full, &rest, slot, c, d);
                        v += g_inv[c * n + d] * deriv.get(&idx_full);
                    }
                }
            }
        }
        out.set(&rest, v);
    }
    Ok(out)
}

fn fill_index(full: &mut [usize], rest: &[usize], slot: usize, slot_val: usize, deriv_val: usize) {
    let rank = full.len() - 1;
    let mut r = 0;
    for s in 0..rank {
        if s == slot {
            full[s] = slot_val;
        } else {
            full[s] = rest[r];
            r += 1;
        }
    }
    full[rank] = deriv_val;
}

/// Max-norm of the covariant divergence of `P_(k)` at `x` (first slot).
pub fn div_p_residual(
    family: &MetricFamily,
    k: usize,
    x: &[f64],
    h: f64,
) -> Result<f64, CurvatureError> {
    let field = |y: &[f64]| {
        CurvatureBundle::at(family, y)
            .and_then(|b| b.p_tensor(k))
            .expect("field evaluation inside chart")
    };
    let div = covariant_divergence(family, &field, x, h, 0)?;
    Ok(div.max_abs())
}

/// Max-norm of the covariant divergence of the lowered `E^(k)` at `x`.
pub fn div_lovelock_residual(
    family: &MetricFamily,
    k: usize,
    x: &[f64],
    h: f64,
) -> Result<f64, CurvatureError> {
    let field = |y: &[f64]| {
        CurvatureBundle::at(family, y)
            .and_then(|b| b.lovelock_lower(k))
            .expect("field evaluation inside chart")
    };
    let div = covariant_divergence(family, &field, x, h, 1)?;
    Ok(div.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::random_chart_points;
    use std::collections::BTreeMap;

    fn family(name: &str, dim: usize, kv: &[(&str, f64)]) -> MetricFamily {
        let params: BTreeMap<String, f64> =
            kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        MetricFamily::make(name, dim, &params).unwrap()
    }

    #[test]
    fn flat_curvature_vanishes() {
        let fam = family("flat", 4, &[]);
        let b = CurvatureBundle::at(&fam, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(b.gamma.iter().all(|&v| v == 0.0));
        assert_eq!(b.riemann_low.max_abs(), 0.0);
        assert_eq!(b.scalar, 0.0);
        assert_eq!(b.lk(1).unwrap(), 0.0);
    }

    #[test]
    fn christoffel_conformal_identity() {
        // For g = e^{2 phi} delta:
        // Gamma^i_jk = delta^i_j d_k phi + delta^i_k d_j phi - delta_jk d_i phi.
        let fam = family("constant_curvature", 3, &[("kappa", 0.7)]);
        let x = [0.4, -0.3, 0.6];
        let jet = fam.eval(&x);
        let gamma = christoffel(&jet).unwrap();
        let n = 3;
        // phi = log(F)/2, d_k phi = F' x_k / (2 F r).
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = jet.g_at(0, 0);
        let w = 1.0 + 0.7 * r * r;
        let df = -16.0 * 0.7 * r * w.powi(-3);
        let dphi: Vec<f64> = x.iter().map(|&xi| df * xi / (2.0 * f * r)).collect();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let want = (i == j) as i32 as f64 * dphi[k]
                        + (i == k) as i32 as f64 * dphi[j]
                        - (j == k) as i32 as f64 * dphi[i];
                    let got = gamma[(i * n + j) * n + k];
                    assert!((got - want).abs() < 1e-12, "({i}{j}{k}): {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn christoffel_symmetric_on_random_af() {
        let fam = family("random_af", 4, &[("seed", 3.0)]);
        for x in random_chart_points(4, 10, (5.0, 20.0), 1) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            let n = 4;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let d = (b.gamma[(i * n + j) * n + k] - b.gamma[(i * n + k) * n + j]).abs();
                        assert!(d < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_curvature_riemann_model() {
        for (n, kappa) in [(3usize, 1.0), (4, 0.5), (5, 1.0)] {
            let fam = family("constant_curvature", n, &[("kappa", kappa)]);
            for x in random_chart_points(n, 5, (0.2, 1.5), 2) {
                let b = CurvatureBundle::at(&fam, &x).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        for s in 0..n {
                            for l in 0..n {
                                let want = kappa
                                    * (((i == s && j == l) as i32 - (i == l && j == s) as i32)
                                        as f64);
                                let got = b.riemann_mixed.get(&[i, j, s, l]);
                                assert!(
                                    (got - want).abs() < 1e-9,
                                    "n={n} ({i}{j}{s}{l}): {got} vs {want}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sphere_scalar_curvature_n2() {
        let fam = family("constant_curvature", 2, &[("kappa", 1.0)]);
        let b = CurvatureBundle::at(&fam, &[0.3, 0.4]).unwrap();
        assert!((b.scalar - 2.0).abs() < 1e-10, "R = {}", b.scalar);
    }

    #[test]
    fn schwarzschild_is_scalar_flat() {
        for n in [3usize, 5] {
            let fam = family("schwarzschild_isotropic", n, &[("m", 1.0)]);
            for x in random_chart_points(n, 50, (2.0, 30.0), 3) {
                let b = CurvatureBundle::at(&fam, &x).unwrap();
                assert!(b.scalar.abs() < 1e-9, "n={n} R={}", b.scalar);
            }
        }
    }

    #[test]
    fn riemann_symmetries_and_bianchi() {
        let fam = family("random_af", 5, &[("seed", 4.0)]);
        for x in random_chart_points(5, 10, (5.0, 20.0), 4) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            let res = b.symmetry_residuals();
            for r in res {
                assert!(r < 1e-11, "residuals {res:?}");
            }
            assert!(b.scalar_trace_residual() < 1e-12);
        }
    }

    #[test]
    fn l1_equals_scalar_curvature() {
        for (name, kv) in [
            ("schwarzschild_isotropic", vec![("m", 1.0)]),
            ("random_af", vec![("seed", 5.0)]),
            ("conformal_radial", vec![("p", 1.2), ("c", 0.7), ("q", 1.1)]),
        ] {
            let fam = family(name, 4, &kv);
            for x in random_chart_points(4, 20, (5.0, 30.0), 5) {
                let b = CurvatureBundle::at(&fam, &x).unwrap();
                let l1 = b.lk(1).unwrap();
                // Scalar-flat families cancel R to roundoff; compare at the
                // scale of the curvature inputs.
                let scale = b.scalar.abs().max(b.riemann_low.max_abs()).max(1e-300);
                let rel = (l1 - b.scalar).abs() / scale;
                assert!(rel < 1e-11, "{name}: L1 {} vs R {}", l1, b.scalar);
            }
        }
    }

    #[test]
    fn lanczos_identity_for_l2() {
        let fam = family("random_af", 5, &[("seed", 6.0)]);
        for x in random_chart_points(5, 20, (5.0, 30.0), 6) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            let l2 = b.lk(2).unwrap();
            let lanczos = b.riemann_norm2() - 4.0 * b.ricci_norm2() + b.scalar * b.scalar;
            let rel = (l2 - lanczos).abs() / lanczos.abs().max(1e-12);
            assert!(rel < 1e-10, "L2 {l2} vs Lanczos {lanczos}");
        }
    }

    #[test]
    fn constant_curvature_lk_closed_form() {
        // L_k = n! / (n-2k)! * kappa^k.
        for (n, k) in [(4usize, 1usize), (4, 2), (5, 2), (6, 2)] {
            let kappa = 1.0;
            let fam = family("constant_curvature", n, &[("kappa", kappa)]);
            let x = vec![0.21; n];
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            let want = ((n - 2 * k + 1)..=n).product::<usize>() as f64 * kappa.powi(k as i32);
            let got = b.lk(k).unwrap();
            assert!(
                ((got - want) / want).abs() < 1e-8,
                "(n={n},k={k}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn p_tensor_symmetries_and_trace() {
        let fam = family("random_af", 5, &[("seed", 7.0)]);
        for x in random_chart_points(5, 5, (5.0, 20.0), 7) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            for k in [1usize, 2] {
                let p = b.p_tensor(k).unwrap();
                let n = 5;
                let scale = p.max_abs().max(1e-300);
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            for s in 0..n {
                                let v = p.get(&[i, j, l, s]);
                                assert!((v + p.get(&[j, i, l, s])).abs() / scale < 1e-12);
                                assert!((v + p.get(&[i, j, s, l])).abs() / scale < 1e-12);
                                assert!((v - p.get(&[l, s, i, j])).abs() / scale < 1e-12);
                            }
                        }
                    }
                }
                // L_k = P : Riem.
                let mut dot = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for l in 0..n {
                            for s in 0..n {
                                dot += p.get(&[i, j, l, s]) * b.riemann_low.get(&[i, j, l, s]);
                            }
                        }
                    }
                }
                let lk = b.lk(k).unwrap();
                assert!(
                    (dot - lk).abs() / lk.abs().max(1e-12) < 1e-10,
                    "k={k}: P:Riem {dot} vs L_k {lk}"
                );
            }
        }
    }

    #[test]
    fn lovelock_k1_is_einstein() {
        let fam = family("random_af", 4, &[("seed", 8.0)]);
        for x in random_chart_points(4, 20, (5.0, 30.0), 8) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            let e = b.lovelock(1).unwrap();
            let want = b.einstein_mixed();
            let scale = want.max_abs().max(1e-300);
            for i in 0..4 {
                for j in 0..4 {
                    let d = (e.get(&[i, j]) - want.get(&[i, j])).abs() / scale;
                    assert!(d < 1e-11, "({i},{j}) rel {d}");
                }
            }
        }
    }

    #[test]
    fn lovelock_trace_identity() {
        let fam = family("random_af", 5, &[("seed", 9.0)]);
        for x in random_chart_points(5, 10, (5.0, 20.0), 9) {
            let b = CurvatureBundle::at(&fam, &x).unwrap();
            for k in [1usize, 2] {
                let e = b.lovelock(k).unwrap();
                let mut tr = 0.0;
                for i in 0..5 {
                    tr += e.get(&[i, i]);
                }
                let lk = b.lk(k).unwrap();
                let want = -((5.0 - 2.0 * k as f64) / 2.0) * lk;
                assert!(
                    (tr - want).abs() / want.abs().max(1e-12) < 1e-10,
                    "k={k}: trace {tr} vs {want}"
                );
            }
        }
    }

    #[test]
    fn lovelock_conventions() {
        let fam = family("flat", 4, &[]);
        let b = CurvatureBundle::at(&fam, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        // E^(0) = g (identity in mixed form); E^(k) = 0 on flat space.
        let e0 = b.lovelock(0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(e0.get(&[i, j]), if i == j { 1.0 } else { 0.0 });
            }
        }
        assert_eq!(b.lovelock(1).unwrap().max_abs(), 0.0);
        assert!(b.lk(0).is_err());
        assert!(b.lk(3).is_err(), "2k > n must be rejected");
        assert!(b.p_tensor(2).is_err(), "P needs 2k < n");
        assert!(b.lovelock(2).is_err(), "E needs 2k < n");
    }

    #[test]
    fn metric_divergence_vanishes() {
        let fam = family("schwarzschild_isotropic", 4, &[("m", 1.0)]);
        let x = [4.0, 2.0, -3.0, 1.0];
        let field = |y: &[f64]| {
            let jet = fam.eval(y);
            DenseTensor::from_fn(4, &[Variance::Lower, Variance::Lower], |idx| {
                jet.g_at(idx[0], idx[1])
            })
        };
        let div = covariant_divergence(&fam, &field, &x, 1e-3, 1).unwrap();
        assert!(div.max_abs() < 1e-9, "{}", div.max_abs());
    }

    #[test]
    fn divergence_residuals_shrink_at_second_order() {
        let fam = family("schwarzschild_isotropic", 4, &[("m", 1.0)]);
        let x = [6.0, 3.0, -2.0, 1.0];
        let k = 1;
        let h = 0.2;
        let p1 = div_p_residual(&fam, k, &x, h).unwrap();
        let p2 = div_p_residual(&fam, k, &x, h / 2.0).unwrap();
        assert!(p1 / p2 > 3.5 && p1 / p2 < 4.5, "P ratio {}", p1 / p2);
        let e1 = div_lovelock_residual(&fam, k, &x, h).unwrap();
        let e2 = div_lovelock_residual(&fam, k, &x, h / 2.0).unwrap();
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "E ratio {}", e1 / e2);
    }
}
