//! Analytic metric families with exact first and second coordinate
//! derivatives.
//!
//! All families live on the asymptotic chart `R^n \ {0}` and are either flat,
//! conformally flat with a radial profile, or a flat metric plus a decaying
//! perturbation built from low-order spherical polynomials. Exact derivatives
//! keep the curvature stack free of finite-difference error; finite
//! differences are used only where a derivative of a *derived* field is
//! needed (connection coefficients, exterior derivatives, divergences).

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("unknown metric family '{0}'")]
    UnknownFamily(String),
    #[error("unknown parameter '{0}' for family '{1}'")]
    UnknownParam(String, String),
    #[error("parameter '{0}' for family '{1}' is invalid: {2}")]
    BadParam(String, String, String),
    #[error("dimension {0} not supported (need {1})")]
    BadDimension(usize, String),
}

/// Metric value and its first two coordinate derivative arrays at a point.
///
/// Layouts: `g[i*n+j]`, `dg[(k*n+i)*n+j] = d_k g_ij`,
/// `d2g[((l*n+k)*n+i)*n+j] = d_l d_k g_ij`.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub dim: usize,
    pub g: Vec<f64>,
    pub dg: Vec<f64>,
    pub d2g: Vec<f64>,
}

impl MetricJet {
    fn flat(n: usize) -> Self {
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            g[i * n + i] = 1.0;
        }
        MetricJet {
            dim: n,
            g,
            dg: vec![0.0; n * n * n],
            d2g: vec![0.0; n * n * n * n],
        }
    }

    #[inline]
    pub fn g_at(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.dim + j]
    }

    #[inline]
    pub fn dg_at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.dg[(k * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn d2g_at(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        self.d2g[((l * self.dim + k) * self.dim + i) * self.dim + j]
    }
}

/// Radial conformal profile: `g = F(r) * delta` with closed-form `F`, `F'`,
/// `F''`.
#[derive(Debug, Clone, PartialEq)]
enum Profile {
    /// `F = (1 + m / (2 r^(n-2)))^(4/(n-2))`, scalar-flat for every n.
    Schwarzschild { mass: f64, n: usize },
    /// `F = (1 + c r^(-q))^p`.
    ConformalRadial { p: f64, c: f64, q: f64 },
    /// `F = 4 (1 + kappa r^2)^(-2)`, the stereographic round metric of
    /// sectional curvature `kappa`.
    ConstantCurvature { kappa: f64 },
}

impl Profile {
    /// `(F, F', F'')` at radius `r`.
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        match *self {
            Profile::Schwarzschild { mass, n } => {
                let e = 4.0 / (n as f64 - 2.0);
                let u = 0.5 * mass * r.powf(2.0 - n as f64);
                let du = 0.5 * mass * (2.0 - n as f64) * r.powf(1.0 - n as f64);
                let ddu = 0.5 * mass * (2.0 - n as f64) * (1.0 - n as f64) * r.powf(-(n as f64));
                powered_profile(1.0 + u, du, ddu, e)
            }
            Profile::ConformalRadial { p, c, q } => {
                let u = c * r.powf(-q);
                let du = -q * c * r.powf(-q - 1.0);
                let ddu = q * (q + 1.0) * c * r.powf(-q - 2.0);
                powered_profile(1.0 + u, du, ddu, p)
            }
            Profile::ConstantCurvature { kappa } => {
                let w = 1.0 + kappa * r * r;
                let f = 4.0 * w.powi(-2);
                let df = -16.0 * kappa * r * w.powi(-3);
                let ddf = -16.0 * kappa * w.powi(-3) + 96.0 * kappa * kappa * r * r * w.powi(-4);
                (f, df, ddf)
            }
        }
    }
}

/// Chain rule for `F = base^e` given `(base, base', base'')`.
fn powered_profile(base: f64, db: f64, ddb: f64, e: f64) -> (f64, f64, f64) {
    let f = base.powf(e);
    let df = e * base.powf(e - 1.0) * db;
    let ddf = e * (e - 1.0) * base.powf(e - 2.0) * db * db + e * base.powf(e - 1.0) * ddb;
    (f, df, ddf)
}

/// Coefficients of the random asymptotically flat perturbation
/// `sigma_ij = amplitude * r^(-tau) * S_ij(x/r)` with `S` a symmetric matrix
/// of polynomials of degree <= 2 on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
struct AfCoeffs {
    /// `c0[i][j]`
    c0: Vec<f64>,
    /// `c1[(i,j)][m]`
    c1: Vec<f64>,
    /// `c2[(i,j)][m][p]`, symmetric in `(m, p)`
    c2: Vec<f64>,
}

impl AfCoeffs {
    fn generate(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Normalize so |S_ij| <= 1 on the unit sphere.
        let scale = 1.0 / (1.0 + n as f64 + (n * n) as f64 / 2.0);
        let mut c0 = vec![0.0; n * n];
        let mut c1 = vec![0.0; n * n * n];
        let mut c2 = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.gen_range(-1.0..1.0) * scale;
                c0[i * n + j] = v;
                c0[j * n + i] = v;
                for m in 0..n {
                    let v = rng.gen_range(-1.0..1.0) * scale;
                    c1[(i * n + j) * n + m] = v;
                    c1[(j * n + i) * n + m] = v;
                }
                for m in 0..n {
                    for p in m..n {
                        let v = rng.gen_range(-1.0..1.0) * scale * 0.5;
                        for (a, b) in [(i, j), (j, i)] {
                            c2[((a * n + b) * n + m) * n + p] = v;
                            c2[((a * n + b) * n + p) * n + m] = v;
                        }
                    }
                }
            }
        }
        AfCoeffs { c0, c1, c2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Flat,
    RadialConformal(Profile),
    RandomAf {
        amplitude: f64,
        tau: f64,
        coeffs: AfCoeffs,
    },
    /// Pulled back along the linear coordinate change `x -> Q x`.
    Rotated {
        inner: Box<MetricFamily>,
        q: Vec<f64>,
    },
}

/// A named analytic metric with exact component functions and exact first
/// and second coordinate derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricFamily {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    decay_tau: Option<f64>,
    kind: Kind,
}

impl MetricFamily {
    /// Builds one of the named families. Recognized names and parameters:
    ///
    /// - `flat` — no parameters;
    /// - `schwarzschild_isotropic` — `m` (default 1);
    /// - `conformal_radial` — `p`, `c`, `q` (defaults 1, 1, 1);
    /// - `random_af` — `amplitude` (default 0.1), `tau` (default n-2),
    ///   `seed` (default 0);
    /// - `constant_curvature` — `kappa` (default 1).
    pub fn make(
        name: &str,
        dim: usize,
        params: &BTreeMap<String, f64>,
    ) -> Result<MetricFamily, MetricError> {
        if dim < 2 {
            return Err(MetricError::BadDimension(dim, "n >= 2".into()));
        }
        let allow = |allowed: &[&str]| -> Result<(), MetricError> {
            for k in params.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(MetricError::UnknownParam(k.clone(), name.to_string()));
                }
            }
            Ok(())
        };
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let (kind, decay_tau) = match name {
            "flat" => {
                allow(&[])?;
                (Kind::Flat, None)
            }
            "schwarzschild_isotropic" => {
                allow(&["m"])?;
                if dim < 3 {
                    return Err(MetricError::BadDimension(dim, "n >= 3".into()));
                }
                let mass = get("m", 1.0);
                if mass < 0.0 {
                    return Err(MetricError::BadParam(
                        "m".into(),
                        name.into(),
                        "must be nonnegative".into(),
                    ));
                }
                (
                    Kind::RadialConformal(Profile::Schwarzschild { mass, n: dim }),
                    Some(dim as f64 - 2.0),
                )
            }
            "conformal_radial" => {
                allow(&["p", "c", "q"])?;
                let (p, c, q) = (get("p", 1.0), get("c", 1.0), get("q", 1.0));
                if q <= 0.0 {
                    return Err(MetricError::BadParam(
                        "q".into(),
                        name.into(),
                        "decay exponent must be positive".into(),
                    ));
                }
                (
                    Kind::RadialConformal(Profile::ConformalRadial { p, c, q }),
                    Some(q),
                )
            }
            "random_af" => {
                allow(&["amplitude", "tau", "seed"])?;
                let amplitude = get("amplitude", 0.1);
                let tau = get("tau", dim as f64 - 2.0);
                if tau <= 0.0 {
                    return Err(MetricError::BadParam(
                        "tau".into(),
                        name.into(),
                        "decay order must be positive".into(),
                    ));
                }
                let seed = get("seed", 0.0) as u64;
                (
                    Kind::RandomAf {
                        amplitude,
                        tau,
                        coeffs: AfCoeffs::generate(dim, seed),
                    },
                    Some(tau),
                )
            }
            "constant_curvature" => {
                allow(&["kappa"])?;
                (
                    Kind::RadialConformal(Profile::ConstantCurvature {
                        kappa: get("kappa", 1.0),
                    }),
                    None,
                )
            }
            other => return Err(MetricError::UnknownFamily(other.to_string())),
        };
        Ok(MetricFamily {
            name: name.to_string(),
            dim,
            params: params.clone(),
            decay_tau,
            kind,
        })
    }

    /// The same metric pulled back along the rotation `x -> Q x` (row-major
    /// `q`, orthogonal). Extrapolated masses must be invariant under this.
    pub fn rotated(&self, q: &[f64]) -> MetricFamily {
        assert_eq!(q.len(), self.dim * self.dim);
        MetricFamily {
            name: format!("{}(rotated)", self.name),
            dim: self.dim,
            params: self.params.clone(),
            decay_tau: self.decay_tau,
            kind: Kind::Rotated {
                inner: Box::new(self.clone()),
                q: q.to_vec(),
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Declared decay order of the perturbation; `None` for families that
    /// are not asymptotically flat in the chart (flat itself, compact
    /// models).
    pub fn decay_tau(&self) -> Option<f64> {
        self.decay_tau
    }

    /// Metric, first, and second derivatives at a chart point (not the
    /// origin).
    pub fn eval(&self, x: &[f64]) -> MetricJet {
        let n = self.dim;
        assert_eq!(x.len(), n);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!(r2 > 0.0, "metric families are evaluated away from the origin");
        let r = r2.sqrt();
        match &self.kind {
            Kind::Flat => MetricJet::flat(n),
            Kind::RadialConformal(profile) => {
                let (f, df, ddf) = profile.eval(r);
                let mut jet = MetricJet::flat(n);
                for i in 0..n {
                    jet.g[i * n + i] = f;
                }
                for k in 0..n {
                    let dkf = df * x[k] / r;
                    for i in 0..n {
                        jet.dg[(k * n + i) * n + i] = dkf;
                    }
                }
                for l in 0..n {
                    for k in 0..n {
                        let kl = if k == l { 1.0 } else { 0.0 };
                        let dd = ddf * x[k] * x[l] / r2 + df * (kl / r - x[k] * x[l] / (r2 * r));
                        for i in 0..n {
                            jet.d2g[((l * n + k) * n + i) * n + i] = dd;
                        }
                    }
                }
                jet
            }
            Kind::RandomAf {
                amplitude,
                tau,
                coeffs,
            } => self.eval_random_af(x, r, *amplitude, *tau, coeffs),
            Kind::Rotated { inner, q } => {
                let mut y = vec![0.0; n];
                for a in 0..n {
                    for b in 0..n {
                        y[a] += q[a * n + b] * x[b];
                    }
                }
                let jet = inner.eval(&y);
                let mut out = MetricJet::flat(n);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for a in 0..n {
                            for b in 0..n {
                                s += q[a * n + i] * q[b * n + j] * jet.g_at(a, b);
                            }
                        }
                        out.g[i * n + j] = s;
                    }
                }
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            let mut s = 0.0;
                            for c in 0..n {
                                let qck = q[c * n + k];
                                if qck == 0.0 {
                                    continue;
                                }
                                for a in 0..n {
                                    for b in 0..n {
                                        s += q[a * n + i] * q[b * n + j] * qck * jet.dg_at(c, a, b);
                                    }
                                }
                            }
                            out.dg[(k * n + i) * n + j] = s;
                        }
                    }
                }
                for l in 0..n {
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                let mut s = 0.0;
                                for d in 0..n {
                                    let qdl = q[d * n + l];
                                    if qdl == 0.0 {
                                        continue;
                                    }
                                    for c in 0..n {
                                        let qck = q[c * n + k];
                                        if qck == 0.0 {
                                            continue;
                                        }
                                        for a in 0..n {
                                            for b in 0..n {
                                                s += q[a * n + i]
                                                    * q[b * n + j]
                                                    * qck
                                                    * qdl
                                                    * jet.d2g_at(d, c, a, b);
                                            }
                                        }
                                    }
                                }
                                out.d2g[((l * n + k) * n + i) * n + j] = s;
                            }
                        }
                    }
                }
                out
            }
        }
    }

    fn eval_random_af(
        &self,
        x: &[f64],
        r: f64,
        amplitude: f64,
        tau: f64,
        coeffs: &AfCoeffs,
    ) -> MetricJet {
        let n = self.dim;
        // Radial powers r^(-tau - j) for j = 0, 1, 2 and their derivative
        // combinations; for a term W(x) r^rho:
        //   d_k (W r^rho)      = W_k r^rho + rho W x_k r^(rho-2)
        //   d_l d_k (W r^rho)  = W_kl r^rho + rho (W_k x_l + W_l x_k) r^(rho-2)
        //                        + W (rho delta_kl r^(rho-2)
        //                           + rho (rho-2) x_k x_l r^(rho-4))
        let base = r.powf(-tau);
        let rp = |j: i32| base * r.powi(-j); // r^(-tau-j)
        let mut jet = MetricJet::flat(n);
        for i in 0..n {
            for j in 0..n {
                let ij = i * n + j;
                // Degree-0 part: W = c0, rho = -tau.
                {
                    let c = amplitude * coeffs.c0[ij];
                    if c != 0.0 {
                        let rho = -tau;
                        let p = rp(0);
                        let pm2 = rp(2);
                        let pm4 = rp(4);
                        jet.g[ij] += c * p;
                        for k in 0..n {
                            jet.dg[(k * n + i) * n + j] += c * rho * x[k] * pm2;
                        }
                        for l in 0..n {
                            for k in 0..n {
                                let kl = if k == l { 1.0 } else { 0.0 };
                                jet.d2g[((l * n + k) * n + i) * n + j] +=
                                    c * (rho * kl * pm2 + rho * (rho - 2.0) * x[k] * x[l] * pm4);
                            }
                        }
                    }
                }
                // Degree-1 part: W = x_m, rho = -tau - 1.
                for m in 0..n {
                    let c = amplitude * coeffs.c1[ij * n + m];
                    if c == 0.0 {
                        continue;
                    }
                    let rho = -tau - 1.0;
                    let p = rp(1);
                    let pm2 = rp(3);
                    let pm4 = rp(5);
                    jet.g[ij] += c * x[m] * p;
                    for k in 0..n {
                        let wk = if k == m { 1.0 } else { 0.0 };
                        jet.dg[(k * n + i) * n + j] += c * (wk * p + rho * x[m] * x[k] * pm2);
                    }
                    for l in 0..n {
                        for k in 0..n {
                            let wk = if k == m { 1.0 } else { 0.0 };
                            let wl = if l == m { 1.0 } else { 0.0 };
                            let kl = if k == l { 1.0 } else { 0.0 };
                            jet.d2g[((l * n + k) * n + i) * n + j] += c
                                * (rho * (wk * x[l] + wl * x[k]) * pm2
                                    + x[m] * (rho * kl * pm2
                                        + rho * (rho - 2.0) * x[k] * x[l] * pm4));
                        }
                    }
                }
                // Degree-2 part: W = x_m x_p, rho = -tau - 2.
                for m in 0..n {
                    for p_idx in 0..n {
                        let c = amplitude * coeffs.c2[(ij * n + m) * n + p_idx];
                        if c == 0.0 {
                            continue;
                        }
                        let rho = -tau - 2.0;
                        let p = rp(2);
                        let pm2 = rp(4);
                        let pm4 = rp(6);
                        let w = x[m] * x[p_idx];
                        jet.g[ij] += c * w * p;
                        for k in 0..n {
                            let wk = (k == m) as i32 as f64 * x[p_idx]
                                + (k == p_idx) as i32 as f64 * x[m];
                            jet.dg[(k * n + i) * n + j] += c * (wk * p + rho * w * x[k] * pm2);
                        }
                        for l in 0..n {
                            for k in 0..n {
                                let wk = (k == m) as i32 as f64 * x[p_idx]
                                    + (k == p_idx) as i32 as f64 * x[m];
                                let wl = (l == m) as i32 as f64 * x[p_idx]
                                    + (l == p_idx) as i32 as f64 * x[m];
                                let wkl = ((k == m && l == p_idx) as i32
                                    + (k == p_idx && l == m) as i32)
                                    as f64;
                                let kl = if k == l { 1.0 } else { 0.0 };
                                jet.d2g[((l * n + k) * n + i) * n + j] += c
                                    * (wkl * p
                                        + rho * (wk * x[l] + wl * x[k]) * pm2
                                        + w * (rho * kl * pm2
                                            + rho * (rho - 2.0) * x[k] * x[l] * pm4));
                            }
                        }
                    }
                }
            }
        }
        jet
    }

    /// Max of `|sigma| + r |d sigma| + r^2 |d^2 sigma|` times `r^tau` over
    /// the perturbation components at `x`; the decay constant witnessed at
    /// that point. Returns `None` for families without a declared decay.
    pub fn decay_constant_at(&self, x: &[f64]) -> Option<f64> {
        let tau = self.decay_tau?;
        let n = self.dim;
        let jet = self.eval(x);
        let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let sigma = (jet.g_at(i, j) - if i == j { 1.0 } else { 0.0 }).abs();
                let mut d1: f64 = 0.0;
                let mut d2: f64 = 0.0;
                for k in 0..n {
                    d1 = d1.max(jet.dg_at(k, i, j).abs());
                    for l in 0..n {
                        d2 = d2.max(jet.d2g_at(l, k, i, j).abs());
                    }
                }
                worst = worst.max(sigma + r * d1 + r * r * d2);
            }
        }
        Some(worst * r.powf(tau))
    }
}

/// Compares the analytic first and second derivatives against central finite
/// differences of step `h`; returns `(max residual in dg, max residual in
/// d2g)`. Both are `O(h^2)` for the analytic families.
pub fn fd_validate(family: &MetricFamily, x: &[f64], h: f64) -> (f64, f64) {
    let n = family.dim();
    let jet = family.eval(x);
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    let mut xp = x.to_vec();
    for k in 0..n {
        xp.copy_from_slice(x);
        xp[k] = x[k] + h;
        let plus = family.eval(&xp);
        xp[k] = x[k] - h;
        let minus = family.eval(&xp);
        for i in 0..n {
            for j in 0..n {
                let fd = (plus.g_at(i, j) - minus.g_at(i, j)) / (2.0 * h);
                r1 = r1.max((fd - jet.dg_at(k, i, j)).abs());
                for l in 0..n {
                    let fd2 = (plus.dg_at(l, i, j) - minus.dg_at(l, i, j)) / (2.0 * h);
                    r2 = r2.max((fd2 - jet.d2g_at(k, l, i, j)).abs());
                }
            }
        }
    }
    (r1, r2)
}

/// Deterministic sample of chart points with radii in `r_range`, used by the
/// pointwise identity checks. Directions stay clear of the `x_n = 0` plane,
/// where the adapted-frame field of the frame module is discontinuous.
pub fn random_chart_points(
    dim: usize,
    count: usize,
    r_range: (f64, f64),
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15));
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-3 || dir[dim - 1].abs() < 0.15 * norm {
            continue;
        }
        let r = rng.gen_range(r_range.0..r_range.1);
        out.push(dir.iter().map(|v| v / norm * r).collect());
    }
    out
}

/// A fixed orthogonal matrix (a product of plane rotations) used by the
/// coordinate-invariance checks.
pub fn standard_rotation(n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let apply = |q: &mut Vec<f64>, a: usize, b: usize, angle: f64| {
        let (s, c) = angle.sin_cos();
        for col in 0..n {
            let va = q[a * n + col];
            let vb = q[b * n + col];
            q[a * n + col] = c * va - s * vb;
            q[b * n + col] = s * va + c * vb;
        }
    };
    apply(&mut q, 0, 1, 0.7);
    if n > 2 {
        apply(&mut q, 1, 2, 0.3);
    }
    if n > 3 {
        apply(&mut q, 0, 3, -0.45);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(name: &str, dim: usize, kv: &[(&str, f64)]) -> MetricFamily {
        let params: BTreeMap<String, f64> =
            kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        MetricFamily::make(name, dim, &params).unwrap()
    }

    #[test]
    fn flat_is_identity_with_zero_derivatives() {
        let fam = family("flat", 4, &[]);
        let jet = fam.eval(&[1.0, 2.0, -0.5, 3.0]);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(jet.g_at(i, j), want);
            }
        }
        assert!(jet.dg.iter().all(|&v| v == 0.0));
        assert!(jet.d2g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schwarzschild_value_by_direct_substitution() {
        let fam = family("schwarzschild_isotropic", 3, &[("m", 1.0)]);
        let jet = fam.eval(&[2.0, 0.0, 0.0]);
        let want = (1.0 + 1.0 / 4.0_f64).powi(4);
        assert!((jet.g_at(0, 0) - want).abs() < 1e-14);
        assert!((jet.g_at(1, 1) - want).abs() < 1e-14);
        assert!(jet.g_at(0, 1).abs() < 1e-14);
    }

    #[test]
    fn fd_residual_second_order() {
        let fam = family("schwarzschild_isotropic", 3, &[("m", 1.0)]);
        let x = [3.0, 1.0, -2.0];
        let (a1, a2) = fd_validate(&fam, &x, 1e-2);
        let (b1, b2) = fd_validate(&fam, &x, 5e-3);
        // Central differences: quartering the residual when the step halves.
        assert!(a1 / b1 > 3.0 && a1 / b1 < 5.0, "ratio {}", a1 / b1);
        assert!(a2 / b2 > 3.0 && a2 / b2 < 5.0, "ratio {}", a2 / b2);
    }

    #[test]
    fn fd_residual_small_for_conformal_radial() {
        let fam = family("conformal_radial", 4, &[("p", 1.5), ("c", 0.8), ("q", 1.2)]);
        let x = [10.0, 0.0, 0.0, 0.0];
        let (r1, r2) = fd_validate(&fam, &x, 1e-3);
        assert!(r1 < 1e-6, "dg residual {r1}");
        assert!(r2 < 1e-6, "d2g residual {r2}");
    }

    #[test]
    fn random_af_deterministic_in_seed() {
        let a = family("random_af", 4, &[("seed", 5.0)]);
        let b = family("random_af", 4, &[("seed", 5.0)]);
        let c = family("random_af", 4, &[("seed", 6.0)]);
        let x = [4.0, -1.0, 2.0, 0.5];
        assert_eq!(a.eval(&x).g, b.eval(&x).g);
        assert_ne!(a.eval(&x).g, c.eval(&x).g);
        let (r1, r2) = fd_validate(&a, &x, 1e-3);
        assert!(r1 < 1e-6 && r2 < 1e-6, "{r1} {r2}");
    }

    #[test]
    fn decay_bound_holds_at_increasing_radii() {
        for (name, kv) in [
            ("schwarzschild_isotropic", vec![("m", 1.0)]),
            ("conformal_radial", vec![("p", 1.0), ("c", 0.5), ("q", 0.6)]),
            ("random_af", vec![("seed", 2.0)]),
        ] {
            let fam = family(name, 4, &kv);
            let dir = [0.6, -0.4, 0.8, 0.2];
            let norm: f64 = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut consts = Vec::new();
            for r in [10.0, 100.0, 1000.0] {
                let x: Vec<f64> = dir.iter().map(|v| v / norm * r).collect();
                consts.push(fam.decay_constant_at(&x).unwrap());
            }
            // The witnessed constant must stay bounded as r grows.
            let c0 = consts[0].max(1e-30);
            for &c in &consts[1..] {
                assert!(c <= 1.6 * c0, "{name}: constants {consts:?}");
            }
        }
    }

    #[test]
    fn unknown_family_and_param_rejected() {
        let params = BTreeMap::new();
        assert!(matches!(
            MetricFamily::make("torus", 3, &params),
            Err(MetricError::UnknownFamily(_))
        ));
        let mut params = BTreeMap::new();
        params.insert("mass".to_string(), 1.0);
        assert!(matches!(
            MetricFamily::make("schwarzschild_isotropic", 3, &params),
            Err(MetricError::UnknownParam(k, _)) if k == "mass"
        ));
    }

    #[test]
    fn rotation_is_an_isometry_of_components() {
        let fam = family("random_af", 3, &[("seed", 9.0)]);
        let q = standard_rotation(3);
        let rot = fam.rotated(&q);
        // Check the pullback identity g'(x) = Q^T g(Qx) Q at a point.
        let x = [3.0, 2.0, -1.0];
        let mut y = [0.0; 3];
        for a in 0..3 {
            for b in 0..3 {
                y[a] += q[a * 3 + b] * x[b];
            }
        }
        let jet_rot = rot.eval(&x);
        let jet_orig = fam.eval(&y);
        for i in 0..3 {
            for j in 0..3 {
                let mut want = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        want += q[a * 3 + i] * q[b * 3 + j] * jet_orig.g_at(a, b);
                    }
                }
                assert!((jet_rot.g_at(i, j) - want).abs() < 1e-14);
            }
        }
        // Derivatives of the rotated family still pass FD validation.
        let (r1, r2) = fd_validate(&rot, &x, 1e-3);
        assert!(r1 < 1e-6 && r2 < 1e-6);
    }
}
