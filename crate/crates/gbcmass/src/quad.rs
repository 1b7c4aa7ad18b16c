//! Quadrature on coordinate spheres and annuli.
//!
//! The sphere rule is a product rule: one Gauss rule per polar cosine and a
//! uniform (half-offset) trapezoid in azimuth. Per polar angle the measure
//! carries `sin^e theta d theta = (1 - t^2)^((e-1)/2) dt`; for odd `e` the
//! weight power is an integer and plain Gauss-Legendre nodes are used, for
//! even `e` the half-integer part is absorbed by Gauss-Chebyshev nodes of
//! the second kind. Integer leftover powers are folded into the node
//! weights. Together with the node symmetry (odd monomial factors cancel
//! exactly) this integrates every polynomial up to the requested degree
//! exactly, which the tests check against closed-form monomial moments.

/// Surface area of the unit sphere `S^(n-1)`, i.e. `2 pi^(n/2) / Gamma(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1);
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// `Gamma(k/2)` for positive integer `k`.
pub(crate) fn gamma_half(k: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, symmetrized exactly.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Chebyshev (second kind) rule: exact for `p(t) sqrt(1-t^2)`.
fn gauss_chebyshev2(n: usize) -> (Vec<f64>, Vec<f64>) {
    let m = n as f64 + 1.0;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 1..=n {
        let th = std::f64::consts::PI * i as f64 / m;
        nodes[i - 1] = th.cos();
        weights[i - 1] = std::f64::consts::PI / m * th.sin() * th.sin();
    }
    (nodes, weights)
}

/// Quadrature nodes (unit vectors) and weights on `S^(n-1)`; weights sum to
/// the sphere area and the rule is exact for polynomials up to `degree`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub dim: usize,
    pub degree: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!(dim >= 2, "sphere quadrature needs n >= 2");
        let degree = degree.max(2);
        // Per polar angle a = 1..n-2 the measure exponent is e = n-1-a.
        let mut polar: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        for a in 1..=(dim - 2) {
            let e = dim - 1 - a;
            let mut npts = (degree + e + 2) / 2;
            if a == 1 && npts % 2 == 1 {
                // The first polar cosine becomes the last coordinate; an
                // even count keeps every node off the x_n = 0 plane, where
                // the adapted-frame construction is discontinuous.
                npts += 1;
            }
            let (t, w) = if e % 2 == 1 {
                let fold = (e - 1) / 2;
                let (t, w) = gauss_legendre(npts);
                let w = t
                    .iter()
                    .zip(w)
                    .map(|(&ti, wi)| wi * (1.0 - ti * ti).powi(fold as i32))
                    .collect();
                (t, w)
            } else {
                let fold = e / 2 - 1;
                let (t, w) = gauss_chebyshev2(npts);
                let w = t
                    .iter()
                    .zip(w)
                    .map(|(&ti, wi)| wi * (1.0 - ti * ti).powi(fold as i32))
                    .collect();
                (t, w)
            };
            polar.push((t, w));
        }
        // Azimuth: half-offset trapezoid, a multiple of 4 so nodes avoid the
        // coordinate axes.
        let m_phi = 4 * (degree + 4).div_ceil(4);
        let dphi = 2.0 * std::f64::consts::PI / m_phi as f64;

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![0usize; polar.len()];
        loop {
            // sines product and partial coordinates for this polar tuple;
            // coordinates are assigned from the last slot downwards so the
            // first (coarsest-spaced) polar cosine is x_n.
            let mut x = vec![0.0; dim];
            let mut sines = 1.0;
            let mut wpolar = 1.0;
            for (a, (t, w)) in polar.iter().enumerate() {
                let ti = t[idx[a]];
                wpolar *= w[idx[a]];
                x[dim - 1 - a] = sines * ti;
                sines *= (1.0 - ti * ti).sqrt();
            }
            for j in 0..m_phi {
                let phi = (j as f64 + 0.5) * dphi;
                x[1] = sines * phi.cos();
                x[0] = sines * phi.sin();
                nodes.extend_from_slice(&x);
                weights.push(wpolar * dphi);
            }
            // advance the polar multi-index
            let mut done = true;
            for a in (0..polar.len()).rev() {
                idx[a] += 1;
                if idx[a] < polar[a].0.len() {
                    done = false;
                    break;
                }
                idx[a] = 0;
            }
            if done {
                break;
            }
        }
        SphereQuadrature {
            dim,
            degree,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Integral of `f` over the unit sphere (sequential).
    pub fn integrate_unit(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.len() {
            s += self.weights[i] * f(self.node(i));
        }
        s
    }
}

/// Integral of `f` over the Euclidean annulus `r0 <= |x| <= r1` against the
/// Lebesgue measure `r^(n-1) dr dsigma`. Radial integration uses
/// Gauss-Legendre panels with geometric splitting. Fold `sqrt(det g)` into
/// `f` for a Riemannian volume integral.
pub fn annulus_integral(
    sphere: &SphereQuadrature,
    r0: f64,
    r1: f64,
    radial_points: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> f64 {
    assert!(r0 > 0.0 && r1 > r0);
    let mut panels = Vec::new();
    let mut a = r0;
    while a * 2.0 < r1 {
        panels.push((a, a * 2.0));
        a *= 2.0;
    }
    panels.push((a, r1));
    let (t, w) = gauss_legendre(radial_points);
    let n = sphere.dim;
    let mut total = 0.0;
    let mut x = vec![0.0; n];
    for (lo, hi) in panels {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for (ti, wi) in t.iter().zip(&w) {
            let r = mid + half * ti;
            let mut shell = 0.0;
            for i in 0..sphere.len() {
                let u = sphere.node(i);
                for c in 0..n {
                    x[c] = r * u[c];
                }
                shell += sphere.weight(i) * f(&x);
            }
            total += wi * half * shell * r.powi(n as i32 - 1);
        }
    }
    total
}

/// Closed-form moment of a monomial over the unit sphere:
/// zero when any exponent is odd, otherwise
/// `2 prod Gamma((b_i + 1)/2) / Gamma((n + sum b)/2)`.
pub fn monomial_moment(exponents: &[usize]) -> f64 {
    if exponents.iter().any(|&b| b % 2 == 1) {
        return 0.0;
    }
    let n = exponents.len();
    let total: usize = exponents.iter().sum();
    let mut num = 2.0;
    for &b in exponents {
        num *= gamma_half(b + 1);
    }
    num / gamma_half(n + total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area(2) - 2.0 * pi).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * pi).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((unit_sphere_area(5) - 8.0 * pi * pi / 3.0).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_basics() {
        let (t, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Exact for degree 15: check t^14.
        let got: f64 = t.iter().zip(&w).map(|(ti, wi)| wi * ti.powi(14)).sum();
        assert!((got - 2.0 / 15.0).abs() < 1e-14);
        // Symmetric nodes.
        for i in 0..4 {
            assert_eq!(t[i], -t[7 - i]);
            assert_eq!(w[i], w[7 - i]);
        }
    }

    #[test]
    fn weights_sum_to_area() {
        for n in 2..=6 {
            let q = SphereQuadrature::new(n, 12);
            let sum: f64 = (0..q.len()).map(|i| q.weight(i)).sum();
            let area = unit_sphere_area(n);
            assert!(
                ((sum - area) / area).abs() < 1e-13,
                "n={n}: {sum} vs {area}"
            );
        }
    }

    #[test]
    fn monomials_integrate_exactly() {
        for n in [3usize, 4, 5] {
            let degree = if n == 5 { 8 } else { 12 };
            let q = SphereQuadrature::new(n, degree);
            let area = unit_sphere_area(n);
            // All exponent tuples with total degree <= degree.
            let mut expo = vec![0usize; n];
            check_all(&q, &mut expo, 0, degree, area);
        }
    }

    fn check_all(q: &SphereQuadrature, expo: &mut Vec<usize>, slot: usize, left: usize, area: f64) {
        if slot == expo.len() {
            let want = monomial_moment(expo);
            let got = q.integrate_unit(|x| {
                let mut v = 1.0;
                for (xi, &b) in x.iter().zip(expo.iter()) {
                    v *= xi.powi(b as i32);
                }
                v
            });
            assert!(
                (got - want).abs() / area < 1e-12,
                "n={} expo {:?}: {} vs {}",
                expo.len(),
                expo,
                got,
                want
            );
            return;
        }
        for b in 0..=left {
            expo[slot] = b;
            check_all(q, expo, slot + 1, left - b, area);
            expo[slot] = 0;
        }
    }

    #[test]
    fn spec_moment_examples() {
        let n = 4;
        let q = SphereQuadrature::new(n, 10);
        let area = unit_sphere_area(n);
        // Constant 1 integrates to the area.
        let one = q.integrate_unit(|_| 1.0);
        assert!(((one - area) / area).abs() < 1e-13);
        // Odd function vanishes.
        let odd = q.integrate_unit(|x| x[0]);
        assert!(odd.abs() < 1e-13);
        // x_1^2 on the unit sphere integrates to area / n.
        let sq = q.integrate_unit(|x| x[0] * x[0]);
        assert!(((sq - area / n as f64) / area).abs() < 1e-13);
    }

    #[test]
    fn nodes_avoid_poles_and_axes() {
        for n in 3..=6 {
            let q = SphereQuadrature::new(n, 16);
            for i in 0..q.len() {
                let x = q.node(i);
                let norm: f64 = x.iter().map(|v| v * v).sum::<f64>();
                assert!((norm - 1.0).abs() < 1e-13);
                // No node sits on a coordinate axis (pole of the chart and
                // of the adapted frame construction).
                for &c in x {
                    assert!(c.abs() < 1.0 - 1e-8, "node on axis: {x:?}");
                }
                // The azimuth offset keeps the first two components nonzero
                // and the even first polar rule keeps x_n well clear of the
                // frame-degenerate plane.
                assert!(x[0].abs() > 1e-12 && x[1].abs() > 1e-12);
                assert!(x[n - 1].abs() > 0.02, "node close to x_n = 0: {x:?}");
            }
        }
    }

    #[test]
    fn annulus_volume() {
        let n = 4;
        let q = SphereQuadrature::new(n, 6);
        let (r0, r1) = (2.0, 10.0);
        let got = annulus_integral(&q, r0, r1, 16, &|_| 1.0);
        let want = unit_sphere_area(n) * (r1.powi(n as i32) - r0.powi(n as i32)) / n as f64;
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
        // A radial power law.
        let got = annulus_integral(&q, r0, r1, 16, &|x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            r2.powf(-1.5)
        });
        let want = unit_sphere_area(n) * (r1 - r0);
        assert!(((got - want) / want).abs() < 1e-11, "{got} vs {want}");
    }
}
