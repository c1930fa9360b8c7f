//! Gauss–Jacobi rules and product rules on the ball and simplex.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};

/// Largest rule (in nodes) that `quadrature` will build.
pub const MAX_NODES: usize = 4_000_000;

/// Recurrence coefficients of the orthonormal Jacobi polynomials for the weight
/// `(1-x)^α (1+x)^β` on `[-1, 1]`:
/// `a_{k+1} p_{k+1} = (x - b_k) p_k - a_k p_{k-1}`, `p₀ = 1/√μ₀`.
#[derive(Clone, Debug)]
pub struct JacobiRecurrence {
    pub alpha: f64,
    pub beta: f64,
    /// `b_0 .. b_{n-1}`.
    pub b: Vec<f64>,
    /// `a_0 = 0, a_1 .. a_n`.
    pub a: Vec<f64>,
    /// Total mass `μ₀ = ∫ w`.
    pub mu0: f64,
}

impl JacobiRecurrence {
    /// Coefficients sufficient to generate `p_0 .. p_n`.
    pub fn new(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::Parameter(format!(
                "Jacobi weight needs α, β > −1, got α={alpha}, β={beta}"
            )));
        }
        let s = alpha + beta;
        let mut b = Vec::with_capacity(n);
        let mut a = vec![0.0; n + 1];
        for k in 0..n {
            let kf = k as f64;
            b.push(if k == 0 {
                (beta - alpha) / (s + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
            });
        }
        for (k, ak) in a.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let a2 = if k == 1 {
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + s).powi(2) * (3.0 + s))
            } else {
                let m = 2.0 * kf + s;
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + s) / (m * m * (m + 1.0) * (m - 1.0))
            };
            *ak = a2.sqrt();
        }
        Ok(Self {
            alpha,
            beta,
            b,
            a,
            mu0: jacobi_mass(alpha, beta),
        })
    }

    /// Number of polynomials beyond `p₀` the coefficients support.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Values `p_0(x) .. p_m(x)`.
    pub fn eval_all(&self, x: f64, m: usize) -> Vec<f64> {
        let mut p = Vec::with_capacity(m + 1);
        p.push(1.0 / self.mu0.sqrt());
        if m >= 1 {
            p.push((x - self.b[0]) * p[0] / self.a[1]);
        }
        for k in 1..m {
            let next = ((x - self.b[k]) * p[k] - self.a[k] * p[k - 1]) / self.a[k + 1];
            p.push(next);
        }
        p
    }

    /// `(p_m(x), p_m'(x), Σ_{k<m} p_k(x)²)`.
    fn eval_with_derivative(&self, x: f64, m: usize) -> (f64, f64, f64) {
        let mut p_prev = 0.0;
        let mut p = 1.0 / self.mu0.sqrt();
        let mut d_prev = 0.0;
        let mut d = 0.0;
        let mut sum = 0.0;
        for k in 0..m {
            sum += p * p;
            let p_next = ((x - self.b[k]) * p - self.a[k] * p_prev) / self.a[k + 1];
            let d_next = (p + (x - self.b[k]) * d - self.a[k] * d_prev) / self.a[k + 1];
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d, sum)
    }
}

/// `∫_{-1}^{1} (1-x)^α (1+x)^β dx = 2^{α+β+1} B(α+1, β+1)`.
pub fn jacobi_mass(alpha: f64, beta: f64) -> f64 {
    ((alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_beta(alpha + 1.0, beta + 1.0)).exp()
}

/// `m`-point Gauss–Jacobi rule on `[-1, 1]`, nodes ascending.
///
/// Nodes come from the Jacobi matrix eigenvalues and are then refined by Newton
/// steps on the orthonormal recurrence; weights are the reciprocal Christoffel
/// function `1 / Σ_{k<m} p_k(x)²`.
pub fn gauss_jacobi(alpha: f64, beta: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m == 0 {
        return Err(argument("Gauss–Jacobi rule needs at least one node"));
    }
    let rec = JacobiRecurrence::new(alpha, beta, m)?;
    let jm = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            rec.b[i]
        } else if i + 1 == j {
            rec.a[j]
        } else if j + 1 == i {
            rec.a[i]
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jm).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let mut weights = Vec::with_capacity(m);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, d, _) = rec.eval_with_derivative(*x, m);
            let step = p / d;
            if !step.is_finite() {
                break;
            }
            *x = (*x - step).clamp(-1.0, 1.0);
            if step.abs() <= 1e-16 * x.abs().max(1e-3) {
                break;
            }
        }
        let (_, _, sum) = rec.eval_with_derivative(*x, m);
        weights.push(1.0 / sum);
    }
    Ok((nodes, weights))
}

/// `m`-point rule on `[0, 1]` for the weight `u^p (1-u)^q`.
pub fn gauss_jacobi_unit(p: f64, q: f64, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, w) = gauss_jacobi(q, p, m)?;
    let scale = (-(p + q + 1.0) * std::f64::consts::LN_2).exp();
    Ok((
        x.iter().map(|v| (v + 1.0) / 2.0).collect(),
        w.iter().map(|v| v * scale).collect(),
    ))
}

/// A positive-weight cubature rule for `dμ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ w_i f(x_i)`.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

fn points_for(degree: usize) -> usize {
    degree / 2 + 1
}

/// Rule on `S^{d-1} ⊂ R^d` exact for polynomials of degree `≤ degree`, with
/// surface measure. Built recursively from `S⁰ = {±1}`.
pub(crate) fn sphere_rule(d: usize, degree: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if d == 1 {
        return Ok((vec![vec![1.0], vec![-1.0]], vec![1.0, 1.0]));
    }
    let g = (d as f64 - 3.0) / 2.0;
    let (t, wt) = gauss_jacobi(g, g, points_for(degree))?;
    let (inner, winner) = sphere_rule(d - 1, degree)?;
    let mut nodes = Vec::with_capacity(t.len() * inner.len());
    let mut weights = Vec::with_capacity(t.len() * inner.len());
    for (ti, wi) in t.iter().zip(&wt) {
        let s = (1.0 - ti * ti).max(0.0).sqrt();
        for (om, wo) in inner.iter().zip(&winner) {
            let mut p = Vec::with_capacity(d);
            p.push(*ti);
            p.extend(om.iter().map(|v| s * v));
            nodes.push(p);
            weights.push(wi * wo);
        }
    }
    Ok((nodes, weights))
}

/// Number of nodes [`quadrature`] would produce.
pub fn rule_size(spec: &DomainSpec, exact_degree: usize) -> usize {
    let m = points_for(exact_degree);
    let n = spec.dim();
    match spec.kind() {
        DomainKind::Interval => m,
        DomainKind::Ball => {
            let radial = points_for(exact_degree / 2);
            let sphere = 2usize.saturating_mul(m.saturating_pow(n.saturating_sub(1) as u32));
            radial.saturating_mul(sphere)
        }
        DomainKind::Simplex => m.saturating_pow(n as u32),
    }
}

/// Positive-weight rule exact for polynomials of degree `≤ exact_degree` against `dμ`.
pub fn quadrature(spec: &DomainSpec, exact_degree: usize) -> Result<QuadratureRule> {
    let size = rule_size(spec, exact_degree);
    if size > MAX_NODES {
        return Err(Error::Capacity(format!(
            "a degree-{exact_degree} rule on {} needs {size} nodes (limit {MAX_NODES}); lower the degree",
            spec.label()
        )));
    }
    let m = points_for(exact_degree);
    let n = spec.dim();
    let p = spec.params();
    let (nodes, weights) = match spec.kind() {
        DomainKind::Interval => {
            let (x, w) = gauss_jacobi(p[0], p[1], m)?;
            (x.into_iter().map(|v| vec![v]).collect(), w)
        }
        DomainKind::Ball => {
            // x = √s ω with weight ½ s^{n/2-1} (1-s)^{γ-1/2} ds dω
            let (s, ws) = gauss_jacobi_unit(n as f64 / 2.0 - 1.0, p[0] - 0.5, points_for(exact_degree / 2))?;
            let (om, wo) = sphere_rule(n, exact_degree)?;
            let mut nodes = Vec::with_capacity(size);
            let mut weights = Vec::with_capacity(size);
            for (si, wi) in s.iter().zip(&ws) {
                let r = si.sqrt();
                for (o, w) in om.iter().zip(&wo) {
                    nodes.push(o.iter().map(|v| r * v).collect());
                    weights.push(0.5 * wi * w);
                }
            }
            (nodes, weights)
        }
        DomainKind::Simplex => {
            // x_j = u_j ∏_{i<j} (1-u_i)
            let mut factors = Vec::with_capacity(n);
            for j in 0..n {
                let tail: f64 = p[j + 1..].iter().map(|k| k + 0.5).sum();
                factors.push(gauss_jacobi_unit(p[j] - 0.5, tail - 1.0, m)?);
            }
            let mut nodes = vec![Vec::with_capacity(n)];
            let mut rest = vec![1.0];
            let mut weights = vec![1.0];
            for (u, wu) in &factors {
                let mut nn = Vec::with_capacity(nodes.len() * u.len());
                let mut nr = Vec::with_capacity(nodes.len() * u.len());
                let mut nw = Vec::with_capacity(nodes.len() * u.len());
                for ((x, r), w) in nodes.iter().zip(&rest).zip(&weights) {
                    for (ui, wi) in u.iter().zip(wu) {
                        let mut y: Vec<f64> = x.clone();
                        y.push(r * ui);
                        nn.push(y);
                        nr.push(r * (1.0 - ui));
                        nw.push(w * wi);
                    }
                }
                nodes = nn;
                rest = nr;
                weights = nw;
            }
            (nodes, weights)
        }
    };
    Ok(QuadratureRule {
        nodes,
        weights,
        exact_degree,
    })
}

/// `ln μ(X)` in closed form.
pub fn ln_total_mass(spec: &DomainSpec) -> f64 {
    let p = spec.params();
    match spec.kind() {
        DomainKind::Interval => jacobi_mass(p[0], p[1]).ln(),
        DomainKind::Ball => {
            let h = spec.dim() as f64 / 2.0;
            // ½ B(γ+½, n/2) |S^{n-1}|, |S^{n-1}| = 2π^{n/2}/Γ(n/2)
            ln_beta(p[0] + 0.5, h) + h * std::f64::consts::PI.ln() - ln_gamma(h)
        }
        DomainKind::Simplex => (0..spec.dim())
            .map(|i| {
                let tail: f64 = p[i + 1..].iter().map(|k| k + 0.5).sum();
                ln_beta(p[i] + 0.5, tail)
            })
            .sum(),
    }
}

/// `μ(X)` in closed form.
pub fn total_mass(spec: &DomainSpec) -> f64 {
    ln_total_mass(spec).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiIndex;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    // Independent moment oracles via Gamma-function products.
    fn simplex_moment(kappa: &[f64], a: &[u32]) -> f64 {
        let mut num = 0.0;
        let mut tot = 0.0;
        for (i, k) in kappa.iter().enumerate() {
            let e = k + 0.5 + a.get(i).map_or(0.0, |&v| f64::from(v));
            num += ln_gamma(e);
            tot += e;
        }
        (num - ln_gamma(tot)).exp()
    }

    fn ball_moment(n: usize, gamma: f64, a: &[u32]) -> f64 {
        if a.iter().any(|v| v % 2 == 1) {
            return 0.0;
        }
        let deg: u32 = a.iter().sum();
        let mut s = ln_gamma(gamma + 0.5);
        for &ai in a {
            s += ln_gamma((f64::from(ai) + 1.0) / 2.0);
        }
        s -= ln_gamma(f64::from(deg) / 2.0 + n as f64 / 2.0 + gamma + 0.5);
        s.exp()
    }

    // (m+α+β+2) M_{m+1} = m M_{m-1} + (β-α) M_m, from integrating
    // d/dx[x^m (1-x²) w] over [-1, 1].
    fn interval_moments_oracle(alpha: f64, beta: f64, top: usize) -> Vec<f64> {
        let mut mom = vec![jacobi_mass(alpha, beta)];
        mom.push((beta - alpha) / (alpha + beta + 2.0) * mom[0]);
        for m in 1..top {
            let mf = m as f64;
            let next = (mf * mom[m - 1] + (beta - alpha) * mom[m]) / (mf + alpha + beta + 2.0);
            mom.push(next);
        }
        mom
    }

    fn monomial(x: &[f64], a: &[u32]) -> f64 {
        x.iter().zip(a).map(|(v, &e)| v.powi(e as i32)).product()
    }

    #[test]
    fn mass_examples() {
        let i = DomainSpec::interval(-0.5, -0.5).unwrap();
        let q = quadrature(&i, 0).unwrap();
        assert_relative_eq!(q.weights.iter().sum::<f64>(), PI, max_relative = 1e-14);
        assert_relative_eq!(total_mass(&i), PI, max_relative = 1e-14);
        let b = DomainSpec::ball(1, 0.5).unwrap();
        assert_relative_eq!(
            quadrature(&b, 4).unwrap().weights.iter().sum::<f64>(),
            2.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(total_mass(&b), 2.0, max_relative = 1e-14);
        let s = DomainSpec::simplex(vec![0.5, 0.5]).unwrap();
        assert_relative_eq!(
            quadrature(&s, 3).unwrap().weights.iter().sum::<f64>(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(total_mass(&s), 1.0, max_relative = 1e-14);
        let b2 = DomainSpec::ball(2, 0.5).unwrap();
        assert_relative_eq!(total_mass(&b2), PI, max_relative = 1e-14);
    }

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_jacobi(0.0, 0.0, 2).unwrap();
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_jacobi(-0.5, -0.5, 5).unwrap();
        for (k, (xi, wi)) in x.iter().zip(&w).enumerate() {
            let th = PI * (2.0 * (4 - k) as f64 + 1.0) / 10.0;
            assert_relative_eq!(*xi, th.cos(), epsilon = 1e-15);
            assert_relative_eq!(*wi, PI / 5.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn large_rule_stays_accurate() {
        let (x, w) = gauss_jacobi(1.5, -0.9, 220).unwrap();
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(w.iter().all(|&v| v > 0.0));
        assert_relative_eq!(w.iter().sum::<f64>(), jacobi_mass(1.5, -0.9), max_relative = 1e-12);
    }

    #[test]
    fn interval_moments() {
        for &(a, b) in &[(-0.9, -0.5), (0.0, 1.5), (0.7, -0.3)] {
            let s = DomainSpec::interval(a, b).unwrap();
            let q = quadrature(&s, 12).unwrap();
            let oracle = interval_moments_oracle(a, b, 12);
            for m in 0..=12u32 {
                let got = q.integrate(|x| x[0].powi(m as i32));
                let want = oracle[m as usize];
                assert!(
                    (got - want).abs() <= 1e-11 * want.abs().max(1e-2),
                    "{a} {b} {m}: {got} {want}"
                );
            }
        }
    }

    #[test]
    fn ball_moments() {
        for &(n, g) in &[(1, 0.25), (2, -0.4), (2, 1.0), (3, 0.0), (4, 0.7)] {
            let s = DomainSpec::ball(n, g).unwrap();
            let q = quadrature(&s, 8).unwrap();
            assert_relative_eq!(q.weights.iter().sum::<f64>(), total_mass(&s), max_relative = 1e-12);
            for a in MultiIndex::up_to_degree(n, 8) {
                let got = q.integrate(|x| monomial(x, a.exponents()));
                let want = ball_moment(n, g, a.exponents());
                assert!((got - want).abs() <= 1e-11 * want.abs().max(1e-3), "{n} {g} {a:?}");
            }
        }
    }

    #[test]
    fn simplex_moments() {
        for kappa in [vec![0.5, 0.5], vec![-0.4, 0.0, 1.0], vec![0.3, 1.2, -0.2, 0.6]] {
            let s = DomainSpec::simplex(kappa.clone()).unwrap();
            let q = quadrature(&s, 9).unwrap();
            assert_relative_eq!(q.weights.iter().sum::<f64>(), total_mass(&s), max_relative = 1e-12);
            for a in MultiIndex::up_to_degree(s.dim(), 9) {
                let got = q.integrate(|x| monomial(x, a.exponents()));
                let want = simplex_moment(&kappa, a.exponents());
                assert!((got - want).abs() <= 1e-11 * want, "{kappa:?} {a:?}");
            }
            assert!(q.nodes.iter().all(|x| s.boundary_gap(x) > 0.0));
        }
    }

    #[test]
    fn capacity_refusal() {
        let s = DomainSpec::simplex(vec![0.5; 6]).unwrap();
        assert!(matches!(quadrature(&s, 200), Err(Error::Capacity(_))));
    }
}
