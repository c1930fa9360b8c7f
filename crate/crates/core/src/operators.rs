//! Exact coefficient-level application of the three second-order operators.
//!
//! Each operator maps a monomial `x^a` of degree `k` to `-λ_k x^a` plus terms
//! of lower degree, so the rules below are written per monomial.

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};
use crate::poly::{MultiIndex, MultiPoly};

fn check_jacobi(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::Parameter(format!(
            "Jacobi operator needs α, β > −1, got α={alpha}, β={beta}"
        )));
    }
    Ok(())
}

/// `(1-x²)p'' + (β-α)p' - (α+β+2) x p'`.
pub fn apply_jacobi_operator(p: &MultiPoly, alpha: f64, beta: f64) -> Result<MultiPoly> {
    check_jacobi(alpha, beta)?;
    if p.dimension() != 1 {
        return Err(argument("Jacobi operator acts on univariate polynomials"));
    }
    let mut out = Vec::with_capacity(3 * p.num_terms());
    for (idx, c) in p.terms() {
        let m = idx.exponents()[0];
        let mf = f64::from(m);
        if m >= 2 {
            out.push((MultiIndex::new(vec![m - 2]), c * mf * (mf - 1.0)));
        }
        if m >= 1 {
            out.push((MultiIndex::new(vec![m - 1]), c * (beta - alpha) * mf));
        }
        out.push((
            MultiIndex::new(vec![m]),
            -c * (mf * (mf - 1.0) + (alpha + beta + 2.0) * mf),
        ));
    }
    MultiPoly::from_terms(1, out)
}

/// `Σ∂_i² - ΣΣ x_i x_j ∂_i∂_j - (n+2γ) Σ x_i ∂_i` on the unit ball.
pub fn apply_ball_operator(p: &MultiPoly, gamma: f64) -> Result<MultiPoly> {
    if !(gamma > -0.5) {
        return Err(Error::Parameter(format!("ball operator needs γ > −1/2, got {gamma}")));
    }
    let n = p.dimension();
    let shift = n as f64 + 2.0 * gamma;
    let mut out = Vec::with_capacity((n + 1) * p.num_terms());
    for (idx, c) in p.terms() {
        let e = idx.exponents();
        let k = f64::from(idx.degree());
        for (i, &ei) in e.iter().enumerate() {
            if ei >= 2 {
                let mut lower = e.to_vec();
                lower[i] -= 2;
                let ef = f64::from(ei);
                out.push((MultiIndex::new(lower), c * ef * (ef - 1.0)));
            }
        }
        out.push((idx.clone(), -c * (k * (k - 1.0) + shift * k)));
    }
    MultiPoly::from_terms(n, out)
}

/// `Σ x_i∂_i² - ΣΣ x_i x_j ∂_i∂_j + Σ (κ_i + 1/2 - (|κ| + (n+1)/2) x_i) ∂_i` on the simplex.
pub fn apply_simplex_operator(p: &MultiPoly, kappa: &[f64]) -> Result<MultiPoly> {
    let n = p.dimension();
    if kappa.len() != n + 1 {
        return Err(argument(format!(
            "simplex operator in dimension {n} needs {} weight parameters, got {}",
            n + 1,
            kappa.len()
        )));
    }
    if let Some(k) = kappa.iter().find(|&&k| !(k > -0.5)) {
        return Err(Error::Parameter(format!(
            "simplex operator needs all κ_i > −1/2, got {k}"
        )));
    }
    let total: f64 = kappa.iter().sum();
    let drift = total + (n as f64 + 1.0) / 2.0;
    let mut out = Vec::with_capacity((n + 1) * p.num_terms());
    for (idx, c) in p.terms() {
        let e = idx.exponents();
        let k = f64::from(idx.degree());
        for (i, &ei) in e.iter().enumerate() {
            if ei >= 1 {
                let mut lower = e.to_vec();
                lower[i] -= 1;
                let ef = f64::from(ei);
                out.push((MultiIndex::new(lower), c * ef * (ef - 1.0 + kappa[i] + 0.5)));
            }
        }
        out.push((idx.clone(), -c * (k * (k - 1.0) + drift * k)));
    }
    MultiPoly::from_terms(n, out)
}

/// Applies the operator belonging to `spec`.
pub fn apply_operator(spec: &DomainSpec, p: &MultiPoly) -> Result<MultiPoly> {
    if p.dimension() != spec.dim() {
        return Err(argument(format!(
            "polynomial dimension {} does not match domain dimension {}",
            p.dimension(),
            spec.dim()
        )));
    }
    match spec.kind() {
        DomainKind::Interval => apply_jacobi_operator(p, spec.params()[0], spec.params()[1]),
        DomainKind::Ball => apply_ball_operator(p, spec.params()[0]),
        DomainKind::Simplex => apply_simplex_operator(p, spec.params()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x(dim: usize, i: usize) -> MultiPoly {
        MultiPoly::variable(dim, i).unwrap()
    }

    // Independent route: expand each operator term by term with partial
    // derivatives and polynomial products.
    fn ball_oracle(p: &MultiPoly, gamma: f64) -> MultiPoly {
        let n = p.dimension();
        let mut acc = MultiPoly::zero(n);
        for i in 0..n {
            let di = p.partial(i).unwrap();
            acc = &acc + &di.partial(i).unwrap();
            for j in 0..n {
                let dij = di.partial(j).unwrap();
                acc = &acc - &(&(&x(n, i) * &x(n, j)) * &dij);
            }
            acc = &acc - &(&(&x(n, i) * &di) * (n as f64 + 2.0 * gamma));
        }
        acc
    }

    fn simplex_oracle(p: &MultiPoly, kappa: &[f64]) -> MultiPoly {
        let n = p.dimension();
        let total: f64 = kappa.iter().sum();
        let mut acc = MultiPoly::zero(n);
        for (i, &ki) in kappa.iter().enumerate().take(n) {
            let di = p.partial(i).unwrap();
            acc = &acc + &(&x(n, i) * &di.partial(i).unwrap());
            for j in 0..n {
                acc = &acc - &(&(&x(n, i) * &x(n, j)) * &di.partial(j).unwrap());
            }
            let coef = &MultiPoly::constant(n, ki + 0.5) - &(&x(n, i) * (total + (n as f64 + 1.0) / 2.0));
            acc = &acc + &(&coef * &di);
        }
        acc
    }

    fn jacobi_oracle(p: &MultiPoly, a: f64, b: f64) -> MultiPoly {
        let d1 = p.partial(0).unwrap();
        let d2 = d1.partial(0).unwrap();
        let one_minus_x2 = &MultiPoly::constant(1, 1.0) - &(&x(1, 0) * &x(1, 0));
        let t1 = &one_minus_x2 * &d2;
        let t2 = &d1 * (b - a);
        let t3 = &(&x(1, 0) * &d1) * (a + b + 2.0);
        &(&t1 + &t2) - &t3
    }

    fn assert_close(a: &MultiPoly, b: &MultiPoly, tol: f64) {
        let d = a - b;
        let scale = a.max_abs_coeff().max(b.max_abs_coeff()).max(1.0);
        assert!(d.max_abs_coeff() <= tol * scale, "{a} vs {b}");
    }

    #[test]
    fn jacobi_examples() {
        let one = MultiPoly::constant(1, 1.0);
        assert!(apply_jacobi_operator(&one, 0.3, 0.1).unwrap().is_zero());
        let lx = apply_jacobi_operator(&x(1, 0), -0.5, -0.5).unwrap();
        assert_close(&lx, &(&x(1, 0) * -1.0), 0.0);
        let x2 = &x(1, 0) * &x(1, 0);
        let expected = &MultiPoly::constant(1, 2.0) - &(&x2 * 6.0);
        assert_close(&apply_jacobi_operator(&x2, 0.0, 0.0).unwrap(), &expected, 0.0);
        assert!(matches!(
            apply_jacobi_operator(&one, -1.0, 0.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn ball_examples() {
        assert!(apply_ball_operator(&MultiPoly::constant(2, 1.0), 0.5)
            .unwrap()
            .is_zero());
        let l = apply_ball_operator(&x(2, 0), 0.5).unwrap();
        assert_close(&l, &(&x(2, 0) * -3.0), 0.0);
        let g = 0.37;
        let l1 = apply_ball_operator(&x(1, 0), g).unwrap();
        assert_close(&l1, &(&x(1, 0) * -(1.0 + 2.0 * g)), 1e-15);
        assert!(apply_ball_operator(&x(1, 0), -0.5).is_err());
    }

    #[test]
    fn simplex_examples() {
        let k = [0.5, 0.5];
        assert!(apply_simplex_operator(&MultiPoly::constant(1, 1.0), &k)
            .unwrap()
            .is_zero());
        let p = &x(1, 0) - &MultiPoly::constant(1, 0.5);
        assert_close(&apply_simplex_operator(&p, &k).unwrap(), &(&p * -2.0), 0.0);
        // n = 2, κ = (1/2, 1/2, 1/2): L x₁ = 1 - 3 x₁
        let l = apply_simplex_operator(&x(2, 0), &[0.5, 0.5, 0.5]).unwrap();
        let expected = &MultiPoly::constant(2, 1.0) - &(&x(2, 0) * 3.0);
        assert_close(&l, &expected, 0.0);
        assert_close(&l, &simplex_oracle(&x(2, 0), &[0.5, 0.5, 0.5]), 0.0);
        assert!(apply_simplex_operator(&x(2, 0), &[0.5, 0.5]).is_err());
        assert!(apply_simplex_operator(&x(2, 0), &[0.5, -0.5, 0.5]).is_err());
    }

    fn arb_poly(dim: usize, max_deg: u32) -> impl Strategy<Value = MultiPoly> {
        let n = MultiIndex::up_to_degree(dim, max_deg).len();
        proptest::collection::vec(-2.0f64..2.0, n).prop_map(move |cs| {
            MultiPoly::from_terms(dim, MultiIndex::up_to_degree(dim, max_deg).into_iter().zip(cs)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn ball_matches_term_expansion(p in arb_poly(3, 5), g in -0.45f64..2.0) {
            let a = apply_ball_operator(&p, g).unwrap();
            let b = ball_oracle(&p, g);
            let d = (&a - &b).max_abs_coeff();
            prop_assert!(d <= 1e-12 * (1.0 + a.max_abs_coeff()));
            prop_assert!(a.degree() <= p.degree());
        }

        #[test]
        fn simplex_matches_term_expansion(p in arb_poly(2, 6), k in proptest::collection::vec(-0.45f64..2.0, 3)) {
            let a = apply_simplex_operator(&p, &k).unwrap();
            let b = simplex_oracle(&p, &k);
            prop_assert!((&a - &b).max_abs_coeff() <= 1e-12 * (1.0 + a.max_abs_coeff()));
            prop_assert!(a.degree() <= p.degree());
        }

        #[test]
        fn jacobi_matches_term_expansion(p in arb_poly(1, 9), a in -0.95f64..2.0, b in -0.95f64..2.0) {
            let l = apply_jacobi_operator(&p, a, b).unwrap();
            let o = jacobi_oracle(&p, a, b);
            prop_assert!((&l - &o).max_abs_coeff() <= 1e-12 * (1.0 + l.max_abs_coeff()));
        }

        #[test]
        fn operators_are_linear(p in arb_poly(2, 4), q in arb_poly(2, 4), s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let k = [0.1, 0.7, -0.3];
            let lin = &(&p * s) + &(&q * t);
            let lhs = apply_simplex_operator(&lin, &k).unwrap();
            let rhs = &(&apply_simplex_operator(&p, &k).unwrap() * s) + &(&apply_simplex_operator(&q, &k).unwrap() * t);
            prop_assert!((&lhs - &rhs).max_abs_coeff() <= 1e-12 * (1.0 + lhs.max_abs_coeff()));
            let lhs = apply_ball_operator(&lin, 0.2).unwrap();
            let rhs = &(&apply_ball_operator(&p, 0.2).unwrap() * s) + &(&apply_ball_operator(&q, 0.2).unwrap() * t);
            prop_assert!((&lhs - &rhs).max_abs_coeff() <= 1e-12 * (1.0 + lhs.max_abs_coeff()));
        }
    }
}
