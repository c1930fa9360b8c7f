//! Intrinsic distances, weights, sphere lifts and chart metrics.

use nalgebra::{DMatrix, DVector};

use crate::domain::{DomainKind, DomainSpec, BOUNDARY_TOL};
use crate::error::{argument, Error, Result};

/// Great-circle distance between unit vectors, in the chord form
/// `2·atan2(|u-v|, |u+v|)`, which stays accurate for nearby and antipodal pairs.
pub fn great_circle(u: &[f64], v: &[f64]) -> f64 {
    let (mut dm, mut dp) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dm += (a - b) * (a - b);
        dp += (a + b) * (a + b);
    }
    2.0 * dm.sqrt().atan2(dp.sqrt())
}

fn lift_unchecked(spec: &DomainSpec, x: &[f64]) -> Vec<f64> {
    match spec.kind() {
        DomainKind::Ball => {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let mut u = x.to_vec();
            u.push((1.0 - r2).max(0.0).sqrt());
            u
        }
        DomainKind::Simplex => {
            let s: f64 = x.iter().sum();
            let mut u: Vec<f64> = x.iter().map(|v| v.max(0.0).sqrt()).collect();
            u.push((1.0 - s).max(0.0).sqrt());
            u
        }
        DomainKind::Interval => {
            let x1 = (x[0] + 1.0) / 2.0;
            vec![x1.max(0.0).sqrt(), (1.0 - x1).max(0.0).sqrt()]
        }
    }
}

/// Lift to the unit sphere in `R^{n+1}`.
///
/// The interval is lifted through the `n = 1` simplex after `x₁ = (x+1)/2`;
/// great-circle distances of lifted interval points are half the interval distance.
pub fn chart_lift(spec: &DomainSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_contains(x)?;
    Ok(lift_unchecked(spec, x))
}

/// Intrinsic distance `ρ(x, y)`.
pub fn distance(spec: &DomainSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.check_contains(x)?;
    spec.check_contains(y)?;
    Ok(distance_unchecked(spec, x, y))
}

pub(crate) fn distance_unchecked(spec: &DomainSpec, x: &[f64], y: &[f64]) -> f64 {
    match spec.kind() {
        DomainKind::Interval => (x[0].clamp(-1.0, 1.0).acos() - y[0].clamp(-1.0, 1.0).acos()).abs(),
        _ => great_circle(&lift_unchecked(spec, x), &lift_unchecked(spec, y)),
    }
}

fn singular(spec: &DomainSpec, x: &[f64], what: &str) -> Error {
    Error::BoundarySingularity(format!(
        "{what} of {} is singular at {x:?} (boundary gap {:.3e})",
        spec.label(),
        spec.boundary_gap(x)
    ))
}

fn require_interior(spec: &DomainSpec, x: &[f64], what: &str) -> Result<()> {
    spec.check_contains(x)?;
    if spec.boundary_gap(x) <= BOUNDARY_TOL {
        return Err(singular(spec, x, what));
    }
    Ok(())
}

/// The factors `(base_i, exponent_i)` whose product is the weight density.
pub(crate) fn weight_factors(spec: &DomainSpec, x: &[f64]) -> Vec<(f64, f64)> {
    let p = spec.params();
    match spec.kind() {
        DomainKind::Interval => vec![(1.0 - x[0], p[0]), (1.0 + x[0], p[1])],
        DomainKind::Ball => {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            vec![(1.0 - r2, p[0] - 0.5)]
        }
        DomainKind::Simplex => {
            let n = spec.dim();
            let s: f64 = x.iter().sum();
            let mut f: Vec<(f64, f64)> = (0..n).map(|i| (x[i], p[i] - 0.5)).collect();
            f.push((1.0 - s, p[n] - 0.5));
            f
        }
    }
}

/// Density of `dμ` with respect to Lebesgue measure.
pub fn weight_density(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    spec.check_contains(x)?;
    let mut w = 1.0;
    for (base, e) in weight_factors(spec, x) {
        let base = base.max(0.0);
        if e < 0.0 && base <= BOUNDARY_TOL {
            return Err(singular(spec, x, "weight density"));
        }
        w *= base.powf(e);
    }
    Ok(w)
}

/// Riemannian metric of the chart in native coordinates.
pub fn metric_tensor(spec: &DomainSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    require_interior(spec, x, "metric tensor")?;
    let n = spec.dim();
    Ok(match spec.kind() {
        DomainKind::Interval => DMatrix::from_element(1, 1, 1.0 / (1.0 - x[0] * x[0])),
        DomainKind::Ball => {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let v = DVector::from_column_slice(x);
            DMatrix::identity(n, n) + &v * v.transpose() / (1.0 - r2)
        }
        DomainKind::Simplex => {
            let s: f64 = x.iter().sum();
            let c = 1.0 / (4.0 * (1.0 - s));
            DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / (4.0 * x[i]) + c } else { c })
        }
    })
}

/// Closed-form inverse of [`metric_tensor`].
pub fn inverse_metric(spec: &DomainSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    require_interior(spec, x, "inverse metric")?;
    let n = spec.dim();
    Ok(match spec.kind() {
        DomainKind::Interval => DMatrix::from_element(1, 1, 1.0 - x[0] * x[0]),
        DomainKind::Ball => DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - x[i] * x[j]),
        DomainKind::Simplex => DMatrix::from_fn(n, n, |i, j| 4.0 * (if i == j { x[i] } else { 0.0 } - x[i] * x[j])),
    })
}

/// Closed-form determinant of [`metric_tensor`].
pub fn metric_det(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    require_interior(spec, x, "metric determinant")?;
    Ok(match spec.kind() {
        DomainKind::Interval => 1.0 / (1.0 - x[0] * x[0]),
        DomainKind::Ball => 1.0 / (1.0 - x.iter().map(|v| v * v).sum::<f64>()),
        DomainKind::Simplex => {
            let s: f64 = x.iter().sum();
            let prod: f64 = x.iter().product();
            0.25f64.powi(spec.dim() as i32) / ((1.0 - s) * prod)
        }
    })
}

/// `det(diag(a) + 11ᵀ) = ∏a_i + Σ_j ∏_{k≠j} a_k`, using prefix and suffix products.
pub fn perturbed_identity_det(a: &[f64]) -> f64 {
    let n = a.len();
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] * a[i];
    }
    let mut prefix = 1.0;
    let mut sum = 0.0;
    for j in 0..n {
        sum += prefix * suffix[j + 1];
        prefix *= a[j];
    }
    prefix + sum
}

/// Metric of the graph chart `x ↦ (x, ψ(x))` from the gradient of `ψ`:
/// returns `(g, g⁻¹, det g)` with `g = δ + ∇ψ∇ψᵀ`.
pub fn graph_chart_metric(grad_psi: &[f64]) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let n = grad_psi.len();
    let d = DVector::from_column_slice(grad_psi);
    let s = d.norm_squared();
    let outer = &d * d.transpose();
    let g = DMatrix::identity(n, n) + &outer;
    let ginv = DMatrix::identity(n, n) - outer / (1.0 + s);
    (g, ginv, 1.0 + s)
}

/// Checks a radius argument for volume-type queries.
pub(crate) fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(argument(format!("radius must be positive and finite, got {r}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ball(n: usize, g: f64) -> DomainSpec {
        DomainSpec::ball(n, g).unwrap()
    }

    fn simplex(k: &[f64]) -> DomainSpec {
        DomainSpec::simplex(k.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let b = ball(2, 0.0);
        assert_relative_eq!(distance(&b, &[1.0, 0.0], &[-1.0, 0.0]).unwrap(), PI, epsilon = 1e-15);
        let s = simplex(&[0.5, 0.5]);
        assert_relative_eq!(distance(&s, &[0.0], &[1.0]).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        let i = DomainSpec::interval(0.0, 0.0).unwrap();
        assert_relative_eq!(distance(&i, &[-1.0], &[1.0]).unwrap(), PI, epsilon = 1e-15);
        for a in 0..20 {
            for c in 0..20 {
                let x = -1.0 + 2.0 * a as f64 / 19.0;
                let y = -1.0 + 2.0 * c as f64 / 19.0;
                let d = distance(&i, &[x], &[y]).unwrap();
                let dt = distance(&s, &[(x + 1.0) / 2.0], &[(y + 1.0) / 2.0]).unwrap();
                assert!((dt - d / 2.0).abs() <= 1e-12);
            }
        }
        assert!(distance(&b, &[0.9, 0.9], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight_density(&ball(2, 0.5), &[0.3, 0.2]).unwrap(), 1.0);
        let i = DomainSpec::interval(-0.5, -0.5).unwrap();
        assert_eq!(weight_density(&i, &[0.0]).unwrap(), 1.0);
        let w = weight_density(&simplex(&[1.0, 1.0, 1.0]), &[0.25, 0.25]).unwrap();
        assert_relative_eq!(w, 0.1767766953, epsilon = 1e-10);
        assert!(matches!(weight_density(&i, &[1.0]), Err(Error::BoundarySingularity(_))));
    }

    #[test]
    fn lift_examples() {
        assert_eq!(chart_lift(&ball(2, 0.0), &[0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        let u = chart_lift(&simplex(&[0.5, 0.5]), &[0.5]).unwrap();
        assert_relative_eq!(u[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(u[1], 0.5f64.sqrt(), epsilon = 1e-15);
        let u = chart_lift(&ball(2, 0.0), &[0.6, 0.0]).unwrap();
        assert_relative_eq!(u[2], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn metric_examples() {
        let b = ball(2, 0.0);
        assert_eq!(metric_tensor(&b, &[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(inverse_metric(&b, &[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2));
        assert_eq!(metric_det(&b, &[0.0, 0.0]).unwrap(), 1.0);
        let g = metric_tensor(&b, &[0.6, 0.0]).unwrap();
        assert_relative_eq!(g[(0, 0)], 1.5625, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 1)], 1.0);
        let gi = inverse_metric(&b, &[0.6, 0.0]).unwrap();
        assert_relative_eq!(gi[(0, 0)], 0.64, epsilon = 1e-15);
        assert_relative_eq!(metric_det(&b, &[0.6, 0.0]).unwrap(), 1.5625, epsilon = 1e-14);
        let s = simplex(&[0.5, 0.5]);
        assert_relative_eq!(metric_tensor(&s, &[0.5]).unwrap()[(0, 0)], 1.0);
        assert_relative_eq!(inverse_metric(&s, &[0.5]).unwrap()[(0, 0)], 1.0);
        let s2 = simplex(&[0.5, 0.5, 0.5]);
        assert_relative_eq!(metric_det(&s2, &[0.25, 0.25]).unwrap(), 2.0, epsilon = 1e-14);
        assert!(matches!(
            metric_tensor(&b, &[1.0, 0.0]),
            Err(Error::BoundarySingularity(_))
        ));
    }

    #[test]
    fn determinant_lemma_examples() {
        assert_eq!(perturbed_identity_det(&[1.0, 1.0]), 3.0);
        assert_eq!(perturbed_identity_det(&[2.0, 3.0]), 11.0);
        assert_eq!(perturbed_identity_det(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn graph_chart_matches_ball() {
        let x = [0.3, -0.5, 0.2];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let psi = (1.0 - r2).sqrt();
        let grad: Vec<f64> = x.iter().map(|v| -v / psi).collect();
        let (g, gi, det) = graph_chart_metric(&grad);
        let b = ball(3, 0.1);
        assert!((g - metric_tensor(&b, &x).unwrap()).amax() < 1e-14);
        assert!((gi - inverse_metric(&b, &x).unwrap()).amax() < 1e-14);
        assert_relative_eq!(det, metric_det(&b, &x).unwrap(), max_relative = 1e-14);
    }

    fn interior_ball(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-1.0f64..1.0, n).prop_map(move |v| {
            let r = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if r >= 0.97 {
                v.iter().map(|a| a * 0.97 / r).collect()
            } else {
                v
            }
        })
    }

    fn interior_simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.01f64..1.0, n + 1).prop_map(move |v| {
            let s: f64 = v.iter().sum();
            v[..n].iter().map(|a| a / s).collect()
        })
    }

    proptest! {
        #[test]
        fn ball_triangle_and_lift(x in interior_ball(3), y in interior_ball(3), z in interior_ball(3)) {
            let b = ball(3, 0.3);
            let dxy = distance(&b, &x, &y).unwrap();
            let dyz = distance(&b, &y, &z).unwrap();
            let dxz = distance(&b, &x, &z).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-12);
            prop_assert!((distance(&b, &x, &y).unwrap() - distance(&b, &y, &x).unwrap()).abs() == 0.0);
            let (u, v) = (chart_lift(&b, &x).unwrap(), chart_lift(&b, &y).unwrap());
            let dot: f64 = u.iter().zip(&v).map(|(a, c)| a * c).sum();
            // arccos itself is ill-conditioned near ±1, so compare away from those ends
            if dxy.sin() > 1e-3 {
                prop_assert!((dot.clamp(-1.0, 1.0).acos() - dxy).abs() <= 1e-12);
            }
            let norm: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn simplex_triangle(x in interior_simplex(2), y in interior_simplex(2), z in interior_simplex(2)) {
            let s = simplex(&[0.1, 0.7, -0.2]);
            let d = |a: &[f64], c: &[f64]| distance(&s, a, c).unwrap();
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
            prop_assert!(d(&x, &y) <= FRAC_PI_2 + 1e-15);
        }

        #[test]
        fn ball_metric_identities(x in interior_ball(3)) {
            let b = ball(3, 0.0);
            let g = metric_tensor(&b, &x).unwrap();
            let gi = inverse_metric(&b, &x).unwrap();
            prop_assert!((&g * &gi - DMatrix::identity(3, 3)).amax() <= 1e-12 * g.amax());
            let det = metric_det(&b, &x).unwrap();
            prop_assert!((g.clone().lu().determinant() - det).abs() <= 1e-10 * det);
        }

        #[test]
        fn simplex_metric_identities(x in interior_simplex(3)) {
            let s = simplex(&[0.5; 4]);
            let g = metric_tensor(&s, &x).unwrap();
            let gi = inverse_metric(&s, &x).unwrap();
            let prod = &g * &gi;
            prop_assert!((prod - DMatrix::identity(3, 3)).amax() <= 1e-12 * g.amax() * gi.amax().max(1.0));
            let det = metric_det(&s, &x).unwrap();
            prop_assert!((g.clone().lu().determinant() - det).abs() <= 1e-10 * det);
        }

        #[test]
        fn determinant_lemma_matches_lu(a in proptest::collection::vec(0.1f64..10.0, 1..=8)) {
            let n = a.len();
            let m = DMatrix::from_fn(n, n, |i, j| if i == j { a[i] + 1.0 } else { 1.0 });
            let lu = m.lu().determinant();
            let closed = perturbed_identity_det(&a);
            prop_assert!((lu - closed).abs() <= 1e-12 * closed.abs());
        }
    }
}
