//! Chart form of the weighted Laplacian against the polynomial operator.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};
use crate::geometry::{chart_lift, inverse_metric, metric_det};
use crate::operators::apply_operator;
use crate::poly::MultiPoly;
use crate::validation::green::laplacian_factor;

/// Samples closer than this (in `boundary_gap`) to the boundary are refused.
pub const CHART_MIN_GAP: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartResult {
    /// Largest `|Δ̃_w f - c L f| / max(|Δ̃_w f|, |c L f|, 1)` over the samples.
    pub max_residual: f64,
    pub factor: f64,
    pub samples: usize,
}

/// `ln w̃`, the sphere weight pulled back to the chart.
fn ln_sphere_weight(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    let p = spec.params();
    Ok(match spec.kind() {
        DomainKind::Interval => (p[0] + 0.5) * (1.0 - x[0]).ln() + (p[1] + 0.5) * (1.0 + x[0]).ln(),
        DomainKind::Ball => {
            let u = chart_lift(spec, x)?;
            2.0 * p[0] * u[spec.dim()].ln()
        }
        DomainKind::Simplex => {
            let u = chart_lift(spec, x)?;
            u.iter().zip(p).map(|(ui, k)| 2.0 * k * ui.ln()).sum()
        }
    })
}

fn ln_volume_density(spec: &DomainSpec, x: &[f64]) -> Result<f64> {
    Ok(0.5 * metric_det(spec, x)?.ln() + ln_sphere_weight(spec, x)?)
}

/// Fourth-order central difference of `F` along `axis`.
fn central<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], axis: usize, h: f64) -> Result<f64> {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s * h;
        f(&y)
    };
    Ok((-at(2.0)? + 8.0 * at(1.0)? - 8.0 * at(-1.0)? + at(-2.0)?) / (12.0 * h))
}

/// Evaluates the local-coordinate weighted Laplacian
/// `Σ g^{ij}∂_i∂_j f + Σ_j (Σ_i ∂_i g^{ij}) ∂_j f + Σ_j (Σ_i g^{ij} ∂_i ln[√det g · w̃]) ∂_j f`
/// from the metric primitives (derivatives of the metric by finite differences,
/// derivatives of `f` exactly) and compares it with `c·L f`, where `c = 4` on the
/// simplex and `1` otherwise.
pub fn chart_laplacian_check(spec: &DomainSpec, f: &MultiPoly, samples: &[Vec<f64>]) -> Result<ChartResult> {
    if f.dimension() != spec.dim() {
        return Err(argument("polynomial and domain dimensions differ"));
    }
    let n = spec.dim();
    let c = laplacian_factor(spec);
    let lf = apply_operator(spec, f)?.scale(c);
    let grad: Vec<MultiPoly> = f.gradient();
    let hess: Vec<Vec<MultiPoly>> = grad.iter().map(|g| g.gradient()).collect();
    let mut worst: f64 = 0.0;
    for x in samples {
        spec.check_contains(x)?;
        let gap = spec.boundary_gap(x);
        if gap < CHART_MIN_GAP {
            return Err(Error::BoundarySingularity(format!(
                "chart sample {x:?} is within {gap:.2e} of the boundary (minimum {CHART_MIN_GAP})"
            )));
        }
        let h = 1e-3 * gap.min(1.0);
        let ginv = inverse_metric(spec, x)?;
        let df: Vec<f64> = grad.iter().map(|g| g.eval(x)).collect::<Result<_>>()?;
        let mut value = 0.0;
        for i in 0..n {
            let dlog = central(|y| ln_volume_density(spec, y), x, i, h)?;
            for j in 0..n {
                let dg = central(|y| Ok(inverse_metric(spec, y)?[(i, j)]), x, i, h)?;
                value += ginv[(i, j)] * hess[i][j].eval(x)? + (dg + ginv[(i, j)] * dlog) * df[j];
            }
        }
        let expect = lf.eval(x)?;
        worst = worst.max((value - expect).abs() / value.abs().max(expect.abs()).max(1.0));
    }
    Ok(ChartResult {
        max_residual: worst,
        factor: c,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::random_poly;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ball_n1_linear() {
        for gamma in [-0.3, 0.0, 0.8] {
            let spec = DomainSpec::ball(1, gamma).unwrap();
            let f = MultiPoly::variable(1, 0).unwrap();
            let lf = apply_operator(&spec, &f).unwrap().eval(&[0.3]).unwrap();
            assert_abs_diff_eq!(lf, -(1.0 + 2.0 * gamma) * 0.3, epsilon = 1e-15);
            assert!(chart_laplacian_check(&spec, &f, &[vec![0.3]]).unwrap().max_residual <= 1e-9);
        }
    }

    #[test]
    fn constant_is_harmonic() {
        let spec = DomainSpec::simplex(vec![0.1, 0.2, 0.3]).unwrap();
        let r = chart_laplacian_check(&spec, &MultiPoly::constant(2, 1.0), &[vec![0.2, 0.3]]).unwrap();
        assert_eq!(r.max_residual, 0.0);
    }

    #[test]
    fn random_simplex_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kappa: Vec<f64> = (0..3).map(|_| rng.random_range(-0.4..2.0)).collect();
        let spec = DomainSpec::simplex(kappa).unwrap();
        let f = random_poly(&mut rng, 2, 5);
        let samples: Vec<Vec<f64>> = (0..100)
            .map(|_| loop {
                let x = vec![rng.random_range(0.02..0.96), rng.random_range(0.02..0.96)];
                if x[0] + x[1] < 0.98 {
                    break x;
                }
            })
            .collect();
        let r = chart_laplacian_check(&spec, &f, &samples).unwrap();
        assert_eq!(r.factor, 4.0);
        assert!(r.max_residual <= 1e-8, "{}", r.max_residual);
    }

    #[test]
    fn refuses_boundary_samples() {
        let spec = DomainSpec::ball(2, 0.5).unwrap();
        let f = MultiPoly::variable(2, 0).unwrap();
        assert!(matches!(
            chart_laplacian_check(&spec, &f, &[vec![1.0, 0.0]]),
            Err(Error::BoundarySingularity(_))
        ));
    }
}
