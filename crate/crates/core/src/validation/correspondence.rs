//! Transfer between the Jacobi interval and the one-dimensional simplex.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::build_basis;
use crate::domain::DomainSpec;
use crate::error::Result;
use crate::geometry::distance;
use crate::kernel::{HeatKernelEvaluator, TruncationPolicy};
use crate::operators::apply_operator;
use crate::validation::{random_poly, SCHEMA_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceCheck {
    pub name: String,
    pub identity: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub beta: f64,
    pub max_k: usize,
    pub times: Vec<f64>,
    pub checks: Vec<CorrespondenceCheck>,
    pub verdict: bool,
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Checks, for `x₁ = (x+1)/2` and `κ = (β+½, α+½)`:
/// operator conjugation `L_T g(x₁) = L f(x)`, eigenfunctions
/// `P_k(x) = ±2^{-(α+β+1)/2} P̃_k(x₁)`, distances `ρ_T(x₁, y₁) = ρ(x, y)/2` and
/// kernels `e^{tL}(x, y) = 2^{-(α+β+1)} e^{tL_T}(x₁, y₁)`. All residuals are relative.
pub fn jacobi_simplex_correspondence(
    alpha: f64,
    beta: f64,
    max_k: usize,
    grid: &[f64],
    times: &[f64],
    tolerance: f64,
    seed: u64,
) -> Result<CorrespondenceReport> {
    let int = DomainSpec::interval(alpha, beta)?;
    let sim = int.interval_as_simplex().expect("interval spec");
    let to_unit = |x: f64| (x + 1.0) / 2.0;
    let scale = 2f64.powf(-(alpha + beta + 1.0));
    let mut checks = Vec::new();
    let mut push = |name: &str, identity: &str, r: f64| {
        checks.push(CorrespondenceCheck {
            name: name.into(),
            identity: identity.into(),
            max_residual: r,
            tolerance,
            pass: r <= tolerance,
        })
    };

    // operator conjugation on random polynomials in x₁
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = random_poly(&mut rng, 1, max_k.clamp(1, 12) as u32);
        let f = g.compose_affine(0.5, 0.5)?;
        let lhs = apply_operator(&sim, &g)?.compose_affine(0.5, 0.5)?;
        let rhs = apply_operator(&int, &f)?;
        let diff = lhs.add_scaled(&rhs, -1.0)?.max_abs_coeff();
        worst = worst.max(diff / rhs.max_abs_coeff().max(lhs.max_abs_coeff()).max(f64::MIN_POSITIVE));
    }
    push("operator", "L_T g(x₁) = L f(x)", worst);

    // eigenfunctions, sign fixed by the leading coefficient
    let bi = build_basis(&int, max_k)?;
    let bs = build_basis(&sim, max_k)?;
    let vi: Vec<Vec<f64>> = grid.iter().map(|&x| bi.eval_all(&[x])).collect::<Result<_>>()?;
    let vs: Vec<Vec<f64>> = grid
        .iter()
        .map(|&x| bs.eval_all(&[to_unit(x)]))
        .collect::<Result<_>>()?;
    let lead = |b: &crate::basis::OrthonormalBasis, k: usize| -> Result<f64> {
        let p = &b.level(k)?[0];
        Ok(p.terms().last().map(|(_, c)| c.signum()).unwrap_or(1.0))
    };
    let mut worst: f64 = 0.0;
    for k in 0..=max_k {
        let sign = lead(&bi, k)? * lead(&bs, k)?;
        let top = vi.iter().map(|v| v[k].abs()).fold(0.0, f64::max);
        let dev = vi
            .iter()
            .zip(&vs)
            .map(|(a, b)| (a[k] - sign * scale.sqrt() * b[k]).abs())
            .fold(0.0, f64::max);
        // a level can vanish on the whole grid (cos 8θ on 16 θ-midpoints)
        worst = worst.max(dev / top.max(1.0));
    }
    push("eigenfunctions", "P_k(x) = ±2^{-(α+β+1)/2} P̃_k(x₁)", worst);

    // distance halving
    let mut worst: f64 = 0.0;
    for &x in grid {
        for &y in grid {
            let d = distance(&int, &[x], &[y])?;
            let dt = distance(&sim, &[to_unit(x)], &[to_unit(y)])?;
            worst = worst.max(rel(dt, d / 2.0));
        }
    }
    push("distance", "ρ_T(x₁, y₁) = ρ(x, y)/2", worst);

    // kernel scaling; both series run to the cap so truncation cannot differ
    let full = |b: &crate::basis::OrthonormalBasis| TruncationPolicy {
        epsilon: f64::MIN_POSITIVE,
        ..TruncationPolicy::for_basis(b)
    };
    let (pol_i, pol_s) = (full(&bi), full(&bs));
    let ei = HeatKernelEvaluator::with_policy(bi, pol_i)?;
    let es = HeatKernelEvaluator::with_policy(bs, pol_s)?;
    let pi: Vec<_> = grid.iter().map(|&x| ei.point(&[x])).collect::<Result<_>>()?;
    let ps: Vec<_> = grid.iter().map(|&x| es.point(&[to_unit(x)])).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for &t in times {
        for a in 0..grid.len() {
            for b in a..grid.len() {
                let ki = ei.heat_kernel_at(t, &pi[a], &pi[b])?.value;
                let ks = es.heat_kernel_at(t, &ps[a], &ps[b])?.value;
                worst = worst.max(rel(ki, scale * ks));
            }
        }
    }
    push("kernel", "e^{tL}(x, y) = 2^{-(α+β+1)} e^{tL_T}(x₁, y₁)", worst);

    let verdict = checks.iter().all(|c| c.pass);
    Ok(CorrespondenceReport {
        schema_version: SCHEMA_VERSION,
        alpha,
        beta,
        max_k,
        times: times.to_vec(),
        checks,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiPoly;

    #[test]
    fn quadratic_conjugation_is_exact() {
        let int = DomainSpec::interval(0.0, 0.0).unwrap();
        let sim = int.interval_as_simplex().unwrap();
        let x = MultiPoly::variable(1, 0).unwrap();
        let f = &x * &x;
        let g = f.compose_affine(2.0, -1.0).unwrap();
        let lhs = apply_operator(&sim, &g).unwrap().compose_affine(0.5, 0.5).unwrap();
        let rhs = apply_operator(&int, &f).unwrap();
        assert!(lhs.add_scaled(&rhs, -1.0).unwrap().max_abs_coeff() <= 1e-13);
    }

    #[test]
    fn chebyshev_report() {
        let grid: Vec<f64> = (0..20).map(|i| -0.95 + 1.9 * i as f64 / 19.0).collect();
        let r = jacobi_simplex_correspondence(-0.5, -0.5, 20, &grid, &[0.5], 1e-9, 1).unwrap();
        assert_eq!(r.checks.len(), 4);
        assert!(r.verdict, "{r:#?}");
        assert!(r.checks[2].max_residual <= 1e-12);
    }

    #[test]
    fn levels_vanishing_on_the_grid() {
        let grid: Vec<f64> = (0..16)
            .map(|i| (std::f64::consts::PI * (i as f64 + 0.5) / 16.0).cos())
            .collect();
        let r = jacobi_simplex_correspondence(-0.5, -0.5, 30, &grid, &[1.0], 1e-9, 1).unwrap();
        assert!(r.checks[1].max_residual <= 1e-12, "{r:#?}");
    }
}
