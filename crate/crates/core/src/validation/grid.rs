//! Evaluation grids for the scans.

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Result};
use crate::quadrature::{gauss_jacobi, quadrature};

/// Intrinsic distance from `x` to the boundary.
pub fn boundary_distance(spec: &DomainSpec, x: &[f64]) -> f64 {
    let asin_sqrt = |v: f64| v.clamp(0.0, 1.0).sqrt().asin();
    match spec.kind() {
        DomainKind::Interval => {
            let th = x[0].clamp(-1.0, 1.0).acos();
            th.min(std::f64::consts::PI - th)
        }
        DomainKind::Ball => asin_sqrt(1.0 - x.iter().map(|v| v * v).sum::<f64>()),
        DomainKind::Simplex => {
            let s: f64 = x.iter().sum();
            x.iter().map(|&v| asin_sqrt(v)).fold(asin_sqrt(1.0 - s), f64::min)
        }
    }
}

/// Gauss–Jacobi type nodes of the spec (about `size` per direction), keeping
/// those at intrinsic distance at least `min_gap` from the boundary.
pub fn interior_grid(spec: &DomainSpec, size: usize, min_gap: f64) -> Result<Vec<Vec<f64>>> {
    if size == 0 {
        return Err(argument("grid size must be positive"));
    }
    let nodes: Vec<Vec<f64>> = match spec.kind() {
        DomainKind::Interval => {
            let (x, _) = gauss_jacobi(spec.params()[0], spec.params()[1], size)?;
            x.into_iter().map(|v| vec![v]).collect()
        }
        _ => quadrature(spec, 2 * size - 1)?.nodes,
    };
    Ok(nodes
        .into_iter()
        .filter(|x| boundary_distance(spec, x) >= min_gap)
        .collect())
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || count == 0 {
        return Err(argument(format!("bad log-spaced range [{lo}, {hi}] × {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let r = (hi / lo).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| if i + 1 == count { hi } else { lo * (r * i as f64).exp() })
        .collect())
}
