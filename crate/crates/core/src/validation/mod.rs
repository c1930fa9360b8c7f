//! Numerical checks of the heat-kernel and geometry properties on finite grids.

pub mod chart;
pub mod correspondence;
pub mod doubling;
pub mod fit;
pub mod gauss;
pub mod green;
pub mod grid;
pub mod localize;

use rand::Rng;
use rayon::prelude::*;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::poly::{MultiIndex, MultiPoly};
use crate::volume::{ball_volume, VolumeBudget};

/// Version tag written into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Polynomial of total degree `degree` with coefficients uniform in `[-1, 1]`.
pub fn random_poly<R: Rng + ?Sized>(rng: &mut R, dim: usize, degree: u32) -> MultiPoly {
    let terms: Vec<_> = MultiIndex::up_to_degree(dim, degree)
        .into_iter()
        .map(|m| (m, rng.random_range(-1.0..=1.0)))
        .collect();
    MultiPoly::from_terms(dim, terms).expect("indices match the dimension")
}

/// `V(x, r)` at every grid point, refusing Monte Carlo estimates whose relative
/// standard error exceeds `max_rel_error`.
pub(crate) fn volumes(
    spec: &DomainSpec,
    grid: &[Vec<f64>],
    r: f64,
    budget: &VolumeBudget,
    max_rel_error: f64,
) -> Result<Vec<f64>> {
    grid.par_iter()
        .map(|x| {
            let v = ball_volume(spec, x, r, budget)?;
            let rel = v.relative_error();
            if !(rel <= max_rel_error) {
                return Err(Error::Accuracy(format!(
                    "volume at {x:?}, r = {r}: relative error {rel:.3e} exceeds {max_rel_error}"
                )));
            }
            Ok(v.value)
        })
        .collect()
}
