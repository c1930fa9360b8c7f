//! Doubling of intrinsic ball measures and comparability with the surrogate.

use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{argument, Result};
use crate::validation::{volumes, SCHEMA_VERSION};
use crate::volume::{doubling_cap, surrogate_radius_limit, volume_surrogate, VolumeBudget};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingSettings {
    pub radii: Vec<f64>,
    pub budget: VolumeBudget,
    pub max_volume_error: f64,
    /// Largest accepted `max(V/V̂) / min(V/V̂)`.
    pub max_comparability_spread: f64,
}

impl Default for DoublingSettings {
    fn default() -> Self {
        Self {
            radii: vec![0.1, 0.2, 0.4, 0.8, std::f64::consts::FRAC_PI_2],
            budget: VolumeBudget::default(),
            max_volume_error: 0.05,
            max_comparability_spread: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub x: Vec<f64>,
    pub r: f64,
    pub v_r: f64,
    pub v_2r: f64,
    pub ratio: f64,
    /// `V(x, r) / V̂(x, r)`.
    pub comparability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub schema_version: u32,
    pub spec: DomainSpec,
    pub settings: DoublingSettings,
    pub rows: Vec<DoublingRow>,
    pub max_ratio: f64,
    pub cap: f64,
    pub comparability_min: f64,
    pub comparability_max: f64,
    pub comparability_spread: f64,
    pub verdict: bool,
}

/// `max V(x,2r)/V(x,r)` over grid and radii, and the spread of `V(x,r)/V̂(x,r)`
/// over the scanned `(x, r)` with `r` inside the surrogate's range.
pub fn doubling_scan(spec: &DomainSpec, grid: &[Vec<f64>], settings: &DoublingSettings) -> Result<DoublingReport> {
    if settings
        .radii
        .iter()
        .any(|r| !(*r > 0.0 && *r <= std::f64::consts::FRAC_PI_2 + 1e-15))
    {
        return Err(argument("doubling radii must lie in (0, π/2]"));
    }
    let mut rows = Vec::new();
    let mut comps = Vec::new();
    let limit = surrogate_radius_limit(spec);
    for &r in &settings.radii {
        let v1 = volumes(spec, grid, r, &settings.budget, settings.max_volume_error)?;
        let v2 = volumes(spec, grid, 2.0 * r, &settings.budget, settings.max_volume_error)?;
        for (i, x) in grid.iter().enumerate() {
            let c1 = v1[i] / volume_surrogate(spec, x, r)?;
            if r <= limit {
                comps.push(c1);
            }
            rows.push(DoublingRow {
                x: x.clone(),
                r,
                v_r: v1[i],
                v_2r: v2[i],
                ratio: v2[i] / v1[i],
                comparability: c1,
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let comparability_min = comps.iter().copied().fold(f64::INFINITY, f64::min);
    let comparability_max = comps.iter().copied().fold(0.0, f64::max);
    let comparability_spread = comparability_max / comparability_min;
    let cap = doubling_cap(spec);
    Ok(DoublingReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        settings: settings.clone(),
        verdict: !comps.is_empty() && max_ratio <= cap && comparability_spread <= settings.max_comparability_spread,
        rows,
        max_ratio,
        cap,
        comparability_min,
        comparability_max,
        comparability_spread,
    })
}
