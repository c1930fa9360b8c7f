//! Certification of two-sided Gaussian bounds on finite grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::kernel::HeatKernelEvaluator;
use crate::validation::{volumes, SCHEMA_VERSION};
use crate::volume::VolumeBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussScanSettings {
    pub times: Vec<f64>,
    /// Off-diagonal rows need `ratio_min ≤ ρ²/t ≤ ratio_max`.
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// On-diagonal rows have `ρ²/t ≤ diagonal_ratio`.
    pub diagonal_ratio: f64,
    pub max_exponent_spread: f64,
    pub max_diagonal_spread: f64,
    pub budget: VolumeBudget,
    pub max_volume_error: f64,
}

impl Default for GaussScanSettings {
    fn default() -> Self {
        Self {
            times: vec![0.02, 0.05, 0.1, 0.2, 0.5],
            ratio_min: 4.0,
            ratio_max: 25.0,
            diagonal_ratio: 0.25,
            max_exponent_spread: 25.0,
            max_diagonal_spread: 20.0,
            budget: VolumeBudget::default(),
            max_volume_error: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub rho: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub kernel: f64,
    pub tail: f64,
    /// `kernel · √(V_x V_y)`.
    pub n_value: f64,
    /// `-t ln N / ρ²` for admissible rows with `kernel > tail`.
    pub exponent: Option<f64>,
    pub diagonal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussBoundReport {
    pub schema_version: u32,
    pub spec: DomainSpec,
    pub settings: GaussScanSettings,
    pub rows: Vec<GaussRow>,
    pub admissible: usize,
    /// Admissible rows dropped because `kernel ≤ tail`.
    pub excluded: usize,
    /// Rows with `kernel + tail ≤ 0`.
    pub violations: usize,
    pub e_min: f64,
    pub e_max: f64,
    /// `(1/E_max, 1/E_min)`.
    pub c2_hat: f64,
    pub c4_hat: f64,
    pub n_lo: f64,
    pub n_hi: f64,
    pub verdict: bool,
}

/// Scans `N = e^{tL}(x,y)·√(V(x,√t)V(y,√t))` and `E = -t ln N / ρ²` over all
/// unordered grid pairs and times.
pub fn gauss_ratio_scan(
    ev: &HeatKernelEvaluator,
    grid: &[Vec<f64>],
    settings: &GaussScanSettings,
) -> Result<GaussBoundReport> {
    let spec = ev.basis().spec();
    if !(settings.ratio_min >= 4.0 && settings.ratio_max >= settings.ratio_min) {
        return Err(Error::Parameter(format!(
            "admissibility window [{}, {}] must start at 4 or above",
            settings.ratio_min, settings.ratio_max
        )));
    }
    let points: Vec<_> = grid.iter().map(|x| ev.point(x)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &t in &settings.times {
        let vols = volumes(spec, grid, t.sqrt(), &settings.budget, settings.max_volume_error)?;
        let pairs: Vec<(usize, usize)> = (0..grid.len())
            .flat_map(|a| (a..grid.len()).map(move |b| (a, b)))
            .collect();
        let found: Vec<Option<GaussRow>> = pairs
            .par_iter()
            .map(|&(a, b)| {
                let rho = distance(spec, &grid[a], &grid[b])?;
                let ratio = rho * rho / t;
                let diagonal = ratio <= settings.diagonal_ratio;
                if !diagonal && !(ratio >= settings.ratio_min && ratio <= settings.ratio_max) {
                    return Ok(None);
                }
                let kv = ev.heat_kernel_at(t, &points[a], &points[b])?;
                let n_value = kv.value * (vols[a] * vols[b]).sqrt();
                let exponent = (!diagonal && kv.value > kv.tail_bound).then(|| -t * n_value.ln() / (rho * rho));
                Ok(Some(GaussRow {
                    x: grid[a].clone(),
                    y: grid[b].clone(),
                    t,
                    rho,
                    v_x: vols[a],
                    v_y: vols[b],
                    kernel: kv.value,
                    tail: kv.tail_bound,
                    n_value,
                    exponent,
                    diagonal,
                }))
            })
            .collect::<Result<_>>()?;
        rows.extend(found.into_iter().flatten());
    }
    let admissible = rows.iter().filter(|r| !r.diagonal).count();
    let excluded = rows.iter().filter(|r| !r.diagonal && r.exponent.is_none()).count();
    let violations = rows.iter().filter(|r| r.kernel + r.tail <= 0.0).count();
    let es: Vec<f64> = rows.iter().filter_map(|r| r.exponent).collect();
    let e_min = es.iter().copied().fold(f64::INFINITY, f64::min);
    let e_max = es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ns: Vec<f64> = rows.iter().filter(|r| r.diagonal).map(|r| r.n_value).collect();
    let n_lo = ns.iter().copied().fold(f64::INFINITY, f64::min);
    let n_hi = ns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let verdict = !es.is_empty()
        && !ns.is_empty()
        && violations == 0
        && e_min > 0.0
        && e_max.is_finite()
        && e_max / e_min <= settings.max_exponent_spread
        && n_lo > 0.0
        && n_hi.is_finite()
        && n_hi / n_lo <= settings.max_diagonal_spread;
    Ok(GaussBoundReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        settings: settings.clone(),
        rows,
        admissible,
        excluded,
        violations,
        e_min,
        e_max,
        c2_hat: 1.0 / e_max,
        c4_hat: 1.0 / e_min,
        n_lo,
        n_hi,
        verdict,
    })
}
