//! Localization of compactly supported multipliers and finite propagation of
//! band-limited ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::geometry::distance;
use crate::kernel::{HeatKernelEvaluator, KernelPoint, MultiplierSpec};
use crate::validation::fit::{log_log_fit, LinearFit};
use crate::validation::{volumes, SCHEMA_VERSION};
use crate::volume::VolumeBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizationSettings {
    /// Decay exponent `m` in `(1 + ρ/δ)^m`.
    pub order: u32,
    /// Fit window for `ρ/δ`.
    pub fit_min: f64,
    pub fit_max: f64,
    pub bins: usize,
    /// Rows whose error floor exceeds this fraction of `|K|` are dropped.
    pub floor_fraction: f64,
    /// Largest accepted fraction of dropped rows inside the fit window.
    pub max_excluded: f64,
    pub min_r_squared: f64,
    pub budget: VolumeBudget,
    pub max_volume_error: f64,
}

impl Default for LocalizationSettings {
    fn default() -> Self {
        Self {
            order: 4,
            fit_min: 2.0,
            fit_max: 20.0,
            bins: 10,
            floor_fraction: 0.1,
            max_excluded: 0.2,
            min_r_squared: 0.98,
            budget: VolumeBudget::default(),
            max_volume_error: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rho: f64,
    pub kernel: f64,
    pub floor: f64,
    /// `|K|·√(V(x,δ)V(y,δ))·(1+ρ/δ)^m`.
    pub normalized: f64,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub schema_version: u32,
    pub spec: DomainSpec,
    pub multiplier: MultiplierSpec,
    pub delta: f64,
    pub settings: LocalizationSettings,
    pub rows: Vec<LocalizationRow>,
    /// `max` of the normalized quantity.
    pub c_m: f64,
    /// Fit of the upper envelope of `|K|√(V_x V_y)` against `1 + ρ/δ`.
    pub envelope_fit: Option<LinearFit>,
    /// Negated envelope slope.
    pub decay_exponent: f64,
    pub excluded: usize,
    pub in_window: usize,
    pub verdict: bool,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect()
}

/// Evaluates `Φ(δ√-L)(x,y)` on all grid pairs, bounds the normalized quantity
/// and fits the decay of its upper envelope in `ρ/δ`.
pub fn localization_check(
    ev: &HeatKernelEvaluator,
    phi: &MultiplierSpec,
    delta: f64,
    grid: &[Vec<f64>],
    settings: &LocalizationSettings,
) -> Result<LocalizationReport> {
    ev.check_multiplier(phi, delta)?;
    let spec = ev.basis().spec();
    if (settings.order as usize) < spec.dim() + 1 {
        return Err(Error::Parameter(format!(
            "localization order m = {} must be at least n + 1 = {}",
            settings.order,
            spec.dim() + 1
        )));
    }
    let points: Vec<KernelPoint> = grid.iter().map(|x| ev.point(x)).collect::<Result<_>>()?;
    let vols = volumes(spec, grid, delta, &settings.budget, settings.max_volume_error)?;
    let m = settings.order as i32;
    let rows: Vec<LocalizationRow> = pairs(grid.len())
        .par_iter()
        .map(|&(a, b)| {
            let rho = distance(spec, &grid[a], &grid[b])?;
            let kv = ev.multiplier_kernel_at(phi, delta, &points[a], &points[b])?;
            let floor = kv.tail_bound + 64.0 * f64::EPSILON * kv.magnitude;
            let normalized = kv.value.abs() * (vols[a] * vols[b]).sqrt() * (1.0 + rho / delta).powi(m);
            Ok(LocalizationRow {
                x: grid[a].clone(),
                y: grid[b].clone(),
                rho,
                kernel: kv.value,
                floor,
                normalized,
                excluded: floor > settings.floor_fraction * kv.value.abs(),
            })
        })
        .collect::<Result<_>>()?;
    let c_m = rows
        .iter()
        .filter(|r| !r.excluded || r.rho / delta < settings.fit_min)
        .map(|r| r.normalized)
        .fold(0.0, f64::max);
    let window: Vec<&LocalizationRow> = rows
        .iter()
        .filter(|r| {
            let s = r.rho / delta;
            s >= settings.fit_min && s <= settings.fit_max
        })
        .collect();
    let excluded = window.iter().filter(|r| r.excluded).count();
    let in_window = window.len();
    if in_window > 0 && excluded as f64 > settings.max_excluded * in_window as f64 {
        return Err(Error::Accuracy(format!(
            "{excluded} of {in_window} localization rows sit below the rounding floor; the decay fit \
             is not supported by the data"
        )));
    }
    let envelope_fit = envelope(&window, delta, settings)?;
    let decay_exponent = envelope_fit.as_ref().map_or(f64::NAN, |f| -f.slope);
    let verdict = c_m.is_finite()
        && c_m > 0.0
        && envelope_fit
            .as_ref()
            .is_some_and(|f| -f.slope >= settings.order as f64 - 0.5 && f.r_squared >= settings.min_r_squared);
    Ok(LocalizationReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        multiplier: *phi,
        delta,
        settings: settings.clone(),
        rows,
        c_m,
        envelope_fit,
        decay_exponent,
        excluded,
        in_window,
        verdict,
    })
}

/// Upper envelope `sup_{1+ρ/δ ≥ s} |K|√(V_x V_y)` at log-spaced `s`, fitted log-log.
fn envelope(window: &[&LocalizationRow], delta: f64, s: &LocalizationSettings) -> Result<Option<LinearFit>> {
    let (lo, hi) = ((1.0 + s.fit_min).ln(), (1.0 + s.fit_max).ln());
    let bins = s.bins.max(2);
    let m = s.order as i32;
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|r| !r.excluded)
        .map(|r| {
            let u = 1.0 + r.rho / delta;
            (u, r.normalized / u.powi(m))
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..bins)
        .map(|i| {
            let edge = (lo + (hi - lo) * i as f64 / bins as f64).exp();
            let sup = pts.iter().filter(|p| p.0 >= edge).map(|p| p.1).fold(0.0, f64::max);
            (edge, sup)
        })
        .filter(|p| p.1 > 0.0)
        .unzip();
    if xs.len() < 3 {
        return Ok(None);
    }
    log_log_fit(&xs, &ys).map(Some)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteSpeedSettings {
    /// Pairs with `|K|` above this count as inside the propagation region.
    pub threshold: f64,
    /// Largest accepted truncation tail.
    pub max_tail: f64,
}

impl Default for FiniteSpeedSettings {
    fn default() -> Self {
        Self {
            threshold: 1e-8,
            max_tail: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedReport {
    pub schema_version: u32,
    pub spec: DomainSpec,
    pub multiplier: MultiplierSpec,
    pub delta: f64,
    pub settings: FiniteSpeedSettings,
    /// `mA`.
    pub fourier_support: f64,
    /// Largest `ρ` with `|K| > threshold`.
    pub r_star: f64,
    /// `r* / (δ·mA)`.
    pub c_star: f64,
    pub max_rho: f64,
    pub max_tail: f64,
    /// Every pair stays above the threshold, so `r*` only reflects the grid diameter.
    pub degenerate: bool,
    pub verdict: bool,
}

/// Measures the empirical propagation radius of a band-limited multiplier.
pub fn finite_speed_scan(
    ev: &HeatKernelEvaluator,
    phi: &MultiplierSpec,
    delta: f64,
    grid: &[Vec<f64>],
    settings: &FiniteSpeedSettings,
) -> Result<FiniteSpeedReport> {
    let support = phi
        .fourier_support()
        .ok_or_else(|| Error::Parameter("finite speed needs a band-limited multiplier".into()))?;
    ev.check_multiplier(phi, delta)?;
    let spec = ev.basis().spec();
    let points: Vec<KernelPoint> = grid.iter().map(|x| ev.point(x)).collect::<Result<_>>()?;
    let found: Vec<(f64, f64, f64)> = pairs(grid.len())
        .par_iter()
        .map(|&(a, b)| {
            let rho = distance(spec, &grid[a], &grid[b])?;
            let kv = ev.multiplier_kernel_at(phi, delta, &points[a], &points[b])?;
            Ok((rho, kv.value.abs(), kv.tail_bound))
        })
        .collect::<Result<_>>()?;
    let max_tail = found.iter().map(|f| f.2).fold(0.0, f64::max);
    if max_tail > settings.max_tail {
        return Err(Error::Accuracy(format!(
            "multiplier truncation tail {max_tail:.3e} exceeds {:.1e}; raise the order or the degree",
            settings.max_tail
        )));
    }
    let max_rho = found.iter().map(|f| f.0).fold(0.0, f64::max);
    let r_star = found
        .iter()
        .filter(|f| f.1 > settings.threshold)
        .map(|f| f.0)
        .fold(0.0, f64::max);
    let degenerate = found.iter().all(|f| f.1 > settings.threshold);
    let c_star = r_star / (delta * support);
    Ok(FiniteSpeedReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        multiplier: *phi,
        delta,
        settings: settings.clone(),
        fourier_support: support,
        r_star,
        c_star,
        max_rho,
        max_tail,
        degenerate,
        verdict: !degenerate && c_star.is_finite() && c_star > 0.0,
    })
}

/// Largest ratio between the `c*` estimates of several reports.
pub fn speed_spread(reports: &[FiniteSpeedReport]) -> f64 {
    let hi = reports.iter().map(|r| r.c_star).fold(0.0, f64::max);
    let lo = reports.iter().map(|r| r.c_star).fold(f64::INFINITY, f64::min);
    hi / lo
}
