//! Run configuration: a TOML file with defaults for every field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::degree_cap;
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::kernel::MultiplierSpec;
use crate::poly::MultiPoly;
use crate::precision::Precision;
use crate::volume::VolumeBudget;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    /// Defaults to the double-precision degree cap for the domain.
    pub max_degree: Option<usize>,
    /// Defaults to extended on simplices of dimension 2 and up, double elsewhere.
    pub precision: Option<Precision>,
    /// Largest accepted eigen-residual in the `ops` suite.
    pub eigen_tolerance: f64,
    /// Largest accepted Gram residual in the `basis` suite.
    pub gram_tolerance: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            max_degree: None,
            precision: None,
            eigen_tolerance: 1e-8,
            gram_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub epsilon: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { epsilon: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Gauss–Jacobi nodes per direction before clipping.
    pub size: usize,
    /// Smallest intrinsic distance to the boundary.
    pub min_gap: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            size: 10,
            min_gap: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub times: Vec<f64>,
    /// `(s, t)` pairs for the semigroup check.
    pub semigroup: Vec<[f64; 2]>,
    pub points: usize,
    pub mass_tolerance: f64,
    pub semigroup_tolerance: f64,
    pub symmetry_tolerance: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            times: vec![0.05, 0.2, 1.0, 5.0],
            semigroup: vec![[0.3, 0.2], [0.5, 0.5]],
            points: 10,
            mass_tolerance: 1e-6,
            semigroup_tolerance: 1e-6,
            symmetry_tolerance: 1e-13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussConfig {
    pub times: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub diagonal_ratio: f64,
    pub max_exponent_spread: f64,
    pub max_diagonal_spread: f64,
}

impl Default for GaussConfig {
    fn default() -> Self {
        Self {
            times: vec![0.02, 0.05, 0.1, 0.2, 0.5],
            ratio_min: 4.0,
            ratio_max: 25.0,
            diagonal_ratio: 0.25,
            max_exponent_spread: 25.0,
            max_diagonal_spread: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingConfig {
    pub radii: Vec<f64>,
    pub max_comparability_spread: f64,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.1, 0.2, 0.4, 0.8, std::f64::consts::FRAC_PI_2],
            max_comparability_spread: 30.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    /// Random `(f, h)` pairs.
    pub pairs: usize,
    pub degree: u32,
    pub tolerance: f64,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            pairs: 20,
            degree: 6,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluxConfig {
    pub epsilons: Vec<f64>,
    /// Test function; defaults to `x₁²` on the ball, `x` on 1-D domains and
    /// `x₁ − x₂ + (x₁ + x₂)²` on simplices.
    pub f: Option<MultiPoly>,
    pub slope_tolerance: f64,
    pub min_r_squared: f64,
}

impl Default for FluxConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.02, 0.01],
            f: None,
            slope_tolerance: 0.1,
            min_r_squared: 0.98,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChartConfig {
    pub samples: usize,
    pub polynomials: usize,
    pub degree: u32,
    pub tolerance: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            polynomials: 5,
            degree: 5,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrespondenceConfig {
    pub max_k: usize,
    pub times: Vec<f64>,
    pub points: usize,
    pub tolerance: f64,
}

impl Default for CorrespondenceConfig {
    fn default() -> Self {
        Self {
            max_k: 30,
            times: vec![0.2, 1.0],
            points: 16,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeConfig {
    pub deltas: Vec<f64>,
    pub radius: f64,
    /// Defaults to `n + 2`.
    pub order: Option<u32>,
    /// 1-D grids use this many θ-uniform points; otherwise `grid.size` applies.
    pub points: usize,
    pub bins: usize,
    pub min_r_squared: f64,
    /// Largest accepted ratio between the `c_m` of different `δ`.
    pub max_c_ratio: f64,
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.05, 0.1],
            radius: 3.0,
            order: None,
            points: 200,
            bins: 10,
            min_r_squared: 0.98,
            max_c_ratio: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FspConfig {
    pub deltas: Vec<f64>,
    pub band: f64,
    /// Smoothness order `m`; the multiplier tail decays like `(δ√λ)^{-2m}`.
    pub order: u32,
    pub points: usize,
    pub threshold: f64,
    pub max_tail: f64,
    /// Largest accepted `max c* / min c*` across `δ`.
    pub max_spread: f64,
}

impl Default for FspConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.05, 0.1],
            band: 2.0,
            order: 10,
            points: 200,
            threshold: 1e-8,
            max_tail: 1e-12,
            max_spread: 1.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    pub times: Vec<f64>,
    /// Quadrature order per direction for the exported nodes.
    pub resolution: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            times: vec![1.0],
            resolution: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    pub min_samples: u64,
    pub max_samples: u64,
    pub rel_tol: f64,
    /// Estimates with a larger relative standard error are refused.
    pub max_rel_error: f64,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        Self {
            min_samples: 20_000,
            max_samples: 1_000_000,
            rel_tol: 0.005,
            max_rel_error: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Required by every suite that draws Monte Carlo samples.
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub domain: DomainSpec,
    pub basis: BasisConfig,
    pub truncation: TruncationConfig,
    pub grid: GridConfig,
    pub volume: VolumeConfig,
    pub kernel: KernelConfig,
    pub gauss: GaussConfig,
    pub doubling: DoublingConfig,
    pub green: GreenConfig,
    pub flux: FluxConfig,
    pub chart: ChartConfig,
    pub correspondence: CorrespondenceConfig,
    pub localize: LocalizeConfig,
    pub fsp: FspConfig,
    pub export: ExportConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("spectral-heat-out"),
            domain: DomainSpec::interval(-0.5, -0.5).expect("valid default"),
            basis: BasisConfig::default(),
            truncation: TruncationConfig::default(),
            grid: GridConfig::default(),
            volume: VolumeConfig::default(),
            kernel: KernelConfig::default(),
            gauss: GaussConfig::default(),
            doubling: DoublingConfig::default(),
            green: GreenConfig::default(),
            flux: FluxConfig::default(),
            chart: ChartConfig::default(),
            correspondence: CorrespondenceConfig::default(),
            localize: LocalizeConfig::default(),
            fsp: FspConfig::default(),
            export: ExportConfig::default(),
        }
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(field, format!("must be positive and finite, got {v}")))
    }
}

fn all_positive(field: &str, vs: &[f64]) -> Result<()> {
    if vs.is_empty() {
        return Err(config_error(field, "must not be empty"));
    }
    vs.iter().try_for_each(|v| positive(field, *v))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| text[..s.start].lines().count().to_string())
                .map_or_else(|| "config".to_string(), |line| format!("line {line}"));
            config_error(&field, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| config_error("config", e.to_string()))
    }

    /// Degree actually built: the configured value or the double-precision cap.
    pub fn max_degree(&self) -> usize {
        self.basis
            .max_degree
            .unwrap_or_else(|| degree_cap(&self.domain, Precision::Double))
    }

    /// Working precision of the basis. Double-precision simplex bases in two or
    /// more dimensions carry eigenspace contamination near 1e-8, which shows up
    /// in small-time kernels well above their truncation bound.
    pub fn precision(&self) -> Precision {
        self.basis.precision.unwrap_or(
            if self.domain.kind() == crate::domain::DomainKind::Simplex && self.domain.dim() >= 2 {
                Precision::Extended
            } else {
                Precision::Double
            },
        )
    }

    pub fn budget(&self) -> Result<VolumeBudget> {
        let seed = self
            .seed
            .ok_or_else(|| config_error("seed", "a seed is required for suites that use Monte Carlo volumes"))?;
        Ok(VolumeBudget {
            min_samples: self.volume.min_samples,
            max_samples: self.volume.max_samples,
            rel_tol: self.volume.rel_tol,
            seed,
        })
    }

    /// Bump multiplier used by the localization suite.
    pub fn bump(&self) -> MultiplierSpec {
        MultiplierSpec::SmoothBump {
            radius: self.localize.radius,
            order: self.localize.order.unwrap_or(self.domain.dim() as u32 + 2),
        }
    }

    pub fn sinc(&self) -> MultiplierSpec {
        MultiplierSpec::SincPower {
            band: self.fsp.band,
            order: self.fsp.order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cap = degree_cap(&self.domain, self.precision());
        match self.basis.max_degree {
            Some(0) => return Err(config_error("basis.max_degree", "must be at least 1")),
            Some(d) if d > cap => {
                return Err(config_error(
                    "basis.max_degree",
                    format!("{d} exceeds the cap {cap}; use extended precision or a lower degree"),
                ))
            }
            _ => {}
        }
        positive("basis.eigen_tolerance", self.basis.eigen_tolerance)?;
        positive("basis.gram_tolerance", self.basis.gram_tolerance)?;
        positive("truncation.epsilon", self.truncation.epsilon)?;
        if self.grid.size == 0 {
            return Err(config_error("grid.size", "must be at least 1"));
        }
        if !(self.grid.min_gap >= 0.0 && self.grid.min_gap < 0.5) {
            return Err(config_error("grid.min_gap", "must lie in [0, 0.5)"));
        }
        if self.volume.max_samples == 0 || self.volume.min_samples > self.volume.max_samples {
            return Err(config_error(
                "volume.max_samples",
                "must be positive and at least min_samples",
            ));
        }
        positive("volume.max_rel_error", self.volume.max_rel_error)?;
        all_positive("kernel.times", &self.kernel.times)?;
        for p in &self.kernel.semigroup {
            all_positive("kernel.semigroup", p)?;
        }
        all_positive("gauss.times", &self.gauss.times)?;
        if self.gauss.ratio_min < 4.0 || self.gauss.ratio_max < self.gauss.ratio_min {
            return Err(config_error(
                "gauss.ratio_min",
                "the window must satisfy 4 ≤ ratio_min ≤ ratio_max",
            ));
        }
        all_positive("doubling.radii", &self.doubling.radii)?;
        if self.doubling.radii.iter().any(|r| *r > std::f64::consts::FRAC_PI_2) {
            return Err(config_error("doubling.radii", "radii must not exceed π/2"));
        }
        all_positive("flux.epsilons", &self.flux.epsilons)?;
        if let Some(f) = &self.flux.f {
            if f.dimension() != self.domain.dim() {
                return Err(config_error("flux.f", "dimension does not match the domain"));
            }
        }
        if self.chart.samples == 0 {
            return Err(config_error("chart.samples", "must be at least 1"));
        }
        all_positive("correspondence.times", &self.correspondence.times)?;
        all_positive("localize.deltas", &self.localize.deltas)?;
        positive("localize.radius", self.localize.radius)?;
        all_positive("fsp.deltas", &self.fsp.deltas)?;
        positive("fsp.band", self.fsp.band)?;
        if self.fsp.order == 0 {
            return Err(config_error("fsp.order", "must be at least 1"));
        }
        all_positive("export.times", &self.export.times)?;
        if self.export.resolution == 0 {
            return Err(config_error("export.resolution", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg =
            RunConfig::from_toml("seed = 3\n[domain]\nkind = \"ball\"\nn = 2\ngamma = 0.5\n[basis]\nmax_degree = 12\n")
                .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.max_degree(), 12);
        assert_eq!(cfg.gauss, GaussConfig::default());
        assert_eq!(cfg.bump(), MultiplierSpec::SmoothBump { radius: 3.0, order: 4 });
    }

    #[test]
    fn bad_gamma_names_the_constraint() {
        let err = RunConfig::from_toml("[domain]\nkind = \"ball\"\nn = 2\ngamma = -0.6\n").unwrap_err();
        assert!(err.to_string().contains("γ > −1/2"), "{err}");
    }

    #[test]
    fn unknown_and_invalid_fields() {
        assert!(RunConfig::from_toml("sed = 3\n").is_err());
        let err = RunConfig::from_toml("[grid]\nsize = 0\n").unwrap_err();
        assert!(err.to_string().contains("grid.size"));
        let err = RunConfig::from_toml("[basis]\nmax_degree = 900\n").unwrap_err();
        assert!(err.to_string().contains("basis.max_degree"));
    }

    #[test]
    fn seed_is_required_for_volumes() {
        let err = RunConfig::default().budget().unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn precision_defaults_by_domain() {
        let mut cfg = RunConfig::default();
        assert_eq!(cfg.precision(), Precision::Double);
        cfg.domain = DomainSpec::simplex(vec![0.5; 3]).unwrap();
        assert_eq!(cfg.precision(), Precision::Extended);
        assert_eq!(cfg.max_degree(), 40);
        cfg.basis.precision = Some(Precision::Double);
        assert_eq!(cfg.precision(), Precision::Double);
        cfg.domain = DomainSpec::simplex(vec![0.5; 2]).unwrap();
        cfg.basis.precision = None;
        assert_eq!(cfg.precision(), Precision::Double);
    }
}
