//! Spectral heat kernel and multiplier kernels with Cauchy–Schwarz tail bounds.

use std::f64::consts::E;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{eigenvalue, OrthonormalBasis};
use crate::error::{argument, Error, Result};

/// Levels inspected when estimating growth past the cap.
const TAIL_WINDOW: usize = 5;
/// Largest admissible geometric ratio of the heat tail past the cap.
const MAX_TAIL_RATIO: f64 = 0.9;

/// Truncation settings for series evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Absolute tail target.
    pub epsilon: f64,
    /// Smallest admissible time.
    pub t_min: f64,
    /// Highest level summed.
    pub hard_cap: usize,
}

impl TruncationPolicy {
    /// Defaults for a basis: `epsilon = 1e-10`, `t_min = 30 / λ_cap`.
    pub fn for_basis(basis: &OrthonormalBasis) -> Self {
        let cap = basis.max_degree();
        Self {
            epsilon: 1e-10,
            t_min: 30.0 / eigenvalue(basis.spec(), cap).max(f64::MIN_POSITIVE),
            hard_cap: cap,
        }
    }

    fn validate(&self, basis: &OrthonormalBasis) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.t_min > 0.0 && self.t_min.is_finite()) {
            return Err(Error::Parameter(format!("t_min must be positive, got {}", self.t_min)));
        }
        if self.hard_cap == 0 || self.hard_cap > basis.max_degree() {
            return Err(Error::Parameter(format!(
                "hard_cap must lie in 1..={}, got {}",
                basis.max_degree(),
                self.hard_cap
            )));
        }
        Ok(())
    }
}

/// Spectral multiplier profile `Φ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MultiplierSpec {
    /// `Φ(u) = e^{-u²}`.
    HeatExp,
    /// `Φ(u) = e·exp(-1/(1-(u/R)²))` on `|u| < R`, zero outside.
    SmoothBump { radius: f64, order: u32 },
    /// `Φ(u) = (sin(Au/2)/(Au/2))^{2m}`; `Φ̂` is supported in `[-mA, mA]`.
    SincPower { band: f64, order: u32 },
}

impl MultiplierSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MultiplierSpec::HeatExp => Ok(()),
            MultiplierSpec::SmoothBump { radius, order } => {
                if !(radius > 0.0 && radius.is_finite()) || order == 0 {
                    return Err(Error::Parameter(format!(
                        "SmoothBump needs radius > 0 and order ≥ 1, got R={radius}, m={order}"
                    )));
                }
                Ok(())
            }
            MultiplierSpec::SincPower { band, order } => {
                if !(band > 0.0 && band.is_finite()) || order == 0 {
                    return Err(Error::Parameter(format!(
                        "SincPower needs band > 0 and order ≥ 1, got A={band}, m={order}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `Φ(u)`.
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            MultiplierSpec::HeatExp => (-u * u).exp(),
            MultiplierSpec::SmoothBump { radius, .. } => {
                let s = u / radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    E * (-1.0 / (1.0 - s * s)).exp()
                }
            }
            MultiplierSpec::SincPower { band, order } => {
                let h = 0.5 * band * u;
                let s = if h.abs() < 1e-4 { 1.0 - h * h / 6.0 } else { h.sin() / h };
                s.powi(2 * order as i32)
            }
        }
    }

    /// Radius of the spectral support, if compact.
    pub fn support(&self) -> Option<f64> {
        match *self {
            MultiplierSpec::SmoothBump { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// Radius `mA` of the Fourier support for `SincPower`.
    pub fn fourier_support(&self) -> Option<f64> {
        match *self {
            MultiplierSpec::SincPower { band, order } => Some(band * order as f64),
            _ => None,
        }
    }
}

/// A kernel value with its truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub tail_bound: f64,
    /// Highest level included in `value`.
    pub levels: usize,
    /// `Σ |Φ_k| √(C_k(x) C_k(y))` over the included levels, a scale for
    /// rounding error.
    pub magnitude: f64,
}

/// Member values and Christoffel diagonals at a point, reusable across times.
#[derive(Clone, Debug)]
pub struct KernelPoint {
    x: Vec<f64>,
    values: Vec<f64>,
    christoffel: Vec<f64>,
}

impl KernelPoint {
    pub fn coords(&self) -> &[f64] {
        &self.x
    }

    /// `C_k(x)` for `k ≤ hard_cap`.
    pub fn christoffel(&self) -> &[f64] {
        &self.christoffel
    }
}

/// Evaluator of `e^{tL}(x, y) = Σ e^{-λ_k t} P̃_k(x, y)` and `Φ(δ√-L)(x, y)`.
#[derive(Debug)]
pub struct HeatKernelEvaluator {
    basis: OrthonormalBasis,
    policy: TruncationPolicy,
    lambdas: Vec<f64>,
    nodes: OnceLock<Vec<KernelPoint>>,
}

impl HeatKernelEvaluator {
    pub fn new(basis: OrthonormalBasis) -> Result<Self> {
        let policy = TruncationPolicy::for_basis(&basis);
        Self::with_policy(basis, policy)
    }

    pub fn with_policy(basis: OrthonormalBasis, policy: TruncationPolicy) -> Result<Self> {
        policy.validate(&basis)?;
        let lambdas = basis.eigen().lambdas[..=policy.hard_cap].to_vec();
        Ok(Self {
            basis,
            policy,
            lambdas,
            nodes: OnceLock::new(),
        })
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Precomputes member values at `x`.
    pub fn point(&self, x: &[f64]) -> Result<KernelPoint> {
        self.basis.spec().check_contains(x)?;
        Ok(self.point_unchecked(x))
    }

    fn point_unchecked(&self, x: &[f64]) -> KernelPoint {
        let cap = self.policy.hard_cap;
        let values = self.basis.values_unchecked(x, self.basis.members(cap).end);
        let christoffel = (0..=cap)
            .map(|k| self.basis.members(k).map(|m| values[m] * values[m]).sum())
            .collect();
        KernelPoint {
            x: x.to_vec(),
            values,
            christoffel,
        }
    }

    fn level_dot(&self, k: usize, px: &KernelPoint, py: &KernelPoint) -> f64 {
        self.basis.members(k).map(|m| px.values[m] * py.values[m]).sum()
    }

    /// Points at the quadrature nodes of the basis, computed once.
    pub fn node_points(&self) -> &[KernelPoint] {
        self.nodes.get_or_init(|| {
            self.basis
                .quadrature()
                .nodes
                .par_iter()
                .map(|x| self.point_unchecked(x))
                .collect()
        })
    }

    fn window(&self) -> std::ops::Range<usize> {
        let cap = self.policy.hard_cap;
        cap.saturating_sub(TAIL_WINDOW)..cap
    }

    /// Geometric ratio of the heat tail past the cap at time `t`.
    pub fn tail_ratio(&self, t: f64) -> f64 {
        let sup = self.basis.node_sup();
        self.window()
            .map(|k| {
                let growth = if sup[k] > 0.0 {
                    sup[k + 1] / sup[k]
                } else {
                    f64::INFINITY
                };
                (-(self.lambdas[k + 1] - self.lambdas[k]) * t).exp() * growth
            })
            .fold(0.0, f64::max)
    }

    /// Smallest time at which the tail ratio is admissible.
    fn ratio_time(&self) -> f64 {
        let (mut lo, mut hi) = (0.0, self.policy.t_min.max(1e-6));
        while self.tail_ratio(hi) > MAX_TAIL_RATIO {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.tail_ratio(mid) > MAX_TAIL_RATIO {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// `(value, tail_bound)` of the heat kernel at time `t`.
    pub fn heat_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        self.check_time(t)?;
        let px = self.point(x)?;
        let py = self.point(y)?;
        self.heat_kernel_at(t, &px, &py)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(argument(format!("time must be finite, got {t}")));
        }
        if t < self.policy.t_min {
            return Err(Error::UnderResolved {
                t,
                t_needed: self.policy.t_min,
            });
        }
        Ok(())
    }

    /// As [`heat_kernel`](Self::heat_kernel) with precomputed points.
    pub fn heat_kernel_at(&self, t: f64, px: &KernelPoint, py: &KernelPoint) -> Result<KernelValue> {
        self.check_time(t)?;
        let cap = self.policy.hard_cap;
        let q = self.tail_ratio(t);
        if q > MAX_TAIL_RATIO {
            return Err(Error::UnderResolved {
                t,
                t_needed: self.ratio_time(),
            });
        }
        let a: Vec<f64> = (0..=cap)
            .map(|k| (-self.lambdas[k] * t).exp() * (px.christoffel[k] * py.christoffel[k]).sqrt())
            .collect();
        let lead = self
            .window()
            .chain(std::iter::once(cap))
            .map(|j| a[j] * q.powi((cap - j) as i32))
            .fold(0.0, f64::max);
        let mut tail = lead * q / (1.0 - q);
        // tail[k] = Σ_{j>k} a_j + extrapolation; find the smallest adequate k
        let mut suffix = vec![0.0; cap + 1];
        for k in (0..=cap).rev() {
            suffix[k] = tail;
            tail += a[k];
        }
        let levels = (0..=cap).find(|&k| suffix[k] <= self.policy.epsilon).unwrap_or(cap);
        let value = (0..=levels)
            .map(|k| (-self.lambdas[k] * t).exp() * self.level_dot(k, px, py))
            .sum();
        Ok(KernelValue {
            value,
            tail_bound: suffix[levels],
            levels,
            magnitude: a[..=levels].iter().sum(),
        })
    }

    /// `∫ e^{tL}(x, y) dμ(y)` by the basis quadrature.
    pub fn mass_check(&self, t: f64, x: &[f64]) -> Result<f64> {
        let px = self.point(x)?;
        let w = &self.basis.quadrature().weights;
        self.node_points()
            .par_iter()
            .zip(w.par_iter())
            .map(|(py, wq)| Ok(wq * self.heat_kernel_at(t, &px, py)?.value))
            .sum()
    }

    /// `|e^{(s+t)L}(x, z) − ∫ e^{sL}(x, y) e^{tL}(y, z) dμ(y)|`.
    pub fn semigroup_check(&self, s: f64, t: f64, x: &[f64], z: &[f64]) -> Result<f64> {
        let px = self.point(x)?;
        let pz = self.point(z)?;
        let direct = self.heat_kernel_at(s + t, &px, &pz)?.value;
        let w = &self.basis.quadrature().weights;
        let composed: f64 = self
            .node_points()
            .par_iter()
            .zip(w.par_iter())
            .map(|(py, wq)| Ok(wq * self.heat_kernel_at(s, &px, py)?.value * self.heat_kernel_at(t, py, &pz)?.value))
            .sum::<Result<f64>>()?;
        Ok((direct - composed).abs())
    }

    /// `Φ(δ√-L)(x, y) = Σ Φ(δ√λ_k) P̃_k(x, y)`.
    pub fn multiplier_kernel(&self, phi: &MultiplierSpec, delta: f64, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        let px = self.point(x)?;
        let py = self.point(y)?;
        self.multiplier_kernel_at(phi, delta, &px, &py)
    }

    /// Checks that `phi` and `delta` can be resolved by this evaluator.
    pub fn check_multiplier(&self, phi: &MultiplierSpec, delta: f64) -> Result<()> {
        phi.validate()?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
        }
        let cap = self.policy.hard_cap;
        match *phi {
            MultiplierSpec::HeatExp => self.check_time(delta * delta),
            MultiplierSpec::SmoothBump { radius, .. } => {
                let top = delta * self.lambdas[cap].sqrt();
                if top < radius {
                    return Err(Error::Capacity(format!(
                        "δ√λ_cap = {top:.4} is below the bump radius {radius}; raise the degree or δ \
                         (δ ≥ {:.4})",
                        radius / self.lambdas[cap].sqrt()
                    )));
                }
                Ok(())
            }
            MultiplierSpec::SincPower { order, .. } => {
                let p = self.growth_power();
                if 2.0 * order as f64 - p <= 1.5 {
                    return Err(Error::Capacity(format!(
                        "SincPower order {order} decays too slowly against Christoffel growth k^{p:.2}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// As [`multiplier_kernel`](Self::multiplier_kernel) with precomputed points.
    pub fn multiplier_kernel_at(
        &self,
        phi: &MultiplierSpec,
        delta: f64,
        px: &KernelPoint,
        py: &KernelPoint,
    ) -> Result<KernelValue> {
        self.check_multiplier(phi, delta)?;
        let cap = self.policy.hard_cap;
        match *phi {
            MultiplierSpec::HeatExp => self.heat_kernel_at(delta * delta, px, py),
            MultiplierSpec::SmoothBump { .. } | MultiplierSpec::SincPower { .. } => {
                let mut value = 0.0;
                let mut magnitude = 0.0;
                let mut levels = 0;
                for k in 0..=cap {
                    let f = phi.eval(delta * self.lambdas[k].sqrt());
                    if f == 0.0 {
                        continue;
                    }
                    levels = k;
                    value += f * self.level_dot(k, px, py);
                    magnitude += f.abs() * (px.christoffel[k] * py.christoffel[k]).sqrt();
                }
                let tail_bound = match *phi {
                    MultiplierSpec::SincPower { band, order } => self.sinc_tail(band, order, delta, px, py),
                    _ => 0.0,
                };
                Ok(KernelValue {
                    value,
                    tail_bound,
                    levels,
                    magnitude,
                })
            }
        }
    }

    /// Power `p` with `C_k ≈ k^p` over the last levels, from node suprema.
    fn growth_power(&self) -> f64 {
        let cap = self.policy.hard_cap;
        let lo = cap.saturating_sub(TAIL_WINDOW).max(1);
        if lo >= cap {
            return 0.0;
        }
        let sup = self.basis.node_sup();
        ((sup[cap] / sup[lo]).ln() / (cap as f64 / lo as f64).ln()).max(0.0)
    }

    /// Bound on `Σ_{k>cap} |Φ(δ√λ_k)| √(C_k(x) C_k(y))` with `C_k` continued as `k^p`.
    fn sinc_tail(&self, band: f64, order: u32, delta: f64, px: &KernelPoint, py: &KernelPoint) -> f64 {
        let cap = self.policy.hard_cap;
        let spec = self.basis.spec();
        let p = self.growth_power();
        let capf = cap as f64;
        let lead = self
            .window()
            .chain(std::iter::once(cap))
            .filter(|&j| j > 0)
            .map(|j| (px.christoffel[j] * py.christoffel[j]).sqrt() * (capf / j as f64).powf(p))
            .fold(0.0, f64::max);
        let env = |k: usize| {
            let u = delta * eigenvalue(spec, k).sqrt();
            (2.0 / (band * u)).powi(2 * order as i32).min(1.0)
        };
        let term = |k: usize| env(k) * lead * (k as f64 / capf).powf(p);
        let end = 64 * cap;
        let body: f64 = (cap + 1..=end).map(term).sum();
        let s = 2.0 * order as f64 - p;
        body + term(end) * end as f64 / (s - 1.0)
    }
}
