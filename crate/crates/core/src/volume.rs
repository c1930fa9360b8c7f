//! Measures of intrinsic metric balls and their closed-form surrogates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};
use crate::geometry::{check_radius, distance_unchecked};
use crate::quadrature::total_mass;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VolumeMethod {
    Exact1D,
    MonteCarlo,
    /// The radius covers the whole domain.
    WholeDomain,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: VolumeMethod,
    pub samples: u64,
}

impl VolumeEstimate {
    /// `stderr / value`, or infinity for an empty estimate.
    pub fn relative_error(&self) -> f64 {
        if self.value > 0.0 {
            self.stderr / self.value
        } else if self.stderr == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte Carlo sample budget.
///
/// Samples are drawn in batches until `stderr/value ≤ rel_tol` (after at least
/// `min_samples`) or `max_samples` is reached.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeBudget {
    pub min_samples: u64,
    pub max_samples: u64,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for VolumeBudget {
    fn default() -> Self {
        Self {
            min_samples: 1_000_000,
            max_samples: 1_000_000,
            rel_tol: 0.0,
            seed: 0x5eed,
        }
    }
}

impl VolumeBudget {
    /// Fixed sample count.
    pub fn samples(n: u64, seed: u64) -> Self {
        Self {
            min_samples: n,
            max_samples: n,
            rel_tol: 0.0,
            seed,
        }
    }

    /// Adaptive count targeting a relative standard error.
    pub fn tolerance(rel_tol: f64, max_samples: u64, seed: u64) -> Self {
        Self {
            min_samples: 20_000.min(max_samples),
            max_samples,
            rel_tol,
            seed,
        }
    }
}

const BATCH: u64 = 1 << 14;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id derived from the query itself, so results do not depend on the
/// order in which queries are issued.
pub fn query_id(x: &[f64], r: f64) -> u64 {
    x.iter()
        .chain(std::iter::once(&r))
        .fold(0x51ed_2701_u64, |h, v| splitmix(h ^ v.to_bits()))
}

/// Draws from `μ / μ(X)` on the ball or simplex.
pub struct MeasureSampler {
    spec: DomainSpec,
    radial: Option<Beta<f64>>,
    gammas: Vec<Gamma<f64>>,
}

impl MeasureSampler {
    pub fn new(spec: &DomainSpec) -> Result<Self> {
        let p = spec.params();
        let bad = |e: &dyn std::fmt::Display| Error::Parameter(format!("sampler: {e}"));
        let (radial, gammas) = match spec.kind() {
            DomainKind::Ball => (
                Some(Beta::new(spec.dim() as f64 / 2.0, p[0] + 0.5).map_err(|e| bad(&e))?),
                Vec::new(),
            ),
            DomainKind::Simplex => (
                None,
                p.iter()
                    .map(|k| Gamma::new(k + 0.5, 1.0).map_err(|e| bad(&e)))
                    .collect::<Result<_>>()?,
            ),
            DomainKind::Interval => (
                None,
                vec![
                    Gamma::new(p[1] + 1.0, 1.0).map_err(|e| bad(&e))?,
                    Gamma::new(p[0] + 1.0, 1.0).map_err(|e| bad(&e))?,
                ],
            ),
        };
        Ok(Self {
            spec: spec.clone(),
            radial,
            gammas,
        })
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match self.spec.kind() {
            DomainKind::Ball => {
                let n = self.spec.dim();
                let mut norm2 = 0.0;
                for _ in 0..n {
                    let g: f64 = StandardNormal.sample(rng);
                    norm2 += g * g;
                    out.push(g);
                }
                let s = self.radial.as_ref().expect("ball sampler").sample(rng);
                let scale = (s / norm2).sqrt();
                out.iter_mut().for_each(|v| *v *= scale);
            }
            DomainKind::Simplex => {
                let g: Vec<f64> = self.gammas.iter().map(|d| d.sample(rng)).collect();
                let total: f64 = g.iter().sum();
                out.extend(g[..self.spec.dim()].iter().map(|v| v / total));
            }
            DomainKind::Interval => {
                let a = self.gammas[0].sample(rng);
                let b = self.gammas[1].sample(rng);
                out.push(2.0 * a / (a + b) - 1.0);
            }
        }
    }
}

/// `V(x, r) = μ({y : ρ(x, y) < r})`.
///
/// Exact on the interval; Monte Carlo with exact sampling on the ball and
/// simplex, seeded by `(budget.seed, query_id(x, r))`.
pub fn ball_volume(spec: &DomainSpec, x: &[f64], r: f64, budget: &VolumeBudget) -> Result<VolumeEstimate> {
    spec.check_contains(x)?;
    check_radius(r)?;
    if r >= spec.diameter() {
        return Ok(VolumeEstimate {
            value: total_mass(spec),
            stderr: 0.0,
            method: VolumeMethod::WholeDomain,
            samples: 0,
        });
    }
    if spec.kind() == DomainKind::Interval {
        return Ok(VolumeEstimate {
            value: interval_volume(spec, x[0], r),
            stderr: 0.0,
            method: VolumeMethod::Exact1D,
            samples: 0,
        });
    }
    if budget.max_samples == 0 {
        return Err(argument("Monte Carlo budget must allow at least one sample"));
    }
    let sampler = MeasureSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    rng.set_stream(query_id(x, r));
    let mass = total_mass(spec);
    let (mut hits, mut n) = (0u64, 0u64);
    let mut y = Vec::with_capacity(spec.dim());
    loop {
        let batch = BATCH.min(budget.max_samples - n);
        for _ in 0..batch {
            sampler.sample_into(&mut rng, &mut y);
            if distance_unchecked(spec, x, &y) < r {
                hits += 1;
            }
        }
        n += batch;
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let done_tol = budget.rel_tol > 0.0 && hits > 0 && se <= budget.rel_tol * p;
        if n >= budget.max_samples || (n >= budget.min_samples && (done_tol || budget.rel_tol <= 0.0)) {
            return Ok(VolumeEstimate {
                value: mass * p,
                stderr: mass * se,
                method: VolumeMethod::MonteCarlo,
                samples: n,
            });
        }
    }
}

fn interval_volume(spec: &DomainSpec, x: f64, r: f64) -> f64 {
    let (alpha, beta) = (spec.params()[0], spec.params()[1]);
    let th = x.clamp(-1.0, 1.0).acos();
    let lo = (th - r).max(0.0);
    let hi = (th + r).min(std::f64::consts::PI);
    // y = cos θ ∈ (cos hi, cos lo), u = (1+y)/2 carries the weight u^β (1-u)^α
    let ua = (1.0 + hi.cos()) / 2.0;
    let ub = (1.0 + lo.cos()) / 2.0;
    let frac = if ua + ub <= 1.0 {
        beta_reg(beta + 1.0, alpha + 1.0, ub) - beta_reg(beta + 1.0, alpha + 1.0, ua)
    } else {
        beta_reg(alpha + 1.0, beta + 1.0, 1.0 - ua) - beta_reg(alpha + 1.0, beta + 1.0, 1.0 - ub)
    };
    total_mass(spec) * frac.max(0.0)
}

/// Closed-form surrogate `V̂(x, r)` comparable to `V(x, r)` for `0 < r ≤ π`.
pub fn volume_surrogate(spec: &DomainSpec, x: &[f64], r: f64) -> Result<f64> {
    spec.check_contains(x)?;
    if !(r > 0.0 && r <= std::f64::consts::PI) {
        return Err(argument(format!("surrogate radius must lie in (0, π], got {r}")));
    }
    let p = spec.params();
    let r2 = r * r;
    Ok(match spec.kind() {
        DomainKind::Interval => r * (1.0 - x[0] + r2).powf(p[0] + 0.5) * (1.0 + x[0] + r2).powf(p[1] + 0.5),
        DomainKind::Ball => {
            let z2: f64 = x.iter().map(|v| v * v).sum();
            r.powi(spec.dim() as i32) * (1.0 - z2 + r2).max(0.0).powf(p[0])
        }
        DomainKind::Simplex => {
            let n = spec.dim();
            let s: f64 = x.iter().sum();
            let mut v = r.powi(n as i32) * (1.0 - s + r2).max(0.0).powf(p[n]);
            for i in 0..n {
                v *= (x[i] + r2).max(0.0).powf(p[i]);
            }
            v
        }
    })
}

/// Largest radius at which the surrogate is stated to be comparable with `V`:
/// `π` on the ball, `1` on the simplex and `2` on the interval (the simplex
/// range under the halved distance).
pub fn surrogate_radius_limit(spec: &DomainSpec) -> f64 {
    match spec.kind() {
        DomainKind::Ball => std::f64::consts::PI,
        DomainKind::Simplex => 1.0,
        DomainKind::Interval => 2.0,
    }
}

/// Upper bound for `V(x, 2r) / V(x, r)` derived from the surrogate with a factor-2
/// comparability margin: `2^{n+1} 4^{|γ|}` on the ball, `2^{n+1} 4^{Σ|κ_i|}` on the
/// simplex, and the simplex value for the interval's `κ = (β+½, α+½)`.
pub fn doubling_cap(spec: &DomainSpec) -> f64 {
    let n = spec.dim() as i32;
    let p = spec.params();
    let spread: f64 = match spec.kind() {
        DomainKind::Ball => p[0].abs(),
        DomainKind::Simplex => p.iter().map(|k| k.abs()).sum(),
        DomainKind::Interval => (p[0] + 0.5).abs() + (p[1] + 0.5).abs(),
    };
    2f64.powi(n + 1) * 4f64.powf(spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn whole_domain() {
        let b = DomainSpec::ball(2, 0.3).unwrap();
        let v = ball_volume(&b, &[0.1, 0.2], PI, &VolumeBudget::default()).unwrap();
        assert_eq!(v.method, VolumeMethod::WholeDomain);
        assert_relative_eq!(v.value, total_mass(&b));
        assert!(ball_volume(&b, &[0.0, 0.0], 0.0, &VolumeBudget::default()).is_err());
    }

    #[test]
    fn chebyshev_arc_length() {
        let i = DomainSpec::interval(-0.5, -0.5).unwrap();
        for &th in &[0.01, 0.3, 1.0, 2.5] {
            let v = ball_volume(&i, &[1.0], th, &VolumeBudget::default()).unwrap();
            assert_relative_eq!(v.value, th, max_relative = 1e-12);
            assert_eq!(v.stderr, 0.0);
        }
        // interior point: arc (θ - r, θ + r)
        let v = ball_volume(&i, &[0.2], 0.4, &VolumeBudget::default()).unwrap();
        assert_relative_eq!(v.value, 0.8, max_relative = 1e-12);
    }

    #[test]
    fn flat_limit_disc() {
        let b = DomainSpec::ball(2, 0.5).unwrap();
        let v = ball_volume(&b, &[0.0, 0.0], 0.1, &VolumeBudget::samples(400_000, 7)).unwrap();
        assert!((v.value / (PI * 0.01) - 1.0).abs() < 0.05, "{v:?}");
        let again = ball_volume(&b, &[0.0, 0.0], 0.1, &VolumeBudget::samples(400_000, 7)).unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn adaptive_budget_stops() {
        let s = DomainSpec::simplex(vec![0.5, 0.5, 0.5]).unwrap();
        let b = VolumeBudget::tolerance(0.01, 5_000_000, 3);
        let v = ball_volume(&s, &[0.3, 0.3], 0.3, &b).unwrap();
        assert!(v.relative_error() <= 0.01);
        assert!(v.samples < 5_000_000);
    }

    #[test]
    fn samplers_match_first_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = DomainSpec::simplex(vec![0.1, 1.0, 2.0]).unwrap();
        let sm = MeasureSampler::new(&s).unwrap();
        let mut y = Vec::new();
        let mut mean = [0.0; 2];
        let n = 200_000;
        for _ in 0..n {
            sm.sample_into(&mut rng, &mut y);
            mean[0] += y[0] / n as f64;
            mean[1] += y[1] / n as f64;
        }
        // Dirichlet(0.6, 1.5, 2.5) means
        assert!((mean[0] - 0.6 / 4.6).abs() < 3e-3);
        assert!((mean[1] - 1.5 / 4.6).abs() < 3e-3);
        let b = DomainSpec::ball(3, 1.0).unwrap();
        let bm = MeasureSampler::new(&b).unwrap();
        let mut r2 = 0.0;
        for _ in 0..n {
            bm.sample_into(&mut rng, &mut y);
            r2 += y.iter().map(|v| v * v).sum::<f64>() / n as f64;
        }
        // |x|² ~ Beta(3/2, 3/2)
        assert!((r2 - 0.5).abs() < 3e-3);
    }

    #[test]
    fn interval_mc_agrees_with_exact() {
        let i = DomainSpec::interval(0.7, -0.3).unwrap();
        let sm = MeasureSampler::new(&i).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut y = Vec::new();
        let (x, r) = (0.3, 0.5);
        let n = 400_000;
        let mut hits = 0;
        for _ in 0..n {
            sm.sample_into(&mut rng, &mut y);
            if distance_unchecked(&i, &[x], &y) < r {
                hits += 1;
            }
        }
        let mc = total_mass(&i) * hits as f64 / n as f64;
        let exact = ball_volume(&i, &[x], r, &VolumeBudget::default()).unwrap().value;
        assert!((mc / exact - 1.0).abs() < 0.01, "{mc} {exact}");
    }

    #[test]
    fn surrogate_examples() {
        let b = DomainSpec::ball(3, 0.0).unwrap();
        assert_relative_eq!(
            volume_surrogate(&b, &[0.0; 3], 0.4).unwrap(),
            0.064,
            max_relative = 1e-15
        );
        let i = DomainSpec::interval(-0.5, -0.5).unwrap();
        assert_relative_eq!(volume_surrogate(&i, &[0.37], 0.2).unwrap(), 0.2);
        let s = DomainSpec::simplex(vec![0.5, 0.5]).unwrap();
        let expect = 0.3 * 1.09f64.sqrt() * 0.09f64.sqrt();
        assert_relative_eq!(volume_surrogate(&s, &[0.0], 0.3).unwrap(), expect, max_relative = 1e-15);
        assert_relative_eq!(expect, 0.093_96, max_relative = 1e-4);
        assert!(volume_surrogate(&s, &[0.0], 3.5).is_err());
    }
}
