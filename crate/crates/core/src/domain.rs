//! Domain descriptions: which set, its dimension and weight parameters.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};

/// Points closer than this to the boundary count as boundary points.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    /// `[-1, 1]` with the Jacobi weight `(1-x)^α (1+x)^β`.
    Interval,
    /// Unit ball with weight `(1-|x|²)^{γ-1/2}`.
    Ball,
    /// Standard simplex with weight `∏ x_i^{κ_i-1/2} (1-|x|)^{κ_{n+1}-1/2}`.
    Simplex,
}

/// Validated, immutable domain specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct DomainSpec {
    kind: DomainKind,
    n: usize,
    params: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum SpecRepr {
    Interval { alpha: f64, beta: f64 },
    Ball { n: usize, gamma: f64 },
    Simplex { kappa: Vec<f64> },
}

impl TryFrom<SpecRepr> for DomainSpec {
    type Error = Error;
    fn try_from(r: SpecRepr) -> Result<Self> {
        match r {
            SpecRepr::Interval { alpha, beta } => DomainSpec::interval(alpha, beta),
            SpecRepr::Ball { n, gamma } => DomainSpec::ball(n, gamma),
            SpecRepr::Simplex { kappa } => DomainSpec::simplex(kappa),
        }
    }
}

impl From<DomainSpec> for SpecRepr {
    fn from(s: DomainSpec) -> Self {
        match s.kind {
            DomainKind::Interval => SpecRepr::Interval {
                alpha: s.params[0],
                beta: s.params[1],
            },
            DomainKind::Ball => SpecRepr::Ball {
                n: s.n,
                gamma: s.params[0],
            },
            DomainKind::Simplex => SpecRepr::Simplex { kappa: s.params },
        }
    }
}

fn check_param(value: f64, bound: f64, what: &str) -> Result<()> {
    if !(value.is_finite() && value > bound) {
        return Err(Error::Parameter(format!("{what}, got {value}")));
    }
    Ok(())
}

impl DomainSpec {
    pub fn interval(alpha: f64, beta: f64) -> Result<Self> {
        check_param(alpha, -1.0, "alpha must satisfy α > −1")?;
        check_param(beta, -1.0, "beta must satisfy β > −1")?;
        Ok(Self {
            kind: DomainKind::Interval,
            n: 1,
            params: vec![alpha, beta],
        })
    }

    pub fn ball(n: usize, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(argument("ball dimension must be at least 1"));
        }
        check_param(gamma, -0.5, "gamma must satisfy γ > −1/2")?;
        Ok(Self {
            kind: DomainKind::Ball,
            n,
            params: vec![gamma],
        })
    }

    /// Simplex of dimension `kappa.len() - 1`.
    pub fn simplex(kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() < 2 {
            return Err(argument("simplex needs n+1 >= 2 weight parameters κ"));
        }
        for (i, &k) in kappa.iter().enumerate() {
            check_param(k, -0.5, &format!("kappa[{}] must satisfy κ_i > −1/2", i + 1))?;
        }
        Ok(Self {
            kind: DomainKind::Simplex,
            n: kappa.len() - 1,
            params: kappa,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    /// Spatial dimension `n` (1 for the interval).
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> Option<f64> {
        (self.kind == DomainKind::Interval).then(|| self.params[0])
    }

    pub fn beta(&self) -> Option<f64> {
        (self.kind == DomainKind::Interval).then(|| self.params[1])
    }

    pub fn gamma(&self) -> Option<f64> {
        (self.kind == DomainKind::Ball).then(|| self.params[0])
    }

    pub fn kappa(&self) -> Option<&[f64]> {
        (self.kind == DomainKind::Simplex).then_some(self.params.as_slice())
    }

    /// Raw parameter vector: `[α, β]`, `[γ]` or `κ`.
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// The `n = 1` simplex corresponding to this interval under `x₁ = (x+1)/2`:
    /// `κ₁ = β + 1/2`, `κ₂ = α + 1/2`.
    pub fn interval_as_simplex(&self) -> Option<DomainSpec> {
        let (a, b) = (self.alpha()?, self.beta()?);
        Some(DomainSpec::simplex(vec![b + 0.5, a + 0.5]).expect("α, β > −1 maps to κ > −1/2"))
    }

    /// Largest possible intrinsic distance between two points.
    pub fn diameter(&self) -> f64 {
        match self.kind {
            DomainKind::Interval | DomainKind::Ball => std::f64::consts::PI,
            DomainKind::Simplex => std::f64::consts::FRAC_PI_2,
        }
    }

    /// Checks `x` lies in the closed domain (with `BOUNDARY_TOL` slack).
    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(argument(format!(
                "point has dimension {}, domain has {}",
                x.len(),
                self.n
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(argument("point has non-finite coordinates"));
        }
        if self.boundary_gap(x) < -BOUNDARY_TOL {
            return Err(argument(format!("point {x:?} lies outside the domain")));
        }
        Ok(())
    }

    /// Signed algebraic distance to the boundary: positive inside, zero on it.
    ///
    /// Interval: `1 - |x|`; ball: `1 - |x|²`; simplex: `min(x_i, 1 - Σx_i)`.
    pub fn boundary_gap(&self, x: &[f64]) -> f64 {
        match self.kind {
            DomainKind::Interval => 1.0 - x[0].abs(),
            DomainKind::Ball => 1.0 - x.iter().map(|v| v * v).sum::<f64>(),
            DomainKind::Simplex => {
                let s: f64 = x.iter().sum();
                x.iter().copied().fold(1.0 - s, f64::min)
            }
        }
    }

    /// A short human-readable label, e.g. `ball(n=2, γ=0.5)`.
    pub fn label(&self) -> String {
        match self.kind {
            DomainKind::Interval => format!("interval(α={}, β={})", self.params[0], self.params[1]),
            DomainKind::Ball => format!("ball(n={}, γ={})", self.n, self.params[0]),
            DomainKind::Simplex => format!("simplex(n={}, κ={:?})", self.n, self.params),
        }
    }
}
