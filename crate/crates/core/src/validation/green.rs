//! Green's identity, operator symmetry and boundary-flux decay.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Result};
use crate::geometry::{inverse_metric, weight_density};
use crate::operators::apply_operator;
use crate::poly::MultiPoly;
use crate::quadrature::{gauss_jacobi, quadrature, sphere_rule, QuadratureRule};
use crate::validation::fit::{log_log_fit, LinearFit};
use crate::validation::SCHEMA_VERSION;

/// Smooth bounded test function with its gradient in chart coordinates.
pub trait TestFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Degree that quadrature must integrate exactly against a polynomial
    /// (the polynomial degree, or a resolution hint for non-polynomials).
    fn degree_hint(&self) -> usize;
}

impl TestFunction for MultiPoly {
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).expect("test function dimension matches the domain")
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient()
            .iter()
            .map(|g| g.eval(x).expect("test function dimension matches the domain"))
            .collect()
    }

    fn degree_hint(&self) -> usize {
        self.degree() as usize
    }
}

/// `h(x) = exp(-|x - c|² / s²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub width: f64,
}

impl TestFunction for GaussianBump {
    fn value(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
        (-d2 / (self.width * self.width)).exp()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = self.value(x);
        let s2 = self.width * self.width;
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| -2.0 * (a - c) / s2 * v)
            .collect()
    }

    fn degree_hint(&self) -> usize {
        (12.0 / self.width).ceil() as usize + 20
    }
}

/// Factor `c` with `Δ_w f = c·L f` in the chart.
pub fn laplacian_factor(spec: &DomainSpec) -> f64 {
    if spec.kind() == DomainKind::Simplex {
        4.0
    } else {
        1.0
    }
}

fn dot_ginv(g: &nalgebra::DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += g[(i, j)] * a[i] * b[j];
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenResult {
    /// `∫ h Δ_w f dμ`.
    pub lhs: f64,
    /// `-∫ ⟨∇f, ∇h⟩_g dμ`.
    pub rhs: f64,
    /// `|lhs - rhs| / max(|lhs|, |rhs|, 1)`.
    pub residual: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn check_dims(spec: &DomainSpec, f: &MultiPoly) -> Result<()> {
    if f.dimension() != spec.dim() {
        return Err(argument(format!(
            "polynomial in {} variables on a {}-dimensional domain",
            f.dimension(),
            spec.dim()
        )));
    }
    Ok(())
}

/// Both sides of Green's identity with a given quadrature rule.
pub fn green_identity_check(
    spec: &DomainSpec,
    f: &MultiPoly,
    h: &dyn TestFunction,
    quad: &QuadratureRule,
) -> Result<GreenResult> {
    check_dims(spec, f)?;
    let lf = apply_operator(spec, f)?.scale(laplacian_factor(spec));
    let grad_f = f.gradient();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (x, w) in quad.nodes.iter().zip(&quad.weights) {
        lhs += w * h.value(x) * lf.eval(x)?;
        let gf: Vec<f64> = grad_f.iter().map(|p| p.eval(x)).collect::<Result<_>>()?;
        let gh = h.gradient(x);
        rhs -= w * dot_ginv(&inverse_metric(spec, x)?, &gf, &gh);
    }
    Ok(GreenResult {
        lhs,
        rhs,
        residual: rel(lhs, rhs),
    })
}

/// [`green_identity_check`] on a rule exact for `deg f + deg h + 2`.
pub fn green_identity(spec: &DomainSpec, f: &MultiPoly, h: &dyn TestFunction) -> Result<GreenResult> {
    let quad = quadrature(spec, f.degree() as usize + h.degree_hint() + 2)?;
    green_identity_check(spec, f, h, &quad)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResult {
    /// `|∫(Lf)h - ∫f(Lh)| / max(|∫(Lf)h|, |∫f(Lh)|, 1)`.
    pub residual: f64,
    /// `-∫ f L f dμ`.
    pub energy: f64,
}

/// Bilinear symmetry of `L` and the sign of its energy form, by exact quadrature.
pub fn operator_symmetry(spec: &DomainSpec, f: &MultiPoly, h: &MultiPoly) -> Result<SymmetryResult> {
    check_dims(spec, f)?;
    check_dims(spec, h)?;
    let quad = quadrature(spec, (f.degree() + h.degree()).max(2 * f.degree()) as usize)?;
    let lf = apply_operator(spec, f)?;
    let lh = apply_operator(spec, h)?;
    let (mut a, mut b, mut e) = (0.0, 0.0, 0.0);
    for (x, w) in quad.nodes.iter().zip(&quad.weights) {
        let (fx, hx, lfx) = (f.eval(x)?, h.eval(x)?, lf.eval(x)?);
        a += w * lfx * hx;
        b += w * fx * lh.eval(x)?;
        e -= w * fx * lfx;
    }
    Ok(SymmetryResult {
        residual: rel(a, b),
        energy: e,
    })
}

/// Flux through one boundary piece of the shrunken domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceFlux {
    pub face: String,
    /// `|J_ε|` per ε.
    pub j_values: Vec<f64>,
    pub expected_slope: f64,
    pub fit: Option<LinearFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub schema_version: u32,
    pub spec: DomainSpec,
    pub epsilons: Vec<f64>,
    pub faces: Vec<FaceFlux>,
    /// `|Σ_faces J_ε|`.
    pub j_values: Vec<f64>,
    /// Fit of the dominating face (smallest expected slope).
    pub fitted_slope: Option<f64>,
    pub expected_slope: f64,
    pub r_squared: Option<f64>,
    /// Every flux is below `1e-14`: no slope is defined.
    pub exact_zero: bool,
    pub slope_tolerance: f64,
    pub min_r_squared: f64,
    pub verdict: bool,
}

/// Acceptance settings for [`boundary_flux_decay`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxTolerance {
    pub slope: f64,
    pub min_r_squared: f64,
}

impl Default for FluxTolerance {
    fn default() -> Self {
        Self {
            slope: 0.1,
            min_r_squared: 0.98,
        }
    }
}

const ZERO_FLUX: f64 = 1e-14;

/// Composite Gauss–Legendre rule on `[0, 1]`, graded geometrically toward both
/// ends down to `floor`.
fn graded_rule(floor: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t, w) = gauss_jacobi(0.0, 0.0, 16)?;
    let mut cuts = vec![0.0];
    let mut edges = Vec::new();
    let mut e = 0.5;
    while e > floor {
        e *= 0.25;
        edges.push(e);
    }
    cuts.extend(edges.iter().rev());
    cuts.extend([0.25, 0.5, 0.75]);
    cuts.extend(edges.iter().map(|e| 1.0 - e));
    cuts.push(1.0);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for p in cuts.windows(2) {
        let (a, b) = (p[0], p[1]);
        for (ti, wi) in t.iter().zip(&w) {
            nodes.push(a + (b - a) * (ti + 1.0) / 2.0);
            weights.push(wi * (b - a) / 2.0);
        }
    }
    Ok((nodes, weights))
}

/// Rule on `{y ∈ R^d : y_j > ε, Σ y_j < 1 - 2ε}` through Duffy coordinates.
fn face_rule(d: usize, eps: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let c = 1.0 - (d as f64 + 2.0) * eps;
    if d == 0 {
        return Ok((vec![Vec::new()], vec![1.0]));
    }
    let (u, wu) = graded_rule(1e-3 * eps / c)?;
    let mut nodes = vec![Vec::new()];
    let mut rest = vec![c];
    let mut weights = vec![1.0];
    for _ in 0..d {
        let mut nn = Vec::new();
        let mut nr = Vec::new();
        let mut nw = Vec::new();
        for ((y, r), w) in nodes.iter().zip(&rest).zip(&weights) {
            for (ui, wi) in u.iter().zip(&wu) {
                let mut z: Vec<f64> = y.clone();
                z.push(r * ui);
                nn.push(z);
                nr.push(r * (1.0 - ui));
                nw.push(w * r * wi);
            }
        }
        nodes = nn;
        rest = nr;
        weights = nw;
    }
    let nodes = nodes
        .into_iter()
        .map(|z| z.into_iter().map(|v| v + eps).collect())
        .collect();
    Ok((nodes, weights))
}

/// `∫ Σ g^{ij} n^i ∂_j f h w̆ dτ` over one face of the shrunken domain.
fn face_flux(spec: &DomainSpec, f: &MultiPoly, h: &dyn TestFunction, eps: f64, face: usize) -> Result<f64> {
    let n = spec.dim();
    let grad_f = f.gradient();
    let (free, w) = face_rule(n - 1, eps)?;
    let mut total = 0.0;
    for (y, wq) in free.iter().zip(&w) {
        // face < n: x_face = ε with outward normal -e_face; face = n: Σx = 1-ε, normal 1/√n
        let (x, normal, area): (Vec<f64>, Vec<f64>, f64) = if face < n {
            let mut x = y.clone();
            x.insert(face, eps);
            let mut nv = vec![0.0; n];
            nv[face] = -1.0;
            (x, nv, 1.0)
        } else {
            let mut x = y.clone();
            x.push(1.0 - eps - y.iter().sum::<f64>());
            (x, vec![1.0 / (n as f64).sqrt(); n], (n as f64).sqrt())
        };
        let gf: Vec<f64> = grad_f.iter().map(|p| p.eval(&x)).collect::<Result<_>>()?;
        let flux = dot_ginv(&inverse_metric(spec, &x)?, &normal, &gf);
        total += wq * area * flux * h.value(&x) * weight_density(spec, &x)?;
    }
    Ok(total)
}

fn ball_flux(spec: &DomainSpec, f: &MultiPoly, h: &dyn TestFunction, eps: f64) -> Result<f64> {
    let n = spec.dim();
    let r = (1.0 - eps).sqrt();
    let (om, wo) = sphere_rule(n, f.degree() as usize + h.degree_hint() + 2)?;
    let grad_f = f.gradient();
    let mut total = 0.0;
    for (o, w) in om.iter().zip(&wo) {
        let x: Vec<f64> = o.iter().map(|v| r * v).collect();
        let gf: Vec<f64> = grad_f.iter().map(|p| p.eval(&x)).collect::<Result<_>>()?;
        let flux = dot_ginv(&inverse_metric(spec, &x)?, o, &gf);
        total += w * r.powi(n as i32 - 1) * flux * h.value(&x) * weight_density(spec, &x)?;
    }
    Ok(total)
}

/// Boundary flux `J_ε` of Green's identity on shrunken domains and its decay rate.
///
/// Ball: the sphere `|x|² = 1 - ε`, expected slope `γ + 1/2`. Simplex: the faces
/// `x_i = ε` and `Σx = 1 - ε`, expected slope `κ_i + 1/2` per face. The interval
/// is handled as the `n = 1` simplex.
pub fn boundary_flux_decay(
    spec: &DomainSpec,
    f: &MultiPoly,
    h: &dyn TestFunction,
    epsilons: &[f64],
    tol: FluxTolerance,
) -> Result<FluxReport> {
    check_dims(spec, f)?;
    if epsilons.len() < 4
        || epsilons.windows(2).any(|p| !(p[1] < p[0]))
        || epsilons.iter().any(|e| !(*e > 0.0 && *e < 0.5))
    {
        return Err(argument(
            "epsilons must be at least 4 strictly decreasing values in (0, 1/2)",
        ));
    }
    if epsilons[0] / epsilons[epsilons.len() - 1] < 10.0 {
        return Err(argument("epsilons must span at least a decade"));
    }
    let (work, f) = match spec.kind() {
        DomainKind::Interval => (
            spec.interval_as_simplex().expect("interval spec"),
            f.compose_affine(2.0, -1.0)?,
        ),
        _ => (spec.clone(), f.clone()),
    };
    let n = work.dim();
    if work.kind() == DomainKind::Simplex && epsilons[0] >= 1.0 / (n as f64 + 1.0) {
        return Err(argument(format!(
            "simplex flux needs ε < 1/(n+1) = {:.4}",
            1.0 / (n as f64 + 1.0)
        )));
    }
    let p = work.params();
    let faces: Vec<(String, f64)> = match work.kind() {
        DomainKind::Ball => vec![("|x|²=1-ε".to_string(), p[0] + 0.5)],
        _ => (0..n)
            .map(|i| (format!("x{}=ε", i + 1), p[i] + 0.5))
            .chain(std::iter::once(("Σx=1-ε".to_string(), p[n] + 0.5)))
            .collect(),
    };
    let mut signed = vec![vec![0.0; epsilons.len()]; faces.len()];
    for (k, &eps) in epsilons.iter().enumerate() {
        if work.kind() == DomainKind::Ball {
            signed[0][k] = ball_flux(&work, &f, h, eps)?;
        } else {
            for (i, row) in signed.iter_mut().enumerate() {
                row[k] = face_flux(&work, &f, h, eps, i)?;
            }
        }
    }
    let j_values: Vec<f64> = (0..epsilons.len())
        .map(|k| signed.iter().map(|r| r[k]).sum::<f64>().abs())
        .collect();
    let faces: Vec<FaceFlux> = faces
        .into_iter()
        .zip(&signed)
        .map(|((face, expected_slope), row)| {
            let j: Vec<f64> = row.iter().map(|v| v.abs()).collect();
            let fit = if j.iter().all(|v| *v > ZERO_FLUX) {
                log_log_fit(epsilons, &j).ok()
            } else {
                None
            };
            FaceFlux {
                face,
                j_values: j,
                expected_slope,
                fit,
            }
        })
        .collect();
    let exact_zero = faces.iter().all(|fc| fc.j_values.iter().all(|v| *v <= ZERO_FLUX));
    let dominating = faces
        .iter()
        .filter(|fc| fc.fit.is_some())
        .min_by(|a, b| a.expected_slope.total_cmp(&b.expected_slope));
    let expected_slope = faces.iter().map(|fc| fc.expected_slope).fold(f64::INFINITY, f64::min);
    let face_ok = |fc: &FaceFlux| match fc.fit {
        Some(fit) => (fit.slope - fc.expected_slope).abs() <= tol.slope && fit.r_squared >= tol.min_r_squared,
        None => fc.j_values.iter().all(|v| *v <= ZERO_FLUX),
    };
    // only the faces with the smallest exponent govern the decay of J_ε
    let verdict = !exact_zero
        && faces
            .iter()
            .filter(|fc| fc.expected_slope == expected_slope)
            .all(face_ok)
        && dominating.is_some_and(|d| d.expected_slope == expected_slope);
    Ok(FluxReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        epsilons: epsilons.to_vec(),
        fitted_slope: dominating.and_then(|d| d.fit).map(|f| f.slope),
        r_squared: dominating.and_then(|d| d.fit).map(|f| f.r_squared),
        faces,
        j_values,
        expected_slope,
        exact_zero,
        slope_tolerance: tol.slope,
        min_r_squared: tol.min_r_squared,
        verdict,
    })
}
