//! Orthonormal polynomial bases of the eigenspaces, built level by level.
//!
//! Every member after the constant is stored as a recipe
//! `P = (x_axis · P_parent − Σ c_m P_m) / scale` over earlier members. Evaluation
//! replays the recipes, which stays accurate at degrees where monomial
//! coefficients would cancel catastrophically. On the interval the recipe is
//! the Jacobi three-term recurrence; on the ball and simplex the recipes come
//! from Gram–Schmidt on the candidates `x_i P_{k-1,j}`.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};
use crate::operators::apply_operator;
use crate::poly::{MultiIndex, MultiPoly};
use crate::precision::{DoubleDouble, Precision, Scalar};
use crate::quadrature::{quadrature, QuadratureRule};

/// Largest Gram residual accepted at any level during construction.
pub const GRAM_TOLERANCE: f64 = 1e-8;

/// Format version of the JSON export.
pub const SCHEMA_VERSION: u32 = 1;

/// Node-value storage limit during construction, in bytes.
const MAX_WORKING_BYTES: usize = 3 << 30;

/// Closed-form eigenvalue `λ_k`.
pub fn eigenvalue(spec: &DomainSpec, k: usize) -> f64 {
    let k = k as f64;
    let p = spec.params();
    let n = spec.dim() as f64;
    match spec.kind() {
        DomainKind::Interval => k * (k + p[0] + p[1] + 1.0),
        DomainKind::Ball => k * (k + n + 2.0 * p[0] - 1.0),
        DomainKind::Simplex => k * (k + p.iter().sum::<f64>() + (n - 1.0) / 2.0),
    }
}

/// `dim Ṽ_k = binom(k+n-1, k)`.
pub fn level_size(n: usize, k: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c * (n as u128 - 1 + i) / i;
    }
    c as usize
}

/// Largest degree `build_basis` accepts for the spec and precision.
pub fn degree_cap(spec: &DomainSpec, precision: Precision) -> usize {
    let ext = precision == Precision::Extended;
    match (spec.kind(), spec.dim()) {
        (DomainKind::Interval, _) | (_, 1) => {
            if ext {
                400
            } else {
                200
            }
        }
        (_, 2) => {
            if ext {
                60
            } else {
                40
            }
        }
        (_, 3) => {
            if ext {
                32
            } else {
                25
            }
        }
        _ => {
            if ext {
                16
            } else {
                12
            }
        }
    }
}

/// The eigenvalues `λ_0 .. λ_K` of a spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenTable {
    pub spec: DomainSpec,
    pub lambdas: Vec<f64>,
}

impl EigenTable {
    pub fn new(spec: &DomainSpec, max_degree: usize) -> Self {
        Self {
            spec: spec.clone(),
            lambdas: (0..=max_degree).map(|k| eigenvalue(spec, k)).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.lambdas.len() - 1
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.lambdas[k]
    }
}

/// `(x_axis · P_parent − Σ c_m P_m) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub parent: u32,
    pub axis: u32,
    pub terms: Vec<(u32, f64)>,
    /// Low parts of `terms` in extended precision.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms_lo: Vec<f64>,
    pub scale: f64,
    #[serde(default)]
    pub scale_lo: f64,
}

/// Orthonormal basis `{P_kj}` of the eigenspaces up to `max_degree`.
#[derive(Debug)]
pub struct OrthonormalBasis {
    spec: DomainSpec,
    max_degree: usize,
    precision: Precision,
    /// Level `k` occupies members `offsets[k] .. offsets[k+1]`.
    offsets: Vec<usize>,
    p0: (f64, f64),
    /// Recipe of member `m` is `recipes[m - 1]`.
    recipes: Vec<Recipe>,
    quad: QuadratureRule,
    eigen: EigenTable,
    node_sup: Vec<f64>,
    gram: Vec<f64>,
    coeffs: OnceLock<Vec<MultiPoly>>,
}

/// Builds the basis in double precision.
pub fn build_basis(spec: &DomainSpec, max_degree: usize) -> Result<OrthonormalBasis> {
    build_basis_with(spec, max_degree, Precision::Double)
}

pub fn build_basis_with(spec: &DomainSpec, max_degree: usize, precision: Precision) -> Result<OrthonormalBasis> {
    let cap = degree_cap(spec, precision);
    if max_degree > cap {
        let hint = match precision {
            Precision::Double => "lower the degree or use extended precision",
            Precision::Extended => "lower the degree",
        };
        return Err(Error::Capacity(format!(
            "degree {max_degree} exceeds the cap {cap} for {} in {precision} precision; {hint}",
            spec.label()
        )));
    }
    let quad = quadrature(spec, 2 * max_degree + 2)?;
    let total: usize = (0..=max_degree).map(|k| level_size(spec.dim(), k)).sum();
    let width = match precision {
        Precision::Double => 8,
        Precision::Extended => 16,
    };
    let bytes = total.saturating_mul(quad.len()).saturating_mul(width);
    if bytes > MAX_WORKING_BYTES {
        return Err(Error::Capacity(format!(
            "degree {max_degree} on {} needs about {} MiB of node values (limit {} MiB); lower the degree",
            spec.label(),
            bytes >> 20,
            MAX_WORKING_BYTES >> 20
        )));
    }
    let parts = match precision {
        Precision::Double => construct::<f64>(spec, max_degree, &quad)?,
        Precision::Extended => construct::<DoubleDouble>(spec, max_degree, &quad)?,
    };
    Ok(OrthonormalBasis {
        spec: spec.clone(),
        max_degree,
        precision,
        offsets: parts.offsets,
        p0: parts.p0,
        recipes: parts.recipes,
        quad,
        eigen: EigenTable::new(spec, max_degree),
        node_sup: parts.node_sup,
        gram: parts.gram,
        coeffs: OnceLock::new(),
    })
}

struct Parts {
    offsets: Vec<usize>,
    p0: (f64, f64),
    recipes: Vec<Recipe>,
    node_sup: Vec<f64>,
    gram: Vec<f64>,
}

fn dot<S: Scalar>(w: &[S], u: &[S], v: &[S]) -> S {
    let mut acc = S::zero();
    for ((wi, ui), vi) in w.iter().zip(u).zip(v) {
        acc = acc + *wi * *ui * *vi;
    }
    acc
}

fn axpy<S: Scalar>(c: S, x: &[S], y: &mut [S]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi - c * *xi;
    }
}

fn to_recipe<S: Scalar>(parent: usize, axis: usize, terms: &[(usize, S)], scale: S, ext: bool) -> Recipe {
    let (scale, scale_lo) = scale.parts();
    let mut hi = Vec::with_capacity(terms.len());
    let mut lo = Vec::new();
    for (m, c) in terms {
        let (h, l) = c.parts();
        hi.push((*m as u32, h));
        if ext {
            lo.push(l);
        }
    }
    Recipe {
        parent: parent as u32,
        axis: axis as u32,
        terms: hi,
        terms_lo: lo,
        scale,
        scale_lo: if ext { scale_lo } else { 0.0 },
    }
}

fn recipe_scalars<S: Scalar>(r: &Recipe) -> (Vec<(usize, S)>, S) {
    let terms = r
        .terms
        .iter()
        .enumerate()
        .map(|(i, &(m, h))| (m as usize, S::from_parts(h, r.terms_lo.get(i).copied().unwrap_or(0.0))))
        .collect();
    (terms, S::from_parts(r.scale, r.scale_lo))
}

/// Replays one recipe over node values.
fn apply_recipe<S: Scalar>(r: &Recipe, coords: &[Vec<S>], vals: &[Vec<S>]) -> Vec<S> {
    let (terms, scale) = recipe_scalars::<S>(r);
    let xs = &coords[r.axis as usize];
    let par = &vals[r.parent as usize];
    let mut out: Vec<S> = xs.iter().zip(par).map(|(x, p)| *x * *p).collect();
    for (m, c) in &terms {
        axpy(*c, &vals[*m], &mut out);
    }
    out.iter_mut().for_each(|v| *v = *v / scale);
    out
}

fn level_gram<S: Scalar>(w: &[S], vals: &[Vec<S>], level: Range<usize>) -> f64 {
    level
        .into_par_iter()
        .map(|m| {
            (0..=m)
                .map(|l| {
                    let g = dot(w, &vals[m], &vals[l]).to_f64();
                    (g - if l == m { 1.0 } else { 0.0 }).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn level_sup<S: Scalar>(vals: &[Vec<S>], level: Range<usize>) -> f64 {
    let q = vals[level.start].len();
    (0..q)
        .map(|i| level.clone().map(|m| vals[m][i].to_f64().powi(2)).sum::<f64>())
        .fold(0.0, f64::max)
}

fn jacobi_coefficients<S: Scalar>(alpha: f64, beta: f64, k_max: usize) -> (Vec<S>, Vec<S>) {
    let (a, b) = (S::from_f64(alpha), S::from_f64(beta));
    let one = S::from_f64(1.0);
    let two = S::from_f64(2.0);
    let four = S::from_f64(4.0);
    let s = a + b;
    let mut bs = Vec::with_capacity(k_max);
    let mut as_ = vec![S::zero(); k_max + 1];
    for k in 0..k_max {
        let kf = S::from_f64(k as f64);
        bs.push(if k == 0 {
            (b - a) / (s + two)
        } else {
            (b * b - a * a) / ((two * kf + s) * (two * kf + s + two))
        });
    }
    for (k, ak) in as_.iter_mut().enumerate().skip(1) {
        let kf = S::from_f64(k as f64);
        let a2 = if k == 1 {
            four * (one + a) * (one + b) / ((two + s) * (two + s) * (S::from_f64(3.0) + s))
        } else {
            let m = two * kf + s;
            four * kf * (kf + a) * (kf + b) * (kf + s) / (m * m * (m + one) * (m - one))
        };
        *ak = a2.sqrt();
    }
    (bs, as_)
}

struct TopIndex {
    /// Position of each monomial within its degree.
    pos: Vec<HashMap<MultiIndex, usize>>,
    /// `shift[d][i][p]`: position of `x_i · (monomial p of degree d)` in degree `d+1`.
    shift: Vec<Vec<Vec<usize>>>,
}

impl TopIndex {
    fn new(n: usize, k_max: usize) -> Self {
        let by_degree: Vec<Vec<MultiIndex>> = (0..=k_max as u32).map(|d| MultiIndex::of_degree(n, d)).collect();
        let pos: Vec<HashMap<MultiIndex, usize>> = by_degree
            .iter()
            .map(|v| v.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect())
            .collect();
        let mut shift = Vec::with_capacity(k_max);
        for d in 0..k_max {
            let per_axis = (0..n)
                .map(|i| {
                    by_degree[d]
                        .iter()
                        .map(|m| {
                            let mut e = m.exponents().to_vec();
                            e[i] += 1;
                            pos[d + 1][&MultiIndex::new(e)]
                        })
                        .collect()
                })
                .collect();
            shift.push(per_axis);
        }
        Self { pos, shift }
    }

    fn shifted<S: Scalar>(&self, top: &[S], degree: usize, axis: usize) -> Vec<S> {
        let mut out = vec![S::zero(); self.pos[degree + 1].len()];
        for (p, v) in top.iter().enumerate() {
            out[self.shift[degree][axis][p]] = *v;
        }
        out
    }
}

/// Greedy pivoted selection of `count` candidates whose top-degree parts are
/// linearly independent (Euclidean Gram–Schmidt on coefficients).
fn select_candidates<S: Scalar>(mut tops: Vec<Vec<S>>, count: usize, level: usize) -> Result<Vec<usize>> {
    let norm = |v: &[S]| v.iter().map(|x| x.to_f64().powi(2)).sum::<f64>().sqrt();
    let initial: Vec<f64> = tops.iter().map(|v| norm(v)).collect();
    let mut alive: Vec<bool> = vec![true; tops.len()];
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best = None;
        let mut best_ratio = 0.0;
        for (c, v) in tops.iter().enumerate() {
            if alive[c] && initial[c] > 0.0 {
                let ratio = norm(v) / initial[c];
                if ratio > best_ratio {
                    best_ratio = ratio;
                    best = Some(c);
                }
            }
        }
        let c = match best {
            Some(c) if best_ratio > 1e-10 => c,
            _ => {
                return Err(Error::Precision {
                    level,
                    residual: 1.0 - best_ratio,
                    tolerance: GRAM_TOLERANCE,
                })
            }
        };
        alive[c] = false;
        chosen.push(c);
        let nc = norm(&tops[c]);
        let e: Vec<S> = tops[c].iter().map(|x| *x / S::from_f64(nc)).collect();
        for (r, v) in tops.iter_mut().enumerate() {
            if alive[r] {
                let mut d = S::zero();
                for (a, b) in v.iter().zip(&e) {
                    d = d + *a * *b;
                }
                for (a, b) in v.iter_mut().zip(&e) {
                    *a = *a - d * *b;
                }
            }
        }
    }
    Ok(chosen)
}

fn construct<S: Scalar>(spec: &DomainSpec, k_max: usize, quad: &QuadratureRule) -> Result<Parts> {
    let n = spec.dim();
    let w: Vec<S> = quad.weights.iter().map(|&v| S::from_f64(v)).collect();
    let coords: Vec<Vec<S>> = (0..n)
        .map(|i| quad.nodes.iter().map(|x| S::from_f64(x[i])).collect())
        .collect();
    let mass = w.iter().fold(S::zero(), |a, b| a + *b);
    let p0 = S::from_f64(1.0) / mass.sqrt();
    let mut vals: Vec<Vec<S>> = vec![vec![p0; quad.len()]];
    let mut offsets = vec![0, 1];
    let mut recipes = Vec::new();
    let mut gram = vec![level_gram(&w, &vals, 0..1)];
    let mut node_sup = vec![level_sup(&vals, 0..1)];
    let ext = std::mem::size_of::<S>() > 8;

    if spec.kind() == DomainKind::Interval {
        let (b, a) = jacobi_coefficients::<S>(spec.params()[0], spec.params()[1], k_max);
        for k in 1..=k_max {
            let mut terms = vec![(k - 1, b[k - 1])];
            if k >= 2 {
                terms.push((k - 2, a[k - 1]));
            }
            let r = to_recipe(k - 1, 0, &terms, a[k], ext);
            vals.push(apply_recipe(&r, &coords, &vals));
            recipes.push(r);
            offsets.push(k + 1);
            finish_level(&w, &vals, &offsets, k, &mut gram, &mut node_sup)?;
        }
    } else {
        let index = TopIndex::new(n, k_max);
        let mut tops: Vec<Vec<S>> = vec![vec![p0]];
        for k in 1..=k_max {
            let lower = offsets[k];
            let prev = offsets[k - 1]..offsets[k];
            let size = level_size(n, k);
            let pairs: Vec<(usize, usize)> = prev.clone().flat_map(|j| (0..n).map(move |i| (j, i))).collect();
            let cand_tops: Vec<Vec<S>> = pairs.iter().map(|&(j, i)| index.shifted(&tops[j], k - 1, i)).collect();
            let picked = select_candidates(cand_tops, size, k)?;

            // Orthogonalize each candidate against all lower levels, twice.
            let mut cands: Vec<Candidate<S>> = picked
                .par_iter()
                .map(|&c| {
                    let (j, i) = pairs[c];
                    let mut v: Vec<S> = coords[i].iter().zip(&vals[j]).map(|(x, p)| *x * *p).collect();
                    let start = dot(&w, &v, &v).to_f64().sqrt();
                    let mut coef = vec![S::zero(); lower];
                    for _ in 0..2 {
                        for (m, cm) in coef.iter_mut().enumerate() {
                            let d = dot(&w, &v, &vals[m]);
                            axpy(d, &vals[m], &mut v);
                            *cm = *cm + d;
                        }
                    }
                    Candidate {
                        parent: j,
                        axis: i,
                        v,
                        coef,
                        same: Vec::new(),
                        start,
                    }
                })
                .collect();

            for _ in 0..size {
                let (best, _) = cands
                    .iter()
                    .enumerate()
                    .map(|(c, cd)| {
                        (
                            c,
                            dot(&w, &cd.v, &cd.v).to_f64().sqrt() / cd.start.max(f64::MIN_POSITIVE),
                        )
                    })
                    .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
                let mut cd = cands.swap_remove(best);
                // second pass within the level
                for (s, cs) in cd.same.iter_mut() {
                    let d = dot(&w, &cd.v, &vals[*s]);
                    axpy(d, &vals[*s], &mut cd.v);
                    *cs = *cs + d;
                }
                let norm = dot(&w, &cd.v, &cd.v).sqrt();
                if !(norm.to_f64() > 1e-10 * cd.start) {
                    return Err(Error::Precision {
                        level: k,
                        residual: norm.to_f64() / cd.start,
                        tolerance: GRAM_TOLERANCE,
                    });
                }
                let mut terms: Vec<(usize, S)> = cd.coef.iter().copied().enumerate().collect();
                terms.extend(cd.same.iter().copied());
                let r = to_recipe(cd.parent, cd.axis, &terms, norm, ext);
                let g = vals.len();
                vals.push(apply_recipe(&r, &coords, &vals));
                recipes.push(r);

                let mut top = index.shifted(&tops[cd.parent], k - 1, cd.axis);
                for (s, cs) in &cd.same {
                    for (t, ts) in top.iter_mut().zip(&tops[*s]) {
                        *t = *t - *cs * *ts;
                    }
                }
                top.iter_mut().for_each(|t| *t = *t / norm);
                tops.push(top);

                let newest = &vals[g];
                cands.par_iter_mut().for_each(|o| {
                    let d = dot(&w, &o.v, newest);
                    axpy(d, newest, &mut o.v);
                    o.same.push((g, d));
                });
                // keep the candidate order deterministic after swap_remove
                cands.sort_by_key(|c| (c.parent, c.axis));
            }
            offsets.push(vals.len());
            finish_level(&w, &vals, &offsets, k, &mut gram, &mut node_sup)?;
        }
    }
    Ok(Parts {
        offsets,
        p0: p0.parts(),
        recipes,
        node_sup,
        gram,
    })
}

struct Candidate<S> {
    parent: usize,
    axis: usize,
    v: Vec<S>,
    coef: Vec<S>,
    same: Vec<(usize, S)>,
    start: f64,
}

fn finish_level<S: Scalar>(
    w: &[S],
    vals: &[Vec<S>],
    offsets: &[usize],
    k: usize,
    gram: &mut Vec<f64>,
    node_sup: &mut Vec<f64>,
) -> Result<()> {
    let range = offsets[k]..offsets[k + 1];
    let g = level_gram(w, vals, range.clone());
    if !(g <= GRAM_TOLERANCE) {
        return Err(Error::Precision {
            level: k,
            residual: g,
            tolerance: GRAM_TOLERANCE,
        });
    }
    gram.push(g);
    node_sup.push(level_sup(vals, range));
    Ok(())
}

impl OrthonormalBasis {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quad
    }

    pub fn eigen(&self) -> &EigenTable {
        &self.eigen
    }

    /// Members of level `k` as a range of global indices.
    pub fn members(&self, k: usize) -> Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn num_members(&self) -> usize {
        self.offsets[self.max_degree + 1]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    /// Gram residual per level measured during construction.
    pub fn construction_gram(&self) -> &[f64] {
        &self.gram
    }

    /// `max over quadrature nodes of C_k`, per level.
    pub fn node_sup(&self) -> &[f64] {
        &self.node_sup
    }

    fn check_level(&self, k: usize) -> Result<()> {
        if k > self.max_degree {
            return Err(argument(format!(
                "level {k} exceeds the basis degree {}",
                self.max_degree
            )));
        }
        Ok(())
    }

    fn values_in<S: Scalar>(&self, x: &[f64], count: usize) -> Vec<S> {
        let mut v: Vec<S> = Vec::with_capacity(count);
        v.push(S::from_parts(self.p0.0, self.p0.1));
        for r in &self.recipes[..count - 1] {
            let mut acc = S::from_f64(x[r.axis as usize]) * v[r.parent as usize];
            if r.terms_lo.is_empty() {
                for &(m, c) in &r.terms {
                    acc = acc - S::from_f64(c) * v[m as usize];
                }
            } else {
                for (&(m, c), &lo) in r.terms.iter().zip(&r.terms_lo) {
                    acc = acc - S::from_parts(c, lo) * v[m as usize];
                }
            }
            v.push(acc / S::from_parts(r.scale, r.scale_lo));
        }
        v
    }

    /// Values of the first `count` members at `x`, without a containment check.
    pub(crate) fn values_unchecked(&self, x: &[f64], count: usize) -> Vec<f64> {
        match self.precision {
            Precision::Double => self.values_in::<f64>(x, count),
            Precision::Extended => self
                .values_in::<DoubleDouble>(x, count)
                .into_iter()
                .map(Scalar::to_f64)
                .collect(),
        }
    }

    /// Values of all members `P_kj(x)` in level order.
    pub fn eval_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.spec.check_contains(x)?;
        Ok(self.values_unchecked(x, self.num_members()))
    }

    /// `C_k(x) = Σ_j P_kj(x)²` for every level.
    pub fn christoffel_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.eval_all(x)?;
        Ok(self.level_sums(&v, &v))
    }

    /// `Σ_j u_j v_j` per level for member-value vectors `u`, `v`.
    pub(crate) fn level_sums(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.offsets
            .windows(2)
            .map(|r| (r[0]..r[1]).map(|m| u[m] * v[m]).sum())
            .collect()
    }

    /// `P̃_k(x, y) = Σ_j P_kj(x) P_kj(y)`.
    pub fn projection_kernel(&self, k: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_level(k)?;
        self.spec.check_contains(x)?;
        self.spec.check_contains(y)?;
        let end = self.offsets[k + 1];
        let vx = self.values_unchecked(x, end);
        let vy = self.values_unchecked(y, end);
        Ok(self.members(k).map(|m| vx[m] * vy[m]).sum())
    }

    /// `C_k(x) = P̃_k(x, x)`.
    pub fn christoffel_diag(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_level(k)?;
        self.spec.check_contains(x)?;
        let v = self.values_unchecked(x, self.offsets[k + 1]);
        Ok(self.members(k).map(|m| v[m] * v[m]).sum())
    }

    /// Values of every member at every quadrature node (`[node][member]`).
    pub fn values_at_nodes(&self) -> Vec<Vec<f64>> {
        self.quad
            .nodes
            .par_iter()
            .map(|x| self.values_unchecked(x, self.num_members()))
            .collect()
    }

    /// Gram residual per level, recomputed from recipe evaluation at the nodes.
    pub fn gram_residual(&self) -> Vec<f64> {
        let vals = self.values_at_nodes();
        self.gram_from_values(|q, m| vals[q][m], self.max_degree)
    }

    /// Gram residual per level up to `degree`, evaluating the monomial
    /// coefficient form of each member at the nodes.
    pub fn gram_residual_from_coefficients(&self, degree: usize) -> Result<Vec<f64>> {
        self.check_level(degree)?;
        let polys = &self.coefficients()[..self.offsets[degree + 1]];
        let vals: Vec<Vec<f64>> = self
            .quad
            .nodes
            .par_iter()
            .map(|x| polys.iter().map(|p| p.eval(x)).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        Ok(self.gram_from_values(|q, m| vals[q][m], degree))
    }

    fn gram_from_values<F: Fn(usize, usize) -> f64 + Sync>(&self, val: F, degree: usize) -> Vec<f64> {
        let w = &self.quad.weights;
        (0..=degree)
            .map(|k| {
                self.members(k)
                    .into_par_iter()
                    .map(|m| {
                        (0..=m)
                            .map(|l| {
                                let g: f64 = w.iter().enumerate().map(|(q, wq)| wq * val(q, m) * val(q, l)).sum();
                                (g - if l == m { 1.0 } else { 0.0 }).abs()
                            })
                            .fold(0.0, f64::max)
                    })
                    .reduce(|| 0.0, f64::max)
            })
            .collect()
    }

    /// Monomial-coefficient form of every member, computed once on demand.
    pub fn coefficients(&self) -> &[MultiPoly] {
        self.coeffs.get_or_init(|| match self.precision {
            Precision::Double => self.coefficients_in::<DoubleDouble>(),
            Precision::Extended => self.coefficients_in::<DoubleDouble>(),
        })
    }

    fn coefficients_in<S: Scalar>(&self) -> Vec<MultiPoly> {
        let n = self.spec.dim();
        let monos = MultiIndex::up_to_degree(n, self.max_degree as u32);
        let pos: HashMap<&MultiIndex, usize> = monos.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let len_upto: Vec<usize> = (0..=self.max_degree).map(|k| self.offsets[k + 1]).collect();
        let shift: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                monos
                    .iter()
                    .map(|m| {
                        let mut e = m.exponents().to_vec();
                        e[i] += 1;
                        pos.get(&MultiIndex::new(e)).copied().unwrap_or(usize::MAX)
                    })
                    .collect()
            })
            .collect();
        // members and monomials share the level layout: degree-k members need
        // exactly the first len_upto[k] monomials
        let mut coef: Vec<Vec<S>> = vec![vec![S::from_parts(self.p0.0, self.p0.1)]];
        let mut degree_of = vec![0usize];
        for r in &self.recipes {
            let k = degree_of[r.parent as usize] + 1;
            let mut c = vec![S::zero(); len_upto[k]];
            for (p, v) in coef[r.parent as usize].iter().enumerate() {
                c[shift[r.axis as usize][p]] = *v;
            }
            let (terms, scale) = recipe_scalars::<S>(r);
            for (m, cm) in terms {
                for (a, b) in c.iter_mut().zip(&coef[m]) {
                    *a = *a - cm * *b;
                }
            }
            c.iter_mut().for_each(|a| *a = *a / scale);
            coef.push(c);
            degree_of.push(k);
        }
        coef.into_iter()
            .map(|c| {
                MultiPoly::from_terms(n, monos.iter().cloned().zip(c.into_iter().map(S::to_f64)))
                    .expect("indices share the basis dimension")
            })
            .collect()
    }

    /// Members of level `k` in coefficient form.
    pub fn level(&self, k: usize) -> Result<&[MultiPoly]> {
        self.check_level(k)?;
        Ok(&self.coefficients()[self.members(k)])
    }

    /// Serializes spec, recipes and coefficient-form levels.
    pub fn to_json(&self) -> Result<String> {
        let levels = (0..=self.max_degree)
            .map(|k| self.coefficients()[self.members(k)].to_vec())
            .collect();
        let file = BasisFile {
            schema_version: SCHEMA_VERSION,
            spec: self.spec.clone(),
            max_degree: self.max_degree,
            precision: self.precision,
            p0: [self.p0.0, self.p0.1],
            level_sizes: self.level_sizes(),
            recipes: self.recipes.clone(),
            levels,
        };
        Ok(serde_json::to_string(&file)?)
    }

    /// Restores a basis from [`to_json`](Self::to_json) output and re-audits it
    /// on a fresh quadrature rule.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: BasisFile = serde_json::from_str(s)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(argument(format!(
                "unsupported basis schema version {}",
                file.schema_version
            )));
        }
        let n = file.spec.dim();
        let expected: Vec<usize> = (0..=file.max_degree).map(|k| level_size(n, k)).collect();
        if file.level_sizes != expected || file.recipes.len() + 1 != expected.iter().sum::<usize>() {
            return Err(argument("basis file level sizes do not match its spec"));
        }
        for (i, r) in file.recipes.iter().enumerate() {
            let m = i + 1;
            if r.parent as usize >= m
                || r.axis as usize >= n
                || r.terms.iter().any(|&(t, _)| t as usize >= m)
                || !(r.scale > 0.0)
            {
                return Err(argument(format!("basis file recipe {m} is malformed")));
            }
        }
        let mut offsets = vec![0];
        for s in &file.level_sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let mut basis = Self {
            quad: quadrature(&file.spec, 2 * file.max_degree + 2)?,
            eigen: EigenTable::new(&file.spec, file.max_degree),
            spec: file.spec,
            max_degree: file.max_degree,
            precision: file.precision,
            offsets,
            p0: (file.p0[0], file.p0[1]),
            recipes: file.recipes,
            node_sup: Vec::new(),
            gram: Vec::new(),
            coeffs: OnceLock::new(),
        };
        let vals = basis.values_at_nodes();
        basis.gram = basis.gram_from_values(|q, m| vals[q][m], basis.max_degree);
        basis.node_sup = (0..=basis.max_degree)
            .map(|k| {
                vals.iter()
                    .map(|row| basis.members(k).map(|m| row[m] * row[m]).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect();
        if let Some((k, &g)) = basis.gram.iter().enumerate().find(|(_, g)| !(**g <= GRAM_TOLERANCE)) {
            return Err(Error::Precision {
                level: k,
                residual: g,
                tolerance: GRAM_TOLERANCE,
            });
        }
        Ok(basis)
    }
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    schema_version: u32,
    spec: DomainSpec,
    max_degree: usize,
    precision: Precision,
    p0: [f64; 2],
    level_sizes: Vec<usize>,
    recipes: Vec<Recipe>,
    levels: Vec<Vec<MultiPoly>>,
}

/// Eigen-relation residual per level: `max|L P + λ_k P| / max|λ_k P|` over the
/// members of level `k`, in coefficient form (absolute for `k = 0`).
pub fn verify_eigenrelation(basis: &OrthonormalBasis) -> Result<Vec<f64>> {
    let polys = basis.coefficients();
    (0..=basis.max_degree)
        .map(|k| {
            let lam = basis.eigen.lambda(k);
            basis
                .members(k)
                .into_par_iter()
                .map(|m| {
                    let p = &polys[m];
                    let lp = apply_operator(&basis.spec, p)?;
                    let res = lp.add_scaled(p, lam)?.max_abs_coeff();
                    Ok(if k == 0 { res } else { res / (lam * p.max_abs_coeff()) })
                })
                .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::total_mass;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cheb() -> DomainSpec {
        DomainSpec::interval(-0.5, -0.5).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalue(&cheb(), 5), 25.0);
        assert_eq!(eigenvalue(&DomainSpec::ball(2, 0.5).unwrap(), 1), 3.0);
        assert_eq!(eigenvalue(&DomainSpec::simplex(vec![0.5, 0.5]).unwrap(), 1), 2.0);
        let t = EigenTable::new(&DomainSpec::ball(1, -0.45).unwrap(), 30);
        assert_eq!(t.lambda(0), 0.0);
        assert!(t.lambdas.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_sizes_are_binomial() {
        assert_eq!(level_size(2, 0), 1);
        assert_eq!(level_size(2, 5), 6);
        assert_eq!(level_size(3, 4), 15);
        let b = build_basis(&DomainSpec::simplex(vec![0.2, 0.5, 1.0, 0.0]).unwrap(), 5).unwrap();
        assert_eq!(b.level_sizes(), vec![1, 3, 6, 10, 15, 21]);
    }

    #[test]
    fn chebyshev_members() {
        let b = build_basis(&cheb(), 6).unwrap();
        let v = b.eval_all(&[0.3]).unwrap();
        assert_relative_eq!(v[0], 1.0 / PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(v[1].abs(), (2.0 / PI).sqrt() * 0.3, max_relative = 1e-14);
        let p = b.level(1).unwrap()[0].clone();
        let q = b.quadrature();
        assert_relative_eq!(q.integrate(|x| p.eval(x).unwrap().powi(2)), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn constant_member_everywhere() {
        for s in [
            DomainSpec::ball(3, 0.7).unwrap(),
            DomainSpec::simplex(vec![1.0, -0.2, 0.3]).unwrap(),
            DomainSpec::interval(1.5, 0.0).unwrap(),
        ] {
            let b = build_basis(&s, 2).unwrap();
            let x = vec![0.1; s.dim()];
            assert_relative_eq!(
                b.eval_all(&x).unwrap()[0],
                1.0 / total_mass(&s).sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn uniform_simplex_first_member() {
        let b = build_basis(&DomainSpec::simplex(vec![0.5, 0.5]).unwrap(), 3).unwrap();
        let p = &b.level(1).unwrap()[0];
        assert!(p.eval(&[0.5]).unwrap().abs() < 1e-14);
        let c1 = p.coeff(&MultiIndex::new(vec![1]));
        let c0 = p.coeff(&MultiIndex::new(vec![0]));
        assert_relative_eq!(c0 / c1, -0.5, max_relative = 1e-14);
    }

    #[test]
    fn chebyshev_projection_kernel() {
        let b = build_basis(&cheb(), 12).unwrap();
        for &(th, ph) in &[(0.3, 1.1), (0.0, 2.0), (2.9, 0.4)] {
            let (x, y) = (f64::cos(th), f64::cos(ph));
            assert_relative_eq!(
                b.projection_kernel(0, &[x], &[y]).unwrap(),
                1.0 / PI,
                max_relative = 1e-14
            );
            for k in 1..=12 {
                let want = 2.0 / PI * (k as f64 * th).cos() * (k as f64 * ph).cos();
                assert!((b.projection_kernel(k, &[x], &[y]).unwrap() - want).abs() < 1e-13);
            }
        }
        for k in 1..=12 {
            assert_relative_eq!(b.christoffel_diag(k, &[1.0]).unwrap(), 2.0 / PI, max_relative = 1e-13);
        }
        assert!(b.projection_kernel(13, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn reproducing_and_zero_mean() {
        let b = build_basis(&DomainSpec::ball(2, 0.25).unwrap(), 8).unwrap();
        let q = b.quadrature();
        let x = [0.2, -0.5];
        let vx = b.eval_all(&x).unwrap();
        let vals = b.values_at_nodes();
        for k in 0..=8 {
            let r = b.members(k);
            for j in r.clone() {
                let got: f64 = q
                    .weights
                    .iter()
                    .zip(&vals)
                    .map(|(w, vy)| w * r.clone().map(|m| vx[m] * vy[m]).sum::<f64>() * vy[j])
                    .sum();
                assert!((got - vx[j]).abs() < 1e-12, "{k} {j}");
            }
            if k >= 1 {
                let mean: f64 = q
                    .weights
                    .iter()
                    .zip(&vals)
                    .map(|(w, vy)| w * r.clone().map(|m| vx[m] * vy[m]).sum::<f64>())
                    .sum();
                assert!(mean.abs() < 1e-12);
            }
            let c = b.christoffel_diag(k, &x).unwrap();
            assert!((c - b.projection_kernel(k, &x, &x).unwrap()).abs() <= 1e-13 * c.max(1.0));
        }
    }

    #[test]
    fn eigenrelation_small_cases() {
        let b = build_basis(&cheb(), 40).unwrap();
        let r = verify_eigenrelation(&b).unwrap();
        assert_eq!(r[0], 0.0);
        assert!(r.iter().all(|&v| v <= 1e-9), "{r:?}");
        let b = build_basis(&DomainSpec::simplex(vec![0.3, 1.0, -0.4]).unwrap(), 8).unwrap();
        let r = verify_eigenrelation(&b).unwrap();
        assert!(r[0] <= 1e-12 && r.iter().all(|&v| v <= 1e-10), "{r:?}");
    }

    #[test]
    fn gram_recomputed() {
        let b = build_basis(&DomainSpec::ball(3, -0.3).unwrap(), 7).unwrap();
        assert!(b.gram_residual().iter().all(|&g| g <= 1e-12));
        assert!(b
            .gram_residual_from_coefficients(7)
            .unwrap()
            .iter()
            .all(|&g| g <= 1e-11));
        assert!(b.node_sup().iter().all(|&s| s > 0.0));
    }

    #[test]
    fn extended_agrees_with_double() {
        let s = DomainSpec::simplex(vec![0.5, 0.5, 0.5]).unwrap();
        let d = build_basis(&s, 10).unwrap();
        let e = build_basis_with(&s, 10, Precision::Extended).unwrap();
        let x = [0.15, 0.6];
        let cd = d.christoffel_all(&x).unwrap();
        let ce = e.christoffel_all(&x).unwrap();
        for (a, b) in cd.iter().zip(&ce) {
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
        assert!(e.construction_gram().iter().all(|&g| g <= 1e-20));
    }

    #[test]
    fn capacity_caps() {
        let s = DomainSpec::ball(2, 0.0).unwrap();
        assert!(matches!(build_basis(&s, 41), Err(Error::Capacity(_))));
        assert!(matches!(build_basis(&cheb(), 201), Err(Error::Capacity(_))));
    }

    #[test]
    fn json_roundtrip() {
        let b = build_basis(&DomainSpec::ball(2, 0.3).unwrap(), 6).unwrap();
        let s = b.to_json().unwrap();
        let back = OrthonormalBasis::from_json(&s).unwrap();
        let x = [0.3, 0.1];
        assert_eq!(b.eval_all(&x).unwrap(), back.eval_all(&x).unwrap());
        assert_eq!(back.level(3).unwrap(), b.level(3).unwrap());
        let tampered = s.replacen("\"schema_version\":1", "\"schema_version\":9", 1);
        assert!(OrthonormalBasis::from_json(&tampered).is_err());
    }
}
