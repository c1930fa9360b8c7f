//! Suite orchestration: runs validation checks from a [`RunConfig`] and writes
//! JSON reports and CSV tables.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::basis::{build_basis_with, verify_eigenrelation, OrthonormalBasis};
use crate::config::RunConfig;
use crate::domain::{DomainKind, DomainSpec};
use crate::error::{argument, Error, Result};
use crate::kernel::{HeatKernelEvaluator, TruncationPolicy};
use crate::poly::MultiPoly;
use crate::quadrature::quadrature;
use crate::validation::chart::{chart_laplacian_check, CHART_MIN_GAP};
use crate::validation::correspondence::jacobi_simplex_correspondence;
use crate::validation::doubling::{doubling_scan, DoublingSettings};
use crate::validation::gauss::{gauss_ratio_scan, GaussScanSettings};
use crate::validation::green::{boundary_flux_decay, green_identity, operator_symmetry, FluxTolerance};
use crate::validation::grid::interior_grid;
use crate::validation::localize::{
    finite_speed_scan, localization_check, speed_spread, FiniteSpeedSettings, LocalizationSettings,
};
use crate::validation::{random_poly, SCHEMA_VERSION};
use crate::volume::MeasureSampler;

/// Seed for suites whose randomness is not Monte Carlo, when none is configured.
const FALLBACK_SEED: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Ops,
    Basis,
    Kernel,
    Gauss,
    Doubling,
    Green,
    Flux,
    Chart,
    Correspondence,
    Localize,
    Fsp,
    All,
}

impl Suite {
    pub const EACH: [Suite; 11] = [
        Suite::Ops,
        Suite::Basis,
        Suite::Kernel,
        Suite::Gauss,
        Suite::Doubling,
        Suite::Green,
        Suite::Flux,
        Suite::Chart,
        Suite::Correspondence,
        Suite::Localize,
        Suite::Fsp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ops => "ops",
            Suite::Basis => "basis",
            Suite::Kernel => "kernel",
            Suite::Gauss => "gauss",
            Suite::Doubling => "doubling",
            Suite::Green => "green",
            Suite::Flux => "flux",
            Suite::Chart => "chart",
            Suite::Correspondence => "correspondence",
            Suite::Localize => "localize",
            Suite::Fsp => "fsp",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain(std::iter::once(Suite::All))
            .find(|x| x.name() == s)
            .ok_or_else(|| argument(format!("unknown suite `{s}`")))
    }
}

/// CSV table: header row plus records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    /// Header row then data rows, `\n`-terminated.
    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.headers).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn coords(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";")
}

/// Result of one suite.
#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub verdict: bool,
    /// `(label, value)` lines for the console summary.
    pub summary: Vec<(String, String)>,
    pub report: Value,
    pub table: Table,
}

/// On-disk report: schema version, verdict, resolved config and suite payload.
#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    suite: &'a str,
    verdict: bool,
    config: &'a RunConfig,
    report: &'a Value,
}

/// Lazily built basis and evaluator shared by the suites of one run.
pub struct Context<'a> {
    config: &'a RunConfig,
    basis: Option<OrthonormalBasis>,
    evaluator: Option<HeatKernelEvaluator>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            basis: None,
            evaluator: None,
        }
    }

    fn spec(&self) -> &DomainSpec {
        &self.config.domain
    }

    fn build(&self) -> Result<OrthonormalBasis> {
        build_basis_with(self.spec(), self.config.max_degree(), self.config.precision())
    }

    fn basis(&mut self) -> Result<&OrthonormalBasis> {
        if self.evaluator.is_none() && self.basis.is_none() {
            self.basis = Some(self.build()?);
        }
        Ok(match &self.evaluator {
            Some(ev) => ev.basis(),
            None => self.basis.as_ref().expect("built above"),
        })
    }

    fn evaluator(&mut self) -> Result<&HeatKernelEvaluator> {
        if self.evaluator.is_none() {
            let basis = match self.basis.take() {
                Some(b) => b,
                None => self.build()?,
            };
            let mut policy = TruncationPolicy::for_basis(&basis);
            policy.epsilon = self.config.truncation.epsilon;
            self.evaluator = Some(HeatKernelEvaluator::with_policy(basis, policy)?);
        }
        Ok(self.evaluator.as_ref().expect("built above"))
    }

    fn grid(&self) -> Result<Vec<Vec<f64>>> {
        interior_grid(self.spec(), self.config.grid.size, self.config.grid.min_gap)
    }

    /// θ-uniform points on 1-D domains, the interior grid otherwise.
    fn scan_grid(&self, points: usize) -> Result<Vec<Vec<f64>>> {
        if self.spec().kind() == DomainKind::Interval {
            Ok(theta_points(points))
        } else {
            self.grid()
        }
    }
}

/// `cos θ_i` at the midpoints of `count` equal arcs of `[0, π]`.
pub fn theta_points(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| vec![(std::f64::consts::PI * (i as f64 + 0.5) / count as f64).cos()])
        .collect()
}

fn seed_or_fallback(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(FALLBACK_SEED)
}

fn spread_subset<T: Clone>(items: &[T], count: usize) -> Vec<T> {
    if items.len() <= count {
        return items.to_vec();
    }
    (0..count).map(|i| items[i * items.len() / count].clone()).collect()
}

fn ops(ctx: &mut Context) -> Result<SuiteOutcome> {
    let tol = ctx.config.basis.eigen_tolerance;
    let basis = ctx.basis()?;
    let res = verify_eigenrelation(basis)?;
    let mut table = Table::new(&["level", "lambda", "eigen_residual"]);
    for (k, r) in res.iter().enumerate() {
        table.push([k.to_string(), num(basis.eigen().lambdas[k]), num(*r)]);
    }
    let max = res.iter().copied().fold(0.0, f64::max);
    Ok(SuiteOutcome {
        suite: Suite::Ops,
        verdict: max <= tol,
        summary: vec![
            ("max degree".into(), basis.max_degree().to_string()),
            ("max eigen residual".into(), format!("{max:.3e} (tolerance {tol:.1e})")),
        ],
        report: json!({ "residuals": res, "max_residual": max, "tolerance": tol }),
        table,
    })
}

fn basis_suite(ctx: &mut Context) -> Result<SuiteOutcome> {
    let tol = ctx.config.basis.gram_tolerance;
    let basis = ctx.basis()?;
    let gram = basis.gram_residual();
    let sizes = basis.level_sizes();
    let mut table = Table::new(&["level", "size", "gram_residual", "node_sup"]);
    for (k, g) in gram.iter().enumerate() {
        table.push([k.to_string(), sizes[k].to_string(), num(*g), num(basis.node_sup()[k])]);
    }
    let max = gram.iter().copied().fold(0.0, f64::max);
    Ok(SuiteOutcome {
        suite: Suite::Basis,
        verdict: max <= tol,
        summary: vec![
            ("members".into(), basis.num_members().to_string()),
            ("max Gram residual".into(), format!("{max:.3e} (tolerance {tol:.1e})")),
        ],
        report: json!({ "level_sizes": sizes, "gram_residual": gram, "max_residual": max, "tolerance": tol }),
        table,
    })
}

fn kernel_suite(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let kc = &cfg.kernel;
    let points = spread_subset(&ctx.grid()?, kc.points);
    let ev = ctx.evaluator()?;
    let mut table = Table::new(&["check", "s", "t", "x", "y", "value"]);
    let (mut mass_err, mut semi_err, mut sym_err) = (0.0f64, 0.0f64, 0.0f64);
    for &t in &kc.times {
        for x in &points {
            let m = ev.mass_check(t, x)?;
            mass_err = mass_err.max((m - 1.0).abs());
            table.push(["mass".into(), String::new(), num(t), coords(x), String::new(), num(m)]);
        }
        for (a, x) in points.iter().enumerate() {
            for y in &points[a + 1..] {
                let d = (ev.heat_kernel(t, x, y)?.value - ev.heat_kernel(t, y, x)?.value).abs();
                sym_err = sym_err.max(d);
            }
        }
    }
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = points.iter().zip(points.iter().rev()).collect();
    for &[s, t] in &kc.semigroup {
        for (x, z) in &pairs {
            let r = ev.semigroup_check(s, t, x, z)?;
            semi_err = semi_err.max(r);
            table.push(["semigroup".into(), num(s), num(t), coords(x), coords(z), num(r)]);
        }
    }
    let verdict =
        mass_err <= kc.mass_tolerance && semi_err <= kc.semigroup_tolerance && sym_err <= kc.symmetry_tolerance;
    Ok(SuiteOutcome {
        suite: Suite::Kernel,
        verdict,
        summary: vec![
            ("t_min".into(), format!("{:.4e}", ev.policy().t_min)),
            ("max |mass - 1|".into(), format!("{mass_err:.3e}")),
            ("max semigroup residual".into(), format!("{semi_err:.3e}")),
            ("max symmetry defect".into(), format!("{sym_err:.3e}")),
        ],
        report: json!({
            "t_min": ev.policy().t_min,
            "mass_error": mass_err,
            "semigroup_residual": semi_err,
            "symmetry_defect": sym_err,
        }),
        table,
    })
}

fn gauss(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let g = &cfg.gauss;
    let settings = GaussScanSettings {
        times: g.times.clone(),
        ratio_min: g.ratio_min,
        ratio_max: g.ratio_max,
        diagonal_ratio: g.diagonal_ratio,
        max_exponent_spread: g.max_exponent_spread,
        max_diagonal_spread: g.max_diagonal_spread,
        budget: cfg.budget()?,
        max_volume_error: cfg.volume.max_rel_error,
    };
    let grid = ctx.grid()?;
    let r = gauss_ratio_scan(ctx.evaluator()?, &grid, &settings)?;
    let mut table = Table::new(&[
        "t", "x", "y", "rho", "v_x", "v_y", "kernel", "tail", "n_value", "exponent", "diagonal",
    ]);
    for row in &r.rows {
        table.push([
            num(row.t),
            coords(&row.x),
            coords(&row.y),
            num(row.rho),
            num(row.v_x),
            num(row.v_y),
            num(row.kernel),
            num(row.tail),
            num(row.n_value),
            row.exponent.map(num).unwrap_or_default(),
            row.diagonal.to_string(),
        ]);
    }
    Ok(SuiteOutcome {
        suite: Suite::Gauss,
        verdict: r.verdict,
        summary: vec![
            ("E range".into(), format!("[{:.4}, {:.4}]", r.e_min, r.e_max)),
            ("(c2_hat, c4_hat)".into(), format!("({:.4}, {:.4})", r.c2_hat, r.c4_hat)),
            ("diagonal N range".into(), format!("[{:.4}, {:.4}]", r.n_lo, r.n_hi)),
            (
                "rows (admissible / excluded / violations)".into(),
                format!("{} / {} / {}", r.admissible, r.excluded, r.violations),
            ),
        ],
        report: serde_json::to_value(&r)?,
        table,
    })
}

fn doubling(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let settings = DoublingSettings {
        radii: cfg.doubling.radii.clone(),
        budget: cfg.budget()?,
        max_volume_error: cfg.volume.max_rel_error,
        max_comparability_spread: cfg.doubling.max_comparability_spread,
    };
    let r = doubling_scan(ctx.spec(), &ctx.grid()?, &settings)?;
    let mut table = Table::new(&["x", "r", "v_r", "v_2r", "ratio", "comparability"]);
    for row in &r.rows {
        table.push([
            coords(&row.x),
            num(row.r),
            num(row.v_r),
            num(row.v_2r),
            num(row.ratio),
            num(row.comparability),
        ]);
    }
    Ok(SuiteOutcome {
        suite: Suite::Doubling,
        verdict: r.verdict,
        summary: vec![
            (
                "max V(x,2r)/V(x,r)".into(),
                format!("{:.4} (cap {:.4})", r.max_ratio, r.cap),
            ),
            ("V/V̂ spread".into(), format!("{:.4}", r.comparability_spread)),
        ],
        report: serde_json::to_value(&r)?,
        table,
    })
}

fn green(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let spec = ctx.spec();
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed_or_fallback(cfg));
    let mut table = Table::new(&["pair", "lhs", "rhs", "residual", "symmetry_residual"]);
    let (mut worst, mut worst_sym) = (0.0f64, 0.0f64);
    for i in 0..cfg.green.pairs {
        let f = random_poly(&mut rng, n, cfg.green.degree);
        let h = random_poly(&mut rng, n, cfg.green.degree);
        let g = green_identity(spec, &f, &h)?;
        let s = operator_symmetry(spec, &f, &h)?;
        worst = worst.max(g.residual);
        worst_sym = worst_sym.max(s.residual);
        table.push([i.to_string(), num(g.lhs), num(g.rhs), num(g.residual), num(s.residual)]);
    }
    let tol = cfg.green.tolerance;
    Ok(SuiteOutcome {
        suite: Suite::Green,
        verdict: worst <= tol && worst_sym <= tol,
        summary: vec![
            (
                "max Green residual".into(),
                format!("{worst:.3e} (tolerance {tol:.1e})"),
            ),
            ("max symmetry residual".into(), format!("{worst_sym:.3e}")),
        ],
        report: json!({ "max_residual": worst, "max_symmetry_residual": worst_sym, "tolerance": tol }),
        table,
    })
}

/// Default flux test function for a domain.
pub fn default_flux_function(spec: &DomainSpec) -> MultiPoly {
    let n = spec.dim();
    let var = |i| MultiPoly::variable(n, i).expect("axis within dimension");
    match spec.kind() {
        DomainKind::Ball => &var(0) * &var(0),
        _ if n == 1 => var(0),
        _ => {
            let s = &var(0) + &var(1);
            &(&var(0) - &var(1)) + &(&s * &s)
        }
    }
}

fn flux(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let spec = ctx.spec();
    let f = cfg.flux.f.clone().unwrap_or_else(|| default_flux_function(spec));
    let tol = FluxTolerance {
        slope: cfg.flux.slope_tolerance,
        min_r_squared: cfg.flux.min_r_squared,
    };
    let r = boundary_flux_decay(spec, &f, &MultiPoly::constant(spec.dim(), 1.0), &cfg.flux.epsilons, tol)?;
    let mut table = Table::new(&["face", "epsilon", "j"]);
    for face in &r.faces {
        for (e, j) in r.epsilons.iter().zip(&face.j_values) {
            table.push([face.face.clone(), num(*e), num(*j)]);
        }
    }
    let mut summary: Vec<(String, String)> = r
        .faces
        .iter()
        .map(|fc| {
            let fit = fc.fit.map_or("no fit".to_string(), |f| {
                format!("{:.4} (R² {:.4})", f.slope, f.r_squared)
            });
            (
                format!("slope {}", fc.face),
                format!("{fit}, expected {:.4}", fc.expected_slope),
            )
        })
        .collect();
    summary.push(("exact zero".into(), r.exact_zero.to_string()));
    Ok(SuiteOutcome {
        suite: Suite::Flux,
        verdict: r.verdict,
        summary,
        report: serde_json::to_value(&r)?,
        table,
    })
}

/// Interior samples drawn from `μ`, keeping those away from the boundary.
fn chart_samples(spec: &DomainSpec, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sampler = MeasureSampler::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut y = Vec::new();
    let mut tries = 0;
    while out.len() < count {
        sampler.sample_into(&mut rng, &mut y);
        if spec.boundary_gap(&y) >= 10.0 * CHART_MIN_GAP {
            out.push(y.clone());
        }
        tries += 1;
        if tries > 1000 * count {
            return Err(Error::Accuracy("could not draw interior chart samples".into()));
        }
    }
    Ok(out)
}

fn chart(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let spec = ctx.spec();
    let seed = seed_or_fallback(cfg);
    let samples = chart_samples(spec, cfg.chart.samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc4a7);
    let mut table = Table::new(&["polynomial", "max_residual", "factor", "samples"]);
    let mut worst = 0.0f64;
    for i in 0..cfg.chart.polynomials {
        let f = random_poly(&mut rng, spec.dim(), cfg.chart.degree);
        let r = chart_laplacian_check(spec, &f, &samples)?;
        worst = worst.max(r.max_residual);
        table.push([i.to_string(), num(r.max_residual), num(r.factor), r.samples.to_string()]);
    }
    let tol = cfg.chart.tolerance;
    Ok(SuiteOutcome {
        suite: Suite::Chart,
        verdict: worst <= tol,
        summary: vec![(
            "max chart residual".into(),
            format!("{worst:.3e} (tolerance {tol:.1e})"),
        )],
        report: json!({ "max_residual": worst, "tolerance": tol, "samples": samples.len() }),
        table,
    })
}

/// `(α, β)` of a 1-D domain, reading a segment through `κ = (β+½, α+½)`.
fn jacobi_params(spec: &DomainSpec) -> Result<(f64, f64)> {
    let p = spec.params();
    match spec.kind() {
        DomainKind::Interval => Ok((p[0], p[1])),
        DomainKind::Simplex if spec.dim() == 1 => Ok((p[1] - 0.5, p[0] - 0.5)),
        _ => Err(Error::Config {
            field: "domain".into(),
            message: "the correspondence suite needs an interval or a 1-D simplex".into(),
        }),
    }
}

fn correspondence(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let (alpha, beta) = jacobi_params(ctx.spec())?;
    let c = &cfg.correspondence;
    let grid: Vec<f64> = theta_points(c.points).into_iter().map(|x| x[0]).collect();
    let r = jacobi_simplex_correspondence(
        alpha,
        beta,
        c.max_k,
        &grid,
        &c.times,
        c.tolerance,
        seed_or_fallback(cfg),
    )?;
    let mut table = Table::new(&["check", "identity", "max_residual", "tolerance", "pass"]);
    for ch in &r.checks {
        table.push([
            ch.name.clone(),
            ch.identity.clone(),
            num(ch.max_residual),
            num(ch.tolerance),
            ch.pass.to_string(),
        ]);
    }
    Ok(SuiteOutcome {
        suite: Suite::Correspondence,
        verdict: r.verdict,
        summary: r
            .checks
            .iter()
            .map(|ch| {
                (
                    ch.name.clone(),
                    format!("{:.3e} ({})", ch.max_residual, if ch.pass { "pass" } else { "FAIL" }),
                )
            })
            .collect(),
        report: serde_json::to_value(&r)?,
        table,
    })
}

fn localize(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let lc = &cfg.localize;
    let phi = cfg.bump();
    let order = match phi {
        crate::kernel::MultiplierSpec::SmoothBump { order, .. } => order,
        _ => unreachable!("bump() returns SmoothBump"),
    };
    let settings = LocalizationSettings {
        order,
        bins: lc.bins,
        min_r_squared: lc.min_r_squared,
        budget: cfg.budget()?,
        max_volume_error: cfg.volume.max_rel_error,
        ..Default::default()
    };
    let grid = ctx.scan_grid(lc.points)?;
    let ev = ctx.evaluator()?;
    let reports = lc
        .deltas
        .iter()
        .map(|&d| localization_check(ev, &phi, d, &grid, &settings))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["delta", "x", "y", "rho", "kernel", "floor", "normalized", "excluded"]);
    let mut summary = Vec::new();
    for r in &reports {
        for row in &r.rows {
            table.push([
                num(r.delta),
                coords(&row.x),
                coords(&row.y),
                num(row.rho),
                num(row.kernel),
                num(row.floor),
                num(row.normalized),
                row.excluded.to_string(),
            ]);
        }
        let r2 = r.envelope_fit.map_or(f64::NAN, |f| f.r_squared);
        summary.push((
            format!("δ = {}", r.delta),
            format!(
                "exponent {:.4} (R² {r2:.4}), c_m {:.4}, verdict {}",
                r.decay_exponent, r.c_m, r.verdict
            ),
        ));
    }
    let hi = reports.iter().map(|r| r.c_m).fold(0.0, f64::max);
    let lo = reports.iter().map(|r| r.c_m).fold(f64::INFINITY, f64::min);
    let c_ratio = hi / lo;
    summary.push((
        "c_m ratio across δ".into(),
        format!("{c_ratio:.4} (limit {})", lc.max_c_ratio),
    ));
    Ok(SuiteOutcome {
        suite: Suite::Localize,
        verdict: !reports.is_empty() && reports.iter().all(|r| r.verdict) && c_ratio <= lc.max_c_ratio,
        summary,
        report: json!({ "reports": reports, "c_m_ratio": c_ratio }),
        table,
    })
}

fn fsp(ctx: &mut Context) -> Result<SuiteOutcome> {
    let cfg = ctx.config;
    let fc = &cfg.fsp;
    let phi = cfg.sinc();
    let settings = FiniteSpeedSettings {
        threshold: fc.threshold,
        max_tail: fc.max_tail,
    };
    let grid = ctx.scan_grid(fc.points)?;
    let ev = ctx.evaluator()?;
    let reports = fc
        .deltas
        .iter()
        .map(|&d| finite_speed_scan(ev, &phi, d, &grid, &settings))
        .collect::<Result<Vec<_>>>()?;
    let spread = speed_spread(&reports);
    let mut table = Table::new(&[
        "delta",
        "fourier_support",
        "r_star",
        "c_star",
        "max_rho",
        "max_tail",
        "degenerate",
    ]);
    let mut summary = Vec::new();
    for r in &reports {
        table.push([
            num(r.delta),
            num(r.fourier_support),
            num(r.r_star),
            num(r.c_star),
            num(r.max_rho),
            num(r.max_tail),
            r.degenerate.to_string(),
        ]);
        summary.push((
            format!("δ = {}", r.delta),
            format!("r* {:.4}, c* {:.4}, tail {:.2e}", r.r_star, r.c_star, r.max_tail),
        ));
    }
    summary.push(("c* spread".into(), format!("{spread:.4} (limit {})", fc.max_spread)));
    Ok(SuiteOutcome {
        suite: Suite::Fsp,
        verdict: !reports.is_empty() && reports.iter().all(|r| r.verdict) && spread <= fc.max_spread,
        summary,
        report: json!({ "reports": reports, "c_star_spread": spread }),
        table,
    })
}

fn run_one(ctx: &mut Context, suite: Suite) -> Result<SuiteOutcome> {
    match suite {
        Suite::Ops => ops(ctx),
        Suite::Basis => basis_suite(ctx),
        Suite::Kernel => kernel_suite(ctx),
        Suite::Gauss => gauss(ctx),
        Suite::Doubling => doubling(ctx),
        Suite::Green => green(ctx),
        Suite::Flux => flux(ctx),
        Suite::Chart => chart(ctx),
        Suite::Correspondence => correspondence(ctx),
        Suite::Localize => localize(ctx),
        Suite::Fsp => fsp(ctx),
        Suite::All => unreachable!("expanded by run_suite"),
    }
}

/// Writes `<suite>.json` and `<suite>.csv` into `dir`.
pub fn write_outcome(config: &RunConfig, outcome: &SuiteOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let json_path = dir.join(format!("{}.json", outcome.suite));
    let csv_path = dir.join(format!("{}.csv", outcome.suite));
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        suite: outcome.suite.name(),
        verdict: outcome.verdict,
        config,
        report: &outcome.report,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    std::fs::write(&json_path, text)?;
    outcome.table.write_csv(&csv_path)?;
    Ok((json_path, csv_path))
}

/// Prints a two-column summary of an outcome.
pub fn print_summary(out: &mut dyn Write, outcome: &SuiteOutcome) -> Result<()> {
    let verdict = if outcome.verdict { "PASS" } else { "FAIL" };
    writeln!(out, "[{verdict}] {}", outcome.suite)?;
    let width = outcome
        .summary
        .iter()
        .map(|(k, _)| k.chars().count())
        .max()
        .unwrap_or(0);
    for (k, v) in &outcome.summary {
        let pad = width - k.chars().count();
        writeln!(out, "  {k}{}  {v}", " ".repeat(pad))?;
    }
    Ok(())
}

/// Runs a suite (or all of them), writing reports under `config.output_dir`.
///
/// Under `all`, a suite that does not apply to the domain (correspondence away
/// from 1-D) is skipped; any other error aborts the run.
pub fn run_suite(config: &RunConfig, suite: Suite, out: &mut dyn Write) -> Result<Vec<SuiteOutcome>> {
    config.validate()?;
    let mut ctx = Context::new(config);
    let list: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    let mut outcomes = Vec::new();
    for s in list {
        if suite == Suite::All && s == Suite::Correspondence && jacobi_params(&config.domain).is_err() {
            writeln!(out, "[SKIP] correspondence (needs a 1-D domain)")?;
            continue;
        }
        let outcome = run_one(&mut ctx, s)?;
        let (json_path, csv_path) = write_outcome(config, &outcome, &config.output_dir)?;
        print_summary(out, &outcome)?;
        writeln!(out, "  -> {} , {}", json_path.display(), csv_path.display())?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Writes the kernel on a quadrature grid for each configured time:
/// columns `t, i, j, x.., y.., weight_y, kernel, tail_bound`.
pub fn export_kernel_grid(config: &RunConfig, path: &Path) -> Result<Table> {
    config.validate()?;
    let mut ctx = Context::new(config);
    let spec = config.domain.clone();
    let n = spec.dim();
    let rule = quadrature(&spec, 2 * config.export.resolution - 1)?;
    let ev = ctx.evaluator()?;
    let points = rule.nodes.iter().map(|x| ev.point(x)).collect::<Result<Vec<_>>>()?;
    let mut headers: Vec<String> = vec!["t".into(), "i".into(), "j".into()];
    headers.extend((1..=n).map(|k| format!("x{k}")));
    headers.extend((1..=n).map(|k| format!("y{k}")));
    headers.extend(["weight_y".into(), "kernel".into(), "tail_bound".into()]);
    let mut table = Table {
        headers,
        rows: Vec::new(),
    };
    for &t in &config.export.times {
        for (i, px) in points.iter().enumerate() {
            for (j, py) in points.iter().enumerate() {
                let kv = ev.heat_kernel_at(t, px, py)?;
                let mut row = vec![num(t), i.to_string(), j.to_string()];
                row.extend(px.coords().iter().map(|v| num(*v)));
                row.extend(py.coords().iter().map(|v| num(*v)));
                row.extend([num(rule.weights[j]), num(kv.value), num(kv.tail_bound)]);
                table.rows.push(row);
            }
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    table.write_csv(path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cheb_config(dir: &Path) -> RunConfig {
        RunConfig {
            output_dir: dir.to_path_buf(),
            seed: Some(11),
            ..Default::default()
        }
    }

    #[test]
    fn suite_names_parse() {
        for s in Suite::EACH {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("wave".parse::<Suite>().is_err());
    }

    #[test]
    fn ops_on_chebyshev_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cheb_config(dir.path());
        let mut out = Vec::new();
        let o = run_suite(&cfg, Suite::Ops, &mut out).unwrap();
        assert!(o[0].verdict);
        let text = std::fs::read_to_string(dir.path().join("ops.json")).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
        assert_eq!(v["config"]["domain"]["kind"], "interval");
        let csv = std::fs::read_to_string(dir.path().join("ops.csv")).unwrap();
        assert!(csv.starts_with("level,lambda,eigen_residual\n"));
        assert_eq!(csv.lines().count(), cfg.max_degree() + 2);
        assert!(String::from_utf8(out).unwrap().contains("[PASS] ops"));
    }

    #[test]
    fn correspondence_has_four_checks() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cheb_config(dir.path());
        cfg.domain = DomainSpec::interval(0.0, 0.0).unwrap();
        let o = run_suite(&cfg, Suite::Correspondence, &mut std::io::sink()).unwrap();
        assert!(o[0].verdict, "{:?}", o[0].table.rows);
        assert_eq!(o[0].table.rows.len(), 4);
    }

    #[test]
    fn reports_are_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut ca = cheb_config(a.path());
        ca.output_dir = PathBuf::from("out");
        let cb = ca.clone();
        let oa = run_suite(&ca, Suite::Green, &mut std::io::sink()).unwrap();
        let ob = run_suite(&cb, Suite::Green, &mut std::io::sink()).unwrap();
        write_outcome(&ca, &oa[0], a.path()).unwrap();
        write_outcome(&cb, &ob[0], b.path()).unwrap();
        for f in ["green.json", "green.csv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
        let _ = std::fs::remove_dir_all("out");
    }

    #[test]
    fn export_grid_is_symmetric_with_unit_mass() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = cheb_config(dir.path());
        let path = dir.path().join("grid.csv");
        let table = export_kernel_grid(&cfg, &path).unwrap();
        let m = cfg.export.resolution;
        assert_eq!(table.rows.len(), m * m);
        let k = |i: usize, j: usize| table.rows[i * m + j][6].parse::<f64>().unwrap();
        let w = |j: usize| table.rows[j][5].parse::<f64>().unwrap();
        for i in 0..m {
            let mass: f64 = (0..m).map(|j| k(i, j) * w(j)).sum();
            assert!((mass - 1.0).abs() < 1e-10);
            for j in 0..i {
                assert!((k(i, j) - k(j, i)).abs() <= 1e-13);
            }
        }
        let again = export_kernel_grid(&cfg, &dir.path().join("again.csv")).unwrap();
        assert_eq!(again, table);
    }

    #[test]
    fn equilibrium_export() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = cheb_config(dir.path());
        cfg.export.times = vec![60.0];
        cfg.export.resolution = 8;
        let table = export_kernel_grid(&cfg, &dir.path().join("eq.csv")).unwrap();
        for row in &table.rows {
            assert!((row[6].parse::<f64>().unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_gamma_fails_before_running() {
        let text = "[domain]\nkind = \"ball\"\nn = 2\ngamma = -0.6\n";
        assert!(RunConfig::from_toml(text).unwrap_err().to_string().contains("γ > −1/2"));
    }
}
