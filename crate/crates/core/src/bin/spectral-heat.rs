use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spectral_heat::basis::{build_basis_with, verify_eigenrelation};
use spectral_heat::config::RunConfig;
use spectral_heat::geometry::{chart_lift, distance, inverse_metric, metric_det, metric_tensor};
use spectral_heat::kernel::{HeatKernelEvaluator, MultiplierSpec, TruncationPolicy};
use spectral_heat::precision::Precision;
use spectral_heat::suite::{export_kernel_grid, run_suite, Suite, Table};
use spectral_heat::volume::ball_volume;
use spectral_heat::{DomainKind, DomainSpec, Error, Result};

#[derive(Parser)]
#[command(
    name = "spectral-heat",
    version,
    about = "Heat kernels on the interval, ball and simplex"
)]
struct Cli {
    /// TOML run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "SPECTRAL_HEAT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long, global = true, value_enum)]
    domain: Option<Kind>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Ball dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Simplex weights κ₁,…,κ_{n+1}.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    kappa: Option<Vec<f64>>,
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long, global = true)]
    precision: Option<Precision>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Interval,
    Ball,
    Simplex,
}

#[derive(Subcommand)]
enum Command {
    /// Build or verify the orthonormal eigenbasis.
    #[command(subcommand)]
    Basis(BasisCmd),
    /// Distances, chart lifts, metrics and ball volumes.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Heat-kernel and multiplier evaluation.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Run a validation suite and write its reports.
    Validate {
        /// ops, basis, kernel, gauss, doubling, green, flux, chart, correspondence, localize, fsp or all.
        suite: Suite,
    },
    /// Configuration utilities.
    #[command(subcommand)]
    Config(ConfigCmd),
}

#[derive(Subcommand)]
enum BasisCmd {
    /// Build the basis and write it as JSON.
    Build {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print per-level eigen and Gram residuals.
    Verify,
}

#[derive(Args)]
struct Point {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    x: Vec<f64>,
}

#[derive(Subcommand)]
enum GeomCmd {
    Dist {
        #[command(flatten)]
        p: Point,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        y: Vec<f64>,
    },
    Lift {
        #[command(flatten)]
        p: Point,
    },
    Metric {
        #[command(flatten)]
        p: Point,
    },
    Volume {
        #[command(flatten)]
        p: Point,
        #[arg(long)]
        r: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Family {
    HeatExp,
    SmoothBump,
    SincPower,
}

#[derive(Subcommand)]
enum KernelCmd {
    /// `e^{tL}(x, y)` with its tail bound.
    Eval {
        #[arg(long)]
        t: f64,
        #[command(flatten)]
        p: Point,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        y: Vec<f64>,
    },
    /// `Φ(δ√-L)(x, y)`.
    Multiplier {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long, default_value_t = 2.0)]
        band: f64,
        #[arg(long, default_value_t = 4)]
        order: u32,
        #[arg(long)]
        delta: f64,
        #[command(flatten)]
        p: Point,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        y: Vec<f64>,
    },
    /// Kernel on a quadrature grid as CSV.
    Export {
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Print the resolved configuration, defaults included.
    Show,
}

fn domain_override(base: &DomainSpec, o: &Overrides) -> Result<Option<DomainSpec>> {
    let touched = o.domain.is_some()
        || o.alpha.is_some()
        || o.beta.is_some()
        || o.gamma.is_some()
        || o.n.is_some()
        || o.kappa.is_some();
    if !touched {
        return Ok(None);
    }
    let kind = match o.domain {
        Some(Kind::Interval) => DomainKind::Interval,
        Some(Kind::Ball) => DomainKind::Ball,
        Some(Kind::Simplex) => DomainKind::Simplex,
        None => base.kind(),
    };
    let same = kind == base.kind();
    let p = base.params();
    let spec = match kind {
        DomainKind::Interval => DomainSpec::interval(
            o.alpha.unwrap_or(if same { p[0] } else { 0.0 }),
            o.beta.unwrap_or(if same { p[1] } else { 0.0 }),
        )?,
        DomainKind::Ball => DomainSpec::ball(
            o.n.unwrap_or(if same { base.dim() } else { 2 }),
            o.gamma.unwrap_or(if same { p[0] } else { 0.0 }),
        )?,
        DomainKind::Simplex => match (&o.kappa, same) {
            (Some(k), _) => DomainSpec::simplex(k.clone())?,
            (None, true) => base.clone(),
            (None, false) => return Err(Error::Argument("--domain simplex needs --kappa".into())),
        },
    };
    Ok(Some(spec))
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(spec) = domain_override(&cfg.domain, o)? {
        cfg.domain = spec;
    }
    if let Some(d) = o.degree {
        cfg.basis.max_degree = Some(d);
    }
    if let Some(p) = o.precision {
        cfg.basis.precision = Some(p);
    }
    if let Some(s) = o.seed {
        cfg.seed = Some(s);
    }
    if let Some(d) = &o.output_dir {
        cfg.output_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn evaluator(cfg: &RunConfig) -> Result<HeatKernelEvaluator> {
    let basis = build_basis_with(&cfg.domain, cfg.max_degree(), cfg.precision())?;
    let mut policy = TruncationPolicy::for_basis(&basis);
    policy.epsilon = cfg.truncation.epsilon;
    HeatKernelEvaluator::with_policy(basis, policy)
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// Coordinates joined with `;` (metric matrices are row-major).
fn join(v: &[f64]) -> String {
    v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";")
}

/// Returns whether every verdict passed.
fn run(cli: &Cli) -> Result<bool> {
    let cfg = resolve(cli)?;
    let spec = &cfg.domain;
    match &cli.command {
        Command::Basis(BasisCmd::Build { out }) => {
            let basis = build_basis_with(spec, cfg.max_degree(), cfg.precision())?;
            let path = out.clone().unwrap_or_else(|| cfg.output_dir.join("basis.json"));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, basis.to_json()?)?;
            let gram = basis.gram_residual().into_iter().fold(0.0, f64::max);
            println!(
                "built degree {} ({} members), max Gram residual {gram:.3e} -> {}",
                basis.max_degree(),
                basis.num_members(),
                path.display()
            );
            Ok(true)
        }
        Command::Basis(BasisCmd::Verify) => {
            let basis = build_basis_with(spec, cfg.max_degree(), cfg.precision())?;
            let eig = verify_eigenrelation(&basis)?;
            let gram = basis.gram_residual();
            println!("{:>5} {:>14} {:>12} {:>12}", "level", "lambda", "eigen", "gram");
            for (k, (e, g)) in eig.iter().zip(&gram).enumerate() {
                println!("{k:>5} {:>14.6} {e:>12.3e} {g:>12.3e}", basis.eigen().lambdas[k]);
            }
            let ok = eig.iter().all(|e| *e <= cfg.basis.eigen_tolerance)
                && gram.iter().all(|g| *g <= cfg.basis.gram_tolerance);
            Ok(ok)
        }
        Command::Geom(g) => {
            let mut table = Table::new(&["quantity", "x", "y", "r", "value", "stderr"]);
            let mut row = |q: &str, x: &[f64], y: String, r: String, v: String, e: f64| {
                table.push([q.to_string(), join(x), y, r, v, e.to_string()]);
            };
            let flat = |m: nalgebra::DMatrix<f64>| join(m.transpose().as_slice());
            match g {
                GeomCmd::Dist { p, y } => {
                    let d = distance(spec, &p.x, y)?;
                    row("distance", &p.x, join(y), String::new(), d.to_string(), 0.0);
                }
                GeomCmd::Lift { p } => {
                    row(
                        "lift",
                        &p.x,
                        String::new(),
                        String::new(),
                        join(&chart_lift(spec, &p.x)?),
                        0.0,
                    );
                }
                GeomCmd::Metric { p } => {
                    let (g, gi, det) = (
                        metric_tensor(spec, &p.x)?,
                        inverse_metric(spec, &p.x)?,
                        metric_det(spec, &p.x)?,
                    );
                    row("metric", &p.x, String::new(), String::new(), flat(g), 0.0);
                    row("inverse_metric", &p.x, String::new(), String::new(), flat(gi), 0.0);
                    row("metric_det", &p.x, String::new(), String::new(), det.to_string(), 0.0);
                }
                GeomCmd::Volume { p, r } => {
                    let v = ball_volume(spec, &p.x, *r, &cfg.budget()?)?;
                    row(
                        "volume",
                        &p.x,
                        String::new(),
                        r.to_string(),
                        v.value.to_string(),
                        v.stderr,
                    );
                }
            }
            table.write_to(std::io::stdout().lock())?;
            Ok(true)
        }
        Command::Kernel(KernelCmd::Eval { t, p, y }) => {
            let kv = evaluator(&cfg)?.heat_kernel(*t, &p.x, y)?;
            print_json(&serde_json::to_value(kv)?)?;
            Ok(true)
        }
        Command::Kernel(KernelCmd::Multiplier {
            family,
            radius,
            band,
            order,
            delta,
            p,
            y,
        }) => {
            let phi = match family {
                Family::HeatExp => MultiplierSpec::HeatExp,
                Family::SmoothBump => MultiplierSpec::SmoothBump {
                    radius: *radius,
                    order: *order,
                },
                Family::SincPower => MultiplierSpec::SincPower {
                    band: *band,
                    order: *order,
                },
            };
            let kv = evaluator(&cfg)?.multiplier_kernel(&phi, *delta, &p.x, y)?;
            print_json(&serde_json::to_value(kv)?)?;
            Ok(true)
        }
        Command::Kernel(KernelCmd::Export { times, resolution, out }) => {
            let mut cfg = cfg.clone();
            if let Some(t) = times {
                cfg.export.times = t.clone();
            }
            if let Some(r) = resolution {
                cfg.export.resolution = *r;
            }
            let path = out.clone().unwrap_or_else(|| cfg.output_dir.join("kernel_grid.csv"));
            let table = export_kernel_grid(&cfg, &path)?;
            println!("wrote {} rows -> {}", table.rows.len(), path.display());
            Ok(true)
        }
        Command::Validate { suite } => {
            let outcomes = run_suite(&cfg, *suite, &mut std::io::stdout())?;
            Ok(outcomes.iter().all(|o| o.verdict))
        }
        Command::Config(ConfigCmd::Show) => {
            print!("{}", cfg.to_toml()?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
