use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use blab_core::admissibility::{
    default_eps_schedule, divergence_check, fmo_estimate, membership_ae, profile_from_q, q_sup, DivergenceVerdict,
    FmoVerdict, QProfile, SetConstraint,
};
use blab_core::beltrami::{koebe_report, solve_principal, tail_report, SolverConfig};
use blab_core::compactness::{run_experiment, DirichletSetup, ExperimentConfig, SamplingMode};
use blab_core::dirichlet::{solve_dirichlet_with, BoundaryData, DiskSolverOptions};
use blab_core::field::{ComplexField, DilatationField, GridSpec, RealField};
use blab_core::io::{parse_boundary_csv, read_cfld, write_cfld, write_table};
use blab_core::report::SCHEMA;
use blab_core::{Error, C64};

#[derive(Parser, Debug)]
#[command(name = "blab", version, about = "Beltrami solver, Dirichlet pipeline and compactness experiments")]
struct Cli {
    /// Grid nodes per side (checked against input fields, used for generated grids).
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Grid half-width.
    #[arg(long = "L", global = true)]
    l: Option<f64>,
    /// Neumann increment tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Exit with status 4 when a verdict fails.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Principal solution of the Beltrami equation.
    Solve {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, default_value = "solve")]
        out: String,
    },
    /// Dirichlet problem `Re f = phi` on the unit circle.
    Dirichlet {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long, value_parser = parse_complex, default_value = "0,0")]
        z0: C64,
        #[arg(long, default_value = "dirichlet")]
        out: String,
        /// Boundary residual above which the verdict fails.
        #[arg(long, default_value_t = 1e-3)]
        max_residual: f64,
    },
    /// Admissibility diagnostics.
    Check {
        #[command(subcommand)]
        kind: CheckKind,
    },
    /// Compactness experiments.
    Compactness {
        #[command(subcommand)]
        action: CompactnessAction,
    },
}

#[derive(Args, Debug)]
struct QSource {
    /// Q as the real part of a CFLD-1 file.
    #[arg(long = "Q", conflicts_with = "constraint")]
    q: Option<PathBuf>,
    /// Constraint center and radius files; Q = (1 + q_M)/(1 - q_M).
    #[arg(long, num_args = 2, value_names = ["CENTER", "RADIUS"])]
    constraint: Option<Vec<PathBuf>>,
    #[arg(long, value_parser = parse_complex, default_value = "0,0")]
    z0: C64,
}

#[derive(Subcommand, Debug)]
enum CheckKind {
    /// Mean oscillation of Q on shrinking disks around z0
    Fmo {
        #[command(flatten)]
        source: QSource,
        /// Comma-separated decreasing radii (default: 12 radii from L/8 to 4h).
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, default_value = "fmo")]
        out: String,
    },
    /// Divergence of the integral of dt / (t q(t)) for circle means of Q
    Divergence {
        #[command(flatten)]
        source: QSource,
        #[arg(long)]
        delta0: f64,
        #[arg(long)]
        t_min: Option<f64>,
        #[arg(long, default_value = "divergence")]
        out: String,
    },
    /// Fraction of nodes where mu leaves the constraint disk
    Membership {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, num_args = 2, value_names = ["CENTER", "RADIUS"])]
        constraint: Vec<PathBuf>,
        #[arg(long, default_value = "membership")]
        out: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    BoundaryExtremal,
    UniformInDisk,
    OscillatingPhase,
}

#[derive(Subcommand, Debug)]
enum CompactnessAction {
    Run {
        /// Experiment configuration as JSON; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated sample counts to compare, e.g. 8,32
        #[arg(long, value_delimiter = ',')]
        samples: Option<Vec<usize>>,
        /// Constraint disk radius
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long, default_value_t = 3.0)]
        frequency: f64,
        /// Solve the Dirichlet problem with this boundary data instead.
        #[arg(long)]
        phi: Option<PathBuf>,
        #[arg(long, value_parser = parse_complex)]
        z0: Option<C64>,
        #[arg(long, default_value = "compactness")]
        out: String,
    },
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn parse_complex(s: &str) -> Result<C64, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let re = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let im = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok(C64::new(re, im))
}

enum Failure {
    Lib(Error),
    Verdict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict(msg)) => {
            eprintln!("verdict failed: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.root() {
                Error::NonConvergence { .. } => 3,
                Error::Io(_) => 1,
                _ => 2,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Solve { mu, out } => solve(cli, mu, out),
        Command::Dirichlet {
            mu,
            phi,
            z0,
            out,
            max_residual,
        } => dirichlet(cli, mu, phi, *z0, out, *max_residual),
        Command::Check { kind } => check(cli, kind),
        Command::Compactness { action } => compactness(cli, action),
    }
}

fn read_mu(cli: &Cli, path: &Path) -> Result<DilatationField, Failure> {
    let field = read_cfld(path)?;
    let spec = field.spec();
    if cli.n.is_some_and(|n| n != spec.n()) || cli.l.is_some_and(|l| (l - spec.half_width()).abs() > 1e-12) {
        return Err(Error::Precondition(format!(
            "--N/--L disagree with the grid of {} (N = {}, L = {})",
            path.display(),
            spec.n(),
            spec.half_width()
        ))
        .into());
    }
    Ok(DilatationField::from_field(field)?)
}

fn write_json(cli: &Cli, name: &str, value: &impl Serialize) -> Result<PathBuf, Failure> {
    let path = cli.out_dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn verdict(cli: &Cli, ok: bool, what: &str) -> Result<(), Failure> {
    println!("verdict: {}", if ok { "pass" } else { "fail" });
    if cli.strict && !ok {
        return Err(Failure::Verdict(what.to_string()));
    }
    Ok(())
}

fn solve(cli: &Cli, mu_path: &Path, out: &str) -> Result<(), Failure> {
    let mu = read_mu(cli, mu_path)?;
    let cfg = SolverConfig::for_grid(*mu.spec())?
        .with_tolerance(cli.tol)
        .with_max_iterations(cli.max_iterations);
    let (f, report) = solve_principal(&mu, &cfg)?;
    let r_supp = mu.support_radius();
    let koebe = koebe_report(&f, r_supp).ok();
    let tail = tail_report(&f, r_supp).ok();
    write_cfld(cli.out_dir.join(format!("{out}.f.cfld")), f.field())?;
    let path = write_json(
        cli,
        &format!("{out}.report.json"),
        &json!({ "schema": SCHEMA, "kind": "solve", "report": report, "koebe": koebe, "tail": tail }),
    )?;
    println!(
        "converged in {} iterations, residual {:.3e}, koebe {}, report {}",
        report.iterations_used,
        report.final_residual,
        report.koebe_verdict,
        path.display()
    );
    let flags = report.class_flags;
    verdict(
        cli,
        report.koebe_verdict && flags.hydrodynamic && flags.homeomorphic_proxy && flags.regular_proxy,
        "solution class flags",
    )
}

fn dirichlet(cli: &Cli, mu_path: &Path, phi_path: &Path, z0: C64, out: &str, max_residual: f64) -> Result<(), Failure> {
    let mu = read_mu(cli, mu_path)?;
    let rows = parse_boundary_csv(&fs::read_to_string(phi_path)?)?;
    let phi = BoundaryData::from_pairs(&rows)?;
    let opts = DiskSolverOptions {
        residual_tol: cli.tol,
        max_iterations: cli.max_iterations,
        ..DiskSolverOptions::default()
    };
    let sol = solve_dirichlet_with(&mu, &phi, z0, &opts)?;
    write_cfld(cli.out_dir.join(format!("{out}.f.cfld")), sol.f.field())?;
    if let Some(g) = &sol.g {
        write_cfld(cli.out_dir.join(format!("{out}.g.cfld")), g.map().field())?;
    }
    let coeffs: Vec<[f64; 2]> = sol.analytic.coeffs().iter().map(|a| [a.re, a.im]).collect();
    let path = write_json(
        cli,
        &format!("{out}.report.json"),
        &json!({
            "schema": SCHEMA,
            "kind": "dirichlet",
            "z0": [z0.re, z0.im],
            "boundary_samples": phi.len(),
            "taylor_coefficients": coeffs,
            "report": sol.report,
        }),
    )?;
    println!(
        "boundary residual {:.3e}, Im f(z0) {:.3e}, report {}",
        sol.report.boundary_residual,
        sol.report.im_f_z0,
        path.display()
    );
    verdict(
        cli,
        sol.report.boundary_residual <= max_residual && sol.report.im_f_z0.abs() <= 1e-8,
        "boundary residual",
    )
}

fn load_q(source: &QSource) -> Result<QProfile, Failure> {
    match (&source.q, &source.constraint) {
        (Some(p), None) => {
            let f = read_cfld(p)?;
            let re = RealField::new(*f.spec(), f.values().iter().map(|v| v.re).collect())?;
            Ok(QProfile::new(re)?)
        }
        (None, Some(files)) => {
            let k = load_constraint(files)?;
            Ok(profile_from_q(&q_sup(&k))?)
        }
        _ => Err(Error::Precondition("give either --Q or --constraint".into()).into()),
    }
}

fn load_constraint(files: &[PathBuf]) -> Result<SetConstraint, Failure> {
    let center = read_cfld(&files[0])?;
    let radius_field: ComplexField = read_cfld(&files[1])?;
    let spec: GridSpec = *center.spec();
    let radius = RealField::new(*radius_field.spec(), radius_field.values().iter().map(|v| v.re).collect())?;
    let support = spec
        .nodes()
        .enumerate()
        .filter(|&(k, _)| center.values()[k].norm() > 0.0 || radius.values()[k] > 0.0)
        .map(|(_, z)| (z - spec.center()).norm())
        .fold(0.0, f64::max);
    Ok(SetConstraint::new(center, radius, 1e-6, support.max(spec.spacing()))?)
}

fn check(cli: &Cli, kind: &CheckKind) -> Result<(), Failure> {
    match kind {
        CheckKind::Fmo { source, eps, out } => {
            let q = load_q(source)?;
            let schedule = eps.clone().unwrap_or_else(|| default_eps_schedule(q.spec()));
            let rep = fmo_estimate(&q, source.z0, &schedule)?;
            let rows: Vec<Vec<f64>> = rep.table.iter().map(|r| vec![r.eps, r.mean, r.deviation]).collect();
            write_table(cli.out_dir.join(format!("{out}.csv")), &["eps", "mean", "deviation"], &rows)?;
            write_json(cli, &format!("{out}.json"), &json!({ "schema": SCHEMA, "kind": "fmo", "report": rep }))?;
            println!("{}", serde_json::to_value(rep.verdict).map_err(Error::from)?);
            verdict(cli, rep.verdict == FmoVerdict::Consistent, "FMO")
        }
        CheckKind::Divergence {
            source,
            delta0,
            t_min,
            out,
        } => {
            let q = load_q(source)?;
            let t_min = t_min.unwrap_or(2.0 * q.spec().spacing());
            let rep = divergence_check(&q, source.z0, *delta0, t_min)?;
            let rows: Vec<Vec<f64>> = rep.table.iter().map(|&(t, i)| vec![t, i]).collect();
            write_table(cli.out_dir.join(format!("{out}.csv")), &["tau", "integral"], &rows)?;
            write_json(cli, &format!("{out}.json"), &json!({ "schema": SCHEMA, "kind": "divergence", "report": rep }))?;
            println!("{}", serde_json::to_value(rep.verdict).map_err(Error::from)?);
            verdict(cli, rep.verdict == DivergenceVerdict::Diverges, "divergence")
        }
        CheckKind::Membership { mu, constraint, out } => {
            let mu = read_mu(cli, mu)?;
            let k = load_constraint(constraint)?;
            let rep = membership_ae(&mu, &k)?;
            write_json(cli, &format!("{out}.json"), &json!({ "schema": SCHEMA, "kind": "membership", "report": rep }))?;
            println!("violating fraction {:.3e}", rep.violating_fraction);
            verdict(cli, rep.verdict, "membership")
        }
    }
}

fn compactness(cli: &Cli, action: &CompactnessAction) -> Result<(), Failure> {
    match action {
        CompactnessAction::Run {
            config,
            samples,
            rho,
            mode,
            frequency,
            phi,
            z0,
            out,
        } => {
            let mut cfg: ExperimentConfig = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(p)?).map_err(Error::from)?,
                None => ExperimentConfig::default(),
            };
            if let Some(n) = cli.n {
                cfg.grid_n = n;
            }
            if let Some(l) = cli.l {
                cfg.half_width = l;
            }
            cfg.tol = cli.tol;
            cfg.max_iterations = cli.max_iterations;
            cfg.seed = cli.seed;
            if let Some(s) = samples {
                cfg.sample_counts = s.clone();
            }
            if let Some(r) = rho {
                cfg.constraint_radius = *r;
            }
            if let Some(m) = mode {
                cfg.mode = match m {
                    Mode::BoundaryExtremal => SamplingMode::BoundaryExtremal,
                    Mode::UniformInDisk => SamplingMode::UniformInDisk,
                    Mode::OscillatingPhase => SamplingMode::OscillatingPhase { frequency: *frequency },
                };
            }
            if let Some(p) = phi {
                let rows = parse_boundary_csv(&fs::read_to_string(p)?)?;
                cfg.dirichlet = Some(DirichletSetup {
                    phi: BoundaryData::from_pairs(&rows)?.samples().to_vec(),
                    z0: z0.unwrap_or(C64::new(0.0, 0.0)),
                });
            }
            let rep = run_experiment(&cfg)?;
            let path = write_json(cli, &format!("{out}.json"), &rep)?;
            let value = serde_json::to_value(&rep).map_err(Error::from)?;
            write_omega_tables(cli, out, &value)?;
            summarize(&value);
            println!("report {}", path.display());
            verdict(cli, rep.verdict, "compactness")
        }
        CompactnessAction::Report { input } => {
            let value: Value = serde_json::from_str(&fs::read_to_string(input)?).map_err(Error::from)?;
            if value["schema"] != SCHEMA {
                return Err(Error::Parse(format!("{} is not a {SCHEMA} document", input.display())).into());
            }
            let stem = input
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("compactness")
                .to_string();
            write_omega_tables(cli, &stem, &value)?;
            summarize(&value);
            verdict(cli, value["verdict"].as_bool().unwrap_or(false), "compactness")
        }
    }
}

fn write_omega_tables(cli: &Cli, stem: &str, report: &Value) -> Result<(), Failure> {
    let Some(entries) = report["equicontinuity"].as_array() else {
        return Err(Error::Parse("report has no equicontinuity section".into()).into());
    };
    for entry in entries {
        let count = entry[0].as_u64().unwrap_or(0);
        let e = &entry[1];
        let nums = |v: &Value| -> Vec<f64> {
            v.as_array()
                .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
                .unwrap_or_default()
        };
        let deltas = nums(&e["deltas"]);
        let family = nums(&e["family"]);
        let rows: Vec<Vec<f64>> = deltas.iter().zip(&family).map(|(&d, &w)| vec![d, w]).collect();
        write_table(cli.out_dir.join(format!("{stem}.omega-{count}.csv")), &["delta", "omega"], &rows)?;
    }
    Ok(())
}

fn summarize(report: &Value) {
    if let Some(probe) = report["probe_omega"].as_array() {
        for p in probe {
            println!("n = {}: omega = {}", p[0], p[1]);
        }
    }
    println!(
        "relative change {} (stable: {})",
        report["probe_relative_change"], report["equicontinuity_stable"]
    );
    let conv = &report["convergence"];
    println!("chain {} converged: {}", conv["chain"], conv["converged"]);
    if !report["limit"].is_null() {
        println!("limit checks: {}", report["limit"]["verdict"]);
    }
}
