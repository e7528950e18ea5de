mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use config::{resolve, RunConfig, SystemConfig};
use singode::hypotheses::audit;
use singode::manifolds::{
    center_manifold_with, decompose_orbit, uniformly_stable_manifold, Boundary, DecomposeOptions, FiberRecord,
    StableOptions,
};
use singode::navier_stokes::{compute_profile, ns_hypotheses, Coefficient, ProfileOptions};
use singode::singular::{integrate_singular, Output, SingularOptions};

#[derive(Parser)]
#[command(name = "singode", version, about = "Singular ODEs dU/dt = F(U)/zeta(U)")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Built-in system: fast_blowup, linear_slaving, rotation, navier_stokes.
    #[arg(long, global = true)]
    system: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Audit H1..H5 and write hypotheses.json; exits 1 if any check fails.
    CheckHypotheses(HypArgs),
    /// Integrate dU/dt = F/ζ and write trajectory.csv.
    Integrate(IntegrateArgs),
    /// Taylor center manifold at the distinguished point.
    CenterManifold(OrderArgs),
    /// Stable fibers over the equilibrium manifold.
    StableManifold(StableArgs),
    /// Integrate and split the orbit into slow, fast and perturbation parts.
    Decompose(DecomposeArgs),
    /// Navier–Stokes viscous profile leaving a constant state.
    NsProfile(NsArgs),
}

#[derive(Args)]
struct HypArgs {
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct IntegrateArgs {
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u0: Option<Vec<f64>>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Uniform output spacing; every accepted step when omitted.
    #[arg(long)]
    output_step: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Args)]
struct StableArgs {
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    n_base: Option<usize>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    run: IntegrateArgs,
    #[arg(long)]
    n_base: Option<usize>,
}

#[derive(Args)]
struct NsArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r_gas: Option<f64>,
    /// Constant viscosity.
    #[arg(long)]
    nu: Option<f64>,
    /// Constant heat conduction.
    #[arg(long)]
    k_heat: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Left state ρ,v,e.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    left: Option<Vec<f64>>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
}

/// Failure class, mapped to the exit status.
enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.into())
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    let path = dir.join(name);
    tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = &cli.system {
        cfg.system = Some(SystemConfig::Named(s.clone()));
    }
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    match &cli.command {
        Command::CheckHypotheses(a) => {
            cfg.half_width = a.half_width.or(cfg.half_width);
            cfg.n_samples = a.samples.or(cfg.n_samples);
        }
        Command::Integrate(a) => merge_run(&mut cfg, a),
        Command::CenterManifold(a) => cfg.order = a.order.or(cfg.order),
        Command::StableManifold(a) => {
            cfg.order = a.order.or(cfg.order);
            cfg.n_base = a.n_base.or(cfg.n_base);
        }
        Command::Decompose(a) => {
            merge_run(&mut cfg, &a.run);
            cfg.n_base = a.n_base.or(cfg.n_base);
        }
        Command::NsProfile(a) => {
            let mut gas = cfg.gas();
            gas.gamma = a.gamma.unwrap_or(gas.gamma);
            gas.r_gas = a.r_gas.unwrap_or(gas.r_gas);
            if let Some(nu) = a.nu {
                gas.nu = Coefficient::Constant(nu);
            }
            if let Some(k) = a.k_heat {
                gas.k_heat = Coefficient::Constant(k);
            }
            cfg.gas = Some(gas);
            cfg.sigma = a.sigma.or(cfg.sigma);
            if let Some(l) = &a.left {
                let [r, v, e] = l[..] else {
                    bail!("--left takes three values rho,v,e");
                };
                cfg.left_state = Some([r, v, e]);
            }
            cfg.amplitude = a.amplitude.or(cfg.amplitude);
            cfg.length = a.length.or(cfg.length);
            cfg.spacing = a.spacing.or(cfg.spacing);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn merge_run(cfg: &mut RunConfig, a: &IntegrateArgs) {
    if a.u0.is_some() {
        cfg.u0 = a.u0.clone();
    }
    cfg.horizon = a.horizon.or(cfg.horizon);
    cfg.output_step = a.output_step.or(cfg.output_step);
    cfg.rtol = a.rtol.or(cfg.rtol);
    cfg.atol = a.atol.or(cfg.atol);
}

fn singular_options(cfg: &RunConfig, default_tol: (f64, f64), default_step: Option<f64>) -> SingularOptions {
    let opts = SingularOptions::with_tolerances(cfg.rtol.unwrap_or(default_tol.0), cfg.atol.unwrap_or(default_tol.1));
    match cfg.output_step.or(default_step) {
        Some(h) => opts.output(Output::Uniform(h)),
        None => opts,
    }
}

fn initial_state(cfg: &RunConfig, dim: usize) -> Result<DVector<f64>> {
    let Some(u0) = &cfg.u0 else {
        bail!("an initial state is required (--u0 or \"u0\")");
    };
    if u0.len() != dim {
        bail!("u0 has {} components, the system has {dim}", u0.len());
    }
    Ok(DVector::from_vec(u0.clone()))
}

#[derive(Serialize)]
struct StableReport<'a> {
    system: &'a str,
    fast_rate: Option<f64>,
    boundary: Option<Boundary>,
    fibers: Vec<FiberRecord>,
}

fn run(cli: &Cli) -> std::result::Result<bool, Failure> {
    let cfg = load_config(cli).map_err(Failure::Usage)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Command::CheckHypotheses(_) => {
            let opts = cfg.hypothesis_options();
            let sys = resolve(&cfg).map_err(Failure::Usage)?;
            let report = audit(&sys.spec, sys.eq.as_ref(), &opts)?;
            let path = write_atomic(&out, "hypotheses.json", &to_json(&report))?;
            for (i, c) in report.checks().iter().enumerate() {
                println!("h{}: {} (margin {:e})", i + 1, c.verdict, c.margin);
            }
            println!("wrote {}", path.display());
            Ok(report.all_pass())
        }
        Command::Integrate(_) => {
            let sys = resolve(&cfg).map_err(Failure::Usage)?;
            let u0 = initial_state(&cfg, sys.spec.dim()).map_err(Failure::Usage)?;
            let opts = singular_options(&cfg, (1e-10, 1e-12), None);
            let traj = integrate_singular(&sys.spec, &u0, cfg.horizon.unwrap_or(1.0), &opts)?;
            let path = write_atomic(&out, "trajectory.csv", traj.to_csv_string().as_bytes())?;
            println!("termination={} samples={} wrote {}", traj.termination, traj.len(), path.display());
            Ok(true)
        }
        Command::CenterManifold(_) => {
            let sys = resolve(&cfg).map_err(Failure::Usage)?;
            let opts = cfg.hypothesis_options();
            let cm = center_manifold_with(&sys.spec, cfg.order.unwrap_or(3), opts.tol_center)?;
            let path = write_atomic(&out, "center_manifold.json", &to_json(&cm.to_record()))?;
            println!("k={} validity_radius={:e} wrote {}", cm.k(), cm.validity_radius(), path.display());
            Ok(true)
        }
        Command::StableManifold(_) => {
            let sys = resolve(&cfg).map_err(Failure::Usage)?;
            let Some(eq) = &sys.eq else {
                return Err(Failure::Usage(anyhow::anyhow!("the system has no equilibrium manifold")));
            };
            let opts = stable_options(&cfg);
            let bundle = uniformly_stable_manifold(&sys.spec, eq, cfg.n_base.unwrap_or(8), &opts)?;
            let report = StableReport {
                system: &sys.name,
                fast_rate: bundle.fast_rate,
                boundary: bundle.boundary.clone(),
                fibers: bundle.records(),
            };
            let path = write_atomic(&out, "stable_manifold.json", &to_json(&report))?;
            println!("fibers={} wrote {}", report.fibers.len(), path.display());
            Ok(true)
        }
        Command::Decompose(_) => {
            let sys = resolve(&cfg).map_err(Failure::Usage)?;
            let Some(eq) = &sys.eq else {
                return Err(Failure::Usage(anyhow::anyhow!("the system has no equilibrium manifold")));
            };
            let u0 = initial_state(&cfg, sys.spec.dim()).map_err(Failure::Usage)?;
            let bundle = uniformly_stable_manifold(&sys.spec, eq, cfg.n_base.unwrap_or(8), &stable_options(&cfg))?;
            let opts = singular_options(&cfg, (1e-13, 1e-16), Some(0.01)).without_equilibrium_stop();
            let traj = integrate_singular(&sys.spec, &u0, cfg.horizon.unwrap_or(1.0), &opts)?;
            let dopts = DecomposeOptions {
                tol_mfd: cfg.tolerances.tol_mfd.unwrap_or(DecomposeOptions::default().tol_mfd),
                ..Default::default()
            };
            let dec = decompose_orbit(&sys.spec, &bundle, &traj, &dopts)?;
            let mut buf = Vec::new();
            dec.write_csv(&mut buf)?;
            write_atomic(&out, "trajectory.csv", traj.to_csv_string().as_bytes())?;
            let path = write_atomic(&out, "decomposition.csv", &buf)?;
            println!("max_pert={:e} c_estimate={:e} wrote {}", dec.max_pert, dec.c_estimate, path.display());
            Ok(true)
        }
        Command::NsProfile(_) => {
            let gas = cfg.gas();
            let sigma = cfg.sigma.unwrap_or(0.0);
            let left = cfg.left_state.unwrap_or([1.0, 0.2, 1.0]);
            let d = ProfileOptions::default();
            let popts = ProfileOptions {
                amplitude: cfg.amplitude.unwrap_or(d.amplitude),
                spacing: cfg.spacing.unwrap_or(d.spacing),
                rtol: cfg.rtol.unwrap_or(d.rtol),
                atol: cfg.atol.unwrap_or(d.atol),
                order: cfg.order.unwrap_or(d.order),
            };
            let profile = compute_profile(&gas, left, sigma, cfg.length.unwrap_or(10.0), &popts)?;
            let report = ns_hypotheses(&gas, sigma, left[0], left[2], &cfg.hypothesis_options())?;
            write_atomic(&out, "profile_hypotheses.json", &to_json(&report))?;
            let path = write_atomic(&out, "profile.csv", profile.trajectory.to_csv_string().as_bytes())?;
            println!(
                "samples={} decay_rate={:e} hypotheses={} wrote {}",
                profile.trajectory.len(),
                profile.decay_rate,
                if report.all_pass() { "pass" } else { "fail" },
                path.display()
            );
            Ok(true)
        }
    }
}

fn stable_options(cfg: &RunConfig) -> StableOptions {
    let d = StableOptions::default();
    StableOptions {
        order: cfg.order.unwrap_or(d.order),
        tol_center: cfg.tolerances.tol_center.unwrap_or(d.tol_center),
        ..d
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
