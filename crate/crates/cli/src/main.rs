mod config;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lensflow_core::energy::{self, ETA_MAX};
use lensflow_core::flow::{self, FlowTrajectory, Scheme};
use lensflow_core::geometry::build_initial_lens;
use lensflow_core::{blowup, classify, shooting};
use serde::Serialize;

use config::{InitKind, RunConfig};
use output::{write_atomic, write_json};
use svg::{emit_svg, SvgStyle};

/// Curve shortening flow of lens-shaped networks and their self-similar shrinkers.
#[derive(Parser, Debug)]
#[command(name = "lensflow", version)]
struct Cli {
    /// TOML file with [init], [flow], [blowup], [selfsim], [energy], [fish] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve a lens until extinction or a stop rule.
    Evolve {
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Output directory for diagnostics.csv, snapshots.json, lens.svg, summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Shoot for the symmetric self-similar lens.
    Selfsim {
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
        /// Directory for profile.json and selfsim.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the turning-angle integrals and run their inequality checks.
    Energy {
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        /// Run every inequality check; exit 1 on failure.
        #[arg(long)]
        certify: bool,
        /// Write the summary report to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Construct the fish-shaped shrinker.
    Fish {
        #[arg(long)]
        tol: Option<f64>,
        /// Directory for fish.json and fish.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the lens uniqueness certificate; exit 1 if any check fails.
    Certify {
        /// Write the JSON report to this file.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Rescale an evolved lens about its extinction point.
    Blowup {
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<f64>,
        /// Directory for blowup.csv, blowup.json and rescaled.svg.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct InitArgs {
    #[arg(long, value_enum)]
    init: Option<InitKind>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    center: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SchemeArg {
    Explicit,
    SemiImplicit,
}

#[derive(Args, Debug)]
struct FlowArgs {
    /// Grid intervals.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    area_floor: Option<f64>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
}

/// Bad flags, config values or environment; exits with status 2.
#[derive(Debug)]
struct UsageError(anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(e: anyhow::Error) -> anyhow::Error {
    anyhow::Error::new(UsageError(e))
}

fn apply_overrides(cfg: &mut RunConfig, init: &InitArgs, flow: &FlowArgs) {
    let i = &mut cfg.init;
    if let Some(k) = init.init {
        i.kind = k;
    }
    i.width = init.width.unwrap_or(i.width);
    i.center = init.center.unwrap_or(i.center);
    i.scale = init.scale.unwrap_or(i.scale);
    i.amplitude = init.amplitude.unwrap_or(i.amplitude);
    let f = &mut cfg.flow;
    f.n = flow.n.unwrap_or(f.n);
    f.cfl = flow.cfl.unwrap_or(f.cfl);
    if let Some(s) = flow.scheme {
        f.scheme = match s {
            SchemeArg::Explicit => Scheme::Explicit,
            SchemeArg::SemiImplicit => Scheme::SemiImplicit,
        };
    }
    if flow.t_end.is_some() {
        f.t_end = flow.t_end;
    }
    f.area_floor = flow.area_floor.unwrap_or(f.area_floor);
    f.snapshot_stride = flow.snapshot_stride.unwrap_or(f.snapshot_stride);
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("LENSFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(anyhow::anyhow!("LENSFLOW_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn run_flow(cfg: &RunConfig) -> Result<FlowTrajectory> {
    let initial = build_initial_lens(&cfg.init.to_initial(), cfg.flow.n).map_err(|e| usage(e.into()))?;
    Ok(flow::evolve(&initial, &cfg.flow)?)
}

#[derive(Serialize)]
struct RunSummary {
    steps: usize,
    stop: flow::StopReason,
    snapshots: usize,
    final_time: f64,
    extinction_estimate: Option<flow::ExtinctionEstimate>,
}

fn evolve(cfg: &RunConfig, out: &Path) -> Result<ExitCode> {
    let traj = run_flow(cfg)?;
    write_atomic(&out.join("diagnostics.csv"), &output::diagnostics_csv(&traj.diagnostics)?)?;
    write_json(&out.join("snapshots.json"), &traj.snapshots)?;
    let svg = emit_svg(&traj.snapshots[0].to_network(), &SvgStyle::default())?;
    write_atomic(&out.join("lens.svg"), svg.as_bytes())?;
    let summary = RunSummary {
        steps: traj.steps,
        stop: traj.stop,
        snapshots: traj.snapshots.len(),
        final_time: traj.snapshots.last().map_or(0.0, |s| s.time),
        extinction_estimate: traj.extinction_estimate,
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!("steps={}", summary.steps);
    println!("stop={:?}", summary.stop);
    println!("final_time={}", summary.final_time);
    if let Some(e) = summary.extinction_estimate {
        println!("T_hat={}", e.t_hat);
        println!("x0_hat={}", e.x0_hat[0]);
    }
    Ok(ExitCode::SUCCESS)
}

fn selfsim(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let lens = shooting::find_symmetric_lens_with(cfg.selfsim.tol, cfg.selfsim.dx)?;
    let eta = energy::eta_from_h(lens.height)?.above_eta0;
    println!("H={}", lens.height);
    println!("b={}", lens.contact_x);
    println!("E={}", lens.profile.energy);
    match eta {
        Some(e) => println!("eta={e}"),
        None => println!("eta=none"),
    }
    if let Some(dir) = out {
        write_json(&dir.join("profile.json"), &lens)?;
        let n = 512;
        let p = lensflow_core::geometry::GridProfile::from_fn(-lens.contact_x, lens.contact_x, n, -0.5, |x| {
            lens.profile.value_at(x.abs())
        })?;
        write_atomic(&dir.join("selfsim.svg"), emit_svg(&p.to_network(), &SvgStyle::default())?.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn energy_cmd(
    cfg: &RunConfig,
    eta: Option<f64>,
    rho: Option<f64>,
    certify: bool,
    json: Option<&Path>,
) -> Result<ExitCode> {
    let tol = cfg.energy.as_ref().map_or(energy::DEFAULT_TOL, |t| t.tol);
    let mut quiet = true;
    if let Some(eta) = eta {
        quiet = false;
        println!("eta={eta}");
        println!("C={}", energy::coefficient_c(eta).map_err(|e| usage(e.into()))?);
        println!("Psi={}", energy::psi(eta, tol)?);
        println!("dPsi={}", energy::dpsi(eta, tol)?);
        if eta >= energy::eta0_value() && eta <= ETA_MAX {
            println!("eta_bar={}", energy::eta_bar(eta)?);
            println!("Sigma={}", energy::sigma(eta, tol)?);
        }
    }
    if let Some(rho) = rho {
        quiet = false;
        println!("rho={rho}");
        println!("Theta={}", energy::theta(rho, tol).map_err(|e| usage(e.into()))?);
    }
    let mut failed = false;
    if certify {
        quiet = false;
        for c in energy::certify_energy_inequalities(tol)? {
            println!(
                "{} {}: {} on [{}, {}] ({} points), margin {:.3e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.claim,
                c.range.0,
                c.range.1,
                c.points,
                c.margin
            );
            failed |= !c.passed;
        }
    }
    if json.is_some() || quiet {
        let report = energy::energy_report(tol)?;
        if let Some(path) = json {
            write_json(path, &report)?;
        }
        if quiet {
            println!("eta0_bracket=[{}, {}]", report.eta0_bracket.0, report.eta0_bracket.1);
            println!("psi_eta0={}", report.psi_eta0);
            println!("eta_star={}", report.eta_star);
            println!("sigma_max={}", report.sigma_max);
            println!("theta_near_one={}", report.theta_limits.theta_near_one);
            println!("theta_1e3={}", report.theta_limits.theta_1e3);
        }
    }
    Ok(if failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn fish(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let tol = cfg.fish.as_ref().map_or(1e-9, |t| t.tol);
    let f = classify::find_fish(tol)?;
    println!("r_min={}", f.r_min);
    println!("K={}", f.k);
    println!("ray_angle={}", f.ray_angle);
    println!("closure_residual={:e}", f.closure_residual);
    println!("junction_angle_error={:e}", f.junction_angle_error);
    if let Some(dir) = out {
        write_json(&dir.join("fish.json"), &f)?;
        write_atomic(&dir.join("fish.svg"), emit_svg(&f.geometry, &SvgStyle::default())?.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct FullCertificate {
    lens_uniqueness: classify::CertificationReport,
    asymmetric_fish: classify::Check,
    passed: bool,
}

fn certify(json: Option<&Path>) -> Result<ExitCode> {
    let (lens, asym) = rayon::join(classify::certify_lens_uniqueness, classify::certify_asymmetric_fish_nonexistence);
    let report = FullCertificate {
        passed: lens.passed && asym.passed,
        lens_uniqueness: lens,
        asymmetric_fish: asym,
    };
    for c in report.lens_uniqueness.checks.iter().chain([&report.asymmetric_fish]) {
        println!(
            "{} {}: {} [{}] margin {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.claim,
            c.range,
            c.margin
        );
        for (name, m) in &c.sub_margins {
            println!("     {name}: {m:.3e}");
        }
        if !c.detail.is_empty() {
            println!("     {}", c.detail);
        }
    }
    println!("{}", if report.passed { "all checks passed" } else { "certificate FAILED" });
    if let Some(path) = json {
        write_json(path, &report)?;
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn blowup_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let traj = run_flow(cfg)?;
    let est = traj
        .extinction_estimate
        .ok_or_else(|| anyhow::anyhow!("run stopped ({:?}) before extinction could be estimated", traj.stop))?;
    let seq = blowup::rescale(&traj, &est, &cfg.blowup.lambdas, cfg.blowup.tau)?;
    let report = blowup::convergence_report(&seq, &traj)?;
    println!("T_hat={}", est.t_hat);
    println!("x0_hat={}", est.x0_hat[0]);
    for (i, r) in report.rows.iter().enumerate() {
        println!("{i} lambda={} hausdorff={:.6e} density_gap_rms={:.6e}", r.lambda, r.hausdorff, r.density_gap_rms);
    }
    println!("hausdorff_decreasing={}", report.hausdorff_decreasing);
    println!("density_max_increase={:e}", report.density_max_increase);
    if let Some(dir) = out {
        write_atomic(&dir.join("blowup.csv"), &output::blowup_csv(&report.rows)?)?;
        write_json(&dir.join("blowup.json"), &report)?;
        let last = seq.frames.last().expect("at least one frame");
        write_atomic(&dir.join("rescaled.svg"), emit_svg(&last.network, &SvgStyle::default())?.as_bytes())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    let mut cfg = RunConfig::load(cli.config.as_deref()).map_err(usage)?;
    match &cli.command {
        Command::Evolve { init, flow, .. } | Command::Blowup { init, flow, .. } => apply_overrides(&mut cfg, init, flow),
        Command::Selfsim { tol, dx, .. } => {
            cfg.selfsim.tol = tol.unwrap_or(cfg.selfsim.tol);
            cfg.selfsim.dx = dx.unwrap_or(cfg.selfsim.dx);
        }
        Command::Energy { tol: Some(t), .. } => cfg.energy = Some(config::TolConfig { tol: *t }),
        Command::Fish { tol: Some(t), .. } => cfg.fish = Some(config::TolConfig { tol: *t }),
        _ => {}
    }
    if let Command::Blowup { lambdas, tau, .. } = &cli.command {
        if let Some(l) = lambdas {
            cfg.blowup.lambdas = l.clone();
        }
        cfg.blowup.tau = tau.unwrap_or(cfg.blowup.tau);
    }
    cfg.validate().map_err(usage)?;

    match &cli.command {
        Command::Evolve { out, .. } => evolve(&cfg, out),
        Command::Selfsim { out, .. } => selfsim(&cfg, out.as_deref()),
        Command::Energy {
            eta, rho, certify, json, ..
        } => energy_cmd(&cfg, *eta, *rho, *certify, json.as_deref()),
        Command::Fish { out, .. } => fish(&cfg, out.as_deref()),
        Command::Certify { json } => certify(json.as_deref()),
        Command::Blowup { out, .. } => blowup_cmd(&cfg, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
