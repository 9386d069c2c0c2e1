mod config;
mod verify;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use config::{ConfigError, RunConfig};
use harmap::energy::{defect_report, energy, mass_bound_check};
use harmap::field::fmt17;
use harmap::flow::{dissipation_check, integrate, FlowContext};
use harmap::kerr::{kerr_eval, KerrParams, TangentMap};
use harmap::solver::{discretize, solve};
use harmap::spectral;
use harmap::Grid;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "harmap", version, about = "Axisymmetric harmonic maps into the hyperbolic plane with puncture singularities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the harmonic map and report energy and tangent parameters.
    Solve(Common),
    /// Move the punctures along the flow dz/dt = -b.
    Flow(Common),
    /// Eigenvalues of the linearized operator at tangent maps.
    Spectrum(Common),
    /// Sample the closed-form extreme Kerr map on the grid.
    KerrDump(Common),
    /// Run the property suites.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<harmap::Error> for Failure {
    fn from(e: harmap::Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(format!("{e:#}"))
    }
}

struct Run {
    cfg: RunConfig,
    out: PathBuf,
    quiet: bool,
    files: Vec<String>,
}

impl Run {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> anyhow::Result<()> {
        let p = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }

    fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let p = self.path(name);
        fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match &cli.command {
        Command::Solve(c) => ("solve", c),
        Command::Flow(c) => ("flow", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::KerrDump(c) => ("kerr-dump", c),
        Command::Verify(c) => ("verify", c),
    };
    let start = Instant::now();
    let mut out_dir = common.out.clone();
    let result = load(common).and_then(|cfg| {
        let out = common.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
        out_dir = Some(out.clone());
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let mut run = Run { cfg, out, quiet: common.quiet, files: Vec::new() };
        let status = match &cli.command {
            Command::Solve(_) => cmd_solve(&mut run),
            Command::Flow(_) => cmd_flow(&mut run),
            Command::Spectrum(_) => cmd_spectrum(&mut run),
            Command::KerrDump(_) => cmd_kerr_dump(&mut run),
            Command::Verify(_) => cmd_verify(&mut run),
        };
        write_manifest(&mut run, name, start, status.as_ref().err())?;
        status
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, kind, msg) = match f {
                Failure::Config(m) => (2u8, "config", m),
                Failure::Numerical(m) => (1u8, "numerical", m),
            };
            let report = json!({ "error": { "kind": kind, "message": msg }, "exit_code": code, "command": name });
            let text = serde_json::to_string_pretty(&report).unwrap_or_default();
            eprintln!("{text}");
            if let Some(dir) = out_dir.filter(|d| d.is_dir()) {
                let _ = fs::write(dir.join("error.json"), text + "\n");
            }
            ExitCode::from(code)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::parse(r#"{"schema_version": 1}"#)?,
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest(run: &mut Run, command: &str, start: Instant, err: Option<&Failure>) -> Result<(), Failure> {
    let status = match err {
        None => "ok".to_string(),
        Some(Failure::Config(m)) | Some(Failure::Numerical(m)) => m.clone(),
    };
    let mut files = run.files.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "command": command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "schema_version": config::SCHEMA_VERSION,
        "config_sha256": config_hash(&run.cfg),
        "seed": run.cfg.seed,
        "status": status,
        "outputs": files,
        "wall_clock_seconds": start.elapsed().as_secs_f64(),
    });
    run.write_json("manifest.json", &manifest)?;
    Ok(())
}

fn cmd_solve(run: &mut Run) -> Result<(), Failure> {
    let cfg = run.cfg.punctures()?;
    let spec = run.cfg.grid_spec();
    let disc = Arc::new(discretize(&cfg, &spec)?);
    run.say(format!("solving {} punctures on {}x{} nodes", cfg.len(), spec.n_rho, spec.n_z));
    let counts = disc.counts();
    let field = solve(disc, &run.cfg.solver)?;
    let p = run.path("field.csv");
    let file = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
    let mut w = BufWriter::new(file);
    field.write_csv(&mut w).and_then(|_| w.flush()).context("writing field.csv")?;
    let e = energy(&field)?;
    let mb = mass_bound_check(&field)?;
    let defects = defect_report(&field)?;
    let summary = json!({
        "punctures": cfg.punctures(),
        "rods": cfg.rods(),
        "node_counts": counts,
        "residual": field.max_residual(),
        "tol": run.cfg.solver.tol,
        "newton_iters": field.newton_iters,
        "b_iters": field.b_iters,
        "energy": e,
        "mass_bound": mb.f_value,
        "sqrt_J_total": mb.sqrt_j,
        "mass_bound_satisfied": mb.satisfied,
        "b": field.b,
        "defects": defects,
        "defect_diffs": defects.defect_diffs,
        "consistency": defects.consistency,
    });
    run.write_json("summary.json", &summary)?;
    run.say(format!("E/8pi = {:.6}, sqrt|J| = {:.6}, b = {:?}", mb.f_value, mb.sqrt_j, field.b));
    Ok(())
}

fn cmd_flow(run: &mut Run) -> Result<(), Failure> {
    let cfg = run.cfg.punctures()?;
    let mut ctx = FlowContext::new(run.cfg.grid_spec(), run.cfg.solver.clone());
    run.say(format!("flowing {} punctures to t = {}", cfg.len(), run.cfg.flow.t_max));
    let traj = integrate(&cfg, &mut ctx, &run.cfg.flow)?;
    run.write_text("trajectory.csv", &traj.to_csv())?;
    let mut events = String::new();
    for ev in &traj.events {
        events += &serde_json::to_string(ev).context("serializing event")?;
        events.push('\n');
    }
    run.write_text("trajectory.events.jsonl", &events)?;
    let dissipation = dissipation_check(&traj, 0.05).ok();
    let summary = json!({
        "steps": traj.states.len().saturating_sub(1),
        "dt": traj.dt,
        "t_final": traj.states.last().map(|s| s.t),
        "events": traj.events.iter().map(|e| e.kind).collect::<Vec<_>>(),
        "energy_monotone": traj.energy_monotone(0.01),
        "max_energy_increase": traj.max_energy_increase(),
        "dissipation": dissipation,
        "dissipation_misfit": dissipation.as_ref().and_then(|d| d.max_relative_misfit),
        "error": traj.error,
    });
    run.write_json("summary.json", &summary)?;
    match &traj.error {
        Some(e) => Err(Failure::Numerical(format!("flow stopped early: {e}"))),
        None => Ok(()),
    }
}

fn cmd_spectrum(run: &mut Run) -> Result<(), Failure> {
    let s = run.cfg.spectral.clone();
    let mut csv = String::from("m,b");
    for i in 1..=s.k {
        csv += &format!(",mu_{i}");
    }
    csv += ",beta_bar_sup\n";
    let mut rows = Vec::new();
    for &m in &s.modes {
        for &b in &s.b_list {
            let tm = TangentMap::new(s.a, b)?;
            let problem = spectral::assemble(&tm, s.n_theta, m)?;
            let res = spectral::eigen(&problem, s.k)?;
            // μ₁ of the axisymmetric mode is the zero mode of moving b
            let governing = if m == 0 { res.mu[1] } else { res.mu[0] };
            let beta = spectral::decay_exponents(governing.max(0.0))?.beta_bar_sup;
            let mut row = vec![m.to_string(), fmt17(b)];
            row.extend(res.mu.iter().map(|&x| fmt17(x)));
            row.push(fmt17(beta));
            csv += &row.join(",");
            csv.push('\n');
            rows.push(json!({
                "m": m,
                "b": b,
                "mu": res.mu,
                "beta_bar_sup": beta,
                "antisymmetric_remainder": problem.antisymmetric_remainder(),
            }));
            run.say(format!("m={m} b={b}: mu = {:?}", res.mu));
        }
    }
    run.write_text("spectrum.csv", &csv)?;
    run.write_json("summary.json", &json!({ "a": s.a, "n_theta": s.n_theta, "rows": rows }))?;
    Ok(())
}

fn cmd_kerr_dump(run: &mut Run) -> Result<(), Failure> {
    let cfg = run.cfg.punctures()?;
    if cfg.len() != 1 {
        return Err(Failure::Config(format!("kerr-dump needs exactly one puncture, got {}", cfg.len())));
    }
    let p = cfg.punctures()[0];
    let k = KerrParams::from_angular_momentum(p.j, p.z, cfg.offset(0))?;
    let grid = Grid::build(&run.cfg.grid_spec(), &cfg, None)?;
    let mut csv = String::from("rho,z,U,v\n");
    for idx in 0..grid.len() {
        let (r, z) = grid.coords(idx);
        if r == 0.0 && z == p.z {
            continue;
        }
        let (u, v) = kerr_eval(&k, r, z)?;
        csv += &format!("{},{},{},{}\n", fmt17(r), fmt17(z), fmt17(u), fmt17(v));
    }
    run.write_text("kerr.csv", &csv)?;
    Ok(())
}

fn cmd_verify(run: &mut Run) -> Result<(), Failure> {
    let quiet = run.quiet;
    let report = verify::run(run.cfg.seed, |name, ok| {
        if !quiet {
            println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        }
    });
    run.write_json("verify.json", &report)?;
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name).collect();
        Err(Failure::Numerical(format!("failed suites: {}", failed.join(", "))))
    }
}
