//! `ladderfire` command line: mission runs, console service, log replay and
//! one-shot analyses.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ladderfire::ballistics::{
    deviation_from_angle_error, max_range, pressure_to_exit_speed, solve_angles, Arc, JetParameters,
};
use ladderfire::frames::{EnuPoint, OccupancyGrid};
use ladderfire::funnel::FlightFunnel;
use ladderfire::gcs::mission::MissionState;
use ladderfire::gcs::protocol::validate_stream;
use ladderfire::metrics::{compute_metrics, RunMetrics};
use ladderfire::runlog::{read_log, state_dwell_times, write_log, LogError, LogRecord};
use ladderfire::runner::{run_headless, Sim};
use ladderfire::scenario::{Scenario, ScenarioError};
use ladderfire_server::{console_stream, Pacing, ReplayServer, Server};

const DEFAULT_PORT: u16 = 8765;

#[derive(Parser)]
#[command(name = "ladderfire", version, about = "Aerial fire-localization and fire-monitor mission simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mission. Headless runs use the scripted operator.
    Run(RunArgs),
    /// Run a mission driven by an attached console, paced to the wall clock.
    Serve(ServeArgs),
    /// Summarize a run log and optionally re-serve its console stream.
    Replay(ReplayArgs),
    /// Aim the jet at a target and print the solution as JSON.
    Solve(SolveArgs),
    /// Print the flight funnel of a scenario with an ASCII cross-section.
    Funnel(FunnelArgs),
    /// Landing deviation caused by actuator angle errors.
    Deviation(DeviationArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Use the scripted operator instead of waiting for a console.
    #[arg(long)]
    headless: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for run.jsonl and metrics.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Lock sim time to the wall clock so a console can watch.
    #[arg(long)]
    paced: bool,
    /// Port for console attachment when paced or not headless.
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Sim seconds per wall second when paced.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    log: PathBuf,
    /// Re-serve the logged console stream on this port until interrupted.
    #[arg(long)]
    port: Option<u16>,
    /// Sim seconds per wall second for the re-served stream.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArcArg {
    Low,
    High,
}

#[derive(Args)]
struct JetArgs {
    /// Nozzle exit speed in m/s.
    #[arg(long, conflicts_with = "pressure")]
    speed: Option<f64>,
    /// Nozzle pressure in Pa; converted to an exit speed.
    #[arg(long)]
    pressure: Option<f64>,
    /// Quadratic drag coefficient in 1/m.
    #[arg(long, default_value_t = 0.0)]
    drag: f64,
}

impl JetArgs {
    fn params(&self) -> anyhow::Result<JetParameters> {
        let base = JetParameters::default().with_drag(self.drag);
        let exit_speed = match (self.speed, self.pressure) {
            (Some(v), _) => v,
            (None, Some(p)) => pressure_to_exit_speed(p, &base)?,
            (None, None) => base.exit_speed,
        };
        if !(exit_speed > 0.0) {
            bail!("exit speed must be positive");
        }
        if !(self.drag >= 0.0) {
            bail!("drag must be non-negative");
        }
        Ok(JetParameters { exit_speed, ..base })
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Nozzle position `e,n,u` in meters.
    #[arg(long, value_parser = parse_enu, default_value = "0,0,0")]
    from: EnuPoint,
    /// Target position `e,n,u` in meters.
    #[arg(long, value_parser = parse_enu)]
    to: EnuPoint,
    #[arg(long, value_enum, default_value = "low")]
    arc: ArcArg,
    /// Move the target along its bearing to the edge of reach.
    #[arg(long)]
    at_max_range: bool,
    #[command(flatten)]
    jet: JetArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    E,
    N,
}

#[derive(Args)]
struct FunnelArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Horizontal axis of the cross-section through the funnel center.
    #[arg(long, value_enum, default_value = "e")]
    axis: Axis,
    #[arg(long, default_value_t = 80)]
    width: usize,
    #[arg(long, default_value_t = 24)]
    height: usize,
}

#[derive(Args)]
struct DeviationArgs {
    /// Target ranges in meters.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    range: Vec<f64>,
    /// Yaw errors in degrees.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    yaw_err: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pitch_err: f64,
    #[command(flatten)]
    jet: JetArgs,
}

fn parse_enu(s: &str) -> Result<EnuPoint, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [e, n, u] if parts.iter().all(|x| x.is_finite()) => Ok(EnuPoint::new(e, n, u)),
        _ => Err(format!("expected e,n,u, got {s:?}")),
    }
}

/// Failure classes with their exit codes.
enum Failure {
    Scenario(anyhow::Error),
    Fault(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        Failure::Scenario(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Solve(a) => cmd_solve(a).map_err(Failure::from),
        Command::Funnel(a) => cmd_funnel(a),
        Command::Deviation(a) => cmd_deviation(a).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Fault(reason)) => {
            eprintln!("mission fault: {reason}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn runtime() -> anyhow::Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().context("starting the async runtime")
}

fn serve_mission(sim: Sim, port: u16, pacing: Pacing) -> anyhow::Result<Sim> {
    runtime()?.block_on(async {
        let server = Server::start(&format!("0.0.0.0:{port}"), sim, pacing).await?;
        eprintln!("serving on {} (TCP lines or WebSocket)", server.addr);
        let sim = server.finish().await?;
        Ok(sim)
    })
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&a.scenario)?;
    let sim = if a.headless && !a.paced {
        run_headless(scenario, a.seed)?
    } else {
        if !(a.rate > 0.0) {
            return Err(anyhow::anyhow!("rate must be positive").into());
        }
        let sim = Sim::new(scenario, a.seed, a.headless)?;
        serve_mission(sim, a.port, Pacing::Paced(a.rate))?
    };
    finish_run(&sim, &a.out)
}

fn cmd_serve(a: ServeArgs) -> Result<(), Failure> {
    let scenario = Scenario::load(&a.scenario)?;
    let sim = Sim::new(scenario, a.seed, false)?;
    let sim = serve_mission(sim, a.port, Pacing::Paced(1.0))?;
    finish_run(&sim, &a.out)
}

/// Write the log and metrics, print the summary, map a fault to its exit code.
fn finish_run(sim: &Sim, out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let log_path = out.join("run.jsonl");
    let file = File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut w = BufWriter::new(file);
    write_log(&mut w, &sim.records).context("writing the run log")?;
    w.flush().context("writing the run log")?;
    let metrics = sim.metrics();
    let metrics_path = out.join("metrics.json");
    std::fs::write(&metrics_path, serde_json::to_string_pretty(&metrics).context("encoding metrics")? + "\n")
        .with_context(|| format!("writing {}", metrics_path.display()))?;

    let (state, reason) = sim.finished.clone().unwrap_or((metrics.final_state, String::new()));
    println!("scenario {} seed {}: {} ({reason})", sim.scenario.name, sim.seed, state.name());
    print_metrics(&metrics);
    println!("log {}", log_path.display());
    println!("metrics {}", metrics_path.display());
    if state == MissionState::Fault {
        return Err(Failure::Fault(reason));
    }
    Ok(())
}

fn print_metrics(m: &RunMetrics) {
    let opt = |x: Option<f64>, unit: &str| x.map(|v| format!("{v:.3} {unit}")).unwrap_or_else(|| "-".into());
    println!("  sim time               {:.2} s", m.sim_time_s);
    println!("  time to extinguish     {}", opt(m.time_to_extinguish_s, "s"));
    println!("  alternations           {}", m.alternation_count);
    println!("  keyframes              {}", m.keyframes);
    println!("  detection rate         {:.3}", m.detection_rate);
    println!("  central region         {:.3}", m.central_region_fraction);
    println!("  pair error (median)    {}", opt(m.pair_localization_error_m, "m"));
    println!("  cross-pair error       {}", opt(m.cross_pair_error_m, "m"));
    match m.steady_state_angle_err_deg {
        Some((pan, tilt)) => println!("  steady angle error     pan {pan:.3} deg, tilt {tilt:.3} deg"),
        None => println!("  steady angle error     -"),
    }
    println!("  target.assign          {}", m.target_assign_count);
}

fn cmd_replay(a: ReplayArgs) -> Result<(), Failure> {
    let file = File::open(&a.log).with_context(|| format!("opening {}", a.log.display()))?;
    let loaded = match read_log(BufReader::new(file)) {
        Ok(l) => l,
        Err(e @ LogError::VersionMismatch { .. }) => return Err(Failure::Scenario(e.into())),
        Err(e) => return Err(anyhow::Error::from(e).context(format!("reading {}", a.log.display())).into()),
    };
    let records = &loaded.records;
    let header = records
        .iter()
        .find_map(|r| match r {
            LogRecord::Header { scenario, seed, .. } => Some(format!("scenario {scenario} seed {seed}")),
            _ => None,
        })
        .unwrap_or_default();
    println!("{header}: {} records{}", records.len(), if loaded.truncated { " (truncated, partial summary)" } else { "" });
    println!("state dwell times:");
    for (state, d) in state_dwell_times(records) {
        println!("  {:<20} {d:>9.2} s", state.name());
    }
    let metrics = compute_metrics(records);
    println!("final state {}", metrics.final_state.name());
    print_metrics(&metrics);
    let stream = console_stream(records);
    let report = validate_stream(stream.iter().map(|(_, e)| e));
    println!("console stream: {} envelopes, {} protocol errors", report.checked, report.errors.len());
    for e in report.errors.iter().take(5) {
        println!("  {e}");
    }

    if let Some(port) = a.port {
        if !(a.rate > 0.0) {
            return Err(anyhow::anyhow!("rate must be positive").into());
        }
        runtime()?.block_on(async {
            let replay = ReplayServer::start(&format!("0.0.0.0:{port}"), records, Pacing::Paced(a.rate)).await?;
            eprintln!("replaying on {}; Ctrl-C to stop", replay.addr);
            tokio::signal::ctrl_c().await.context("waiting for Ctrl-C")?;
            replay.stop();
            anyhow::Ok(())
        })?;
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<()> {
    let params = a.jet.params()?;
    let arc = match a.arc {
        ArcArg::Low => Arc::Low,
        ArcArg::High => Arc::High,
    };
    let mut target = a.to;
    if a.at_max_range {
        let (de, dn) = (a.to.e - a.from.e, a.to.n - a.from.n);
        let d = de.hypot(dn);
        if !(d > 0.0) {
            bail!("--at-max-range needs a target with a horizontal bearing");
        }
        // a hair inside the edge so the solver's bracket is not degenerate
        let reach = max_range(a.to.u - a.from.u, &params) * (1.0 - 1e-9);
        target = EnuPoint::new(a.from.e + de / d * reach, a.from.n + dn / d * reach, a.to.u);
    }
    let sol = solve_angles(a.from, target, &params, arc).with_context(|| format!("solving for {target:?}"))?;
    println!("{}", serde_json::to_string(&sol)?);
    Ok(())
}

fn cmd_funnel(a: FunnelArgs) -> Result<(), Failure> {
    if a.width < 3 || a.height < 3 {
        return Err(anyhow::anyhow!("width and height must be at least 3").into());
    }
    let scenario = Scenario::load(&a.scenario)?;
    let grid = scenario.grid()?;
    let funnel = scenario.planned_funnel(&grid)?;
    println!("{}", serde_json::to_string(&funnel).context("encoding the funnel")?);
    print!("{}", cross_section(&grid, &funnel, a.axis, a.width, a.height));
    Ok(())
}

/// Vertical slice through the funnel center: `#` occupied, `.` inside the
/// funnel, `+` the center.
fn cross_section(grid: &OccupancyGrid, f: &FlightFunnel, axis: Axis, width: usize, height: usize) -> String {
    let c = f.center;
    let reach = f.horizon + f.safety_margin;
    let lo_u = grid.floor_u().min(f.floor_alt);
    let hi_u = f.ceiling_alt.max(grid.ceiling_u().min(f.ceiling_alt + 10.0));
    let col_x = |i: usize| -reach + 2.0 * reach * (i as f64 + 0.5) / width as f64;
    let row_u = |j: usize| hi_u - (hi_u - lo_u) * (j as f64 + 0.5) / height as f64;
    let at = |x: f64, u: f64| match axis {
        Axis::E => EnuPoint::new(c.e + x, c.n, u),
        Axis::N => EnuPoint::new(c.e, c.n + x, u),
    };
    // a character spans several grid cells; any solid cell in its span shows
    let step = grid.cell_size() / 2.0;
    let span = 2.0 * reach / width as f64;
    let solid = |x: f64, u: f64| {
        let n = (span / step).ceil().max(1.0) as usize;
        (0..n).any(|k| {
            let p = at(x - span / 2.0 + span * (k as f64 + 0.5) / n as f64, u);
            grid.is_occupied_at(&p) || u < grid.surface_height(p.e, p.n)
        })
    };
    let (ci, cj) = (
        ((reach / (2.0 * reach)) * width as f64) as usize,
        (((hi_u - c.u) / (hi_u - lo_u)) * height as f64).clamp(0.0, height as f64 - 1.0) as usize,
    );
    let axis_name = match axis {
        Axis::E => "east",
        Axis::N => "north",
    };
    let mut s = String::new();
    for j in 0..height {
        let u = row_u(j);
        s.push_str(&format!("{u:>8.1} |"));
        for i in 0..width {
            let p = at(col_x(i), u);
            s.push(if (i, j) == (ci, cj) {
                '+'
            } else if solid(col_x(i), u) {
                '#'
            } else if f.contains(&p) {
                '.'
            } else {
                ' '
            });
        }
        s.push('\n');
    }
    s.push_str(&format!("{:>8} +{}\n", "", "-".repeat(width)));
    s.push_str(&format!("{:>8}  {:<w$.1}{:>w2$.1} m {axis_name} of center\n", "", -reach, reach, w = width / 2, w2 = width - width / 2));
    s
}

fn cmd_deviation(a: DeviationArgs) -> anyhow::Result<()> {
    let params = a.jet.params()?;
    if a.range.iter().any(|r| !(*r > 0.0)) {
        bail!("ranges must be positive");
    }
    println!("{:>9} {:>13} {:>15} {:>13}", "range_m", "yaw_err_deg", "pitch_err_deg", "deviation_m");
    for &range in &a.range {
        for &yaw in &a.yaw_err {
            let d = deviation_from_angle_error(range, yaw, a.pitch_err, &params)
                .with_context(|| format!("range {range} m"))?;
            println!("{range:>9.1} {yaw:>13.3} {:>15.3} {d:>13.3}", a.pitch_err);
        }
    }
    Ok(())
}
