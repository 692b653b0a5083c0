//! Command implementations. Each command fills a [`RunManifest`]; the
//! manifest is written last, also when the command fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use boussinesq_core::forms::SparseOperatorSet;
use boussinesq_core::harness::{
    self, convergence_study, energy_report, manufactured_solution_error, manufactured_temporal_error, Knob, Verdict,
};
use boussinesq_core::integrator::{self, run_constants};
use boussinesq_core::laws::{eval_clarke, estimate_constants, PiecewiseLaw};
use boussinesq_core::spaces::trace_norms;
use log::{info, warn};
use serde::Serialize;

use crate::cli::{Cli, Command};
use crate::config::{parse_config, ConfigFile, FieldFormat};
use crate::error::CliError;
use crate::export;
use crate::manifest::{EnergySummary, H0Summary, MeshDescriptor, RunManifest};

/// Temporal error ratios per halving must fall in this window.
pub const TEMPORAL_WINDOW: (f64, f64) = (1.7, 2.4);

pub struct Outcome {
    pub manifest: RunManifest,
    pub exit_code: i32,
    pub error: Option<CliError>,
}

struct Ctx<'a> {
    out_dir: &'a Path,
    manifest: RunManifest,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Records a file after it has been written.
    fn wrote(&mut self, name: &str) {
        self.manifest.outputs.push(name.into());
    }

    fn time(&mut self, phase: &str, start: Instant) {
        self.manifest.timings.insert(phase.into(), start.elapsed().as_secs_f64());
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.wrote(name);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("report serializes");
        self.write_text(name, &text)
    }
}

/// Resolves `--config` / `--scenario`, falling back to `default_preset`.
pub fn load_config(cli: &Cli, default_preset: &str) -> Result<ConfigFile, CliError> {
    match (&cli.config, &cli.scenario) {
        (Some(path), _) => parse_config(path),
        (None, Some(name)) => ConfigFile::preset(name),
        (None, None) => ConfigFile::preset(default_preset),
    }
}

/// Runs the command and writes the manifest. Never panics on bad input.
pub fn execute(cli: &Cli) -> Outcome {
    let mut ctx = Ctx {
        out_dir: &cli.out_dir,
        manifest: RunManifest::new(cli.command.name()),
    };
    ctx.manifest.seed = cli.seed;
    ctx.manifest.threads = cli.threads;
    let start = Instant::now();

    let result = std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::io(&cli.out_dir, e))
        .and_then(|_| match cli.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| CliError::config(format!("cannot start {n} threads: {e}")))
                .and_then(|pool| pool.install(|| dispatch(cli, &mut ctx))),
            None => dispatch(cli, &mut ctx),
        });

    ctx.time("total", start);
    let (exit_code, error) = match result {
        Ok(()) => {
            ctx.manifest.status = "ok".into();
            (0, None)
        }
        Err(e) => {
            ctx.manifest.status = "failed".into();
            ctx.manifest.error = Some(e.to_string());
            (e.exit_code(), Some(e))
        }
    };
    ctx.manifest.exit_code = exit_code;
    if let Err(e) = ctx.manifest.write(ctx.out_dir) {
        warn!("could not write the manifest: {e}");
    }
    Outcome {
        manifest: ctx.manifest,
        exit_code,
        error,
    }
}

fn dispatch(cli: &Cli, ctx: &mut Ctx) -> Result<(), CliError> {
    let default = match cli.command {
        Command::Manufactured { .. } => "manufactured",
        _ => "heated-cavity-slip",
    };
    let cfg = load_config(cli, default)?;
    ctx.manifest.scenario = cfg.name.clone();
    ctx.manifest.config_hash = cfg.hash();
    ctx.write_text("config.resolved.json", &cfg.resolved_json())?;
    match &cli.command {
        Command::Run => run(&cfg, ctx),
        Command::CheckLaws { trials } => check_laws(&cfg, *trials, cli.seed, ctx),
        Command::Study { knob, levels } => study(&cfg, knob, *levels, ctx),
        Command::Manufactured {
            levels,
            nx,
            steps,
            temporal,
            min_order,
        } => manufactured(&cfg, *levels, *nx, *steps, *temporal, *min_order, ctx),
        Command::MeshInfo => mesh_info(&cfg, ctx),
    }
}

fn run(cfg: &ConfigFile, ctx: &mut Ctx) -> Result<(), CliError> {
    let mut s = cfg.to_scenario()?;
    let every = cfg.output.snapshot_every;
    s.config.keep_trajectory = every > 0;

    let t = Instant::now();
    let spaces = s.mesh.spaces()?;
    let ops = SparseOperatorSet::build(&spaces, s.config.alpha, &s.config.buoyancy)?;
    ctx.manifest.mesh = Some(MeshDescriptor::of(&spaces));
    ctx.time("assembly", t);

    let t = Instant::now();
    let sim = integrator::Simulation::new(&s.config, &spaces, &ops)?;
    ctx.manifest.h0 = Some(H0Summary::of(&sim.constants));
    let out = sim.run()?;
    ctx.time("solve", t);
    ctx.manifest.warnings.extend(out.warnings.iter().cloned());

    let t = Instant::now();
    let report = energy_report(&out);
    ctx.manifest.energy = Some(EnergySummary::from(&report));
    if cfg.output.monitors {
        export::write_monitors_csv(&ctx.path("monitors.csv"), &out.monitors)?;
        ctx.wrote("monitors.csv");
    }
    let mut snapshots: Vec<(String, &integrator::FieldState)> = Vec::new();
    if every > 0 {
        for st in out.trajectory.iter().filter(|st| st.step % every == 0) {
            snapshots.push((format!("fields_{:06}", st.step), st));
        }
    }
    snapshots.push(("fields_final".into(), &out.final_state));
    for (stem, st) in snapshots {
        for fmt in &cfg.output.fields {
            match fmt {
                FieldFormat::Csv => {
                    let name = format!("{stem}.csv");
                    export::write_fields_csv(&ctx.path(&name), &spaces, st)?;
                    ctx.wrote(&name);
                }
                FieldFormat::Vtu => {
                    let name = format!("{stem}.vtu");
                    export::write_fields_vtu(&ctx.path(&name), &spaces, st)?;
                    ctx.wrote(&name);
                }
            }
        }
    }
    ctx.time("export", t);

    info!(
        "energy verdict {} (worst relative slack {:e} at step {})",
        report.verdict, report.worst_relative_slack, report.worst_step
    );
    match report.verdict {
        Verdict::Bug => Err(CliError::Threshold(format!(
            "energy inequality fails at step {} with relative slack {:e} although H0 holds",
            report.worst_step, report.worst_relative_slack
        ))),
        Verdict::H0Violated => {
            ctx.manifest
                .warnings
                .push("energy inequality fails, but H0 is violated so no bound is promised".into());
            Ok(())
        }
        Verdict::Pass => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct LawReport {
    name: String,
    growth: f64,
    relaxed_monotonicity: Option<f64>,
    downward_jump: bool,
    range: f64,
    /// Clarke interval at every kink.
    kinks: Vec<(f64, f64, f64)>,
}

fn law_report(law: &PiecewiseLaw, range: f64, grid: usize) -> Result<LawReport, CliError> {
    let c = estimate_constants(law, range, grid)?;
    Ok(LawReport {
        name: law.display_name().into(),
        growth: c.growth,
        relaxed_monotonicity: Some(c.relaxed_monotonicity).filter(|v| v.is_finite()),
        downward_jump: c.downward_jump,
        range: c.range,
        kinks: law
            .kinks()
            .into_iter()
            .map(|k| {
                let i = eval_clarke(law, k);
                (k, i.lo, i.hi)
            })
            .collect(),
    })
}

#[derive(Debug, Serialize)]
struct IdentitySummary {
    trials: usize,
    a1_antisymmetry: f64,
    a1_diagonal: f64,
    b1_diagonal: f64,
    plain_a1_diagonal: f64,
    plain_b1_diagonal: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    friction: LawReport,
    heat_flux: LawReport,
    h0: H0Summary,
    identities: IdentitySummary,
}

fn check_laws(cfg: &ConfigFile, trials: usize, seed: u64, ctx: &mut Ctx) -> Result<(), CliError> {
    let s = cfg.to_scenario()?;
    let spaces = s.mesh.spaces()?;
    ctx.manifest.mesh = Some(MeshDescriptor::of(&spaces));
    let (range, grid) = (s.config.law_range, s.config.law_grid);
    let t = Instant::now();
    let constants = run_constants(&s.config, &spaces)?;
    let h0 = H0Summary::of(&constants);
    ctx.manifest.h0 = Some(h0.clone());
    let id = harness::identity_tests(&spaces, trials, seed)?;
    ctx.time("checks", t);
    let report = CheckReport {
        friction: law_report(&s.config.friction, range, grid)?,
        heat_flux: law_report(&s.config.heat_flux, range, grid)?,
        h0,
        identities: IdentitySummary {
            trials: id.trials,
            a1_antisymmetry: id.a1_antisymmetry,
            a1_diagonal: id.a1_diagonal,
            b1_diagonal: id.b1_diagonal,
            plain_a1_diagonal: id.plain_a1_diagonal,
            plain_b1_diagonal: id.plain_b1_diagonal,
            pass: id.pass,
        },
    };
    ctx.write_json("laws.json", &report)?;
    if !constants.h0.passes() {
        ctx.manifest.warnings.push("H0 fails for this configuration".into());
    }
    if !id.pass {
        return Err(CliError::Threshold(format!(
            "skew identities exceed {:e}: antisymmetry {:e}, a1 diagonal {:e}, b1 diagonal {:e}",
            harness::IDENTITY_TOL,
            id.a1_antisymmetry,
            id.a1_diagonal,
            id.b1_diagonal
        )));
    }
    Ok(())
}

fn study(cfg: &ConfigFile, knob: &str, levels: usize, ctx: &mut Ctx) -> Result<(), CliError> {
    let knob = Knob::parse(knob).ok_or_else(|| CliError::config(format!("unknown knob `{knob}`; use dt, m or mesh")))?;
    if levels < 3 {
        return Err(CliError::config(format!("a study needs at least 3 levels, got {levels}")));
    }
    let s = cfg.to_scenario()?;
    let t = Instant::now();
    let (result, runs) = convergence_study(&s, knob, levels)?;
    ctx.time("study", t);
    ctx.manifest.h0 = runs.first().map(|r| H0Summary::of(&r.output.constants));
    for r in &runs {
        let rep = energy_report(&r.output);
        if rep.verdict != Verdict::Pass {
            ctx.manifest
                .warnings
                .push(format!("level {}: energy verdict {}", r.summary.level, rep.verdict));
        }
    }
    export::write_study_csv(&ctx.path("study.csv"), &result)?;
    ctx.wrote("study.csv");
    if !result.pass {
        return Err(CliError::Threshold(format!(
            "{} study is not Cauchy: u ratios {:?}, theta ratios {:?} (need decreasing, last <= {})",
            knob.name(),
            harness::StudyResult::ratios(&result.diff_u),
            harness::StudyResult::ratios(&result.diff_theta),
            harness::STUDY_RATIO
        )));
    }
    Ok(())
}

fn manufactured(
    cfg: &ConfigFile,
    levels: usize,
    nx: usize,
    steps: usize,
    temporal: usize,
    min_order: f64,
    ctx: &mut Ctx,
) -> Result<(), CliError> {
    if !cfg.is_manufactured() {
        return Err(CliError::config(
            "the manufactured command needs physics.source_g = {\"kind\": \"manufactured\"}".into(),
        ));
    }
    if levels < 2 || nx == 0 || steps == 0 {
        return Err(CliError::config("need at least 2 levels, nx >= 1 and steps >= 1".into()));
    }
    let s = cfg.to_scenario()?;
    let dt = s.config.t_final / steps as f64;
    let spec: Vec<(usize, f64)> = (0..levels).map(|k| (nx << k, dt)).collect();
    let t = Instant::now();
    let table = manufactured_solution_error(&s, &spec)?;
    ctx.time("spatial", t);
    export::write_manufactured_csv(&ctx.path("manufactured.csv"), &table)?;
    ctx.wrote("manufactured.csv");

    let mut failures = Vec::new();
    let worst = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let (ou, ot) = (worst(table.orders_u()), worst(table.orders_theta()));
    if ou < min_order || ot < min_order {
        failures.push(format!("spatial orders u {ou:.3}, theta {ot:.3} below {min_order}"));
    }

    if temporal > 0 {
        let finest = table.rows.last().expect("levels >= 2");
        let dts: Vec<f64> = (0..=temporal).map(|k| s.config.t_final / (8usize << k) as f64).collect();
        if dts.last().is_some_and(|&d| d <= 4.0 * dt) {
            return Err(CliError::config(format!(
                "temporal study needs steps well above {}; raise --steps",
                8usize << temporal
            )));
        }
        let t = Instant::now();
        let tt = manufactured_temporal_error(&s, finest.nx, &dts, finest)?;
        ctx.time("temporal", t);
        export::write_temporal_csv(&ctx.path("temporal.csv"), &tt)?;
        ctx.wrote("temporal.csv");
        let (lo, hi) = TEMPORAL_WINDOW;
        let out: Vec<f64> = tt
            .ratios_u()
            .into_iter()
            .chain(tt.ratios_theta())
            .filter(|r| !(lo..=hi).contains(r))
            .collect();
        if !out.is_empty() {
            failures.push(format!("temporal ratios {out:?} outside [{lo}, {hi}]"));
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Threshold(failures.join("; ")))
    }
}

#[derive(Debug, Serialize)]
struct MeshInfo {
    mesh: MeshDescriptor,
    gamma_s: Option<f64>,
    gamma: Option<f64>,
    cell_size: [f64; 2],
    warnings: Vec<String>,
}

fn mesh_info(cfg: &ConfigFile, ctx: &mut Ctx) -> Result<(), CliError> {
    let s = cfg.to_scenario()?;
    let spaces = s.mesh.spaces()?;
    let desc = MeshDescriptor::of(&spaces);
    ctx.manifest.mesh = Some(desc.clone());
    let (gs, g, warnings) = if spaces.has_contact() {
        let tn = trace_norms(&spaces)?;
        (Some(tn.gamma_s_norm), Some(tn.gamma_norm), tn.warnings)
    } else {
        (None, None, vec![])
    };
    let info = MeshInfo {
        mesh: desc,
        gamma_s: gs,
        gamma: g,
        cell_size: spaces.mesh.cell_size(),
        warnings,
    };
    println!("{}", serde_json::to_string_pretty(&info).expect("serializes"));
    ctx.write_json("mesh.json", &info)
}
