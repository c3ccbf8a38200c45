use std::fs;
use std::path::{Path, PathBuf};

use magmf_core::lab::checks::{self, SuiteOutcome};
use magmf_core::lab::experiments::{plan_cells, precheck};
use magmf_core::lab::{emit_report, run_nbody_cell, run_study, ExperimentConfig, Study, Suite};
use magmf_core::{Error, HartreeSolver};

use crate::args::{Overrides, RunArgs, Which};
use crate::manifest::{Parameter, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_FLAGS: i32 = 3;

pub const OUTPUT_ROOT_VAR: &str = "MAGMF_OUTPUT_ROOT";

/// A failure with its exit code and diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_CONFIG };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("cannot write output: {e}"))
    }
}

pub type Outcome = Result<i32, Failure>;

pub struct Global {
    pub jobs: usize,
    pub no_plots: bool,
}

/// Loaded and overridden config plus the provenance of every key that was touched.
pub struct Resolved {
    pub cfg: ExperimentConfig,
    pub parameters: Vec<Parameter>,
    pub path: Option<PathBuf>,
}

fn apply_overrides(cfg: &mut ExperimentConfig, o: &Overrides) -> Vec<Parameter> {
    let mut changed = Vec::new();
    let mut set = |key: &str, value: String| {
        changed.push(Parameter {
            key: key.into(),
            value,
            source: "command line".into(),
        })
    };
    if let Some(v) = o.dt {
        cfg.solver.dt = v;
        set("solver.dt", v.to_string());
    }
    if let Some(v) = o.t_final {
        cfg.solver.t_final = v;
        set("solver.t_final", v.to_string());
    }
    if let Some(v) = o.sample_stride {
        cfg.solver.sample_stride = v;
        set("solver.sample_stride", v.to_string());
    }
    if let Some(v) = o.lambda {
        cfg.interaction.lambda = v;
        set("interaction.lambda", v.to_string());
    }
    if let Some(v) = o.alpha {
        cfg.interaction.alpha = v;
        set("interaction.alpha", v.to_string());
    }
    if let Some(v) = o.points {
        cfg.grid.points = v;
        set("grid.points", v.to_string());
    }
    if let Some(v) = o.n_particles {
        cfg.experiment.n_particles = v;
        set("experiment.n_particles", v.to_string());
    }
    if let Some(v) = o.seed {
        cfg.experiment.seed = v;
        set("experiment.seed", v.to_string());
    }
    if let Some(v) = &o.output_dir {
        cfg.output.dir = v.clone();
        set("output.dir", v.display().to_string());
    }
    changed
}

/// Every key of the resolved config as a flat `section.key` table.
fn parameter_table(cfg: &ExperimentConfig, overridden: &[Parameter]) -> Vec<Parameter> {
    let value: toml::Value = toml::from_str(&cfg.to_toml_string()).expect("config round-trips");
    let mut out = Vec::new();
    if let toml::Value::Table(sections) = value {
        for (section, body) in sections {
            if let toml::Value::Table(keys) = body {
                for (k, v) in keys {
                    let key = format!("{section}.{k}");
                    let source = if overridden.iter().any(|p| p.key == key) { "command line" } else { "config" };
                    out.push(Parameter {
                        key,
                        value: v.to_string(),
                        source: source.into(),
                    });
                }
            }
        }
    }
    out
}

pub fn resolve(run: &RunArgs) -> Result<Resolved, Failure> {
    let mut cfg = match &run.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let changed = apply_overrides(&mut cfg, &run.overrides);
    cfg.validate()?;
    let parameters = parameter_table(&cfg, &changed);
    Ok(Resolved {
        cfg,
        parameters,
        path: run.config.clone(),
    })
}

/// `output.dir`, placed under the output-root variable when it is relative.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) if cfg.output.dir.is_relative() => Path::new(&root).join(&cfg.output.dir),
        _ => cfg.output.dir.clone(),
    }
}

/// Creates the output directory, writes the opening manifest, runs `body`
/// and finalizes the manifest with whatever files `body` produced.
fn with_manifest(
    command: &str,
    r: &Resolved,
    body: impl FnOnce(&Path, &mut Vec<PathBuf>) -> Outcome,
) -> Outcome {
    let dir = output_dir(&r.cfg);
    fs::create_dir_all(&dir).map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    let mut manifest = RunManifest::new(command, r.path.as_deref(), r.cfg.to_toml_string(), r.parameters.clone());
    manifest.write(&dir)?;
    let mut files = Vec::new();
    let result = body(&dir, &mut files);
    let (code, message) = match &result {
        Ok(c) => (*c, None),
        Err(f) => (f.code, Some(f.message.clone())),
    };
    manifest.finalize(&dir, &files, code, message)?;
    result
}

pub fn hartree(run: &RunArgs, g: &Global) -> Outcome {
    let r = resolve(run)?;
    with_manifest("hartree", &r, |dir, files| {
        let cfg = &r.cfg;
        let pool = magmf_core::lab::experiments::worker_pool(g.jobs)?;
        let traj = pool.install(|| -> magmf_core::Result<_> {
            let mut solver = HartreeSolver::with_method(
                std::sync::Arc::new(cfg.operators()?),
                cfg.interaction()?,
                cfg.krylov(),
                cfg.solver.convolution,
            )?;
            if let Some(c) = cfg.solver.dt_ceiling {
                solver = solver.with_dt_ceiling(c);
            }
            solver.evolve(
                &solver.initial_state(cfg.initial_state()?),
                cfg.solver.t_final,
                cfg.solver.dt,
                cfg.solver.sample_stride,
            )
        });
        let traj = traj.map_err(|e| {
            if e.is_numerical() {
                eprintln!("numerical failure, residual dump: {e:?}");
            }
            Failure::from(e)
        })?;
        let path = dir.join(&cfg.output.trajectory_csv);
        traj.write_csv(&path)?;
        files.push(path);
        let (first, last) = (&traj.samples[0].1, &traj.samples[traj.samples.len() - 1].1);
        println!(
            "hartree: {} samples, mass drift {:e}, energy drift {:e}, {} matvecs",
            traj.samples.len(),
            (last.mass - first.mass).abs(),
            (last.energy - first.energy).abs(),
            traj.krylov.matvecs
        );
        Ok(EXIT_OK)
    })
}

pub fn nbody(run: &RunArgs, g: &Global) -> Outcome {
    let r = resolve(run)?;
    // Size check before anything is created on disk.
    let plans = plan_for_nbody(&r.cfg)?;
    precheck(&r.cfg, &plans, 1)?;
    with_manifest("nbody", &r, |dir, files| {
        let cfg = &r.cfg;
        let cell = run_nbody_cell(cfg, g.jobs)?;
        let path = dir.join(format!("nbody_N{}.csv", cell.n));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let row_err = |e: csv::Error| Failure::config(format!("{}: {e}", path.display()));
        w.write_record(["N", "alpha", "t", "trace_k1", "hs", "energy_k1", "norm_defect"])
            .map_err(row_err)?;
        for s in &cell.samples {
            w.write_record([
                cell.n.to_string(),
                format!("{:e}", cell.alpha),
                format!("{:e}", s.t),
                format!("{:e}", s.trace_k1),
                format!("{:e}", s.hs),
                format!("{:e}", s.energy_k1),
                format!("{:e}", s.norm_defect),
            ])
            .map_err(row_err)?;
        }
        w.flush()?;
        files.push(path);
        if cfg.output.checkpoint {
            let ck = dir.join(format!("nbody_N{}.ckpt", cell.n));
            let t = cell.samples.last().map_or(0.0, |s| s.t);
            cell.final_state.save(&ck, t)?;
            files.push(ck);
        }
        for s in &cell.samples {
            println!("t = {}  trace_k1 = {:e}  energy_k1 = {:e}", s.t, s.trace_k1, s.energy_k1);
        }
        Ok(EXIT_OK)
    })
}

fn plan_for_nbody(cfg: &ExperimentConfig) -> Result<Vec<magmf_core::lab::experiments::CellPlan>, Failure> {
    let mut single = cfg.clone();
    single.experiment.n_list = vec![cfg.experiment.n_particles];
    single.experiment.distances = vec![magmf_core::lab::DistanceKind::TraceK1];
    Ok(plan_cells(&single, Study::Trace)?)
}

fn study_of(w: Which) -> Study {
    match w {
        Which::Trace => Study::Trace,
        Which::Energy => Study::Energy,
        Which::Regularization => Study::Regularization,
    }
}

pub fn converge(run: &RunArgs, which: Which, dry_run: bool, g: &Global) -> Outcome {
    let r = resolve(run)?;
    let study = study_of(which);
    let plans = plan_cells(&r.cfg, study)?;
    if dry_run {
        let manifest = RunManifest::new("converge", r.path.as_deref(), r.cfg.to_toml_string(), r.parameters.clone());
        println!("study = {}", which.name());
        println!("{:>4}  {:>12}  {:>16}  {:>16}", "N", "alpha", "amplitudes", "bytes");
        for p in &plans {
            println!("{:>4}  {:>12}  {:>16}  {:>16}", p.n, p.alpha, p.amplitudes, p.bytes);
        }
        let budget = r.cfg.budget();
        match precheck(&r.cfg, &plans, g.jobs) {
            Ok(()) => println!("budget = {} bytes, fits", budget.bytes),
            Err(e) => println!("budget = {} bytes, refused: {e}", budget.bytes),
        }
        println!("manifest preview:\n{}", manifest.to_json());
        return Ok(EXIT_OK);
    }
    precheck(&r.cfg, &plans, g.jobs)?;
    with_manifest("converge", &r, |dir, files| {
        let plots = r.cfg.output.plots && !g.no_plots;
        match run_study(&r.cfg, study, g.jobs) {
            Ok(report) => {
                let out = emit_report(&report, dir, plots)?;
                files.extend(out.all());
                let summary = report.summarize();
                print!("{}", summary.to_text());
                Ok(if summary.pass() { EXIT_OK } else { EXIT_FLAGS })
            }
            Err(failure) => {
                let out = emit_report(&failure.partial, dir, plots)?;
                files.extend(out.all());
                if failure.error.is_numerical() {
                    eprintln!("numerical failure, residual dump: {:?}", failure.error);
                }
                Err(Failure::from(failure.error))
            }
        }
    })
}

fn parse_suites(only: &[String]) -> Result<Vec<Suite>, Failure> {
    if only.is_empty() {
        return Ok(Vec::new());
    }
    only.iter()
        .map(|s| {
            Suite::parse(s.trim()).ok_or_else(|| {
                let known: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Failure::config(format!("unknown suite `{s}`; known: {}", known.join(", ")))
            })
        })
        .collect()
}

pub fn check(run: &RunArgs, only: &[String], g: &Global) -> Outcome {
    let r = resolve(run)?;
    let mut suites = parse_suites(only)?;
    if suites.is_empty() {
        suites = r.cfg.check.suites.clone();
    }
    with_manifest("check", &r, |dir, files| {
        let pool = magmf_core::lab::experiments::worker_pool(g.jobs)?;
        let outcomes: Vec<SuiteOutcome> = pool.install(|| {
            suites
                .iter()
                .map(|s| checks::run_suite(&r.cfg, *s))
                .collect::<magmf_core::Result<_>>()
        })?;
        let mut text = String::new();
        for o in &outcomes {
            text += &format!(
                "{:<12} {:<4} {:>12.4e}  {}\n",
                o.suite.name(),
                if o.pass { "pass" } else { "FAIL" },
                o.metric,
                o.detail
            );
        }
        print!("{text}");
        let path = dir.join("check_summary.txt");
        fs::write(&path, &text)?;
        files.push(path);
        Ok(if outcomes.iter().all(|o| o.pass) { EXIT_OK } else { EXIT_FLAGS })
    })
}
