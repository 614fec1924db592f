//! Command drivers behind the `ssp` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{Command, GuidanceSpec, RunConfig};
use crate::ddim::{invert, sample, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::guidance::GuidanceConfig;
use crate::io::{
    read_grid, write_comparison_csv, write_manifest, write_metrics_csv, write_pgm_channels,
    write_raw, write_sweep_csv, write_trajectory_csv,
};
use crate::pipeline::{
    ablate_startpoints, filter_sweep, style_transfer, TransferConfig, TransferResult,
};
use crate::rng::{SeededRng, Stream};
use crate::schedule::NoiseSchedule;
use crate::score::{ConditionEmbedding, ConditionalMixture, ScoreModel};
use crate::selftest::{run_selftest, Check};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_SELFTEST: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::MissingInput(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Files written by the command.
    Written(Vec<PathBuf>),
    Selftest(Vec<Check>),
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Selftest(checks) if checks.iter().any(|c| !c.passed) => EXIT_SELFTEST,
            _ => EXIT_OK,
        }
    }
}

pub fn load_model(path: &Path) -> Result<ConditionalMixture> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    ConditionalMixture::from_json(&text).map_err(|e| match e {
        Error::Config {
            message,
            line,
            column,
        } => Error::Config {
            message: format!("{}: {message}", path.display()),
            line,
            column,
        },
        other => other,
    })
}

fn label_embedding(model: &ConditionalMixture, name: &str) -> Result<ConditionEmbedding> {
    model
        .label(name)
        .map(|l| l.embedding.clone())
        .ok_or_else(|| Error::Config {
            message: format!("model has no label {name:?}"),
            line: 0,
            column: 0,
        })
}

fn optional_embedding(
    model: &ConditionalMixture,
    name: &Option<String>,
) -> Result<ConditionEmbedding> {
    match name {
        Some(n) => label_embedding(model, n),
        None => Ok(model.null_condition()),
    }
}

fn guidance_of(model: &ConditionalMixture, spec: &GuidanceSpec) -> Result<GuidanceConfig> {
    let g = GuidanceConfig {
        mode: spec.mode,
        omega: spec.omega,
        omega_i: spec.omega_i,
        omega_plus: spec.omega_plus,
        omega_minus: spec.omega_minus,
        positive: optional_embedding(model, &spec.positive_label)?,
        negative: optional_embedding(model, &spec.negative_label)?,
    };
    g.validate()?;
    Ok(g)
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Config {
        message: format!("output_dir {} is not writable: {e}", dir.display()),
        line: 0,
        column: 0,
    })
}

fn write_grid_pair(dir: &Path, name: &str, g: &Grid, written: &mut Vec<PathBuf>) -> Result<()> {
    let raw = dir.join(format!("{name}.sspg"));
    write_raw(&raw, g)?;
    written.push(raw);
    written.extend(write_pgm_channels(dir.join(name), g)?);
    Ok(())
}

fn write_trajectory(
    dir: &Path,
    name: &str,
    t: &TrajectoryRecord,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let p = dir.join(format!("{name}.csv"));
    write_trajectory_csv(&p, t)?;
    written.push(p);
    Ok(())
}

fn finish_manifest(
    dir: &Path,
    cfg: &RunConfig,
    run: serde_json::Value,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let p = dir.join("manifest.json");
    write_manifest(
        &p,
        &json!({ "command": cfg.command.name(), "config": cfg, "run": run }),
    )?;
    written.push(p);
    Ok(())
}

fn write_transfer(dir: &Path, cfg: &RunConfig, r: &TransferResult) -> Result<Vec<PathBuf>> {
    prepare_output(dir)?;
    let mut written = Vec::new();
    write_grid_pair(dir, "output", &r.output, &mut written)?;
    write_grid_pair(dir, "startpoint", &r.startpoint, &mut written)?;
    write_trajectory(
        dir,
        "inversion_trajectory",
        &r.inversion_trajectory,
        &mut written,
    )?;
    write_trajectory(
        dir,
        "sampling_trajectory",
        &r.sampling_trajectory,
        &mut written,
    )?;
    let m = dir.join("metrics.csv");
    write_metrics_csv(&m, &r.metrics)?;
    written.push(m);
    finish_manifest(dir, cfg, r.manifest.clone(), &mut written)?;
    Ok(written)
}

fn transfer_config(model: &ConditionalMixture, cfg: &RunConfig) -> Result<TransferConfig> {
    let content = read_grid(cfg.content_path()?)?;
    let style = read_grid(cfg.style_path()?)?;
    let positive = match &cfg.positive_label {
        Some(name) => label_embedding(model, name)?,
        None => model.labels()[0].embedding.clone(),
    };
    let mut t = TransferConfig::new(content, style, positive);
    t.omega_i = cfg.omega_i;
    t.cfg_omega = cfg.cfg_omega;
    t.startpoint = cfg.startpoint.clone();
    t.steps = cfg.steps;
    t.seed = cfg.seed;
    Ok(t)
}

/// Runs one command and writes its outputs under `cfg.output_dir`.
pub fn run_command(cfg: &RunConfig) -> Result<Outcome> {
    if cfg.command == Command::Selftest {
        return Ok(Outcome::Selftest(run_selftest()));
    }
    cfg.check_inputs()?;
    let model = load_model(&cfg.model_path()?)?;
    let schedule = NoiseSchedule::new(cfg.schedule, cfg.steps)?;
    let dir = cfg.output_dir.as_path();
    prepare_output(dir)?;
    let written = match cfg.command {
        Command::Selftest => unreachable!(),
        Command::Invert => {
            let x0 = read_grid(cfg.input_path()?)?;
            let t = invert(&model, &schedule, &x0, &guidance_of(&model, &cfg.guidance)?)?;
            let mut written = Vec::new();
            write_grid_pair(dir, "latent", t.last(), &mut written)?;
            write_trajectory(dir, "trajectory", &t, &mut written)?;
            finish_manifest(
                dir,
                cfg,
                json!({ "steps": schedule.num_steps() }),
                &mut written,
            )?;
            written
        }
        Command::Sample => {
            let zt = match &cfg.input {
                Some(p) => read_grid(p)?,
                None => SeededRng::new(cfg.seed, Stream::Variant).normal_grid(model.shape(), 1.0),
            };
            let t = sample(&model, &schedule, &zt, &guidance_of(&model, &cfg.guidance)?)?;
            let mut written = Vec::new();
            write_grid_pair(dir, "output", t.last(), &mut written)?;
            write_trajectory(dir, "trajectory", &t, &mut written)?;
            finish_manifest(
                dir,
                cfg,
                json!({ "steps": schedule.num_steps() }),
                &mut written,
            )?;
            written
        }
        Command::Transfer => {
            let r = style_transfer(&model, &schedule, &transfer_config(&model, cfg)?)?;
            write_transfer(dir, cfg, &r)?
        }
        Command::Ablate => {
            let results = ablate_startpoints(
                &model,
                &schedule,
                &transfer_config(&model, cfg)?,
                &cfg.kinds,
            )?;
            let mut written = Vec::new();
            let mut rows = Vec::new();
            for (kind, r) in cfg.kinds.iter().zip(&results) {
                written.extend(write_transfer(&dir.join(kind.name()), cfg, r)?);
                rows.push((kind.name().to_string(), r.metrics.clone()));
            }
            let p = dir.join("comparison.csv");
            write_comparison_csv(&p, &rows)?;
            written.push(p);
            finish_manifest(dir, cfg, json!({ "kinds": cfg.kinds }), &mut written)?;
            written
        }
        Command::Sweep => {
            let rows = filter_sweep(
                &model,
                &schedule,
                &transfer_config(&model, cfg)?,
                &cfg.sigmas,
                &cfg.alphas,
            )?;
            let p = dir.join("sweep.csv");
            write_sweep_csv(&p, &rows)?;
            let mut written = vec![p];
            finish_manifest(dir, cfg, json!({ "rows": rows.len() }), &mut written)?;
            written
        }
    };
    Ok(Outcome::Written(written))
}
