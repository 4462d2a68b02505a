//! `bures-flow track`: batch filter-vs-observation experiments with CSV/JSON
//! artifacts for offline analysis.
//!
//! For every (mode, seed) run this writes the estimate scene JSON, the 2D
//! flow CSV, and (for filtered runs) the gate status CSV; one metrics CSV
//! collects all runs. Rows and files are ordered canonically by
//! (scenario, mode, seed), so repeated invocations are byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use bures_core::filter::FilterConfig;
use bures_core::gaussian::DecomposedGaussian;
use bures_core::sim::{
    self, default_camera, presets, project_flow, Mode, Scene, SceneFile, SceneMeta,
    ScenarioConfig,
};

/// Schema tag of the run-config file.
pub const CONFIG_SCHEMA: &str = "bures-flow/scenario-v1";

#[derive(Args)]
pub struct TrackArgs {
    /// Built-in scenario preset (default, zero-noise, constant-velocity, circular).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Scenario config JSON file (schema bures-flow/scenario-v1).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Which pipelines to run.
    #[arg(long, value_parser = ["obs", "filtered", "both"], default_value = "both")]
    mode: String,
    /// Seed count N (runs seeds 0..N-1) or an explicit comma list.
    #[arg(long)]
    seeds: Option<String>,
}

/// Run-config file: a scenario plus optional filter overrides.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub schema: String,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
}

struct RunSpec {
    scenario_name: String,
    cfg: ScenarioConfig,
    filter: FilterConfig,
    mode: Mode,
    seed: u64,
}

pub fn run(args: &TrackArgs) -> Result<()> {
    let (scenario_name, base_cfg, filter_cfg) = load_scenario(args)?;
    filter_cfg.validate().map_err(|e| anyhow!("{e}"))?;

    let seeds = parse_seeds(args.seeds.as_deref(), base_cfg.seed)?;
    let modes: Vec<Mode> = match args.mode.as_str() {
        "obs" => vec![Mode::ObsOnly],
        "filtered" => vec![Mode::Filtered],
        _ => vec![Mode::ObsOnly, Mode::Filtered],
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;

    // Canonical run order: mode then seed (scenario is fixed per invocation).
    let mut specs = Vec::new();
    for mode in &modes {
        for &seed in &seeds {
            let mut cfg = base_cfg;
            cfg.seed = seed;
            specs.push(RunSpec {
                scenario_name: scenario_name.clone(),
                cfg,
                filter: filter_cfg,
                mode: *mode,
                seed,
            });
        }
    }

    let results: Vec<Result<sim::ExperimentResult>> = specs
        .par_iter()
        .map(|spec| {
            sim::run_experiment(&spec.cfg, &spec.filter, spec.mode).map_err(|e| anyhow!("{e}"))
        })
        .collect();

    let mut metrics_csv =
        String::from("scenario,mode,seed,mean_rmse,w2_rmse,temporal_roughness,aepe_2d\n");
    for (spec, result) in specs.iter().zip(results) {
        let result = result.with_context(|| {
            format!("run failed: mode {} seed {}", spec.mode.as_str(), spec.seed)
        })?;
        let m = &result.metrics;
        writeln!(
            metrics_csv,
            "{},{},{},{},{},{},{}",
            spec.scenario_name,
            spec.mode.as_str(),
            spec.seed,
            m.mean_rmse,
            m.w2_rmse,
            m.temporal_roughness,
            m.aepe_2d
        )
        .expect("string write");

        write_run_artifacts(&args.out, spec, &result)?;
        print_summary_line(spec, m);
    }

    write_file(&args.out.join("metrics.csv"), &metrics_csv)?;
    Ok(())
}

fn print_summary_line(spec: &RunSpec, m: &sim::MetricsReport) {
    println!(
        "{:<18} {:<9} seed {:<4} mean_rmse {:>12.6e}  w2_rmse {:>12.6e}  roughness {:>12.6e}  aepe {:>12.6e}",
        spec.scenario_name,
        spec.mode.as_str(),
        spec.seed,
        m.mean_rmse,
        m.w2_rmse,
        m.temporal_roughness,
        m.aepe_2d
    );
}

fn write_run_artifacts(out: &Path, spec: &RunSpec, result: &sim::ExperimentResult) -> Result<()> {
    let tag = format!("{}_{}", spec.mode.as_str(), spec.seed);

    // Estimates as a scene file.
    let frames: Vec<Vec<DecomposedGaussian>> = result
        .estimates
        .iter()
        .map(|f| f.iter().map(DecomposedGaussian::from_gaussian).collect())
        .collect();
    let scene_file = SceneFile::new(
        Scene { frames },
        SceneMeta {
            description: Some(format!(
                "estimates: scenario {} mode {} seed {}",
                spec.scenario_name,
                spec.mode.as_str(),
                spec.seed
            )),
            seed: Some(spec.seed),
        },
    );
    write_file(
        &out.join(format!("estimates_{tag}.json")),
        &serde_json::to_string(&scene_file).expect("serializable"),
    )?;

    // 2D flow of the estimates.
    let flow = project_flow(&default_camera(), &result.estimates);
    let mut flow_csv = String::from("frame,index,u,v,valid\n");
    for (t, row) in flow.iter().enumerate() {
        for (i, f) in row.iter().enumerate() {
            writeln!(flow_csv, "{},{},{},{},{}", t + 1, i, f.u, f.v, f.valid)
                .expect("string write");
        }
    }
    write_file(&out.join(format!("flow_{tag}.csv")), &flow_csv)?;

    // Gate status log for filtered runs.
    if spec.mode == Mode::Filtered {
        let mut status_csv = String::from("frame,index,status,gate_distance,sigma_scale\n");
        for r in &result.status_log {
            let gate = r.gate_distance.map_or(String::new(), |d| d.to_string());
            writeln!(
                status_csv,
                "{},{},{},{},{}",
                r.frame,
                r.index,
                r.branch.as_str(),
                gate,
                r.sigma_scale
            )
            .expect("string write");
        }
        write_file(&out.join(format!("status_{tag}.csv")), &status_csv)?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn load_scenario(args: &TrackArgs) -> Result<(String, ScenarioConfig, FilterConfig)> {
    match (&args.preset, &args.config) {
        (Some(name), None) => {
            let cfg = presets::by_name(name, 0).ok_or_else(|| {
                anyhow!(
                    "unknown preset `{name}` (available: {})",
                    presets::NAMES.join(", ")
                )
            })?;
            Ok((name.clone(), cfg, FilterConfig::default()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config file {}", path.display()))?;
            let rc: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("malformed config file {}", path.display()))?;
            if rc.schema != CONFIG_SCHEMA {
                bail!(
                    "config field `schema`: expected {CONFIG_SCHEMA}, found {}",
                    rc.schema
                );
            }
            rc.scenario.validate().map_err(|e| anyhow!("{e}"))?;
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".to_string());
            Ok((name, rc.scenario, rc.filter.unwrap_or_default()))
        }
        (None, None) => bail!("one of --preset or --config is required"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn parse_seeds(arg: Option<&str>, config_seed: u64) -> Result<Vec<u64>> {
    let Some(text) = arg else {
        return Ok(vec![config_seed]);
    };
    let mut seeds = if text.contains(',') {
        text.split(',')
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| anyhow!("invalid seed `{s}` in --seeds"))
            })
            .collect::<Result<Vec<u64>>>()?
    } else {
        let n: u64 = text
            .trim()
            .parse()
            .map_err(|_| anyhow!("--seeds must be a count or a comma list, got `{text}`"))?;
        if n == 0 {
            bail!("--seeds count must be positive");
        }
        (0..n).collect()
    };
    seeds.sort_unstable();
    seeds.dedup();
    Ok(seeds)
}
