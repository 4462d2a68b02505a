//! `bures-flow distance`: W₂ between two Gaussians given inline as JSON atoms
//! or addressed inside a scene file by frame/index.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Serialize;

use bures_core::gaussian::DecomposedGaussian;
use bures_core::mat3::{norm3_sq, sub3};
use bures_core::metric::w2_cov_squared;
use bures_core::sim::SceneFile;
use bures_core::Gaussian3;

#[derive(Args)]
pub struct DistanceArgs {
    /// First Gaussian as an inline JSON atom {"mean":..,"rot":..,"scale":..}.
    #[arg(long, conflicts_with = "scene")]
    a: Option<String>,
    /// Second Gaussian as an inline JSON atom.
    #[arg(long, requires = "a", conflicts_with = "scene")]
    b: Option<String>,
    /// Scene JSON file to read Gaussians from.
    #[arg(long, requires_all = ["first", "second"])]
    scene: Option<std::path::PathBuf>,
    /// FRAME,INDEX of the first Gaussian in the scene.
    #[arg(long, value_name = "FRAME,INDEX")]
    first: Option<String>,
    /// FRAME,INDEX of the second Gaussian in the scene.
    #[arg(long, value_name = "FRAME,INDEX")]
    second: Option<String>,
}

#[derive(Serialize)]
struct DistanceOutput {
    w2: f64,
    w2_sq: f64,
    mean_term: f64,
    trace_term: f64,
}

pub fn run(args: &DistanceArgs) -> Result<()> {
    let (ga, gb) = load_pair(args)?;
    let mean_term = norm3_sq(sub3(ga.mean, gb.mean));
    let trace_term = w2_cov_squared(&ga.cov, &gb.cov);
    let w2_sq = (mean_term + trace_term).max(0.0);
    let out = DistanceOutput {
        w2: w2_sq.sqrt(),
        w2_sq,
        mean_term,
        trace_term,
    };
    println!("{}", serde_json::to_string(&out).expect("serializable"));
    Ok(())
}

fn load_pair(args: &DistanceArgs) -> Result<(Gaussian3, Gaussian3)> {
    match (&args.a, &args.b, &args.scene) {
        (Some(a), Some(b), None) => Ok((parse_atom("a", a)?, parse_atom("b", b)?)),
        (None, None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read scene file {}", path.display()))?;
            let file: SceneFile = serde_json::from_str(&text)
                .with_context(|| format!("malformed scene file {}", path.display()))?;
            let scene = file.into_scene()?;
            let first = parse_ref("first", args.first.as_deref().unwrap())?;
            let second = parse_ref("second", args.second.as_deref().unwrap())?;
            Ok((
                lookup(&scene.frames, first, "first")?,
                lookup(&scene.frames, second, "second")?,
            ))
        }
        _ => bail!("provide either --a and --b inline atoms, or --scene with --first and --second"),
    }
}

fn parse_atom(field: &str, text: &str) -> Result<Gaussian3> {
    let atom: DecomposedGaussian = serde_json::from_str(text)
        .map_err(|e| anyhow!("malformed Gaussian in --{field}: {e}"))?;
    atom.to_gaussian()
        .map_err(|e| anyhow!("invalid Gaussian in --{field}: {e}"))
}

fn parse_ref(field: &str, text: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        bail!("--{field} must be FRAME,INDEX, got `{text}`");
    }
    let frame = parts[0]
        .trim()
        .parse()
        .map_err(|_| anyhow!("--{field} frame is not a number: `{}`", parts[0]))?;
    let index = parts[1]
        .trim()
        .parse()
        .map_err(|_| anyhow!("--{field} index is not a number: `{}`", parts[1]))?;
    Ok((frame, index))
}

fn lookup(
    frames: &[Vec<DecomposedGaussian>],
    (frame, index): (usize, usize),
    field: &str,
) -> Result<Gaussian3> {
    let f = frames
        .get(frame)
        .ok_or_else(|| anyhow!("--{field} frame {frame} out of range (scene has {})", frames.len()))?;
    let atom = f
        .get(index)
        .ok_or_else(|| anyhow!("--{field} index {index} out of range (frame has {})", f.len()))?;
    atom.to_gaussian()
        .map_err(|e| anyhow!("invalid Gaussian at --{field}: {e}"))
}
