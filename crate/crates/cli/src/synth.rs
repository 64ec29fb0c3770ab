use std::path::Path;

use asmp_core::synth::{gen_scene, random_spec, SynthSpec};
use asmp_core::tensorio::read_json;

use crate::{CliResult, RunConfig};

pub fn run(run: &RunConfig, spec_path: Option<&Path>, objects: usize, out: &Path) -> CliResult<()> {
    let mut spec: SynthSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => random_spec(run.seed(), objects),
    };
    if let Some(seed) = run.seed {
        spec.seed = seed;
    }
    if let Some(l) = run.window_frames {
        spec.window_frames = l;
    }
    spec.tau = run.tau;
    let bundle = gen_scene(&spec, out)?;
    println!(
        "wrote {} ({} frames, {} windows, {} sources)",
        out.display(),
        bundle.manifest.frame_count,
        bundle.window_count(),
        bundle.sources.len()
    );
    Ok(())
}
