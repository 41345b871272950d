use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use trajkit::dataset::write_csv_path;
use trajkit::simgen::{generate, preset, GeneratorSpec};

use crate::common::usage;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// bp5, clean2 or clean5.
    #[arg(long, default_value = "bp5", conflicts_with = "spec")]
    pub preset: String,
    /// Full generator spec as JSON, instead of a preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long)]
    pub subject_sd: Option<f64>,
    #[arg(long)]
    pub mean_obs: Option<f64>,
    /// Output CSV; gzipped when the name ends in .gz. spec.json is written
    /// next to it.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args, verbose: bool) -> Result<()> {
    let mut spec: GeneratorSpec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => preset(&args.preset).map_err(|e| usage(e.to_string()))?,
    };
    if let Some(n) = args.n {
        spec.n_subjects = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(v) = args.noise_sd {
        spec.noise_sd = v;
    }
    if let Some(v) = args.subject_sd {
        spec.subject_sd = v;
    }
    if let Some(v) = args.mean_obs {
        spec.obs_model.mean_obs = v;
    }
    let ds = generate(&spec)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_csv_path(&ds, &args.out)?;
    let spec_path = args
        .out
        .parent()
        .map_or_else(|| PathBuf::from("spec.json"), |d| d.join("spec.json"));
    fs::write(&spec_path, serde_json::to_string_pretty(&spec)? + "\n")
        .with_context(|| format!("writing {}", spec_path.display()))?;
    if verbose {
        eprintln!(
            "wrote {} subjects, {} rows to {}",
            ds.len(),
            ds.n_obs(),
            args.out.display()
        );
    }
    Ok(())
}
