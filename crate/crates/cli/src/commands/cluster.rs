use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;
use trajkit::trajectories::cluster;
use trajkit::{ClusterResult, TrajectoryDataset};

use crate::common::{fmt_f64, warn_for_clustering, DataArgs, FitArgs, Outputs};
use crate::plot::{line_plot, Series};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Number of clusters.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value = "cluster_out")]
    pub out_dir: PathBuf,
    /// Lower y-axis limit of centers.svg.
    #[arg(long, allow_negative_numbers = true)]
    pub ymin: Option<f64>,
    /// Upper y-axis limit of centers.svg.
    #[arg(long, allow_negative_numbers = true)]
    pub ymax: Option<f64>,
}

/// Integer grid from floor(min time) to ceil(max time).
pub fn unit_grid(ds: &TrajectoryDataset) -> Vec<f64> {
    let (lo, hi) = ds.time_range();
    let (lo, hi) = (lo.floor() as i64, hi.ceil() as i64);
    (lo..=hi).map(|t| t as f64).collect()
}

pub fn log_trace(res: &ClusterResult) {
    for r in &res.trace {
        let drops: Vec<String> = r
            .dropped
            .iter()
            .map(|d| format!("{}:{}", d.cluster, d.reason))
            .collect();
        eprintln!(
            "iteration {:>3}: {:>7.3}% switched{}",
            r.iteration,
            r.switch_pct,
            if drops.is_empty() {
                String::new()
            } else {
                format!(", dropped {}", drops.join(";"))
            }
        );
    }
    eprintln!(
        "{} after {} iteration(s), {} live cluster(s)",
        if res.converged { "converged" } else { "stopped" },
        res.iterations,
        res.centers.len()
    );
}

pub fn write_assignments(out: &mut Outputs, res: &ClusterResult) -> Result<()> {
    out.csv(
        "assignments.csv",
        &["id", "cluster"],
        res.subject_ids
            .iter()
            .zip(&res.assignments)
            .map(|(id, c)| [id.clone(), c.to_string()]),
    )
}

pub fn write_centers(out: &mut Outputs, res: &ClusterResult, grid: &[f64]) -> Result<()> {
    let rows = res.centers.iter().flat_map(|(label, m)| {
        grid.iter()
            .map(move |&t| [label.to_string(), fmt_f64(t), fmt_f64(m.eval(t))])
    });
    out.csv("centers.csv", &["cluster", "time", "pred"], rows)
}

pub fn write_trace(out: &mut Outputs, res: &ClusterResult) -> Result<()> {
    let rows = res.trace.iter().map(|r| {
        let drops: Vec<String> = r
            .dropped
            .iter()
            .map(|d| format!("{}:{}", d.cluster, d.reason))
            .collect();
        [r.iteration.to_string(), fmt_f64(r.switch_pct), drops.join(";")]
    });
    out.csv("trace.csv", &["iter", "switch_pct", "drops"], rows)
}

pub fn center_series(res: &ClusterResult, grid: &[f64]) -> Vec<Series> {
    res.centers
        .iter()
        .enumerate()
        .map(|(i, (label, m))| Series {
            label: format!("cluster {label}"),
            points: grid.iter().map(|&t| (t, m.eval(t))).collect(),
            color: i,
            dashed: false,
        })
        .collect()
}

pub fn run(args: Args, verbose: bool) -> Result<()> {
    let params = args.fit.params(args.k)?;
    let source = args.data.source()?;
    let ds = source.load(verbose)?;
    warn_for_clustering(&ds, params.k, params.maxdf);
    let res = cluster(&ds, &params)?;
    if verbose {
        log_trace(&res);
    }

    let mut out = Outputs::create(&args.out_dir, verbose)?;
    let grid = unit_grid(&ds);
    write_assignments(&mut out, &res)?;
    write_centers(&mut out, &res, &grid)?;
    write_trace(&mut out, &res)?;
    let sizes = res.cluster_sizes();
    let aic = res.aic();
    out.csv(
        "centers_summary.csv",
        &["cluster", "size", "edf", "lambda", "aic"],
        res.centers.iter().map(|(label, m)| {
            [
                label.to_string(),
                sizes[label].to_string(),
                fmt_f64(m.edf),
                fmt_f64(m.lambda),
                fmt_f64(aic[label]),
            ]
        }),
    )?;
    out.json("model.json", &res)?;
    let series = center_series(&res, &grid);
    out.svg("centers.svg", || {
        Ok(line_plot(
            &series,
            (args.ymin, args.ymax),
            &format!("k = {}: {} live clusters", params.k, res.centers.len()),
        ))
    });
    out.finish(
        "cluster",
        Some(source),
        Some(params.clone()),
        Some(params.seed),
        json!({
            "iterations": res.iterations,
            "converged": res.converged,
            "live_clusters": res.live_clusters(),
        }),
    )
}
