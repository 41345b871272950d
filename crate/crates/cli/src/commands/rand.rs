use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;
use trajkit::diagnostics::rand_replicates;

use crate::common::{fmt_f64, k_list_arg, KList, DataArgs, FitArgs, Outputs};
use crate::plot::matrix_plot;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Cluster counts, e.g. "2..10" or "2,5,10".
    #[arg(long, value_parser = k_list_arg, default_value = "2..10")]
    pub k_list: KList,
    /// Random starts per cluster count.
    #[arg(long, default_value_t = 10, value_parser = parse_replicates)]
    pub replicates: usize,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value = "rand_out")]
    pub out_dir: PathBuf,
}

fn parse_replicates(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if n < 2 {
        return Err(format!("at least 2 replicates are required, got {n}"));
    }
    Ok(n)
}

pub fn run(args: Args, verbose: bool) -> Result<()> {
    let base = args.fit.params(args.k_list[0])?;
    let source = args.data.source()?;
    let ds = source.load(verbose)?;
    let table = rand_replicates(&ds, &args.k_list, args.replicates, &base, args.fit.seed)?;
    if verbose {
        for k in table.ks() {
            if let Some(m) = table.within_k_mean(k) {
                eprintln!("k = {k}: mean pairwise ARI {m:.4}");
            }
        }
    }

    let mut out = Outputs::create(&args.out_dir, verbose)?;
    out.csv(
        "rand.csv",
        &["k_a", "rep_a", "k_b", "rep_b", "ari"],
        table.entries.iter().map(|e| {
            [
                e.k_a.to_string(),
                e.rep_a.to_string(),
                e.k_b.to_string(),
                e.rep_b.to_string(),
                fmt_f64(e.ari),
            ]
        }),
    )?;
    let ids: Vec<&str> = ds.subjects().iter().map(|s| s.id.as_str()).collect();
    out.csv(
        "assignments.csv",
        &["id", "k", "replicate", "cluster"],
        table.runs.iter().flat_map(|r| {
            ids.iter().zip(&r.assignments).map(move |(id, c)| {
                [
                    id.to_string(),
                    r.k.to_string(),
                    r.replicate.to_string(),
                    c.to_string(),
                ]
            })
        }),
    )?;
    out.csv(
        "runs.csv",
        &["k", "replicate", "seed", "live_clusters", "iterations", "converged"],
        table.runs.iter().map(|r| {
            [
                r.k.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                r.live_clusters.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        }),
    )?;
    if ds.has_truth() {
        out.csv(
            "truth_ari.csv",
            &["k", "replicate", "ari"],
            table.runs.iter().map(|r| {
                [
                    r.k.to_string(),
                    r.replicate.to_string(),
                    r.truth_ari.map(fmt_f64).unwrap_or_default(),
                ]
            }),
        )?;
    }
    let labels: Vec<(usize, usize)> = table.runs.iter().map(|r| (r.k, r.replicate)).collect();
    let matrix = table.matrix();
    out.svg("rand_matrix.svg", || {
        Ok(matrix_plot(&matrix, &labels, "adjusted Rand index between runs"))
    });
    out.finish(
        "rand",
        Some(source),
        Some(base),
        Some(args.fit.seed),
        json!({
            "k_list": args.k_list,
            "replicates": args.replicates,
            "within_k_mean_ari": table
                .ks()
                .into_iter()
                .map(|k| json!({ "k": k, "mean_ari": table.within_k_mean(k) }))
                .collect::<Vec<_>>(),
        }),
    )
}
