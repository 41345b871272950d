use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;
use trajkit::diagnostics::{hcluster_centers, linspace};
use trajkit::trajectories::cluster;

use super::cluster::{log_trace, write_assignments, write_trace};
use crate::common::{fmt_f64, warn_for_clustering, DataArgs, FitArgs, Outputs};
use crate::plot::dendrogram_plot;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Number of k-means clusters to agglomerate.
    #[arg(long, default_value_t = 40)]
    pub k: usize,
    /// Time points at which the centers are compared.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    /// Also write the clade of every center after cutting into this many.
    #[arg(long)]
    pub cut: Option<usize>,
    #[arg(long, default_value = "hclust_out")]
    pub out_dir: PathBuf,
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
    let tree = hcluster_centers(&res.centers, ds.time_range(), args.grid)?;

    let mut out = Outputs::create(&args.out_dir, verbose)?;
    write_assignments(&mut out, &res)?;
    write_trace(&mut out, &res)?;
    let n = tree.leaves.len();
    let label = |node: usize| {
        if node < n {
            tree.leaves[node].to_string()
        } else {
            String::new()
        }
    };
    out.csv(
        "dendrogram.csv",
        &["step", "node_a", "node_b", "height", "size", "cluster_a", "cluster_b"],
        tree.merges.iter().enumerate().map(|(s, m)| {
            [
                (s + 1).to_string(),
                m.node_a.to_string(),
                m.node_b.to_string(),
                fmt_f64(m.height),
                m.size.to_string(),
                label(m.node_a),
                label(m.node_b),
            ]
        }),
    )?;
    let grid = linspace(ds.time_range().0, ds.time_range().1, args.grid.max(1));
    let mut header = vec!["cluster".to_string()];
    header.extend(grid.iter().map(|&t| fmt_f64(t)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv(
        "resp.csv",
        &header,
        res.centers.iter().map(|(label, m)| {
            std::iter::once(label.to_string())
                .chain(grid.iter().map(|&t| fmt_f64(m.eval(t))))
                .collect::<Vec<_>>()
        }),
    )?;
    if let Some(c) = args.cut {
        let clades = tree.cut(c);
        out.csv(
            "clades.csv",
            &["cluster", "clade"],
            tree.leaves
                .iter()
                .zip(&clades)
                .map(|(l, c)| [l.to_string(), (c + 1).to_string()]),
        )?;
    }
    out.svg("dendrogram.svg", || {
        Ok(dendrogram_plot(
            &tree,
            &format!("complete linkage of {} centers", n),
        ))
    });
    out.finish(
        "hclust",
        Some(source),
        Some(params.clone()),
        Some(params.seed),
        json!({ "grid": args.grid, "cut": args.cut, "live_clusters": res.live_clusters() }),
    )
}
