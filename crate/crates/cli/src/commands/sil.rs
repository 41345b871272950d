use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::json;
use trajkit::diagnostics::{silhouette, SilhouetteTable};
use trajkit::trajectories::cluster;
use trajkit::{ClusterResult, Error};

use crate::common::{
    fmt_f64, k_list_arg, KList, usage, warn_for_clustering, DataArgs, FitArgs, Outputs, RunManifest,
};
use crate::plot::silhouette_plot;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Reuse the model.json of an earlier `cluster` run.
    #[arg(long, conflicts_with = "k_list")]
    pub from_run: Option<PathBuf>,
    /// Cluster counts to run, e.g. "2,5,10" or "2..6".
    #[arg(long, value_parser = k_list_arg)]
    pub k_list: Option<KList>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value = "sil_out")]
    pub out_dir: PathBuf,
}

fn emit(out: &mut Outputs, table: &SilhouetteTable, k: usize) -> Result<()> {
    out.csv(
        &format!("silhouette_k{k}.csv"),
        &["id", "cluster", "neighbor", "silhouette"],
        table.rows.iter().map(|r| {
            [
                r.id.clone(),
                r.cluster.to_string(),
                r.neighbor.to_string(),
                fmt_f64(r.silhouette),
            ]
        }),
    )?;
    out.svg(&format!("silhouette_k{k}.svg"), || {
        Ok(silhouette_plot(table, &format!("silhouette, k = {k}")))
    });
    println!("k={k} mean silhouette {:.6}", table.mean());
    Ok(())
}

pub fn run(args: Args, verbose: bool) -> Result<()> {
    let mut out = Outputs::create(&args.out_dir, verbose)?;
    let mut summary: Vec<[String; 4]> = Vec::new();
    let mut summarize = |k: usize, t: &SilhouetteTable, res: &ClusterResult| {
        let sizes = res.cluster_sizes();
        for (c, m) in t.cluster_means() {
            summary.push([k.to_string(), c.to_string(), sizes[&c].to_string(), fmt_f64(m)]);
        }
    };

    let (source, params, seed) = if let Some(dir) = &args.from_run {
        let model_path = dir.join("model.json");
        let text = fs::read_to_string(&model_path)
            .with_context(|| format!("reading {}", model_path.display()))?;
        let res: ClusterResult = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", model_path.display()))?;
        let source = match args.data.input {
            Some(_) => args.data.source()?,
            None => RunManifest::read(dir)?
                .input
                .context("the run's manifest does not name its input; pass --input")?,
        };
        let ds = source.load(verbose)?;
        let table = silhouette(&res, &ds)?;
        emit(&mut out, &table, res.params.k)?;
        summarize(res.params.k, &table, &res);
        let seed = res.params.seed;
        (source, Some(res.params), seed)
    } else {
        let ks = args
            .k_list
            .clone()
            .ok_or_else(|| usage("either --from-run or --k-list is required"))?;
        if ks.contains(&1) {
            return Err(Error::SingleCluster.into());
        }
        let source = args.data.source()?;
        let ds = source.load(verbose)?;
        for &k in ks.iter() {
            let params = args.fit.params(k)?;
            warn_for_clustering(&ds, k, params.maxdf);
            let res = cluster(&ds, &params)?;
            if verbose {
                eprintln!("k = {k}: {} live clusters", res.centers.len());
            }
            let table = silhouette(&res, &ds).with_context(|| format!("k = {k}"))?;
            emit(&mut out, &table, k)?;
            summarize(k, &table, &res);
        }
        (source, None, args.fit.seed)
    };

    out.csv(
        "silhouette_summary.csv",
        &["k", "cluster", "size", "mean_silhouette"],
        summary,
    )?;
    out.finish(
        "sil",
        Some(source),
        params,
        Some(seed),
        json!({ "from_run": args.from_run, "k_list": args.k_list }),
    )
}
