use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;
use trajkit::dataset::{csv_reader_auto, open_maybe_gz};
use trajkit::diagnostics::{adjusted_rand, align_curves, LabeledCurve, Partition};
use trajkit::trajectories::Label;

use crate::common::{fmt_f64, Outputs};
use crate::plot::{line_plot, Series};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// centers.csv of the first run.
    #[arg(long)]
    pub centers_a: PathBuf,
    /// centers.csv of the second run.
    #[arg(long)]
    pub centers_b: PathBuf,
    /// assignments.csv of the first run.
    #[arg(long, requires = "assign_b")]
    pub assign_a: Option<PathBuf>,
    /// assignments.csv of the second run.
    #[arg(long, requires = "assign_a")]
    pub assign_b: Option<PathBuf>,
    #[arg(long, default_value = "compare_out")]
    pub out_dir: PathBuf,
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .with_context(|| format!("{}: missing column {name:?}", path.display()))
}

/// Time key that treats -0 and 0 alike.
fn time_key(t: f64) -> u64 {
    (if t == 0.0 { 0.0 } else { t }).to_bits()
}

type Curves = BTreeMap<Label, BTreeMap<u64, (f64, f64)>>;

fn read_centers(path: &Path) -> Result<Curves> {
    let mut rdr = csv_reader_auto(open_maybe_gz(path)?)?;
    let headers = rdr.headers()?.clone();
    let (ci, ti, pi) = (
        column(&headers, "cluster", path)?,
        column(&headers, "time", path)?,
        column(&headers, "pred", path)?,
    );
    let mut curves = Curves::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), row + 2))?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let bad = |col: &str, v: &str| {
            anyhow::anyhow!("{}: row {}: bad {col} value {v:?}", path.display(), row + 2)
        };
        let c: Label = field(ci).parse().map_err(|_| bad("cluster", field(ci)))?;
        let t: f64 = field(ti).parse().map_err(|_| bad("time", field(ti)))?;
        let p: f64 = field(pi).parse().map_err(|_| bad("pred", field(pi)))?;
        if !t.is_finite() || !p.is_finite() {
            return Err(bad("time/pred", &format!("{t},{p}")));
        }
        curves.entry(c).or_default().insert(time_key(t), (t, p));
    }
    if curves.is_empty() {
        bail!("{}: no centers", path.display());
    }
    Ok(curves)
}

fn read_assignments(path: &Path) -> Result<Vec<(String, i64)>> {
    let mut rdr = csv_reader_auto(open_maybe_gz(path)?)?;
    let headers = rdr.headers()?.clone();
    let (ii, ci) = (column(&headers, "id", path)?, column(&headers, "cluster", path)?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), row + 2))?;
        let id = rec.get(ii).unwrap_or("").trim().to_string();
        let c = rec.get(ci).unwrap_or("").trim();
        let c: i64 = c.parse().with_context(|| {
            format!("{}: row {}: bad cluster value {c:?}", path.display(), row + 2)
        })?;
        out.push((id, c));
    }
    Ok(out)
}

fn paired_ari(a: &[(String, i64)], b: &[(String, i64)]) -> Result<(f64, usize)> {
    let lookup: HashMap<&str, i64> = b.iter().map(|(id, c)| (id.as_str(), *c)).collect();
    if lookup.len() != b.len() {
        bail!("duplicate ids in the second assignment file");
    }
    let mut la = Vec::with_capacity(a.len());
    let mut lb = Vec::with_capacity(a.len());
    for (id, c) in a {
        let other = lookup
            .get(id.as_str())
            .with_context(|| format!("subject {id} is missing from the second assignment file"))?;
        la.push(*c);
        lb.push(*other);
    }
    if a.len() != b.len() {
        bail!(
            "assignment files cover different subjects ({} vs {})",
            a.len(),
            b.len()
        );
    }
    Ok((adjusted_rand(&Partition::new(la)?, &Partition::new(lb)?)?, a.len()))
}

pub fn run(args: Args, verbose: bool) -> Result<()> {
    let a = read_centers(&args.centers_a)?;
    let b = read_centers(&args.centers_b)?;
    let mut common: Option<BTreeSet<u64>> = None;
    for curve in a.values().chain(b.values()) {
        let keys: BTreeSet<u64> = curve.keys().copied().collect();
        common = Some(match common {
            None => keys,
            Some(c) => c.intersection(&keys).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        bail!("the two center files share no time points");
    }
    let any_curve = a.values().next().expect("nonempty");
    let mut grid: Vec<f64> = common.iter().map(|k| any_curve[k].0).collect();
    grid.sort_by(f64::total_cmp);
    let keys: Vec<u64> = grid.iter().map(|&t| time_key(t)).collect();
    let curves = |c: &Curves| -> Vec<LabeledCurve> {
        c.iter()
            .map(|(&label, pts)| LabeledCurve {
                label,
                values: keys.iter().map(|k| pts[k].1).collect(),
            })
            .collect()
    };
    let (ca, cb) = (curves(&a), curves(&b));
    let alignment = align_curves(&ca, &cb);
    if verbose {
        eprintln!("aligned on {} common time points", grid.len());
    }

    let ari = match (&args.assign_a, &args.assign_b) {
        (Some(pa), Some(pb)) => {
            let (ari, n) = paired_ari(&read_assignments(pa)?, &read_assignments(pb)?)?;
            println!("ARI {}", fmt_f64(ari));
            Some((ari, n))
        }
        _ => None,
    };

    let mut out = Outputs::create(&args.out_dir, verbose)?;
    let mut rows: Vec<[String; 3]> = alignment
        .pairs
        .iter()
        .map(|&(x, y, d)| [x.to_string(), y.to_string(), fmt_f64(d)])
        .collect();
    rows.extend(alignment.unmapped_a.iter().map(|x| [x.to_string(), String::new(), String::new()]));
    rows.extend(alignment.unmapped_b.iter().map(|y| [String::new(), y.to_string(), String::new()]));
    out.csv("mapping.csv", &["cluster_a", "cluster_b", "distance"], rows)?;

    // Matched pairs share a color; run A solid, run B dashed.
    let mut color_of_b: BTreeMap<Label, usize> = BTreeMap::new();
    let mut series = Vec::new();
    for (i, c) in ca.iter().enumerate() {
        let col = alignment
            .pairs
            .iter()
            .position(|p| p.0 == c.label)
            .unwrap_or(alignment.pairs.len() + i);
        if let Some(p) = alignment.pairs.iter().find(|p| p.0 == c.label) {
            color_of_b.insert(p.1, col);
        }
        series.push(Series {
            label: format!("A {}", c.label),
            points: grid.iter().copied().zip(c.values.iter().copied()).collect(),
            color: col,
            dashed: false,
        });
    }
    for (i, c) in cb.iter().enumerate() {
        series.push(Series {
            label: format!("B {}", c.label),
            points: grid.iter().copied().zip(c.values.iter().copied()).collect(),
            color: color_of_b
                .get(&c.label)
                .copied()
                .unwrap_or(ca.len() + alignment.pairs.len() + i),
            dashed: true,
        });
    }
    out.svg("overlay.svg", || {
        Ok(line_plot(&series, (None, None), "run A (solid) vs run B (dashed)"))
    });
    let summary = json!({
        "centers_a": args.centers_a,
        "centers_b": args.centers_b,
        "grid_points": grid.len(),
        "pairs": alignment.pairs.iter().map(|&(x, y, d)| json!({
            "cluster_a": x, "cluster_b": y, "distance": d
        })).collect::<Vec<_>>(),
        "unmapped_a": alignment.unmapped_a,
        "unmapped_b": alignment.unmapped_b,
        "ari": ari.map(|v| v.0),
        "n_subjects": ari.map(|v| v.1),
    });
    out.json("compare.json", &summary)?;
    out.finish("compare", None, None, None, summary)
}
