use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use trajkit::dataset::{load_csv, validate_for_clustering, CsvColumns, TruthColumn};
use trajkit::{ClusterParams, TrajectoryDataset};

/// Marks errors that should exit with the usage status.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Input file and column layout.
#[derive(Debug, Clone, clap::Args)]
pub struct DataArgs {
    /// Long-format CSV (optionally gzipped) with one row per observation.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    #[arg(long, default_value = "time")]
    pub time_col: String,
    #[arg(long, default_value = "response")]
    pub response_col: String,
    /// Optional true-group column, used for ARI against truth when present.
    #[arg(long, default_value = "true_group")]
    pub truth_col: String,
    /// Keep only subjects with at least MIN_PRE observations before time
    /// zero and MIN_POST after, given as "MIN_PRE,MIN_POST".
    #[arg(long, value_parser = parse_cohort_filter)]
    pub cohort_filter: Option<(usize, usize)>,
}

/// Clustering parameters shared by the subcommands that run the EM loop.
#[derive(Debug, Clone, clap::Args)]
pub struct FitArgs {
    /// Spline basis size per center.
    #[arg(long, default_value_t = 30)]
    pub maxdf: usize,
    #[arg(long, default_value_t = 20)]
    pub max_iter: usize,
    /// Stop once at most this percentage of subjects switch clusters.
    #[arg(long, default_value_t = 0.5)]
    pub conv_pct: f64,
    #[arg(long, default_value_t = 12345)]
    pub seed: u64,
}

impl FitArgs {
    pub fn params(&self, k: usize) -> Result<ClusterParams> {
        let p = ClusterParams {
            k,
            maxdf: self.maxdf,
            max_iter: self.max_iter,
            conv_pct: self.conv_pct,
            seed: self.seed,
        };
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }
}

/// Where a dataset came from, recorded so later commands can reload it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub id_col: String,
    pub time_col: String,
    pub response_col: String,
    pub truth_col: String,
    pub cohort_filter: Option<(usize, usize)>,
}

impl DataArgs {
    pub fn source(&self) -> Result<DataSource> {
        let path = self
            .input
            .clone()
            .ok_or_else(|| usage("--input is required"))?;
        Ok(DataSource {
            path,
            id_col: self.id_col.clone(),
            time_col: self.time_col.clone(),
            response_col: self.response_col.clone(),
            truth_col: self.truth_col.clone(),
            cohort_filter: self.cohort_filter,
        })
    }
}

impl DataSource {
    pub fn load(&self, verbose: bool) -> Result<TrajectoryDataset> {
        let columns = CsvColumns {
            id: self.id_col.clone(),
            time: self.time_col.clone(),
            response: self.response_col.clone(),
            truth: TruthColumn::IfPresent(self.truth_col.clone()),
        };
        let ds = load_csv(&self.path, &columns)
            .with_context(|| format!("loading {}", self.path.display()))?;
        let ds = match self.cohort_filter {
            None => ds,
            Some((pre, post)) => ds.filter_cohort(pre, post).with_context(|| {
                format!("no subject has {pre} observation(s) before and {post} after time zero")
            })?,
        };
        if verbose {
            eprintln!(
                "loaded {} subjects, {} observations from {}",
                ds.len(),
                ds.n_obs(),
                self.path.display()
            );
        }
        Ok(ds)
    }
}

pub fn warn_for_clustering(ds: &TrajectoryDataset, k: usize, maxdf: usize) {
    for w in validate_for_clustering(ds, k, maxdf) {
        eprintln!("warning: {w}");
    }
}

fn parse_cohort_filter(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected MIN_PRE,MIN_POST, got {s:?}"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<usize>()
            .map_err(|e| format!("{x:?}: {e}"))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Parses "2..10" (inclusive), "2,5,10", or a mix such as "2..4,8".
/// Parsed `--k-list` value.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
pub struct KList(pub Vec<usize>);

impl std::ops::Deref for KList {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

pub fn k_list_arg(s: &str) -> Result<KList, String> {
    parse_k_list(s).map(KList)
}

pub fn parse_k_list(s: &str) -> Result<Vec<usize>, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| {
            x.trim()
                .parse::<usize>()
                .map_err(|e| format!("invalid cluster count {x:?}: {e}"))
        };
        if let Some((lo, hi)) = part.split_once("..") {
            let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range {part:?}"));
            }
            ks.extend(lo..=hi);
        } else {
            ks.push(num(part)?);
        }
    }
    if ks.is_empty() {
        return Err("no cluster counts given".into());
    }
    if ks.contains(&0) {
        return Err("cluster counts must be at least 1".into());
    }
    Ok(ks)
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, excluding the header; absent for non-tabular files.
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub input: Option<DataSource>,
    pub params: Option<ClusterParams>,
    pub out_dir: PathBuf,
    pub files: Vec<FileEntry>,
    pub wall_seconds: f64,
    pub version: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Collects the artifacts written to an output directory.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
    started: Instant,
    verbose: bool,
}

impl Outputs {
    pub fn create(dir: &Path, verbose: bool) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
            verbose,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        let mut n = 0;
        for row in rows {
            w.write_record(row)?;
            n += 1;
        }
        w.flush()
            .with_context(|| format!("writing {}", path.display()))?;
        self.record(name, Some(n));
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.record(name, None);
        Ok(())
    }

    /// Plots are best-effort: a failure is reported and the run goes on.
    pub fn svg(&mut self, name: &str, render: impl FnOnce() -> Result<String>) {
        let path = self.path(name);
        match render().and_then(|s| fs::write(&path, s).map_err(anyhow::Error::from)) {
            Ok(()) => self.record(name, None),
            Err(e) => eprintln!("warning: could not write {}: {e:#}", path.display()),
        }
    }

    fn record(&mut self, name: &str, rows: Option<usize>) {
        if self.verbose {
            match rows {
                Some(n) => eprintln!("wrote {name} ({n} rows)"),
                None => eprintln!("wrote {name}"),
            }
        }
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry {
            name: name.to_string(),
            rows,
        });
    }

    /// Writes manifest.json after checking that every listed file exists and
    /// that tabular files hold the recorded number of rows.
    pub fn finish(
        self,
        command: &str,
        input: Option<DataSource>,
        params: Option<ClusterParams>,
        seed: Option<u64>,
        extra: serde_json::Value,
    ) -> Result<()> {
        for f in &self.files {
            let path = self.dir.join(&f.name);
            if !path.is_file() {
                bail!("expected output {} is missing", path.display());
            }
            if let Some(expected) = f.rows {
                let mut r = csv::Reader::from_path(&path)?;
                let mut found = 0;
                for rec in r.records() {
                    rec.with_context(|| format!("re-reading {}", path.display()))?;
                    found += 1;
                }
                if found != expected {
                    bail!(
                        "{} holds {found} rows, expected {expected}",
                        path.display()
                    );
                }
            }
        }
        let mut files = self.files;
        files.push(FileEntry {
            name: "manifest.json".into(),
            rows: None,
        });
        let manifest = RunManifest {
            command: command.to_string(),
            input,
            params,
            out_dir: self.dir.clone(),
            files,
            wall_seconds: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            extra,
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}
