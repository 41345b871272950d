//! Long-format trajectory data: one row per (subject, time, response).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One subject's observations, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub times: Vec<f64>,
    pub responses: Vec<f64>,
    pub truth_group: Option<i64>,
}

impl SubjectRecord {
    /// Builds a record, sorting observations by time. Equal times keep the
    /// order in which they were given.
    pub fn new(
        id: impl Into<String>,
        times: Vec<f64>,
        responses: Vec<f64>,
        truth_group: Option<i64>,
    ) -> Result<Self> {
        let id = id.into();
        if times.len() != responses.len() {
            return Err(Error::InvalidData(format!(
                "subject {id}: {} times but {} responses",
                times.len(),
                responses.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::InvalidData(format!("subject {id} has no observations")));
        }
        if times.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("subject {id} has a non-finite value")));
        }
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let times = order.iter().map(|&i| times[i]).collect();
        let responses = order.iter().map(|&i| responses[i]).collect();
        Ok(Self {
            id,
            times,
            responses,
            truth_group,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.times.len()
    }
}

/// Subjects in canonical id order. Read-only once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDataset {
    subjects: Vec<SubjectRecord>,
    time_range: (f64, f64),
    has_truth: bool,
}

/// Orders ids numerically when both parse as integers, otherwise as strings.
/// Integer ids sort before non-integer ones.
pub fn compare_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

impl TrajectoryDataset {
    pub fn from_subjects(mut subjects: Vec<SubjectRecord>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::EmptyInput);
        }
        subjects.sort_by(|a, b| compare_ids(&a.id, &b.id));
        if let Some(w) = subjects.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidData(format!("duplicate subject id {}", w[0].id)));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in &subjects {
            if s.times.is_empty() || s.times.len() != s.responses.len() {
                return Err(Error::InvalidData(format!(
                    "subject {} has mismatched or empty observations",
                    s.id
                )));
            }
            if s.times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidData(format!(
                    "subject {} times are not sorted",
                    s.id
                )));
            }
            if s.times.iter().chain(&s.responses).any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("subject {} has a non-finite value", s.id)));
            }
            lo = lo.min(s.times[0]);
            hi = hi.max(s.times[s.times.len() - 1]);
        }
        let has_truth = subjects.iter().all(|s| s.truth_group.is_some());
        if !has_truth {
            for s in &mut subjects {
                s.truth_group = None;
            }
        }
        Ok(Self {
            subjects,
            time_range: (lo, hi),
            has_truth,
        })
    }

    /// Groups long-format rows by subject id. Row order within a subject is
    /// used only to break ties between equal times.
    pub fn from_rows<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, f64, f64, Option<i64>)>,
    {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut acc: Vec<(String, Vec<f64>, Vec<f64>, Option<i64>)> = Vec::new();
        for (id, t, y, g) in rows {
            let slot = match index.get(&id) {
                Some(&i) => i,
                None => {
                    index.insert(id.clone(), acc.len());
                    acc.push((id, Vec::new(), Vec::new(), g));
                    acc.len() - 1
                }
            };
            let entry = &mut acc[slot];
            if entry.3 != g {
                return Err(Error::InvalidData(format!(
                    "subject {} has inconsistent truth labels",
                    entry.0
                )));
            }
            entry.1.push(t);
            entry.2.push(y);
        }
        let subjects = acc
            .into_iter()
            .map(|(id, t, y, g)| SubjectRecord::new(id, t, y, g))
            .collect::<Result<Vec<_>>>()?;
        Self::from_subjects(subjects)
    }

    pub fn subjects(&self) -> &[SubjectRecord] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn time_range(&self) -> (f64, f64) {
        self.time_range
    }

    pub fn has_truth(&self) -> bool {
        self.has_truth
    }

    pub fn n_obs(&self) -> usize {
        self.subjects.iter().map(SubjectRecord::n_obs).sum()
    }

    pub fn n_distinct_times(&self) -> usize {
        let mut t: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.times.iter().copied())
            .collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t.len()
    }

    /// Ground-truth labels in subject order, when every subject carries one.
    pub fn truth_labels(&self) -> Option<Vec<i64>> {
        self.has_truth
            .then(|| self.subjects.iter().map(|s| s.truth_group.unwrap()).collect())
    }

    /// Keeps subjects with at least `min_pre` observations before time zero
    /// and at least `min_post` after it. Returns `None` if nobody qualifies.
    pub fn filter_cohort(&self, min_pre: usize, min_post: usize) -> Option<Self> {
        let kept: Vec<SubjectRecord> = self
            .subjects
            .iter()
            .filter(|s| {
                let pre = s.times.iter().filter(|&&t| t < 0.0).count();
                let post = s.times.iter().filter(|&&t| t > 0.0).count();
                pre >= min_pre && post >= min_post
            })
            .cloned()
            .collect();
        Self::from_subjects(kept).ok()
    }
}

/// Which column, if any, carries ground-truth group labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TruthColumn {
    None,
    /// Must be present.
    Required(String),
    /// Used when present, silently ignored otherwise.
    IfPresent(String),
}

#[derive(Debug, Clone)]
pub struct CsvColumns {
    pub id: String,
    pub time: String,
    pub response: String,
    pub truth: TruthColumn,
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            response: "response".into(),
            truth: TruthColumn::IfPresent("true_group".into()),
        }
    }
}

/// Opens a file for reading, transparently decompressing gzip content.
pub fn open_maybe_gz(path: &Path) -> Result<Box<dyn BufRead>> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = BufReader::new(File::open(path).map_err(io_err)?);
    let magic = file.fill_buf().map_err(io_err)?;
    if magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(file))
    }
}

/// Creates a file for writing; gzip-compressed when the name ends in `.gz`.
pub fn create_maybe_gz(path: &Path) -> Result<Box<dyn Write>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    if gz {
        Ok(Box::new(GzEncoder::new(BufWriter::new(file), Compression::default())))
    } else {
        Ok(Box::new(BufWriter::new(file)))
    }
}

/// Reads all of `reader`, choosing tab as delimiter when the header line has
/// tabs and no commas.
pub fn csv_reader_auto<R: Read>(reader: R) -> Result<csv::Reader<std::io::Cursor<Vec<u8>>>> {
    let mut buf = Vec::new();
    let mut reader = reader;
    reader.read_to_end(&mut buf).map_err(|source| Error::Io {
        path: Default::default(),
        source,
    })?;
    let header_end = buf.iter().position(|&b| b == b'\n').unwrap_or(buf.len());
    let header = &buf[..header_end];
    let delimiter = if header.contains(&b'\t') && !header.contains(&b',') {
        b'\t'
    } else {
        b','
    };
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(std::io::Cursor::new(buf)))
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

/// Loads a long-format CSV (optionally gzipped, comma or tab separated).
pub fn load_csv(path: impl AsRef<Path>, columns: &CsvColumns) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let mut rdr = csv_reader_auto(open_maybe_gz(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })?;
    let headers = rdr.headers()?.clone();
    let need = |name: &str| {
        column_index(&headers, name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
        })
    };
    let id_ix = need(&columns.id)?;
    let time_ix = need(&columns.time)?;
    let resp_ix = need(&columns.response)?;
    let truth_ix = match &columns.truth {
        TruthColumn::None => None,
        TruthColumn::Required(name) => Some(need(name)?),
        TruthColumn::IfPresent(name) => column_index(&headers, name),
    };

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based line number in the file, counting the header.
        let row = i + 2;
        let field = |ix: usize| record.get(ix).unwrap_or("");
        let number = |ix: usize, name: &str| -> Result<f64> {
            let raw = field(ix);
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: name.to_string(),
                    value: raw.to_string(),
                })
        };
        let t = number(time_ix, &columns.time)?;
        let y = number(resp_ix, &columns.response)?;
        let g = match truth_ix {
            None => None,
            Some(ix) => {
                let raw = field(ix);
                let label = raw
                    .parse::<i64>()
                    .ok()
                    .or_else(|| raw.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64))
                    .ok_or_else(|| Error::Parse {
                        row,
                        column: headers.get(ix).unwrap_or("truth").to_string(),
                        value: raw.to_string(),
                    })?;
                Some(label)
            }
        };
        rows.push((field(id_ix).to_string(), t, y, g));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    TrajectoryDataset::from_rows(rows)
}

/// Writes the dataset as `id,time,response[,true_group]`.
pub fn write_csv<W: Write>(ds: &TrajectoryDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if ds.has_truth() {
        w.write_record(["id", "time", "response", "true_group"])?;
    } else {
        w.write_record(["id", "time", "response"])?;
    }
    for s in ds.subjects() {
        for (t, y) in s.times.iter().zip(&s.responses) {
            let (t, y) = (t.to_string(), y.to_string());
            match s.truth_group {
                Some(g) => w.write_record([s.id.as_str(), &t, &y, &g.to_string()])?,
                None => w.write_record([s.id.as_str(), &t, &y])?,
            }
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: Default::default(),
        source,
    })?;
    Ok(())
}

pub fn write_csv_path(ds: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create_maybe_gz(path)?;
    write_csv(ds, &mut out)?;
    out.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Advisory problems found before clustering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    FewerSubjectsThanClusters { subjects: usize, k: usize },
    InsufficientDistinctTimes { distinct: usize, maxdf: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::FewerSubjectsThanClusters { subjects, k } => {
                write!(f, "fewer subjects than clusters ({subjects} subjects, k = {k})")
            }
            Warning::InsufficientDistinctTimes { distinct, maxdf } => write!(
                f,
                "insufficient distinct times for requested basis ({distinct} distinct, maxdf = {maxdf})"
            ),
        }
    }
}

/// Returns an empty list when the dataset looks fit for `k` clusters with a
/// `maxdf`-dimensional spline basis.
pub fn validate_for_clustering(ds: &TrajectoryDataset, k: usize, maxdf: usize) -> Vec<Warning> {
    let mut warnings = Vec::new();
    if ds.len() < k {
        warnings.push(Warning::FewerSubjectsThanClusters {
            subjects: ds.len(),
            k,
        });
    }
    let distinct = ds.n_distinct_times();
    if distinct < maxdf + 1 {
        warnings.push(Warning::InsufficientDistinctTimes { distinct, maxdf });
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str, name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::fs::write(&path, contents).unwrap();
        (dir, path)
    }

    #[test]
    fn single_row() {
        let (_d, p) = write_tmp("id,time,response\n1,0,120\n", "one.csv");
        let ds = load_csv(&p, &CsvColumns::default()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.subjects()[0].n_obs(), 1);
        assert!(!ds.has_truth());
    }

    #[test]
    fn shuffled_rows_give_same_dataset() {
        let sorted = "id,time,response,true_group\n1,-3,10,1\n1,5,11,1\n2,0,20,2\n2,4,21,2\n10,1,5,1\n";
        let shuffled = "id,time,response,true_group\n2,4,21,2\n10,1,5,1\n1,5,11,1\n2,0,20,2\n1,-3,10,1\n";
        let (_a, pa) = write_tmp(sorted, "a.csv");
        let (_b, pb) = write_tmp(shuffled, "b.csv");
        let a = load_csv(&pa, &CsvColumns::default()).unwrap();
        let b = load_csv(&pb, &CsvColumns::default()).unwrap();
        assert_eq!(a, b);
        let ids: Vec<_> = a.subjects().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "10"]);
        assert_eq!(a.n_obs(), 5);
        assert_eq!(a.truth_labels().unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn tab_delimited() {
        let (_d, p) = write_tmp("id\ttime\tresponse\na\t1\t2\na\t0\t3\n", "t.tsv");
        let ds = load_csv(&p, &CsvColumns::default()).unwrap();
        assert_eq!(ds.subjects()[0].times, vec![0.0, 1.0]);
        assert_eq!(ds.subjects()[0].responses, vec![3.0, 2.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let (_d, p) = write_tmp("id,t,response\n1,0,1\n", "m.csv");
        match load_csv(&p, &CsvColumns::default()) {
            Err(Error::MissingColumn { column }) => assert_eq!(column, "time"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn required_truth_column_must_exist() {
        let (_d, p) = write_tmp("id,time,response\n1,0,1\n", "m.csv");
        let cols = CsvColumns {
            truth: TruthColumn::Required("grp".into()),
            ..Default::default()
        };
        assert!(matches!(load_csv(&p, &cols), Err(Error::MissingColumn { .. })));
    }

    #[test]
    fn parse_error_reports_row() {
        let (_d, p) = write_tmp("id,time,response\n1,0,1\n1,2,abc\n", "p.csv");
        match load_csv(&p, &CsvColumns::default()) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "response");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blank_response_is_an_error() {
        let (_d, p) = write_tmp("id,time,response\n1,0,\n", "b.csv");
        assert!(matches!(
            load_csv(&p, &CsvColumns::default()),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn header_only_is_empty_input() {
        let (_d, p) = write_tmp("id,time,response\n", "e.csv");
        assert!(matches!(load_csv(&p, &CsvColumns::default()), Err(Error::EmptyInput)));
    }

    #[test]
    fn duplicate_times_are_kept_in_input_order() {
        let (_d, p) = write_tmp("id,time,response\n1,3,1\n1,2,7\n1,3,2\n", "d.csv");
        let ds = load_csv(&p, &CsvColumns::default()).unwrap();
        assert_eq!(ds.subjects()[0].times, vec![2.0, 3.0, 3.0]);
        assert_eq!(ds.subjects()[0].responses, vec![7.0, 1.0, 2.0]);
    }

    #[test]
    fn gzip_round_trip() {
        let ds = TrajectoryDataset::from_rows(vec![
            ("a".to_string(), 1.5, 2.25, Some(1)),
            ("a".to_string(), -0.5, 3.0, Some(1)),
            ("b".to_string(), 0.1, 1e-3, Some(2)),
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv.gz");
        write_csv_path(&ds, &path).unwrap();
        let back = load_csv(&path, &CsvColumns::default()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn validation_warnings() {
        let rows = (0..10).flat_map(|i| {
            (0..3).map(move |j| (i.to_string(), j as f64, 1.0, None))
        });
        let ds = TrajectoryDataset::from_rows(rows).unwrap();
        let w = validate_for_clustering(&ds, 20, 30);
        assert!(w.contains(&Warning::FewerSubjectsThanClusters { subjects: 10, k: 20 }));
        assert!(w.contains(&Warning::InsufficientDistinctTimes {
            distinct: 3,
            maxdf: 30
        }));
        assert!(w[0].to_string().contains("fewer subjects than clusters"));
        assert!(w[1]
            .to_string()
            .contains("insufficient distinct times for requested basis"));
    }

    #[test]
    fn cohort_filter() {
        let ds = TrajectoryDataset::from_rows(vec![
            ("1".to_string(), -10.0, 1.0, None),
            ("1".to_string(), 1.0, 1.0, None),
            ("1".to_string(), 2.0, 1.0, None),
            ("1".to_string(), 3.0, 1.0, None),
            ("2".to_string(), 1.0, 1.0, None),
            ("2".to_string(), 2.0, 1.0, None),
        ])
        .unwrap();
        let kept = ds.filter_cohort(1, 3).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept.subjects()[0].id, "1");
        assert!(ds.filter_cohort(2, 3).is_none());
    }

    #[test]
    fn rejects_non_finite_and_inconsistent_truth() {
        assert!(SubjectRecord::new("x", vec![f64::NAN], vec![1.0], None).is_err());
        let r = TrajectoryDataset::from_rows(vec![
            ("1".to_string(), 0.0, 1.0, Some(1)),
            ("1".to_string(), 1.0, 1.0, Some(2)),
        ]);
        assert!(r.is_err());
    }
}
