//! Canonical CSV datasets and their JSON manifests.
//!
//! The CSV header is `voter_id,round,n,s_1..s_m,u_1..u_m,action`. Actions are
//! written as 1-based candidate indices and read either as `2` or `q2`.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stratvote_core::{Candidate, Poll, Utility, VoteRecord};
use thiserror::Error;

pub const DATASET_FILE: &str = "dataset.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("row {row}: duplicate round {round} for voter {voter}")]
    DuplicateRound {
        row: usize,
        voter: String,
        round: u32,
    },
    #[error("no records")]
    NoRecords,
    #[error("records mix {0} and {1} candidates")]
    MixedCandidates(usize, usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: String,
    pub seed: Option<u64>,
    pub m: usize,
    pub candidate_labels: Vec<String>,
    pub records: usize,
    pub voters: usize,
    /// Share of sampled polls kept by the strict-order rejection step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poll_acceptance_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

impl Manifest {
    pub fn describe(source: &str, records: &[VoteRecord]) -> Self {
        let m = records.first().map_or(0, |r| r.num_candidates());
        let voters: HashSet<&str> = records.iter().map(|r| r.voter_id.as_str()).collect();
        Self {
            source: source.to_string(),
            seed: None,
            m,
            candidate_labels: (0..m).map(|i| Candidate(i).to_string()).collect(),
            records: records.len(),
            voters: voters.len(),
            poll_acceptance_rate: None,
            generator: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<VoteRecord>,
    pub manifest: Manifest,
}

impl Dataset {
    /// Validates `records` (non-empty, one candidate count, unique rounds
    /// per voter) and describes them.
    pub fn new(records: Vec<VoteRecord>, source: &str) -> Result<Self, DataError> {
        validate(&records)?;
        let manifest = Manifest::describe(source, &records);
        Ok(Self { records, manifest })
    }

    pub fn num_candidates(&self) -> usize {
        self.manifest.m
    }

    /// Records grouped by voter, voters in id order and rounds ascending.
    pub fn by_voter(&self) -> BTreeMap<&str, Vec<&VoteRecord>> {
        let mut out: BTreeMap<&str, Vec<&VoteRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.voter_id.as_str()).or_default().push(r);
        }
        for recs in out.values_mut() {
            recs.sort_by_key(|r| r.round);
        }
        out
    }
}

fn validate(records: &[VoteRecord]) -> Result<(), DataError> {
    let first = records.first().ok_or(DataError::NoRecords)?;
    let m = first.num_candidates();
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        let row = i + 2;
        if r.num_candidates() != m {
            return Err(DataError::MixedCandidates(m, r.num_candidates()));
        }
        r.utilities
            .ensure_matches(&r.poll)
            .map_err(|e| DataError::Row {
                row,
                msg: e.to_string(),
            })?;
        if r.action.0 >= m {
            return Err(DataError::Row {
                row,
                msg: format!("action {} out of range for {m} candidates", r.action.0 + 1),
            });
        }
        if !seen.insert((r.voter_id.as_str(), r.round)) {
            return Err(DataError::DuplicateRound {
                row,
                voter: r.voter_id.clone(),
                round: r.round,
            });
        }
    }
    Ok(())
}

fn header(m: usize) -> Vec<String> {
    let mut h = vec!["voter_id".to_string(), "round".into(), "n".into()];
    h.extend((1..=m).map(|i| format!("s_{i}")));
    h.extend((1..=m).map(|i| format!("u_{i}")));
    h.push("action".into());
    h
}

/// Candidate count implied by a header, checking every column name.
fn parse_header(fields: &csv::StringRecord) -> Result<usize, DataError> {
    let cols: Vec<&str> = fields.iter().map(str::trim).collect();
    if cols.len() < 8 || !(cols.len() - 4).is_multiple_of(2) {
        return Err(DataError::Header(format!(
            "unexpected column count {}",
            cols.len()
        )));
    }
    let m = (cols.len() - 4) / 2;
    let expected = header(m);
    if let Some((got, want)) = cols.iter().zip(&expected).find(|(g, w)| *g != w) {
        return Err(DataError::Header(format!(
            "expected column {want:?}, found {got:?}"
        )));
    }
    Ok(m)
}

/// Reads `2`, `q2` or `Q2` as the second candidate.
pub fn parse_action(text: &str, m: usize) -> Result<Candidate, String> {
    let t = text.trim();
    let digits = t.strip_prefix(['q', 'Q']).unwrap_or(t);
    let k: usize = digits
        .parse()
        .map_err(|_| format!("action {t:?} is not a candidate"))?;
    if k == 0 || k > m {
        return Err(format!("action {t:?} out of range for {m} candidates"));
    }
    Ok(Candidate(k - 1))
}

fn parse_row(fields: &csv::StringRecord, m: usize, row: usize) -> Result<VoteRecord, DataError> {
    let bad = |msg: String| DataError::Row { row, msg };
    if fields.len() != 2 * m + 4 {
        return Err(bad(format!(
            "expected {} fields, found {}",
            2 * m + 4,
            fields.len()
        )));
    }
    let get = |i: usize| fields.get(i).unwrap_or("").trim();
    let int = |i: usize, name: &str| -> Result<u64, DataError> {
        get(i)
            .parse::<u64>()
            .map_err(|_| bad(format!("{name} {:?} is not a non-negative integer", get(i))))
    };
    let voter_id = get(0).to_string();
    if voter_id.is_empty() {
        return Err(bad("empty voter_id".into()));
    }
    let round = u32::try_from(int(1, "round")?).map_err(|_| bad("round too large".into()))?;
    let n = int(2, "n")?;
    let scores = (0..m)
        .map(|i| int(3 + i, &format!("s_{}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let utils = (0..m)
        .map(|i| {
            get(3 + m + i)
                .parse::<f64>()
                .map_err(|_| bad(format!("u_{} {:?} is not a number", i + 1, get(3 + m + i))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let poll = Poll::with_n(scores, n).map_err(|e| bad(e.to_string()))?;
    let utilities = Utility::new(utils).map_err(|e| bad(e.to_string()))?;
    let action = parse_action(get(3 + 2 * m), m).map_err(bad)?;
    Ok(VoteRecord {
        voter_id,
        round,
        poll,
        utilities,
        action,
    })
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<VoteRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let Some(head) = rows.next() else {
        return Err(DataError::NoRecords);
    };
    let m = parse_header(&head?)?;
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, fields) in rows.enumerate() {
        let row = i + 2;
        let rec = parse_row(&fields?, m, row)?;
        if !seen.insert((rec.voter_id.clone(), rec.round)) {
            return Err(DataError::DuplicateRound {
                row,
                voter: rec.voter_id,
                round: rec.round,
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(DataError::NoRecords);
    }
    Ok(records)
}

pub fn write_csv<W: Write>(writer: W, records: &[VoteRecord]) -> Result<(), DataError> {
    let m = records
        .first()
        .ok_or(DataError::NoRecords)?
        .num_candidates();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(m))?;
    for r in records {
        let mut row = vec![
            r.voter_id.clone(),
            r.round.to_string(),
            r.poll.n().to_string(),
        ];
        row.extend(r.poll.scores().iter().map(u64::to_string));
        row.extend(r.utilities.values().iter().map(f64::to_string));
        row.push((r.action.0 + 1).to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| DataError::Csv(e.into()))?;
    Ok(())
}

/// Loads a CSV file, or `dataset.csv` inside a directory. A `manifest.json`
/// next to the CSV is used when present.
pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let csv_path = if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    };
    let file = fs::File::open(&csv_path).map_err(io_err(&csv_path))?;
    let records = read_csv(std::io::BufReader::new(file))?;
    let mut ds = Dataset::new(records, "csv")?;
    let manifest_path = csv_path.with_file_name(MANIFEST_FILE);
    if manifest_path.is_file() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let stored: Manifest = serde_json::from_str(&text)?;
        if stored.m == ds.manifest.m && stored.records == ds.manifest.records {
            ds.manifest = stored;
        }
    }
    Ok(ds)
}

/// Writes `dataset.csv` and `manifest.json` into `dir`, creating it.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(DATASET_FILE);
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_csv(std::io::BufWriter::new(file), &ds.records)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&ds.manifest)?;
    text.push('\n');
    fs::write(&manifest_path, text).map_err(io_err(&manifest_path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_row() {
        let text =
            "voter_id,round,n,s_1,s_2,s_3,u_1,u_2,u_3,action\nv17,3,295,25,70,20,40,30,20,q2\n";
        let recs = read_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.voter_id, "v17");
        assert_eq!(r.round, 3);
        assert_eq!(r.poll.n(), 295);
        assert_eq!(r.poll.scores(), &[25, 70, 20]);
        assert_eq!(r.utilities.values(), &[40.0, 30.0, 20.0]);
        assert_eq!(r.action, Candidate(1));
    }

    #[test]
    fn rejections() {
        assert!(matches!(read_csv("".as_bytes()), Err(DataError::NoRecords)));
        let head = "voter_id,round,n,s_1,s_2,s_3,u_1,u_2,u_3,action\n";
        assert!(matches!(
            read_csv(head.as_bytes()),
            Err(DataError::NoRecords)
        ));
        let text = format!("{head}v1,1,3,1,1,1,10,5,0,q9\n");
        match read_csv(text.as_bytes()) {
            Err(DataError::Row { row: 2, msg }) => assert!(msg.contains("q9")),
            other => panic!("{other:?}"),
        }
        let text = format!("{head}v1,1,3,1,x,1,10,5,0,1\n");
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(DataError::Row { row: 2, .. })
        ));
        let text = format!("{head}v1,1,3,1,1,1,10,5,0,1\nv1,1,3,1,1,1,10,5,0,2\n");
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(DataError::DuplicateRound { row: 3, .. })
        ));
        let text = "voter,round,n,s_1,s_2,s_3,u_1,u_2,u_3,action\n";
        assert!(matches!(
            read_csv(text.as_bytes()),
            Err(DataError::Header(_))
        ));
    }

    #[test]
    fn actions_in_either_form() {
        assert_eq!(parse_action("2", 3), Ok(Candidate(1)));
        assert_eq!(parse_action("Q3", 3), Ok(Candidate(2)));
        assert!(parse_action("0", 3).is_err());
        assert!(parse_action("q", 3).is_err());
    }
}
