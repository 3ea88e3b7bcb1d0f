//! Flat CSV tables and JSON files for evaluation reports.

use std::fs;
use std::path::{Path, PathBuf};

use stratvote_core::{Eta, Model};

use crate::data::DataError;
use crate::eval::{EvaluationReport, Mode, VoterCategory};

/// Voters with at least this many records enter the f-measure histogram.
pub const HISTOGRAM_MIN_RECORDS: usize = 11;
pub const HISTOGRAM_BINS: usize = 10;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn fmt_f(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

pub fn report_file_name(r: &EvaluationReport) -> String {
    format!("report_{}_{}.json", r.family.name(), r.mode.name())
}

fn table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn slice_rows(reports: &[&EvaluationReport], scenarios: bool) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for r in reports {
        let slices = if scenarios {
            &r.scenarios
        } else {
            &r.poll_sizes
        };
        for s in slices.iter().chain(std::iter::once(&r.overall)) {
            rows.push(vec![
                r.family.name().to_string(),
                r.mode.name().to_string(),
                s.label.clone(),
                s.samples.to_string(),
                fmt_f(s.weighted_f()),
            ]);
        }
    }
    rows
}

fn parameter_columns(m: &Model) -> [String; 6] {
    let mut c: [String; 6] = Default::default();
    match *m {
        Model::Pragmatist { k } => c[0] = k.to_string(),
        Model::LocalDominance { r } | Model::LeaderBiasedLd { r } => c[1] = r.to_string(),
        Model::CalculusOfVoting { eta } => {
            c[2] = match eta {
                Eta::Fixed(e) => e.to_string(),
                Eta::PollSize => "n".to_string(),
            }
        }
        Model::Tmg { voter_type } => c[3] = voter_type.name().to_string(),
        Model::AttainabilityUtility { alpha, beta } => {
            c[4] = alpha.to_string();
            c[5] = beta.to_string();
        }
        _ => {}
    }
    c
}

/// Writes every table for `reports` into `dir`, plus one JSON file per report.
/// Rows follow the order of `reports`.
pub fn write_reports(dir: &Path, reports: &[EvaluationReport]) -> Result<Vec<PathBuf>, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for r in reports {
        let path = dir.join(report_file_name(r));
        let mut text = serde_json::to_string_pretty(r)?;
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    let by_mode = |mode: Mode| {
        reports
            .iter()
            .filter(move |r| r.mode == mode)
            .collect::<Vec<_>>()
    };
    let slice_head = ["family", "mode", "slice", "samples", "f_measure"];
    let mut out = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<(), DataError> {
        let path = dir.join(name);
        table(&path, header, rows)?;
        written.push(path);
        Ok(())
    };
    let loo = by_mode(Mode::Loo);
    if !loo.is_empty() {
        out("scenarios.csv", &slice_head, slice_rows(&loo, true))?;
    }
    let upper = by_mode(Mode::Upper);
    if !upper.is_empty() {
        out("upper_bounds.csv", &slice_head, slice_rows(&upper, true))?;
    }
    let all: Vec<&EvaluationReport> = reports.iter().collect();
    out("poll_sizes.csv", &slice_head, slice_rows(&all, false))?;

    let mut voter_rows = Vec::new();
    let mut hist_rows = Vec::new();
    let mut error_rows = Vec::new();
    let mut confusion_rows = Vec::new();
    let mut param_rows = Vec::new();
    let mut param_families = Vec::new();
    for r in reports {
        let (fam, mode) = (r.family.name().to_string(), r.mode.name().to_string());
        for v in &r.per_voter {
            voter_rows.push(vec![
                fam.clone(),
                mode.clone(),
                v.voter_id.clone(),
                v.records.to_string(),
                v.category.name().to_string(),
                format!("{:.6}", v.f_measure),
                format!("{:.6}", v.accuracy),
            ]);
        }
        for cat in [
            VoterCategory::Unjustified,
            VoterCategory::Inconsistent,
            VoterCategory::Other,
        ] {
            let mut bins = [0u64; HISTOGRAM_BINS];
            for v in r
                .per_voter
                .iter()
                .filter(|v| v.category == cat && v.records >= HISTOGRAM_MIN_RECORDS)
            {
                let b = ((v.f_measure * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
                bins[b] += 1;
            }
            for (b, count) in bins.iter().enumerate() {
                hist_rows.push(vec![
                    fam.clone(),
                    mode.clone(),
                    cat.name().to_string(),
                    format!("{:.1}", b as f64 / HISTOGRAM_BINS as f64),
                    format!("{:.1}", (b + 1) as f64 / HISTOGRAM_BINS as f64),
                    count.to_string(),
                ]);
            }
        }
        for e in &r.errors {
            error_rows.push(vec![
                fam.clone(),
                mode.clone(),
                e.scenario.clone(),
                e.correct.to_string(),
                e.unjustified.to_string(),
                e.inconsistent.to_string(),
                e.unexplained.to_string(),
            ]);
        }
        for s in std::iter::once(&r.overall)
            .chain(&r.scenarios)
            .chain(&r.poll_sizes)
        {
            let c = &s.confusion;
            for a in 0..c.size() {
                for p in 0..c.size() {
                    confusion_rows.push(vec![
                        fam.clone(),
                        mode.clone(),
                        s.label.clone(),
                        a.to_string(),
                        p.to_string(),
                        c.get(a, p).to_string(),
                    ]);
                }
            }
        }
        // fitted on all records in either mode, so listed once per family
        if !param_families.contains(&r.family) {
            param_families.push(r.family);
            for p in &r.parameters {
                let mut row = vec![fam.clone(), p.voter_id.clone(), p.bucket.clone()];
                row.extend(parameter_columns(&p.model));
                param_rows.push(row);
            }
        }
    }
    out(
        "per_voter_f.csv",
        &[
            "family",
            "mode",
            "voter_id",
            "records",
            "category",
            "f_measure",
            "accuracy",
        ],
        voter_rows,
    )?;
    out(
        "per_voter_f_histogram.csv",
        &[
            "family", "mode", "category", "bin_low", "bin_high", "voters",
        ],
        hist_rows,
    )?;
    out(
        "error_breakdown.csv",
        &[
            "family",
            "mode",
            "scenario",
            "correct",
            "unjustified",
            "inconsistent",
            "unexplained",
        ],
        error_rows,
    )?;
    out(
        "confusion.csv",
        &[
            "family",
            "mode",
            "slice",
            "actual_rank",
            "predicted_rank",
            "count",
        ],
        confusion_rows,
    )?;
    out(
        "parameters.csv",
        &[
            "family", "voter_id", "bucket", "k", "r", "eta", "type", "alpha", "beta",
        ],
        param_rows,
    )?;
    Ok(written)
}

/// Reads every `report_*.json` in `dir`, sorted by file name.
pub fn read_reports(dir: &Path) -> Result<Vec<EvaluationReport>, DataError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
