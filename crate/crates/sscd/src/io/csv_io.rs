//! CSV sidecar formats.
//!
//! Fixed headers, floats written in Rust's shortest round-trip form, so
//! identical inputs always produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::descriptor::{Matrix, SpectrumReport};
use crate::error::{Error, Result};
use crate::eval::{GroundTruth, Histogram, MatchCandidate, PrPoint};
use crate::toy::TrainHistory;

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `query_id,ref_id,score`
pub fn write_candidates<P: AsRef<Path>>(path: P, candidates: &[MatchCandidate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["query_id", "ref_id", "score"])?;
    for c in candidates {
        w.write_record([&c.query_id, &c.ref_id, &format!("{}", c.score)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_candidates<P: AsRef<Path>>(path: P) -> Result<Vec<MatchCandidate>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    expect_headers(path, &mut r, &["query_id", "ref_id", "score"])?;
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let score: f64 = record
            .get(2)
            .unwrap_or_default()
            .parse()
            .map_err(|_| data_error(path, format!("bad score {:?}", record.get(2))))?;
        if !score.is_finite() {
            return Err(data_error(path, format!("non-finite score {score}")));
        }
        out.push(MatchCandidate {
            query_id: field(path, &record, 0)?,
            ref_id: field(path, &record, 1)?,
            score,
        });
    }
    Ok(out)
}

/// `query_id,ref_id`
pub fn write_ground_truth<P: AsRef<Path>>(path: P, gt: &GroundTruth) -> Result<()> {
    let mut pairs: Vec<(String, String)> = gt
        .pairs()
        .map(|(q, r)| (q.to_string(), r.to_string()))
        .collect();
    pairs.sort();
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["query_id", "ref_id"])?;
    for (q, r) in pairs {
        w.write_record([&q, &r])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ground_truth<P: AsRef<Path>>(path: P) -> Result<GroundTruth> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    expect_headers(path, &mut r, &["query_id", "ref_id"])?;
    let mut pairs = Vec::new();
    for record in r.records() {
        let record = record?;
        pairs.push((field(path, &record, 0)?, field(path, &record, 1)?));
    }
    Ok(GroundTruth::new(pairs))
}

/// `query_id,bias`
pub fn write_bias_table<P: AsRef<Path>>(path: P, ids: &[String], biases: &[f64]) -> Result<()> {
    if ids.len() != biases.len() {
        return Err(Error::LengthMismatch {
            what: "biases",
            expected: ids.len(),
            actual: biases.len(),
        });
    }
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["query_id", "bias"])?;
    for (id, b) in ids.iter().zip(biases) {
        w.write_record([id, &format!("{b}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `epoch,loss_infonce,loss_koleo,loss_total,effective_rank,toy_uap`
pub fn write_history<P: AsRef<Path>>(path: P, history: &TrainHistory) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record([
        "epoch",
        "loss_infonce",
        "loss_koleo",
        "loss_total",
        "effective_rank",
        "toy_uap",
    ])?;
    for e in &history.epochs {
        w.write_record([
            &format!("{}", e.epoch),
            &format!("{}", e.loss_infonce),
            &format!("{}", e.loss_koleo),
            &format!("{}", e.loss_total),
            &format!("{}", e.effective_rank),
            &format!("{}", e.toy_uap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `recall,precision`
pub fn write_pr_points<P: AsRef<Path>>(path: P, points: &[PrPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["recall", "precision"])?;
    for p in points {
        w.write_record([&format!("{}", p.recall), &format!("{}", p.precision)])?;
    }
    w.flush()?;
    Ok(())
}

/// `kind,bin_lo,bin_hi,count` with kind in {positive, negative}
pub fn write_histograms<P: AsRef<Path>>(
    path: P,
    positive: &Histogram,
    negative: &Histogram,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["kind", "bin_lo", "bin_hi", "count"])?;
    for (kind, h) in [("positive", positive), ("negative", negative)] {
        for (i, &count) in h.counts.iter().enumerate() {
            w.write_record([
                kind,
                &format!("{}", h.edges[i]),
                &format!("{}", h.edges[i + 1]),
                &format!("{count}"),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `index,principal_value`
pub fn write_spectrum<P: AsRef<Path>>(path: P, report: &SpectrumReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["index", "principal_value"])?;
    for (i, v) in report.principal_values.iter().enumerate() {
        w.write_record([&format!("{i}"), &format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Heatmap as a plain matrix: one CSV row per grid row, no header.
pub fn write_heatmap<P: AsRef<Path>>(path: P, heatmap: &Matrix) -> Result<()> {
    let mut w = open_writer(path.as_ref())?;
    for row in heatmap.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// `n,n_end,beta,micro_ap` for the score-normalization sweep.
pub fn write_sweep_results<P: AsRef<Path>>(
    path: P,
    rows: &[(usize, usize, f64, f64)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(open_writer(path.as_ref())?);
    w.write_record(["n", "n_end", "beta", "micro_ap"])?;
    for (n, n_end, beta, uap) in rows {
        w.write_record([
            &format!("{n}"),
            &format!("{n_end}"),
            &format!("{beta}"),
            &format!("{uap}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn expect_headers(
    path: &Path,
    reader: &mut csv::Reader<File>,
    expected: &[&str],
) -> Result<()> {
    let headers = reader.headers()?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(data_error(
            path,
            format!("expected header {expected:?}, got {got:?}"),
        ));
    }
    Ok(())
}

fn field(path: &Path, record: &csv::StringRecord, idx: usize) -> Result<String> {
    record
        .get(idx)
        .map(|s| s.to_string())
        .ok_or_else(|| data_error(path, format!("missing column {idx}")))
}

fn data_error(path: &Path, message: String) -> Error {
    Error::Format {
        path: path.display().to_string(),
        offset: 0,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidates_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let candidates = vec![
            MatchCandidate {
                query_id: "q1".into(),
                ref_id: "r1".into(),
                score: 0.123456789012345,
            },
            MatchCandidate {
                query_id: "q2".into(),
                ref_id: "r,weird".into(),
                score: -4.0,
            },
        ];
        write_candidates(&path, &candidates).unwrap();
        let loaded = read_candidates(&path).unwrap();
        assert_eq!(loaded, candidates);
    }

    #[test]
    fn ground_truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gt.csv");
        let gt = GroundTruth::new(vec![
            ("q1".to_string(), "r1".to_string()),
            ("q2".to_string(), "r5".to_string()),
        ]);
        write_ground_truth(&path, &gt).unwrap();
        let loaded = read_ground_truth(&path).unwrap();
        assert_eq!(loaded.total_positives(), 2);
        assert!(loaded.contains("q1", "r1"));
        assert!(loaded.contains("q2", "r5"));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b,c\n1,2,3\n").unwrap();
        let err = read_candidates(&path).unwrap_err();
        assert!(err.to_string().contains("expected header"), "{err}");
    }
}
