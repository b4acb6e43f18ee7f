//! CSV artifacts: per-round accuracy, per-round strategy contributions, method comparison.

use std::collections::BTreeMap;
use std::path::Path;

use autoal_core::autoal::RunRecord;

use crate::HarnessError;

pub const ROUNDS_HEADER: [&str; 6] = ["run_id", "method", "seed", "round", "labeled_count", "test_accuracy"];
pub const SCORES_HEADER: [&str; 5] = ["run_id", "seed", "round", "strategy", "normalized_score"];
pub const COMPARE_HEADER: [&str; 6] = ["method", "round", "labeled_count", "mean_accuracy", "std_accuracy", "n_seeds"];

/// Value of the `round` column on the marker row of a diverged run.
pub const FAILED: &str = "failed";

pub fn run_id(record: &RunRecord) -> String {
    format!("{}-seed{}", record.method, record.seed)
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(e.to_string())
}

fn write_rows(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// One row per completed round; a diverged run ends with a `failed` marker row.
pub fn write_rounds(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut rows = Vec::new();
    for r in records {
        let id = run_id(r);
        for row in &r.rounds {
            rows.push(vec![
                id.clone(),
                r.method.to_string(),
                r.seed.to_string(),
                row.round.to_string(),
                row.labeled_count.to_string(),
                fmt(row.test_accuracy),
            ]);
        }
        if r.failure.is_some() {
            rows.push(vec![id, r.method.to_string(), r.seed.to_string(), FAILED.into(), String::new(), String::new()]);
        }
    }
    write_rows(path, &ROUNDS_HEADER, rows)
}

/// Strategy contributions of every AutoAL round; rounds are numbered from 1.
pub fn write_strategy_scores(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let mut rows = Vec::new();
    for r in records {
        let id = run_id(r);
        for (i, round) in r.strategy_scores.iter().enumerate() {
            for (strategy, score) in round {
                rows.push(vec![id.clone(), r.seed.to_string(), (i + 1).to_string(), strategy.to_string(), fmt(*score)]);
            }
        }
    }
    write_rows(path, &SCORES_HEADER, rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub round: usize,
    pub labeled_count: usize,
    pub mean: f64,
    /// Population standard deviation over seeds.
    pub std: f64,
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub method: String,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundEntry {
    pub run_id: String,
    pub method: String,
    pub seed: u64,
    pub round: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
}

/// Mean and population std per (method, round), methods in first-seen order.
pub fn aggregate(entries: &[RoundEntry]) -> Vec<Curve> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), (usize, Vec<f64>)> = BTreeMap::new();
    for e in entries {
        let m = match order.iter().position(|m| *m == e.method) {
            Some(m) => m,
            None => {
                order.push(e.method.clone());
                order.len() - 1
            }
        };
        groups.entry((m, e.round)).or_insert_with(|| (e.labeled_count, Vec::new())).1.push(e.test_accuracy);
    }
    let mut curves: Vec<Curve> = order.into_iter().map(|method| Curve { method, points: Vec::new() }).collect();
    for ((m, round), (labeled_count, accs)) in groups {
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let std = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        curves[m].points.push(CurvePoint { round, labeled_count, mean, std, n_seeds: accs.len() });
    }
    curves
}

pub fn round_entries(records: &[RunRecord]) -> Vec<RoundEntry> {
    records
        .iter()
        .flat_map(|r| {
            r.rounds.iter().map(move |row| RoundEntry {
                run_id: run_id(r),
                method: r.method.to_string(),
                seed: r.seed,
                round: row.round,
                labeled_count: row.labeled_count,
                test_accuracy: row.test_accuracy,
            })
        })
        .collect()
}

pub fn write_compare(path: &Path, curves: &[Curve]) -> Result<(), HarnessError> {
    let rows = curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                vec![
                    c.method.clone(),
                    p.round.to_string(),
                    p.labeled_count.to_string(),
                    fmt(p.mean),
                    fmt(p.std),
                    p.n_seeds.to_string(),
                ]
            })
        })
        .collect();
    write_rows(path, &COMPARE_HEADER, rows)
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(csv_err)?;
    Ok((header, rows))
}

fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, path: &Path) -> Result<T, HarnessError> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| HarnessError::Config(format!("{}: bad value in column {} of {:?}", path.display(), i + 1, row)))
}

fn check_header(path: &Path, header: &[String], expected: &[&str]) -> Result<(), HarnessError> {
    if header.iter().map(String::as_str).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{}: expected header {}", path.display(), expected.join(","))))
    }
}

/// Reads a rounds file, skipping `failed` marker rows.
pub fn read_rounds(path: &Path) -> Result<Vec<RoundEntry>, HarnessError> {
    let (header, rows) = read_table(path)?;
    check_header(path, &header, &ROUNDS_HEADER)?;
    rows.iter()
        .filter(|r| r.get(3) != Some(FAILED))
        .map(|r| {
            Ok(RoundEntry {
                run_id: r[0].to_string(),
                method: r[1].to_string(),
                seed: field(r, 2, path)?,
                round: field(r, 3, path)?,
                labeled_count: field(r, 4, path)?,
                test_accuracy: field(r, 5, path)?,
            })
        })
        .collect()
}

/// Learning curves from either a compare file or a rounds file.
pub fn read_curves(path: &Path) -> Result<Vec<Curve>, HarnessError> {
    let (header, rows) = read_table(path)?;
    if header.first().map(String::as_str) == Some("run_id") {
        return Ok(aggregate(&read_rounds(path)?));
    }
    check_header(path, &header, &COMPARE_HEADER)?;
    let mut curves: Vec<Curve> = Vec::new();
    for r in &rows {
        let point = CurvePoint {
            round: field(r, 1, path)?,
            labeled_count: field(r, 2, path)?,
            mean: field(r, 3, path)?,
            std: field(r, 4, path)?,
            n_seeds: field(r, 5, path)?,
        };
        match curves.iter_mut().find(|c| c.method == r[0]) {
            Some(c) => c.points.push(point),
            None => curves.push(Curve { method: r[0].to_string(), points: vec![point] }),
        }
    }
    Ok(curves)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub run_id: String,
    pub seed: u64,
    pub round: usize,
    pub strategy: String,
    pub score: f64,
}

pub fn read_strategy_scores(path: &Path) -> Result<Vec<ScoreEntry>, HarnessError> {
    let (header, rows) = read_table(path)?;
    check_header(path, &header, &SCORES_HEADER)?;
    rows.iter()
        .map(|r| {
            Ok(ScoreEntry {
                run_id: r[0].to_string(),
                seed: field(r, 1, path)?,
                round: field(r, 2, path)?,
                strategy: r[3].to_string(),
                score: field(r, 4, path)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(method: &str, seed: u64, round: usize, acc: f64) -> RoundEntry {
        RoundEntry {
            run_id: format!("{method}-seed{seed}"),
            method: method.into(),
            seed,
            round,
            labeled_count: 40 + 50 * round,
            test_accuracy: acc,
        }
    }

    #[test]
    fn aggregate_uses_population_std() {
        let e = vec![entry("random", 0, 0, 0.5), entry("random", 1, 0, 0.7), entry("entropy", 0, 0, 0.9)];
        let c = aggregate(&e);
        assert_eq!(c[0].method, "random");
        assert!((c[0].points[0].mean - 0.6).abs() < 1e-12);
        assert!((c[0].points[0].std - 0.1).abs() < 1e-12);
        assert_eq!(c[0].points[0].n_seeds, 2);
        assert_eq!(c[1].points[0].std, 0.0);
    }

    #[test]
    fn compare_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("compare.csv");
        let curves = aggregate(&[entry("a", 0, 0, 0.25), entry("a", 0, 1, 0.5), entry("b", 0, 0, 0.75)]);
        write_compare(&path, &curves).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,round,labeled_count,mean_accuracy,std_accuracy,n_seeds\n"));
        assert_eq!(read_curves(&path).unwrap(), curves);
    }
}
