use std::fs::File;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::singleton::SingletonRecord;
use super::sweep::PlrRecord;
use crate::analysis::CurvePoint;
use crate::error::{Error, Result};

const PLR_HEADER: [&str; 12] = [
    "algorithm",
    "mac",
    "ka",
    "frames_run",
    "packets_sent",
    "packets_lost",
    "plr",
    "ci_low",
    "ci_high",
    "mean_n_up",
    "mean_n_pa",
    "wall_seconds",
];
const SINGLETON_HEADER: [&str; 9] =
    ["algorithm", "a_total", "a_pilot", "p", "trials", "failures", "fail_prob", "ci_low", "ci_high"];
const ANALYSIS_HEADER: [&str; 7] = ["a_total", "a_pilot", "m", "n_d", "t", "p_e", "p_fail"];

fn write_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    // header written by hand so an empty table still gets one
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

pub fn emit_csv(records: &[PlrRecord], path: impl AsRef<Path>) -> Result<()> {
    write_rows(records, &PLR_HEADER, path.as_ref())
}

pub fn emit_singleton_csv(records: &[SingletonRecord], path: impl AsRef<Path>) -> Result<()> {
    write_rows(records, &SINGLETON_HEADER, path.as_ref())
}

pub fn emit_analysis_csv(curve: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    write_rows(curve, &ANALYSIS_HEADER, path.as_ref())
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<PlrRecord>> {
    read_rows(path.as_ref())
}

pub fn read_singleton_csv(path: impl AsRef<Path>) -> Result<Vec<SingletonRecord>> {
    read_rows(path.as_ref())
}

pub fn read_analysis_csv(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>> {
    read_rows(path.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sis::Algorithm;

    fn record(ka: usize, lost: u64) -> PlrRecord {
        PlrRecord {
            algorithm: Algorithm::Pab,
            mac: "baseline".into(),
            ka,
            frames_run: 10,
            packets_sent: 10 * ka as u64,
            packets_lost: lost,
            plr: lost as f64 / (10 * ka) as f64,
            ci_low: 0.0001234567890123,
            ci_high: 0.1,
            mean_n_up: 1.0 / 3.0,
            mean_n_pa: 2.5,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plr.csv");
        emit_csv(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), PLR_HEADER.join(",") + "\n");
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_constant_width() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plr.csv");
        let recs = vec![record(800, 3), record(1300, 77)];
        emit_csv(&recs, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), recs);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().all(|l| l.split(',').count() == PLR_HEADER.len()));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = emit_csv(&[], "/nonexistent-dir/x/plr.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/plr.csv"));
    }
}
