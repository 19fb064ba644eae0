//! Loading datasets from a manifest plus per-subject timeseries files,
//! and writing datasets back out in the same format.

use std::path::{Path, PathBuf};

use crate::datasets::{zscore_columns, Subject, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const MANIFEST_HEADER: [&str; 4] = ["subject_id", "label", "site", "path"];

/// Loads a dataset from a manifest CSV (`subject_id,label,site,path`,
/// paths relative to the manifest's directory). Every subject's ROI
/// columns are z-scored over time; constant ROIs become zero columns.
pub fn load_dataset(manifest_path: &Path) -> Result<TimeSeriesDataset> {
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(manifest_path)
        .map_err(|e| Error::Ingest(format!("manifest {}: {e}", manifest_path.display())))?;
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Ingest(format!("manifest {}: {e}", manifest_path.display())))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != MANIFEST_HEADER {
            return Err(Error::Schema(format!(
                "manifest header must be {:?}, got {:?}",
                MANIFEST_HEADER.join(","),
                got.join(",")
            )));
        }
    }

    let mut subjects = Vec::new();
    let mut expected_rois: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest(format!("manifest row: {e}")))?;
        if record.len() != 4 {
            return Err(Error::Schema(format!("manifest row has {} fields, want 4", record.len())));
        }
        let id = record[0].to_string();
        let label: u8 = record[1]
            .parse()
            .ok()
            .filter(|l| *l <= 1)
            .ok_or_else(|| Error::Schema(format!("subject {id}: label {:?} not in {{0,1}}", &record[1])))?;
        let site = record[2].to_string();
        let ts_path = dir.join(&record[3]);
        let raw = read_matrix_csv(&ts_path)
            .map_err(|e| annotate_subject(e, &id, &ts_path))?;
        if let Some(n) = expected_rois {
            if raw.cols() != n {
                return Err(Error::Schema(format!(
                    "subject {id}: {} columns, peers have {n}",
                    raw.cols()
                )));
            }
        } else {
            expected_rois = Some(raw.cols());
        }
        let timecourses = zscore_columns(&raw)?;
        subjects.push(Subject { id, label, site, timecourses });
    }
    TimeSeriesDataset::new(subjects, &manifest_path.display().to_string(), None)
}

fn annotate_subject(e: Error, id: &str, path: &Path) -> Error {
    match e {
        Error::Ingest(m) => Error::Ingest(format!("subject {id} ({}): {m}", path.display())),
        Error::Data(m) => Error::Data(format!("subject {id} ({}): {m}", path.display())),
        Error::Schema(m) => Error::Schema(format!("subject {id} ({}): {m}", path.display())),
        other => other,
    }
}

/// Headerless CSV of floats -> rank-2 tensor. Ragged rows are schema
/// errors; unparsable or non-finite cells are data errors.
pub fn read_matrix_csv(path: &Path) -> Result<Tensor> {
    if !path.exists() {
        return Err(Error::Ingest("file not found".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Ingest(e.to_string()))?;
    let mut data = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Schema(format!("row {}: {e}", rows + 1)))?;
        if let Some(c) = cols {
            if record.len() != c {
                return Err(Error::Schema(format!(
                    "row {} has {} columns, row 1 has {c}",
                    rows + 1,
                    record.len()
                )));
            }
        } else {
            cols = Some(record.len());
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("row {}: unparsable value {field:?}", rows + 1)))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {}: non-finite value {field:?}", rows + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Data("empty file".into()))?;
    Tensor::new(vec![rows, cols], data)
}

/// Writes a rank-2 tensor as headerless CSV (shortest round-trip float
/// formatting, LF line endings).
pub fn write_matrix_csv(path: &Path, t: &Tensor) -> Result<()> {
    if t.rank() != 2 {
        return Err(Error::Dimension("write_matrix_csv expects rank-2".into()));
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..t.rows() {
        let row: Vec<String> =
            (0..t.cols()).map(|j| format_float(t.at2(i, j))).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Shortest representation that parses back to the same f64.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Writes `manifest.csv` plus one `ts_<id>.csv` per subject into `dir`.
/// Returns the manifest path.
pub fn write_dataset(dir: &Path, dataset: &TimeSeriesDataset) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let manifest = dir.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest)?;
    w.write_record(MANIFEST_HEADER)?;
    for s in dataset.subjects() {
        let file = format!("ts_{}.csv", s.id);
        write_matrix_csv(&dir.join(&file), &s.timecourses)?;
        w.write_record([s.id.as_str(), &s.label.to_string(), s.site.as_str(), &file])?;
    }
    w.flush()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Stream;
    use rand::Rng;

    fn write_file(path: &Path, contents: &str) {
        std::fs::write(path, contents).unwrap();
    }

    #[test]
    fn loads_two_subject_dataset() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "subject_id,label,site,path\ns1,0,a,s1.csv\ns2,1,a,s2.csv\n",
        );
        let ten_rows = |off: f64| {
            (0..10)
                .map(|t| format!("{},{},{}", t as f64 + off, (t * t) as f64, (10 - t) as f64))
                .collect::<Vec<_>>()
                .join("\n")
        };
        write_file(&dir.path().join("s1.csv"), &ten_rows(0.0));
        write_file(&dir.path().join("s2.csv"), &ten_rows(0.5));
        let ds = load_dataset(&dir.path().join("manifest.csv")).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_rois(), 3);
        assert_eq!(ds.subjects()[0].timepoints(), 10);
    }

    #[test]
    fn missing_file_names_subject() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "subject_id,label,site,path\nsub42,0,a,gone.csv\nsub43,1,a,gone2.csv\n",
        );
        let err = load_dataset(&dir.path().join("manifest.csv")).unwrap_err();
        match err {
            Error::Ingest(m) => assert!(m.contains("sub42"), "{m}"),
            other => panic!("expected ingest error, got {other:?}"),
        }
    }

    #[test]
    fn column_count_mismatch_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "subject_id,label,site,path\ns1,0,a,s1.csv\ns2,1,a,s2.csv\n",
        );
        write_file(&dir.path().join("s1.csv"), "1,2,3\n4,5,6\n7,8,9\n");
        write_file(&dir.path().join("s2.csv"), "1,2,3,4\n5,6,7,8\n9,1,2,3\n");
        assert!(matches!(
            load_dataset(&dir.path().join("manifest.csv")),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn nan_cell_is_data_error() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "subject_id,label,site,path\ns1,0,a,s1.csv\ns2,1,a,s2.csv\n",
        );
        write_file(&dir.path().join("s1.csv"), "1,2\nNaN,4\n5,6\n");
        write_file(&dir.path().join("s2.csv"), "1,2\n3,4\n5,6\n");
        assert!(matches!(
            load_dataset(&dir.path().join("manifest.csv")),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn constant_roi_loads_as_zero_column() {
        let dir = tempfile::tempdir().unwrap();
        write_file(
            &dir.path().join("manifest.csv"),
            "subject_id,label,site,path\ns1,0,a,s1.csv\ns2,1,a,s2.csv\n",
        );
        write_file(&dir.path().join("s1.csv"), "5,1\n5,2\n5,3\n5,4\n");
        write_file(&dir.path().join("s2.csv"), "1,1\n2,2\n3,3\n4,4\n");
        let ds = load_dataset(&dir.path().join("manifest.csv")).unwrap();
        let tc = &ds.subjects()[0].timecourses;
        for t in 0..4 {
            assert_eq!(tc.at2(t, 0), 0.0);
        }
    }

    #[test]
    fn matrix_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Stream::new(11);
        let t = Tensor::new(
            vec![7, 3],
            (0..21).map(|_| s.random_range(-10.0..10.0)).collect(),
        )
        .unwrap();
        let p = dir.path().join("m.csv");
        write_matrix_csv(&p, &t).unwrap();
        let back = read_matrix_csv(&p).unwrap();
        assert_eq!(t.values(), back.values());
    }
}
