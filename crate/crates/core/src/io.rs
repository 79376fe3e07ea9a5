//! File formats: projector sets and states as JSON, measurement records as CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bases::{BasisMetadata, ProjectorSet};
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, outer, ComplexEntry, C64};
use crate::states::MeasurementRecord;

/// Largest entry-wise deviation from `v v^†` accepted on import.
pub const RANK_ONE_TOL: f64 = 1e-8;

pub const RECORDS_HEADER: [&str; 3] = ["lambda", "frequency", "epsilon"];

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectorSetFile {
    dim: usize,
    /// class -> projector -> matrix rows
    classes: Vec<Vec<Vec<Vec<ComplexEntry>>>>,
    metadata: BasisMetadata,
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn projector_set_to_json(ps: &ProjectorSet) -> Result<String> {
    let file = ProjectorSetFile {
        dim: ps.dim(),
        classes: ps
            .classes()
            .iter()
            .map(|class| class.iter().map(|v| matrix_to_rows(&outer(v))).collect())
            .collect(),
        metadata: ps.metadata().clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses a projector set, recovering each vector from the column of its
/// projector with the largest diagonal entry.
pub fn projector_set_from_json(text: &str) -> Result<ProjectorSet> {
    let file: ProjectorSetFile = serde_json::from_str(text)?;
    let d = file.dim;
    let mut classes = Vec::with_capacity(file.classes.len());
    for (l, class) in file.classes.iter().enumerate() {
        let mut vectors = Vec::with_capacity(class.len());
        for (k, rows) in class.iter().enumerate() {
            let p = matrix_from_rows(rows)?;
            if p.nrows() != d || p.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.nrows(),
                });
            }
            let j = (0..d)
                .max_by(|&a, &b| p[(a, a)].re.total_cmp(&p[(b, b)].re))
                .unwrap_or(0);
            let pivot = p[(j, j)].re;
            if pivot <= 0.0 {
                return Err(Error::Parse(format!("projector {k} of class {l} is zero")));
            }
            let v = p.column(j) / C64::new(pivot.sqrt(), 0.0);
            if (outer(&v) - &p).camax() > RANK_ONE_TOL {
                return Err(Error::Parse(format!(
                    "projector {k} of class {l} is not rank one"
                )));
            }
            vectors.push(v);
        }
        classes.push(vectors);
    }
    ProjectorSet::new(d, classes, file.metadata)
}

pub fn write_projector_set(path: &Path, ps: &ProjectorSet) -> Result<()> {
    write_text(path, &projector_set_to_json(ps)?)
}

pub fn read_projector_set(path: &Path) -> Result<ProjectorSet> {
    projector_set_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_records<W: Write>(out: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER).map_err(csv_error)?;
    for r in records {
        w.write_record([
            r.projector_index.to_string(),
            format_float(r.frequency),
            format_float(r.epsilon),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<MeasurementRecord>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = rd.headers().map_err(csv_error)?;
    if header.iter().ne(RECORDS_HEADER) {
        return Err(Error::Parse(format!(
            "records header must be `{}`",
            RECORDS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let bad = |what: &str| {
            Error::Parse(format!(
                "record {}: invalid {what} `{}`",
                line + 1,
                row.as_slice()
            ))
        };
        let projector_index = field(0).parse().map_err(|_| bad("lambda"))?;
        let frequency: f64 = field(1).parse().map_err(|_| bad("frequency"))?;
        let epsilon: f64 = field(2).parse().map_err(|_| bad("epsilon"))?;
        if !frequency.is_finite() || !epsilon.is_finite() {
            return Err(bad("value"));
        }
        out.push(MeasurementRecord {
            projector_index,
            frequency,
            epsilon,
        });
    }
    Ok(out)
}

pub fn write_records_file(path: &Path, records: &[MeasurementRecord]) -> Result<()> {
    write_records(BufWriter::new(File::create(path)?), records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<MeasurementRecord>> {
    read_records(BufReader::new(File::open(path)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::{gell_mann_observables, mub, observables_to_projectors};
    use crate::linalg::DensityMatrix;
    use crate::states::random_density;

    #[test]
    fn projector_set_round_trip() {
        for ps in [
            mub(4).unwrap(),
            observables_to_projectors(&gell_mann_observables(3).unwrap()).unwrap(),
        ] {
            let back = projector_set_from_json(&projector_set_to_json(&ps).unwrap()).unwrap();
            assert_eq!(back.len(), ps.len());
            assert_eq!(back.metadata(), ps.metadata());
            for l in 0..ps.len() {
                assert!((back.projector(l) - ps.projector(l)).camax() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_rank_two_projector() {
        let ps = mub(2).unwrap();
        let mut v: serde_json::Value =
            serde_json::from_str(&projector_set_to_json(&ps).unwrap()).unwrap();
        v["classes"][0][0][1][1]["re"] = 1.0.into();
        assert!(matches!(
            projector_set_from_json(&v.to_string()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn records_round_trip_exactly() {
        let records = vec![
            MeasurementRecord {
                projector_index: 0,
                frequency: 1.0 / 3.0,
                epsilon: 0.1,
            },
            MeasurementRecord {
                projector_index: 7,
                frequency: 0.0,
                epsilon: 0.0,
            },
            MeasurementRecord {
                projector_index: 3,
                frequency: 2.5e-17,
                epsilon: 1e-300,
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("lambda,frequency,epsilon\n0,3.3333333333333331e-1,"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn malformed_records() {
        assert!(read_records("lambda,frequency\n0,0.5\n".as_bytes()).is_err());
        assert!(read_records("lambda,frequency,epsilon\n-1,0.5,0\n".as_bytes()).is_err());
        assert!(read_records("lambda,frequency,epsilon\n0,abc,0\n".as_bytes()).is_err());
        assert!(read_records("lambda,frequency,epsilon\n0,NaN,0\n".as_bytes()).is_err());
    }

    #[test]
    fn state_json_round_trip() {
        let rho = random_density(3, 2, 9).unwrap();
        let text = serde_json::to_string(&rho).unwrap();
        let back: DensityMatrix = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rho);
    }
}
