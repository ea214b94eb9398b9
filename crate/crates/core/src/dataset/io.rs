//! On-disk dataset formats.
//!
//! Delimited text: header `id,<f0..f{d-1}>,label`, label values `benign` or
//! `family:<name>`.
//!
//! Binary: magic `BCB1`, u64 n, u64 d, `n*d` row-major f64 features, then a
//! label block with one record per row: u32 id length, id bytes (UTF-8),
//! u8 tag (0 benign, 1 family) and, for families, u32 name length + name bytes.
//! All integers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, FeatureSchema, Label};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const BINARY_MAGIC: &[u8; 4] = b"BCB1";

/// Which columns of a delimited file carry the ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumns {
    /// One column holding `benign` or `family:<name>`.
    Tagged { column: String },
    /// Ember-style pair: a 0/1 malicious flag and a family-name column.
    FlagAndFamily { flag: String, family: String },
}

impl Default for LabelColumns {
    fn default() -> Self {
        LabelColumns::Tagged {
            column: "label".to_string(),
        }
    }
}

impl LabelColumns {
    fn names(&self) -> Vec<&str> {
        match self {
            LabelColumns::Tagged { column } => vec![column],
            LabelColumns::FlagAndFamily { flag, family } => vec![flag, family],
        }
    }
}

/// Loads either format (binary is detected by its magic) and validates it
/// against `schema`. The first column of a text file is the sample id.
pub fn load_dataset<T: Scalar>(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    labels: &LabelColumns,
) -> Result<Dataset<T>, DatasetError> {
    let path = path.as_ref();
    if crate::blob::peek_magic(path)?.as_ref() == Some(BINARY_MAGIC) {
        let ds = read_binary::<T>(path)?;
        if ds.d() != schema.total_columns() {
            return Err(DatasetError::SchemaMismatch {
                expected: schema.total_columns(),
                found: ds.d(),
            });
        }
        return Ok(ds);
    }
    read_text(path, schema, labels)
}

fn read_text<T: Scalar>(path: &Path, schema: &FeatureSchema, spec: &LabelColumns) -> Result<Dataset<T>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(File::open(path)?));
    let header = rdr.headers()?.clone();
    let label_names = spec.names();
    let mut label_pos = Vec::with_capacity(label_names.len());
    for name in &label_names {
        match header.iter().position(|h| h == *name) {
            Some(p) if p > 0 => label_pos.push(p),
            _ => {
                return Err(DatasetError::MalformedRow {
                    line: 1,
                    id: None,
                    reason: format!("header lacks label column {name:?}"),
                })
            }
        }
    }
    let feature_pos: Vec<usize> = (1..header.len()).filter(|p| !label_pos.contains(p)).collect();
    if feature_pos.len() != schema.total_columns() {
        return Err(DatasetError::SchemaMismatch {
            expected: schema.total_columns(),
            found: feature_pos.len(),
        });
    }

    let d = feature_pos.len();
    let mut data: Vec<T> = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(DatasetError::MalformedRow {
                line,
                id: rec.get(0).map(str::to_string),
                reason: format!("{} fields, header has {}", rec.len(), header.len()),
            });
        }
        let id = rec[0].to_string();
        let malformed = |reason: String| DatasetError::MalformedRow {
            line,
            id: Some(id.clone()),
            reason,
        };
        for (j, &p) in feature_pos.iter().enumerate() {
            let v: f64 = rec[p]
                .trim()
                .parse()
                .map_err(|e| malformed(format!("feature {j}: {e}")))?;
            if !v.is_finite() {
                return Err(malformed(format!("non-finite value in feature {j}")));
            }
            data.push(T::of(v));
        }
        let label = match spec {
            LabelColumns::Tagged { .. } => rec[label_pos[0]].parse::<Label>().map_err(malformed)?,
            LabelColumns::FlagAndFamily { .. } => match rec[label_pos[0]].trim() {
                "0" => Label::Benign,
                "1" => {
                    let fam = rec[label_pos[1]].trim();
                    if fam.is_empty() {
                        return Err(malformed("malicious row without a family".into()));
                    }
                    Label::family(fam)
                }
                other => return Err(malformed(format!("malicious flag {other:?} is not 0 or 1"))),
            },
        };
        ids.push(id);
        labels.push(label);
    }
    if ids.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Dataset::new(Matrix::from_vec(ids.len(), d, data), labels, ids)
}

pub fn write_text<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = Vec::with_capacity(ds.d() + 2);
    header.push("id".to_string());
    header.extend((0..ds.d()).map(|j| format!("f{j}")));
    header.push("label".to_string());
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(ds.d() + 2);
    for i in 0..ds.n() {
        rec.clear();
        rec.push(ds.ids()[i].clone());
        rec.extend(ds.features().row(i).iter().map(|v| format!("{}", v.as_f64())));
        rec.push(ds.labels()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_binary<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(ds.n() as u64).to_le_bytes())?;
    w.write_all(&(ds.d() as u64).to_le_bytes())?;
    for v in ds.features().as_slice() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    for (id, label) in ds.ids().iter().zip(ds.labels()) {
        write_str(&mut w, id)?;
        match label {
            Label::Benign => w.write_all(&[0])?,
            Label::Family(name) => {
                w.write_all(&[1])?;
                write_str(&mut w, name)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>, DatasetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(DatasetError::MalformedRow {
            line: 0,
            id: None,
            reason: "missing BCB1 magic".into(),
        });
    }
    let n = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    if n == 0 {
        return Err(DatasetError::EmptyDataset);
    }
    let total = n
        .checked_mul(d)
        .ok_or_else(|| DatasetError::Inconsistent(format!("n={n} d={d} overflows")))?;
    let mut data = Vec::with_capacity(total);
    let mut buf = [0u8; 8];
    for _ in 0..total {
        r.read_exact(&mut buf)?;
        data.push(T::of(f64::from_le_bytes(buf)));
    }
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        ids.push(read_str(&mut r, i)?);
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        labels.push(match tag[0] {
            0 => Label::Benign,
            1 => Label::Family(read_str(&mut r, i)?),
            t => {
                return Err(DatasetError::MalformedRow {
                    line: i + 1,
                    id: ids.last().cloned(),
                    reason: format!("unknown label tag {t}"),
                })
            }
        });
    }
    Dataset::new(Matrix::from_vec(n, d, data), labels, ids)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R, row: usize) -> Result<String, DatasetError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    let mut s = vec![0u8; u32::from_le_bytes(b) as usize];
    r.read_exact(&mut s)?;
    String::from_utf8(s).map_err(|e| DatasetError::MalformedRow {
        line: row + 1,
        id: None,
        reason: format!("invalid UTF-8: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn ember_file(rows: &[(&str, f64, &str)], n_features: usize) -> String {
        let mut s = String::from("id");
        for j in 0..n_features {
            write!(s, ",f{j}").unwrap();
        }
        s.push_str(",label\n");
        for (id, v, label) in rows {
            s.push_str(id);
            for j in 0..n_features {
                write!(s, ",{}", if j == 7.min(n_features - 1) { *v } else { j as f64 * 0.5 }).unwrap();
            }
            writeln!(s, ",{label}").unwrap();
        }
        s
    }

    #[test]
    fn loads_three_ember_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let text = ember_file(&[("a", 1.0, "benign"), ("b", 2.0, "family:zbot"), ("c", 3.0, "family:emotet")], 2381);
        std::fs::write(&p, text).unwrap();
        let ds: Dataset<f64> = load_dataset(&p, &FeatureSchema::ember(), &LabelColumns::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (3, 2381));
        assert_eq!(ds.labels()[1], Label::family("zbot"));
        assert_eq!(ds.features()[(2, 7)], 3.0);
    }

    #[test]
    fn nan_row_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let text = ember_file(&[("a", 1.0, "benign"), ("bad", f64::NAN, "benign")], 4);
        std::fs::write(&p, text).unwrap();
        let err = load_dataset::<f64>(&p, &FeatureSchema::plain(4), &LabelColumns::default()).unwrap_err();
        match err {
            DatasetError::MalformedRow { line, id, .. } => {
                assert_eq!(line, 3);
                assert_eq!(id.as_deref(), Some("bad"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn short_header_is_schema_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, ember_file(&[("a", 1.0, "benign")], 2380)).unwrap();
        let err = load_dataset::<f64>(&p, &FeatureSchema::ember(), &LabelColumns::default()).unwrap_err();
        assert!(matches!(err, DatasetError::SchemaMismatch { expected: 2381, found: 2380 }));
    }

    #[test]
    fn header_only_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "id,f0,label\n").unwrap();
        assert!(matches!(
            load_dataset::<f64>(&p, &FeatureSchema::plain(1), &LabelColumns::default()),
            Err(DatasetError::EmptyDataset)
        ));
    }

    #[test]
    fn flag_and_family_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "sha,f0,f1,label,avclass\nx,1,2,0,\ny,3,4,1,zbot\n").unwrap();
        let spec = LabelColumns::FlagAndFamily {
            flag: "label".into(),
            family: "avclass".into(),
        };
        let ds: Dataset<f32> = load_dataset(&p, &FeatureSchema::plain(2), &spec).unwrap();
        assert_eq!(ds.labels(), &[Label::Benign, Label::family("zbot")]);
        assert_eq!(ds.features().row(1), &[3.0f32, 4.0]);
        std::fs::write(&p, "sha,f0,f1,label,avclass\nx,1,2,-1,\n").unwrap();
        assert!(load_dataset::<f64>(&p, &FeatureSchema::plain(2), &spec).is_err());
    }

    #[test]
    fn text_and_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_rows(&[[0.1, -2.5e-12], [1.0 / 3.0, 7.0]]).unwrap();
        let ds = Dataset::new(m, vec![Label::family("a,b"), Label::Benign], vec!["i,1".into(), "i2".into()]).unwrap();
        let t = dir.path().join("d.csv");
        let b = dir.path().join("d.bin");
        write_text(&ds, &t).unwrap();
        write_binary(&ds, &b).unwrap();
        let schema = FeatureSchema::plain(2);
        let from_text: Dataset<f64> = load_dataset(&t, &schema, &LabelColumns::default()).unwrap();
        let from_bin: Dataset<f64> = load_dataset(&b, &schema, &LabelColumns::default()).unwrap();
        assert_eq!(from_text, ds);
        assert_eq!(from_bin, ds);
        let bytes = std::fs::read(&b).unwrap();
        assert_eq!(&bytes[..4], b"BCB1");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 0.1);
        assert!(matches!(
            load_dataset::<f64>(&b, &FeatureSchema::plain(3), &LabelColumns::default()),
            Err(DatasetError::SchemaMismatch { .. })
        ));
    }
}
