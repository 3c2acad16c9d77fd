//! Per-app binary feature vectors and the `app_id,label,<features…>` CSV form.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub sample_id: String,
    pub label: Option<ClassLabel>,
    /// One indicator per matrix column, in column order.
    pub bits: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VectorMatrix {
    pub features: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl VectorMatrix {
    pub fn new(features: Vec<String>) -> Self {
        Self {
            features,
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    /// Column index for each requested name, failing on the first unknown one.
    pub fn columns_for<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self.features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
        names
            .iter()
            .map(|n| {
                index
                    .get(n.as_ref())
                    .copied()
                    .ok_or_else(|| Error::UnknownFeature(n.as_ref().to_string()))
            })
            .collect()
    }

    /// Same rows restricted to `names`, in the given order.
    pub fn project<S: AsRef<str>>(&self, names: &[S]) -> Result<VectorMatrix> {
        let cols = self.columns_for(names)?;
        Ok(VectorMatrix {
            features: names.iter().map(|n| n.as_ref().to_string()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureVector {
                    sample_id: r.sample_id.clone(),
                    label: r.label,
                    bits: cols.iter().map(|&c| r.bits[c]).collect(),
                })
                .collect(),
        })
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, indices: &[usize]) -> VectorMatrix {
        VectorMatrix {
            features: self.features.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let mut header = vec!["app_id", "label"];
        header.extend(self.features.iter().map(String::as_str));
        w.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut rec = Vec::with_capacity(row.bits.len() + 2);
            rec.push(row.sample_id.as_str());
            rec.push(row.label.map(ClassLabel::as_str).unwrap_or(""));
            rec.extend(row.bits.iter().map(|&b| if b { "1" } else { "0" }));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_csv(text: &str) -> Result<VectorMatrix> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.len() < 2 || &header[0] != "app_id" || &header[1] != "label" {
            return Err(Error::Matrix("header must start with `app_id,label`".into()));
        }
        let features: Vec<String> = header.iter().skip(2).map(str::to_string).collect();
        let mut matrix = VectorMatrix::new(features);
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != header.len() {
                return Err(Error::Matrix(format!(
                    "line {line}: expected {} fields, found {}",
                    header.len(),
                    record.len()
                )));
            }
            let label = match &record[1] {
                "" => None,
                s => Some(s.parse::<ClassLabel>()?),
            };
            let bits = record
                .iter()
                .skip(2)
                .map(|v| match v {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Matrix(format!("line {line}: bit `{other}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            matrix.rows.push(FeatureVector {
                sample_id: record[0].to_string(),
                label,
                bits,
            });
        }
        Ok(matrix)
    }

    pub fn read_csv(path: &Path) -> Result<VectorMatrix> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}
