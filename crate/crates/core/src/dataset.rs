//! Labelled binary-classification data and its CSV representation.
//!
//! The CSV schema is `f1,…,fq,label[,true_prob]` with labels written as
//! `-1`/`1` and reals with nine significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::format_real;

/// Feature matrix (row-major), ±1 labels and, for simulated data, the true
/// conditional probabilities `P(Y = 1 | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<f64>,
    true_probs: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<f64>,
        true_probs: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = labels.len();
        if n_features == 0 {
            return Err(Error::domain("dataset needs at least one feature"));
        }
        if features.len() != n * n_features {
            return Err(Error::domain(format!(
                "feature matrix has {} values, expected {} x {}",
                features.len(),
                n,
                n_features
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite feature value in row {}",
                i / n_features
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::domain(format!(
                "label {} in row {i} is not -1 or 1",
                labels[i]
            )));
        }
        if let Some(p) = &true_probs {
            if p.len() != n {
                return Err(Error::domain("true_probs length differs from labels"));
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::domain("true_probs outside [0, 1]"));
            }
        }
        Ok(Dataset {
            features,
            n_features,
            labels,
            true_probs,
        })
    }

    /// A dataset with no rows (used for "no hold-out").
    pub fn empty(n_features: usize) -> Self {
        Dataset {
            features: Vec::new(),
            n_features: n_features.max(1),
            labels: Vec::new(),
            true_probs: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    #[inline]
    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn true_probs(&self) -> Option<&[f64]> {
        self.true_probs.as_deref()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|&&y| y > 0.0).count()
    }

    /// Rows `indices` in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            true_probs: self
                .true_probs
                .as_ref()
                .map(|p| indices.iter().map(|&i| p[i]).collect()),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.write_csv_to(&mut out).map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let mut header: Vec<String> = (1..=self.n_features).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        if self.true_probs.is_some() {
            header.push("true_prob".into());
        }
        writeln!(out, "{}", header.join(","))?;
        for (i, row) in self.rows().enumerate() {
            let mut fields: Vec<String> = row.iter().map(|&v| format_real(v)).collect();
            fields.push(if self.labels[i] > 0.0 { "1" } else { "-1" }.into());
            if let Some(p) = &self.true_probs {
                fields.push(format_real(p[i]));
            }
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Dataset> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, path)
    }

    /// Parses the CSV schema from any reader; `path` is only used in messages.
    pub fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Dataset> {
        let parse_err = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let names: Vec<&str> = headers.iter().collect();
        let has_prob = names.last() == Some(&"true_prob");
        let label_col = if has_prob {
            names.len().checked_sub(2)
        } else {
            names.len().checked_sub(1)
        };
        let label_col = match label_col {
            Some(c) if c >= 1 && names[c] == "label" => c,
            _ => {
                return Err(parse_err(
                    1,
                    "header must be f1,...,fq,label[,true_prob]".to_string(),
                ))
            }
        };
        for (j, name) in names[..label_col].iter().enumerate() {
            if *name != format!("f{}", j + 1) {
                return Err(parse_err(1, format!("unexpected column name {name:?}")));
            }
        }

        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut probs = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let real = |s: &str, what: &str| -> Result<f64> {
                if s.is_empty() {
                    return Err(parse_err(line, format!("missing {what}")));
                }
                match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_err(line, format!("invalid {what} {s:?}"))),
                }
            };
            for j in 0..label_col {
                features.push(real(&record[j], "feature value")?);
            }
            let label = real(&record[label_col], "label")?;
            if label != 1.0 && label != -1.0 {
                return Err(parse_err(line, format!("label {label} is not -1 or 1")));
            }
            labels.push(label);
            if has_prob {
                let p = real(&record[label_col + 1], "true_prob")?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(parse_err(line, format!("true_prob {p} outside [0, 1]")));
                }
                probs.push(p);
            }
        }
        Dataset::new(features, label_col, labels, has_prob.then_some(probs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        Dataset::read_csv(text.as_bytes(), Path::new("mem.csv"))
    }

    #[test]
    fn reads_optional_true_prob() {
        let d = parse("f1,f2,label,true_prob\n0.5,1,1,0.9\n0.25,2,-1,0.1\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.labels(), &[1.0, -1.0]);
        assert_eq!(d.true_probs(), Some(&[0.9, 0.1][..]));

        let d = parse("f1,label\n3,1\n").unwrap();
        assert!(d.true_probs().is_none());
    }

    #[test]
    fn rejects_label_zero_with_line_number() {
        let err = parse("f1,label\n1,1\n2,0\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("label"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_values() {
        assert!(matches!(
            parse("f1,f2,label\n1,,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse("f1,f2,label\n1,NaN,1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse("f1,label\n1\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(parse("a,b,label\n1,2,1\n").is_err());
        assert!(parse("f1,f2\n1,2\n").is_err());
    }

    #[test]
    fn subset_keeps_probs() {
        let d = Dataset::new(
            vec![1.0, 2.0, 3.0],
            1,
            vec![1.0, -1.0, 1.0],
            Some(vec![0.9, 0.1, 0.5]),
        )
        .unwrap();
        let s = d.subset(&[2, 0]);
        assert_eq!(s.row(0), &[3.0]);
        assert_eq!(s.labels(), &[1.0, 1.0]);
        assert_eq!(s.true_probs(), Some(&[0.5, 0.9][..]));
    }
}
