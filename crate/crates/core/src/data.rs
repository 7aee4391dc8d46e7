//! Observation matrices and their CSV form.
//!
//! A dataset file has one row per observation and one column per dimension.
//! An optional header may name the columns; when its last column is called
//! `label`, that column holds integer truth labels.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Row-major `n x m` values.
    values: Vec<f64>,
    n: usize,
    m: usize,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from rows. `m` is needed for the empty dataset.
    pub fn from_rows(rows: &[Vec<f64>], m: usize, labels: Option<Vec<usize>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::input("dataset dimension must be at least 1"));
        }
        let mut values = Vec::with_capacity(rows.len() * m);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != m {
                return Err(Error::input(format!("row {} has {} columns, expected {m}", i + 1, r.len())));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::input(format!("row {} has a non-finite value", i + 1)));
            }
            values.extend_from_slice(r);
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::input("label count does not match row count"));
            }
        }
        Ok(Dataset { values, n: rows.len(), m, labels })
    }

    /// A dataset with no observations; used for prior-only chains.
    pub fn empty(m: usize) -> Self {
        Dataset { values: Vec::new(), n: 0, m, labels: None }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    /// Per-column sample mean and (population) variance.
    pub fn column_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mut mean = vec![0.0; self.m];
        let mut var = vec![0.0; self.m];
        if self.n == 0 {
            return (mean, var);
        }
        for r in self.rows() {
            for d in 0..self.m {
                mean[d] += r[d];
            }
        }
        mean.iter_mut().for_each(|x| *x /= self.n as f64);
        for r in self.rows() {
            for d in 0..self.m {
                var[d] += (r[d] - mean[d]).powi(2);
            }
        }
        var.iter_mut().for_each(|x| *x /= self.n as f64);
        (mean, var)
    }

    /// Applies `y -> (y - shift) / scale` per column.
    pub fn standardized(&self, shift: &[f64], scale: &[f64]) -> Dataset {
        let mut values = self.values.clone();
        for r in values.chunks_exact_mut(self.m) {
            for d in 0..self.m {
                r[d] = (r[d] - shift[d]) / scale[d];
            }
        }
        Dataset { values, n: self.n, m: self.m, labels: self.labels.clone() }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let mut rows = Vec::new();
        let mut labels: Option<Vec<usize>> = None;
        let mut m = None;

        let first = match records.next() {
            Some(r) => r?,
            None => return Err(Error::input("dataset file is empty")),
        };
        let is_header = first.iter().any(|f| f.parse::<f64>().is_err());
        let has_label = is_header && first.iter().last().is_some_and(|f| f.eq_ignore_ascii_case("label"));
        if has_label {
            labels = Some(Vec::new());
        }
        let mut pending = if is_header { None } else { Some(first) };

        let mut line = if is_header { 1 } else { 0 };
        loop {
            let rec = match pending.take() {
                Some(r) => r,
                None => match records.next() {
                    Some(r) => r?,
                    None => break,
                },
            };
            line += 1;
            let fields: Vec<&str> = rec.iter().collect();
            let (vals, lab) = if has_label {
                let (l, rest) = fields.split_last().ok_or_else(|| Error::input("empty row"))?;
                (rest.to_vec(), Some(*l))
            } else {
                (fields, None)
            };
            let mut row = Vec::with_capacity(vals.len());
            for f in vals {
                if f.is_empty() {
                    return Err(Error::input(format!("line {line}: missing value")));
                }
                row.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::input(format!("line {line}: cannot parse {f:?} as a number")))?,
                );
            }
            if let (Some(ls), Some(l)) = (labels.as_mut(), lab) {
                ls.push(
                    l.parse::<usize>()
                        .map_err(|_| Error::input(format!("line {line}: label {l:?} is not a nonnegative integer")))?,
                );
            }
            match m {
                None => m = Some(row.len()),
                Some(mm) if mm != row.len() => {
                    return Err(Error::input(format!("line {line}: expected {mm} columns, found {}", row.len())))
                }
                _ => {}
            }
            rows.push(row);
        }
        let m = m.ok_or_else(|| Error::input("dataset has no observations"))?;
        Dataset::from_rows(&rows, m, labels)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| {
            Error::input(format!(
                "cannot open {}: {e}; expected CSV with one row per observation, one numeric column per \
                 dimension and an optional final 'label' column declared in a header",
                path.display()
            ))
        })?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.m).map(|d| format!("y{d}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for (i, r) in self.rows().enumerate() {
            let mut rec: Vec<String> = r.iter().map(|x| x.to_string()).collect();
            if let Some(l) = &self.labels {
                rec.push(l[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}
