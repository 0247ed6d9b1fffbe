//! Unit-level data: one record per subject with the two exposures, the
//! binary outcome, the secondary outcome, and covariates.

use crate::error::{Error, Result};
use crate::latent::ExposureCell;
use std::io::{Read, Write};
use std::path::Path;

/// One observed unit. `x` always carries the leading intercept 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord {
    pub z: u8,
    pub m: u8,
    pub y: u8,
    pub w: f64,
    pub x: Vec<f64>,
}

impl UnitRecord {
    pub fn cell(&self) -> ExposureCell {
        ExposureCell::new(self.z, self.m)
    }
}

/// An ordered collection of units sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<UnitRecord>,
}

impl Dataset {
    pub fn new(records: Vec<UnitRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset("dataset is empty".into()));
        }
        let p = records[0].x.len();
        if p == 0 {
            return Err(Error::InvalidDataset(
                "covariate vectors must at least contain the intercept".into(),
            ));
        }
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != p {
                return Err(Error::InvalidDataset(format!(
                    "record {i} has covariate dimension {}, expected {p}",
                    r.x.len()
                )));
            }
            if !r.w.is_finite() || r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "record {i} contains a non-finite value"
                )));
            }
            if r.z > 1 || r.m > 1 || r.y > 1 {
                return Err(Error::InvalidDataset(format!(
                    "record {i} has non-binary z/m/y"
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[UnitRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Covariate dimension including the intercept.
    pub fn dim(&self) -> usize {
        self.records[0].x.len()
    }

    /// Indices of the units in each (z, m, y) stratum; key = 4z + 2m + y.
    pub fn strata(&self) -> [Vec<usize>; 8] {
        let mut out: [Vec<usize>; 8] = Default::default();
        for (i, r) in self.records.iter().enumerate() {
            out[(r.z as usize) * 4 + (r.m as usize) * 2 + r.y as usize].push(i);
        }
        out
    }

    /// Variance of the secondary outcome over the whole dataset.
    pub fn w_variance(&self) -> f64 {
        let n = self.records.len() as f64;
        let mean = self.records.iter().map(|r| r.w).sum::<f64>() / n;
        self.records
            .iter()
            .map(|r| (r.w - mean).powi(2))
            .sum::<f64>()
            / n
    }

    /// Build a new dataset from the given record indices (with repetition),
    /// as used by resampling.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| self.records[i].clone())
            .collect::<Vec<_>>();
        Dataset::new(records)
    }

    /// Read `z,m,y,w,x1,...,xk` rows; the intercept is added internally.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names.len() < 4 || names[0] != "z" || names[1] != "m" || names[2] != "y" || names[3] != "w"
        {
            return Err(Error::InvalidDataset(format!(
                "header must start with z,m,y,w, got {names:?}"
            )));
        }
        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(Error::InvalidDataset(format!(
                    "row {row} has {} fields, expected {}",
                    rec.len(),
                    names.len()
                )));
            }
            let bit = |i: usize, name: &str| -> Result<u8> {
                match &rec[i] {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(Error::InvalidDataset(format!(
                        "row {row}: {name} must be 0/1, got {other:?}"
                    ))),
                }
            };
            let real = |i: usize| -> Result<f64> {
                rec[i].parse::<f64>().map_err(|_| {
                    Error::InvalidDataset(format!("row {row}: bad numeric value {:?}", &rec[i]))
                })
            };
            let mut x = Vec::with_capacity(names.len() - 3);
            x.push(1.0);
            for i in 4..names.len() {
                x.push(real(i)?);
            }
            records.push(UnitRecord {
                z: bit(0, "z")?,
                m: bit(1, "m")?,
                y: bit(2, "y")?,
                w: real(3)?,
                x,
            });
        }
        Dataset::new(records)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Write the standard CSV schema. `labels`, when given, appends a
    /// ground-truth class column.
    pub fn write_csv<W: Write>(&self, out: W, labels: Option<&[crate::latent::LatentClass]>) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let k = self.dim() - 1;
        let mut header: Vec<String> = vec!["z".into(), "m".into(), "y".into(), "w".into()];
        for j in 1..=k {
            header.push(format!("x{j}"));
        }
        if labels.is_some() {
            header.push("class".into());
        }
        wtr.write_record(&header)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row: Vec<String> = vec![
                r.z.to_string(),
                r.m.to_string(),
                r.y.to_string(),
                format!("{:.17e}", r.w),
            ];
            for v in &r.x[1..] {
                row.push(format!("{v:.17e}"));
            }
            if let Some(ls) = labels {
                row.push(ls[i].bitstring());
            }
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
