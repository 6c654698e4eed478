//! Column-oriented numeric data with CSV input and output.

use std::io::{Read, Write};

use super::FitError;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct MissingCell {
    /// 1-based data row, not counting the header.
    pub row: usize,
    pub column: String,
}

/// Location and scale applied to one column.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    standardization: Option<Vec<Standardization>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self, FitError> {
        if names.len() != columns.len() {
            return Err(FitError::InvalidData("one name per column required".into()));
        }
        if let Some(n) = columns.first().map(Vec::len) {
            if columns.iter().any(|c| c.len() != n) {
                return Err(FitError::InvalidData("columns differ in length".into()));
            }
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(FitError::InvalidData(format!("duplicate column `{a}`")));
            }
        }
        Ok(Dataset { names, columns, standardization: None })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i][..])
    }

    pub fn standardization(&self) -> Option<&[Standardization]> {
        self.standardization.as_deref()
    }

    /// Reads a CSV file with a header row. Empty cells and `NA`/`NaN` are
    /// missing; any missing cell rejects the file with a list of locations.
    pub fn from_csv(reader: impl Read) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| FitError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); names.len()];
        let mut missing = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FitError::Csv(e.to_string()))?;
            for (j, cell) in rec.iter().enumerate() {
                let is_missing = cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan");
                if is_missing {
                    missing.push(MissingCell { row: r + 1, column: names[j].clone() });
                    columns[j].push(f64::NAN);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    FitError::Csv(format!("row {}, column `{}`: `{cell}` is not a number", r + 1, names[j]))
                })?;
                columns[j].push(v);
            }
        }
        if !missing.is_empty() {
            return Err(FitError::MissingValues(missing));
        }
        Dataset::new(names, columns)
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<(), FitError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| FitError::Csv(e.to_string());
        w.write_record(&self.names).map_err(err)?;
        for r in 0..self.num_rows() {
            w.write_record(self.columns.iter().map(|c| format!("{}", c[r]))).map_err(err)?;
        }
        w.flush().map_err(|e| FitError::Csv(e.to_string()))
    }

    /// Rescales every column with the mean and standard deviation of the
    /// rows where `norm_group` is true.
    pub fn standardize(&mut self, norm_group: &[bool]) -> Result<(), FitError> {
        if norm_group.len() != self.num_rows() {
            return Err(FitError::InvalidData("norm group length differs from row count".into()));
        }
        let m = norm_group.iter().filter(|&&b| b).count();
        if m < 2 {
            return Err(FitError::InvalidData("norm group needs at least two rows".into()));
        }
        let mut meta = Vec::with_capacity(self.columns.len());
        for (name, col) in self.names.iter().zip(&mut self.columns) {
            let vals = col.iter().zip(norm_group).filter(|(_, &g)| g).map(|(v, _)| *v);
            let mean = vals.clone().sum::<f64>() / m as f64;
            let sd = (vals.map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
            if sd == 0.0 {
                return Err(FitError::InvalidData(format!("column `{name}` is constant in the norm group")));
            }
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            meta.push(Standardization { mean, sd });
        }
        self.standardization = Some(meta);
        Ok(())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Dataset, FitError> {
        let columns = names
            .iter()
            .map(|n| self.column(n).map(<[f64]>::to_vec).ok_or_else(|| FitError::UnknownColumn(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        Dataset::new(names.to_vec(), columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = Dataset::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.5], vec![-0.125, 3.0]]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::from_csv(&buf[..]).unwrap(), d);
    }

    #[test]
    fn missing_cells_reported() {
        let src = "a,b\n1,2\n,3\n4,NA\n";
        match Dataset::from_csv(src.as_bytes()) {
            Err(FitError::MissingValues(cells)) => {
                assert_eq!(cells, [
                    MissingCell { row: 2, column: "a".into() },
                    MissingCell { row: 3, column: "b".into() },
                ]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_numeric_rejected() {
        assert!(matches!(Dataset::from_csv("a\nx\n".as_bytes()), Err(FitError::Csv(_))));
    }

    #[test]
    fn standardize_on_norm_group() {
        let mut d = Dataset::new(vec!["a".into()], vec![vec![1.0, 3.0, 100.0]]).unwrap();
        d.standardize(&[true, true, false]).unwrap();
        let s = d.standardization().unwrap()[0];
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(d.column("a").unwrap()[0], -1.0 / 2f64.sqrt());
    }
}
